#pragma once

#include <optional>
#include <string>
#include <vector>

#include "derev/config.hpp"
#include "derev/lstm.hpp"
#include "derev/metrics.hpp"
#include "derev/psd.hpp"
#include "derev/stft.hpp"
#include "derev/train.hpp"
#include "derev/wav.hpp"
#include "derev/wpe.hpp"

namespace derev {

enum class PsdMode { Vanilla, Oracle, Model };

PsdMode parse_psd_mode(const std::string& s);

// Frame-by-frame STFT -> PSD -> WPE -> iSTFT. Oracle mode needs the aligned
// target; model mode needs a checkpointed mask model.
Audio dereverb(const Audio& input, const StftConfig& stft_cfg,
               const WpeConfig& wpe_cfg, PsdMode mode,
               double smoothing_beta = 0.85, const MaskModel* model = nullptr,
               const Audio* target = nullptr);

struct ManifestEntry {
  std::string id;
  std::string input_wav;
  std::string target_wav;
  Scenario scenario = Scenario::HA;
  double t60 = 0.0;
  uint64_t seed = 0;
};

void write_manifest(const std::vector<ManifestEntry>& entries,
                    const std::string& path);
std::vector<ManifestEntry> read_manifest(const std::string& path);

// Loads the WAV pairs, STFTs them and cuts equal-length segments for
// Algorithm-style training. The last val_fraction of sequences (at least one
// when the set is big enough) becomes the validation split.
Dataset build_dataset(const std::vector<ManifestEntry>& entries,
                      const StftConfig& stft_cfg, int segment_frames,
                      double val_fraction, bool per_channel_loss = false);

SegmentData make_segments_source(const Audio& input, const Audio& target,
                                 const StftConfig& stft_cfg,
                                 bool per_channel_loss);
std::vector<SegmentData> cut_segments(const SegmentData& whole,
                                      int segment_frames);

std::vector<EvalItem> load_eval_items(const std::vector<ManifestEntry>& entries);

// JSON-lines training history: {"epoch":..,"train_loss":..,"val_loss":..,"lr":..}
void write_history(const std::vector<EpochRecord>& history,
                   const std::string& path);

// Log-energy spectrogram (dB), frames x bins, channel 0.
std::vector<std::vector<double>> log_spectrogram(const Audio& audio,
                                                 const StftConfig& cfg);
void write_matrix_csv(const std::vector<std::vector<double>>& m,
                      const std::string& path);

}  // namespace derev
