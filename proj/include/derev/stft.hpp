#pragma once

#include <complex>
#include <deque>
#include <memory>
#include <vector>

#include "derev/wav.hpp"

namespace derev {

using cd = std::complex<double>;

struct StftConfig {
  int window_len = 512;  // 32 ms at 16 kHz
  int hop = 128;         // 75 % overlap
  int fft_len = 512;
  int sample_rate = 16000;

  int num_bins() const { return fft_len / 2 + 1; }
  bool valid() const {
    return window_len > 0 && hop > 0 && fft_len >= window_len &&
           window_len % hop == 0 && sample_rate > 0;
  }
};

// Complex STFT tensor indexed (frame t, bin f, channel d).
struct MultiChannelSpectrum {
  int num_frames = 0;
  int num_bins = 0;
  int num_channels = 0;
  std::vector<cd> data;

  MultiChannelSpectrum() = default;
  MultiChannelSpectrum(int T, int F, int D)
      : num_frames(T), num_bins(F), num_channels(D),
        data(static_cast<size_t>(T) * F * D) {}

  cd& at(int t, int f, int d) {
    return data[(static_cast<size_t>(t) * num_bins + f) * num_channels + d];
  }
  const cd& at(int t, int f, int d) const {
    return data[(static_cast<size_t>(t) * num_bins + f) * num_channels + d];
  }
};

// Square root of the periodic Hann window; used for both analysis and
// synthesis so the squared window satisfies COLA at 75 % overlap.
std::vector<double> make_window(const StftConfig& cfg);

// One-frame streaming analysis. Feed hop samples per push; frames start
// coming out once window_len samples have accumulated. Frame t covers input
// samples [t*hop, t*hop + window_len).
class StftAnalyzer {
 public:
  StftAnalyzer(const StftConfig& cfg, int num_channels);
  ~StftAnalyzer();
  StftAnalyzer(StftAnalyzer&&) noexcept;
  StftAnalyzer& operator=(StftAnalyzer&&) noexcept;

  // samples: planar, hop samples per channel. Returns true and fills `frame`
  // (F x D, layout f*D+d) once enough input is buffered.
  bool push(const std::vector<std::vector<double>>& samples,
            std::vector<cd>& frame);

  const StftConfig& config() const;
  int num_channels() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// One-frame streaming synthesis via weighted overlap-add. Each pushed frame
// yields hop output samples per channel.
class StftSynthesizer {
 public:
  StftSynthesizer(const StftConfig& cfg, int num_channels);
  ~StftSynthesizer();
  StftSynthesizer(StftSynthesizer&&) noexcept;
  StftSynthesizer& operator=(StftSynthesizer&&) noexcept;

  // frame: F x D as produced by StftAnalyzer. out gets hop samples/channel.
  void push(const std::vector<cd>& frame,
            std::vector<std::vector<double>>& out);

  // Remaining window_len - hop samples of the overlap-add tail.
  void flush(std::vector<std::vector<double>>& out);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Batch wrappers around the streaming objects.
MultiChannelSpectrum analyze(const Audio& audio, const StftConfig& cfg);
Audio synthesize(const MultiChannelSpectrum& spec, const StftConfig& cfg);

}  // namespace derev
