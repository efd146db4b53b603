#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "derev/train.hpp"
#include "derev/wav.hpp"

namespace derev {

struct SceneSpec {
  std::array<double, 3> room = {6.0, 5.0, 3.0};  // meters
  std::array<double, 3> source = {2.0, 3.0, 1.5};
  std::array<std::array<double, 3>, 2> mics = {
      {{4.0, 2.0, 1.5}, {4.16, 2.0, 1.5}}};  // ~0.16 m spacing
  double t60 = 0.6;  // seconds, in [0.4, 1.0]
  int sample_rate = 16000;
  uint64_t seed = 0;

  bool valid() const;
};

struct Rir {
  int sample_rate = 16000;
  std::vector<std::vector<double>> taps;  // per channel
  std::vector<int> direct_index;          // direct-path arrival, samples
  std::vector<double> direct_amplitude;   // 1/(4 pi d)
};

// Shoebox image-source RIR with frequency-independent wall absorption solved
// from the requested T60 via Sabine's formula.
Rir generate_rir(const SceneSpec& spec);

// Lower-level kernel: uniform wall reflection coefficient beta, fixed length.
Rir image_source_rir(const std::array<double, 3>& room,
                     const std::array<double, 3>& source,
                     const std::vector<std::array<double, 3>>& mics,
                     double beta, int length, int sample_rate);

// HA: RIR windowed to [arrival, arrival + 40 ms). CI: direct path only.
Rir split_target_rir(const Rir& rir, Scenario scenario);

// Schroeder backward-integrated decay fit (-5..-35 dB) -> T60 estimate.
double measure_t60(const std::vector<double>& rir_taps, int sample_rate);

// Concatenate utterances with seeded 100-300 ms gaps until >= min_seconds.
// The seed also permutes the utterance order.
std::vector<double> build_sequence(
    const std::vector<std::vector<double>>& utterances, uint64_t seed,
    double min_seconds = 20.0, int sample_rate = 16000);

// Speech-like synthetic utterance: AR(8)-filtered noise (four random
// two-pole resonators) with a 4 Hz syllabic amplitude envelope.
std::vector<double> synth_utterance(uint64_t seed, double seconds,
                                    int sample_rate = 16000);

struct RenderedPair {
  Audio reverberant;  // D=2
  Audio target;       // D=2
  Scenario scenario = Scenario::HA;
  double t60 = 0.0;
  uint64_t seed = 0;
};

// Convolve the dry sequence with the full and target RIRs; both outputs are
// time-aligned (direct-path delay included) and equal length.
RenderedPair render(const std::vector<double>& sequence, const Rir& rir,
                    const Rir& target_rir, Scenario scenario);

// Seeded random scene with the requested T60: room dims, source and a 2-mic
// array placed strictly inside.
SceneSpec random_scene(uint64_t seed, double t60);

}  // namespace derev
