// Benchmark of the per-frequency WPE kernel: OpenMP-parallel wpe_step vs the
// serial reference, plus the resulting real-time factor at the default
// configuration (D=2, K=10, F=257, 8 ms hop).

#include <chrono>
#include <cstdio>
#include <random>
#include <vector>

#include "derev/stft.hpp"
#include "derev/wpe.hpp"

using namespace derev;
using clk = std::chrono::steady_clock;

namespace {

std::vector<std::vector<cd>> random_frames(int num, int num_bins,
                                           int num_channels, uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto u = [&] { return (rng() >> 11) * 0x1.0p-53 * 2.0 - 1.0; };
  std::vector<std::vector<cd>> frames(num);
  for (auto& fr : frames) {
    fr.resize(static_cast<size_t>(num_bins) * num_channels);
    for (auto& v : fr) v = cd(u(), u());
  }
  return frames;
}

double run(bool parallel, const std::vector<std::vector<cd>>& frames,
           const WpeConfig& cfg, int num_bins,
           const std::vector<double>& lambda) {
  WpeState state = init_state(cfg, num_bins);
  auto t0 = clk::now();
  for (const auto& fr : frames)
    parallel ? wpe_step(state, fr, lambda) : wpe_step_serial(state, fr, lambda);
  return std::chrono::duration<double>(clk::now() - t0).count();
}

}  // namespace

int main(int argc, char** argv) {
  int num_frames = argc > 1 ? std::atoi(argv[1]) : 500;

  StftConfig stft;
  WpeConfig cfg;
  const int F = stft.num_bins();
  auto frames = random_frames(num_frames, F, cfg.num_channels, 42);
  std::vector<double> lambda(F, 1.0);

  // warm up allocators and page in the working set
  run(true, random_frames(16, F, cfg.num_channels, 1), cfg, F, lambda);

  double t_serial = run(false, frames, cfg, F, lambda);
  double t_parallel = run(true, frames, cfg, F, lambda);
  double audio_seconds =
      static_cast<double>(num_frames) * stft.hop / stft.sample_rate;

  std::printf("frames            : %d (%.2f s of audio)\n", num_frames,
              audio_seconds);
  std::printf("serial reference  : %.3f s  (RTF %.3f)\n", t_serial,
              t_serial / audio_seconds);
  std::printf("OpenMP kernel     : %.3f s  (RTF %.3f)\n", t_parallel,
              t_parallel / audio_seconds);
  std::printf("speedup           : %.2fx\n", t_serial / t_parallel);
  return 0;
}
