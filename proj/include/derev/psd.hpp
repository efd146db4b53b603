#pragma once

#include <span>
#include <vector>

#include "derev/stft.hpp"

namespace derev {

// lambda_{t,f}: per-frame nonnegative PSD estimate, length F. Flooring
// happens at the psd->wpe boundary, not here.
using PsdFrame = std::vector<double>;

// Mask values in (0,1), length F.
using MaskFrame = std::vector<double>;

// (1/D) sum_d |x_{t,f,d}| -- mean of magnitudes, phase-robust.
std::vector<double> channel_average_magnitude(std::span<const cd> frame,
                                              int num_bins, int num_channels);

// lambda = (M .* |xbar|)^2
PsdFrame mask_to_psd(const MaskFrame& mask, const std::vector<double>& avg_mag);

// lambda = |nubar|^2 from the known target frame.
PsdFrame oracle_psd(std::span<const cd> target_frame, int num_bins,
                    int num_channels);

// Recursive smoothing of the channel-averaged periodogram:
// lambda_t = beta*lambda_{t-1} + (1-beta)*|xbar_t|^2
class SmoothedPsd {
 public:
  SmoothedPsd(int num_bins, double beta = 0.85);

  PsdFrame step(std::span<const cd> frame, int num_channels);
  void reset();

  double beta() const { return beta_; }

 private:
  double beta_;
  std::vector<double> lambda_;
};

}  // namespace derev
