#include "derev/psd.hpp"

#include <cmath>
#include <stdexcept>

namespace derev {

std::vector<double> channel_average_magnitude(std::span<const cd> frame,
                                              int num_bins, int num_channels) {
  if (static_cast<int>(frame.size()) != num_bins * num_channels)
    throw std::invalid_argument("channel_average_magnitude: shape mismatch");
  std::vector<double> avg(num_bins);
  for (int f = 0; f < num_bins; ++f) {
    double s = 0.0;
    for (int d = 0; d < num_channels; ++d)
      s += std::abs(frame[static_cast<size_t>(f) * num_channels + d]);
    avg[f] = s / num_channels;
  }
  return avg;
}

PsdFrame mask_to_psd(const MaskFrame& mask,
                     const std::vector<double>& avg_mag) {
  if (mask.size() != avg_mag.size())
    throw std::invalid_argument("mask_to_psd: shape mismatch");
  PsdFrame lambda(mask.size());
  for (size_t f = 0; f < mask.size(); ++f) {
    double m = mask[f] * avg_mag[f];
    lambda[f] = m * m;
  }
  return lambda;
}

PsdFrame oracle_psd(std::span<const cd> target_frame, int num_bins,
                    int num_channels) {
  auto avg = channel_average_magnitude(target_frame, num_bins, num_channels);
  PsdFrame lambda(num_bins);
  for (int f = 0; f < num_bins; ++f) lambda[f] = avg[f] * avg[f];
  return lambda;
}

SmoothedPsd::SmoothedPsd(int num_bins, double beta)
    : beta_(beta), lambda_(num_bins, 0.0) {
  if (!(beta > 0.0 && beta < 1.0))
    throw std::invalid_argument("smoothing beta must be in (0,1)");
}

PsdFrame SmoothedPsd::step(std::span<const cd> frame, int num_channels) {
  auto avg = channel_average_magnitude(frame, static_cast<int>(lambda_.size()),
                                       num_channels);
  for (size_t f = 0; f < lambda_.size(); ++f)
    lambda_[f] = beta_ * lambda_[f] + (1.0 - beta_) * avg[f] * avg[f];
  return lambda_;
}

void SmoothedPsd::reset() { std::fill(lambda_.begin(), lambda_.end(), 0.0); }

}  // namespace derev
