#pragma once

#include <Eigen/Dense>
#include <complex>
#include <string>
#include <vector>

#include "derev/stft.hpp"

namespace derev {

struct WpeConfig {
  int num_taps = 10;          // K
  int delay = 5;              // Delta (5 HA, 3 CI)
  double forgetting = 0.99;   // alpha
  int num_channels = 2;       // D
  double gate_threshold_db = -30.0;
  double psd_floor = 1e-10;

  int stacked_dim() const { return num_taps * num_channels; }  // DK
  int buffer_len() const { return delay + num_taps - 1; }
  bool valid() const {
    return num_taps >= 1 && delay >= 1 && num_channels >= 1 &&
           forgetting > 0.0 && forgetting < 1.0 && psd_floor > 0.0;
  }
};

// Per-frequency RLS statistics plus the shared delay buffer and gate state.
struct WpeState {
  WpeConfig cfg;
  int num_bins = 0;

  // per frequency
  std::vector<Eigen::MatrixXcd> filter;   // G, DK x D
  std::vector<Eigen::MatrixXcd> inv_cov;  // R^-1, DK x DK, Hermitian PD

  // Ring buffer of the last delay+K-1 input frames: per frequency a
  // D x buffer_len matrix. head is the slot holding frame t-1.
  std::vector<Eigen::MatrixXcd> buffer;
  int buffer_head = 0;

  // Running max of channel-averaged frame power, the -30 dB gate reference.
  double gate_reference = 0.0;
};

WpeState init_state(const WpeConfig& cfg, int num_bins);

// X_{t-Delta} = [x_{t-Delta}; ...; x_{t-Delta-K+1}], DK vector,
// most recent first. Valid before the current frame is pushed.
Eigen::VectorXcd stack_delayed(const WpeState& state, int f);

// K = (1-a) R^-1 X / (a*lambda + (1-a) X^H R^-1 X)
Eigen::VectorXcd kalman_gain(const WpeState& state, int f,
                             const Eigen::VectorXcd& X, double lambda);

// R^-1 <- (1/a) R^-1 - (1/a) K X^H R^-1, then Hermitian-symmetrized.
void update_inverse_cov(WpeState& state, int f, const Eigen::VectorXcd& gain,
                        const Eigen::VectorXcd& X);

// G <- G + K (x_t - G^H X)^H, with the pre-update G.
void update_filter(WpeState& state, int f, const Eigen::VectorXcd& gain,
                   const Eigen::VectorXcd& x_t, const Eigen::VectorXcd& X);

// nu_hat = x_t - G^H X
Eigen::VectorXcd predict(const WpeState& state, int f,
                         const Eigen::VectorXcd& x_t,
                         const Eigen::VectorXcd& X);

// One full frame: predict every bin, update statistics if the gate is open,
// push x_t into the delay buffer. frame/output layout f*D+d, lambda length F.
// Frequencies are independent; wpe_step runs them under OpenMP,
// wpe_step_serial is the reference path (identical arithmetic).
std::vector<cd> wpe_step(WpeState& state, const std::vector<cd>& frame,
                         const std::vector<double>& lambda);
std::vector<cd> wpe_step_serial(WpeState& state, const std::vector<cd>& frame,
                                const std::vector<double>& lambda);

// Channel-averaged frame power and the gate decision used by the step
// functions (exposed for the training path, which replays the decisions).
double frame_power(const std::vector<cd>& frame, int num_bins,
                   int num_channels);
bool gate_open(WpeState& state, double power);  // updates gate_reference

// Versioned binary snapshot for checkpoint/resume.
void save_state(const WpeState& state, const std::string& path);
WpeState load_state(const std::string& path);

}  // namespace derev
