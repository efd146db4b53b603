#include "derev/wpe.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace derev {

namespace {

void step_one_bin(WpeState& state, int f, const std::vector<cd>& frame,
                  double lambda, bool update, std::vector<cd>& out) {
  const int D = state.cfg.num_channels;
  Eigen::VectorXcd x_t(D);
  for (int d = 0; d < D; ++d) x_t(d) = frame[static_cast<size_t>(f) * D + d];

  Eigen::VectorXcd X = stack_delayed(state, f);
  Eigen::VectorXcd nu = predict(state, f, x_t, X);
  for (int d = 0; d < D; ++d) out[static_cast<size_t>(f) * D + d] = nu(d);

  if (update) {
    Eigen::VectorXcd gain = kalman_gain(state, f, X, lambda);
    update_inverse_cov(state, f, gain, X);
    update_filter(state, f, gain, x_t, X);
  }

  // push x_t, overwriting the oldest slot
  const int B = state.cfg.buffer_len();
  int slot = (state.buffer_head + 1) % B;
  state.buffer[f].col(slot) = x_t;
}

std::vector<cd> step_impl(WpeState& state, const std::vector<cd>& frame,
                          const std::vector<double>& lambda, bool parallel) {
  const int F = state.num_bins;
  const int D = state.cfg.num_channels;
  if (static_cast<int>(frame.size()) != F * D ||
      static_cast<int>(lambda.size()) != F)
    throw std::invalid_argument("wpe_step: shape mismatch");

  const double power = frame_power(frame, F, D);
  const bool update = gate_open(state, power);

  std::vector<cd> out(frame.size());
  if (parallel) {
#pragma omp parallel for schedule(static)
    for (int f = 0; f < F; ++f)
      step_one_bin(state, f, frame, std::max(lambda[f], state.cfg.psd_floor),
                   update, out);
  } else {
    for (int f = 0; f < F; ++f)
      step_one_bin(state, f, frame, std::max(lambda[f], state.cfg.psd_floor),
                   update, out);
  }
  state.buffer_head = (state.buffer_head + 1) % state.cfg.buffer_len();
  return out;
}

}  // namespace

WpeState init_state(const WpeConfig& cfg, int num_bins) {
  if (!cfg.valid() || num_bins <= 0)
    throw std::invalid_argument("invalid WpeConfig");
  WpeState s;
  s.cfg = cfg;
  s.num_bins = num_bins;
  const int DK = cfg.stacked_dim();
  s.filter.assign(num_bins, Eigen::MatrixXcd::Zero(DK, cfg.num_channels));
  s.inv_cov.assign(num_bins, Eigen::MatrixXcd::Identity(DK, DK));
  s.buffer.assign(num_bins,
                  Eigen::MatrixXcd::Zero(cfg.num_channels, cfg.buffer_len()));
  s.buffer_head = 0;
  s.gate_reference = 0.0;
  return s;
}

Eigen::VectorXcd stack_delayed(const WpeState& state, int f) {
  const int D = state.cfg.num_channels;
  const int K = state.cfg.num_taps;
  const int B = state.cfg.buffer_len();
  Eigen::VectorXcd X(D * K);
  for (int k = 0; k < K; ++k) {
    // frame t - Delta - k is (Delta + k) frames back; head holds t-1
    int back = state.cfg.delay + k - 1;
    int slot = ((state.buffer_head - back) % B + B) % B;
    X.segment(static_cast<Eigen::Index>(k) * D, D) = state.buffer[f].col(slot);
  }
  return X;
}

Eigen::VectorXcd kalman_gain(const WpeState& state, int f,
                             const Eigen::VectorXcd& X, double lambda) {
  if (!X.allFinite() || !std::isfinite(lambda))
    throw std::invalid_argument("kalman_gain: non-finite input");
  const double a = state.cfg.forgetting;
  const Eigen::MatrixXcd& R = state.inv_cov[f];
  Eigen::VectorXcd RX = R * X;
  double den = a * lambda + (1.0 - a) * (X.dot(RX)).real();
  return ((1.0 - a) / den) * RX;
}

void update_inverse_cov(WpeState& state, int f, const Eigen::VectorXcd& gain,
                        const Eigen::VectorXcd& X) {
  const double a = state.cfg.forgetting;
  Eigen::MatrixXcd& R = state.inv_cov[f];
  Eigen::RowVectorXcd XhR = X.adjoint() * R;
  Eigen::MatrixXcd next = (R - gain * XhR) / a;
  R = 0.5 * (next + next.adjoint());
}

void update_filter(WpeState& state, int f, const Eigen::VectorXcd& gain,
                   const Eigen::VectorXcd& x_t, const Eigen::VectorXcd& X) {
  Eigen::MatrixXcd& G = state.filter[f];
  Eigen::VectorXcd err = x_t - G.adjoint() * X;
  G += gain * err.adjoint();
}

Eigen::VectorXcd predict(const WpeState& state, int f,
                         const Eigen::VectorXcd& x_t,
                         const Eigen::VectorXcd& X) {
  return x_t - state.filter[f].adjoint() * X;
}

double frame_power(const std::vector<cd>& frame, int num_bins,
                   int num_channels) {
  double p = 0.0;
  for (const cd& v : frame) p += std::norm(v);
  return p / (static_cast<double>(num_bins) * num_channels);
}

bool gate_open(WpeState& state, double power) {
  state.gate_reference = std::max(state.gate_reference, power);
  if (power <= 0.0 || state.gate_reference <= 0.0) return false;
  double threshold =
      state.gate_reference * std::pow(10.0, state.cfg.gate_threshold_db / 10.0);
  return power >= threshold;
}

std::vector<cd> wpe_step(WpeState& state, const std::vector<cd>& frame,
                         const std::vector<double>& lambda) {
  return step_impl(state, frame, lambda, true);
}

std::vector<cd> wpe_step_serial(WpeState& state, const std::vector<cd>& frame,
                                const std::vector<double>& lambda) {
  return step_impl(state, frame, lambda, false);
}

// ---------------------------------------------------------------------------
// Snapshot format: magic "WPES", version u32, config fields, num_bins,
// buffer_head, gate_reference, then raw complex doubles per frequency.

namespace {
constexpr uint32_t kSnapshotVersion = 1;

template <typename T>
void wr(std::ofstream& f, const T& v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
void rd(std::ifstream& f, T& v) {
  f.read(reinterpret_cast<char*>(&v), sizeof(T));
}

void wr_mat(std::ofstream& f, const Eigen::MatrixXcd& m) {
  f.write(reinterpret_cast<const char*>(m.data()),
          static_cast<std::streamsize>(sizeof(cd) * m.size()));
}
void rd_mat(std::ifstream& f, Eigen::MatrixXcd& m) {
  f.read(reinterpret_cast<char*>(m.data()),
         static_cast<std::streamsize>(sizeof(cd) * m.size()));
}
}  // namespace

void save_state(const WpeState& state, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write state snapshot: " + path);
  f.write("WPES", 4);
  wr(f, kSnapshotVersion);
  wr(f, state.cfg.num_taps);
  wr(f, state.cfg.delay);
  wr(f, state.cfg.forgetting);
  wr(f, state.cfg.num_channels);
  wr(f, state.cfg.gate_threshold_db);
  wr(f, state.cfg.psd_floor);
  wr(f, state.num_bins);
  wr(f, state.buffer_head);
  wr(f, state.gate_reference);
  for (int b = 0; b < state.num_bins; ++b) wr_mat(f, state.filter[b]);
  for (int b = 0; b < state.num_bins; ++b) wr_mat(f, state.inv_cov[b]);
  for (int b = 0; b < state.num_bins; ++b) wr_mat(f, state.buffer[b]);
}

WpeState load_state(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read state snapshot: " + path);
  char magic[4];
  f.read(magic, 4);
  uint32_t version = 0;
  rd(f, version);
  if (std::memcmp(magic, "WPES", 4) != 0 || version != kSnapshotVersion)
    throw std::runtime_error("bad state snapshot header: " + path);
  WpeConfig cfg;
  int num_bins = 0;
  rd(f, cfg.num_taps);
  rd(f, cfg.delay);
  rd(f, cfg.forgetting);
  rd(f, cfg.num_channels);
  rd(f, cfg.gate_threshold_db);
  rd(f, cfg.psd_floor);
  rd(f, num_bins);
  WpeState s = init_state(cfg, num_bins);
  rd(f, s.buffer_head);
  rd(f, s.gate_reference);
  for (int b = 0; b < num_bins; ++b) rd_mat(f, s.filter[b]);
  for (int b = 0; b < num_bins; ++b) rd_mat(f, s.inv_cov[b]);
  for (int b = 0; b < num_bins; ++b) rd_mat(f, s.buffer[b]);
  if (!f) throw std::runtime_error("truncated state snapshot: " + path);
  return s;
}

}  // namespace derev
