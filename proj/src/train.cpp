#include "derev/train.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace derev {

namespace {

inline double kl_kernel(double a, double b, double eps) {
  return a * std::log((a + eps) / (b + eps)) - a + b;
}

// d/da of the kernel
inline double kl_kernel_da(double a, double b, double eps) {
  return std::log((a + eps) / (b + eps)) + a / (a + eps) - 1.0;
}

}  // namespace

double kl_loss(std::span<const double> a, std::span<const double> b,
               double eps) {
  if (a.size() != b.size()) throw std::invalid_argument("kl_loss: size mismatch");
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i] < 0.0 || b[i] < 0.0)
      throw std::invalid_argument("kl_loss: negative input");
    s += kl_kernel(a[i], b[i], eps);
  }
  return s;
}

// ---------------------------------------------------------------------------

ModelGrads ModelGrads::zero_like(const MaskModel& m) {
  ModelGrads g;
  g.w_input = Eigen::MatrixXd::Zero(m.w_input.rows(), m.w_input.cols());
  g.w_recurrent =
      Eigen::MatrixXd::Zero(m.w_recurrent.rows(), m.w_recurrent.cols());
  g.w_out = Eigen::MatrixXd::Zero(m.w_out.rows(), m.w_out.cols());
  g.bias = Eigen::VectorXd::Zero(m.bias.size());
  g.b_out = Eigen::VectorXd::Zero(m.b_out.size());
  return g;
}

void ModelGrads::add(const ModelGrads& o) {
  w_input += o.w_input;
  w_recurrent += o.w_recurrent;
  w_out += o.w_out;
  bias += o.bias;
  b_out += o.b_out;
}

void ModelGrads::scale(double s) {
  w_input *= s;
  w_recurrent *= s;
  w_out *= s;
  bias *= s;
  b_out *= s;
}

double ModelGrads::max_abs() const {
  double m = w_input.cwiseAbs().maxCoeff();
  m = std::max(m, w_recurrent.cwiseAbs().maxCoeff());
  m = std::max(m, w_out.cwiseAbs().maxCoeff());
  m = std::max(m, bias.cwiseAbs().maxCoeff());
  m = std::max(m, b_out.cwiseAbs().maxCoeff());
  return m;
}

// ---------------------------------------------------------------------------

namespace {

// Loss gradient w.r.t. the complex outputs of one (frame, bin): fills g_err
// (length D) and returns the loss contribution.
double loss_frame_bin(const SegmentData& seg, int t, int f, int D,
                      const Eigen::VectorXcd& nu, double eps, double norm,
                      bool per_channel, Eigen::VectorXcd* g_err) {
  double loss = 0.0;
  if (g_err) g_err->setZero(D);
  if (per_channel) {
    for (int d = 0; d < D; ++d) {
      double a = std::abs(nu(d));
      double b = seg.target_mag_ch[t][static_cast<size_t>(f) * D + d];
      loss += kl_kernel(a, b, eps);
      if (g_err && a > 0.0)
        (*g_err)(d) = norm * kl_kernel_da(a, b, eps) * nu(d) / a;
    }
  } else {
    double a = 0.0;
    for (int d = 0; d < D; ++d) a += std::abs(nu(d));
    a /= D;
    double b = seg.target_mag[t][f];
    loss = kl_kernel(a, b, eps);
    if (g_err) {
      double da = norm * kl_kernel_da(a, b, eps) / D;
      for (int d = 0; d < D; ++d) {
        double mag = std::abs(nu(d));
        if (mag > 0.0) (*g_err)(d) = da * nu(d) / mag;
      }
    }
  }
  return loss;
}

void check_segment(const MaskModel& model, const SegmentData& seg,
                   const TrainConfig& cfg) {
  if (seg.num_frames() == 0)
    throw std::invalid_argument("empty training segment");
  if (static_cast<int>(seg.input_mag[0].size()) != model.input_dim)
    throw std::invalid_argument("segment bins do not match model input_dim");
  if (cfg.per_channel_loss && seg.target_mag_ch.empty())
    throw std::invalid_argument("per-channel loss requires target_mag_ch");
}

}  // namespace

double forward_segment(const MaskModel& model, const SegmentData& seg,
                       WpeState& wpe, RecurrentState& lstm,
                       const TrainConfig& cfg, Tape* tape) {
  check_segment(model, seg, cfg);
  const int L = seg.num_frames();
  const int F = model.input_dim;
  const int D = wpe.cfg.num_channels;
  if (wpe.num_bins != F)
    throw std::invalid_argument("WPE bins do not match model input_dim");

  if (tape) {
    tape->num_frames = L;
    tape->num_bins = F;
    tape->lstm.resize(L);
    tape->gated.assign(L, 0);
    tape->lambda.assign(L, std::vector<double>(F, 0.0));
    tape->inv_cov_prev.assign(L, {});
    tape->stacked.assign(L, {});
    tape->output.assign(L, {});
  }

  const double norm = 1.0 / (static_cast<double>(L) * F);
  double loss_sum = 0.0;
  std::vector<double> bin_loss(F);

  LstmStepCache local_cache;
  for (int t = 0; t < L; ++t) {
    LstmStepCache& cache = tape ? tape->lstm[t] : local_cache;
    Eigen::Map<const Eigen::VectorXd> u(seg.input_mag[t].data(), F);
    forward_step_cached(model, u, lstm, cache);

    std::vector<double> lambda(F);
    for (int f = 0; f < F; ++f) {
      double mv = cache.mask(f) * seg.input_mag[t][f];
      lambda[f] = mv * mv;
    }

    const std::vector<cd>& frame = seg.frames[t];
    const double power = frame_power(frame, F, D);
    const bool update = gate_open(wpe, power);

    if (tape) {
      tape->gated[t] = update ? 1 : 0;
      tape->lambda[t] = lambda;
      tape->stacked[t].resize(F);
      tape->output[t].resize(F);
      if (update) tape->inv_cov_prev[t].resize(F);
      tape->nodes.push_back({Tape::OpKind::LstmStep, static_cast<int16_t>(t),
                             static_cast<int16_t>(t - 1)});
      tape->nodes.push_back(
          {Tape::OpKind::MaskPsd, static_cast<int16_t>(t),
           static_cast<int16_t>(t)});
    }

#pragma omp parallel for schedule(static)
    for (int f = 0; f < F; ++f) {
      Eigen::VectorXcd x_t(D);
      for (int d = 0; d < D; ++d) x_t(d) = frame[static_cast<size_t>(f) * D + d];
      Eigen::VectorXcd X = stack_delayed(wpe, f);
      Eigen::VectorXcd nu = predict(wpe, f, x_t, X);
      if (update) {
        if (tape) tape->inv_cov_prev[t][f] = wpe.inv_cov[f];
        double lam = std::max(lambda[f], wpe.cfg.psd_floor);
        Eigen::VectorXcd gain = kalman_gain(wpe, f, X, lam);
        update_inverse_cov(wpe, f, gain, X);
        update_filter(wpe, f, gain, x_t, X);
      }
      if (tape) {
        tape->stacked[t][f] = X;
        tape->output[t][f] = nu;
      }
      int slot = (wpe.buffer_head + 1) % wpe.cfg.buffer_len();
      wpe.buffer[f].col(slot) = x_t;

      bin_loss[f] = loss_frame_bin(seg, t, f, D, nu, cfg.loss_floor, norm,
                                   cfg.per_channel_loss, nullptr);
    }
    // deterministic reduction order
    for (int f = 0; f < F; ++f) loss_sum += bin_loss[f];
    wpe.buffer_head = (wpe.buffer_head + 1) % wpe.cfg.buffer_len();

    if (tape) {
      int16_t prev = static_cast<int16_t>(t - 1);
      int16_t cur = static_cast<int16_t>(t);
      tape->nodes.push_back({Tape::OpKind::Predict, cur, prev});
      if (update) {
        tape->nodes.push_back({Tape::OpKind::KalmanGain, cur, prev});
        tape->nodes.push_back({Tape::OpKind::CovUpdate, cur, prev});
        tape->nodes.push_back({Tape::OpKind::FilterUpdate, cur, prev});
      }
      tape->nodes.push_back({Tape::OpKind::Loss, cur, cur});
    }
  }
  if (!std::isfinite(loss_sum))
    throw std::runtime_error("non-finite loss in forward_segment");
  return loss_sum * norm;
}

BackpropResult backprop_segment(const MaskModel& model, const SegmentData& seg,
                                const WpeState& wpe_in,
                                const RecurrentState& lstm_in,
                                const TrainConfig& cfg) {
  WpeState wpe = wpe_in;
  RecurrentState lstm = lstm_in;
  Tape tape;
  BackpropResult res;
  res.loss = forward_segment(model, seg, wpe, lstm, cfg, &tape);

  const int L = tape.num_frames;
  const int F = tape.num_bins;
  const int D = wpe_in.cfg.num_channels;
  const double af = wpe_in.cfg.forgetting;
  const double floor = wpe_in.cfg.psd_floor;
  const double norm = 1.0 / (static_cast<double>(L) * F);

  // Reverse sweep through the WPE recursion, independently per bin.
  // Produces d(loss)/d(lambda) for every frame.
  std::vector<std::vector<double>> g_lambda(L, std::vector<double>(F, 0.0));

#pragma omp parallel for schedule(static)
  for (int f = 0; f < F; ++f) {
    const int DK = wpe_in.cfg.stacked_dim();
    Eigen::MatrixXcd g_G = Eigen::MatrixXcd::Zero(DK, D);
    Eigen::MatrixXcd g_R = Eigen::MatrixXcd::Zero(DK, DK);
    Eigen::VectorXcd g_err(D);

    for (int t = L - 1; t >= 0; --t) {
      const Eigen::VectorXcd& nu = tape.output[t][f];
      const Eigen::VectorXcd& X = tape.stacked[t][f];
      loss_frame_bin(seg, t, f, D, nu, cfg.loss_floor, norm,
                     cfg.per_channel_loss, &g_err);

      if (tape.gated[t]) {
        const Eigen::MatrixXcd& R = tape.inv_cov_prev[t][f];
        Eigen::VectorXcd rx = R * X;
        double lam_raw = tape.lambda[t][f];
        double lam = std::max(lam_raw, floor);
        double den = af * lam + (1.0 - af) * (X.dot(rx)).real();
        Eigen::VectorXcd gain = ((1.0 - af) / den) * rx;

        // G_t = G_prev + gain * nu^H
        Eigen::VectorXcd g_gain = g_G * nu;
        g_err += g_G.adjoint() * gain;

        // R_t = sym((R_prev - gain * (rx)^H) / af)
        Eigen::MatrixXcd gP = 0.5 * (g_R + g_R.adjoint());
        Eigen::MatrixXcd g_R_prev = gP / af;
        g_gain.noalias() += (-1.0 / af) * (gP * rx);
        Eigen::VectorXcd g_rx = (-1.0 / af) * (gP.adjoint() * gain);

        // gain = (1-af)/den * rx
        g_rx.noalias() += ((1.0 - af) / den) * g_gain;
        double g_den = -(g_gain.dot(gain)).real() / den;
        g_rx.noalias() += (g_den * (1.0 - af)) * X;

        double g_lam = af * g_den;
        g_lambda[t][f] = (lam_raw > floor) ? g_lam : 0.0;

        // rx = R_prev * X
        g_R_prev.noalias() += g_rx * X.adjoint();

        // nu = x_t - G_prev^H X
        g_R = g_R_prev;
        g_G.noalias() += -X * g_err.adjoint();
      } else {
        g_G.noalias() += -X * g_err.adjoint();
      }
    }
  }

  // Mask gradient: lambda = (M * m)^2
  std::vector<Eigen::VectorXd> g_mask(L);
  for (int t = 0; t < L; ++t) {
    g_mask[t].resize(F);
    for (int f = 0; f < F; ++f) {
      double m = seg.input_mag[t][f];
      g_mask[t](f) = g_lambda[t][f] * 2.0 * tape.lstm[t].mask(f) * m * m;
    }
  }

  // LSTM + output-layer BPTT
  res.grads = ModelGrads::zero_like(model);
  const int H = model.hidden_dim;
  Eigen::VectorXd g_h = Eigen::VectorXd::Zero(H);
  Eigen::VectorXd g_c = Eigen::VectorXd::Zero(H);
  Eigen::VectorXd g_z(4 * H);
  for (int t = L - 1; t >= 0; --t) {
    const LstmStepCache& c = tape.lstm[t];
    Eigen::VectorXd g_s =
        g_mask[t].cwiseProduct(c.mask.cwiseProduct(
            (Eigen::VectorXd::Ones(F) - c.mask)));
    res.grads.w_out.noalias() += g_s * c.h.transpose();
    res.grads.b_out += g_s;
    g_h.noalias() += model.w_out.transpose() * g_s;

    Eigen::VectorXd g_o = g_h.cwiseProduct(c.tanh_c);
    g_c += g_h.cwiseProduct(c.gate_o)
               .cwiseProduct(Eigen::VectorXd::Ones(H) -
                             c.tanh_c.cwiseProduct(c.tanh_c));
    Eigen::VectorXd g_f = g_c.cwiseProduct(c.c_prev);
    Eigen::VectorXd g_i = g_c.cwiseProduct(c.gate_g);
    Eigen::VectorXd g_g = g_c.cwiseProduct(c.gate_i);
    g_c = g_c.cwiseProduct(c.gate_f);  // to frame t-1

    g_z.segment(0, H) = g_i.cwiseProduct(
        c.gate_i.cwiseProduct(Eigen::VectorXd::Ones(H) - c.gate_i));
    g_z.segment(H, H) = g_f.cwiseProduct(
        c.gate_f.cwiseProduct(Eigen::VectorXd::Ones(H) - c.gate_f));
    g_z.segment(2 * H, H) = g_g.cwiseProduct(
        Eigen::VectorXd::Ones(H) - c.gate_g.cwiseProduct(c.gate_g));
    g_z.segment(3 * H, H) = g_o.cwiseProduct(
        c.gate_o.cwiseProduct(Eigen::VectorXd::Ones(H) - c.gate_o));

    res.grads.w_input.noalias() += g_z * c.input.transpose();
    res.grads.w_recurrent.noalias() += g_z * c.h_prev.transpose();
    res.grads.bias += g_z;
    g_h.noalias() = model.w_recurrent.transpose() * g_z;
  }
  return res;
}

// ---------------------------------------------------------------------------

double forward_segment_pretrain(const MaskModel& model, const SegmentData& seg,
                                RecurrentState& lstm, const TrainConfig& cfg,
                                Tape* tape) {
  check_segment(model, seg, cfg);
  const int L = seg.num_frames();
  const int F = model.input_dim;
  if (tape) {
    tape->num_frames = L;
    tape->num_bins = F;
    tape->lstm.resize(L);
  }
  const double norm = 1.0 / (static_cast<double>(L) * F);
  double loss_sum = 0.0;
  LstmStepCache local_cache;
  for (int t = 0; t < L; ++t) {
    LstmStepCache& cache = tape ? tape->lstm[t] : local_cache;
    Eigen::Map<const Eigen::VectorXd> u(seg.input_mag[t].data(), F);
    forward_step_cached(model, u, lstm, cache);
    for (int f = 0; f < F; ++f) {
      double a = cache.mask(f) * seg.input_mag[t][f];
      loss_sum += kl_kernel(a, seg.target_mag[t][f], cfg.loss_floor);
    }
    if (tape) {
      tape->nodes.push_back({Tape::OpKind::LstmStep, static_cast<int16_t>(t),
                             static_cast<int16_t>(t - 1)});
      tape->nodes.push_back(
          {Tape::OpKind::Loss, static_cast<int16_t>(t), static_cast<int16_t>(t)});
    }
  }
  if (!std::isfinite(loss_sum))
    throw std::runtime_error("non-finite loss in forward_segment_pretrain");
  return loss_sum * norm;
}

BackpropResult backprop_segment_pretrain(const MaskModel& model,
                                         const SegmentData& seg,
                                         const RecurrentState& lstm_in,
                                         const TrainConfig& cfg) {
  RecurrentState lstm = lstm_in;
  Tape tape;
  BackpropResult res;
  res.loss = forward_segment_pretrain(model, seg, lstm, cfg, &tape);

  const int L = tape.num_frames;
  const int F = tape.num_bins;
  const int H = model.hidden_dim;
  const double norm = 1.0 / (static_cast<double>(L) * F);

  res.grads = ModelGrads::zero_like(model);
  Eigen::VectorXd g_h = Eigen::VectorXd::Zero(H);
  Eigen::VectorXd g_c = Eigen::VectorXd::Zero(H);
  Eigen::VectorXd g_z(4 * H);
  for (int t = L - 1; t >= 0; --t) {
    const LstmStepCache& c = tape.lstm[t];
    Eigen::VectorXd g_mask(F);
    for (int f = 0; f < F; ++f) {
      double m = seg.input_mag[t][f];
      double a = c.mask(f) * m;
      g_mask(f) = norm * kl_kernel_da(a, seg.target_mag[t][f], cfg.loss_floor) * m;
    }
    Eigen::VectorXd g_s = g_mask.cwiseProduct(
        c.mask.cwiseProduct(Eigen::VectorXd::Ones(F) - c.mask));
    res.grads.w_out.noalias() += g_s * c.h.transpose();
    res.grads.b_out += g_s;
    g_h.noalias() += model.w_out.transpose() * g_s;

    Eigen::VectorXd g_o = g_h.cwiseProduct(c.tanh_c);
    g_c += g_h.cwiseProduct(c.gate_o)
               .cwiseProduct(Eigen::VectorXd::Ones(H) -
                             c.tanh_c.cwiseProduct(c.tanh_c));
    Eigen::VectorXd g_f = g_c.cwiseProduct(c.c_prev);
    Eigen::VectorXd g_i = g_c.cwiseProduct(c.gate_g);
    Eigen::VectorXd g_g = g_c.cwiseProduct(c.gate_i);
    g_c = g_c.cwiseProduct(c.gate_f);

    g_z.segment(0, H) = g_i.cwiseProduct(
        c.gate_i.cwiseProduct(Eigen::VectorXd::Ones(H) - c.gate_i));
    g_z.segment(H, H) = g_f.cwiseProduct(
        c.gate_f.cwiseProduct(Eigen::VectorXd::Ones(H) - c.gate_f));
    g_z.segment(2 * H, H) = g_g.cwiseProduct(
        Eigen::VectorXd::Ones(H) - c.gate_g.cwiseProduct(c.gate_g));
    g_z.segment(3 * H, H) = g_o.cwiseProduct(
        c.gate_o.cwiseProduct(Eigen::VectorXd::Ones(H) - c.gate_o));

    res.grads.w_input.noalias() += g_z * c.input.transpose();
    res.grads.w_recurrent.noalias() += g_z * c.h_prev.transpose();
    res.grads.bias += g_z;
    g_h.noalias() = model.w_recurrent.transpose() * g_z;
  }
  return res;
}

// ---------------------------------------------------------------------------

OptimizerState OptimizerState::zero_like(const MaskModel& model) {
  OptimizerState s;
  s.m = ModelGrads::zero_like(model);
  s.v = ModelGrads::zero_like(model);
  return s;
}

namespace {

template <typename Mat>
void adam_tensor(Mat& p, const Mat& g, Mat& m, Mat& v, double lr, double b1,
                 double b2, double eps, long step) {
  if (p.rows() != g.rows() || p.cols() != g.cols())
    throw std::invalid_argument("adam_update: shape mismatch");
  m = b1 * m + (1.0 - b1) * g;
  v = (b2 * v).eval();
  v.array() += (1.0 - b2) * g.array().square();
  double bc1 = 1.0 - std::pow(b1, static_cast<double>(step));
  double bc2 = 1.0 - std::pow(b2, static_cast<double>(step));
  p.array() -=
      lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps);
}

}  // namespace

void adam_update(MaskModel& params, const ModelGrads& grads,
                 OptimizerState& opt, double lr) {
  ++opt.step;
  adam_tensor(params.w_input, grads.w_input, opt.m.w_input, opt.v.w_input, lr,
              opt.beta1, opt.beta2, opt.eps, opt.step);
  adam_tensor(params.w_recurrent, grads.w_recurrent, opt.m.w_recurrent,
              opt.v.w_recurrent, lr, opt.beta1, opt.beta2, opt.eps, opt.step);
  adam_tensor(params.bias, grads.bias, opt.m.bias, opt.v.bias, lr, opt.beta1,
              opt.beta2, opt.eps, opt.step);
  adam_tensor(params.w_out, grads.w_out, opt.m.w_out, opt.v.w_out, lr,
              opt.beta1, opt.beta2, opt.eps, opt.step);
  adam_tensor(params.b_out, grads.b_out, opt.m.b_out, opt.v.b_out, lr,
              opt.beta1, opt.beta2, opt.eps, opt.step);
}

// ---------------------------------------------------------------------------

namespace {

struct SequenceStates {
  WpeState wpe;
  RecurrentState lstm;
};

// Validation loss: Algorithm-1 forward only, segment 0 excluded (it is never
// optimized, so measuring it would mix converged and cold-start regimes).
double eval_loss(const MaskModel& model,
                 const std::vector<TrainSequence>& seqs, const TrainConfig& cfg,
                 const WpeConfig& wpe_cfg, bool e2e) {
  double total = 0.0;
  long count = 0;
  for (const auto& seq : seqs) {
    if (seq.segments.size() < 2) continue;
    const int F = static_cast<int>(seq.segments[0].input_mag[0].size());
    WpeState wpe = init_state(wpe_cfg, F);
    RecurrentState lstm = RecurrentState::zero(
        static_cast<int>(model.hidden_dim));
    for (size_t n = 0; n < seq.segments.size(); ++n) {
      double loss = e2e
          ? forward_segment(model, seq.segments[n], wpe, lstm, cfg)
          : forward_segment_pretrain(model, seq.segments[n], lstm, cfg);
      if (n > 0) {
        total += loss;
        ++count;
      }
    }
  }
  return count ? total / count : 0.0;
}

TrainResult run_training(const MaskModel& init, const Dataset& data,
                         const TrainConfig& cfg, const WpeConfig& wpe_cfg,
                         bool e2e) {
  if (!cfg.valid()) throw std::invalid_argument("invalid TrainConfig");
  for (const auto& seq : data.train)
    if (seq.segments.size() < 2)
      throw std::invalid_argument(
          "training sequences must span at least two segments");
  if (data.train.empty()) throw std::invalid_argument("empty training set");

  MaskModel model = init;
  OptimizerState opt = OptimizerState::zero_like(model);
  TrainResult result;
  result.model = model;

  double best_val = std::numeric_limits<double>::infinity();
  int epochs_since_best = 0;

  const int F = model.input_dim;
  const size_t n_train = data.train.size();

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const double lr = cfg.lr * std::pow(cfg.lr_decay, epoch);
    double epoch_loss = 0.0;
    long loss_count = 0;

    for (size_t batch_start = 0; batch_start < n_train;
         batch_start += cfg.batch_size) {
      const size_t batch_end =
          std::min(batch_start + cfg.batch_size, n_train);
      std::vector<SequenceStates> states(batch_end - batch_start);
      size_t max_segments = 0;
      for (size_t i = batch_start; i < batch_end; ++i) {
        states[i - batch_start].wpe = init_state(wpe_cfg, F);
        states[i - batch_start].lstm = RecurrentState::zero(model.hidden_dim);
        max_segments = std::max(max_segments, data.train[i].segments.size());
      }

      for (size_t n = 0; n < max_segments; ++n) {
        ModelGrads grads = ModelGrads::zero_like(model);
        int contributing = 0;
        for (size_t i = batch_start; i < batch_end; ++i) {
          const auto& segments = data.train[i].segments;
          if (n >= segments.size()) continue;
          SequenceStates& st = states[i - batch_start];
          if (n == 0) {
            // initialization segment: forward only, advances the carry
            if (e2e)
              forward_segment(model, segments[0], st.wpe, st.lstm, cfg);
            else
              forward_segment_pretrain(model, segments[0], st.lstm, cfg);
            continue;
          }
          BackpropResult bp = e2e
              ? backprop_segment(model, segments[n], st.wpe, st.lstm, cfg)
              : backprop_segment_pretrain(model, segments[n], st.lstm, cfg);
          grads.add(bp.grads);
          ++contributing;
          epoch_loss += bp.loss;
          ++loss_count;
        }
        if (contributing > 0) {
          grads.scale(1.0 / contributing);
          adam_update(model, grads, opt, lr);
          ++result.update_steps;
          // refresh the carried states with the updated parameters
          for (size_t i = batch_start; i < batch_end; ++i) {
            const auto& segments = data.train[i].segments;
            if (n >= segments.size()) continue;
            SequenceStates& st = states[i - batch_start];
            if (e2e)
              forward_segment(model, segments[n], st.wpe, st.lstm, cfg);
            else
              forward_segment_pretrain(model, segments[n], st.lstm, cfg);
          }
        }
      }
    }

    const double train_loss = loss_count ? epoch_loss / loss_count : 0.0;
    const double val_loss = data.val.empty()
        ? train_loss
        : eval_loss(model, data.val, cfg, wpe_cfg, e2e);
    result.history.push_back({epoch, train_loss, val_loss, lr});

    if (val_loss < best_val) {
      best_val = val_loss;
      result.model = model;
      epochs_since_best = 0;
    } else if (++epochs_since_best >= cfg.patience) {
      break;
    }
  }
  return result;
}

}  // namespace

TrainResult train_e2e(const MaskModel& init, const Dataset& data,
                      const TrainConfig& cfg, const WpeConfig& wpe_cfg) {
  return run_training(init, data, cfg, wpe_cfg, true);
}

TrainResult pretrain(const MaskModel& init, const Dataset& data,
                     const TrainConfig& cfg) {
  return run_training(init, data, cfg, WpeConfig{}, false);
}

}  // namespace derev
