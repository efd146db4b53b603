#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "derev/lstm.hpp"
#include "derev/psd.hpp"
#include "derev/wpe.hpp"

namespace derev {

enum class Scenario { HA, CI };

struct TrainConfig {
  double lr = 1e-4;
  double lr_decay = 0.96;  // per epoch
  int patience = 10;
  int batch_size = 8;
  int segment_frames = 500;  // ~4 s at 8 ms hop
  double loss_floor = 1e-8;  // epsilon in the KL kernel
  Scenario scenario = Scenario::HA;
  int max_epochs = 100;
  bool per_channel_loss = false;  // default: channel-averaged magnitudes
  double validation_fraction = 0.1;

  bool valid() const {
    return lr >= 0.0 && lr_decay > 0.0 && lr_decay <= 1.0 && patience >= 1 &&
           batch_size >= 1 && segment_frames >= 1 && loss_floor > 0.0;
  }
};

// Generalized KL divergence sum_i [ a log((a+eps)/(b+eps)) - a + b ].
// Inputs are nonnegative magnitude arrays, not normalized distributions.
double kl_loss(std::span<const double> a, std::span<const double> b,
               double eps);

// One training segment: L complex input frames plus precomputed
// channel-averaged magnitudes of input and target.
struct SegmentData {
  std::vector<std::vector<cd>> frames;         // L x (F*D)
  std::vector<std::vector<double>> input_mag;  // L x F
  std::vector<std::vector<double>> target_mag; // L x F
  // per-channel target magnitudes, only filled when per_channel_loss is set
  std::vector<std::vector<double>> target_mag_ch;  // L x (F*D)

  int num_frames() const { return static_cast<int>(frames.size()); }
};

// Reverse-mode record of one segment's forward pass. Nodes are recorded at
// frame/bin granularity; operand references never cross the segment (carried
// states enter as constant leaves, frame -1).
struct Tape {
  enum class OpKind : uint8_t {
    LstmStep,
    MaskPsd,
    KalmanGain,
    CovUpdate,
    FilterUpdate,
    Predict,
    Loss,
  };
  struct Node {
    OpKind kind;
    int16_t frame;          // frame this node belongs to
    int16_t operand_frame;  // frame of the recurrent operand, -1 = constant leaf
  };

  std::vector<Node> nodes;

  // per-frame caches
  std::vector<LstmStepCache> lstm;
  std::vector<char> gated;
  std::vector<std::vector<double>> lambda;  // pre-floor, L x F
  // per (frame, bin) caches; empty matrices for ungated frames
  std::vector<std::vector<Eigen::MatrixXcd>> inv_cov_prev;  // L x F, DK x DK
  std::vector<std::vector<Eigen::VectorXcd>> stacked;       // L x F, DK
  std::vector<std::vector<Eigen::VectorXcd>> output;        // L x F, D (nu_hat)

  int num_frames = 0;
  int num_bins = 0;
};

struct ModelGrads {
  Eigen::MatrixXd w_input, w_recurrent, w_out;
  Eigen::VectorXd bias, b_out;

  static ModelGrads zero_like(const MaskModel& m);
  void add(const ModelGrads& other);
  void scale(double s);
  double max_abs() const;
};

struct BackpropResult {
  double loss = 0.0;  // KL sum normalized by frames*bins
  ModelGrads grads;
};

// Forward pass of one segment through mask -> PSD -> WPE, advancing the
// carried states in place. Returns the segment loss; fills the tape when
// given one.
double forward_segment(const MaskModel& model, const SegmentData& seg,
                       WpeState& wpe, RecurrentState& lstm,
                       const TrainConfig& cfg, Tape* tape = nullptr);

// Loss and exact parameter gradients for one segment. Carried states are
// constants; the caller's copies are not advanced.
BackpropResult backprop_segment(const MaskModel& model, const SegmentData& seg,
                                const WpeState& wpe_in,
                                const RecurrentState& lstm_in,
                                const TrainConfig& cfg);

// Pretraining path: KL(M .* |xbar|, |nubar|) per frame, no WPE involved.
double forward_segment_pretrain(const MaskModel& model, const SegmentData& seg,
                                RecurrentState& lstm, const TrainConfig& cfg,
                                Tape* tape = nullptr);
BackpropResult backprop_segment_pretrain(const MaskModel& model,
                                         const SegmentData& seg,
                                         const RecurrentState& lstm_in,
                                         const TrainConfig& cfg);

// Adam with bias correction; beta1=0.9, beta2=0.999, eps=1e-8.
struct OptimizerState {
  ModelGrads m, v;
  long step = 0;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

  static OptimizerState zero_like(const MaskModel& model);
};

void adam_update(MaskModel& params, const ModelGrads& grads,
                 OptimizerState& opt, double lr);

struct TrainSequence {
  std::vector<SegmentData> segments;
};

struct Dataset {
  std::vector<TrainSequence> train;
  std::vector<TrainSequence> val;
};

struct EpochRecord {
  int epoch;
  double train_loss;
  double val_loss;
  double lr;
};

struct TrainResult {
  MaskModel model;  // best-validation parameters
  std::vector<EpochRecord> history;
  long update_steps = 0;
};

// Segment-scheduled training: segment 0 of every sequence initializes the
// recurrent and WPE statistics and is never optimized; later segments carry
// state from their predecessor, take one optimizer step, then re-run forward
// with the updated parameters to refresh the carried state.
TrainResult train_e2e(const MaskModel& init, const Dataset& data,
                      const TrainConfig& cfg, const WpeConfig& wpe_cfg);

TrainResult pretrain(const MaskModel& init, const Dataset& data,
                     const TrainConfig& cfg);

}  // namespace derev
