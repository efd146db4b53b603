#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace derev {

// Single LSTM layer + linear output with sigmoid. Input is the
// channel-averaged magnitude frame, output a mask in (0,1) per bin.
// Gate packing in the 4H dimension: [input; forget; cell; output].
struct MaskModel {
  int input_dim = 0;   // F
  int hidden_dim = 0;  // H
  uint64_t seed = 0;

  Eigen::MatrixXd w_input;      // 4H x F
  Eigen::MatrixXd w_recurrent;  // 4H x H
  Eigen::VectorXd bias;         // 4H
  Eigen::MatrixXd w_out;        // F x H
  Eigen::VectorXd b_out;        // F

  long num_params() const {
    return w_input.size() + w_recurrent.size() + bias.size() + w_out.size() +
           b_out.size();
  }
};

struct RecurrentState {
  Eigen::VectorXd h;
  Eigen::VectorXd c;

  static RecurrentState zero(int hidden_dim) {
    RecurrentState s;
    s.h = Eigen::VectorXd::Zero(hidden_dim);
    s.c = Eigen::VectorXd::Zero(hidden_dim);
    return s;
  }
};

// Intermediate activations of one step, kept for backprop.
struct LstmStepCache {
  Eigen::VectorXd input;    // u_t
  Eigen::VectorXd h_prev, c_prev;
  Eigen::VectorXd gate_i, gate_f, gate_g, gate_o;  // post-activation
  Eigen::VectorXd c, tanh_c, h;
  Eigen::VectorXd mask;  // sigmoid output, length F
};

// Uniform(+-1/sqrt(fan_in)) init, forget-gate bias +1. Bit-reproducible for
// a given seed across platforms (explicit mt19937_64 -> double mapping).
MaskModel init_params(uint64_t seed, int input_dim, int hidden_dim);

// One recurrent step; returns the mask and advances the state.
std::vector<double> forward_step(const MaskModel& model,
                                 const std::vector<double>& input,
                                 RecurrentState& state);

// Same, exposing the cache for BPTT.
void forward_step_cached(const MaskModel& model, const Eigen::VectorXd& input,
                         RecurrentState& state, LstmStepCache& cache);

// Left-to-right over T frames; masks returned row-per-frame (T x F).
std::vector<std::vector<double>> forward_sequence(
    const MaskModel& model, const std::vector<std::vector<double>>& inputs,
    RecurrentState& state);

// Checkpoint container (JSON, versioned); bit-exact round trip.
void save_model(const MaskModel& model, const std::string& path);
MaskModel load_model(const std::string& path);

}  // namespace derev
