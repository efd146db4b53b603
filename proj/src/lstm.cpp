#include "derev/lstm.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

#include "json.hpp"

namespace derev {

namespace {

double next_uniform(std::mt19937_64& rng) {
  // [0,1) with 53 bits; avoids the implementation-defined distribution
  return (rng() >> 11) * 0x1.0p-53;
}

void fill_uniform(Eigen::MatrixXd& m, double scale, std::mt19937_64& rng) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      m(r, c) = scale * (2.0 * next_uniform(rng) - 1.0);
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

MaskModel init_params(uint64_t seed, int input_dim, int hidden_dim) {
  if (input_dim <= 0 || hidden_dim <= 0)
    throw std::invalid_argument("init_params: invalid dims");
  MaskModel m;
  m.input_dim = input_dim;
  m.hidden_dim = hidden_dim;
  m.seed = seed;

  std::mt19937_64 rng(seed);
  const int H = hidden_dim;
  m.w_input.resize(4 * H, input_dim);
  m.w_recurrent.resize(4 * H, H);
  m.w_out.resize(input_dim, H);
  fill_uniform(m.w_input, 1.0 / std::sqrt(double(input_dim)), rng);
  fill_uniform(m.w_recurrent, 1.0 / std::sqrt(double(H)), rng);
  fill_uniform(m.w_out, 1.0 / std::sqrt(double(H)), rng);
  m.bias = Eigen::VectorXd::Zero(4 * H);
  m.bias.segment(H, H).setOnes();  // forget-gate bias +1
  m.b_out = Eigen::VectorXd::Zero(input_dim);
  return m;
}

void forward_step_cached(const MaskModel& model, const Eigen::VectorXd& input,
                         RecurrentState& state, LstmStepCache& cache) {
  const int H = model.hidden_dim;
  if (input.size() != model.input_dim)
    throw std::invalid_argument("forward_step: input dim mismatch");
  if (!input.allFinite())
    throw std::invalid_argument("forward_step: non-finite input");

  cache.input = input;
  cache.h_prev = state.h;
  cache.c_prev = state.c;

  Eigen::VectorXd z =
      model.w_input * input + model.w_recurrent * state.h + model.bias;
  cache.gate_i = z.segment(0, H).unaryExpr([](double v) { return sigmoid(v); });
  cache.gate_f = z.segment(H, H).unaryExpr([](double v) { return sigmoid(v); });
  cache.gate_g = z.segment(2 * H, H).array().tanh();
  cache.gate_o =
      z.segment(3 * H, H).unaryExpr([](double v) { return sigmoid(v); });

  cache.c = cache.gate_f.cwiseProduct(cache.c_prev) +
            cache.gate_i.cwiseProduct(cache.gate_g);
  cache.tanh_c = cache.c.array().tanh();
  cache.h = cache.gate_o.cwiseProduct(cache.tanh_c);

  Eigen::VectorXd s = model.w_out * cache.h + model.b_out;
  cache.mask = s.unaryExpr([](double v) { return sigmoid(v); });

  state.h = cache.h;
  state.c = cache.c;
}

std::vector<double> forward_step(const MaskModel& model,
                                 const std::vector<double>& input,
                                 RecurrentState& state) {
  LstmStepCache cache;
  Eigen::VectorXd u =
      Eigen::Map<const Eigen::VectorXd>(input.data(), input.size());
  forward_step_cached(model, u, state, cache);
  return {cache.mask.data(), cache.mask.data() + cache.mask.size()};
}

std::vector<std::vector<double>> forward_sequence(
    const MaskModel& model, const std::vector<std::vector<double>>& inputs,
    RecurrentState& state) {
  std::vector<std::vector<double>> masks;
  masks.reserve(inputs.size());
  for (const auto& u : inputs) masks.push_back(forward_step(model, u, state));
  return masks;
}

// ---------------------------------------------------------------------------

namespace {

nlohmann::json mat_to_json(const Eigen::MatrixXd& m) {
  std::vector<double> flat(m.data(), m.data() + m.size());
  return flat;
}

void mat_from_json(const nlohmann::json& j, Eigen::MatrixXd& m,
                   Eigen::Index rows, Eigen::Index cols) {
  auto flat = j.get<std::vector<double>>();
  if (static_cast<Eigen::Index>(flat.size()) != rows * cols)
    throw std::runtime_error("checkpoint: array size mismatch");
  m = Eigen::Map<const Eigen::MatrixXd>(flat.data(), rows, cols);
}

}  // namespace

void save_model(const MaskModel& model, const std::string& path) {
  nlohmann::json j;
  j["format"] = "derev-mask-model";
  j["version"] = 1;
  j["input_dim"] = model.input_dim;
  j["hidden_dim"] = model.hidden_dim;
  j["seed"] = model.seed;
  j["w_input"] = mat_to_json(model.w_input);
  j["w_recurrent"] = mat_to_json(model.w_recurrent);
  j["bias"] = std::vector<double>(model.bias.data(),
                                  model.bias.data() + model.bias.size());
  j["w_out"] = mat_to_json(model.w_out);
  j["b_out"] = std::vector<double>(model.b_out.data(),
                                   model.b_out.data() + model.b_out.size());
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write checkpoint: " + path);
  f << j.dump();
}

MaskModel load_model(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read checkpoint: " + path);
  nlohmann::json j = nlohmann::json::parse(f);
  if (j.value("format", "") != "derev-mask-model" || j.value("version", 0) != 1)
    throw std::runtime_error("bad checkpoint header: " + path);
  MaskModel m;
  m.input_dim = j.at("input_dim").get<int>();
  m.hidden_dim = j.at("hidden_dim").get<int>();
  m.seed = j.at("seed").get<uint64_t>();
  const int H = m.hidden_dim, F = m.input_dim;
  mat_from_json(j.at("w_input"), m.w_input, 4 * H, F);
  mat_from_json(j.at("w_recurrent"), m.w_recurrent, 4 * H, H);
  auto b = j.at("bias").get<std::vector<double>>();
  auto bo = j.at("b_out").get<std::vector<double>>();
  if (static_cast<int>(b.size()) != 4 * H || static_cast<int>(bo.size()) != F)
    throw std::runtime_error("checkpoint: bias size mismatch");
  m.bias = Eigen::Map<const Eigen::VectorXd>(b.data(), b.size());
  mat_from_json(j.at("w_out"), m.w_out, F, H);
  m.b_out = Eigen::Map<const Eigen::VectorXd>(bo.data(), bo.size());
  return m;
}

}  // namespace derev
