#include <cstdio>
#include <random>

#include "derev/lstm.hpp"
#include "doctest.h"

using namespace derev;

namespace {

MaskModel zero_model(int F, int H) {
  MaskModel m;
  m.input_dim = F;
  m.hidden_dim = H;
  m.w_input = Eigen::MatrixXd::Zero(4 * H, F);
  m.w_recurrent = Eigen::MatrixXd::Zero(4 * H, H);
  m.bias = Eigen::VectorXd::Zero(4 * H);
  m.w_out = Eigen::MatrixXd::Zero(F, H);
  m.b_out = Eigen::VectorXd::Zero(F);
  return m;
}

std::vector<std::vector<double>> random_inputs(int T, int F, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::vector<double>> x(T, std::vector<double>(F));
  for (auto& row : x)
    for (auto& v : row) v = u(rng);
  return x;
}

}  // namespace

TEST_SUITE("lstm") {

TEST_CASE("all-zero parameters give a 0.5 mask") {
  MaskModel m = zero_model(6, 4);
  RecurrentState st = RecurrentState::zero(4);
  auto mask = forward_step(m, std::vector<double>(6, 0.3), st);
  for (double v : mask) CHECK(v == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(st.h.cwiseAbs().maxCoeff() == 0.0);  // o*tanh(0) = 0
}

TEST_CASE("parameter count at the default width") {
  MaskModel m = init_params(0, 257, 64);
  // 4H(F + H + 1) + F(H + 1)
  CHECK(m.num_params() == 4 * 64 * (257 + 64 + 1) + 257 * (64 + 1));
  CHECK(m.num_params() == 99137);
}

TEST_CASE("initialization is seeded and bounded") {
  MaskModel a = init_params(7, 33, 8);
  MaskModel b = init_params(7, 33, 8);
  MaskModel c = init_params(8, 33, 8);
  CHECK((a.w_input - b.w_input).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.w_input - c.w_input).cwiseAbs().maxCoeff() > 0.0);
  CHECK(a.w_input.cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(33.0));
  CHECK(a.w_recurrent.cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(8.0));
  // forget-gate bias block is +1, the rest zero
  CHECK(a.bias.segment(8, 8).minCoeff() == 1.0);
  CHECK(a.bias.segment(0, 8).cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.b_out.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("split processing equals one pass (state carry)") {
  MaskModel m = init_params(3, 10, 6);
  auto inputs = random_inputs(8, 10, 17);

  RecurrentState whole = RecurrentState::zero(6);
  auto masks_whole = forward_sequence(m, inputs, whole);

  RecurrentState split = RecurrentState::zero(6);
  auto first = forward_sequence(
      m, {inputs.begin(), inputs.begin() + 4}, split);
  auto second = forward_sequence(
      m, {inputs.begin() + 4, inputs.end()}, split);
  first.insert(first.end(), second.begin(), second.end());

  REQUIRE(first.size() == masks_whole.size());
  for (size_t t = 0; t < first.size(); ++t) CHECK(first[t] == masks_whole[t]);
  CHECK((whole.h - split.h).cwiseAbs().maxCoeff() == 0.0);
  CHECK((whole.c - split.c).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("checkpoint round trip is bit-exact") {
  MaskModel m = init_params(99, 17, 5);
  const char* path = "mask_model_test.json";
  save_model(m, path);
  MaskModel r = load_model(path);
  std::remove(path);
  CHECK(r.input_dim == m.input_dim);
  CHECK(r.hidden_dim == m.hidden_dim);
  CHECK(r.seed == m.seed);
  CHECK((r.w_input - m.w_input).cwiseAbs().maxCoeff() == 0.0);
  CHECK((r.w_recurrent - m.w_recurrent).cwiseAbs().maxCoeff() == 0.0);
  CHECK((r.bias - m.bias).cwiseAbs().maxCoeff() == 0.0);
  CHECK((r.w_out - m.w_out).cwiseAbs().maxCoeff() == 0.0);
  CHECK((r.b_out - m.b_out).cwiseAbs().maxCoeff() == 0.0);
  // masks produced by the restored model are identical
  auto inputs = random_inputs(4, 17, 3);
  RecurrentState s1 = RecurrentState::zero(5), s2 = RecurrentState::zero(5);
  CHECK(forward_sequence(m, inputs, s1) == forward_sequence(r, inputs, s2));
}

TEST_CASE("masks stay strictly inside (0,1)") {
  MaskModel m = init_params(1, 20, 12);
  auto inputs = random_inputs(30, 20, 4);
  RecurrentState st = RecurrentState::zero(12);
  for (const auto& mask : forward_sequence(m, inputs, st))
    for (double v : mask) {
      CHECK(v > 0.0);
      CHECK(v < 1.0);
    }
}

TEST_CASE("dimension mismatches are rejected") {
  MaskModel m = init_params(0, 8, 4);
  RecurrentState st = RecurrentState::zero(4);
  CHECK_THROWS(forward_step(m, std::vector<double>(9, 0.1), st));
  CHECK_THROWS(init_params(0, 0, 4));
}

}  // TEST_SUITE
