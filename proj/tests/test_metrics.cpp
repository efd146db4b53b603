#include <cmath>

#include "derev/metrics.hpp"
#include "doctest.h"

using namespace derev;

namespace {

Audio const_audio(double value, long samples, int channels = 1) {
  Audio a;
  a.channels.assign(channels, std::vector<double>(samples, value));
  return a;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("ELR of an exact match hits the +60 dB cap") {
  Audio t = const_audio(1.0, 5 * 16000);
  CHECK(elr(t, t, 4.0) == 60.0);
}

TEST_CASE("ELR of a known residual") {
  Audio t = const_audio(1.0, 5 * 16000);
  Audio o = const_audio(1.1, 5 * 16000);  // residual 0.1 -> ratio 100
  CHECK(elr(o, t, 4.0) == doctest::Approx(20.0).epsilon(1e-12));
}

TEST_CASE("ELR ignores the initialization period") {
  Audio t = const_audio(1.0, 5 * 16000);
  Audio o = const_audio(1.1, 5 * 16000);
  Audio corrupted = o;
  for (long n = 0; n < 4 * 16000; ++n) corrupted.channels[0][n] = 37.0;
  CHECK(elr(corrupted, t, 4.0) == elr(o, t, 4.0));
  CHECK_THROWS(elr(o, t, 10.0));  // empty evaluation region
}

TEST_CASE("SDR is scale-invariant") {
  Audio ref;
  ref.channels = {{1.0, -0.5, 0.25, 2.0, -1.0}};
  Audio scaled = ref;
  for (auto& v : scaled.channels[0]) v *= 3.7;
  CHECK(sdr(scaled, ref) == 60.0);  // perfect after gain matching
}

TEST_CASE("SDR of orthogonal additive noise") {
  // ref on even samples, noise on odd -> projection gain is exactly 1
  const long N = 1000;
  Audio ref = const_audio(0.0, N);
  Audio est = const_audio(0.0, N);
  double ref_e = 0.0, noise_e = 0.0;
  for (long n = 0; n < N; ++n) {
    if (n % 2 == 0) {
      ref.channels[0][n] = 1.0;
      est.channels[0][n] = 1.0;
      ref_e += 1.0;
    } else {
      est.channels[0][n] = 0.1;
      noise_e += 0.01;
    }
  }
  CHECK(sdr(est, ref) ==
        doctest::Approx(10.0 * std::log10(ref_e / noise_e)).epsilon(1e-12));
}

TEST_CASE("suite buckets by T60 and omits ELR for CI") {
  std::vector<EvalItem> items;
  for (double t60 : {0.5, 0.7, 0.9}) {
    EvalItem it;
    it.id = "t" + std::to_string(t60);
    it.reverberant = const_audio(1.1, 5 * 16000, 2);
    it.target = const_audio(1.0, 5 * 16000, 2);
    it.t60 = t60;
    items.push_back(std::move(it));
  }
  std::vector<std::pair<std::string, Algorithm>> algos = {
      {"identity", [](const EvalItem& it) { return it.reverberant; }}};

  MetricsReport ha = evaluate_suite(items, algos, Scenario::HA);
  REQUIRE(ha.rows.size() == 1);
  CHECK(ha.rows[0].count == std::array<int, 3>{1, 1, 1});
  for (int b = 0; b < 3; ++b) {
    REQUIRE(ha.rows[0].elr_db[b].has_value());
    CHECK(*ha.rows[0].elr_db[b] == doctest::Approx(20.0));
  }
  CHECK(ha.per_utterance.size() == 3);

  MetricsReport ci = evaluate_suite(items, algos, Scenario::CI);
  CHECK(!ci.rows[0].elr_avg.has_value());
  for (const auto& um : ci.per_utterance) CHECK(!um.elr_db.has_value());
}

TEST_CASE("a failing algorithm is skipped, not fatal") {
  std::vector<EvalItem> items(1);
  items[0].id = "x";
  items[0].reverberant = const_audio(1.0, 5 * 16000);
  items[0].target = const_audio(1.0, 5 * 16000);
  items[0].t60 = 0.5;
  std::vector<std::pair<std::string, Algorithm>> algos = {
      {"bad", [](const EvalItem&) -> Audio { throw std::runtime_error("boom"); }},
      {"identity", [](const EvalItem& it) { return it.reverberant; }}};
  MetricsReport r = evaluate_suite(items, algos, Scenario::HA);
  REQUIRE(r.rows.size() == 1);
  CHECK(r.rows[0].algorithm == "identity");
}

TEST_CASE("RTF measures wall time against audio duration") {
  Audio a = const_audio(0.0, 16000);  // 1 s
  double f = rtf([](const Audio&) {}, a);
  CHECK(f >= 0.0);
  CHECK(f < 0.5);  // an empty pipeline is far faster than real time
}

}  // TEST_SUITE
