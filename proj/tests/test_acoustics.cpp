#include <cmath>
#include <numbers>

#include "derev/acoustics.hpp"
#include "doctest.h"

using namespace derev;

TEST_SUITE("acoustics") {

TEST_CASE("beta=0 leaves only the direct path at the right delay") {
  std::array<double, 3> room = {6, 5, 3};
  std::array<double, 3> src = {2, 3, 1.5};
  std::vector<std::array<double, 3>> mics = {{4, 3, 1.5}};  // 2 m away
  Rir rir = image_source_rir(room, src, mics, 0.0, 1000, 16000);

  const double d = 2.0;
  const int expected_idx = static_cast<int>(std::lround(d / 343.0 * 16000));
  CHECK(rir.direct_index[0] == expected_idx);
  CHECK(rir.direct_amplitude[0] ==
        doctest::Approx(1.0 / (4.0 * std::numbers::pi * d)).epsilon(1e-12));
  for (int n = 0; n < 1000; ++n) {
    if (n == expected_idx)
      CHECK(rir.taps[0][n] == doctest::Approx(rir.direct_amplitude[0]));
    else
      CHECK(rir.taps[0][n] == 0.0);
  }
}

TEST_CASE("Schroeder fit recovers a synthetic exponential decay") {
  // |h[n]|^2 = 10^(-6n/(T60*sr)) decays 60 dB at exactly n = T60*sr
  const double t60 = 0.5;
  const int sr = 16000;
  std::vector<double> taps(static_cast<size_t>(t60 * sr * 1.2));
  for (size_t n = 0; n < taps.size(); ++n)
    taps[n] = std::pow(10.0, -3.0 * n / (t60 * sr));
  CHECK(measure_t60(taps, sr) == doctest::Approx(t60).epsilon(0.02));
}

TEST_CASE("generated RIRs land near the requested T60") {
  for (double t60 : {0.4, 0.7, 1.0}) {
    SceneSpec spec = random_scene(123, t60);
    Rir rir = generate_rir(spec);
    double measured = measure_t60(rir.taps[0], spec.sample_rate);
    CHECK(measured == doctest::Approx(t60).epsilon(0.20));
  }
}

TEST_CASE("infeasible T60 is rejected") {
  SceneSpec spec;
  spec.room = {20, 20, 20};
  spec.source = {5, 10, 10};
  spec.mics = {{{15, 10, 10}, {15.16, 10, 10}}};
  spec.t60 = 0.4;  // would need absorption > 1
  CHECK_THROWS(generate_rir(spec));
}

TEST_CASE("target split: early window vs direct tap") {
  SceneSpec spec = random_scene(7, 0.6);
  Rir rir = generate_rir(spec);

  Rir ha = split_target_rir(rir, Scenario::HA);
  const int early = static_cast<int>(std::lround(0.040 * spec.sample_rate));
  for (size_t m = 0; m < ha.taps.size(); ++m) {
    const int a = rir.direct_index[m];
    for (int n = 0; n < static_cast<int>(ha.taps[m].size()); ++n) {
      if (n >= a && n < a + early)
        CHECK(ha.taps[m][n] == rir.taps[m][n]);
      else
        CHECK(ha.taps[m][n] == 0.0);
    }
  }

  Rir ci = split_target_rir(rir, Scenario::CI);
  for (size_t m = 0; m < ci.taps.size(); ++m) {
    int nonzero = 0;
    for (double v : ci.taps[m])
      if (v != 0.0) ++nonzero;
    CHECK(nonzero == 1);
    CHECK(ci.taps[m][rir.direct_index[m]] ==
          doctest::Approx(rir.direct_amplitude[m]));
  }
}

TEST_CASE("sequences reach the length target and are seeded") {
  std::vector<std::vector<double>> utts;
  for (int u = 0; u < 4; ++u) utts.push_back(synth_utterance(u, 2.0));
  auto a = build_sequence(utts, 9, 20.0);
  auto b = build_sequence(utts, 9, 20.0);
  auto c = build_sequence(utts, 10, 20.0);
  CHECK(a.size() >= 20 * 16000);
  CHECK(a.size() <= 24 * 16000);  // utterances are 2 s, gaps <= 0.3 s
  CHECK(a == b);
  CHECK(a != c);
}

TEST_CASE("synthetic utterances have the expected length and level") {
  auto utt = synth_utterance(3, 1.5);
  CHECK(utt.size() == static_cast<size_t>(1.5 * 16000));
  double rms = 0.0;
  for (double v : utt) rms += v * v;
  rms = std::sqrt(rms / utt.size());
  CHECK(rms == doctest::Approx(0.05).epsilon(1e-9));
}

TEST_CASE("rendering a unit impulse reproduces the RIR") {
  SceneSpec spec = random_scene(5, 0.5);
  Rir rir = generate_rir(spec);
  Rir target = split_target_rir(rir, Scenario::HA);
  std::vector<double> impulse = {1.0};
  RenderedPair pair = render(impulse, rir, target, Scenario::HA);

  REQUIRE(pair.reverberant.num_channels() == 2);
  CHECK(pair.reverberant.num_samples() == pair.target.num_samples());
  for (int m = 0; m < 2; ++m)
    for (long n = 0; n < pair.reverberant.num_samples(); ++n)
      CHECK(pair.reverberant.channels[m][n] ==
            doctest::Approx(rir.taps[m][n]).epsilon(1e-9).scale(1.0));
}

TEST_CASE("random scenes are valid and honor the requested T60") {
  for (uint64_t seed = 0; seed < 10; ++seed) {
    SceneSpec spec = random_scene(seed, 0.4 + 0.06 * seed);
    CHECK(spec.valid());
    CHECK(spec.t60 == 0.4 + 0.06 * seed);
  }
}

}  // TEST_SUITE
