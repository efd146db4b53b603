#pragma once

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "derev/train.hpp"
#include "derev/wav.hpp"

namespace derev {

// Early-to-late reverberation ratio against an HA-style target (direct +
// 40 ms early reflections), over samples after `after_init_start` seconds.
// Capped at +-60 dB.
double elr(const Audio& output, const Audio& target, double after_init_start);

// Scale-invariant SDR: estimate projected onto the reference with the
// optimal scalar gain, per utterance. Capped at +-60 dB.
double sdr(const Audio& estimate, const Audio& reference);

// Real-time factor: processing wall-clock time / audio duration. The
// pipeline callback gets the audio and must fully process it.
double rtf(const std::function<void(const Audio&)>& pipeline,
           const Audio& audio);

struct UtteranceMetrics {
  std::string id;
  std::string algorithm;
  Scenario scenario = Scenario::HA;
  double t60 = 0.0;
  std::optional<double> elr_db;  // absent for CI
  double sdr_db = 0.0;
};

struct MetricsReport {
  std::vector<UtteranceMetrics> per_utterance;
  // bucket edges 0.4/0.6/0.8/1.0 s; index 0 = [0.4,0.6) etc.
  struct BucketRow {
    std::string algorithm;
    std::array<std::optional<double>, 3> elr_db;
    std::array<double, 3> sdr_db = {0, 0, 0};
    std::array<int, 3> count = {0, 0, 0};
    std::optional<double> elr_avg;
    double sdr_avg = 0.0;
  };
  std::vector<BucketRow> rows;
};

struct EvalItem {
  std::string id;
  Audio reverberant;
  Audio target;
  double t60 = 0.0;
};

// algorithm name -> processed output (or throws; the suite records the
// error and continues)
using Algorithm = std::function<Audio(const EvalItem&)>;

MetricsReport evaluate_suite(
    const std::vector<EvalItem>& items,
    const std::vector<std::pair<std::string, Algorithm>>& algorithms,
    Scenario scenario, double after_init_start = 4.0);

void write_report_csv(const MetricsReport& report, const std::string& path);
void write_report_json(const MetricsReport& report, const std::string& path);

}  // namespace derev
