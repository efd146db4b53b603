#include "derev/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <stdexcept>

#include "json.hpp"

namespace derev {

namespace {

constexpr double kDbCap = 60.0;

double cap_db(double ratio_num, double ratio_den) {
  if (ratio_den <= 0.0) return kDbCap;
  if (ratio_num <= 0.0) return -kDbCap;
  double db = 10.0 * std::log10(ratio_num / ratio_den);
  return std::clamp(db, -kDbCap, kDbCap);
}

}  // namespace

double elr(const Audio& output, const Audio& target, double after_init_start) {
  if (output.num_channels() != target.num_channels())
    throw std::invalid_argument("elr: channel mismatch");
  const long N = std::min(output.num_samples(), target.num_samples());
  const long start =
      static_cast<long>(after_init_start * target.sample_rate);
  if (start >= N) throw std::invalid_argument("elr: empty evaluation region");

  double early = 0.0, late = 0.0;
  for (int d = 0; d < output.num_channels(); ++d) {
    for (long n = start; n < N; ++n) {
      double t = target.channels[d][n];
      double r = output.channels[d][n] - t;
      early += t * t;
      late += r * r;
    }
  }
  return cap_db(early, late);
}

double sdr(const Audio& estimate, const Audio& reference) {
  if (estimate.num_channels() != reference.num_channels())
    throw std::invalid_argument("sdr: channel mismatch");
  const long N = std::min(estimate.num_samples(), reference.num_samples());

  double dot = 0.0, ref_energy = 0.0;
  for (int d = 0; d < reference.num_channels(); ++d)
    for (long n = 0; n < N; ++n) {
      dot += estimate.channels[d][n] * reference.channels[d][n];
      ref_energy += reference.channels[d][n] * reference.channels[d][n];
    }
  if (ref_energy <= 0.0) throw std::invalid_argument("sdr: zero reference");

  const double gain = dot / ref_energy;
  double sig = 0.0, err = 0.0;
  for (int d = 0; d < reference.num_channels(); ++d)
    for (long n = 0; n < N; ++n) {
      double s = gain * reference.channels[d][n];
      double e = estimate.channels[d][n] - s;
      sig += s * s;
      err += e * e;
    }
  return cap_db(sig, err);
}

double rtf(const std::function<void(const Audio&)>& pipeline,
           const Audio& audio) {
  const double duration =
      static_cast<double>(audio.num_samples()) / audio.sample_rate;
  auto t0 = std::chrono::steady_clock::now();
  pipeline(audio);
  auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double>(t1 - t0).count() / duration;
}

namespace {

int t60_bucket(double t60) {
  if (t60 < 0.6) return 0;
  if (t60 < 0.8) return 1;
  return 2;
}

}  // namespace

MetricsReport evaluate_suite(
    const std::vector<EvalItem>& items,
    const std::vector<std::pair<std::string, Algorithm>>& algorithms,
    Scenario scenario, double after_init_start) {
  MetricsReport report;
  for (const auto& [name, algo] : algorithms) {
    std::array<double, 3> elr_sum = {0, 0, 0}, sdr_sum = {0, 0, 0};
    std::array<int, 3> count = {0, 0, 0};
    bool failed = false;
    std::vector<UtteranceMetrics> rows;
    for (const auto& item : items) {
      Audio out;
      try {
        out = algo(item);
      } catch (const std::exception& e) {
        std::cerr << "evaluate_suite: algorithm '" << name << "' failed on '"
                  << item.id << "': " << e.what() << "\n";
        failed = true;
        break;
      }
      UtteranceMetrics um;
      um.id = item.id;
      um.algorithm = name;
      um.scenario = scenario;
      um.t60 = item.t60;
      um.sdr_db = sdr(out, item.target);
      // ELR is only meaningful against an early-reflection target
      if (scenario == Scenario::HA)
        um.elr_db = elr(out, item.target, after_init_start);
      int b = t60_bucket(item.t60);
      if (um.elr_db) elr_sum[b] += *um.elr_db;
      sdr_sum[b] += um.sdr_db;
      ++count[b];
      rows.push_back(std::move(um));
    }
    if (failed) continue;

    std::sort(rows.begin(), rows.end(),
              [](const auto& a, const auto& b) { return a.id < b.id; });
    report.per_utterance.insert(report.per_utterance.end(), rows.begin(),
                                rows.end());

    MetricsReport::BucketRow row;
    row.algorithm = name;
    row.count = count;
    double elr_total = 0.0, sdr_total = 0.0;
    int total = 0;
    for (int b = 0; b < 3; ++b) {
      if (count[b] == 0) continue;
      if (scenario == Scenario::HA) row.elr_db[b] = elr_sum[b] / count[b];
      row.sdr_db[b] = sdr_sum[b] / count[b];
      elr_total += elr_sum[b];
      sdr_total += sdr_sum[b];
      total += count[b];
    }
    if (total > 0) {
      if (scenario == Scenario::HA) row.elr_avg = elr_total / total;
      row.sdr_avg = sdr_total / total;
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

void write_report_csv(const MetricsReport& report, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write report: " + path);
  f << "algorithm,elr_0.4-0.6,sdr_0.4-0.6,elr_0.6-0.8,sdr_0.6-0.8,"
       "elr_0.8-1.0,sdr_0.8-1.0,elr_avg,sdr_avg\n";
  auto opt = [](const std::optional<double>& v) {
    return v ? std::to_string(*v) : std::string("-");
  };
  for (const auto& row : report.rows) {
    f << row.algorithm;
    for (int b = 0; b < 3; ++b)
      f << "," << opt(row.elr_db[b]) << "," << row.sdr_db[b];
    f << "," << opt(row.elr_avg) << "," << row.sdr_avg << "\n";
  }
}

void write_report_json(const MetricsReport& report, const std::string& path) {
  nlohmann::json j;
  j["buckets"] = {"0.4-0.6", "0.6-0.8", "0.8-1.0"};
  for (const auto& row : report.rows) {
    nlohmann::json r;
    r["algorithm"] = row.algorithm;
    for (int b = 0; b < 3; ++b) {
      nlohmann::json cell;
      if (row.elr_db[b]) cell["elr_db"] = *row.elr_db[b];
      cell["sdr_db"] = row.sdr_db[b];
      cell["count"] = row.count[b];
      r["by_t60"].push_back(cell);
    }
    if (row.elr_avg) r["elr_avg"] = *row.elr_avg;
    r["sdr_avg"] = row.sdr_avg;
    j["rows"].push_back(r);
  }
  for (const auto& um : report.per_utterance) {
    nlohmann::json u;
    u["id"] = um.id;
    u["algorithm"] = um.algorithm;
    u["t60"] = um.t60;
    if (um.elr_db) u["elr_db"] = *um.elr_db;
    u["sdr_db"] = um.sdr_db;
    j["per_utterance"].push_back(u);
  }
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write report: " + path);
  f << j.dump(2);
}

}  // namespace derev
