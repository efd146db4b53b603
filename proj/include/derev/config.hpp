#pragma once

#include <map>
#include <optional>
#include <string>

#include "derev/stft.hpp"
#include "derev/train.hpp"
#include "derev/wpe.hpp"

namespace derev {

// Flat key/value config with [section] headers; keys are "section.key".
// Precedence handled by the caller: CLI flag > config file > default.
class ConfigFile {
 public:
  static ConfigFile parse_file(const std::string& path);
  static ConfigFile parse_string(const std::string& text);

  std::optional<std::string> get(const std::string& key) const;
  std::optional<double> get_double(const std::string& key) const;
  std::optional<int> get_int(const std::string& key) const;
  std::optional<bool> get_bool(const std::string& key) const;

  const std::map<std::string, std::string>& entries() const { return kv_; }

 private:
  std::map<std::string, std::string> kv_;
};

Scenario parse_scenario(const std::string& s);
std::string scenario_name(Scenario s);

// HA -> delay 5 and d+e targets, CI -> delay 3 and d targets. Individual
// overrides are allowed but warned about by the CLI.
int scenario_delay(Scenario s);

struct RunConfig {
  Scenario scenario = Scenario::HA;
  uint64_t seed = 0;
  std::string output_dir = ".";

  StftConfig stft;
  WpeConfig wpe;
  TrainConfig train;
  double smoothing_beta = 0.85;  // vanilla PSD
  int hidden_dim = 64;

  // Apply scenario coupling, then overlay file values, CLI overrides last.
  void apply_scenario();
  void apply_config_file(const ConfigFile& file);
};

}  // namespace derev
