#include "derev/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace derev {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

ConfigFile ConfigFile::parse_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config file: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_string(ss.str());
}

ConfigFile ConfigFile::parse_string(const std::string& text) {
  ConfigFile cfg;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[' && t.back() == ']') {
      section = trim(t.substr(1, t.size() - 2));
      continue;
    }
    size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config parse error at line " +
                               std::to_string(lineno));
    std::string key = trim(t.substr(0, eq));
    std::string val = trim(t.substr(eq + 1));
    // strip optional quotes
    if (val.size() >= 2 && val.front() == '"' && val.back() == '"')
      val = val.substr(1, val.size() - 2);
    cfg.kv_[section.empty() ? key : section + "." + key] = val;
  }
  return cfg;
}

std::optional<std::string> ConfigFile::get(const std::string& key) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return std::nullopt;
  return it->second;
}

std::optional<double> ConfigFile::get_double(const std::string& key) const {
  auto s = get(key);
  if (!s) return std::nullopt;
  return std::stod(*s);
}

std::optional<int> ConfigFile::get_int(const std::string& key) const {
  auto s = get(key);
  if (!s) return std::nullopt;
  return std::stoi(*s);
}

std::optional<bool> ConfigFile::get_bool(const std::string& key) const {
  auto s = get(key);
  if (!s) return std::nullopt;
  if (*s == "true" || *s == "1") return true;
  if (*s == "false" || *s == "0") return false;
  throw std::runtime_error("config: bad boolean for " + key);
}

Scenario parse_scenario(const std::string& s) {
  if (s == "HA" || s == "ha") return Scenario::HA;
  if (s == "CI" || s == "ci") return Scenario::CI;
  throw std::runtime_error("unknown scenario: " + s + " (expected HA or CI)");
}

std::string scenario_name(Scenario s) {
  return s == Scenario::HA ? "HA" : "CI";
}

int scenario_delay(Scenario s) { return s == Scenario::HA ? 5 : 3; }

void RunConfig::apply_scenario() {
  wpe.delay = scenario_delay(scenario);
  train.scenario = scenario;
}

void RunConfig::apply_config_file(const ConfigFile& f) {
  if (auto v = f.get("scenario")) scenario = parse_scenario(*v);
  apply_scenario();

  if (auto v = f.get_int("stft.window_len")) stft.window_len = *v;
  if (auto v = f.get_int("stft.hop")) stft.hop = *v;
  if (auto v = f.get_int("stft.fft_len")) stft.fft_len = *v;
  if (auto v = f.get_int("stft.sample_rate")) stft.sample_rate = *v;
  if (stft.fft_len < stft.window_len) stft.fft_len = stft.window_len;

  if (auto v = f.get_int("wpe.num_taps")) wpe.num_taps = *v;
  if (auto v = f.get_int("wpe.delay")) wpe.delay = *v;
  if (auto v = f.get_double("wpe.forgetting")) wpe.forgetting = *v;
  if (auto v = f.get_int("wpe.num_channels")) wpe.num_channels = *v;
  if (auto v = f.get_double("wpe.gate_threshold_db")) wpe.gate_threshold_db = *v;
  if (auto v = f.get_double("wpe.psd_floor")) wpe.psd_floor = *v;

  if (auto v = f.get_double("train.lr")) train.lr = *v;
  if (auto v = f.get_double("train.lr_decay")) train.lr_decay = *v;
  if (auto v = f.get_int("train.patience")) train.patience = *v;
  if (auto v = f.get_int("train.batch_size")) train.batch_size = *v;
  if (auto v = f.get_int("train.segment_frames")) train.segment_frames = *v;
  if (auto v = f.get_double("train.loss_floor")) train.loss_floor = *v;
  if (auto v = f.get_int("train.max_epochs")) train.max_epochs = *v;
  if (auto v = f.get_bool("train.per_channel_loss")) train.per_channel_loss = *v;

  if (auto v = f.get_double("psd.smoothing_beta")) smoothing_beta = *v;
  if (auto v = f.get_int("neural.hidden_dim")) hidden_dim = *v;
}

}  // namespace derev
