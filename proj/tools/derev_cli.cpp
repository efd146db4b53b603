// Command-line front end: data generation, dereverberation, training,
// evaluation, benchmarking and the Dirac-impulse demo.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "derev/acoustics.hpp"
#include "derev/config.hpp"
#include "derev/metrics.hpp"
#include "derev/pipeline.hpp"

namespace fs = std::filesystem;
using namespace derev;

namespace {

// exit codes: 0 ok, 2 usage, 3 data, 4 numeric
constexpr int kUsageError = 2;
constexpr int kDataError = 3;
constexpr int kNumericError = 4;

struct GlobalOpts {
  std::string config_path;
  std::string scenario = "HA";
  uint64_t seed = 0;
  std::string output_dir = ".";
  bool scenario_set = false;
  bool delay_set = false;
  int delay_override = 0;
};

RunConfig resolve_config(const GlobalOpts& g) {
  RunConfig rc;
  rc.scenario = parse_scenario(g.scenario);
  rc.seed = g.seed;
  rc.output_dir = g.output_dir;
  rc.apply_scenario();
  if (!g.config_path.empty())
    rc.apply_config_file(ConfigFile::parse_file(g.config_path));
  // CLI flags win over the config file
  if (g.scenario_set) {
    rc.scenario = parse_scenario(g.scenario);
    rc.apply_scenario();
  }
  if (g.delay_set) {
    if (g.delay_override != scenario_delay(rc.scenario))
      std::cerr << "warning: delay " << g.delay_override
                << " overrides the " << scenario_name(rc.scenario)
                << " default " << scenario_delay(rc.scenario) << "\n";
    rc.wpe.delay = g.delay_override;
  }
  return rc;
}

int cmd_gen_data(const GlobalOpts& g, int num_sequences, double t60_min,
                 double t60_max, int utterances_per_seq) {
  RunConfig rc = resolve_config(g);
  fs::create_directories(rc.output_dir);

  std::vector<ManifestEntry> entries;
  for (int i = 0; i < num_sequences; ++i) {
    uint64_t seed = rc.seed * 100003 + i;
    double frac = num_sequences > 1
        ? static_cast<double>(i) / (num_sequences - 1)
        : 0.5;
    double t60 = t60_min + frac * (t60_max - t60_min);

    std::vector<std::vector<double>> utts;
    for (int u = 0; u < utterances_per_seq; ++u)
      utts.push_back(synth_utterance(seed * 31 + u, 2.0 + 1.5 * (u % 4)));
    auto sequence = build_sequence(utts, seed);

    SceneSpec scene = random_scene(seed, t60);
    Rir rir = generate_rir(scene);
    Rir target_rir = split_target_rir(rir, rc.scenario);
    RenderedPair pair = render(sequence, rir, target_rir, rc.scenario);

    ManifestEntry e;
    e.id = "seq" + std::to_string(i);
    e.input_wav = (fs::path(rc.output_dir) / (e.id + "_rev.wav")).string();
    e.target_wav = (fs::path(rc.output_dir) / (e.id + "_tgt.wav")).string();
    e.scenario = rc.scenario;
    e.t60 = t60;
    e.seed = seed;
    write_wav(e.input_wav, pair.reverberant);
    write_wav(e.target_wav, pair.target);
    entries.push_back(std::move(e));
    std::cerr << "rendered " << entries.back().id << " (T60 " << t60 << " s)\n";
  }
  write_manifest(entries, (fs::path(rc.output_dir) / "manifest.json").string());
  return 0;
}

int cmd_dereverb(const GlobalOpts& g, const std::string& input_path,
                 const std::string& output_path, const std::string& psd_mode,
                 const std::string& checkpoint, const std::string& target_path) {
  RunConfig rc = resolve_config(g);
  PsdMode mode = parse_psd_mode(psd_mode);
  if (mode == PsdMode::Model && checkpoint.empty()) {
    std::cerr << "error: --psd model requires --checkpoint\n";
    return kUsageError;
  }
  if (mode == PsdMode::Oracle && target_path.empty()) {
    std::cerr << "error: --psd oracle requires --target\n";
    return kUsageError;
  }
  Audio input = read_wav(input_path);
  rc.wpe.num_channels = input.num_channels();
  std::optional<MaskModel> model;
  if (mode == PsdMode::Model) model = load_model(checkpoint);
  std::optional<Audio> target;
  if (mode == PsdMode::Oracle) target = read_wav(target_path);

  Audio out = dereverb(input, rc.stft, rc.wpe, mode, rc.smoothing_beta,
                       model ? &*model : nullptr, target ? &*target : nullptr);
  write_wav(output_path, out);
  return 0;
}

int cmd_train(const GlobalOpts& g, const std::string& manifest_path,
              bool e2e, const std::string& checkpoint_in,
              const std::string& checkpoint_out, const std::string& history_path,
              int hidden_dim_flag, double lr_flag, int epochs_flag) {
  RunConfig rc = resolve_config(g);
  if (hidden_dim_flag > 0) rc.hidden_dim = hidden_dim_flag;
  if (lr_flag > 0) rc.train.lr = lr_flag;
  if (epochs_flag > 0) rc.train.max_epochs = epochs_flag;

  auto entries = read_manifest(manifest_path);
  Dataset data = build_dataset(entries, rc.stft, rc.train.segment_frames,
                               rc.train.validation_fraction,
                               rc.train.per_channel_loss);

  MaskModel init = checkpoint_in.empty()
      ? init_params(rc.seed, rc.stft.num_bins(), rc.hidden_dim)
      : load_model(checkpoint_in);

  TrainResult result = e2e ? train_e2e(init, data, rc.train, rc.wpe)
                           : pretrain(init, data, rc.train);
  save_model(result.model, checkpoint_out);
  if (!history_path.empty()) write_history(result.history, history_path);
  for (const auto& rec : result.history)
    std::cerr << "epoch " << rec.epoch << " train " << rec.train_loss
              << " val " << rec.val_loss << " lr " << rec.lr << "\n";
  return 0;
}

int cmd_evaluate(const GlobalOpts& g, const std::string& manifest_path,
                 const std::string& algorithms,
                 const std::string& dnn_checkpoint,
                 const std::string& e2e_checkpoint,
                 const std::string& out_csv, const std::string& out_json) {
  RunConfig rc = resolve_config(g);
  auto entries = read_manifest(manifest_path);
  auto items = load_eval_items(entries);

  std::optional<MaskModel> dnn_model, e2e_model;
  if (!dnn_checkpoint.empty()) dnn_model = load_model(dnn_checkpoint);
  if (!e2e_checkpoint.empty()) e2e_model = load_model(e2e_checkpoint);

  std::vector<std::pair<std::string, Algorithm>> algos;
  std::stringstream ss(algorithms);
  std::string name;
  while (std::getline(ss, name, ',')) {
    if (name == "unprocessed") {
      algos.emplace_back(name,
                         [](const EvalItem& it) { return it.reverberant; });
    } else if (name == "vanilla") {
      algos.emplace_back(name, [rc](const EvalItem& it) {
        return dereverb(it.reverberant, rc.stft, rc.wpe, PsdMode::Vanilla,
                        rc.smoothing_beta);
      });
    } else if (name == "oracle") {
      algos.emplace_back(name, [rc](const EvalItem& it) {
        return dereverb(it.reverberant, rc.stft, rc.wpe, PsdMode::Oracle,
                        rc.smoothing_beta, nullptr, &it.target);
      });
    } else if (name == "dnn" || name == "e2e") {
      const auto& model = (name == "dnn") ? dnn_model : e2e_model;
      if (!model)
        algos.emplace_back(name, [name](const EvalItem&) -> Audio {
          throw std::runtime_error("missing checkpoint for " + name);
        });
      else
        algos.emplace_back(name, [rc, &model](const EvalItem& it) {
          return dereverb(it.reverberant, rc.stft, rc.wpe, PsdMode::Model,
                          rc.smoothing_beta, &*model);
        });
    } else {
      std::cerr << "error: unknown algorithm '" << name << "'\n";
      return kUsageError;
    }
  }

  MetricsReport report = evaluate_suite(items, algos, rc.scenario);
  if (!out_csv.empty()) write_report_csv(report, out_csv);
  if (!out_json.empty()) write_report_json(report, out_json);
  for (const auto& row : report.rows) {
    std::cerr << row.algorithm << ": sdr_avg " << row.sdr_avg;
    if (row.elr_avg) std::cerr << " elr_avg " << *row.elr_avg;
    std::cerr << "\n";
  }
  return 0;
}

int cmd_bench(const GlobalOpts& g, double seconds, const std::string& checkpoint,
              const std::string& out_json) {
  RunConfig rc = resolve_config(g);
  MaskModel model = checkpoint.empty()
      ? init_params(rc.seed, rc.stft.num_bins(), rc.hidden_dim)
      : load_model(checkpoint);

  Audio audio;
  audio.sample_rate = rc.stft.sample_rate;
  auto utt = synth_utterance(rc.seed, seconds, rc.stft.sample_rate);
  audio.channels = {utt, utt};
  rc.wpe.num_channels = 2;

  double factor = rtf(
      [&](const Audio& a) {
        dereverb(a, rc.stft, rc.wpe, PsdMode::Model, rc.smoothing_beta, &model);
      },
      audio);

  nlohmann::json j;
  j["rtf"] = factor;
  j["audio_seconds"] = seconds;
  j["num_channels"] = rc.wpe.num_channels;
  j["num_taps"] = rc.wpe.num_taps;
  j["num_bins"] = rc.stft.num_bins();
  j["hidden_dim"] = model.hidden_dim;
  std::cout << j.dump(2) << "\n";
  if (!out_json.empty()) {
    std::ofstream f(out_json);
    f << j.dump(2);
  }
  return factor < 1.0 ? 0 : kNumericError;
}

int cmd_demo_dirac(const GlobalOpts& g, const std::string& psd_mode,
                   const std::string& checkpoint) {
  RunConfig rc = resolve_config(g);
  fs::create_directories(rc.output_dir);

  // utterance + 1 s silence + Dirac impulse, T60 = 0.75 s
  const int sr = rc.stft.sample_rate;
  auto utt = synth_utterance(rc.seed + 7, 4.0, sr);
  std::vector<double> clean = utt;
  clean.insert(clean.end(), sr, 0.0);
  clean.push_back(0.5);  // the impulse
  clean.insert(clean.end(), sr, 0.0);

  SceneSpec scene = random_scene(rc.seed + 7, 0.75);
  Rir rir = generate_rir(scene);
  Rir target_rir = split_target_rir(rir, rc.scenario);
  RenderedPair pair = render(clean, rir, target_rir, rc.scenario);

  PsdMode mode = parse_psd_mode(psd_mode);
  std::optional<MaskModel> model;
  if (mode == PsdMode::Model) {
    if (checkpoint.empty()) {
      std::cerr << "error: --psd model requires --checkpoint\n";
      return kUsageError;
    }
    model = load_model(checkpoint);
  }
  rc.wpe.num_channels = 2;
  Audio processed =
      dereverb(pair.reverberant, rc.stft, rc.wpe, mode, rc.smoothing_beta,
               model ? &*model : nullptr,
               mode == PsdMode::Oracle ? &pair.target : nullptr);

  Audio clean_audio;
  clean_audio.sample_rate = sr;
  clean_audio.channels = {clean, clean};

  fs::path dir(rc.output_dir);
  write_matrix_csv(log_spectrogram(clean_audio, rc.stft),
                   (dir / "demo_clean.csv").string());
  write_matrix_csv(log_spectrogram(pair.reverberant, rc.stft),
                   (dir / "demo_reverberant.csv").string());
  write_matrix_csv(log_spectrogram(processed, rc.stft),
                   (dir / "demo_processed.csv").string());
  write_wav((dir / "demo_clean.wav").string(), clean_audio);
  write_wav((dir / "demo_reverberant.wav").string(), pair.reverberant);
  write_wav((dir / "demo_processed.wav").string(), processed);
  std::cerr << "demo files written to " << rc.output_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Online multichannel WPE dereverberation toolkit"};
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--config", g.config_path, "config file (key = value, [section]s)");
  auto* scen_opt =
      app.add_option("--scenario", g.scenario, "HA or CI")->capture_default_str();
  app.add_option("--seed", g.seed, "random seed")->capture_default_str();
  app.add_option("--output-dir", g.output_dir, "output directory")
      ->capture_default_str();
  auto* delay_opt = app.add_option("--delay", g.delay_override,
                                   "override the scenario prediction delay");

  auto* gen = app.add_subcommand("gen-data", "synthesize a paired dataset");
  int num_sequences = 8, utts_per_seq = 6;
  double t60_min = 0.4, t60_max = 1.0;
  gen->add_option("--num", num_sequences, "number of sequences")
      ->capture_default_str();
  gen->add_option("--t60-min", t60_min)->capture_default_str();
  gen->add_option("--t60-max", t60_max)->capture_default_str();
  gen->add_option("--utterances", utts_per_seq)->capture_default_str();

  auto* der = app.add_subcommand("dereverb", "process one WAV file");
  std::string in_path, out_path, psd_mode = "vanilla", checkpoint, target_path;
  der->add_option("--input", in_path)->required();
  der->add_option("--output", out_path)->required();
  der->add_option("--psd", psd_mode, "vanilla | oracle | model")
      ->capture_default_str();
  der->add_option("--checkpoint", checkpoint);
  der->add_option("--target", target_path, "target WAV (oracle mode)");

  std::string manifest, ckpt_in, ckpt_out = "model.json", history;
  int hidden_dim_flag = 0, epochs_flag = 0;
  double lr_flag = 0;
  auto add_train_opts = [&](CLI::App* c) {
    c->add_option("--manifest", manifest)->required();
    c->add_option("--checkpoint-in", ckpt_in);
    c->add_option("--checkpoint-out", ckpt_out)->capture_default_str();
    c->add_option("--history", history, "JSON-lines epoch log");
    c->add_option("--hidden-dim", hidden_dim_flag);
    c->add_option("--lr", lr_flag);
    c->add_option("--epochs", epochs_flag);
  };
  auto* pre = app.add_subcommand("pretrain", "mask pretraining (no WPE in the loss)");
  add_train_opts(pre);
  auto* e2e = app.add_subcommand("train-e2e", "end-to-end training through WPE");
  add_train_opts(e2e);

  auto* ev = app.add_subcommand("evaluate", "metrics over a test manifest");
  std::string algorithms = "unprocessed,vanilla,oracle";
  std::string dnn_ckpt, e2e_ckpt, out_csv, out_json;
  ev->add_option("--manifest", manifest)->required();
  ev->add_option("--algorithms", algorithms,
                 "comma list: unprocessed,vanilla,oracle,dnn,e2e")
      ->capture_default_str();
  ev->add_option("--dnn-checkpoint", dnn_ckpt);
  ev->add_option("--e2e-checkpoint", e2e_ckpt);
  ev->add_option("--out-csv", out_csv);
  ev->add_option("--out-json", out_json);

  auto* bench = app.add_subcommand("bench", "real-time factor of the DNN-WPE path");
  double bench_seconds = 8.0;
  std::string bench_ckpt, bench_json;
  bench->add_option("--seconds", bench_seconds)->capture_default_str();
  bench->add_option("--checkpoint", bench_ckpt);
  bench->add_option("--out-json", bench_json);

  auto* demo = app.add_subcommand("demo-dirac",
                                  "utterance + Dirac impulse spectrogram demo");
  std::string demo_psd = "vanilla", demo_ckpt;
  demo->add_option("--psd", demo_psd)->capture_default_str();
  demo->add_option("--checkpoint", demo_ckpt);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kUsageError;
  }

  g.scenario_set = scen_opt->count() > 0;
  g.delay_set = delay_opt->count() > 0;

  try {
    if (gen->parsed())
      return cmd_gen_data(g, num_sequences, t60_min, t60_max, utts_per_seq);
    if (der->parsed())
      return cmd_dereverb(g, in_path, out_path, psd_mode, checkpoint,
                          target_path);
    if (pre->parsed())
      return cmd_train(g, manifest, false, ckpt_in, ckpt_out, history,
                       hidden_dim_flag, lr_flag, epochs_flag);
    if (e2e->parsed())
      return cmd_train(g, manifest, true, ckpt_in, ckpt_out, history,
                       hidden_dim_flag, lr_flag, epochs_flag);
    if (ev->parsed())
      return cmd_evaluate(g, manifest, algorithms, dnn_ckpt, e2e_ckpt, out_csv,
                          out_json);
    if (bench->parsed()) return cmd_bench(g, bench_seconds, bench_ckpt, bench_json);
    if (demo->parsed()) return cmd_demo_dirac(g, demo_psd, demo_ckpt);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::runtime_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDataError;
  }
  return 0;
}
