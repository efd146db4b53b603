#include "derev/pipeline.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace derev {

PsdMode parse_psd_mode(const std::string& s) {
  if (s == "vanilla") return PsdMode::Vanilla;
  if (s == "oracle") return PsdMode::Oracle;
  if (s == "model") return PsdMode::Model;
  throw std::invalid_argument("unknown psd mode: " + s);
}

Audio dereverb(const Audio& input, const StftConfig& stft_cfg,
               const WpeConfig& wpe_cfg, PsdMode mode, double smoothing_beta,
               const MaskModel* model, const Audio* target) {
  const int D = input.num_channels();
  const int F = stft_cfg.num_bins();
  if (D != wpe_cfg.num_channels)
    throw std::invalid_argument("dereverb: channel count mismatch with config");
  if (mode == PsdMode::Oracle && !target)
    throw std::invalid_argument("oracle mode requires a target signal");
  if (mode == PsdMode::Model) {
    if (!model) throw std::invalid_argument("model mode requires a checkpoint");
    if (model->input_dim != F)
      throw std::invalid_argument("checkpoint bins do not match STFT config");
  }

  StftAnalyzer an(stft_cfg, D);
  std::optional<StftAnalyzer> target_an;
  if (mode == PsdMode::Oracle) target_an.emplace(stft_cfg, D);
  StftSynthesizer syn(stft_cfg, D);

  WpeState wpe = init_state(wpe_cfg, F);
  SmoothedPsd smoother(F, smoothing_beta);
  RecurrentState lstm =
      model ? RecurrentState::zero(model->hidden_dim) : RecurrentState{};

  Audio out;
  out.sample_rate = input.sample_rate;
  out.channels.assign(D, {});

  const long N = input.num_samples();
  const int hop = stft_cfg.hop;
  std::vector<std::vector<double>> chunk(D, std::vector<double>(hop));
  std::vector<std::vector<double>> tchunk(D, std::vector<double>(hop));
  std::vector<cd> frame, tframe;
  std::vector<std::vector<double>> outchunk;

  for (long pos = 0; pos < N; pos += hop) {
    for (int d = 0; d < D; ++d)
      for (int n = 0; n < hop; ++n)
        chunk[d][n] = (pos + n < N) ? input.channels[d][pos + n] : 0.0;
    bool have = an.push(chunk, frame);
    if (target_an) {
      for (int d = 0; d < D; ++d)
        for (int n = 0; n < hop; ++n)
          tchunk[d][n] = (pos + n < static_cast<long>(target->num_samples()))
                             ? target->channels[d][pos + n]
                             : 0.0;
      target_an->push(tchunk, tframe);
    }
    if (!have) continue;

    std::vector<double> lambda;
    switch (mode) {
      case PsdMode::Vanilla:
        lambda = smoother.step(frame, D);
        break;
      case PsdMode::Oracle:
        lambda = oracle_psd(tframe, F, D);
        break;
      case PsdMode::Model: {
        auto mag = channel_average_magnitude(frame, F, D);
        auto mask = forward_step(*model, mag, lstm);
        lambda = mask_to_psd(mask, mag);
        break;
      }
    }
    std::vector<cd> processed = wpe_step(wpe, frame, lambda);
    syn.push(processed, outchunk);
    for (int d = 0; d < D; ++d)
      out.channels[d].insert(out.channels[d].end(), outchunk[d].begin(),
                             outchunk[d].end());
  }
  syn.flush(outchunk);
  for (int d = 0; d < D; ++d)
    out.channels[d].insert(out.channels[d].end(), outchunk[d].begin(),
                           outchunk[d].end());
  return out;
}

// ---------------------------------------------------------------------------

void write_manifest(const std::vector<ManifestEntry>& entries,
                    const std::string& path) {
  nlohmann::json j;
  j["format"] = "derev-manifest";
  j["version"] = 1;
  for (const auto& e : entries) {
    nlohmann::json r;
    r["id"] = e.id;
    r["input_wav"] = e.input_wav;
    r["target_wav"] = e.target_wav;
    r["scenario"] = scenario_name(e.scenario);
    r["t60"] = e.t60;
    r["seed"] = e.seed;
    j["sequences"].push_back(r);
  }
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write manifest: " + path);
  f << j.dump(2);
}

std::vector<ManifestEntry> read_manifest(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read manifest: " + path);
  nlohmann::json j = nlohmann::json::parse(f);
  if (j.value("format", "") != "derev-manifest")
    throw std::runtime_error("bad manifest header: " + path);
  std::vector<ManifestEntry> entries;
  for (const auto& r : j.at("sequences")) {
    ManifestEntry e;
    e.id = r.at("id").get<std::string>();
    e.input_wav = r.at("input_wav").get<std::string>();
    e.target_wav = r.at("target_wav").get<std::string>();
    e.scenario = parse_scenario(r.at("scenario").get<std::string>());
    e.t60 = r.at("t60").get<double>();
    e.seed = r.value("seed", 0ull);
    entries.push_back(std::move(e));
  }
  return entries;
}

SegmentData make_segments_source(const Audio& input, const Audio& target,
                                 const StftConfig& stft_cfg,
                                 bool per_channel_loss) {
  MultiChannelSpectrum in_spec = analyze(input, stft_cfg);
  MultiChannelSpectrum tg_spec = analyze(target, stft_cfg);
  const int T = std::min(in_spec.num_frames, tg_spec.num_frames);
  const int F = in_spec.num_bins;
  const int D = in_spec.num_channels;

  SegmentData all;
  all.frames.resize(T);
  all.input_mag.resize(T);
  all.target_mag.resize(T);
  if (per_channel_loss) all.target_mag_ch.resize(T);
  for (int t = 0; t < T; ++t) {
    all.frames[t].assign(
        in_spec.data.begin() + static_cast<size_t>(t) * F * D,
        in_spec.data.begin() + static_cast<size_t>(t + 1) * F * D);
    all.input_mag[t] = channel_average_magnitude(all.frames[t], F, D);
    std::vector<cd> tframe(
        tg_spec.data.begin() + static_cast<size_t>(t) * F * D,
        tg_spec.data.begin() + static_cast<size_t>(t + 1) * F * D);
    all.target_mag[t] = channel_average_magnitude(tframe, F, D);
    if (per_channel_loss) {
      all.target_mag_ch[t].resize(static_cast<size_t>(F) * D);
      for (size_t i = 0; i < tframe.size(); ++i)
        all.target_mag_ch[t][i] = std::abs(tframe[i]);
    }
  }
  return all;
}

std::vector<SegmentData> cut_segments(const SegmentData& whole,
                                      int segment_frames) {
  const int T = whole.num_frames();
  const int n_seg = T / segment_frames;
  std::vector<SegmentData> segments;
  for (int s = 0; s < n_seg; ++s) {
    SegmentData seg;
    const int a = s * segment_frames;
    const int b = a + segment_frames;
    seg.frames.assign(whole.frames.begin() + a, whole.frames.begin() + b);
    seg.input_mag.assign(whole.input_mag.begin() + a,
                         whole.input_mag.begin() + b);
    seg.target_mag.assign(whole.target_mag.begin() + a,
                          whole.target_mag.begin() + b);
    if (!whole.target_mag_ch.empty())
      seg.target_mag_ch.assign(whole.target_mag_ch.begin() + a,
                               whole.target_mag_ch.begin() + b);
    segments.push_back(std::move(seg));
  }
  return segments;
}

Dataset build_dataset(const std::vector<ManifestEntry>& entries,
                      const StftConfig& stft_cfg, int segment_frames,
                      double val_fraction, bool per_channel_loss) {
  if (entries.empty()) throw std::runtime_error("empty manifest");
  Dataset data;
  std::vector<TrainSequence> all;
  for (const auto& e : entries) {
    Audio input = read_wav(e.input_wav);
    Audio target = read_wav(e.target_wav);
    SegmentData whole =
        make_segments_source(input, target, stft_cfg, per_channel_loss);
    TrainSequence seq;
    seq.segments = cut_segments(whole, segment_frames);
    if (seq.segments.size() < 2)
      throw std::runtime_error("sequence '" + e.id +
                               "' shorter than two segments");
    all.push_back(std::move(seq));
  }
  size_t n_val = static_cast<size_t>(all.size() * val_fraction);
  if (n_val == 0 && all.size() >= 5) n_val = 1;
  const size_t n_train = all.size() - n_val;
  for (size_t i = 0; i < all.size(); ++i)
    (i < n_train ? data.train : data.val).push_back(std::move(all[i]));
  return data;
}

std::vector<EvalItem> load_eval_items(
    const std::vector<ManifestEntry>& entries) {
  std::vector<EvalItem> items;
  for (const auto& e : entries) {
    EvalItem item;
    item.id = e.id;
    item.reverberant = read_wav(e.input_wav);
    item.target = read_wav(e.target_wav);
    item.t60 = e.t60;
    items.push_back(std::move(item));
  }
  return items;
}

void write_history(const std::vector<EpochRecord>& history,
                   const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write history: " + path);
  for (const auto& rec : history) {
    nlohmann::json j;
    j["epoch"] = rec.epoch;
    j["train_loss"] = rec.train_loss;
    j["val_loss"] = rec.val_loss;
    j["lr"] = rec.lr;
    f << j.dump() << "\n";
  }
}

std::vector<std::vector<double>> log_spectrogram(const Audio& audio,
                                                 const StftConfig& cfg) {
  MultiChannelSpectrum spec = analyze(audio, cfg);
  std::vector<std::vector<double>> m(spec.num_frames,
                                     std::vector<double>(spec.num_bins));
  for (int t = 0; t < spec.num_frames; ++t)
    for (int f = 0; f < spec.num_bins; ++f)
      m[t][f] = 10.0 * std::log10(std::norm(spec.at(t, f, 0)) + 1e-12);
  return m;
}

void write_matrix_csv(const std::vector<std::vector<double>>& m,
                      const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write matrix: " + path);
  for (const auto& row : m) {
    for (size_t i = 0; i < row.size(); ++i)
      f << (i ? "," : "") << row[i];
    f << "\n";
  }
}

}  // namespace derev
