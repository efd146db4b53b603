#include "derev/stft.hpp"

#include <fftw3.h>

#include <cmath>
#include <cstring>
#include <mutex>
#include <numbers>
#include <stdexcept>

namespace derev {

namespace {

// FFTW planner is not thread-safe.
std::mutex g_fftw_mutex;

void check_cfg(const StftConfig& cfg) {
  if (!cfg.valid()) throw std::invalid_argument("invalid StftConfig");
}

// Per-sample overlap-add normalization, periodic in hop.
std::vector<double> ola_norm(const std::vector<double>& w, int hop) {
  std::vector<double> c(hop, 0.0);
  for (size_t n = 0; n < w.size(); ++n) c[n % hop] += w[n] * w[n];
  return c;
}

}  // namespace

std::vector<double> make_window(const StftConfig& cfg) {
  check_cfg(cfg);
  const int N = cfg.window_len;
  std::vector<double> w(N);
  for (int n = 0; n < N; ++n) {
    // periodic (DFT-even) Hann, then square root
    double hann = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / N);
    w[n] = std::sqrt(std::max(0.0, hann));
  }
  return w;
}

// ---------------------------------------------------------------------------

struct StftAnalyzer::Impl {
  StftConfig cfg;
  int D;
  std::vector<double> window;
  std::vector<std::vector<double>> buf;  // per channel, window_len once primed
  long buffered = 0;

  double* in;
  fftw_complex* out;
  fftw_plan plan;

  Impl(const StftConfig& c, int channels) : cfg(c), D(channels) {
    check_cfg(cfg);
    if (D <= 0) throw std::invalid_argument("num_channels must be positive");
    window = make_window(cfg);
    buf.assign(D, {});
    std::lock_guard<std::mutex> lock(g_fftw_mutex);
    in = fftw_alloc_real(cfg.fft_len);
    out = fftw_alloc_complex(cfg.num_bins());
    plan = fftw_plan_dft_r2c_1d(cfg.fft_len, in, out, FFTW_ESTIMATE);
  }
  ~Impl() {
    std::lock_guard<std::mutex> lock(g_fftw_mutex);
    fftw_destroy_plan(plan);
    fftw_free(in);
    fftw_free(out);
  }
};

StftAnalyzer::StftAnalyzer(const StftConfig& cfg, int num_channels)
    : impl_(std::make_unique<Impl>(cfg, num_channels)) {}
StftAnalyzer::~StftAnalyzer() = default;
StftAnalyzer::StftAnalyzer(StftAnalyzer&&) noexcept = default;
StftAnalyzer& StftAnalyzer::operator=(StftAnalyzer&&) noexcept = default;

const StftConfig& StftAnalyzer::config() const { return impl_->cfg; }
int StftAnalyzer::num_channels() const { return impl_->D; }

bool StftAnalyzer::push(const std::vector<std::vector<double>>& samples,
                        std::vector<cd>& frame) {
  Impl& im = *impl_;
  const int hop = im.cfg.hop;
  if (static_cast<int>(samples.size()) != im.D)
    throw std::invalid_argument("push: channel count mismatch");
  for (int d = 0; d < im.D; ++d) {
    if (static_cast<int>(samples[d].size()) != hop)
      throw std::invalid_argument("push: expected hop samples per channel");
    im.buf[d].insert(im.buf[d].end(), samples[d].begin(), samples[d].end());
  }
  im.buffered += hop;
  if (im.buffered < im.cfg.window_len) return false;

  const int N = im.cfg.window_len;
  const int F = im.cfg.num_bins();
  frame.assign(static_cast<size_t>(F) * im.D, cd{});
  for (int d = 0; d < im.D; ++d) {
    std::memset(im.in, 0, sizeof(double) * im.cfg.fft_len);
    for (int n = 0; n < N; ++n) im.in[n] = im.buf[d][n] * im.window[n];
    fftw_execute(im.plan);
    for (int f = 0; f < F; ++f)
      frame[static_cast<size_t>(f) * im.D + d] = cd(im.out[f][0], im.out[f][1]);
    im.buf[d].erase(im.buf[d].begin(), im.buf[d].begin() + hop);
  }
  im.buffered -= hop;
  return true;
}

// ---------------------------------------------------------------------------

struct StftSynthesizer::Impl {
  StftConfig cfg;
  int D;
  std::vector<double> window;
  std::vector<double> norm;                   // per sample-phase, length hop
  std::vector<std::vector<double>> overlap;   // per channel, window_len

  fftw_complex* in;
  double* out;
  fftw_plan plan;

  Impl(const StftConfig& c, int channels) : cfg(c), D(channels) {
    check_cfg(cfg);
    if (D <= 0) throw std::invalid_argument("num_channels must be positive");
    window = make_window(cfg);
    norm = ola_norm(window, cfg.hop);
    for (double v : norm)
      if (v <= 0.0) throw std::invalid_argument("window fails COLA");
    overlap.assign(D, std::vector<double>(cfg.window_len, 0.0));
    std::lock_guard<std::mutex> lock(g_fftw_mutex);
    in = fftw_alloc_complex(cfg.num_bins());
    out = fftw_alloc_real(cfg.fft_len);
    plan = fftw_plan_dft_c2r_1d(cfg.fft_len, in, out, FFTW_ESTIMATE);
  }
  ~Impl() {
    std::lock_guard<std::mutex> lock(g_fftw_mutex);
    fftw_destroy_plan(plan);
    fftw_free(in);
    fftw_free(out);
  }
};

StftSynthesizer::StftSynthesizer(const StftConfig& cfg, int num_channels)
    : impl_(std::make_unique<Impl>(cfg, num_channels)) {}
StftSynthesizer::~StftSynthesizer() = default;
StftSynthesizer::StftSynthesizer(StftSynthesizer&&) noexcept = default;
StftSynthesizer& StftSynthesizer::operator=(StftSynthesizer&&) noexcept =
    default;

void StftSynthesizer::push(const std::vector<cd>& frame,
                           std::vector<std::vector<double>>& outsamp) {
  Impl& im = *impl_;
  const int F = im.cfg.num_bins();
  const int N = im.cfg.window_len;
  const int hop = im.cfg.hop;
  if (static_cast<int>(frame.size()) != F * im.D)
    throw std::invalid_argument("synthesize: frame shape mismatch with cfg");

  outsamp.assign(im.D, std::vector<double>(hop));
  const double scale = 1.0 / im.cfg.fft_len;  // FFTW c2r is unnormalized
  for (int d = 0; d < im.D; ++d) {
    for (int f = 0; f < F; ++f) {
      const cd& v = frame[static_cast<size_t>(f) * im.D + d];
      im.in[f][0] = v.real();
      im.in[f][1] = v.imag();
    }
    fftw_execute(im.plan);
    auto& ov = im.overlap[d];
    for (int n = 0; n < N; ++n) ov[n] += im.out[n] * scale * im.window[n];
    for (int n = 0; n < hop; ++n) outsamp[d][n] = ov[n] / im.norm[n % hop];
    std::memmove(ov.data(), ov.data() + hop, sizeof(double) * (N - hop));
    std::fill(ov.end() - hop, ov.end(), 0.0);
  }
}

void StftSynthesizer::flush(std::vector<std::vector<double>>& outsamp) {
  Impl& im = *impl_;
  const int N = im.cfg.window_len;
  const int hop = im.cfg.hop;
  outsamp.assign(im.D, std::vector<double>(N - hop));
  for (int d = 0; d < im.D; ++d) {
    for (int n = 0; n < N - hop; ++n)
      outsamp[d][n] = im.overlap[d][n] / im.norm[n % hop];
    std::fill(im.overlap[d].begin(), im.overlap[d].end(), 0.0);
  }
}

// ---------------------------------------------------------------------------

MultiChannelSpectrum analyze(const Audio& audio, const StftConfig& cfg) {
  check_cfg(cfg);
  const int D = audio.num_channels();
  const long N = audio.num_samples();
  if (D == 0 || N == 0) throw std::invalid_argument("empty input");
  if (N < cfg.window_len)
    throw std::invalid_argument("input shorter than one window");

  const long T = 1 + (N - cfg.window_len) / cfg.hop;
  MultiChannelSpectrum spec(static_cast<int>(T), cfg.num_bins(), D);

  StftAnalyzer an(cfg, D);
  std::vector<std::vector<double>> chunk(D, std::vector<double>(cfg.hop));
  std::vector<cd> frame;
  long t = 0;
  for (long pos = 0; t < T; pos += cfg.hop) {
    for (int d = 0; d < D; ++d)
      for (int n = 0; n < cfg.hop; ++n)
        chunk[d][n] = (pos + n < N) ? audio.channels[d][pos + n] : 0.0;
    if (an.push(chunk, frame)) {
      std::copy(frame.begin(), frame.end(),
                spec.data.begin() +
                    static_cast<size_t>(t) * spec.num_bins * spec.num_channels);
      ++t;
    }
  }
  return spec;
}

Audio synthesize(const MultiChannelSpectrum& spec, const StftConfig& cfg) {
  check_cfg(cfg);
  if (spec.num_bins != cfg.num_bins())
    throw std::invalid_argument("spectrum shape mismatch with cfg");
  if (spec.num_frames == 0) throw std::invalid_argument("empty spectrum");

  const int D = spec.num_channels;
  Audio audio;
  audio.sample_rate = cfg.sample_rate;
  audio.channels.assign(D, {});

  StftSynthesizer syn(cfg, D);
  std::vector<cd> frame(static_cast<size_t>(spec.num_bins) * D);
  std::vector<std::vector<double>> chunk;
  for (int t = 0; t < spec.num_frames; ++t) {
    auto begin = spec.data.begin() +
                 static_cast<size_t>(t) * spec.num_bins * D;
    std::copy(begin, begin + spec.num_bins * D, frame.begin());
    syn.push(frame, chunk);
    for (int d = 0; d < D; ++d)
      audio.channels[d].insert(audio.channels[d].end(), chunk[d].begin(),
                               chunk[d].end());
  }
  syn.flush(chunk);
  for (int d = 0; d < D; ++d)
    audio.channels[d].insert(audio.channels[d].end(), chunk[d].begin(),
                             chunk[d].end());
  return audio;
}

}  // namespace derev
