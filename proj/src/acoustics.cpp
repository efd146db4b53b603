#include "derev/acoustics.hpp"

#include <fftw3.h>

#include <cmath>
#include <mutex>
#include <numbers>
#include <random>
#include <stdexcept>

namespace derev {

namespace {

constexpr double kSoundSpeed = 343.0;  // m/s

std::mutex g_conv_mutex;  // FFTW planner guard

double dist(const std::array<double, 3>& a, const std::array<double, 3>& b) {
  double s = 0.0;
  for (int i = 0; i < 3; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

double uniform01(std::mt19937_64& rng) { return (rng() >> 11) * 0x1.0p-53; }

}  // namespace

bool SceneSpec::valid() const {
  for (int i = 0; i < 3; ++i)
    if (room[i] <= 0.0) return false;
  auto inside = [&](const std::array<double, 3>& p) {
    for (int i = 0; i < 3; ++i)
      if (p[i] <= 0.0 || p[i] >= room[i]) return false;
    return true;
  };
  if (!inside(source)) return false;
  for (const auto& m : mics)
    if (!inside(m)) return false;
  return t60 >= 0.4 && t60 <= 1.0 && sample_rate > 0;
}

Rir image_source_rir(const std::array<double, 3>& room,
                     const std::array<double, 3>& source,
                     const std::vector<std::array<double, 3>>& mics,
                     double beta, int length, int sample_rate) {
  Rir rir;
  rir.sample_rate = sample_rate;
  rir.taps.assign(mics.size(), std::vector<double>(length, 0.0));
  rir.direct_index.resize(mics.size());
  rir.direct_amplitude.resize(mics.size());

  const double max_dist = kSoundSpeed * length / sample_rate;
  std::array<int, 3> order;
  for (int i = 0; i < 3; ++i)
    order[i] = static_cast<int>(std::ceil(max_dist / (2.0 * room[i]))) + 1;

  for (size_t m = 0; m < mics.size(); ++m) {
    const auto& mic = mics[m];
    double d0 = dist(source, mic);
    rir.direct_index[m] =
        static_cast<int>(std::lround(d0 / kSoundSpeed * sample_rate));
    rir.direct_amplitude[m] = 1.0 / (4.0 * std::numbers::pi * d0);

    for (int nx = -order[0]; nx <= order[0]; ++nx)
      for (int qx = 0; qx <= 1; ++qx)
        for (int ny = -order[1]; ny <= order[1]; ++ny)
          for (int qy = 0; qy <= 1; ++qy)
            for (int nz = -order[2]; nz <= order[2]; ++nz)
              for (int qz = 0; qz <= 1; ++qz) {
                double ix = (1 - 2 * qx) * source[0] + 2 * nx * room[0];
                double iy = (1 - 2 * qy) * source[1] + 2 * ny * room[1];
                double iz = (1 - 2 * qz) * source[2] + 2 * nz * room[2];
                double dx = ix - mic[0], dy = iy - mic[1], dz = iz - mic[2];
                double d = std::sqrt(dx * dx + dy * dy + dz * dz);
                int idx =
                    static_cast<int>(std::lround(d / kSoundSpeed * sample_rate));
                if (idx >= length) continue;
                int refl = std::abs(nx - qx) + std::abs(nx) +
                           std::abs(ny - qy) + std::abs(ny) +
                           std::abs(nz - qz) + std::abs(nz);
                if (beta == 0.0 && refl > 0) continue;
                double amp = std::pow(beta, refl) /
                             (4.0 * std::numbers::pi * std::max(d, 1e-2));
                rir.taps[m][idx] += amp;
              }
  }
  return rir;
}

Rir generate_rir(const SceneSpec& spec) {
  if (!spec.valid()) throw std::invalid_argument("invalid SceneSpec");
  const double volume = spec.room[0] * spec.room[1] * spec.room[2];
  const double surface = 2.0 * (spec.room[0] * spec.room[1] +
                                spec.room[0] * spec.room[2] +
                                spec.room[1] * spec.room[2]);
  // Sabine: T60 = 0.161 V / (a S)
  const double absorption = 0.161 * volume / (spec.t60 * surface);
  if (absorption >= 1.0)
    throw std::invalid_argument("requested T60 infeasible for this geometry");
  const double beta = std::sqrt(1.0 - absorption);

  double max_d0 = 0.0;
  std::vector<std::array<double, 3>> mics(spec.mics.begin(), spec.mics.end());
  for (const auto& m : mics) max_d0 = std::max(max_d0, dist(spec.source, m));
  const int length =
      static_cast<int>(std::ceil(spec.t60 * spec.sample_rate)) +
      static_cast<int>(std::ceil(max_d0 / kSoundSpeed * spec.sample_rate)) + 1;

  return image_source_rir(spec.room, spec.source, mics, beta, length,
                          spec.sample_rate);
}

Rir split_target_rir(const Rir& rir, Scenario scenario) {
  Rir out;
  out.sample_rate = rir.sample_rate;
  out.direct_index = rir.direct_index;
  out.direct_amplitude = rir.direct_amplitude;
  out.taps.assign(rir.taps.size(), {});
  const int early = static_cast<int>(std::lround(0.040 * rir.sample_rate));
  for (size_t m = 0; m < rir.taps.size(); ++m) {
    out.taps[m].assign(rir.taps[m].size(), 0.0);
    const int arrival = rir.direct_index[m];
    if (scenario == Scenario::HA) {
      const int end = std::min<int>(arrival + early,
                                    static_cast<int>(rir.taps[m].size()));
      for (int n = arrival; n < end; ++n) out.taps[m][n] = rir.taps[m][n];
    } else {
      if (arrival < static_cast<int>(out.taps[m].size()))
        out.taps[m][arrival] = rir.direct_amplitude[m];
    }
  }
  return out;
}

double measure_t60(const std::vector<double>& taps, int sample_rate) {
  // Schroeder backward integration, linear fit on the -5..-35 dB span
  const size_t N = taps.size();
  std::vector<double> edc(N);
  double acc = 0.0;
  for (size_t n = N; n-- > 0;) {
    acc += taps[n] * taps[n];
    edc[n] = acc;
  }
  if (acc <= 0.0) throw std::invalid_argument("measure_t60: silent RIR");
  std::vector<double> db(N);
  for (size_t n = 0; n < N; ++n)
    db[n] = 10.0 * std::log10(std::max(edc[n] / acc, 1e-30));

  long i5 = -1, i35 = -1;
  for (size_t n = 0; n < N; ++n) {
    if (i5 < 0 && db[n] <= -5.0) i5 = static_cast<long>(n);
    if (i35 < 0 && db[n] <= -35.0) {
      i35 = static_cast<long>(n);
      break;
    }
  }
  if (i5 < 0 || i35 < 0 || i35 <= i5)
    throw std::invalid_argument("measure_t60: decay range not reached");

  // least-squares slope of db vs sample index over [i5, i35]
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  long cnt = i35 - i5 + 1;
  for (long n = i5; n <= i35; ++n) {
    sx += n;
    sy += db[n];
    sxx += double(n) * n;
    sxy += double(n) * db[n];
  }
  double slope = (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);  // dB/sample
  return -60.0 / (slope * sample_rate);
}

std::vector<double> build_sequence(
    const std::vector<std::vector<double>>& utterances, uint64_t seed,
    double min_seconds, int sample_rate) {
  if (utterances.empty())
    throw std::invalid_argument("build_sequence: empty utterance list");
  std::mt19937_64 rng(seed);
  std::vector<size_t> order(utterances.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  // Fisher-Yates with the explicit uniform mapping, reproducible
  for (size_t i = order.size(); i > 1; --i) {
    size_t j = static_cast<size_t>(uniform01(rng) * i);
    std::swap(order[i - 1], order[j]);
  }

  const long min_samples = static_cast<long>(min_seconds * sample_rate);
  std::vector<double> seq;
  size_t pos = 0;
  while (static_cast<long>(seq.size()) < min_samples) {
    const auto& utt = utterances[order[pos % order.size()]];
    seq.insert(seq.end(), utt.begin(), utt.end());
    ++pos;
    if (static_cast<long>(seq.size()) >= min_samples) break;
    int gap = static_cast<int>(
        (0.1 + 0.2 * uniform01(rng)) * sample_rate);  // 100-300 ms
    seq.insert(seq.end(), gap, 0.0);
  }
  return seq;
}

std::vector<double> synth_utterance(uint64_t seed, double seconds,
                                    int sample_rate) {
  std::mt19937_64 rng(seed);
  const long N = static_cast<long>(seconds * sample_rate);
  std::vector<double> x(N);
  for (long n = 0; n < N; ++n) x[n] = 2.0 * uniform01(rng) - 1.0;

  // four random two-pole resonators -> AR(8)
  for (int r = 0; r < 4; ++r) {
    double freq = 300.0 + uniform01(rng) * 3200.0;
    double radius = 0.95 + uniform01(rng) * 0.03;
    double a1 = 2.0 * radius *
                std::cos(2.0 * std::numbers::pi * freq / sample_rate);
    double a2 = -radius * radius;
    double y1 = 0.0, y2 = 0.0;
    for (long n = 0; n < N; ++n) {
      double y = x[n] + a1 * y1 + a2 * y2;
      y2 = y1;
      y1 = y;
      x[n] = y;
    }
  }

  // 4 Hz syllabic envelope
  double phase = uniform01(rng) * 2.0 * std::numbers::pi;
  for (long n = 0; n < N; ++n) {
    double env = 0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * 4.0 * n /
                                          sample_rate +
                                      phase);
    x[n] *= 0.1 + 0.9 * env * env;
  }

  // normalize RMS to 0.05
  double rms = 0.0;
  for (double v : x) rms += v * v;
  rms = std::sqrt(rms / N);
  if (rms > 0.0)
    for (double& v : x) v *= 0.05 / rms;
  return x;
}

namespace {

// FFT convolution (full), single channel.
std::vector<double> convolve(const std::vector<double>& a,
                             const std::vector<double>& b) {
  const size_t out_len = a.size() + b.size() - 1;
  size_t n = 1;
  while (n < out_len) n <<= 1;

  std::lock_guard<std::mutex> lock(g_conv_mutex);
  double* ta = fftw_alloc_real(n);
  fftw_complex* fa = fftw_alloc_complex(n / 2 + 1);
  fftw_complex* fb = fftw_alloc_complex(n / 2 + 1);
  fftw_plan pf = fftw_plan_dft_r2c_1d(static_cast<int>(n), ta, fa,
                                      FFTW_ESTIMATE);
  fftw_plan pb = fftw_plan_dft_c2r_1d(static_cast<int>(n), fa, ta,
                                      FFTW_ESTIMATE);

  std::fill(ta, ta + n, 0.0);
  std::copy(a.begin(), a.end(), ta);
  fftw_execute(pf);
  std::copy(&fa[0][0], &fa[0][0] + 2 * (n / 2 + 1), &fb[0][0]);
  std::fill(ta, ta + n, 0.0);
  std::copy(b.begin(), b.end(), ta);
  fftw_execute(pf);
  for (size_t k = 0; k < n / 2 + 1; ++k) {
    double re = fa[k][0] * fb[k][0] - fa[k][1] * fb[k][1];
    double im = fa[k][0] * fb[k][1] + fa[k][1] * fb[k][0];
    fa[k][0] = re / n;
    fa[k][1] = im / n;
  }
  fftw_execute(pb);
  std::vector<double> out(ta, ta + out_len);

  fftw_destroy_plan(pf);
  fftw_destroy_plan(pb);
  fftw_free(ta);
  fftw_free(fa);
  fftw_free(fb);
  return out;
}

}  // namespace

RenderedPair render(const std::vector<double>& sequence, const Rir& rir,
                    const Rir& target_rir, Scenario scenario) {
  if (rir.taps.size() != target_rir.taps.size())
    throw std::invalid_argument("render: channel mismatch");
  RenderedPair pair;
  pair.scenario = scenario;
  pair.reverberant.sample_rate = rir.sample_rate;
  pair.target.sample_rate = rir.sample_rate;

  size_t max_len = 0;
  for (size_t m = 0; m < rir.taps.size(); ++m) {
    auto rev = convolve(sequence, rir.taps[m]);
    auto tgt = convolve(sequence, target_rir.taps[m]);
    tgt.resize(rev.size(), 0.0);
    max_len = std::max(max_len, rev.size());
    pair.reverberant.channels.push_back(std::move(rev));
    pair.target.channels.push_back(std::move(tgt));
  }
  for (auto& ch : pair.reverberant.channels) ch.resize(max_len, 0.0);
  for (auto& ch : pair.target.channels) ch.resize(max_len, 0.0);
  return pair;
}

SceneSpec random_scene(uint64_t seed, double t60) {
  std::mt19937_64 rng(seed);
  SceneSpec spec;
  spec.seed = seed;
  spec.t60 = t60;
  spec.room = {5.0 + 3.0 * uniform01(rng), 4.0 + 3.0 * uniform01(rng),
               2.5 + 1.0 * uniform01(rng)};
  auto place = [&](double lo_frac, double hi_frac, double dim) {
    return dim * (lo_frac + (hi_frac - lo_frac) * uniform01(rng));
  };
  spec.source = {place(0.15, 0.45, spec.room[0]), place(0.2, 0.8, spec.room[1]),
                 1.2 + 0.4 * uniform01(rng)};
  double mx = place(0.55, 0.85, spec.room[0]);
  double my = place(0.2, 0.8, spec.room[1]);
  double mz = 1.2 + 0.4 * uniform01(rng);
  spec.mics = {{{mx, my, mz}, {mx + 0.16, my, mz}}};
  return spec;
}

}  // namespace derev
