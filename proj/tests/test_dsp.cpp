#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <complex>
#include <numeric>

#include "doctest.h"
#include "scae/dsp.hpp"
#include "scae/fft.hpp"

using namespace scae;
using dsp::DspConfig;

namespace {

std::vector<float> sine(double freq, std::size_t n = 64000, int sr = 16000, double amp = 0.5) {
  std::vector<float> s(n);
  for (std::size_t t = 0; t < n; ++t)
    s[t] = static_cast<float>(amp * std::sin(2.0 * M_PI * freq * static_cast<double>(t) / sr));
  return s;
}

std::vector<float> white_noise(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<float> s(n);
  for (auto& v : s) v = static_cast<float>(rng.uniform(-0.5, 0.5));
  return s;
}

// Naive O(n^2) DFT used as the FFT oracle.
std::vector<std::complex<double>> naive_dft(const std::vector<std::complex<double>>& x) {
  const std::size_t n = x.size();
  std::vector<std::complex<double>> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::complex<double> acc(0, 0);
    for (std::size_t t = 0; t < n; ++t)
      acc += x[t] * std::exp(std::complex<double>(0, -2.0 * M_PI * k * t / n));
    out[k] = acc;
  }
  return out;
}

}  // namespace

TEST_CASE("fft matches the naive DFT and inverts exactly") {
  Rng rng(4);
  std::vector<std::complex<double>> x(64);
  for (auto& v : x) v = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
  auto expect = naive_dft(x);
  auto got = x;
  scae::fft(got, false);
  for (std::size_t i = 0; i < x.size(); ++i) {
    CHECK(got[i].real() == doctest::Approx(expect[i].real()).epsilon(1e-9));
    CHECK(got[i].imag() == doctest::Approx(expect[i].imag()).epsilon(1e-9));
  }
  scae::fft(got, true);
  for (std::size_t i = 0; i < x.size(); ++i)
    CHECK(got[i].real() == doctest::Approx(x[i].real()).epsilon(1e-10));
}

TEST_CASE("blackman window endpoints and center") {
  auto w = dsp::blackman_window(5);
  REQUIRE(w.size() == 5);
  CHECK(w[0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(w[2] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(dsp::blackman_window(1), ConfigError);
}

TEST_CASE("blackman 690 sum matches independent high-precision summation") {
  // oracle: sum of 0.42 - 0.5 cos(2 pi k / 689) + 0.08 cos(4 pi k / 689)
  // accumulated in long double, written independently of the library code
  long double expect = 0.0L;
  for (int k = 0; k < 690; ++k) {
    const long double ph = 2.0L * 3.14159265358979323846264338327950288L * k / 689.0L;
    expect += 0.42L - 0.5L * std::cos(ph) + 0.08L * std::cos(2.0L * ph);
  }
  auto w = dsp::blackman_window(690);
  const double sum = std::accumulate(w.begin(), w.end(), 0.0);
  CHECK(sum == doctest::Approx(static_cast<double>(expect)).epsilon(1e-6));
}

TEST_CASE("hz_to_mel hand values and inverse") {
  CHECK(dsp::hz_to_mel(0.0) == 0.0);
  CHECK(dsp::hz_to_mel(700.0) == doctest::Approx(2595.0 * std::log10(2.0)).epsilon(1e-12));
  CHECK(dsp::hz_to_mel(700.0) == doctest::Approx(781.17).epsilon(1e-4));
  CHECK(dsp::hz_to_mel(8000.0) == doctest::Approx(2840.03).epsilon(1e-4));
  CHECK_THROWS_AS(dsp::hz_to_mel(-1.0), ConfigError);
  CHECK_THROWS_AS(dsp::mel_to_hz(-1.0), ConfigError);
  double prev = -1.0;
  for (double f = 0.0; f <= 8000.0; f += 37.0) {
    const double m = dsp::hz_to_mel(f);
    CHECK(m > prev);
    prev = m;
    const double back = dsp::mel_to_hz(m);
    CHECK(back == doctest::Approx(f).epsilon(1e-6));
  }
}

TEST_CASE("stft geometry, zero input, and linearity") {
  DspConfig cfg;
  auto zero = std::vector<float>(64000, 0.0f);
  auto spec = dsp::stft(zero, cfg);
  CHECK(spec.bins() == 513);
  CHECK(spec.frames() == (64000 - 690) / 250 + 1);  // 254
  for (auto v : spec.real.data) CHECK(v == 0.0f);
  for (auto v : spec.imag.data) CHECK(v == 0.0f);

  auto x = white_noise(4000, 9);
  auto ax = x;
  for (auto& v : ax) v *= 3.0f;
  auto s1 = dsp::stft(x, cfg);
  auto s3 = dsp::stft(ax, cfg);
  for (std::size_t i = 0; i < s1.real.size(); ++i) {
    CHECK(s3.real.data[i] == doctest::Approx(3.0 * s1.real.data[i]).epsilon(1e-5));
    CHECK(s3.imag.data[i] == doctest::Approx(3.0 * s1.imag.data[i]).epsilon(1e-5));
  }
  CHECK_THROWS_AS(dsp::stft(std::vector<float>(100, 0.0f), cfg), ShapeError);
}

TEST_CASE("stft pure sine peaks at the expected bin") {
  DspConfig cfg;
  auto spec = dsp::stft(sine(1000.0, 8000), cfg);
  auto mag = dsp::magnitude(spec);
  for (std::size_t t = 0; t < spec.frames(); ++t) {
    std::size_t best = 0;
    for (std::size_t b = 1; b < spec.bins(); ++b)
      if (mag(b, t) > mag(best, t)) best = b;
    CHECK(best == 64);  // round(1000 * 1024 / 16000)
  }
}

TEST_CASE("stft DC signal: bin-0 magnitude equals window sum") {
  DspConfig cfg;
  auto spec = dsp::stft(std::vector<float>(4000, 1.0f), cfg);
  auto mag = dsp::magnitude(spec);
  auto w = dsp::blackman_window(690);
  const double wsum = std::accumulate(w.begin(), w.end(), 0.0);
  for (std::size_t t = 0; t < spec.frames(); ++t)
    CHECK(mag(0, t) == doctest::Approx(wsum).epsilon(1e-4));
}

TEST_CASE("istft of zero spectrogram is zero; round-trip SNR > 40 dB") {
  DspConfig cfg;
  auto x = white_noise(16000, 21);
  auto spec = dsp::stft(x, cfg);
  for (auto& v : spec.real.data) v = 0.0f;
  for (auto& v : spec.imag.data) v = 0.0f;
  auto silent = dsp::istft(spec, cfg);
  for (auto v : silent) CHECK(v == 0.0f);

  auto y = dsp::istft(dsp::stft(x, cfg), cfg);
  REQUIRE(y.size() >= 8000);
  double sig = 0.0, err = 0.0;
  // interior only: edges lack full overlap coverage
  for (std::size_t t = 2000; t < 14000 && t < y.size(); ++t) {
    sig += static_cast<double>(x[t]) * x[t];
    const double d = static_cast<double>(x[t]) - y[t];
    err += d * d;
  }
  const double snr = 10.0 * std::log10(sig / err);
  CHECK(snr > 40.0);
}

TEST_CASE("single-frame istft has window_len support") {
  DspConfig cfg;
  auto x = white_noise(690, 5);
  auto spec = dsp::stft(x, cfg);
  REQUIRE(spec.frames() == 1);
  auto y = dsp::istft(spec, cfg);
  for (std::size_t t = 690; t < y.size(); ++t) CHECK(y[t] == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("mel filterbank shape, peaks, support, unimodality") {
  DspConfig cfg;
  auto fb = dsp::mel_filterbank(cfg);
  REQUIRE(fb.shape == std::vector<std::size_t>{128, 513});

  // centers sit on the mel-uniform grid of n_mels + 2 points
  const double mel_lo = dsp::hz_to_mel(cfg.fmin), mel_hi = dsp::hz_to_mel(cfg.fmax);
  auto centers = dsp::mel_bin_centers_hz(cfg);
  REQUIRE(centers.size() == 128);
  for (int m = 0; m < 128; ++m) {
    const double expect = dsp::mel_to_hz(mel_lo + (mel_hi - mel_lo) * (m + 1) / 129.0);
    CHECK(centers[m] == doctest::Approx(expect).epsilon(1e-9));
  }

  for (int m = 0; m < 128; ++m) {
    float peak = 0.0f;
    int rises = 0, falls = 0, state = 0;
    bool bad_shape = false;
    for (int b = 0; b < 513; ++b) {
      const float v = fb(m, b);
      CHECK(v >= 0.0f);
      peak = std::max(peak, v);
    }
    CHECK(peak == doctest::Approx(1.0).epsilon(1e-6));
    // unimodal: once the row starts decreasing it never increases again
    float prev = fb(m, 0);
    bool decreasing = false;
    for (int b = 1; b < 513; ++b) {
      const float v = fb(m, b);
      if (v > prev && decreasing) bad_shape = true;
      if (v < prev) decreasing = true;
      prev = v;
    }
    CHECK_FALSE(bad_shape);
    (void)rises;
    (void)falls;
    (void)state;
  }
}

TEST_CASE("mel filterbank rejects resolutions that starve a filter") {
  DspConfig cfg;
  cfg.n_mels = 400;  // more filters than FFT bins under 8 kHz can support
  CHECK_THROWS_AS(dsp::mel_filterbank(cfg), ConfigError);
}

TEST_CASE("log_mel_db: silence floors, frame count padded to 256") {
  DspConfig cfg;
  auto db = dsp::log_mel_db(std::vector<float>(64000, 0.0f), cfg);
  REQUIRE(db.shape == std::vector<std::size_t>{128, 256});
  for (auto v : db.data) CHECK(v == doctest::Approx(-100.0));
}

TEST_CASE("440 Hz sine: per-frame argmax mel bin near 440 Hz") {
  DspConfig cfg;
  auto db = dsp::log_mel_db(sine(440.0, 16000), cfg);
  auto centers = dsp::mel_bin_centers_hz(cfg);
  const std::size_t live_frames = (16000 - 690) / 250 + 1;
  for (std::size_t t = 0; t < live_frames; ++t) {
    std::size_t best = 0;
    for (std::size_t m = 1; m < 128; ++m)
      if (db(m, t) > db(best, t)) best = m;
    const double width = (best + 1 < centers.size() ? centers[best + 1] : cfg.fmax) -
                         (best > 0 ? centers[best - 1] : cfg.fmin);
    CHECK(std::abs(centers[best] - 440.0) < width);
  }
}

TEST_CASE("normalize stats, mapping, and degenerate error") {
  Tensor a({1, 2}, 0.0f);
  a.data = {-80.0f, -20.0f};
  auto stats = dsp::normalize_stats({&a});
  CHECK(stats.min_db == doctest::Approx(-80.0));
  CHECK(stats.max_db == doctest::Approx(-20.0));
  Tensor mid({1, 1}, -50.0f);
  auto v = dsp::normalize(mid, stats);
  CHECK(v.data[0] == doctest::Approx(0.5));

  Tensor flat({2, 2}, -30.0f);
  CHECK_THROWS_AS(dsp::normalize_stats({&flat}), DegenerateStatsError);
}

TEST_CASE("denormalize inverts normalize within 1e-4 dB") {
  DspConfig cfg;
  auto db = dsp::log_mel_db(sine(330.0, 16000), cfg);
  auto stats = dsp::normalize_stats({&db});
  auto spec = dsp::log_mel_spectrogram(sine(330.0, 16000), cfg, stats);
  for (auto v : spec.values.data) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
  auto back = dsp::denormalize(spec.values, stats);
  for (std::size_t i = 0; i < back.size(); ++i)
    CHECK(back.data[i] == doctest::Approx(spec.db.data[i]).epsilon(0).scale(1).epsilon(1e-4));
}

TEST_CASE("mel_to_linear zero input, projection round-trip, locality") {
  DspConfig cfg;
  auto fb = dsp::mel_filterbank(cfg);

  Tensor zero({128, 3}, 0.0f);
  auto lin0 = dsp::mel_to_linear(zero, fb);
  for (auto v : lin0.data) CHECK(v == 0.0f);

  // smooth linear spectrum m -> project -> invert -> project agrees
  Tensor lin({513, 1}, 0.0f);
  for (int b = 0; b < 513; ++b)
    lin(b, 0) = static_cast<float>(std::exp(-std::pow((b - 100.0) / 60.0, 2)));
  // mel = fb * lin (explicit oracle loop)
  Tensor mel({128, 1}, 0.0f);
  for (int m = 0; m < 128; ++m) {
    double acc = 0.0;
    for (int b = 0; b < 513; ++b) acc += static_cast<double>(fb(m, b)) * lin(b, 0);
    mel(m, 0) = static_cast<float>(acc);
  }
  auto lin_back = dsp::mel_to_linear(mel, fb);
  Tensor mel2({128, 1}, 0.0f);
  for (int m = 0; m < 128; ++m) {
    double acc = 0.0;
    for (int b = 0; b < 513; ++b) acc += static_cast<double>(fb(m, b)) * lin_back(b, 0);
    mel2(m, 0) = static_cast<float>(acc);
  }
  double num = 0.0, den = 0.0;
  for (int m = 0; m < 128; ++m) {
    num += std::pow(mel2(m, 0) - mel(m, 0), 2);
    den += std::pow(mel(m, 0), 2);
  }
  CHECK(std::sqrt(num / den) < 0.1);

  // single active mel bin: energy concentrated near that filter's support
  Tensor one({128, 1}, 0.0f);
  one(64, 0) = 1.0f;
  auto spread = dsp::mel_to_linear(one, fb);
  double inside = 0.0, total = 0.0;
  for (int b = 0; b < 513; ++b) {
    const double v = std::abs(spread(b, 0));
    total += v;
    // support of filters 58..70 comfortably brackets filter 64
    bool near = false;
    for (int m = 58; m <= 70; ++m)
      if (fb(m, b) > 0.0f) near = true;
    if (near) inside += v;
  }
  CHECK(inside / total > 0.95);
}

TEST_CASE("griffin-lim: zero magnitude gives silence, residual improves") {
  DspConfig cfg;
  Rng rng(8);
  Tensor zero({513, 8}, 0.0f);
  auto silent = dsp::griffin_lim(zero, cfg, 3, rng);
  for (auto v : silent.signal) CHECK(v == 0.0f);

  auto target = dsp::magnitude(dsp::stft(sine(440.0, 8000), cfg));
  Rng rng2(9);
  auto out = dsp::griffin_lim(target, cfg, 20, rng2);
  REQUIRE(out.residuals.size() == 20);
  CHECK(out.residuals.back() < out.residuals.front());

  // reconstruction's dominant STFT bin within +-1 of the sine's bin
  auto spec = dsp::stft(out.signal, cfg);
  auto mag = dsp::magnitude(spec);
  const int expect_bin = static_cast<int>(std::lround(440.0 * 1024.0 / 16000.0));
  for (std::size_t t = 1; t + 1 < spec.frames(); ++t) {
    int best = 0;
    for (int b = 1; b < 513; ++b)
      if (mag(b, t) > mag(best, t)) best = b;
    CHECK(std::abs(best - expect_bin) <= 1);
  }
}

TEST_CASE("dsp config validation") {
  DspConfig bad;
  bad.window_len = 2000;  // > fft_size
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  DspConfig bad2;
  bad2.fmax = 9000.0;  // > nyquist
  CHECK_THROWS_AS(bad2.validate(), ConfigError);
  DspConfig bad3;
  bad3.hop = 0;
  CHECK_THROWS_AS(bad3.validate(), ConfigError);
}
