#include "scae/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

#include "scae/fft.hpp"

namespace scae::dsp {

void DspConfig::validate() const {
  if (window_len > fft_size) throw ConfigError("window_len must be <= fft_size");
  if (hop < 1) throw ConfigError("hop must be >= 1");
  if (!(fmin < fmax) || fmax > sample_rate / 2.0)
    throw ConfigError("need fmin < fmax <= sample_rate/2");
  if (n_mels < 2) throw ConfigError("n_mels must be >= 2");
  if ((fft_size & (fft_size - 1)) != 0) throw ConfigError("fft_size must be a power of two");
}

std::vector<double> blackman_window(int n) {
  if (n < 2) throw ConfigError("blackman window needs n >= 2");
  std::vector<double> w(n);
  for (int k = 0; k < n; ++k) {
    const double t = 2.0 * M_PI * k / (n - 1);
    w[k] = 0.42 - 0.5 * std::cos(t) + 0.08 * std::cos(2.0 * t);
  }
  return w;
}

double hz_to_mel(double f) {
  if (f < 0) throw ConfigError("hz_to_mel: negative frequency");
  return 2595.0 * std::log10(1.0 + f / 700.0);
}

double mel_to_hz(double m) {
  if (m < 0) throw ConfigError("mel_to_hz: negative mel");
  return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0);
}

ComplexSpectrogram stft(const std::vector<float>& signal, const DspConfig& cfg) {
  cfg.validate();
  const int wlen = cfg.window_len;
  if (static_cast<int>(signal.size()) < wlen)
    throw ShapeError("signal shorter than one analysis window");
  const int n_frames = (static_cast<int>(signal.size()) - wlen) / cfg.hop + 1;
  const int bins = cfg.bins();
  const auto window = blackman_window(wlen);

  ComplexSpectrogram out;
  out.real = Tensor({static_cast<std::size_t>(bins), static_cast<std::size_t>(n_frames)}, 0.0f);
  out.imag = Tensor({static_cast<std::size_t>(bins), static_cast<std::size_t>(n_frames)}, 0.0f);

  std::vector<std::complex<double>> frame(cfg.fft_size);
  for (int t = 0; t < n_frames; ++t) {
    const int off = t * cfg.hop;
    std::fill(frame.begin(), frame.end(), std::complex<double>(0.0, 0.0));
    for (int k = 0; k < wlen; ++k) frame[k] = signal[off + k] * window[k];
    fft(frame, false);
    for (int b = 0; b < bins; ++b) {
      out.real(b, t) = static_cast<float>(frame[b].real());
      out.imag(b, t) = static_cast<float>(frame[b].imag());
    }
  }
  return out;
}

std::vector<float> istft(const ComplexSpectrogram& spec, const DspConfig& cfg) {
  cfg.validate();
  const int bins = cfg.bins();
  if (static_cast<int>(spec.bins()) != bins)
    throw ShapeError("istft: spectrogram bin count does not match cfg geometry");
  const int n_frames = static_cast<int>(spec.frames());
  const int wlen = cfg.window_len;
  const int out_len = (n_frames - 1) * cfg.hop + wlen;
  const auto window = blackman_window(wlen);

  std::vector<double> acc(out_len, 0.0), wsum(out_len, 0.0);
  std::vector<std::complex<double>> frame(cfg.fft_size);
  for (int t = 0; t < n_frames; ++t) {
    for (int b = 0; b < bins; ++b) frame[b] = {spec.real(b, t), spec.imag(b, t)};
    for (int b = bins; b < cfg.fft_size; ++b) frame[b] = std::conj(frame[cfg.fft_size - b]);
    fft(frame, true);
    const int off = t * cfg.hop;
    for (int k = 0; k < wlen; ++k) {
      acc[off + k] += window[k] * frame[k].real();
      wsum[off + k] += window[k] * window[k];
    }
  }

  std::vector<float> out(out_len);
  for (int i = 0; i < out_len; ++i)
    out[i] = static_cast<float>(wsum[i] > 1e-12 ? acc[i] / wsum[i] : 0.0);
  return out;
}

Tensor magnitude(const ComplexSpectrogram& spec) {
  Tensor mag;
  mag.shape = spec.real.shape;
  mag.data.resize(spec.real.size());
  for (std::size_t i = 0; i < mag.data.size(); ++i) {
    const double re = spec.real.data[i], im = spec.imag.data[i];
    mag.data[i] = static_cast<float>(std::sqrt(re * re + im * im));
  }
  return mag;
}

Tensor mel_filterbank(const DspConfig& cfg) {
  cfg.validate();
  const int bins = cfg.bins();
  const double mel_lo = hz_to_mel(cfg.fmin), mel_hi = hz_to_mel(cfg.fmax);
  std::vector<double> edges(cfg.n_mels + 2);
  for (int i = 0; i < cfg.n_mels + 2; ++i)
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (cfg.n_mels + 1));

  Tensor fb({static_cast<std::size_t>(cfg.n_mels), static_cast<std::size_t>(bins)}, 0.0f);
  for (int m = 0; m < cfg.n_mels; ++m) {
    const double left = edges[m], center = edges[m + 1], right = edges[m + 2];
    double peak = 0.0;
    for (int b = 0; b < bins; ++b) {
      const double f = static_cast<double>(b) * cfg.sample_rate / cfg.fft_size;
      double w = 0.0;
      if (f > left && f < right)
        w = f <= center ? (f - left) / (center - left) : (right - f) / (right - center);
      fb(m, b) = static_cast<float>(w);
      peak = std::max(peak, w);
    }
    if (peak <= 0.0)
      throw ConfigError("mel filter " + std::to_string(m) +
                        " has no support at this FFT resolution; reduce n_mels");
    for (int b = 0; b < bins; ++b) fb(m, b) = static_cast<float>(fb(m, b) / peak);
  }
  return fb;
}

std::vector<double> mel_bin_centers_hz(const DspConfig& cfg) {
  const double mel_lo = hz_to_mel(cfg.fmin), mel_hi = hz_to_mel(cfg.fmax);
  std::vector<double> centers(cfg.n_mels);
  for (int m = 0; m < cfg.n_mels; ++m)
    centers[m] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * (m + 1) / (cfg.n_mels + 1));
  return centers;
}

Tensor log_mel_db(const std::vector<float>& signal, const DspConfig& cfg) {
  const auto spec = stft(signal, cfg);
  const auto mag = magnitude(spec);
  const auto fb = mel_filterbank(cfg);
  const int n_frames = static_cast<int>(spec.frames());
  const int bins = cfg.bins();
  const double floor_amp = std::pow(10.0, cfg.db_floor / 20.0);

  Tensor db({static_cast<std::size_t>(cfg.n_mels), static_cast<std::size_t>(cfg.target_frames)},
            static_cast<float>(cfg.db_floor));
  const int frames = std::min(n_frames, cfg.target_frames);
  for (int m = 0; m < cfg.n_mels; ++m) {
    for (int t = 0; t < frames; ++t) {
      double acc = 0.0;
      for (int b = 0; b < bins; ++b) acc += static_cast<double>(fb(m, b)) * mag(b, t);
      db(m, t) = static_cast<float>(20.0 * std::log10(std::max(acc, floor_amp)));
    }
  }
  return db;
}

LogMelSpec log_mel_spectrogram(const std::vector<float>& signal, const DspConfig& cfg,
                               const NormStats& stats) {
  LogMelSpec out;
  out.db = log_mel_db(signal, cfg);
  out.values = normalize(out.db, stats);
  out.norm_min = stats.min_db;
  out.norm_max = stats.max_db;
  return out;
}

NormStats normalize_stats(const std::vector<const Tensor*>& db_specs) {
  if (db_specs.empty()) throw ConfigError("normalize_stats: empty spectrogram list");
  NormStats s{1e300, -1e300};
  for (const Tensor* t : db_specs) {
    for (float v : t->data) {
      s.min_db = std::min(s.min_db, static_cast<double>(v));
      s.max_db = std::max(s.max_db, static_cast<double>(v));
    }
  }
  if (!(s.max_db > s.min_db))
    throw DegenerateStatsError("normalization stats are degenerate (zero dB range)");
  return s;
}

Tensor normalize(const Tensor& db, const NormStats& stats) {
  if (!(stats.max_db > stats.min_db))
    throw DegenerateStatsError("normalization stats are degenerate (zero dB range)");
  Tensor v;
  v.shape = db.shape;
  v.data.resize(db.size());
  const double range = stats.max_db - stats.min_db;
  for (std::size_t i = 0; i < db.size(); ++i) {
    const double x = (db.data[i] - stats.min_db) / range;
    v.data[i] = static_cast<float>(std::clamp(x, 0.0, 1.0));
  }
  return v;
}

Tensor denormalize(const Tensor& values, const NormStats& stats) {
  Tensor db;
  db.shape = values.shape;
  db.data.resize(values.size());
  const double range = stats.max_db - stats.min_db;
  for (std::size_t i = 0; i < values.size(); ++i)
    db.data[i] = static_cast<float>(stats.min_db + values.data[i] * range);
  return db;
}

Tensor mel_to_linear(const Tensor& mel_mag, const Tensor& filterbank) {
  if (mel_mag.rank() != 2 || filterbank.rank() != 2 || mel_mag.shape[0] != filterbank.shape[0])
    throw ShapeError("mel_to_linear: shape mismatch");
  const std::size_t n_mels = filterbank.shape[0], bins = filterbank.shape[1];
  const std::size_t frames = mel_mag.shape[1];

  // Minimum-norm solution x = F^T (F F^T)^-1 m via Cholesky of the Gram matrix.
  std::vector<double> gram(n_mels * n_mels, 0.0);
  for (std::size_t i = 0; i < n_mels; ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      double acc = 0.0;
      for (std::size_t b = 0; b < bins; ++b)
        acc += static_cast<double>(filterbank(i, b)) * filterbank(j, b);
      gram[i * n_mels + j] = gram[j * n_mels + i] = acc;
    }
  for (std::size_t i = 0; i < n_mels; ++i) gram[i * n_mels + i] += 1e-10;

  std::vector<double> chol(n_mels * n_mels, 0.0);
  for (std::size_t i = 0; i < n_mels; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double acc = gram[i * n_mels + j];
      for (std::size_t k = 0; k < j; ++k) acc -= chol[i * n_mels + k] * chol[j * n_mels + k];
      if (i == j) {
        if (acc <= 0.0) throw ShapeError("mel_to_linear: filterbank Gram matrix not SPD");
        chol[i * n_mels + i] = std::sqrt(acc);
      } else {
        chol[i * n_mels + j] = acc / chol[j * n_mels + j];
      }
    }
  }

  Tensor lin({bins, frames}, 0.0f);
  std::vector<double> y(n_mels), z(n_mels);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t i = 0; i < n_mels; ++i) {
      double acc = mel_mag(i, t);
      for (std::size_t k = 0; k < i; ++k) acc -= chol[i * n_mels + k] * y[k];
      y[i] = acc / chol[i * n_mels + i];
    }
    for (std::size_t ii = n_mels; ii-- > 0;) {
      double acc = y[ii];
      for (std::size_t k = ii + 1; k < n_mels; ++k) acc -= chol[k * n_mels + ii] * z[k];
      z[ii] = acc / chol[ii * n_mels + ii];
    }
    for (std::size_t b = 0; b < bins; ++b) {
      double acc = 0.0;
      for (std::size_t m = 0; m < n_mels; ++m)
        acc += static_cast<double>(filterbank(m, b)) * z[m];
      lin(b, t) = static_cast<float>(std::max(acc, 0.0));
    }
  }
  return lin;
}

GriffinLimResult griffin_lim(const Tensor& mag, const DspConfig& cfg, int iters, Rng& rng) {
  cfg.validate();
  if (iters < 1) throw ConfigError("griffin_lim: iters must be >= 1");
  if (mag.rank() != 2 || static_cast<int>(mag.shape[0]) != cfg.bins())
    throw ShapeError("griffin_lim: magnitude shape does not match cfg geometry");
  for (float v : mag.data)
    if (v < 0.0f) throw ShapeError("griffin_lim: magnitude must be non-negative");

  GriffinLimResult res;
  double mag_norm = 0.0;
  for (float v : mag.data) mag_norm += static_cast<double>(v) * v;
  mag_norm = std::sqrt(mag_norm);
  const std::size_t frames = mag.shape[1];
  const int out_len = (static_cast<int>(frames) - 1) * cfg.hop + cfg.window_len;
  if (mag_norm == 0.0) {
    res.signal.assign(out_len, 0.0f);
    res.residuals.assign(iters, 0.0);
    return res;
  }

  ComplexSpectrogram s;
  s.real = Tensor(mag.shape, 0.0f);
  s.imag = Tensor(mag.shape, 0.0f);
  for (std::size_t i = 0; i < mag.size(); ++i) {
    const double phi = rng.uniform(0.0, 2.0 * M_PI);
    s.real.data[i] = static_cast<float>(mag.data[i] * std::cos(phi));
    s.imag.data[i] = static_cast<float>(mag.data[i] * std::sin(phi));
  }

  std::vector<float> x;
  for (int it = 0; it < iters; ++it) {
    x = istft(s, cfg);
    const auto c = stft(x, cfg);
    double err = 0.0;
    for (std::size_t i = 0; i < mag.size(); ++i) {
      const double re = c.real.data[i], im = c.imag.data[i];
      const double a = std::sqrt(re * re + im * im);
      const double d = a - mag.data[i];
      err += d * d;
      if (a > 1e-16) {
        s.real.data[i] = static_cast<float>(mag.data[i] * re / a);
        s.imag.data[i] = static_cast<float>(mag.data[i] * im / a);
      } else {
        s.real.data[i] = mag.data[i];
        s.imag.data[i] = 0.0f;
      }
    }
    res.residuals.push_back(std::sqrt(err) / mag_norm);
  }
  res.signal = istft(s, cfg);
  return res;
}

}  // namespace scae::dsp
