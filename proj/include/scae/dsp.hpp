#pragma once

#include <vector>

#include "scae/rng.hpp"
#include "scae/tensor.hpp"

namespace scae::dsp {

struct DspConfig {
  int sample_rate = 16000;
  int window_len = 690;
  int fft_size = 1024;
  int hop = 250;
  int n_mels = 128;
  double fmin = 0.0;
  double fmax = 8000.0;
  int target_frames = 256;
  double db_floor = -100.0;

  int bins() const { return fft_size / 2 + 1; }
  void validate() const;
};

/// min/max over the training split's dB values, used for [0,1] scaling.
struct NormStats {
  double min_db = 0.0;
  double max_db = 0.0;
};

struct ComplexSpectrogram {
  Tensor real;  // [bins x frames]
  Tensor imag;
  std::size_t bins() const { return real.shape[0]; }
  std::size_t frames() const { return real.shape[1]; }
};

struct LogMelSpec {
  Tensor values;  // [n_mels x target_frames], in [0,1]
  Tensor db;      // same shape, dB domain before normalization
  double norm_min = 0.0;
  double norm_max = 0.0;
};

std::vector<double> blackman_window(int n);

double hz_to_mel(double f);
double mel_to_hz(double m);

ComplexSpectrogram stft(const std::vector<float>& signal, const DspConfig& cfg);
std::vector<float> istft(const ComplexSpectrogram& spec, const DspConfig& cfg);

Tensor magnitude(const ComplexSpectrogram& spec);

/// Triangular filters, centers uniform on the mel axis, peak weight 1.
Tensor mel_filterbank(const DspConfig& cfg);

/// Center frequency (Hz) of each mel bin of the filterbank.
std::vector<double> mel_bin_centers_hz(const DspConfig& cfg);

/// dB-domain log-mel-spectrogram, cropped/padded to cfg.target_frames.
Tensor log_mel_db(const std::vector<float>& signal, const DspConfig& cfg);

/// Full pipeline: dB spectrogram plus [0,1] values under the given stats.
LogMelSpec log_mel_spectrogram(const std::vector<float>& signal, const DspConfig& cfg,
                               const NormStats& stats);

NormStats normalize_stats(const std::vector<const Tensor*>& db_specs);
Tensor normalize(const Tensor& db, const NormStats& stats);
Tensor denormalize(const Tensor& values, const NormStats& stats);

/// Minimum-norm least-squares inversion of the filterbank, per frame,
/// negatives clipped to zero. mel_mag is [n_mels x frames].
Tensor mel_to_linear(const Tensor& mel_mag, const Tensor& filterbank);

struct GriffinLimResult {
  std::vector<float> signal;
  std::vector<double> residuals;  // spectral-convergence residual per iteration
};

GriffinLimResult griffin_lim(const Tensor& mag, const DspConfig& cfg, int iters, Rng& rng);

}  // namespace scae::dsp
