#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "scae/dsp.hpp"
#include "scae/tensor.hpp"

namespace scae::metrics {

struct Peak {
  int mel_bin = 0;
  double freq = 0.0;  // Hz, mel-bin center
  double amp = 0.0;   // dB
};

struct SampleMetrics {
  std::string id;
  double rmse = 0.0;
  double ssim = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  int frames_scored = 0;
};

struct EvalReport {
  std::vector<SampleMetrics> samples;
  SampleMetrics mean;
};

double rmse(const Tensor& a, const Tensor& b);

struct SsimConfig {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double range = 1.0;
};

double ssim(const Tensor& a, const Tensor& b, const SsimConfig& cfg = {});

/// Strict local maxima of one dB frame, keeping only peaks within
/// `floor_db` of the frame's strongest peak.
std::vector<Peak> detect_peaks(const std::vector<double>& frame_db,
                               const std::vector<double>& bin_centers_hz,
                               double floor_db = 30.0);

struct Match {
  int orig_idx;
  int gen_idx;
};

/// Greedy one-to-one matching by smallest relative distance; the +-tol
/// window is relative to the original peak's frequency.
std::vector<Match> match_frequencies(const std::vector<Peak>& orig, const std::vector<Peak>& gen,
                                     double tol = 0.03);

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

Prf frame_prf(const std::vector<Peak>& orig, const std::vector<Peak>& gen, double tol = 0.03);
Prf prf_from_counts(int id_freq, int gen_freq, int orig_freq);

/// Full per-sample evaluation: rmse/ssim on normalized values, peak
/// precision/recall/F1 per frame on the dB twins, averaged over frames
/// that have at least one original peak.
SampleMetrics evaluate_pair(const dsp::LogMelSpec& orig, const Tensor& gen_values,
                            const dsp::NormStats& stats, const dsp::DspConfig& cfg);

EvalReport aggregate(const std::vector<SampleMetrics>& samples);

/// CSV and fixed-width table, columns in the order RMSE, SSIM, Recall,
/// Precision, F1.
std::string report_csv(const EvalReport& report);
std::string report_table(const EvalReport& report);

}  // namespace scae::metrics
