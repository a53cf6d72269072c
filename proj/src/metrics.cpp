#include "scae/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>

namespace scae::metrics {

double rmse(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) throw ShapeError("rmse: shape mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a.data[i]) - b.data[i];
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(a.size()));
}

double ssim(const Tensor& a, const Tensor& b, const SsimConfig& cfg) {
  if (!a.same_shape(b)) throw ShapeError("ssim: shape mismatch");
  if (a.rank() != 2) throw ShapeError("ssim: expected 2-D input");
  const int H = static_cast<int>(a.shape[0]), W = static_cast<int>(a.shape[1]);
  const int win = cfg.window;
  if (H < win || W < win) throw ShapeError("ssim: image smaller than window");

  std::vector<double> g(win);
  const int half = win / 2;
  double gsum = 0.0;
  for (int i = 0; i < win; ++i) {
    const double d = i - half;
    g[i] = std::exp(-d * d / (2.0 * cfg.sigma * cfg.sigma));
    gsum += g[i];
  }
  for (auto& v : g) v /= gsum;

  const double c1 = (cfg.k1 * cfg.range) * (cfg.k1 * cfg.range);
  const double c2 = (cfg.k2 * cfg.range) * (cfg.k2 * cfg.range);

  double total = 0.0;
  std::size_t count = 0;
  for (int i = 0; i + win <= H; ++i) {
    for (int j = 0; j + win <= W; ++j) {
      double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
      for (int u = 0; u < win; ++u)
        for (int v = 0; v < win; ++v) {
          const double wgt = g[u] * g[v];
          const double x = a(i + u, j + v), y = b(i + u, j + v);
          mx += wgt * x;
          my += wgt * y;
          sxx += wgt * x * x;
          syy += wgt * y * y;
          sxy += wgt * x * y;
        }
      sxx -= mx * mx;
      syy -= my * my;
      sxy -= mx * my;
      const double num = (2.0 * mx * my + c1) * (2.0 * sxy + c2);
      const double den = (mx * mx + my * my + c1) * (sxx + syy + c2);
      total += num / den;
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

std::vector<Peak> detect_peaks(const std::vector<double>& frame_db,
                               const std::vector<double>& bin_centers_hz, double floor_db) {
  const int n = static_cast<int>(frame_db.size());
  if (bin_centers_hz.size() != frame_db.size())
    throw ShapeError("detect_peaks: bin center count mismatch");
  std::vector<Peak> peaks;
  for (int i = 1; i < n - 1; ++i) {
    if (!(frame_db[i] > frame_db[i - 1])) continue;
    // plateau: take the leftmost bin, require a strict drop on the right
    int j = i;
    while (j + 1 < n && frame_db[j + 1] == frame_db[i]) ++j;
    if (j + 1 >= n || !(frame_db[i] > frame_db[j + 1])) continue;
    peaks.push_back({i, bin_centers_hz[i], frame_db[i]});
  }
  if (peaks.empty()) return peaks;
  double max_amp = peaks[0].amp;
  for (const auto& p : peaks) max_amp = std::max(max_amp, p.amp);
  std::vector<Peak> kept;
  for (const auto& p : peaks)
    if (p.amp >= max_amp - floor_db) kept.push_back(p);
  return kept;
}

std::vector<Match> match_frequencies(const std::vector<Peak>& orig, const std::vector<Peak>& gen,
                                     double tol) {
  if (tol <= 0.0) throw ConfigError("match_frequencies: tol must be > 0");
  struct Cand {
    double dist;
    int o, g;
  };
  std::vector<Cand> cands;
  for (int o = 0; o < static_cast<int>(orig.size()); ++o)
    for (int g = 0; g < static_cast<int>(gen.size()); ++g) {
      const double d = std::abs(gen[g].freq - orig[o].freq);
      if (d <= tol * orig[o].freq) cands.push_back({d / orig[o].freq, o, g});
    }
  std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
    if (a.dist != b.dist) return a.dist < b.dist;
    if (a.o != b.o) return a.o < b.o;
    return a.g < b.g;
  });
  std::vector<bool> used_o(orig.size(), false);
  std::vector<int> match_g(gen.size(), -1);  // gen index -> orig index
  for (const auto& c : cands) {
    if (used_o[c.o] || match_g[c.g] != -1) continue;
    used_o[c.o] = true;
    match_g[c.g] = c.o;
  }

  // Greedy-by-distance can strand a peak when tolerance windows overlap;
  // augmenting paths top the matching up to maximum cardinality so the
  // counts agree with an exhaustive optimal matcher.
  std::vector<std::vector<int>> adj(orig.size());
  for (const auto& c : cands) adj[c.o].push_back(c.g);
  std::vector<bool> seen;
  std::function<bool(int)> augment = [&](int o) {
    for (int g : adj[o]) {
      if (seen[g]) continue;
      seen[g] = true;
      if (match_g[g] == -1 || augment(match_g[g])) {
        match_g[g] = o;
        return true;
      }
    }
    return false;
  };
  for (int o = 0; o < static_cast<int>(orig.size()); ++o) {
    if (used_o[o]) continue;
    seen.assign(gen.size(), false);
    if (augment(o)) used_o[o] = true;
  }

  std::vector<Match> out;
  for (int g = 0; g < static_cast<int>(gen.size()); ++g)
    if (match_g[g] != -1) out.push_back({match_g[g], g});
  std::sort(out.begin(), out.end(),
            [](const Match& a, const Match& b) { return a.orig_idx < b.orig_idx; });
  return out;
}

Prf prf_from_counts(int id_freq, int gen_freq, int orig_freq) {
  Prf r;
  if (orig_freq == 0) return r;  // caller skips such frames
  r.precision = gen_freq == 0 ? 0.0 : static_cast<double>(id_freq) / gen_freq;
  r.recall = static_cast<double>(id_freq) / orig_freq;
  r.f1 = (r.precision + r.recall) == 0.0
             ? 0.0
             : 2.0 * r.precision * r.recall / (r.precision + r.recall);
  return r;
}

Prf frame_prf(const std::vector<Peak>& orig, const std::vector<Peak>& gen, double tol) {
  const auto matches = match_frequencies(orig, gen, tol);
  return prf_from_counts(static_cast<int>(matches.size()), static_cast<int>(gen.size()),
                         static_cast<int>(orig.size()));
}

SampleMetrics evaluate_pair(const dsp::LogMelSpec& orig, const Tensor& gen_values,
                            const dsp::NormStats& stats, const dsp::DspConfig& cfg) {
  if (!orig.values.same_shape(gen_values)) throw ShapeError("evaluate_pair: shape mismatch");
  SampleMetrics m;
  m.rmse = rmse(orig.values, gen_values);
  m.ssim = ssim(orig.values, gen_values);

  const Tensor gen_db = dsp::denormalize(gen_values, stats);
  const auto centers = dsp::mel_bin_centers_hz(cfg);
  const std::size_t n_mels = orig.db.shape[0], frames = orig.db.shape[1];

  double psum = 0, rsum = 0, fsum = 0;
  int scored = 0;
  std::vector<double> of(n_mels), gf(n_mels);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t b = 0; b < n_mels; ++b) {
      of[b] = orig.db(b, t);
      gf[b] = gen_db(b, t);
    }
    const auto op = detect_peaks(of, centers);
    if (op.empty()) continue;  // Eq. for recall is undefined with no original peaks
    const auto gp = detect_peaks(gf, centers);
    const Prf prf = frame_prf(op, gp);
    psum += prf.precision;
    rsum += prf.recall;
    fsum += prf.f1;
    ++scored;
  }
  if (scored > 0) {
    m.precision = psum / scored;
    m.recall = rsum / scored;
    m.f1 = fsum / scored;
  }
  m.frames_scored = scored;
  return m;
}

EvalReport aggregate(const std::vector<SampleMetrics>& samples) {
  if (samples.empty()) throw ConfigError("aggregate: empty metrics list");
  EvalReport rep;
  rep.samples = samples;
  rep.mean.id = "mean";
  for (const auto& s : samples) {
    rep.mean.rmse += s.rmse;
    rep.mean.ssim += s.ssim;
    rep.mean.precision += s.precision;
    rep.mean.recall += s.recall;
    rep.mean.f1 += s.f1;
    rep.mean.frames_scored += s.frames_scored;
  }
  const double n = static_cast<double>(samples.size());
  rep.mean.rmse /= n;
  rep.mean.ssim /= n;
  rep.mean.precision /= n;
  rep.mean.recall /= n;
  rep.mean.f1 /= n;
  return rep;
}

namespace {
std::string row(const SampleMetrics& s, const char* fmt) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), fmt, s.id.c_str(), s.rmse, s.ssim, s.recall, s.precision, s.f1);
  return buf;
}
}  // namespace

std::string report_csv(const EvalReport& report) {
  std::string out = "id,rmse,ssim,recall,precision,f1\n";
  for (const auto& s : report.samples) out += row(s, "%s,%.6f,%.6f,%.6f,%.6f,%.6f\n");
  out += row(report.mean, "%s,%.6f,%.6f,%.6f,%.6f,%.6f\n");
  return out;
}

std::string report_table(const EvalReport& report) {
  char head[256];
  std::snprintf(head, sizeof(head), "%-32s %8s %8s %8s %9s %8s\n", "Experiment", "RMSE", "SSIM",
                "Recall", "Precision", "F1");
  std::string out = head;
  for (const auto& s : report.samples)
    out += row(s, "%-32s %8.3f %8.3f %8.3f %9.3f %8.3f\n");
  out += row(report.mean, "%-32s %8.3f %8.3f %8.3f %9.3f %8.3f\n");
  return out;
}

}  // namespace scae::metrics
