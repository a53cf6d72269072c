#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "scae/dsp.hpp"
#include "scae/tensor.hpp"

namespace scae::data {

struct ManifestEntry {
  std::string id;          // relative path without extension, unique
  std::string path;        // absolute path to the wav
  std::string instrument;  // filename prefix up to the first underscore
  double duration = 0.0;   // seconds
};

struct Manifest {
  std::vector<ManifestEntry> entries;
  std::string fingerprint;  // hash of the DspConfig used for the caches
  std::optional<dsp::NormStats> stats;
  std::vector<std::string> train_ids, val_ids, test_ids;

  const ManifestEntry& find(const std::string& id) const;
};

/// Recursive scan for .wav files, deterministic lexicographic order.
Manifest build_manifest(const std::filesystem::path& dir);

void save_manifest(const Manifest& m, const std::filesystem::path& path);
Manifest load_manifest(const std::filesystem::path& path);

std::string dsp_fingerprint(const dsp::DspConfig& cfg);

/// Pad with zeros / truncate to exactly n samples.
std::vector<float> fix_length(std::vector<float> samples, std::size_t n);

/// Computes dB spectrograms for every entry, normalization stats over the
/// manifest's train split only, and writes one container per sample.
/// Returns the number of cache files written (0 when up to date).
std::size_t cache_spectrograms(Manifest& manifest, const dsp::DspConfig& cfg,
                               const std::filesystem::path& cache_dir);

std::filesystem::path cache_path(const std::filesystem::path& cache_dir, const std::string& id);

dsp::LogMelSpec load_cached_spec(const std::filesystem::path& path);

}  // namespace scae::data
