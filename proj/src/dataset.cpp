#include "scae/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "json.hpp"
#include "scae/container.hpp"
#include "scae/wav.hpp"

namespace scae::data {

using nlohmann::json;

const ManifestEntry& Manifest::find(const std::string& id) const {
  for (const auto& e : entries)
    if (e.id == id) return e;
  throw ConfigError("manifest has no entry with id " + id);
}

Manifest build_manifest(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir))
    throw FormatError("not a directory: " + dir.string());
  Manifest m;
  for (const auto& de : std::filesystem::recursive_directory_iterator(dir)) {
    if (!de.is_regular_file() || de.path().extension() != ".wav") continue;
    ManifestEntry e;
    auto rel = std::filesystem::relative(de.path(), dir);
    e.id = rel.replace_extension().generic_string();
    e.path = std::filesystem::absolute(de.path()).string();
    const std::string stem = de.path().stem().string();
    const auto us = stem.find('_');
    e.instrument = us == std::string::npos ? "unknown" : stem.substr(0, us);
    const auto samples = load_wav(de.path());
    e.duration = static_cast<double>(samples.size()) / 16000.0;
    m.entries.push_back(std::move(e));
  }
  if (m.entries.empty()) throw FormatError("no .wav files found under " + dir.string());
  std::sort(m.entries.begin(), m.entries.end(),
            [](const ManifestEntry& a, const ManifestEntry& b) { return a.id < b.id; });
  std::set<std::string> ids;
  for (const auto& e : m.entries)
    if (!ids.insert(e.id).second) throw FormatError("duplicate manifest id: " + e.id);
  return m;
}

void save_manifest(const Manifest& m, const std::filesystem::path& path) {
  json j;
  j["entries"] = json::array();
  for (const auto& e : m.entries)
    j["entries"].push_back({{"id", e.id},
                            {"path", e.path},
                            {"instrument", e.instrument},
                            {"duration", e.duration}});
  j["fingerprint"] = m.fingerprint;
  if (m.stats) j["stats"] = {{"min_db", m.stats->min_db}, {"max_db", m.stats->max_db}};
  j["splits"] = {{"train", m.train_ids}, {"val", m.val_ids}, {"test", m.test_ids}};

  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::trunc);
    if (!os) throw FormatError("cannot write manifest: " + path.string());
    os << j.dump(2) << "\n";
  }
  std::filesystem::rename(tmp, path);
}

Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open manifest: " + path.string());
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw FormatError("bad manifest json: " + std::string(e.what()));
  }
  Manifest m;
  for (const auto& je : j.at("entries"))
    m.entries.push_back({je.at("id"), je.at("path"), je.at("instrument"), je.at("duration")});
  m.fingerprint = j.value("fingerprint", "");
  if (j.contains("stats"))
    m.stats = dsp::NormStats{j["stats"].at("min_db"), j["stats"].at("max_db")};
  if (j.contains("splits")) {
    m.train_ids = j["splits"].value("train", std::vector<std::string>{});
    m.val_ids = j["splits"].value("val", std::vector<std::string>{});
    m.test_ids = j["splits"].value("test", std::vector<std::string>{});
  }
  return m;
}

std::string dsp_fingerprint(const dsp::DspConfig& cfg) {
  json j = {{"sample_rate", cfg.sample_rate}, {"window_len", cfg.window_len},
            {"fft_size", cfg.fft_size},       {"hop", cfg.hop},
            {"n_mels", cfg.n_mels},           {"fmin", cfg.fmin},
            {"fmax", cfg.fmax},               {"target_frames", cfg.target_frames},
            {"db_floor", cfg.db_floor}};
  const std::string s = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::vector<float> fix_length(std::vector<float> samples, std::size_t n) {
  samples.resize(n, 0.0f);
  return samples;
}

std::filesystem::path cache_path(const std::filesystem::path& cache_dir, const std::string& id) {
  std::string name = id;
  std::replace(name.begin(), name.end(), '/', '~');
  return cache_dir / (name + ".scae");
}

std::size_t cache_spectrograms(Manifest& manifest, const dsp::DspConfig& cfg,
                               const std::filesystem::path& cache_dir) {
  const std::string fp = dsp_fingerprint(cfg);
  if (!manifest.fingerprint.empty() && manifest.fingerprint != fp)
    throw StaleCacheError("cache was built with different dsp settings (" + manifest.fingerprint +
                          " vs " + fp + "); delete the cache dir and re-run preprocessing");
  if (manifest.train_ids.empty())
    throw ConfigError("cache_spectrograms: manifest has no train split");
  std::filesystem::create_directories(cache_dir);

  if (manifest.stats && manifest.fingerprint == fp) {
    bool complete = true;
    for (const auto& e : manifest.entries)
      if (!std::filesystem::exists(cache_path(cache_dir, e.id))) {
        complete = false;
        break;
      }
    if (complete) return 0;
  }

  const std::size_t note_len = static_cast<std::size_t>(4 * cfg.sample_rate);
  std::vector<Tensor> dbs(manifest.entries.size());
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    auto samples = fix_length(load_wav(manifest.entries[i].path), note_len);
    dbs[i] = dsp::log_mel_db(samples, cfg);
  }

  std::set<std::string> train_set(manifest.train_ids.begin(), manifest.train_ids.end());
  std::vector<const Tensor*> train_dbs;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i)
    if (train_set.count(manifest.entries[i].id)) train_dbs.push_back(&dbs[i]);
  if (train_dbs.empty()) throw ConfigError("no training-split entries found in manifest");
  const auto stats = dsp::normalize_stats(train_dbs);

  std::size_t written = 0;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    const auto& e = manifest.entries[i];
    const Tensor values = dsp::normalize(dbs[i], stats);
    json meta = {{"id", e.id},
                 {"norm_min", stats.min_db},
                 {"norm_max", stats.max_db},
                 {"fingerprint", fp}};
    save_container(cache_path(cache_dir, e.id),
                   {ContainerEntry::from("values", values), ContainerEntry::from("db", dbs[i])},
                   meta.dump());
    ++written;
  }
  manifest.stats = stats;
  manifest.fingerprint = fp;
  return written;
}

dsp::LogMelSpec load_cached_spec(const std::filesystem::path& path) {
  auto [entries, meta_str] = load_container(path);
  dsp::LogMelSpec spec;
  bool have_values = false, have_db = false;
  for (const auto& e : entries) {
    if (e.name == "values") {
      spec.values = e.as_f32();
      have_values = true;
    } else if (e.name == "db") {
      spec.db = e.as_f32();
      have_db = true;
    }
  }
  if (!have_values || !have_db)
    throw ContainerError("cache file missing values/db entries: " + path.string());
  const json meta = json::parse(meta_str);
  spec.norm_min = meta.at("norm_min");
  spec.norm_max = meta.at("norm_max");
  return spec;
}

}  // namespace scae::data
