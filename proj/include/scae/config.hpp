#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"
#include "scae/dsp.hpp"
#include "scae/model.hpp"

namespace scae::config {

struct TrainConfig {
  int batch_size = 64;
  double lr = 0.001;
  int max_epochs = 300;
  int patience = 10;  // 0 disables early stopping
  std::uint64_t seed = 0;
  bool shuffle = true;
  double min_delta = 1e-6;

  void validate() const {
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (patience < 0) throw ConfigError("patience must be >= 0");
    if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  }
};

struct Paths {
  std::string data_dir;
  std::string cache_dir;
  std::string checkpoint_dir;
  std::string report_dir;
};

struct RunConfig {
  dsp::DspConfig dsp;
  model::ModelConfig model;
  TrainConfig train;
  Paths paths;
};

nlohmann::json to_json(const dsp::DspConfig& c);
nlohmann::json to_json(const model::ModelConfig& c);
nlohmann::json to_json(const TrainConfig& c);
nlohmann::json to_json(const RunConfig& c);

/// Strict parsers: unknown keys are rejected.
dsp::DspConfig dsp_from_json(const nlohmann::json& j);
model::ModelConfig model_from_json(const nlohmann::json& j);
TrainConfig train_from_json(const nlohmann::json& j);
RunConfig run_from_json(const nlohmann::json& j);

RunConfig load_run_config(const std::filesystem::path& path);

/// Named experiment presets mirroring the ablation grid (no-reg,
/// dropout-*, kr-*, ar-*, pool-*, latent-*, dense/no-dense).
model::ModelConfig preset(const std::string& name);
std::vector<std::string> preset_names();

}  // namespace scae::config
