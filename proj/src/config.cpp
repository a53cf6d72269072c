#include "scae/config.hpp"

#include <fstream>
#include <set>

namespace scae::config {

using nlohmann::json;
using model::ModelConfig;
using model::OutputActivation;
using model::Placement;
using model::Pooling;
using model::PoolPlacement;

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key())) throw ConfigError(where + ": unknown key '" + it.key() + "'");
}

std::string placement_str(Placement p) {
  switch (p) {
    case Placement::Encoder: return "encoder";
    case Placement::Decoder: return "decoder";
    default: return "both";
  }
}
Placement placement_of(const std::string& s) {
  if (s == "encoder") return Placement::Encoder;
  if (s == "decoder") return Placement::Decoder;
  if (s == "both") return Placement::Both;
  throw ConfigError("bad placement '" + s + "'");
}

}  // namespace

json to_json(const dsp::DspConfig& c) {
  return {{"sample_rate", c.sample_rate}, {"window_len", c.window_len},
          {"fft_size", c.fft_size},       {"hop", c.hop},
          {"n_mels", c.n_mels},           {"fmin", c.fmin},
          {"fmax", c.fmax},               {"target_frames", c.target_frames},
          {"db_floor", c.db_floor}};
}

dsp::DspConfig dsp_from_json(const json& j) {
  check_keys(j,
             {"sample_rate", "window_len", "fft_size", "hop", "n_mels", "fmin", "fmax",
              "target_frames", "db_floor"},
             "dsp");
  dsp::DspConfig c;
  c.sample_rate = j.value("sample_rate", c.sample_rate);
  c.window_len = j.value("window_len", c.window_len);
  c.fft_size = j.value("fft_size", c.fft_size);
  c.hop = j.value("hop", c.hop);
  c.n_mels = j.value("n_mels", c.n_mels);
  c.fmin = j.value("fmin", c.fmin);
  c.fmax = j.value("fmax", c.fmax);
  c.target_frames = j.value("target_frames", c.target_frames);
  c.db_floor = j.value("db_floor", c.db_floor);
  c.validate();
  return c;
}

json to_json(const ModelConfig& c) {
  json j = {{"n_conv", c.n_conv},
            {"kernel", c.kernel},
            {"stride", c.stride},
            {"filters", c.filters},
            {"pooling", c.pooling == Pooling::Max   ? "max"
                        : c.pooling == Pooling::Avg ? "avg"
                                                    : "none"},
            {"pooling_placement",
             c.pooling_placement == PoolPlacement::AfterStack ? "after_stack" : "after_each"},
            {"latent_dim", c.latent_dim},
            {"use_dense", c.use_dense},
            {"output_activation",
             c.output_activation == OutputActivation::Softmax ? "softmax" : "sigmoid"},
            {"in_h", c.in_h},
            {"in_w", c.in_w}};
  if (c.dropout)
    j["dropout"] = {{"p", c.dropout->p}, {"placement", placement_str(c.dropout->placement)}};
  json regs = json::array();
  for (const auto& [spec, placement] : c.reg)
    regs.push_back({{"norm", spec.norm == nn::RegNorm::L1 ? "l1" : "l2"},
                    {"lambda", spec.lambda},
                    {"attach", spec.attach == nn::RegAttach::Kernel ? "kernel"
                               : spec.attach == nn::RegAttach::Bias ? "bias"
                                                                    : "activity"},
                    {"placement", placement_str(placement)}});
  j["reg"] = regs;
  return j;
}

ModelConfig model_from_json(const json& j) {
  check_keys(j,
             {"n_conv", "kernel", "stride", "filters", "pooling", "pooling_placement",
              "latent_dim", "use_dense", "output_activation", "dropout", "reg", "in_h", "in_w"},
             "model");
  ModelConfig c;
  c.n_conv = j.value("n_conv", c.n_conv);
  c.kernel = j.value("kernel", c.kernel);
  c.stride = j.value("stride", c.stride);
  c.filters = j.value("filters", c.filters);
  if (j.contains("pooling")) {
    const std::string p = j["pooling"];
    if (p == "max") c.pooling = Pooling::Max;
    else if (p == "avg") c.pooling = Pooling::Avg;
    else if (p == "none") c.pooling = Pooling::None;
    else throw ConfigError("bad pooling '" + p + "'");
  }
  if (j.contains("pooling_placement")) {
    const std::string p = j["pooling_placement"];
    if (p == "after_stack") c.pooling_placement = PoolPlacement::AfterStack;
    else if (p == "after_each") c.pooling_placement = PoolPlacement::AfterEach;
    else throw ConfigError("bad pooling_placement '" + p + "'");
  }
  c.latent_dim = j.value("latent_dim", c.latent_dim);
  c.use_dense = j.value("use_dense", c.use_dense);
  if (j.contains("output_activation")) {
    const std::string a = j["output_activation"];
    if (a == "softmax") c.output_activation = OutputActivation::Softmax;
    else if (a == "sigmoid") c.output_activation = OutputActivation::Sigmoid;
    else throw ConfigError("bad output_activation '" + a + "'");
  }
  if (j.contains("dropout") && !j["dropout"].is_null()) {
    check_keys(j["dropout"], {"p", "placement"}, "model.dropout");
    model::DropoutSpec d;
    d.p = j["dropout"].value("p", 0.3);
    d.placement = placement_of(j["dropout"].value("placement", "both"));
    c.dropout = d;
  }
  if (j.contains("reg")) {
    for (const auto& jr : j["reg"]) {
      check_keys(jr, {"norm", "lambda", "attach", "placement"}, "model.reg[]");
      nn::RegSpec spec;
      const std::string norm = jr.value("norm", "l2");
      if (norm == "l1") spec.norm = nn::RegNorm::L1;
      else if (norm == "l2") spec.norm = nn::RegNorm::L2;
      else throw ConfigError("bad reg norm '" + norm + "'");
      spec.lambda = jr.value("lambda", 0.01);
      const std::string attach = jr.value("attach", "kernel");
      if (attach == "kernel") spec.attach = nn::RegAttach::Kernel;
      else if (attach == "bias") spec.attach = nn::RegAttach::Bias;
      else if (attach == "activity") spec.attach = nn::RegAttach::Activity;
      else throw ConfigError("bad reg attach '" + attach + "'");
      c.reg.emplace_back(spec, placement_of(jr.value("placement", "both")));
    }
  }
  c.in_h = j.value("in_h", c.in_h);
  c.in_w = j.value("in_w", c.in_w);
  c.validate();
  return c;
}

json to_json(const TrainConfig& c) {
  return {{"batch_size", c.batch_size}, {"lr", c.lr},
          {"max_epochs", c.max_epochs}, {"patience", c.patience},
          {"seed", c.seed},             {"shuffle", c.shuffle},
          {"min_delta", c.min_delta}};
}

TrainConfig train_from_json(const json& j) {
  check_keys(j, {"batch_size", "lr", "max_epochs", "patience", "seed", "shuffle", "min_delta"},
             "train");
  TrainConfig c;
  c.batch_size = j.value("batch_size", c.batch_size);
  c.lr = j.value("lr", c.lr);
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.patience = j.value("patience", c.patience);
  c.seed = j.value("seed", c.seed);
  c.shuffle = j.value("shuffle", c.shuffle);
  c.min_delta = j.value("min_delta", c.min_delta);
  c.validate();
  return c;
}

json to_json(const RunConfig& c) {
  return {{"dsp", to_json(c.dsp)},
          {"model", to_json(c.model)},
          {"train", to_json(c.train)},
          {"paths",
           {{"data_dir", c.paths.data_dir},
            {"cache_dir", c.paths.cache_dir},
            {"checkpoint_dir", c.paths.checkpoint_dir},
            {"report_dir", c.paths.report_dir}}}};
}

RunConfig run_from_json(const json& j) {
  check_keys(j, {"dsp", "model", "train", "paths", "preset"}, "config");
  RunConfig c;
  if (j.contains("preset")) c.model = preset(j["preset"]);
  if (j.contains("dsp")) c.dsp = dsp_from_json(j["dsp"]);
  if (j.contains("model")) {
    if (j.contains("preset")) throw ConfigError("give either 'preset' or 'model', not both");
    c.model = model_from_json(j["model"]);
  }
  if (j.contains("train")) c.train = train_from_json(j["train"]);
  if (j.contains("paths")) {
    check_keys(j["paths"], {"data_dir", "cache_dir", "checkpoint_dir", "report_dir"}, "paths");
    c.paths.data_dir = j["paths"].value("data_dir", "");
    c.paths.cache_dir = j["paths"].value("cache_dir", "");
    c.paths.checkpoint_dir = j["paths"].value("checkpoint_dir", "");
    c.paths.report_dir = j["paths"].value("report_dir", "");
  }
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file: " + path.string());
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw ConfigError("bad config json: " + std::string(e.what()));
  }
  return run_from_json(j);
}

ModelConfig preset(const std::string& name) {
  ModelConfig c;  // baseline: 3 convs, max pool after stack, dense, latent 8192
  auto dropout = [&](Placement p) { c.dropout = model::DropoutSpec{0.3, p}; };
  auto reg = [&](nn::RegNorm norm, nn::RegAttach attach, Placement p) {
    c.reg.emplace_back(nn::RegSpec{norm, 0.01, attach}, p);
  };

  if (name == "no-reg" || name == "pool-max" || name == "latent-8192" || name == "dense") {
  } else if (name == "dropout-e") dropout(Placement::Encoder);
  else if (name == "dropout-d") dropout(Placement::Decoder);
  else if (name == "dropout-ed") dropout(Placement::Both);
  else if (name == "kr-l1-e") reg(nn::RegNorm::L1, nn::RegAttach::Kernel, Placement::Encoder);
  else if (name == "kr-l1-d") reg(nn::RegNorm::L1, nn::RegAttach::Kernel, Placement::Decoder);
  else if (name == "kr-l1-ed") reg(nn::RegNorm::L1, nn::RegAttach::Kernel, Placement::Both);
  else if (name == "kr-l2-e") reg(nn::RegNorm::L2, nn::RegAttach::Kernel, Placement::Encoder);
  else if (name == "kr-l2-d") reg(nn::RegNorm::L2, nn::RegAttach::Kernel, Placement::Decoder);
  else if (name == "kr-l2-ed") reg(nn::RegNorm::L2, nn::RegAttach::Kernel, Placement::Both);
  else if (name == "ar-l1-e") reg(nn::RegNorm::L1, nn::RegAttach::Activity, Placement::Encoder);
  else if (name == "ar-l1-d") reg(nn::RegNorm::L1, nn::RegAttach::Activity, Placement::Decoder);
  else if (name == "ar-l1-ed") reg(nn::RegNorm::L1, nn::RegAttach::Activity, Placement::Both);
  else if (name == "ar-l2-e") reg(nn::RegNorm::L2, nn::RegAttach::Activity, Placement::Encoder);
  else if (name == "ar-l2-d") reg(nn::RegNorm::L2, nn::RegAttach::Activity, Placement::Decoder);
  else if (name == "ar-l2-ed") reg(nn::RegNorm::L2, nn::RegAttach::Activity, Placement::Both);
  else if (name == "pool-avg") c.pooling = Pooling::Avg;
  else if (name == "pool-none") {
    // three extra stride-2 convs replace the pool; filters keep flatten at 8192
    c.pooling = Pooling::None;
    c.n_conv = 6;
    c.filters = {16, 32, 64, 128, 256, 1024};
  } else if (name == "latent-4096") c.latent_dim = 4096;
  else if (name == "latent-2048") c.latent_dim = 2048;
  else if (name == "no-dense") c.use_dense = false;
  else throw ConfigError("unknown preset '" + name + "'");
  c.validate();
  return c;
}

std::vector<std::string> preset_names() {
  return {"no-reg",    "dropout-e", "dropout-d", "dropout-ed", "kr-l1-e",  "kr-l1-d",
          "kr-l1-ed",  "kr-l2-e",   "kr-l2-d",   "kr-l2-ed",   "ar-l1-e",  "ar-l1-d",
          "ar-l1-ed",  "ar-l2-e",   "ar-l2-d",   "ar-l2-ed",   "pool-max", "pool-avg",
          "pool-none", "latent-8192", "latent-4096", "latent-2048", "dense", "no-dense"};
}

}  // namespace scae::config
