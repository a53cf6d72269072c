#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "scae/config.hpp"
#include "scae/dataset.hpp"
#include "scae/gradsuite.hpp"
#include "scae/metrics.hpp"
#include "scae/train.hpp"
#include "scae/wav.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace scae;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitDiverged = 3;
constexpr int kExitFingerprint = 4;
constexpr int kExitGradcheck = 5;

[[noreturn]] void fail(int code, const std::string& kind, const std::string& msg) {
  json j = {{"error", kind}, {"message", msg}, {"exit", code}};
  std::cerr << "error: " << j.dump() << "\n";
  std::exit(code);
}

config::RunConfig load_config_or_default(const std::string& path) {
  if (path.empty()) return config::RunConfig{};
  return config::load_run_config(path);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw FormatError("cannot write " + path.string());
  os << text;
}

struct LoadedSplit {
  std::vector<std::string> ids;
  std::vector<dsp::LogMelSpec> specs;
  std::vector<Tensor> values;
};

LoadedSplit load_split(const data::Manifest& manifest, const fs::path& cache_dir,
                       const std::vector<std::string>& ids) {
  LoadedSplit out;
  out.ids = ids;
  for (const auto& id : ids) {
    const auto path = data::cache_path(cache_dir, id);
    if (!fs::exists(path)) throw FormatError("missing cache file for sample " + id);
    out.specs.push_back(data::load_cached_spec(path));
    out.values.push_back(out.specs.back().values);
  }
  return out;
}

int cmd_preprocess(const std::string& data_dir, const std::string& cache_dir,
                   const std::string& config_path) {
  auto cfg = load_config_or_default(config_path);
  auto manifest = data::build_manifest(data_dir);

  std::vector<std::string> ids;
  for (const auto& e : manifest.entries) ids.push_back(e.id);
  auto [tr, va, te] = train::split_dataset(ids, {0.8, 0.1, 0.1}, cfg.train.seed);

  const fs::path cdir(cache_dir);
  const fs::path manifest_path = cdir / "manifest.json";
  if (fs::exists(manifest_path)) {
    // keep the previous split so re-runs are no-ops
    auto prev = data::load_manifest(manifest_path);
    if (!prev.train_ids.empty()) {
      manifest.train_ids = prev.train_ids;
      manifest.val_ids = prev.val_ids;
      manifest.test_ids = prev.test_ids;
      manifest.fingerprint = prev.fingerprint;
      manifest.stats = prev.stats;
    }
  }
  if (manifest.train_ids.empty()) {
    manifest.train_ids = tr;
    manifest.val_ids = va;
    manifest.test_ids = te;
  }

  const std::size_t written = data::cache_spectrograms(manifest, cfg.dsp, cdir);
  data::save_manifest(manifest, manifest_path);
  if (written == 0) {
    std::printf("0 cached (up to date)\n");
  } else {
    std::printf("%zu cached, split %zu/%zu/%zu\n", written, manifest.train_ids.size(),
                manifest.val_ids.size(), manifest.test_ids.size());
    std::printf("norm stats: min %.3f dB, max %.3f dB\n", manifest.stats->min_db,
                manifest.stats->max_db);
  }
  return kExitOk;
}

int cmd_train(const std::string& cache_dir, const std::string& config_path,
              const std::string& out_dir, const std::string& preset_name,
              const std::string& resume_path) {
  auto cfg = load_config_or_default(config_path);
  if (!preset_name.empty()) cfg.model = config::preset(preset_name);

  const fs::path cdir(cache_dir);
  auto manifest = data::load_manifest(cdir / "manifest.json");
  if (!manifest.stats) throw ConfigError("cache has no normalization stats; run preprocess first");
  const std::string fp = data::dsp_fingerprint(cfg.dsp);
  if (manifest.fingerprint != fp)
    throw FingerprintError("dsp config does not match the cache fingerprint");

  auto train_split = load_split(manifest, cdir, manifest.train_ids);
  auto val_split = load_split(manifest, cdir,
                              manifest.val_ids.empty() ? manifest.train_ids : manifest.val_ids);

  std::unique_ptr<model::Autoencoder<float>> m;
  train::TrainHistory resumed_history;
  std::unique_ptr<train::Trainer> trainer;
  if (!resume_path.empty()) {
    auto ck = train::load_checkpoint(resume_path);
    cfg.model = ck.model_cfg;
    cfg.train = ck.train_cfg;
    m = train::restore_model(ck);
    trainer = std::make_unique<train::Trainer>(*m, cfg.train);
    trainer->optimizer().restore(std::move(ck.adam_m), std::move(ck.adam_v), ck.adam_t);
    trainer->shuffle_rng().set_state(ck.shuffle_rng_state);
    trainer->dropout_rng().set_state(ck.dropout_rng_state);
    trainer->history() = ck.history;
  } else {
    Rng init_rng = Rng::substream(cfg.train.seed, 0);
    m = model::build_model<float>(cfg.model, init_rng);
    trainer = std::make_unique<train::Trainer>(*m, cfg.train);
  }

  auto& history = trainer->run(train_split.values, val_split.values);

  fs::create_directories(out_dir);
  train::Checkpoint ck;
  ck.model_cfg = cfg.model;
  ck.train_cfg = cfg.train;
  ck.dsp_cfg = cfg.dsp;
  ck.stats = *manifest.stats;
  ck.dsp_fingerprint = fp;
  ck.history = history;
  ck.params = m->snapshot();
  ck.adam_m = std::move(trainer->optimizer().first_moments());
  ck.adam_v = std::move(trainer->optimizer().second_moments());
  ck.adam_t = trainer->optimizer().steps();
  ck.shuffle_rng_state = trainer->shuffle_rng().state();
  ck.dropout_rng_state = trainer->dropout_rng().state();
  train::save_checkpoint(std::move(ck), fs::path(out_dir) / "checkpoint.scae");
  write_text(fs::path(out_dir) / "history.csv", history.to_csv());

  if (history.stopped_epoch > 0 && history.best_epoch > 0 &&
      history.stopped_epoch < static_cast<int>(history.train_loss.size()) + 1 + cfg.train.max_epochs &&
      history.stopped_epoch - history.best_epoch >= cfg.train.patience && cfg.train.patience > 0)
    std::printf("early stop at epoch %d (best %d)\n", history.stopped_epoch, history.best_epoch);
  else
    std::printf("stopped at epoch %d (best %d)\n", history.stopped_epoch, history.best_epoch);

  // final train RMSE of the restored (best) model
  m->set_mode(nn::Mode::Eval);
  double mse_acc = 0.0;
  for (const auto& v : train_split.values) {
    auto pred = m->forward(v);
    auto [mse, g] = nn::mse_loss(pred, v);
    mse_acc += static_cast<double>(mse);
  }
  std::printf("final train RMSE %.6f\n",
              std::sqrt(mse_acc / static_cast<double>(train_split.values.size())));
  return kExitOk;
}

int cmd_eval(const std::string& cache_dir, const std::string& checkpoint_path,
             const std::string& split, const std::string& out_dir, bool oracle_copy) {
  const fs::path cdir(cache_dir);
  auto manifest = data::load_manifest(cdir / "manifest.json");
  if (!manifest.stats) throw ConfigError("cache has no normalization stats; run preprocess first");

  const std::vector<std::string>* ids = nullptr;
  if (split == "train") ids = &manifest.train_ids;
  else if (split == "val") ids = &manifest.val_ids;
  else if (split == "test") ids = &manifest.test_ids;
  else throw ConfigError("split must be train, val, or test");
  if (ids->empty()) throw FormatError("split '" + split + "' is empty");

  std::unique_ptr<model::Autoencoder<float>> m;
  dsp::DspConfig dcfg;
  if (oracle_copy) {
    dcfg = dsp::DspConfig{};
  } else {
    auto ck = train::load_checkpoint(checkpoint_path);
    if (ck.dsp_fingerprint != manifest.fingerprint)
      throw FingerprintError("checkpoint dsp fingerprint does not match the cache");
    dcfg = ck.dsp_cfg;
    m = train::restore_model(ck);
    m->set_mode(nn::Mode::Eval);
  }

  auto data_split = load_split(manifest, cdir, *ids);
  std::vector<metrics::SampleMetrics> rows;
  for (std::size_t i = 0; i < data_split.ids.size(); ++i) {
    const auto& spec = data_split.specs[i];
    Tensor gen = oracle_copy ? spec.values : m->forward(spec.values);
    auto sm = metrics::evaluate_pair(spec, gen, *manifest.stats, dcfg);
    sm.id = data_split.ids[i];
    rows.push_back(sm);
  }
  auto report = metrics::aggregate(rows);

  const fs::path rdir = out_dir.empty() ? cdir : fs::path(out_dir);
  fs::create_directories(rdir);
  write_text(rdir / ("eval_" + split + ".csv"), metrics::report_csv(report));
  write_text(rdir / ("eval_" + split + ".txt"), metrics::report_table(report));
  std::printf("%s", metrics::report_table(report).c_str());
  return kExitOk;
}

int cmd_reconstruct(const std::string& checkpoint_path, const std::string& in_wav,
                    const std::string& out_wav, int gl_iters, std::uint64_t gl_seed) {
  auto ck = train::load_checkpoint(checkpoint_path);
  auto m = train::restore_model(ck);
  m->set_mode(nn::Mode::Eval);
  const auto& dcfg = ck.dsp_cfg;

  auto samples = data::fix_length(data::load_wav(in_wav),
                                  static_cast<std::size_t>(4 * dcfg.sample_rate));
  const auto spec = dsp::log_mel_spectrogram(samples, dcfg, ck.stats);
  const Tensor gen = m->forward(spec.values);
  const Tensor gen_db = dsp::denormalize(gen, ck.stats);

  // dB -> linear mel magnitude -> linear spectrogram magnitude
  Tensor mel_mag;
  mel_mag.shape = gen_db.shape;
  mel_mag.data.resize(gen_db.size());
  const double floor_amp = std::pow(10.0, dcfg.db_floor / 20.0);
  for (std::size_t i = 0; i < gen_db.size(); ++i) {
    const double a = std::pow(10.0, static_cast<double>(gen_db.data[i]) / 20.0);
    mel_mag.data[i] = static_cast<float>(a <= floor_amp * 1.0000001 ? 0.0 : a);
  }
  const auto fb = dsp::mel_filterbank(dcfg);
  const Tensor lin_mag = dsp::mel_to_linear(mel_mag, fb);

  Rng gl_rng(gl_seed);
  auto gl = dsp::griffin_lim(lin_mag, dcfg, gl_iters, gl_rng);
  data::save_wav(out_wav, gl.signal, dcfg.sample_rate);
  std::printf("wrote %s (%zu samples)\n", out_wav.c_str(), gl.signal.size());
  std::printf("final spectral-convergence residual %.6f\n", gl.residuals.back());
  return kExitOk;
}

int cmd_gradcheck(double eps, const std::string& inject_fault) {
  std::printf("eps = %g\n", eps);
  auto results = gradsuite::run(eps, inject_fault);
  bool ok = true;
  std::string failing;
  std::printf("%-18s %12s %10s  %s\n", "layer", "max_rel_err", "threshold", "status");
  for (const auto& r : results) {
    std::printf("%-18s %12.3e %10.0e  %s\n", r.name.c_str(), r.max_rel_err, r.threshold,
                r.pass() ? "ok" : "FAIL");
    if (!r.pass()) {
      ok = false;
      if (!failing.empty()) failing += ", ";
      failing += r.name;
    }
  }
  if (!ok) {
    std::printf("gradcheck failed: %s\n", failing.c_str());
    return kExitGradcheck;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stacked convolutional autoencoder pipeline for log-mel-spectrograms"};
  app.require_subcommand(0, 1);

  bool print_config = false;
  app.add_flag("--print-config", print_config, "print the full default config as JSON and exit");

  std::string data_dir, cache_dir, config_path, out_dir, preset_name, resume_path;
  std::string checkpoint_path, split = "test", in_wav, out_wav, inject_fault;
  bool oracle_copy = false;
  int gl_iters = 60;
  std::uint64_t gl_seed = 0;
  double eps = 1e-5;

  auto* pre = app.add_subcommand("preprocess", "build manifest, split, and spectrogram caches");
  pre->add_option("--data", data_dir, "input wav directory")->required();
  pre->add_option("--cache", cache_dir, "cache output directory")->required();
  pre->add_option("--config", config_path, "run config JSON");

  auto* tr = app.add_subcommand("train", "train an autoencoder on cached spectrograms");
  tr->add_option("--cache", cache_dir, "cache directory")->required();
  tr->add_option("--config", config_path, "run config JSON");
  tr->add_option("--out", out_dir, "output directory")->required();
  tr->add_option("--preset", preset_name, "named experiment preset");
  tr->add_option("--resume", resume_path, "checkpoint to resume from");

  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a split");
  ev->add_option("--cache", cache_dir, "cache directory")->required();
  ev->add_option("--checkpoint", checkpoint_path, "checkpoint file");
  ev->add_option("--split", split, "train|val|test");
  ev->add_option("--out", out_dir, "report output directory");
  ev->add_flag("--oracle-copy", oracle_copy, "score each sample against itself (sanity mode)");

  auto* rec = app.add_subcommand("reconstruct", "wav -> autoencoder -> Griffin-Lim -> wav");
  rec->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
  rec->add_option("--in", in_wav, "input wav")->required();
  rec->add_option("--out", out_wav, "output wav")->required();
  rec->add_option("--gl-iters", gl_iters, "Griffin-Lim iterations");
  rec->add_option("--gl-seed", gl_seed, "Griffin-Lim phase seed");

  auto* gc = app.add_subcommand("gradcheck", "finite-difference checks for every layer kind");
  gc->add_option("--eps", eps, "central-difference step");
  gc->add_option("--inject-fault", inject_fault, "corrupt a layer's backward (test fixture)")
      ->group("");  // hidden

  CLI11_PARSE(app, argc, argv);

  try {
    if (print_config) {
      std::cout << config::to_json(config::RunConfig{}).dump(2) << "\n";
      return kExitOk;
    }
    if (pre->parsed()) return cmd_preprocess(data_dir, cache_dir, config_path);
    if (tr->parsed()) return cmd_train(cache_dir, config_path, out_dir, preset_name, resume_path);
    if (ev->parsed()) {
      if (!oracle_copy && checkpoint_path.empty())
        throw ConfigError("eval needs --checkpoint (or --oracle-copy)");
      return cmd_eval(cache_dir, checkpoint_path, split, out_dir, oracle_copy);
    }
    if (rec->parsed()) return cmd_reconstruct(checkpoint_path, in_wav, out_wav, gl_iters, gl_seed);
    if (gc->parsed()) return cmd_gradcheck(eps, inject_fault);
    std::cout << app.help() << "\n";
    return kExitOk;
  } catch (const DivergedError& e) {
    fail(kExitDiverged, "diverged", e.what());
  } catch (const FingerprintError& e) {
    fail(kExitFingerprint, "fingerprint-mismatch", e.what());
  } catch (const StaleCacheError& e) {
    fail(kExitFingerprint, "stale-cache", e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    fail(kExitInput, "path", e.what());
  } catch (const std::exception& e) {
    fail(kExitInput, "input", e.what());
  }
}
