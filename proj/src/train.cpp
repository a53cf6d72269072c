#include "scae/train.hpp"

#include <chrono>
#include <cstdio>
#include <numeric>

#include "scae/container.hpp"
#include "scae/dataset.hpp"

namespace scae::train {

using nlohmann::json;

std::string TrainHistory::to_csv() const {
  std::string out = "epoch,train_loss,val_loss,seconds\n";
  char buf[128];
  for (std::size_t i = 0; i < train_loss.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu,%.9g,%.9g,%.3f\n", i + 1, train_loss[i], val_loss[i],
                  seconds[i]);
    out += buf;
  }
  return out;
}

std::tuple<std::vector<std::string>, std::vector<std::string>, std::vector<std::string>>
split_dataset(const std::vector<std::string>& ids, std::array<double, 3> ratios,
              std::uint64_t seed) {
  if (std::abs(ratios[0] + ratios[1] + ratios[2] - 1.0) > 1e-9)
    throw ConfigError("split ratios must sum to 1");
  const std::size_t n = ids.size();
  if (n < 3) throw ConfigError("need at least 3 samples to split");

  std::vector<std::string> shuffled = ids;
  Rng rng(seed);
  for (std::size_t i = n - 1; i > 0; --i)
    std::swap(shuffled[i], shuffled[rng.next_below(i + 1)]);

  const auto n_val = static_cast<std::size_t>(ratios[1] * static_cast<double>(n));
  const auto n_test = static_cast<std::size_t>(ratios[2] * static_cast<double>(n));
  const std::size_t n_train = n - n_val - n_test;

  std::vector<std::string> train(shuffled.begin(), shuffled.begin() + n_train);
  std::vector<std::string> val(shuffled.begin() + n_train, shuffled.begin() + n_train + n_val);
  std::vector<std::string> test(shuffled.begin() + n_train + n_val, shuffled.end());
  return {std::move(train), std::move(val), std::move(test)};
}

Trainer::Trainer(model::Autoencoder<float>& m, TrainConfig cfg)
    : model_(m),
      cfg_(cfg),
      adam_(nn::AdamConfig<float>{static_cast<float>(cfg.lr), 0.9f, 0.999f, 1e-8f}),
      shuffle_rng_(Rng::substream(cfg.seed, 1)),
      dropout_rng_(Rng::substream(cfg.seed, 2)) {
  cfg_.validate();
  model_.set_dropout_rng(&dropout_rng_);
}

double Trainer::validation_mse(const std::vector<Tensor>& val_set) {
  model_.set_mode(nn::Mode::Eval);
  double acc = 0.0;
  for (const auto& v : val_set) {
    const Tensor pred = model_.forward(v);
    auto [mse, grad] = nn::mse_loss(pred, v);
    acc += static_cast<double>(mse);
  }
  model_.set_mode(nn::Mode::Train);
  return acc / static_cast<double>(val_set.size());
}

TrainHistory& Trainer::run(const std::vector<Tensor>& train_set, const std::vector<Tensor>& val_set,
                           const EpochCallback& on_epoch) {
  if (train_set.empty() || val_set.empty())
    throw ConfigError("train/validation splits must be non-empty");
  model_.set_mode(nn::Mode::Train);
  if (best_params_.empty()) best_params_ = model_.snapshot();

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  const int start_epoch = static_cast<int>(history_.train_loss.size());
  // re-feed recorded val losses so a resumed run keeps the stopping state
  EarlyStopper stopper(cfg_.patience, cfg_.min_delta);
  for (int e = 0; e < start_epoch; ++e) stopper.update(e + 1, history_.val_loss[e]);

  for (int epoch = start_epoch + 1; epoch <= start_epoch + cfg_.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    if (cfg_.shuffle)
      for (std::size_t i = order.size() - 1; i > 0; --i)
        std::swap(order[i], order[shuffle_rng_.next_below(i + 1)]);

    double epoch_loss = 0.0;
    std::size_t batches = 0;
    std::vector<Tensor> batch;
    for (std::size_t off = 0; off < order.size(); off += cfg_.batch_size) {
      batch.clear();
      const std::size_t end = std::min(off + cfg_.batch_size, order.size());
      for (std::size_t i = off; i < end; ++i) batch.push_back(train_set[order[i]]);
      const float loss = model_.forward_backward(batch, batch);
      adam_.step(model_.params());
      // weight each sample equally across the epoch
      epoch_loss += static_cast<double>(loss) * static_cast<double>(batch.size());
      ++batches;
    }
    epoch_loss /= static_cast<double>(order.size());

    const double val = validation_mse(val_set);
    const auto t1 = std::chrono::steady_clock::now();
    history_.train_loss.push_back(epoch_loss);
    history_.val_loss.push_back(val);
    history_.seconds.push_back(std::chrono::duration<double>(t1 - t0).count());

    const bool stop = stopper.update(epoch, val);
    if (stopper.best_epoch() == epoch) best_params_ = model_.snapshot();
    history_.best_epoch = stopper.best_epoch();

    if (on_epoch && on_epoch(epoch, epoch_loss, val)) {
      history_.stopped_epoch = epoch;
      break;
    }
    if (stop) {
      history_.stopped_epoch = epoch;
      break;
    }
    if (epoch == start_epoch + cfg_.max_epochs) history_.stopped_epoch = epoch;
  }
  model_.restore(best_params_);
  return history_;
}

void save_checkpoint(Checkpoint ck, const std::filesystem::path& path) {
  json meta = {{"format", "scae-checkpoint"},
               {"model", config::to_json(ck.model_cfg)},
               {"train", config::to_json(ck.train_cfg)},
               {"dsp", config::to_json(ck.dsp_cfg)},
               {"stats", {{"min_db", ck.stats.min_db}, {"max_db", ck.stats.max_db}}},
               {"fingerprint", ck.dsp_fingerprint},
               {"n_params", ck.params.size()},
               {"adam_t", ck.adam_t},
               {"shuffle_rng", ck.shuffle_rng_state},
               {"dropout_rng", ck.dropout_rng_state},
               {"history",
                {{"train_loss", ck.history.train_loss},
                 {"val_loss", ck.history.val_loss},
                 {"seconds", ck.history.seconds},
                 {"stopped_epoch", ck.history.stopped_epoch},
                 {"best_epoch", ck.history.best_epoch}}}};

  // tensors are moved, not copied: a baseline checkpoint is ~1.5 GB
  std::vector<ContainerEntry> entries;
  for (std::size_t i = 0; i < ck.params.size(); ++i)
    entries.push_back(ContainerEntry::take("p" + std::to_string(i), std::move(ck.params[i])));
  for (std::size_t i = 0; i < ck.adam_m.size(); ++i)
    entries.push_back(ContainerEntry::take("m" + std::to_string(i), std::move(ck.adam_m[i])));
  for (std::size_t i = 0; i < ck.adam_v.size(); ++i)
    entries.push_back(ContainerEntry::take("v" + std::to_string(i), std::move(ck.adam_v[i])));
  save_container(path, entries, meta.dump());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  auto [entries, meta_str] = load_container(path);
  json meta;
  try {
    meta = json::parse(meta_str);
  } catch (const json::exception& e) {
    throw ContainerError("bad checkpoint meta: " + std::string(e.what()));
  }
  if (meta.value("format", "") != "scae-checkpoint")
    throw ContainerError("not a checkpoint container: " + path.string());

  Checkpoint ck;
  ck.model_cfg = config::model_from_json(meta.at("model"));
  ck.train_cfg = config::train_from_json(meta.at("train"));
  ck.dsp_cfg = config::dsp_from_json(meta.at("dsp"));
  ck.stats = {meta.at("stats").at("min_db"), meta.at("stats").at("max_db")};
  ck.dsp_fingerprint = meta.value("fingerprint", "");
  ck.adam_t = meta.at("adam_t");
  ck.shuffle_rng_state = meta.at("shuffle_rng");
  ck.dropout_rng_state = meta.at("dropout_rng");
  const auto& h = meta.at("history");
  ck.history.train_loss = h.at("train_loss").get<std::vector<double>>();
  ck.history.val_loss = h.at("val_loss").get<std::vector<double>>();
  ck.history.seconds = h.at("seconds").get<std::vector<double>>();
  ck.history.stopped_epoch = h.at("stopped_epoch");
  ck.history.best_epoch = h.at("best_epoch");

  const std::size_t n_params = meta.at("n_params");
  auto take = [&](const std::string& prefix, std::vector<Tensor>& out) {
    for (std::size_t i = 0; i < n_params; ++i) {
      const std::string name = prefix + std::to_string(i);
      bool found = false;
      for (auto& e : entries)
        if (e.name == name) {
          out.push_back(e.take_f32());
          found = true;
          break;
        }
      if (!found && prefix == "p")
        throw ContainerError("checkpoint missing parameter " + name);
    }
  };
  take("p", ck.params);
  take("m", ck.adam_m);
  take("v", ck.adam_v);
  return ck;
}

std::unique_ptr<model::Autoencoder<float>> restore_model(const Checkpoint& ck) {
  Rng init_rng = Rng::substream(ck.train_cfg.seed, 0);
  auto m = model::build_model<float>(ck.model_cfg, init_rng);
  m->restore(ck.params);
  return m;
}

}  // namespace scae::train
