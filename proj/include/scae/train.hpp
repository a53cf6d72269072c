#pragma once

#include <array>
#include <functional>
#include <memory>
#include <tuple>

#include "scae/config.hpp"
#include "scae/model.hpp"

namespace scae::train {

using config::TrainConfig;

struct TrainHistory {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  std::vector<double> seconds;  // wall clock, excluded from determinism contracts
  int stopped_epoch = 0;        // 1-based; 0 while still running
  int best_epoch = 0;

  std::string to_csv() const;
};

/// Deterministic shuffled 80/10/10-style split; floor-based sizes with the
/// remainder going to train. Partition is disjoint and exhaustive.
std::tuple<std::vector<std::string>, std::vector<std::string>, std::vector<std::string>>
split_dataset(const std::vector<std::string>& ids, std::array<double, 3> ratios,
              std::uint64_t seed);

/// Validation-loss early stopping: stop after `patience` consecutive epochs
/// without an improvement of more than min_delta; best epoch tracked.
class EarlyStopper {
 public:
  EarlyStopper(int patience, double min_delta) : patience_(patience), min_delta_(min_delta) {}

  /// Feed one epoch's validation loss (1-based epoch); returns true when
  /// training should stop.
  bool update(int epoch, double val_loss) {
    if (best_epoch_ == 0 || val_loss < best_val_ - min_delta_) {
      best_val_ = val_loss;
      best_epoch_ = epoch;
      bad_epochs_ = 0;
      return false;
    }
    ++bad_epochs_;
    return patience_ > 0 && bad_epochs_ >= patience_;
  }

  int best_epoch() const { return best_epoch_; }
  double best_val() const { return best_val_; }

 private:
  int patience_;
  double min_delta_;
  double best_val_ = 0.0;
  int best_epoch_ = 0;
  int bad_epochs_ = 0;
};

/// Epoch callback; return true to request a stop (used by overfit gates).
using EpochCallback = std::function<bool(int epoch, double train_loss, double val_loss)>;

class Trainer {
 public:
  Trainer(model::Autoencoder<float>& m, TrainConfig cfg);

  /// Runs up to cfg.max_epochs more epochs. Restores best-validation
  /// parameters on early stop (or at the end of training).
  TrainHistory& run(const std::vector<Tensor>& train_set, const std::vector<Tensor>& val_set,
                    const EpochCallback& on_epoch = nullptr);

  double validation_mse(const std::vector<Tensor>& val_set);

  TrainHistory& history() { return history_; }
  nn::Adam<float>& optimizer() { return adam_; }
  Rng& shuffle_rng() { return shuffle_rng_; }
  Rng& dropout_rng() { return dropout_rng_; }
  const std::vector<Tensor>& best_params() const { return best_params_; }

 private:
  model::Autoencoder<float>& model_;
  TrainConfig cfg_;
  nn::Adam<float> adam_;
  Rng shuffle_rng_;
  Rng dropout_rng_;
  TrainHistory history_;
  std::vector<Tensor> best_params_;
};

struct Checkpoint {
  model::ModelConfig model_cfg;
  TrainConfig train_cfg;
  dsp::DspConfig dsp_cfg;
  dsp::NormStats stats;
  std::string dsp_fingerprint;
  TrainHistory history;
  std::vector<Tensor> params;
  std::vector<Tensor> adam_m, adam_v;
  std::uint64_t adam_t = 0;
  std::array<std::uint64_t, 4> shuffle_rng_state{};
  std::array<std::uint64_t, 4> dropout_rng_state{};
};

/// Takes the checkpoint by value and moves its tensors into the container
/// entries; pass with std::move to avoid a full copy.
void save_checkpoint(Checkpoint ck, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Rebuilds the model from a checkpoint and installs its parameters.
std::unique_ptr<model::Autoencoder<float>> restore_model(const Checkpoint& ck);

}  // namespace scae::train
