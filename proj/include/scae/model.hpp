#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "scae/nn.hpp"

namespace scae::model {

enum class Pooling { Max, Avg, None };
enum class PoolPlacement { AfterStack, AfterEach };
enum class OutputActivation { Softmax, Sigmoid };
enum class Placement { Encoder, Decoder, Both };

struct DropoutSpec {
  double p = 0.3;
  Placement placement = Placement::Both;
};

struct ModelConfig {
  int n_conv = 3;
  int kernel = 4;
  int stride = 2;
  std::vector<int> filters = {16, 32, 64};
  Pooling pooling = Pooling::Max;
  PoolPlacement pooling_placement = PoolPlacement::AfterStack;
  int latent_dim = 8192;
  bool use_dense = true;
  OutputActivation output_activation = OutputActivation::Softmax;
  std::optional<DropoutSpec> dropout;
  std::vector<std::pair<nn::RegSpec, Placement>> reg;
  int in_h = 128;
  int in_w = 256;

  void validate() const {
    if (n_conv < 1) throw ConfigError("n_conv must be >= 1");
    if (static_cast<int>(filters.size()) != n_conv)
      throw ConfigError("filters list length must equal n_conv");
    if (pooling == Pooling::None && pooling_placement == PoolPlacement::AfterEach)
      throw ConfigError("pooling=none cannot use pooling_placement=after_each");
    if (dropout && (dropout->p < 0.0 || dropout->p >= 1.0))
      throw ConfigError("dropout probability must be in [0,1)");
    for (const auto& [spec, placement] : reg)
      if (spec.lambda < 0.0) throw ConfigError("regularizer lambda must be >= 0");
  }

  /// Encoder flatten size for this geometry.
  std::size_t flatten_size() const {
    std::size_t h = in_h, w = in_w;
    for (int i = 0; i < n_conv; ++i) {
      h = nn::ceil_div(h, stride);
      w = nn::ceil_div(w, stride);
      if (pooling != Pooling::None && pooling_placement == PoolPlacement::AfterEach) {
        h = nn::ceil_div(h, 2);
        w = nn::ceil_div(w, 2);
      }
    }
    if (pooling != Pooling::None && pooling_placement == PoolPlacement::AfterStack) {
      h = nn::ceil_div(h, 2);
      w = nn::ceil_div(w, 2);
    }
    return static_cast<std::size_t>(filters.back()) * h * w;
  }
};

namespace detail {
inline bool applies(Placement p, bool encoder) {
  return p == Placement::Both || (encoder && p == Placement::Encoder) ||
         (!encoder && p == Placement::Decoder);
}
}  // namespace detail

template <typename T>
class Autoencoder {
 public:
  struct Slot {
    std::unique_ptr<nn::Layer<T>> layer;
    std::optional<nn::RegSpec> activity_reg;  // attached to this layer's output
  };

  ModelConfig cfg;
  std::vector<Slot> encoder;
  std::vector<Slot> decoder;

  void set_mode(nn::Mode m) {
    mode_ = m;
    for (auto& s : encoder) s.layer->set_mode(m);
    for (auto& s : decoder) s.layer->set_mode(m);
  }
  nn::Mode mode() const { return mode_; }

  void set_dropout_rng(Rng* rng) {
    for (auto& s : encoder) s.layer->set_rng(rng);
    for (auto& s : decoder) s.layer->set_rng(rng);
  }

  std::vector<nn::ParamRef<T>> params() {
    std::vector<nn::ParamRef<T>> out;
    auto collect = [&](std::vector<Slot>& part, const std::string& prefix) {
      for (std::size_t i = 0; i < part.size(); ++i)
        for (auto& p : part[i].layer->params())
          out.push_back({prefix + std::to_string(i) + "." + p.name, p.value, p.grad});
    };
    collect(encoder, "enc.");
    collect(decoder, "dec.");
    return out;
  }

  void zero_grads() {
    for (auto& s : encoder) s.layer->zero_grads();
    for (auto& s : decoder) s.layer->zero_grads();
  }

  TensorT<T> encode(const TensorT<T>& spec_values) {
    TensorT<T> h = as_chw(spec_values);
    for (auto& s : encoder) h = s.layer->forward(h);
    return h;
  }

  TensorT<T> decode(const TensorT<T>& latent) {
    TensorT<T> h = latent;
    for (auto& s : decoder) h = s.layer->forward(h);
    TensorT<T> out;
    out.shape = {static_cast<std::size_t>(cfg.in_h), static_cast<std::size_t>(cfg.in_w)};
    out.data = h.data;
    return out;
  }

  TensorT<T> forward(const TensorT<T>& x) { return decode(encode(x)); }

  /// Mean loss over the batch: mse + activity penalties (per sample) +
  /// kernel/bias penalties (once). Gradients accumulate into the layers.
  T forward_backward(const std::vector<TensorT<T>>& batch,
                     const std::vector<TensorT<T>>& targets) {
    if (batch.empty() || batch.size() != targets.size())
      throw ShapeError("forward_backward: batch/target size mismatch");
    zero_grads();
    const T inv_b = T(1) / static_cast<T>(batch.size());
    T total = T(0);

    const bool track_activity = has_activity_reg();
    for (std::size_t s = 0; s < batch.size(); ++s) {
      // forward with per-layer outputs cached for activity regularizers
      std::vector<TensorT<T>> enc_out(encoder.size()), dec_out(decoder.size());
      TensorT<T> h = as_chw(batch[s]);
      for (std::size_t i = 0; i < encoder.size(); ++i) {
        h = encoder[i].layer->forward(h);
        if (track_activity && encoder[i].activity_reg) enc_out[i] = h;
      }
      for (std::size_t i = 0; i < decoder.size(); ++i) {
        h = decoder[i].layer->forward(h);
        if (track_activity && decoder[i].activity_reg) dec_out[i] = h;
      }
      TensorT<T> pred;
      pred.shape = targets[s].shape;
      pred.data = h.data;

      auto [mse, dpred] = nn::mse_loss(pred, targets[s]);
      T sample_loss = mse;
      TensorT<T> d;
      d.shape = h.shape;
      d.data = std::move(dpred.data);
      for (auto& v : d.data) v *= inv_b;

      for (std::size_t i = decoder.size(); i-- > 0;) {
        if (track_activity && decoder[i].activity_reg) {
          auto [pen, dg] = nn::reg_penalty(*decoder[i].activity_reg, dec_out[i], dec_out[i].size());
          sample_loss += pen;
          for (std::size_t j = 0; j < d.size(); ++j) d.data[j] += dg.data[j] * inv_b;
        }
        d = decoder[i].layer->backward(d);
      }
      for (std::size_t i = encoder.size(); i-- > 0;) {
        if (track_activity && encoder[i].activity_reg) {
          auto [pen, dg] = nn::reg_penalty(*encoder[i].activity_reg, enc_out[i], enc_out[i].size());
          sample_loss += pen;
          for (std::size_t j = 0; j < d.size(); ++j) d.data[j] += dg.data[j] * inv_b;
        }
        d = encoder[i].layer->backward(d);
      }
      total += sample_loss;
    }
    total *= inv_b;

    for (auto& [spec, pref] : param_regs_) {
      auto [pen, dg] = nn::reg_penalty(spec, *pref.value, pref.value->size());
      total += pen;
      for (std::size_t j = 0; j < dg.size(); ++j) pref.grad->data[j] += dg.data[j];
    }
    if (!std::isfinite(static_cast<double>(total)))
      throw DivergedError("training loss is non-finite");
    return total;
  }

  std::vector<TensorT<T>> snapshot() {
    std::vector<TensorT<T>> out;
    for (auto& p : params()) out.push_back(*p.value);
    return out;
  }
  void restore(const std::vector<TensorT<T>>& snap) {
    auto ps = params();
    if (snap.size() != ps.size()) throw ShapeError("restore: parameter count mismatch");
    for (std::size_t i = 0; i < ps.size(); ++i) *ps[i].value = snap[i];
  }

  void register_param_reg(const nn::RegSpec& spec, nn::ParamRef<T> p) {
    param_regs_.emplace_back(spec, p);
  }

 private:
  bool has_activity_reg() const {
    for (const auto& s : encoder)
      if (s.activity_reg) return true;
    for (const auto& s : decoder)
      if (s.activity_reg) return true;
    return false;
  }

  TensorT<T> as_chw(const TensorT<T>& x) const {
    const std::size_t h = cfg.in_h, w = cfg.in_w;
    if (x.rank() == 3 && x.shape[0] == 1 && x.shape[1] == h && x.shape[2] == w) return x;
    if (x.rank() == 2 && x.shape[0] == h && x.shape[1] == w) {
      TensorT<T> y;
      y.shape = {1, h, w};
      y.data = x.data;
      return y;
    }
    throw ShapeError("autoencoder input must be " + std::to_string(h) + "x" + std::to_string(w) +
                     ", got " + shape_str(x.shape));
  }

  nn::Mode mode_ = nn::Mode::Train;
  std::vector<std::pair<nn::RegSpec, nn::ParamRef<T>>> param_regs_;
};

template <typename T>
std::unique_ptr<Autoencoder<T>> build_model(const ModelConfig& cfg, Rng& rng) {
  cfg.validate();
  const std::size_t flatten = cfg.flatten_size();
  if (cfg.use_dense && static_cast<std::size_t>(cfg.latent_dim) > flatten)
    throw ConfigError("latent_dim " + std::to_string(cfg.latent_dim) +
                      " exceeds encoder flatten size " + std::to_string(flatten));

  auto m = std::make_unique<Autoencoder<T>>();
  m->cfg = cfg;

  auto add = [](std::vector<typename Autoencoder<T>::Slot>& part,
                std::unique_ptr<nn::Layer<T>> l) {
    part.push_back({std::move(l), std::nullopt});
  };
  auto add_pool = [&](std::vector<typename Autoencoder<T>::Slot>& part) {
    if (cfg.pooling == Pooling::Max)
      add(part, std::make_unique<nn::MaxPool2<T>>(2));
    else
      add(part, std::make_unique<nn::AvgPool2<T>>(2));
  };
  auto add_dropout = [&](std::vector<typename Autoencoder<T>::Slot>& part, bool encoder) {
    if (cfg.dropout && detail::applies(cfg.dropout->placement, encoder))
      add(part, std::make_unique<nn::Dropout<T>>(cfg.dropout->p));
  };

  // encoder
  int ch = 1;
  std::size_t h = cfg.in_h, w = cfg.in_w;
  for (int i = 0; i < cfg.n_conv; ++i) {
    add(m->encoder, std::make_unique<nn::Conv2d<T>>(ch, cfg.filters[i], cfg.kernel, cfg.stride, rng));
    ch = cfg.filters[i];
    h = nn::ceil_div(h, cfg.stride);
    w = nn::ceil_div(w, cfg.stride);
    add(m->encoder, std::make_unique<nn::Tanh<T>>());
    add_dropout(m->encoder, true);
    if (cfg.pooling != Pooling::None && cfg.pooling_placement == PoolPlacement::AfterEach) {
      add_pool(m->encoder);
      h = nn::ceil_div(h, 2);
      w = nn::ceil_div(w, 2);
    }
  }
  if (cfg.pooling != Pooling::None && cfg.pooling_placement == PoolPlacement::AfterStack) {
    add_pool(m->encoder);
    h = nn::ceil_div(h, 2);
    w = nn::ceil_div(w, 2);
  }
  add(m->encoder, std::make_unique<nn::Flatten<T>>());
  if (cfg.use_dense) {
    add(m->encoder, std::make_unique<nn::Dense<T>>(static_cast<int>(flatten), cfg.latent_dim, rng));
    add(m->encoder, std::make_unique<nn::Tanh<T>>());
    add_dropout(m->encoder, true);
  }

  // decoder mirrors the encoder
  if (cfg.use_dense) {
    add(m->decoder, std::make_unique<nn::Dense<T>>(cfg.latent_dim, static_cast<int>(flatten), rng));
    add(m->decoder, std::make_unique<nn::Tanh<T>>());
    add_dropout(m->decoder, false);
  }
  add(m->decoder, std::make_unique<nn::Reshape<T>>(std::vector<std::size_t>{
                      static_cast<std::size_t>(cfg.filters.back()), h, w}));
  if (cfg.pooling != Pooling::None && cfg.pooling_placement == PoolPlacement::AfterStack)
    add(m->decoder, std::make_unique<nn::Upsample2<T>>());
  for (int i = cfg.n_conv - 1; i >= 0; --i) {
    if (cfg.pooling != Pooling::None && cfg.pooling_placement == PoolPlacement::AfterEach)
      add(m->decoder, std::make_unique<nn::Upsample2<T>>());
    const int out_ch = i == 0 ? 1 : cfg.filters[i - 1];
    add(m->decoder,
        std::make_unique<nn::ConvTranspose2d<T>>(cfg.filters[i], out_ch, cfg.kernel, cfg.stride, rng));
    if (i > 0) {
      add(m->decoder, std::make_unique<nn::Tanh<T>>());
      add_dropout(m->decoder, false);
    }
  }
  if (cfg.output_activation == OutputActivation::Softmax)
    add(m->decoder, std::make_unique<nn::Softmax<T>>(1));  // along the mel axis, per frame
  else
    add(m->decoder, std::make_unique<nn::Sigmoid<T>>());

  // attach regularizers
  for (const auto& [spec, placement] : cfg.reg) {
    auto attach_part = [&](std::vector<typename Autoencoder<T>::Slot>& part) {
      for (auto& slot : part) {
        const std::string kind = slot.layer->kind();
        const bool linear = kind == "conv2d" || kind == "conv2d_transpose" || kind == "dense";
        if (!linear) continue;
        if (spec.attach == nn::RegAttach::Activity) {
          slot.activity_reg = spec;
        } else {
          for (auto& p : slot.layer->params()) {
            if (spec.attach == nn::RegAttach::Kernel && p.name == "W")
              m->register_param_reg(spec, p);
            if (spec.attach == nn::RegAttach::Bias && p.name == "b")
              m->register_param_reg(spec, p);
          }
        }
      }
    };
    if (detail::applies(placement, true)) attach_part(m->encoder);
    if (detail::applies(placement, false)) attach_part(m->decoder);
  }

  m->set_mode(nn::Mode::Train);
  return m;
}

}  // namespace scae::model
