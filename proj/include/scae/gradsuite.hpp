#pragma once

#include <string>
#include <vector>

#include "scae/model.hpp"
#include "scae/nn.hpp"

namespace scae::gradsuite {

struct Result {
  std::string name;
  double max_rel_err = 0.0;
  double threshold = 0.0;
  bool pass() const { return max_rel_err < threshold; }
};

namespace detail {

/// Wrapper that corrupts a layer's analytic gradients (negative-control
/// fixture for the gradcheck gate).
class Corrupted : public nn::Layer<double> {
 public:
  explicit Corrupted(std::unique_ptr<nn::Layer<double>> inner) : inner_(std::move(inner)) {}
  const char* kind() const override { return inner_->kind(); }
  TensorT<double> forward(const TensorT<double>& x) override { return inner_->forward(x); }
  TensorT<double> backward(const TensorT<double>& dy) override {
    auto dx = inner_->backward(dy);
    for (auto& v : dx.data) v *= 1.01;
    return dx;
  }
  std::vector<nn::ParamRef<double>> params() override { return inner_->params(); }

 private:
  std::unique_ptr<nn::Layer<double>> inner_;
};

inline TensorT<double> random_input(const std::vector<std::size_t>& shape, Rng& rng) {
  TensorT<double> t(shape, 0.0);
  for (auto& v : t.data) v = rng.uniform(-1.0, 1.0);
  return t;
}

}  // namespace detail

/// Central-difference checks for every layer kind plus the full tiny
/// encoder/decoder composite, in 64-bit mode. `fault_kind` corrupts the
/// named layer's backward so the suite must fail (negative control).
inline std::vector<Result> run(double eps = 1e-5, const std::string& fault_kind = "") {
  std::vector<Result> results;
  Rng rng(42);

  auto maybe_corrupt = [&](std::unique_ptr<nn::Layer<double>> l)
      -> std::unique_ptr<nn::Layer<double>> {
    if (!fault_kind.empty() && fault_kind == l->kind())
      return std::make_unique<detail::Corrupted>(std::move(l));
    return l;
  };

  auto check = [&](const std::string& name, std::unique_ptr<nn::Layer<double>> layer,
                   const std::vector<std::size_t>& in_shape, double threshold) {
    auto l = maybe_corrupt(std::move(layer));
    auto x = detail::random_input(in_shape, rng);
    auto rep = nn::gradcheck({l.get()}, x, eps);
    results.push_back({name, rep.max_rel_err, threshold});
  };

  check("dense", std::make_unique<nn::Dense<double>>(6, 5, rng), {6}, 1e-8);
  check("tanh", std::make_unique<nn::Tanh<double>>(), {2, 4, 4}, 1e-8);
  check("sigmoid", std::make_unique<nn::Sigmoid<double>>(), {2, 4, 4}, 1e-8);
  check("softmax", std::make_unique<nn::Softmax<double>>(1), {1, 6, 3}, 1e-8);
  check("conv2d", std::make_unique<nn::Conv2d<double>>(1, 2, 4, 2, rng), {1, 6, 6}, 1e-6);
  check("conv2d_stride1", std::make_unique<nn::Conv2d<double>>(2, 3, 3, 1, rng), {2, 5, 5}, 1e-6);
  check("conv2d_transpose", std::make_unique<nn::ConvTranspose2d<double>>(2, 1, 4, 2, rng),
        {2, 3, 3}, 1e-6);
  check("maxpool2d", std::make_unique<nn::MaxPool2<double>>(2), {2, 4, 4}, 1e-6);
  check("avgpool2d", std::make_unique<nn::AvgPool2<double>>(2), {2, 4, 4}, 1e-8);
  check("upsample2", std::make_unique<nn::Upsample2<double>>(), {2, 3, 3}, 1e-8);

  // full encoder/decoder composite on a tiny 16x16 geometry
  {
    model::ModelConfig cfg;
    cfg.in_h = 16;
    cfg.in_w = 16;
    cfg.filters = {2, 3, 4};
    cfg.latent_dim = 4;
    Rng mrng(7);
    auto m = model::build_model<double>(cfg, mrng);
    m->set_mode(nn::Mode::Eval);
    std::vector<nn::Layer<double>*> chain;
    for (auto& s : m->encoder) chain.push_back(s.layer.get());
    for (auto& s : m->decoder) chain.push_back(s.layer.get());
    TensorT<double> x({1, 16, 16}, 0.0);
    Rng xr(3);
    for (auto& v : x.data) v = xr.uniform(0.0, 1.0);
    // the deep chain needs a larger step: central-difference round-off
    // grows as 1/eps and would swamp the tiny bottleneck gradients
    auto rep = nn::gradcheck(chain, x, eps * 10.0);
    results.push_back({"composite", rep.max_rel_err, 1e-5});
  }
  return results;
}

}  // namespace scae::gradsuite
