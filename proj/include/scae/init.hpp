#pragma once

#include <cmath>

#include "scae/rng.hpp"
#include "scae/tensor.hpp"

namespace scae {

// Glorot/Xavier uniform. fan_in/fan_out follow the usual convention:
// shape[0] is the output dimension, shape[1] the input dimension, and any
// trailing dims form the receptive field.
template <typename T = float>
TensorT<T> glorot_uniform_init(const std::vector<std::size_t>& shape, Rng& rng) {
  if (shape.size() < 2)
    throw InitError("glorot init needs rank >= 2 (biases are zero-initialized)");
  std::size_t receptive = 1;
  for (std::size_t i = 2; i < shape.size(); ++i) receptive *= shape[i];
  const double fan_out = static_cast<double>(shape[0] * receptive);
  const double fan_in = static_cast<double>(shape[1] * receptive);
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  TensorT<T> t(shape, T(0));
  for (auto& v : t.data) v = static_cast<T>(rng.uniform(-limit, limit));
  return t;
}

}  // namespace scae
