#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace scae {

struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InitError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ContainerError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DegenerateStatsError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct StaleCacheError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct FingerprintError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DivergedError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Dense n-dimensional array, row-major, value-semantic.
template <typename T>
struct TensorT {
  std::vector<std::size_t> shape;
  std::vector<T> data;

  TensorT() = default;
  TensorT(std::vector<std::size_t> s, T fill) : shape(std::move(s)) {
    if (shape.empty()) throw ShapeError("tensor shape must be non-empty");
    std::size_t n = 1;
    for (auto d : shape) {
      if (d == 0) throw ShapeError("tensor dims must be >= 1");
      n *= d;
    }
    data.assign(n, fill);
  }

  std::size_t size() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }

  T& operator()(std::size_t i) { return data[i]; }
  T operator()(std::size_t i) const { return data[i]; }
  T& operator()(std::size_t i, std::size_t j) { return data[i * shape[1] + j]; }
  T operator()(std::size_t i, std::size_t j) const { return data[i * shape[1] + j]; }
  T& operator()(std::size_t i, std::size_t j, std::size_t k) {
    return data[(i * shape[1] + j) * shape[2] + k];
  }
  T operator()(std::size_t i, std::size_t j, std::size_t k) const {
    return data[(i * shape[1] + j) * shape[2] + k];
  }
  T& operator()(std::size_t i, std::size_t j, std::size_t k, std::size_t l) {
    return data[((i * shape[1] + j) * shape[2] + k) * shape[3] + l];
  }
  T operator()(std::size_t i, std::size_t j, std::size_t k, std::size_t l) const {
    return data[((i * shape[1] + j) * shape[2] + k) * shape[3] + l];
  }

  void fill(T v) { std::fill(data.begin(), data.end(), v); }

  bool same_shape(const TensorT& o) const { return shape == o.shape; }

  bool all_finite() const {
    for (T v : data)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  template <typename U>
  TensorT<U> cast() const {
    TensorT<U> out;
    out.shape = shape;
    out.data.resize(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
    return out;
  }

  bool operator==(const TensorT& o) const { return shape == o.shape && data == o.data; }
};

using Tensor = TensorT<float>;
using Tensor64 = TensorT<double>;

template <typename T>
TensorT<T> tensor_create(const std::vector<std::size_t>& shape, T fill) {
  if (!std::isfinite(static_cast<double>(fill))) throw ShapeError("fill must be finite");
  return TensorT<T>(shape, fill);
}

inline std::string shape_str(const std::vector<std::size_t>& s) {
  std::string r = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) r += ",";
    r += std::to_string(s[i]);
  }
  return r + "]";
}

}  // namespace scae
