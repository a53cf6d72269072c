#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "scae/init.hpp"
#include "scae/rng.hpp"
#include "scae/tensor.hpp"

namespace scae::nn {

enum class Mode { Train, Eval };

template <typename T>
struct ParamRef {
  std::string name;
  TensorT<T>* value;
  TensorT<T>* grad;
};

template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;
  virtual const char* kind() const = 0;
  virtual TensorT<T> forward(const TensorT<T>& x) = 0;
  virtual TensorT<T> backward(const TensorT<T>& dy) = 0;
  virtual std::vector<ParamRef<T>> params() { return {}; }
  virtual void set_mode(Mode) {}
  virtual void set_rng(Rng*) {}
  void zero_grads() {
    for (auto& p : params()) p.grad->fill(T(0));
  }
};

// TF-style "same" padding: total pad so that out = ceil(in/stride),
// split floor-left / ceil-right.
struct Padding {
  int before = 0;
  int after = 0;
  static Padding same(int in, int kernel, int stride) {
    int rem = in % stride;
    int total = rem == 0 ? std::max(kernel - stride, 0) : std::max(kernel - rem, 0);
    return {total / 2, total - total / 2};
  }
};

inline std::size_t ceil_div(std::size_t a, int b) { return (a + b - 1) / b; }

namespace detail {
// Indices i in [lo, hi) with 0 <= i*stride + off < limit; lets the conv
// loops skip per-pixel boundary checks entirely.
struct IdxRange {
  int lo, hi;
};
inline IdxRange valid_range(int off, int limit, int stride, int n) {
  const int lo = off < 0 ? (-off + stride - 1) / stride : 0;
  const int hi = off >= limit ? 0 : std::min(n, (limit - 1 - off) / stride + 1);
  return {lo, std::max(lo, hi)};
}
}  // namespace detail

template <typename T>
class Conv2d : public Layer<T> {
 public:
  Conv2d(int in_ch, int out_ch, int kernel, int stride, Rng& rng)
      : in_ch_(in_ch), out_ch_(out_ch), k_(kernel), stride_(stride) {
    w_ = glorot_uniform_init<T>({static_cast<std::size_t>(out_ch),
                                 static_cast<std::size_t>(in_ch),
                                 static_cast<std::size_t>(kernel),
                                 static_cast<std::size_t>(kernel)},
                                rng);
    b_ = TensorT<T>({static_cast<std::size_t>(out_ch)}, T(0));
    dw_ = TensorT<T>(w_.shape, T(0));
    db_ = TensorT<T>(b_.shape, T(0));
  }

  const char* kind() const override { return "conv2d"; }

  TensorT<T> forward(const TensorT<T>& x) override {
    if (x.rank() != 3 || static_cast<int>(x.shape[0]) != in_ch_)
      throw ShapeError("conv2d: expected " + std::to_string(in_ch_) + " input channels, got " +
                       shape_str(x.shape));
    x_ = x;
    const int H = static_cast<int>(x.shape[1]), W = static_cast<int>(x.shape[2]);
    ph_ = Padding::same(H, k_, stride_);
    pw_ = Padding::same(W, k_, stride_);
    if (k_ > H + ph_.before + ph_.after || k_ > W + pw_.before + pw_.after)
      throw ShapeError("conv2d: kernel larger than padded input");
    const int Ho = static_cast<int>(ceil_div(H, stride_)), Wo = static_cast<int>(ceil_div(W, stride_));
    TensorT<T> y({static_cast<std::size_t>(out_ch_), static_cast<std::size_t>(Ho),
                  static_cast<std::size_t>(Wo)},
                 T(0));
    const T* xp = x_.data.data();
    T* yp = y.data.data();
#pragma omp parallel for schedule(static)
    for (int co = 0; co < out_ch_; ++co) {
      for (int i = 0; i < Ho; ++i) {
        T* yr = yp + (static_cast<std::size_t>(co) * Ho + i) * Wo;
        for (int j = 0; j < Wo; ++j) yr[j] = b_.data[co];
      }
      for (int ci = 0; ci < in_ch_; ++ci)
        for (int a = 0; a < k_; ++a) {
          const auto ir = detail::valid_range(a - ph_.before, H, stride_, Ho);
          for (int bb = 0; bb < k_; ++bb) {
            const auto jr = detail::valid_range(bb - pw_.before, W, stride_, Wo);
            const T wv = w_(co, ci, a, bb);
            for (int i = ir.lo; i < ir.hi; ++i) {
              const int h = i * stride_ + a - ph_.before;
              const T* xr = xp + (static_cast<std::size_t>(ci) * H + h) * W + (bb - pw_.before);
              T* yr = yp + (static_cast<std::size_t>(co) * Ho + i) * Wo;
              for (int j = jr.lo; j < jr.hi; ++j) yr[j] += wv * xr[j * stride_];
            }
          }
        }
    }
    return y;
  }

  TensorT<T> backward(const TensorT<T>& dy) override {
    const int H = static_cast<int>(x_.shape[1]), W = static_cast<int>(x_.shape[2]);
    const int Ho = static_cast<int>(dy.shape[1]), Wo = static_cast<int>(dy.shape[2]);
    TensorT<T> dx(x_.shape, T(0));
    const T* xp = x_.data.data();
    const T* dyp = dy.data.data();
    T* dxp = dx.data.data();
#pragma omp parallel for schedule(static)
    for (int ci = 0; ci < in_ch_; ++ci) {
      for (int co = 0; co < out_ch_; ++co)
        for (int a = 0; a < k_; ++a) {
          const auto ir = detail::valid_range(a - ph_.before, H, stride_, Ho);
          for (int bb = 0; bb < k_; ++bb) {
            const auto jr = detail::valid_range(bb - pw_.before, W, stride_, Wo);
            const T wv = w_(co, ci, a, bb);
            for (int i = ir.lo; i < ir.hi; ++i) {
              const int h = i * stride_ + a - ph_.before;
              T* dxr = dxp + (static_cast<std::size_t>(ci) * H + h) * W + (bb - pw_.before);
              const T* dyr = dyp + (static_cast<std::size_t>(co) * Ho + i) * Wo;
              for (int j = jr.lo; j < jr.hi; ++j) dxr[j * stride_] += wv * dyr[j];
            }
          }
        }
    }
#pragma omp parallel for schedule(static)
    for (int co = 0; co < out_ch_; ++co) {
      for (int ci = 0; ci < in_ch_; ++ci)
        for (int a = 0; a < k_; ++a) {
          const auto ir = detail::valid_range(a - ph_.before, H, stride_, Ho);
          for (int bb = 0; bb < k_; ++bb) {
            const auto jr = detail::valid_range(bb - pw_.before, W, stride_, Wo);
            T acc = T(0);
            for (int i = ir.lo; i < ir.hi; ++i) {
              const int h = i * stride_ + a - ph_.before;
              const T* xr = xp + (static_cast<std::size_t>(ci) * H + h) * W + (bb - pw_.before);
              const T* dyr = dyp + (static_cast<std::size_t>(co) * Ho + i) * Wo;
              for (int j = jr.lo; j < jr.hi; ++j) acc += dyr[j] * xr[j * stride_];
            }
            dw_(co, ci, a, bb) += acc;
          }
        }
      T acc = T(0);
      for (int i = 0; i < Ho; ++i)
        for (int j = 0; j < Wo; ++j) acc += dy(co, i, j);
      db_.data[co] += acc;
    }
    return dx;
  }

  std::vector<ParamRef<T>> params() override { return {{"W", &w_, &dw_}, {"b", &b_, &db_}}; }

  TensorT<T>& weights() { return w_; }
  TensorT<T>& bias() { return b_; }

 private:
  int in_ch_, out_ch_, k_, stride_;
  TensorT<T> w_, b_, dw_, db_, x_;
  Padding ph_, pw_;
};

// Exact adjoint of a matching stride-s same-padded Conv2d: output spatial
// dims are stride x input dims, kernel stored as [in_ch, out_ch, k, k].
template <typename T>
class ConvTranspose2d : public Layer<T> {
 public:
  ConvTranspose2d(int in_ch, int out_ch, int kernel, int stride, Rng& rng)
      : in_ch_(in_ch), out_ch_(out_ch), k_(kernel), stride_(stride) {
    w_ = glorot_uniform_init<T>({static_cast<std::size_t>(in_ch),
                                 static_cast<std::size_t>(out_ch),
                                 static_cast<std::size_t>(kernel),
                                 static_cast<std::size_t>(kernel)},
                                rng);
    b_ = TensorT<T>({static_cast<std::size_t>(out_ch)}, T(0));
    dw_ = TensorT<T>(w_.shape, T(0));
    db_ = TensorT<T>(b_.shape, T(0));
  }

  const char* kind() const override { return "conv2d_transpose"; }

  TensorT<T> forward(const TensorT<T>& x) override {
    if (x.rank() != 3 || static_cast<int>(x.shape[0]) != in_ch_)
      throw ShapeError("conv2d_transpose: expected " + std::to_string(in_ch_) +
                       " input channels, got " + shape_str(x.shape));
    x_ = x;
    const int Hi = static_cast<int>(x.shape[1]), Wi = static_cast<int>(x.shape[2]);
    const int Ho = Hi * stride_, Wo = Wi * stride_;
    ph_ = Padding::same(Ho, k_, stride_);
    pw_ = Padding::same(Wo, k_, stride_);
    TensorT<T> y({static_cast<std::size_t>(out_ch_), static_cast<std::size_t>(Ho),
                  static_cast<std::size_t>(Wo)},
                 T(0));
    const T* xp = x_.data.data();
    T* yp = y.data.data();
#pragma omp parallel for schedule(static)
    for (int co = 0; co < out_ch_; ++co) {
      for (int ci = 0; ci < in_ch_; ++ci)
        for (int a = 0; a < k_; ++a) {
          const auto ir = detail::valid_range(a - ph_.before, Ho, stride_, Hi);
          for (int bb = 0; bb < k_; ++bb) {
            const auto jr = detail::valid_range(bb - pw_.before, Wo, stride_, Wi);
            const T wv = w_(ci, co, a, bb);
            for (int i = ir.lo; i < ir.hi; ++i) {
              const int h = i * stride_ + a - ph_.before;
              T* yr = yp + (static_cast<std::size_t>(co) * Ho + h) * Wo + (bb - pw_.before);
              const T* xr = xp + (static_cast<std::size_t>(ci) * Hi + i) * Wi;
              for (int j = jr.lo; j < jr.hi; ++j) yr[j * stride_] += wv * xr[j];
            }
          }
        }
      for (int h = 0; h < Ho; ++h)
        for (int w = 0; w < Wo; ++w) y(co, h, w) += b_.data[co];
    }
    return y;
  }

  TensorT<T> backward(const TensorT<T>& dy) override {
    const int Hi = static_cast<int>(x_.shape[1]), Wi = static_cast<int>(x_.shape[2]);
    const int Ho = Hi * stride_, Wo = Wi * stride_;
    TensorT<T> dx(x_.shape, T(0));
    const T* xp = x_.data.data();
    const T* dyp = dy.data.data();
    T* dxp = dx.data.data();
#pragma omp parallel for schedule(static)
    for (int ci = 0; ci < in_ch_; ++ci) {
      for (int co = 0; co < out_ch_; ++co)
        for (int a = 0; a < k_; ++a) {
          const auto ir = detail::valid_range(a - ph_.before, Ho, stride_, Hi);
          for (int bb = 0; bb < k_; ++bb) {
            const auto jr = detail::valid_range(bb - pw_.before, Wo, stride_, Wi);
            const T wv = w_(ci, co, a, bb);
            for (int i = ir.lo; i < ir.hi; ++i) {
              const int h = i * stride_ + a - ph_.before;
              T* dxr = dxp + (static_cast<std::size_t>(ci) * Hi + i) * Wi;
              const T* dyr = dyp + (static_cast<std::size_t>(co) * Ho + h) * Wo + (bb - pw_.before);
              for (int j = jr.lo; j < jr.hi; ++j) dxr[j] += wv * dyr[j * stride_];
            }
          }
        }
      for (int co = 0; co < out_ch_; ++co)
        for (int a = 0; a < k_; ++a) {
          const auto ir = detail::valid_range(a - ph_.before, Ho, stride_, Hi);
          for (int bb = 0; bb < k_; ++bb) {
            const auto jr = detail::valid_range(bb - pw_.before, Wo, stride_, Wi);
            T acc = T(0);
            for (int i = ir.lo; i < ir.hi; ++i) {
              const int h = i * stride_ + a - ph_.before;
              const T* xr = xp + (static_cast<std::size_t>(ci) * Hi + i) * Wi;
              const T* dyr = dyp + (static_cast<std::size_t>(co) * Ho + h) * Wo + (bb - pw_.before);
              for (int j = jr.lo; j < jr.hi; ++j) acc += xr[j] * dyr[j * stride_];
            }
            dw_(ci, co, a, bb) += acc;
          }
        }
    }
    for (int co = 0; co < out_ch_; ++co) {
      T acc = T(0);
      for (int h = 0; h < Ho; ++h)
        for (int w = 0; w < Wo; ++w) acc += dy(co, h, w);
      db_.data[co] += acc;
    }
    return dx;
  }

  std::vector<ParamRef<T>> params() override { return {{"W", &w_, &dw_}, {"b", &b_, &db_}}; }

  TensorT<T>& weights() { return w_; }

 private:
  int in_ch_, out_ch_, k_, stride_;
  TensorT<T> w_, b_, dw_, db_, x_;
  Padding ph_, pw_;
};

template <typename T>
class MaxPool2 : public Layer<T> {
 public:
  explicit MaxPool2(int size = 2) : size_(size) {}
  const char* kind() const override { return "maxpool2d"; }

  TensorT<T> forward(const TensorT<T>& x) override {
    const int C = static_cast<int>(x.shape[0]);
    in_shape_ = x.shape;
    const int Ho = static_cast<int>(ceil_div(x.shape[1], size_));
    const int Wo = static_cast<int>(ceil_div(x.shape[2], size_));
    TensorT<T> y({static_cast<std::size_t>(C), static_cast<std::size_t>(Ho),
                  static_cast<std::size_t>(Wo)},
                 T(0));
    arg_.assign(y.size(), 0);
    const int H = static_cast<int>(x.shape[1]), W = static_cast<int>(x.shape[2]);
    std::size_t idx = 0;
    for (int c = 0; c < C; ++c)
      for (int i = 0; i < Ho; ++i)
        for (int j = 0; j < Wo; ++j, ++idx) {
          T best = -std::numeric_limits<T>::infinity();
          std::size_t best_at = 0;
          for (int a = 0; a < size_; ++a)
            for (int b = 0; b < size_; ++b) {
              const int h = i * size_ + a, w = j * size_ + b;
              if (h >= H || w >= W) continue;
              if (x(c, h, w) > best) {
                best = x(c, h, w);
                best_at = (static_cast<std::size_t>(c) * H + h) * W + w;
              }
            }
          y(c, i, j) = best;
          arg_[idx] = best_at;
        }
    return y;
  }

  TensorT<T> backward(const TensorT<T>& dy) override {
    TensorT<T> dx(in_shape_, T(0));
    for (std::size_t i = 0; i < dy.size(); ++i) dx.data[arg_[i]] += dy.data[i];
    return dx;
  }

 private:
  int size_;
  std::vector<std::size_t> in_shape_;
  std::vector<std::size_t> arg_;
};

template <typename T>
class AvgPool2 : public Layer<T> {
 public:
  explicit AvgPool2(int size = 2) : size_(size) {}
  const char* kind() const override { return "avgpool2d"; }

  TensorT<T> forward(const TensorT<T>& x) override {
    in_shape_ = x.shape;
    const int C = static_cast<int>(x.shape[0]);
    const int H = static_cast<int>(x.shape[1]), W = static_cast<int>(x.shape[2]);
    const int Ho = static_cast<int>(ceil_div(x.shape[1], size_));
    const int Wo = static_cast<int>(ceil_div(x.shape[2], size_));
    TensorT<T> y({static_cast<std::size_t>(C), static_cast<std::size_t>(Ho),
                  static_cast<std::size_t>(Wo)},
                 T(0));
    const T inv = T(1) / static_cast<T>(size_ * size_);
    for (int c = 0; c < C; ++c)
      for (int i = 0; i < Ho; ++i)
        for (int j = 0; j < Wo; ++j) {
          T acc = T(0);
          for (int a = 0; a < size_; ++a)
            for (int b = 0; b < size_; ++b) {
              const int h = i * size_ + a, w = j * size_ + b;
              if (h < H && w < W) acc += x(c, h, w);
            }
          y(c, i, j) = acc * inv;
        }
    return y;
  }

  TensorT<T> backward(const TensorT<T>& dy) override {
    TensorT<T> dx(in_shape_, T(0));
    const int H = static_cast<int>(in_shape_[1]), W = static_cast<int>(in_shape_[2]);
    const int Ho = static_cast<int>(dy.shape[1]), Wo = static_cast<int>(dy.shape[2]);
    const T inv = T(1) / static_cast<T>(size_ * size_);
    for (int c = 0; c < static_cast<int>(in_shape_[0]); ++c)
      for (int i = 0; i < Ho; ++i)
        for (int j = 0; j < Wo; ++j)
          for (int a = 0; a < size_; ++a)
            for (int b = 0; b < size_; ++b) {
              const int h = i * size_ + a, w = j * size_ + b;
              if (h < H && w < W) dx(c, h, w) += dy(c, i, j) * inv;
            }
    return dx;
  }

 private:
  int size_;
  std::vector<std::size_t> in_shape_;
};

/// Nearest-neighbor 2x upsampling, the decoder-side mirror of a 2x pool.
template <typename T>
class Upsample2 : public Layer<T> {
 public:
  const char* kind() const override { return "upsample2"; }

  TensorT<T> forward(const TensorT<T>& x) override {
    in_shape_ = x.shape;
    const int C = static_cast<int>(x.shape[0]);
    const int H = static_cast<int>(x.shape[1]), W = static_cast<int>(x.shape[2]);
    TensorT<T> y({static_cast<std::size_t>(C), static_cast<std::size_t>(2 * H),
                  static_cast<std::size_t>(2 * W)},
                 T(0));
    for (int c = 0; c < C; ++c)
      for (int i = 0; i < H; ++i)
        for (int j = 0; j < W; ++j) {
          const T v = x(c, i, j);
          y(c, 2 * i, 2 * j) = v;
          y(c, 2 * i, 2 * j + 1) = v;
          y(c, 2 * i + 1, 2 * j) = v;
          y(c, 2 * i + 1, 2 * j + 1) = v;
        }
    return y;
  }

  TensorT<T> backward(const TensorT<T>& dy) override {
    TensorT<T> dx(in_shape_, T(0));
    const int C = static_cast<int>(in_shape_[0]);
    const int H = static_cast<int>(in_shape_[1]), W = static_cast<int>(in_shape_[2]);
    for (int c = 0; c < C; ++c)
      for (int i = 0; i < H; ++i)
        for (int j = 0; j < W; ++j)
          dx(c, i, j) = dy(c, 2 * i, 2 * j) + dy(c, 2 * i, 2 * j + 1) + dy(c, 2 * i + 1, 2 * j) +
                        dy(c, 2 * i + 1, 2 * j + 1);
    return dx;
  }

 private:
  std::vector<std::size_t> in_shape_;
};

template <typename T>
class Dense : public Layer<T> {
 public:
  Dense(int in_dim, int out_dim, Rng& rng) : in_(in_dim), out_(out_dim) {
    w_ = glorot_uniform_init<T>(
        {static_cast<std::size_t>(out_dim), static_cast<std::size_t>(in_dim)}, rng);
    b_ = TensorT<T>({static_cast<std::size_t>(out_dim)}, T(0));
    dw_ = TensorT<T>(w_.shape, T(0));
    db_ = TensorT<T>(b_.shape, T(0));
  }

  const char* kind() const override { return "dense"; }

  TensorT<T> forward(const TensorT<T>& x) override {
    if (x.size() != static_cast<std::size_t>(in_))
      throw ShapeError("dense: expected input of length " + std::to_string(in_) + ", got " +
                       shape_str(x.shape));
    x_ = x;
    TensorT<T> y({static_cast<std::size_t>(out_)}, T(0));
    const T* xd = x_.data.data();
#pragma omp parallel for schedule(static)
    for (int o = 0; o < out_; ++o) {
      const T* wr = &w_.data[static_cast<std::size_t>(o) * in_];
      // 8 independent partial sums so the reduction vectorizes; summed in
      // a fixed order to stay deterministic
      T acc[8] = {};
      int i = 0;
      for (; i + 8 <= in_; i += 8)
        for (int k = 0; k < 8; ++k) acc[k] += wr[i + k] * xd[i + k];
      T total = b_.data[o];
      for (int k = 0; k < 8; ++k) total += acc[k];
      for (; i < in_; ++i) total += wr[i] * xd[i];
      y.data[o] = total;
    }
    return y;
  }

  TensorT<T> backward(const TensorT<T>& dy) override {
    // dx = W^T dy accumulated row by row: walking W column-wise would
    // cache-miss on every element of a large matrix
    TensorT<T> dx(x_.shape, T(0));
    T* dxd = dx.data.data();
    for (int o = 0; o < out_; ++o) {
      const T g = dy.data[o];
      if (g == T(0)) continue;
      const T* wr = &w_.data[static_cast<std::size_t>(o) * in_];
      for (int i = 0; i < in_; ++i) dxd[i] += g * wr[i];
    }
#pragma omp parallel for schedule(static)
    for (int o = 0; o < out_; ++o) {
      T* dwr = &dw_.data[static_cast<std::size_t>(o) * in_];
      const T g = dy.data[o];
      const T* xd = x_.data.data();
      for (int i = 0; i < in_; ++i) dwr[i] += g * xd[i];
      db_.data[o] += g;
    }
    return dx;
  }

  std::vector<ParamRef<T>> params() override { return {{"W", &w_, &dw_}, {"b", &b_, &db_}}; }

  TensorT<T>& weights() { return w_; }
  TensorT<T>& bias() { return b_; }

 private:
  int in_, out_;
  TensorT<T> w_, b_, dw_, db_, x_;
};

template <typename T>
class Tanh : public Layer<T> {
 public:
  const char* kind() const override { return "tanh"; }
  TensorT<T> forward(const TensorT<T>& x) override {
    y_ = x;
    for (auto& v : y_.data) v = std::tanh(v);
    return y_;
  }
  TensorT<T> backward(const TensorT<T>& dy) override {
    TensorT<T> dx = dy;
    for (std::size_t i = 0; i < dx.size(); ++i) dx.data[i] *= T(1) - y_.data[i] * y_.data[i];
    return dx;
  }

 private:
  TensorT<T> y_;
};

template <typename T>
class Sigmoid : public Layer<T> {
 public:
  const char* kind() const override { return "sigmoid"; }
  TensorT<T> forward(const TensorT<T>& x) override {
    y_ = x;
    for (auto& v : y_.data) v = T(1) / (T(1) + std::exp(-v));
    return y_;
  }
  TensorT<T> backward(const TensorT<T>& dy) override {
    TensorT<T> dx = dy;
    for (std::size_t i = 0; i < dx.size(); ++i) dx.data[i] *= y_.data[i] * (T(1) - y_.data[i]);
    return dx;
  }

 private:
  TensorT<T> y_;
};

/// Softmax along one axis, max-subtracted for stability.
template <typename T>
class Softmax : public Layer<T> {
 public:
  explicit Softmax(int axis) : axis_(axis) {}
  const char* kind() const override { return "softmax"; }

  TensorT<T> forward(const TensorT<T>& x) override {
    if (axis_ < 0 || axis_ >= static_cast<int>(x.rank()))
      throw ShapeError("softmax: axis out of range for rank " + std::to_string(x.rank()));
    y_ = x;
    for_each_line(x.shape, [&](std::size_t base, std::size_t stride, std::size_t n) {
      T mx = -std::numeric_limits<T>::infinity();
      for (std::size_t i = 0; i < n; ++i) mx = std::max(mx, y_.data[base + i * stride]);
      T sum = T(0);
      for (std::size_t i = 0; i < n; ++i) {
        T& v = y_.data[base + i * stride];
        v = std::exp(v - mx);
        sum += v;
      }
      for (std::size_t i = 0; i < n; ++i) y_.data[base + i * stride] /= sum;
    });
    return y_;
  }

  TensorT<T> backward(const TensorT<T>& dy) override {
    TensorT<T> dx = dy;
    for_each_line(dy.shape, [&](std::size_t base, std::size_t stride, std::size_t n) {
      T dot = T(0);
      for (std::size_t i = 0; i < n; ++i)
        dot += dy.data[base + i * stride] * y_.data[base + i * stride];
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t at = base + i * stride;
        dx.data[at] = y_.data[at] * (dy.data[at] - dot);
      }
    });
    return dx;
  }

 private:
  template <typename F>
  void for_each_line(const std::vector<std::size_t>& shape, F&& f) const {
    std::vector<std::size_t> strides(shape.size(), 1);
    for (int i = static_cast<int>(shape.size()) - 2; i >= 0; --i)
      strides[i] = strides[i + 1] * shape[i + 1];
    const std::size_t n = shape[axis_];
    const std::size_t stride = strides[axis_];
    std::size_t total = 1;
    for (auto d : shape) total *= d;
    const std::size_t lines = total / n;
    for (std::size_t l = 0; l < lines; ++l) {
      // decompose l over the non-axis dims to find the line base offset
      std::size_t rem = l, base = 0;
      for (int d = static_cast<int>(shape.size()) - 1; d >= 0; --d) {
        if (d == axis_) continue;
        const std::size_t coord = rem % shape[d];
        rem /= shape[d];
        base += coord * strides[d];
      }
      f(base, stride, n);
    }
  }

  int axis_;
  TensorT<T> y_;
};

/// Inverted dropout: survivors scaled by 1/(1-p) at train time, identity at eval.
template <typename T>
class Dropout : public Layer<T> {
 public:
  explicit Dropout(double p) : p_(p) {
    if (p < 0.0 || p >= 1.0) throw ConfigError("dropout probability must be in [0,1)");
  }
  const char* kind() const override { return "dropout"; }
  void set_mode(Mode m) override { mode_ = m; }
  void set_rng(Rng* rng) override { rng_ = rng; }

  TensorT<T> forward(const TensorT<T>& x) override {
    if (mode_ == Mode::Eval || p_ == 0.0) {
      mask_.clear();
      return x;
    }
    if (!rng_) throw ConfigError("dropout in train mode needs an rng");
    const T scale = static_cast<T>(1.0 / (1.0 - p_));
    TensorT<T> y = x;
    mask_.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      const bool keep = rng_->next_double() >= p_;
      mask_[i] = keep ? scale : T(0);
      y.data[i] *= mask_[i];
    }
    return y;
  }

  TensorT<T> backward(const TensorT<T>& dy) override {
    if (mask_.empty()) return dy;
    TensorT<T> dx = dy;
    for (std::size_t i = 0; i < dx.size(); ++i) dx.data[i] *= mask_[i];
    return dx;
  }

 private:
  double p_;
  Mode mode_ = Mode::Train;
  Rng* rng_ = nullptr;
  std::vector<T> mask_;
};

template <typename T>
class Flatten : public Layer<T> {
 public:
  const char* kind() const override { return "flatten"; }
  TensorT<T> forward(const TensorT<T>& x) override {
    in_shape_ = x.shape;
    TensorT<T> y;
    y.shape = {x.size()};
    y.data = x.data;
    return y;
  }
  TensorT<T> backward(const TensorT<T>& dy) override {
    TensorT<T> dx;
    dx.shape = in_shape_;
    dx.data = dy.data;
    return dx;
  }

 private:
  std::vector<std::size_t> in_shape_;
};

template <typename T>
class Reshape : public Layer<T> {
 public:
  explicit Reshape(std::vector<std::size_t> target) : target_(std::move(target)) {}
  const char* kind() const override { return "reshape"; }
  TensorT<T> forward(const TensorT<T>& x) override {
    std::size_t n = 1;
    for (auto d : target_) n *= d;
    if (n != x.size()) throw ShapeError("reshape: element count mismatch");
    in_shape_ = x.shape;
    TensorT<T> y;
    y.shape = target_;
    y.data = x.data;
    return y;
  }
  TensorT<T> backward(const TensorT<T>& dy) override {
    TensorT<T> dx;
    dx.shape = in_shape_;
    dx.data = dy.data;
    return dx;
  }

 private:
  std::vector<std::size_t> target_, in_shape_;
};

template <typename T>
std::pair<T, TensorT<T>> mse_loss(const TensorT<T>& pred, const TensorT<T>& target) {
  if (!pred.same_shape(target)) throw ShapeError("mse_loss: shape mismatch");
  const std::size_t n = pred.size();
  T loss = T(0);
  TensorT<T> dpred(pred.shape, T(0));
  for (std::size_t i = 0; i < n; ++i) {
    const T d = pred.data[i] - target.data[i];
    loss += d * d;
    dpred.data[i] = T(2) * d / static_cast<T>(n);
  }
  return {loss / static_cast<T>(n), std::move(dpred)};
}

enum class RegNorm { L1, L2 };
enum class RegAttach { Kernel, Bias, Activity };

struct RegSpec {
  RegNorm norm = RegNorm::L2;
  double lambda = 0.01;
  RegAttach attach = RegAttach::Kernel;
};

// L1: (lambda/2m) sum |w|, subgradient with sign(0)=0.
// L2: (lambda/2m) sum w^2, gradient (lambda/m) w.
template <typename T>
std::pair<T, TensorT<T>> reg_penalty(const RegSpec& spec, const TensorT<T>& subject,
                                     std::size_t m) {
  if (m == 0) throw ConfigError("reg_penalty: m must be >= 1");
  const T scale = static_cast<T>(spec.lambda / (2.0 * static_cast<double>(m)));
  T penalty = T(0);
  TensorT<T> grad(subject.shape, T(0));
  if (spec.norm == RegNorm::L1) {
    for (std::size_t i = 0; i < subject.size(); ++i) {
      const T w = subject.data[i];
      penalty += scale * std::abs(w);
      grad.data[i] = w > T(0) ? scale : (w < T(0) ? -scale : T(0));
    }
  } else {
    for (std::size_t i = 0; i < subject.size(); ++i) {
      const T w = subject.data[i];
      penalty += scale * w * w;
      grad.data[i] = T(2) * scale * w;
    }
  }
  return {penalty, std::move(grad)};
}

template <typename T>
struct AdamConfig {
  T lr = T(0.001);
  T beta1 = T(0.9);
  T beta2 = T(0.999);
  T eps = T(1e-8);
};

template <typename T>
class Adam {
 public:
  explicit Adam(AdamConfig<T> cfg = {}) : cfg_(cfg) {}

  void step(const std::vector<ParamRef<T>>& params) {
    if (m_.empty()) {
      for (const auto& p : params) {
        m_.emplace_back(p.value->shape, T(0));
        v_.emplace_back(p.value->shape, T(0));
      }
    }
    if (m_.size() != params.size()) throw ShapeError("adam: parameter list changed size");
    ++t_;
    const T bc1 = T(1) - std::pow(cfg_.beta1, static_cast<T>(t_));
    const T bc2 = T(1) - std::pow(cfg_.beta2, static_cast<T>(t_));
    for (std::size_t p = 0; p < params.size(); ++p) {
      TensorT<T>& w = *params[p].value;
      const TensorT<T>& g = *params[p].grad;
      if (!w.same_shape(g) || !w.same_shape(m_[p])) throw ShapeError("adam: shape mismatch");
      T* wd = w.data.data();
      const T* gd = g.data.data();
      T* md = m_[p].data.data();
      T* vd = v_[p].data.data();
      const T b1 = cfg_.beta1, b2 = cfg_.beta2, lr = cfg_.lr, eps = cfg_.eps;
      const std::size_t n = w.size();
      for (std::size_t i = 0; i < n; ++i) {
        md[i] = b1 * md[i] + (T(1) - b1) * gd[i];
        vd[i] = b2 * vd[i] + (T(1) - b2) * gd[i] * gd[i];
        const T mhat = md[i] / bc1;
        const T vhat = vd[i] / bc2;
        wd[i] -= lr * mhat / (std::sqrt(vhat) + eps);
      }
    }
  }

  std::uint64_t steps() const { return t_; }
  std::vector<TensorT<T>>& first_moments() { return m_; }
  std::vector<TensorT<T>>& second_moments() { return v_; }
  void restore(std::vector<TensorT<T>> m, std::vector<TensorT<T>> v, std::uint64_t t) {
    m_ = std::move(m);
    v_ = std::move(v);
    t_ = t;
  }
  const AdamConfig<T>& config() const { return cfg_; }

 private:
  AdamConfig<T> cfg_;
  std::vector<TensorT<T>> m_, v_;
  std::uint64_t t_ = 0;
};

// ---- finite-difference gradient checking (use with T = double) ----

template <typename T>
struct GradCheckReport {
  double max_rel_err = 0.0;
  std::string worst = "";
};

namespace detail {
inline double rel_err(double a, double n) {
  // the absolute floor keeps finite-difference round-off noise on
  // near-zero gradients from registering as large relative errors
  const double denom = std::max({std::abs(a), std::abs(n), 1e-6});
  return std::abs(a - n) / denom;
}
}  // namespace detail

/// Checks a chain of layers against central differences. The scalar test
/// loss is a fixed random projection of the output.
inline GradCheckReport<double> gradcheck(const std::vector<Layer<double>*>& chain,
                                         const TensorT<double>& input, double eps,
                                         std::uint64_t proj_seed = 1234) {
  auto run = [&](const TensorT<double>& x) {
    TensorT<double> h = x;
    for (auto* l : chain) h = l->forward(h);
    return h;
  };
  TensorT<double> y0 = run(input);
  if (!y0.all_finite()) throw DivergedError("gradcheck: non-finite forward output");

  Rng prng(proj_seed);
  TensorT<double> proj(y0.shape, 0.0);
  for (auto& v : proj.data) v = prng.uniform(-1.0, 1.0);
  auto loss_of = [&](const TensorT<double>& y) {
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += proj.data[i] * y.data[i];
    return s;
  };

  for (auto* l : chain) l->zero_grads();
  TensorT<double> d = proj;
  for (auto it = chain.rbegin(); it != chain.rend(); ++it) d = (*it)->backward(d);

  GradCheckReport<double> rep;
  auto check_coord = [&](double* coord, double analytic, const std::string& label) {
    const double orig = *coord;
    *coord = orig + eps;
    const double lp = loss_of(run(input));
    *coord = orig - eps;
    const double lm = loss_of(run(input));
    *coord = orig;
    const double numeric = (lp - lm) / (2.0 * eps);
    const double e = detail::rel_err(analytic, numeric);
    if (e > rep.max_rel_err) {
      rep.max_rel_err = e;
      rep.worst = label;
    }
  };

  TensorT<double> x = input;
  // rebind run to the mutable copy so perturbations take effect
  auto run_x = [&]() {
    TensorT<double> h = x;
    for (auto* l : chain) h = l->forward(h);
    return h;
  };
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x.data[i];
    x.data[i] = orig + eps;
    const double lp = loss_of(run_x());
    x.data[i] = orig - eps;
    const double lm = loss_of(run_x());
    x.data[i] = orig;
    const double numeric = (lp - lm) / (2.0 * eps);
    const double e = detail::rel_err(d.data[i], numeric);
    if (e > rep.max_rel_err) {
      rep.max_rel_err = e;
      rep.worst = "input[" + std::to_string(i) + "]";
    }
  }
  for (std::size_t li = 0; li < chain.size(); ++li) {
    for (auto& p : chain[li]->params()) {
      for (std::size_t i = 0; i < p.value->size(); ++i) {
        // param perturbations must re-run the full forward, which check_coord does
        check_coord(&p.value->data[i], p.grad->data[i],
                    std::string(chain[li]->kind()) + "." + p.name + "[" + std::to_string(i) + "]");
      }
    }
  }
  return rep;
}

}  // namespace scae::nn
