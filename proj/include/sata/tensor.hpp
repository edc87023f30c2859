#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "sata/common.hpp"

namespace sata::ad {

using Shape = std::vector<int>;

inline int64_t numel(const Shape& s) {
  int64_t n = 1;
  for (int d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
  return out + "]";
}

// Dense row-major n-d array. Training uses S = float; finite-difference
// oracles instantiate S = double.
template <class S>
struct TensorT {
  Shape shape;
  std::vector<S> data;
  bool requires_grad = false;
  std::vector<S> grad;  // same length as data when requires_grad

  TensorT() = default;
  TensorT(Shape sh, std::vector<S> d) : shape(std::move(sh)), data(std::move(d)) {
    if (static_cast<int64_t>(data.size()) != numel(shape))
      throw Error("ShapeMismatch", "data length != product of shape");
  }

  static TensorT zeros(Shape sh) {
    TensorT t;
    t.shape = std::move(sh);
    t.data.assign(numel(t.shape), S(0));
    return t;
  }
  static TensorT full(Shape sh, S v) {
    TensorT t = zeros(std::move(sh));
    std::fill(t.data.begin(), t.data.end(), v);
    return t;
  }
  static TensorT scalar(S v) { return TensorT({1}, {v}); }

  int rank() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape[i]; }
  int64_t size() const { return static_cast<int64_t>(data.size()); }
  bool is_scalar() const { return size() == 1; }

  int rows() const { return rank() == 1 ? 1 : shape[0]; }
  int cols() const { return rank() == 1 ? shape[0] : shape[rank() - 1]; }

  S& at(int r, int c) { return data[static_cast<int64_t>(r) * cols() + c]; }
  S at(int r, int c) const { return data[static_cast<int64_t>(r) * cols() + c]; }

  void enable_grad() {
    requires_grad = true;
    if (grad.size() != data.size()) grad.assign(data.size(), S(0));
  }
  void zero_grad() { std::fill(grad.begin(), grad.end(), S(0)); }

  template <class U>
  TensorT<U> cast() const {
    TensorT<U> out;
    out.shape = shape;
    out.data.resize(data.size());
    for (size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
    return out;
  }
};

using Tensor = TensorT<float>;

// Xavier-uniform init for a [fan_in, fan_out] weight.
template <class S>
TensorT<S> xavier_init(int fan_in, int fan_out, Rng& rng) {
  TensorT<S> t = TensorT<S>::zeros({fan_in, fan_out});
  double a = std::sqrt(6.0 / (fan_in + fan_out));
  for (auto& v : t.data) v = static_cast<S>((rng.uniform_double() * 2.0 - 1.0) * a);
  return t;
}

template <class S>
TensorT<S> randn(Shape sh, Rng& rng, double stddev = 1.0) {
  TensorT<S> t = TensorT<S>::zeros(std::move(sh));
  for (auto& v : t.data) v = static_cast<S>(rng.normal() * stddev);
  return t;
}

}  // namespace sata::ad
