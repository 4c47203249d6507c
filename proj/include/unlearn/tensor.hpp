#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include "unlearn/errors.hpp"
#include "unlearn/rng.hpp"

namespace unlearn {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ']';
  return os.str();
}

// Validated construction from signed extents (rejects negatives).
inline Shape make_shape(std::initializer_list<long long> dims) {
  Shape s;
  s.reserve(dims.size());
  for (long long d : dims) {
    if (d < 0) throw std::invalid_argument("negative tensor extent " + std::to_string(d));
    s.push_back(static_cast<std::size_t>(d));
  }
  return s;
}

// Dense row-major n-d array. `node` is the id of the producing node on the
// active recording tape, -1 when the value is not being recorded.
template <typename T>
struct TensorT {
  Shape shape;
  std::vector<T> data;
  bool requires_grad = false;
  int node = -1;

  TensorT() = default;
  explicit TensorT(Shape s) : shape(std::move(s)), data(unlearn::numel(shape), T(0)) {}
  TensorT(Shape s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
    if (unlearn::numel(shape) != data.size())
      throw std::invalid_argument("tensor data size " + std::to_string(data.size()) +
                                  " does not match shape " + shape_str(shape));
  }

  std::size_t size() const { return data.size(); }
  std::size_t dim(std::size_t i) const { return shape.at(i); }
  bool is_scalar() const { return data.size() == 1; }

  T item() const {
    if (!is_scalar()) throw std::invalid_argument("item() on non-scalar tensor " + shape_str(shape));
    return data[0];
  }

  T& operator[](std::size_t i) { return data[i]; }
  const T& operator[](std::size_t i) const { return data[i]; }

  // Value copy with recording state stripped; used to stop gradients.
  TensorT detached() const {
    TensorT t;
    t.shape = shape;
    t.data = data;
    return t;
  }

  template <typename U>
  TensorT<U> cast() const {
    TensorT<U> t;
    t.shape = shape;
    t.data.assign(data.begin(), data.end());
    return t;
  }
};

template <typename T>
bool same_shape(const TensorT<T>& a, const TensorT<T>& b) {
  return a.shape == b.shape;
}

template <typename T>
bool all_finite(const TensorT<T>& t) {
  for (T v : t.data)
    if (!std::isfinite(static_cast<double>(v))) return false;
  return true;
}

template <typename T>
void check_finite(const TensorT<T>& t, const char* what) {
  for (std::size_t i = 0; i < t.data.size(); ++i) {
    if (!std::isfinite(static_cast<double>(t.data[i])))
      throw NumericError(std::string(what) + ": non-finite value at flat index " +
                         std::to_string(i) + " of " + shape_str(t.shape));
  }
}

// ---- creation -------------------------------------------------------------

template <typename T>
TensorT<T> zeros(Shape s) {
  return TensorT<T>(std::move(s));
}

template <typename T>
TensorT<T> ones(Shape s) {
  TensorT<T> t(std::move(s));
  for (auto& v : t.data) v = T(1);
  return t;
}

template <typename T>
TensorT<T> constant(Shape s, T value) {
  TensorT<T> t(std::move(s));
  for (auto& v : t.data) v = value;
  return t;
}

template <typename T>
TensorT<T> uniform(Shape s, double lo, double hi, Rng& rng) {
  TensorT<T> t(std::move(s));
  for (auto& v : t.data) v = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

// He-style fan-in scaled normal draw: N(0, 2/fan_in). When fan_in is 0 the
// convention is numel/shape[0] (input count per output unit of a weight).
template <typename T>
TensorT<T> scaled_normal(Shape s, Rng& rng, std::size_t fan_in = 0) {
  TensorT<T> t(s);
  if (fan_in == 0 && !s.empty() && s[0] > 0) fan_in = unlearn::numel(s) / s[0];
  if (fan_in == 0) fan_in = 1;
  const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
  for (auto& v : t.data) v = static_cast<T>(rng.normal(0.0, stddev));
  return t;
}

}  // namespace unlearn
