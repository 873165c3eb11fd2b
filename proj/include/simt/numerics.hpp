#ifndef SIMT_NUMERICS_HPP
#define SIMT_NUMERICS_HPP

// Dense 64-bit linear algebra, activations and a reproducible RNG.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include "simt/error.hpp"

namespace simt {

using RealVector = std::vector<double>;

/// Row-major dense matrix. Bias vectors are stored as (n x 1) matrices so that
/// every learned tensor has the same type.
struct RealMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  RealMatrix() = default;
  RealMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  std::size_t size() const noexcept { return data.size(); }
  bool same_shape(const RealMatrix& o) const noexcept { return rows == o.rows && cols == o.cols; }
  void fill(double v) { std::fill(data.begin(), data.end(), v); }

  friend bool operator==(const RealMatrix&, const RealMatrix&) = default;
};

// out += M x
inline void matvec_add(const RealMatrix& m, std::span<const double> x, std::span<double> out) {
  for (std::size_t r = 0; r < m.rows; ++r) {
    const double* w = m.data.data() + r * m.cols;
    double acc = 0.0;
    for (std::size_t c = 0; c < m.cols; ++c) acc += w[c] * x[c];
    out[r] += acc;
  }
}

// out += M^T y
inline void matvec_t_add(const RealMatrix& m, std::span<const double> y, std::span<double> out) {
  for (std::size_t r = 0; r < m.rows; ++r) {
    const double* w = m.data.data() + r * m.cols;
    const double yr = y[r];
    if (yr == 0.0) continue;
    for (std::size_t c = 0; c < m.cols; ++c) out[c] += w[c] * yr;
  }
}

// M += a b^T
inline void outer_add(RealMatrix& m, std::span<const double> a, std::span<const double> b) {
  for (std::size_t r = 0; r < m.rows; ++r) {
    const double ar = a[r];
    if (ar == 0.0) continue;
    double* w = m.data.data() + r * m.cols;
    for (std::size_t c = 0; c < m.cols; ++c) w[c] += ar * b[c];
  }
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

/// Index of the largest element; ties go to the lowest index.
inline std::size_t argmax(std::span<const double> v) {
  if (v.empty()) throw Error("empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

inline double log_sum_exp(std::span<const double> v) {
  if (v.empty()) throw Error("empty vector");
  const double m = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

inline RealVector softmax(std::span<const double> v) {
  if (v.empty()) throw Error("empty vector");
  const double m = *std::max_element(v.begin(), v.end());
  RealVector out(v.size());
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp(v[i] - m);
    s += out[i];
  }
  for (double& x : out) x /= s;
  return out;
}

inline RealVector log_softmax(std::span<const double> v) {
  const double lse = log_sum_exp(v);
  RealVector out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] - lse;
  return out;
}

/// Shannon entropy in nats of a probability vector, with 0 ln 0 = 0.
inline double entropy(std::span<const double> p) {
  if (p.empty()) throw Error("empty vector");
  double total = 0.0;
  for (double x : p) {
    if (!(x >= 0.0)) throw Error("entropy: negative or non-finite probability");
    total += x;
  }
  if (std::abs(total - 1.0) > 1e-6) throw Error("entropy: distribution is not normalized");
  double h = 0.0;
  for (double x : p)
    if (x > 0.0) h -= x * std::log(x);
  return std::clamp(h, 0.0, std::log(static_cast<double>(p.size())));
}

/// Central-difference gradient of a scalar function. Used as the independent
/// oracle for backpropagation checks.
template <class F>
RealVector fd_gradient(F&& f, RealVector x, double h) {
  RealVector g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    const double plus = f(x);
    x[i] = saved - h;
    const double minus = f(x);
    x[i] = saved;
    g[i] = (plus - minus) / (2.0 * h);
  }
  return g;
}

/// xorshift64* generator seeded through splitmix64.
///
/// The stream depends only on the seed: next_u64 applies the shifts
/// (12, 25, 27) followed by multiplication with 0x2545F4914F6CDD1D.
/// uniform() takes the top 53 bits; gaussian() is Box-Muller without caching
/// the second variate.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    z ^= z >> 31;
    state_ = z != 0 ? z : 0x9E3779B97F4A7C15ULL;
  }

  std::uint64_t next_u64() {
    state_ ^= state_ >> 12;
    state_ ^= state_ << 25;
    state_ ^= state_ >> 27;
    return state_ * 0x2545F4914F6CDD1DULL;
  }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double gaussian(double mean, double stddev) {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return mean + stddev * r * std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Uniform integer in [0, n), unbiased by rejection.
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw Error("Rng::below: empty range");
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % n;
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

 private:
  std::uint64_t state_;
};

}  // namespace simt

#endif  // SIMT_NUMERICS_HPP
