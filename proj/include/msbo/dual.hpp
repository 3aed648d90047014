#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace msbo {

/// Fixed-width forward-mode dual number: a value and its derivatives with
/// respect to at most W seed directions. Gradients of objectives with more
/// than W inputs are assembled chunk-wise by gradient() below, so W bounds
/// the per-pass register footprint, not the problem size.
template <int W>
struct Dual {
  double v = 0.0;
  std::array<double, W> g{};

  Dual() = default;
  Dual(double value) : v(value) {}  // NOLINT: implicit constant promotion

  static Dual seeded(double value, int slot) {
    Dual d(value);
    d.g[slot] = 1.0;
    return d;
  }

  Dual& operator+=(const Dual& o) {
    v += o.v;
    for (int i = 0; i < W; ++i) g[i] += o.g[i];
    return *this;
  }
  Dual& operator-=(const Dual& o) {
    v -= o.v;
    for (int i = 0; i < W; ++i) g[i] -= o.g[i];
    return *this;
  }
  Dual& operator*=(const Dual& o) {
    for (int i = 0; i < W; ++i) g[i] = g[i] * o.v + v * o.g[i];
    v *= o.v;
    return *this;
  }
  Dual& operator+=(double c) {
    v += c;
    return *this;
  }
  Dual& operator-=(double c) {
    v -= c;
    return *this;
  }
  Dual& operator*=(double c) {
    v *= c;
    for (int i = 0; i < W; ++i) g[i] *= c;
    return *this;
  }
  Dual& operator/=(double c) { return *this *= (1.0 / c); }
};

template <int W>
inline Dual<W> operator+(Dual<W> a, const Dual<W>& b) { return a += b; }
template <int W>
inline Dual<W> operator+(Dual<W> a, double b) { return a += b; }
template <int W>
inline Dual<W> operator+(double a, Dual<W> b) { return b += a; }

template <int W>
inline Dual<W> operator-(Dual<W> a, const Dual<W>& b) { return a -= b; }
template <int W>
inline Dual<W> operator-(Dual<W> a, double b) { return a -= b; }
template <int W>
inline Dual<W> operator-(double a, const Dual<W>& b) {
  Dual<W> r;
  r.v = a - b.v;
  for (int i = 0; i < W; ++i) r.g[i] = -b.g[i];
  return r;
}
template <int W>
inline Dual<W> operator-(const Dual<W>& a) {
  Dual<W> r;
  r.v = -a.v;
  for (int i = 0; i < W; ++i) r.g[i] = -a.g[i];
  return r;
}

template <int W>
inline Dual<W> operator*(Dual<W> a, const Dual<W>& b) { return a *= b; }
template <int W>
inline Dual<W> operator*(Dual<W> a, double b) { return a *= b; }
template <int W>
inline Dual<W> operator*(double a, Dual<W> b) { return b *= a; }

template <int W>
inline Dual<W> operator/(const Dual<W>& a, const Dual<W>& b) {
  const double inv = 1.0 / b.v;
  Dual<W> r;
  r.v = a.v * inv;
  for (int i = 0; i < W; ++i) r.g[i] = (a.g[i] - r.v * b.g[i]) * inv;
  return r;
}
template <int W>
inline Dual<W> operator/(Dual<W> a, double b) { return a *= (1.0 / b); }
template <int W>
inline Dual<W> operator/(double a, const Dual<W>& b) {
  const double inv = 1.0 / b.v;
  Dual<W> r;
  r.v = a * inv;
  const double s = -r.v * inv;
  for (int i = 0; i < W; ++i) r.g[i] = s * b.g[i];
  return r;
}

template <int W>
inline bool operator<(const Dual<W>& a, const Dual<W>& b) { return a.v < b.v; }
template <int W>
inline bool operator>(const Dual<W>& a, const Dual<W>& b) { return a.v > b.v; }
template <int W>
inline bool operator<(const Dual<W>& a, double b) { return a.v < b; }
template <int W>
inline bool operator>(const Dual<W>& a, double b) { return a.v > b; }
template <int W>
inline bool operator<(double a, const Dual<W>& b) { return a < b.v; }
template <int W>
inline bool operator>(double a, const Dual<W>& b) { return a > b.v; }

template <int W>
inline Dual<W> sqrt(const Dual<W>& a) {
  Dual<W> r;
  r.v = std::sqrt(a.v);
  const double s = 0.5 / r.v;
  for (int i = 0; i < W; ++i) r.g[i] = s * a.g[i];
  return r;
}

template <int W>
inline Dual<W> exp(const Dual<W>& a) {
  Dual<W> r;
  r.v = std::exp(a.v);
  for (int i = 0; i < W; ++i) r.g[i] = r.v * a.g[i];
  return r;
}

template <int W>
inline Dual<W> log(const Dual<W>& a) {
  Dual<W> r;
  r.v = std::log(a.v);
  const double s = 1.0 / a.v;
  for (int i = 0; i < W; ++i) r.g[i] = s * a.g[i];
  return r;
}

template <int W>
inline Dual<W> abs(const Dual<W>& a) {
  return a.v < 0.0 ? -a : a;
}

// value extraction that also works in templated code on plain doubles
inline double value_of(double x) { return x; }
template <int W>
inline double value_of(const Dual<W>& x) { return x.v; }

inline double max_value(double a, double b) { return a < b ? b : a; }
template <class T>
inline T max_scalar(const T& a, const T& b) { return a < b ? b : a; }

/// Standard normal pdf/cdf usable on double and Dual scalars.
inline double norm_pdf(double x) {
  static const double kInvSqrt2Pi = 0.39894228040143267794;
  return kInvSqrt2Pi * std::exp(-0.5 * x * x);
}
inline double norm_cdf(double x) {
  static const double kInvSqrt2 = 0.70710678118654752440;
  return 0.5 * std::erfc(-x * kInvSqrt2);
}
template <int W>
inline Dual<W> norm_pdf(const Dual<W>& x) {
  Dual<W> r;
  r.v = norm_pdf(x.v);
  const double s = -x.v * r.v;
  for (int i = 0; i < W; ++i) r.g[i] = s * x.g[i];
  return r;
}
template <int W>
inline Dual<W> norm_cdf(const Dual<W>& x) {
  Dual<W> r;
  r.v = norm_cdf(x.v);
  const double s = norm_pdf(x.v);
  for (int i = 0; i < W; ++i) r.g[i] = s * x.g[i];
  return r;
}

inline constexpr int kGradChunk = 16;

/// Evaluates grad f at x by chunked forward-mode passes and returns f(x).
/// F must be callable as f(std::span<const T>) -> T for T in
/// {double, Dual<kGradChunk>}.
template <class F>
double gradient(F&& f, std::span<const double> x, std::span<double> grad_out) {
  using D = Dual<kGradChunk>;
  const int n = static_cast<int>(x.size());
  std::vector<D> xs(n);
  for (int i = 0; i < n; ++i) xs[i] = D(x[i]);
  if (n == 0) return f(std::span<const D>()).v;
  double value = 0.0;
  for (int base = 0; base < n; base += kGradChunk) {
    const int width = std::min(kGradChunk, n - base);
    for (int j = 0; j < width; ++j) xs[base + j] = D::seeded(x[base + j], j);
    const D out = f(std::span<const D>(xs.data(), xs.size()));
    value = out.v;
    for (int j = 0; j < width; ++j) grad_out[base + j] = out.g[j];
    for (int j = 0; j < width; ++j) xs[base + j] = D(x[base + j]);
  }
  return value;
}

/// Central finite differences; reference implementation for gradient tests.
template <class F>
void finite_difference_gradient(F&& f, std::span<const double> x,
                                std::span<double> grad_out, double h = 1e-5) {
  std::vector<double> xp(x.begin(), x.end());
  for (size_t i = 0; i < x.size(); ++i) {
    const double xi = xp[i];
    xp[i] = xi + h;
    const double fp = f(std::span<const double>(xp.data(), xp.size()));
    xp[i] = xi - h;
    const double fm = f(std::span<const double>(xp.data(), xp.size()));
    xp[i] = xi;
    grad_out[i] = (fp - fm) / (2.0 * h);
  }
}

}  // namespace msbo
