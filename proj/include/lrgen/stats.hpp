#pragma once

// Student-t tail probabilities via the regularized incomplete beta function
// (continued fraction, Lentz's method), plus the one-sided paired t-test
// used to decide baseline updates.

#include <cmath>
#include <span>

#include "core.hpp"

namespace lrgen {

namespace detail {

inline double log_gamma(double x) { return std::lgamma(x); }

inline double beta_cf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 3e-14, kTiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0, d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return h;
}

// Regularized incomplete beta I_x(a, b).
inline double beta_inc(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double lbeta = log_gamma(a + b) - log_gamma(a) - log_gamma(b) +
                       a * std::log(x) + b * std::log(1.0 - x);
  const double front = std::exp(lbeta);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cf(a, b, x) / a;
  return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

}  // namespace detail

// Survival function of Student's t: P(T > t) with df degrees of freedom.
inline double student_sf(double t, double df) {
  if (!(df > 0)) throw Error("t-distribution needs positive df");
  const double x = df / (df + t * t);
  const double tail = 0.5 * detail::beta_inc(df / 2.0, 0.5, x);
  return t >= 0 ? tail : 1.0 - tail;
}

// One-sided paired t-test of H1: mean(a - b) < 0. Returns the p-value;
// small p means `a` is significantly below `b`. Zero-variance differences
// degenerate to 0 / 0.5 / 1 by the sign of the mean.
inline double paired_t_pvalue(std::span<const double> a,
                              std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2)
    throw DimensionMismatch("paired test needs two equal samples of size >= 2");
  const int n = static_cast<int>(a.size());
  double mean = 0.0;
  for (int i = 0; i < n; ++i) mean += a[i] - b[i];
  mean /= n;
  double ss = 0.0;
  for (int i = 0; i < n; ++i) {
    const double d = (a[i] - b[i]) - mean;
    ss += d * d;
  }
  const double sd = std::sqrt(ss / (n - 1));
  if (sd == 0.0) return mean < 0 ? 0.0 : (mean > 0 ? 1.0 : 0.5);
  const double t = mean / (sd / std::sqrt(double(n)));
  return student_sf(-t, double(n - 1));
}

}  // namespace lrgen
