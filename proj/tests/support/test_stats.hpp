#pragma once

// Shared statistical oracles for the test suites: quadrature-normalized
// CDFs from unnormalized log densities, Kolmogorov-Smirnov and chi-square
// goodness-of-fit helpers, and small moment utilities. Everything here is
// independent of the library's sampling code paths.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace testsupport {

inline double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline double variance_of(const std::vector<double>& v) {
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

// Tabulated CDF built by trapezoid integration of an unnormalized log
// density, on either a linear grid or (for positive supports with an
// integrable singularity or heavy tail) a log-spaced grid. Evaluate with
// cdf().
class QuadratureCdf {
 public:
  QuadratureCdf(std::function<double(double)> log_density, double lo, double hi,
                int n = 40000, bool log_grid = false)
      : lo_(lo), hi_(hi), n_(n), log_grid_(log_grid) {
    if (!(hi > lo) || n < 10) throw std::invalid_argument("QuadratureCdf: bad grid");
    if (log_grid_ && !(lo > 0.0))
      throw std::invalid_argument("QuadratureCdf: log grid needs lo > 0");
    // On the log grid integrate in y = ln x with jacobian x.
    std::vector<double> logf(n_);
    double mx = -1e308;
    for (int i = 0; i < n_; ++i) {
      const double x = grid_point(i);
      logf[i] = log_density(x) + (log_grid_ ? std::log(x) : 0.0);
      mx = std::max(mx, logf[i]);
    }
    std::vector<double> f(n_);
    for (int i = 0; i < n_; ++i) f[i] = std::exp(logf[i] - mx);
    cum_.assign(n_, 0.0);
    for (int i = 1; i < n_; ++i) cum_[i] = cum_[i - 1] + 0.5 * (f[i] + f[i - 1]);
    const double total = cum_.back();
    if (!(total > 0.0)) throw std::runtime_error("QuadratureCdf: zero mass");
    for (auto& c : cum_) c /= total;
  }

  static QuadratureCdf positive(std::function<double(double)> log_density,
                                double lo, double hi, int n = 60000) {
    return QuadratureCdf(std::move(log_density), lo, hi, n, true);
  }

  double cdf(double x) const {
    if (x <= lo_) return 0.0;
    if (x >= hi_) return 1.0;
    const double t = log_grid_ ? (std::log(x) - std::log(lo_)) /
                                     (std::log(hi_) - std::log(lo_))
                               : (x - lo_) / (hi_ - lo_);
    const double pos = t * (n_ - 1);
    const int i = std::min(n_ - 2, static_cast<int>(pos));
    const double w = pos - i;
    return cum_[i] * (1.0 - w) + cum_[i + 1] * w;
  }

  // Mean of the normalized density (trapezoid).
  static double moment(std::function<double(double)> log_density, double lo,
                       double hi, double power, int n = 200000) {
    double mx = -1e308;
    std::vector<double> logf(n);
    for (int i = 0; i < n; ++i) {
      const double x = lo + (hi - lo) * i / (n - 1);
      logf[i] = log_density(x);
      mx = std::max(mx, logf[i]);
    }
    double z = 0.0, m = 0.0;
    for (int i = 0; i < n; ++i) {
      const double x = lo + (hi - lo) * i / (n - 1);
      const double f = std::exp(logf[i] - mx);
      const double w = (i == 0 || i == n - 1) ? 0.5 : 1.0;
      z += w * f;
      m += w * f * std::pow(x, power);
    }
    return m / z;
  }

 private:
  double grid_point(int i) const {
    if (log_grid_)
      return std::exp(std::log(lo_) +
                      (std::log(hi_) - std::log(lo_)) * i / (n_ - 1));
    return lo_ + (hi_ - lo_) * i / (n_ - 1);
  }

  double lo_, hi_;
  int n_;
  bool log_grid_ = false;
  std::vector<double> cum_;
};

// Kolmogorov-Smirnov statistic of samples against a CDF.
inline double ks_statistic(std::vector<double> samples,
                           const std::function<double(double)>& cdf) {
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double c = cdf(samples[i]);
    d = std::max(d, std::abs(c - static_cast<double>(i) / n));
    d = std::max(d, std::abs(static_cast<double>(i + 1) / n - c));
  }
  return d;
}

// Asymptotic Kolmogorov distribution tail: P(D_n > d).
inline double ks_pvalue(double d, std::size_t n) {
  const double t = (std::sqrt(static_cast<double>(n)) + 0.12 +
                    0.11 / std::sqrt(static_cast<double>(n))) *
                   d;
  double p = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = 2.0 * std::pow(-1.0, k - 1) * std::exp(-2.0 * k * k * t * t);
    p += term;
    if (std::abs(term) < 1e-12) break;
  }
  return std::min(1.0, std::max(0.0, p));
}

inline double ks_test_pvalue(std::vector<double> samples,
                             const std::function<double(double)>& cdf) {
  const std::size_t n = samples.size();
  const double d = ks_statistic(std::move(samples), cdf);
  return ks_pvalue(d, n);
}

// Regularized lower incomplete gamma P(a, x), series + continued fraction.
inline double gamma_p(double a, double x) {
  if (x < 0.0 || a <= 0.0) throw std::invalid_argument("gamma_p: bad args");
  if (x == 0.0) return 0.0;
  const double gln = std::lgamma(a);
  if (x < a + 1.0) {
    double ap = a, del = 1.0 / a, sum = del;
    for (int i = 0; i < 500; ++i) {
      ap += 1.0;
      del *= x / ap;
      sum += del;
      if (std::abs(del) < std::abs(sum) * 1e-15) break;
    }
    return sum * std::exp(-x + a * std::log(x) - gln);
  }
  double b = x + 1.0 - a, c = 1e300, d = 1.0 / b, h = d;
  for (int i = 1; i < 500; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < 1e-300) d = 1e-300;
    c = b + an / c;
    if (std::abs(c) < 1e-300) c = 1e-300;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-15) break;
  }
  return 1.0 - std::exp(-x + a * std::log(x) - gln) * h;
}

// Upper tail of the chi-square distribution with k dof.
inline double chi2_sf(double x, double k) { return 1.0 - gamma_p(k / 2.0, x / 2.0); }

inline double normal_cdf(double x, double mu = 0.0, double sd = 1.0) {
  return 0.5 * std::erfc(-(x - mu) / (sd * std::numbers::sqrt2));
}

}  // namespace testsupport
