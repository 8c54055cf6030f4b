#include "btac/rng.hpp"

#include <cfloat>
#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <stdexcept>

namespace btac {

RngHandle::RngHandle(std::uint64_t seed, std::uint64_t stream)
    : seed_(seed), stream_(stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream & 0xffffffffu),
                    static_cast<std::uint32_t>(stream >> 32)};
  eng_.seed(seq);
}

double RngHandle::uniform() {
  // (x >> 11) has 53 random bits; the half-step keeps the value in (0,1).
  return (static_cast<double>(eng_() >> 11) + 0.5) * 0x1.0p-53;
}

double RngHandle::normal() {
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  return u * std::sqrt(-2.0 * std::log(s) / s);
}

void RngHandle::save(std::ostream& os) const {
  os << seed_ << ' ' << stream_ << ' ' << eng_;
}

void RngHandle::load(std::istream& is) {
  is >> seed_ >> stream_ >> eng_;
  if (!is) throw std::runtime_error("RngHandle: corrupt stream state");
}

double draw_gamma(double shape, double rate, RngHandle& rng) {
  if (!(shape > 0.0) || !(rate > 0.0))
    throw std::invalid_argument("draw_gamma: shape and rate must be positive");
  if (shape < 1.0) {
    // boost: G(a) = G(a+1) * U^{1/a}; tiny shapes can underflow the
    // power, so the result is floored at the smallest normal double
    const double g = draw_gamma(shape + 1.0, 1.0, rng);
    const double u = rng.uniform();
    return std::max(g * std::pow(u, 1.0 / shape) / rate, DBL_MIN);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = rng.normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.uniform();
    if (u < 1.0 - 0.0331 * (x * x) * (x * x)) return d * v / rate;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v / rate;
  }
}

double draw_inverse_gaussian(double mean, double shape, RngHandle& rng) {
  if (!(mean > 0.0) || !(shape > 0.0))
    throw std::invalid_argument("draw_inverse_gaussian: parameters must be positive");
  const double z = rng.normal();
  const double y = z * z;
  const double x = mean + mean * mean * y / (2.0 * shape) -
                   (mean / (2.0 * shape)) *
                       std::sqrt(4.0 * mean * shape * y + mean * mean * y * y);
  const double u = rng.uniform();
  if (u <= mean / (mean + x)) return x;
  return mean * mean / x;
}

namespace {

// Two-parameter standard form gig(lam, om): density z^(lam-1) exp(-om(z+1/z)/2)
// with lam >= 0, om > 0. Log density up to a constant.
inline double gig_logf(double x, double lam, double om) {
  return (lam - 1.0) * std::log(x) - 0.5 * om * (x + 1.0 / x);
}

inline double gig_mode(double lam, double om) {
  return ((lam - 1.0) + std::sqrt((lam - 1.0) * (lam - 1.0) + om * om)) / om;
}

// Ratio-of-uniforms with mode shift (used for lam >= 1 or om > 1).
double gig_rou_shift(double lam, double om, RngHandle& rng) {
  const double m = gig_mode(lam, om);
  const double lfm = gig_logf(m, lam, om);
  // Stationary points of (x - m) sqrt(f(x)) solve
  // x^3 + a x^2 + b x + c = 0 with the coefficients below.
  const double a = -(2.0 * (lam + 1.0) / om + m);
  const double b = 2.0 * (lam - 1.0) * m / om - 1.0;
  const double c = m;
  const double p = b - a * a / 3.0;
  const double q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
  double arg = -(q / 2.0) / std::sqrt(-(p * p * p) / 27.0);
  arg = std::min(1.0, std::max(-1.0, arg));
  const double fi = std::acos(arg);
  const double fak = 2.0 * std::sqrt(-p / 3.0);
  const double y1 = fak * std::cos(fi / 3.0) - a / 3.0;          // > m
  const double y2 = fak * std::cos(fi / 3.0 + 4.0 * std::numbers::pi / 3.0) - a / 3.0;  // in (0, m)
  const double vplus = (y1 - m) * std::exp(0.5 * (gig_logf(y1, lam, om) - lfm));
  const double vminus = (y2 - m) * std::exp(0.5 * (gig_logf(y2, lam, om) - lfm));
  for (;;) {
    const double u = rng.uniform();
    const double v = vminus + rng.uniform() * (vplus - vminus);
    const double x = m + v / u;
    if (x <= 0.0) continue;
    if (2.0 * std::log(u) <= gig_logf(x, lam, om) - lfm) return x;
  }
}

// Ratio-of-uniforms without shift (0 <= lam < 1, moderate om).
double gig_rou_noshift(double lam, double om, RngHandle& rng) {
  const double m = gig_mode(lam, om);
  const double lfm = gig_logf(m, lam, om);
  // x sqrt(f(x)) peaks at the mode of gig(lam + 2, om).
  const double xp = ((lam + 1.0) + std::sqrt((lam + 1.0) * (lam + 1.0) + om * om)) / om;
  const double vmax = xp * std::exp(0.5 * (gig_logf(xp, lam, om) - lfm));
  for (;;) {
    const double u = rng.uniform();
    const double v = rng.uniform() * vmax;
    const double x = v / u;
    if (2.0 * std::log(u) <= gig_logf(x, lam, om) - lfm) return x;
  }
}

// Gamma rejection for small om, lam > 0: bound x^(lam-1) e^{-om x/2} with
// acceptance e^{-om/(2x)}; acceptance tends to 1 as om -> 0.
double gig_gamma_reject(double lam, double om, RngHandle& rng) {
  for (;;) {
    const double x = draw_gamma(lam, om / 2.0, rng);
    if (std::log(rng.uniform()) <= -0.5 * om / x) return x;
  }
}

}  // namespace

double draw_gig(double nu, double chi, double psi, RngHandle& rng) {
  if (chi < 0.0 || psi < 0.0)
    throw std::invalid_argument("draw_gig: chi and psi must be nonnegative");
  const bool chi_ok = chi > 0.0 || nu > 0.0;
  const bool psi_ok = psi > 0.0 || nu < 0.0;
  if (!chi_ok || !psi_ok)
    throw std::invalid_argument("draw_gig: parameter triple outside the GIG domain");
  if (chi == 0.0) return draw_gamma(nu, psi / 2.0, rng);
  if (psi == 0.0) return draw_inverse_gamma(-nu, chi / 2.0, rng);

  // Standardize to gig(lam, om) with lam = |nu|, om = sqrt(chi*psi):
  // X = sqrt(chi/psi) * Z for nu >= 0, and X = sqrt(chi/psi) / Z for
  // nu < 0 (since 1/X ~ GIG(-nu, psi, chi)).
  const double lam = std::abs(nu);
  const double om = std::sqrt(chi * psi);
  const double alpha = std::sqrt(chi / psi);

  double z;
  if (lam >= 1.0 || om > 1.0) {
    z = (lam >= 1.0 && om < 0.01) ? gig_gamma_reject(lam, om, rng)
                                  : gig_rou_shift(lam, om, rng);
  } else if (lam > 0.0 && om < std::min(0.5, 2.0 / 3.0 * std::sqrt(1.0 - lam))) {
    z = gig_gamma_reject(lam, om, rng);
  } else {
    z = gig_rou_noshift(lam, om, rng);
  }
  return std::max(nu < 0.0 ? alpha / z : alpha * z, DBL_MIN);
}

double draw_beta(double a, double b, RngHandle& rng) {
  if (!(a > 0.0) || !(b > 0.0))
    throw std::invalid_argument("draw_beta: parameters must be positive");
  const double x = draw_gamma(a, 1.0, rng);
  const double y = draw_gamma(b, 1.0, rng);
  return x / (x + y);
}

double draw_exponential(double rate, RngHandle& rng) {
  if (!(rate > 0.0)) throw std::invalid_argument("draw_exponential: rate must be positive");
  return -std::log(rng.uniform()) / rate;
}

double draw_inverse_gamma(double shape, double scale, RngHandle& rng) {
  if (!(shape > 0.0) || !(scale > 0.0))
    throw std::invalid_argument("draw_inverse_gamma: parameters must be positive");
  return scale / draw_gamma(shape, 1.0, rng);
}

int draw_categorical(std::span<const double> weights, RngHandle& rng) {
  double total = 0.0;
  for (double w : weights) {
    if (w < 0.0 || !std::isfinite(w))
      throw std::invalid_argument("draw_categorical: weights must be finite and nonnegative");
    total += w;
  }
  if (total <= 0.0)
    throw std::invalid_argument("draw_categorical: all weights are zero");
  const double u = rng.uniform() * total;
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    if (u <= acc) return static_cast<int>(i);
  }
  return static_cast<int>(weights.size()) - 1;
}

Eigen::VectorXd draw_mvn_cov(const Eigen::VectorXd& mean,
                             const Eigen::MatrixXd& cov, RngHandle& rng) {
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success)
    throw std::domain_error("draw_mvn_cov: covariance is not positive definite");
  Eigen::VectorXd z(mean.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
  return mean + llt.matrixL() * z;
}

Eigen::VectorXd draw_mvn_prec(const Eigen::VectorXd& mean,
                              const Eigen::MatrixXd& prec, RngHandle& rng) {
  Eigen::LLT<Eigen::MatrixXd> llt(prec);
  if (llt.info() != Eigen::Success)
    throw std::domain_error("draw_mvn_prec: precision is not positive definite");
  return draw_mvn_prec_llt(mean, llt, rng);
}

Eigen::VectorXd draw_mvn_prec_llt(const Eigen::VectorXd& mean,
                                  const Eigen::LLT<Eigen::MatrixXd>& llt,
                                  RngHandle& rng) {
  Eigen::VectorXd z(mean.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
  return mean + llt.matrixU().solve(z);
}

}  // namespace btac
