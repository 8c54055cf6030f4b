#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <random>
#include <span>

namespace btac {

/// Seedable random stream. Identical (seed, stream) pairs reproduce the
/// same variate sequence bitwise on a given build; distinct stream ids
/// give statistically independent sequences. Handles are value types and
/// must not be shared across threads concurrently.
class RngHandle {
 public:
  RngHandle() : RngHandle(0, 0) {}
  RngHandle(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  std::uint64_t next_u64() { return eng_(); }
  /// Uniform on the open interval (0, 1).
  double uniform();
  /// Standard normal via the Marsaglia polar method.
  double normal();

  void save(std::ostream& os) const;
  void load(std::istream& is);

 private:
  std::uint64_t seed_ = 0, stream_ = 0;
  std::mt19937_64 eng_;
};

/// Gamma(shape, rate); mean shape/rate. Marsaglia-Tsang, with the
/// power-of-uniform boost for shape < 1.
double draw_gamma(double shape, double rate, RngHandle& rng);

/// Generalized inverse Gaussian with density proportional to
/// x^(nu-1) exp(-(chi/x + psi*x)/2). Valid domain: chi > 0 or nu > 0,
/// and psi > 0 or nu < 0. Boundary cases dispatch to gamma (chi = 0)
/// and inverse gamma (psi = 0); the interior uses ratio-of-uniforms
/// (with mode shift when nu or the concentration is large) or gamma
/// rejection for small concentration.
double draw_gig(double nu, double chi, double psi, RngHandle& rng);

/// Inverse Gaussian(mean mu, shape lambda) via the transformation-with-
/// rejection scheme.
double draw_inverse_gaussian(double mean, double shape, RngHandle& rng);

double draw_beta(double a, double b, RngHandle& rng);
double draw_exponential(double rate, RngHandle& rng);
/// Inverse gamma with the given shape and scale; mean scale/(shape-1).
double draw_inverse_gamma(double shape, double scale, RngHandle& rng);
/// Index draw proportional to the given nonnegative weights.
int draw_categorical(std::span<const double> weights, RngHandle& rng);

/// Gaussian vector with the given mean and covariance (Cholesky of the
/// covariance). Throws if the matrix is not positive definite.
Eigen::VectorXd draw_mvn_cov(const Eigen::VectorXd& mean,
                             const Eigen::MatrixXd& cov, RngHandle& rng);

/// Gaussian vector with the given mean and *precision* matrix. Solves
/// against the Cholesky factor; never forms the inverse.
Eigen::VectorXd draw_mvn_prec(const Eigen::VectorXd& mean,
                              const Eigen::MatrixXd& prec, RngHandle& rng);

/// Precision-parameterized draw reusing an existing factorization:
/// returns mean + L^{-T} z for the factor L of the precision.
Eigen::VectorXd draw_mvn_prec_llt(const Eigen::VectorXd& mean,
                                  const Eigen::LLT<Eigen::MatrixXd>& llt,
                                  RngHandle& rng);

}  // namespace btac
