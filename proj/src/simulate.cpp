#include "btac/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace btac {

BlockDesign make_block_design(int period, int T) {
  if (period <= 0 || T <= 0 || period > T)
    throw std::invalid_argument("make_block_design: need 0 < period <= T");
  BlockDesign d;
  d.period = period;
  d.T = T;
  d.z.assign(T, 0.0);
  const double half = period / 2.0;
  for (int t = 1; t <= T; ++t) {
    const int k = (t - 1) / period;  // the only k with kP < t <= (k+1)P
    if (static_cast<double>(t) > static_cast<double>(k) * period &&
        static_cast<double>(t) < static_cast<double>(k) * period + half)
      d.z[t - 1] = 1.0;
  }
  return d;
}

namespace {
double gamma_bump(double t, double delay, double dispersion) {
  if (t <= 0.0) return 0.0;
  const double peak = delay * dispersion;
  return std::pow(t / peak, delay) * std::exp(-(t - peak) / dispersion);
}
}  // namespace

std::vector<double> hrf_kernel(const HrfParams& p, int length, double dt) {
  if (length <= 0 || dt <= 0.0)
    throw std::invalid_argument("hrf_kernel: need length > 0 and dt > 0");
  if (p.response_dispersion <= 0.0 || p.undershoot_dispersion <= 0.0 ||
      p.response_delay <= 0.0 || p.undershoot_delay <= 0.0 ||
      p.undershoot_scale < 0.0 || p.undershoot_scale >= 1.0)
    throw std::invalid_argument("hrf_kernel: invalid parameters");
  std::vector<double> h(length);
  double peak = 0.0;
  for (int i = 0; i < length; ++i) {
    const double t = i * dt;
    h[i] = gamma_bump(t, p.response_delay, p.response_dispersion) -
           p.undershoot_scale *
               gamma_bump(t, p.undershoot_delay, p.undershoot_dispersion);
    peak = std::max(peak, std::abs(h[i]));
  }
  if (peak > 0.0)
    for (auto& v : h) v /= peak;
  return h;
}

std::vector<double> convolve_stimulus(const BlockDesign& design,
                                      const std::vector<double>& kernel) {
  if (static_cast<int>(kernel.size()) > design.T)
    throw std::invalid_argument("convolve_stimulus: kernel longer than design");
  std::vector<double> x(design.T, 0.0);
  for (int t = 0; t < design.T; ++t) {
    double s = 0.0;
    for (int k = 0; k < static_cast<int>(kernel.size()) && k <= t; ++k)
      s += kernel[k] * design.z[t - k];
    x[t] = s;
  }
  return x;
}

int draw_poisson(double rate, RngHandle& rng) {
  // Knuth product method; fine for the small rates used here.
  const double limit = std::exp(-rate);
  int k = 0;
  double p = 1.0;
  do {
    ++k;
    p *= rng.uniform();
  } while (p > limit);
  return k - 1;
}

std::vector<std::vector<int>> make_regions(int G, int D, double rate,
                                           RngHandle& rng) {
  if (G < 1 || D < 1 || rate <= 0.0)
    throw std::invalid_argument("make_regions: bad arguments");
  std::vector<std::vector<int>> dims(G, std::vector<int>(D));
  for (int g = 0; g < G; ++g)
    for (int j = 0; j < D; ++j) {
      int d;
      do {
        d = draw_poisson(rate, rng);
      } while (d < 5);  // short modes are degenerate for a CP factorization
      dims[g][j] = d;
    }
  return dims;
}

std::int64_t sphere_cell_count(int D, int radius) {
  // odometer over the cube [-r, r]^D
  const int side = 2 * radius + 1;
  std::vector<int> off(D, -radius);
  std::int64_t count = 0;
  std::int64_t total = 1;
  for (int j = 0; j < D; ++j) total *= side;
  for (std::int64_t i = 0; i < total; ++i) {
    std::int64_t r2 = 0;
    for (int j = 0; j < D; ++j) r2 += static_cast<std::int64_t>(off[j]) * off[j];
    if (r2 <= static_cast<std::int64_t>(radius) * radius) ++count;
    for (int j = 0; j < D; ++j) {
      if (++off[j] <= radius) break;
      off[j] = -radius;
    }
  }
  return count;
}

DenseTensor sphere_support(const std::vector<int>& dims,
                           const std::vector<int>& center, int radius) {
  DenseTensor out(dims);
  const int D = static_cast<int>(dims.size());
  std::vector<int> idx(D, 0);
  for (std::int64_t lin = 0; lin < out.size(); ++lin) {
    std::int64_t r2 = 0;
    for (int j = 0; j < D; ++j) {
      const std::int64_t d = idx[j] - center[j];
      r2 += d * d;
    }
    if (r2 <= static_cast<std::int64_t>(radius) * radius) out[lin] = 1.0;
    for (int j = 0; j < D; ++j) {
      if (++idx[j] < dims[j]) break;
      idx[j] = 0;
    }
  }
  return out;
}

DenseTensor make_true_coefficients(const std::vector<int>& dims, double cap,
                                   RngHandle& rng) {
  if (cap <= 0.0 || cap >= 1.0)
    throw std::invalid_argument("make_true_coefficients: cap must be in (0,1)");
  const int D = static_cast<int>(dims.size());
  const std::int64_t size = cell_count(dims);
  const auto budget = static_cast<std::int64_t>(cap * static_cast<double>(size));

  int radius = 0;
  while (sphere_cell_count(D, radius + 1) <= budget) ++radius;

  std::vector<int> center(D);
  for (int j = 0; j < D; ++j) {
    // interior positions where the sphere fits unclipped, if any
    const bool fits = dims[j] - 1 - radius >= radius;
    const int lo = fits ? radius : 0;
    const int hi = fits ? dims[j] - 1 - radius : dims[j] - 1;
    center[j] = lo + static_cast<int>(rng.uniform() * (hi - lo + 1));
    center[j] = std::min(center[j], hi);
  }
  return sphere_support(dims, center, radius);
}

Eigen::MatrixXd make_connectivity_covariance(int G,
                                             const std::vector<ConnectedPair>& pairs,
                                             double snr, double sigma_y2) {
  if (G < 1 || snr <= 0.0 || sigma_y2 < 0.0)
    throw std::invalid_argument("make_connectivity_covariance: bad arguments");
  Eigen::MatrixXd corr = Eigen::MatrixXd::Identity(G, G);
  for (const auto& p : pairs) {
    if (p.a < 0 || p.b < 0 || p.a >= G || p.b >= G || p.a == p.b)
      throw std::invalid_argument("make_connectivity_covariance: bad pair indices");
    if (std::abs(p.rho) >= 1.0)
      throw std::invalid_argument("make_connectivity_covariance: |rho| must be < 1");
    if (corr(p.a, p.b) != 0.0 && corr(p.a, p.b) != p.rho)
      throw std::invalid_argument("make_connectivity_covariance: conflicting pair specs");
    corr(p.a, p.b) = corr(p.b, p.a) = p.rho;
  }
  Eigen::MatrixXd cov = snr * sigma_y2 * corr;
  if (sigma_y2 > 0.0) {
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success)
      throw std::invalid_argument(
          "make_connectivity_covariance: implied covariance is not positive definite");
  }
  return cov;
}

Dataset generate_dataset(const SimSpec& spec, RngHandle& rng) {
  if (spec.n < 1 || spec.T < 1 || spec.G < 1 || spec.D < 1)
    throw std::invalid_argument("generate_dataset: bad dimensions");
  if (spec.cnr <= 0.0 || spec.sigma_y2 < 0.0)
    throw std::invalid_argument("generate_dataset: cnr must be positive, sigma_y2 >= 0");

  Dataset ds;
  ds.n = spec.n;
  ds.T = spec.T;
  ds.G = spec.G;
  ds.D = spec.D;

  // Covariate: HRF-convolved block design, centered over time so the
  // stimulus component of each series has zero temporal mean and the
  // region effect d carries the series intercept.
  BlockDesign block = make_block_design(spec.period, spec.T);
  const int klen = std::min(spec.hrf_kernel_length, spec.T);
  std::vector<double> kernel = hrf_kernel(spec.hrf, klen, 1.0);
  ds.covariate = convolve_stimulus(block, kernel);
  const double xbar =
      std::accumulate(ds.covariate.begin(), ds.covariate.end(), 0.0) / spec.T;
  for (auto& v : ds.covariate) v -= xbar;

  if (spec.region_dims) {
    if (static_cast<int>(spec.region_dims->size()) != spec.G)
      throw std::invalid_argument("generate_dataset: region_dims size != G");
    ds.region_dims = *spec.region_dims;
  } else {
    ds.region_dims = make_regions(spec.G, spec.D, spec.poisson_rate, rng);
  }

  const double sigma_y = std::sqrt(spec.sigma_y2);

  ds.truth.present = true;
  ds.truth.coeff.reserve(spec.G);
  for (int g = 0; g < spec.G; ++g) {
    DenseTensor b = make_true_coefficients(ds.region_dims[g], spec.activation_cap, rng);
    const double amp = spec.cnr * sigma_y;
    for (std::int64_t i = 0; i < b.size(); ++i) b[i] *= amp;
    ds.truth.coeff.push_back(std::move(b));
  }

  Eigen::MatrixXd cov =
      make_connectivity_covariance(spec.G, spec.pairs, spec.snr, spec.sigma_y2);
  ds.truth.effects = Eigen::MatrixXd::Zero(spec.n, spec.G);
  if (spec.sigma_y2 > 0.0) {
    for (int i = 0; i < spec.n; ++i)
      ds.truth.effects.row(i) =
          draw_mvn_cov(Eigen::VectorXd::Zero(spec.G), cov, rng).transpose();
    ds.truth.precision = cov.inverse();
  } else {
    ds.truth.precision = Eigen::MatrixXd::Zero(spec.G, spec.G);
  }

  ds.y.assign(spec.n, std::vector<std::vector<double>>(spec.G));
  for (int i = 0; i < spec.n; ++i) {
    for (int g = 0; g < spec.G; ++g) {
      const std::int64_t V = ds.region_size(g);
      auto& series = ds.y[i][g];
      series.assign(static_cast<std::size_t>(spec.T) * V, 0.0);
      const DenseTensor& b = ds.truth.coeff[g];
      const double d_ig = ds.truth.effects(i, g);
      for (int t = 0; t < spec.T; ++t) {
        const double xt = ds.covariate[t];
        double* row = series.data() + static_cast<std::int64_t>(t) * V;
        for (std::int64_t v = 0; v < V; ++v) {
          double e = sigma_y > 0.0 ? sigma_y * rng.normal() : 0.0;
          row[v] = b[v] * xt + d_ig + e;
        }
      }
    }
  }
  return ds;
}

}  // namespace btac
