#pragma once

#include <cstdint>
#include <vector>

#include "btac/rng.hpp"
#include "btac/simulate.hpp"
#include "btac/tensor.hpp"

namespace btac {

/// Hyperparameters of the margin shrinkage hierarchy and the noise
/// variance prior, with the alpha grid for the stick-breaking tuning
/// parameter. defaults(D, R) applies the standard choices: a_lambda = 3,
/// b_lambda = a_lambda^(1/2D), a_tau = D - 1, b_tau = R^(1/D - 1),
/// a_sigma = 1, b_sigma = -log(0.95), and a 10-point equally spaced alpha
/// grid on [R^-D, R^-0.10].
struct ShrinkageHyper {
  double a_lambda = 3.0;
  double b_lambda = 1.0;
  double a_tau = 1.0;
  double b_tau = 1.0;
  double a_sigma = 1.0;
  double b_sigma = 0.05129329438755058;  // -log(0.95)
  std::vector<double> alpha_grid;

  static ShrinkageHyper defaults(int D, int R);
  static std::vector<double> make_alpha_grid(int D, int R);
};

/// Fixed per-region data summaries; everything the coefficient updates
/// need from the raw series.
struct RegionSuffStats {
  std::vector<int> dims;
  std::int64_t vox = 0;
  std::vector<double> yx;        // sum_{i,t} x_t y[v]
  double syy = 0.0;              // sum of squared cells
  std::vector<double> subj_sum;  // sum_{t,v} y per subject
};

struct DesignStats {
  double sx = 0.0, sxx = 0.0;
  int n = 0, T = 0;
};

RegionSuffStats compute_region_stats(const Dataset& ds, int g);
DesignStats compute_design_stats(const Dataset& ds);

/// Counters for the rare numeric fallbacks the updates may take.
struct UpdateDiagnostics {
  int griddy_uniform_fallbacks = 0;
  int tau_chi_clamps = 0;
};

/// Per-region state of the PARAFAC margins and their shrinkage hierarchy.
/// rank1 caches the composed rank-1 components and is kept current by the
/// margin updates.
struct RegionActivation {
  ParafacCoeff coeff;
  std::vector<DenseTensor> rank1;
  std::vector<double> xi;   // R-1 stick fractions in (0,1)
  std::vector<double> phi;  // R simplex weights
  double tau = 1.0;
  std::vector<double> lambda;               // index j*R + r
  std::vector<std::vector<double>> omega;   // [j*R + r][l], diagonal of W
  int alpha_index = 0;
  double alpha = 1.0;

  int rank() const { return coeff.rank(); }
  int order() const { return coeff.order(); }
  const std::vector<int>& dims() const { return coeff.dims(); }
  int margin_total() const;  // sum of mode lengths

  void refresh_phi();
  void refresh_rank1();
  DenseTensor composed() const;
  void composed_excluding(int r, DenseTensor& out) const;
  /// beta' W^{-1} beta for margin (j, r).
  double quad_form(int j, int r) const;
};

/// init_scale is the per-margin sd of the random initialization; the
/// engine passes max(0.01, cell_scale^(1/D)) where cell_scale is the
/// largest per-cell least-squares magnitude, so chains start at the data
/// scale instead of inside the zero-coefficient attractor.
RegionActivation init_region_activation(const std::vector<int>& dims, int R,
                                        const ShrinkageHyper& hyper, RngHandle& rng,
                                        double init_scale = 0.01);

/// Simplex weights from stick fractions (phi_r = xi_r prod_{l<r}(1-xi_l),
/// last weight takes the remainder). Entries are floored at DBL_MIN.
std::vector<double> sticks_to_weights(const std::vector<double>& xi, int R);

struct GigParams {
  double nu = 0.0, chi = 0.0, psi = 0.0;
};
struct GammaParams {
  double shape = 0.0, rate = 0.0;
};
struct GaussianVecParams {
  std::vector<double> mean, var;
};

// --- full-conditional parameter computations (shared by the updates and
// by the goodness-of-fit suites) ---

GigParams tau_conditional(const RegionActivation& st, const ShrinkageHyper& hyper,
                          UpdateDiagnostics* diag = nullptr);
GammaParams lambda_conditional(const RegionActivation& st, const ShrinkageHyper& hyper,
                               int j, int r);
GigParams omega_conditional(const RegionActivation& st, int j, int r, int l);
GaussianVecParams margin_conditional(const RegionActivation& st,
                                     const RegionSuffStats& rs, const DesignStats& ds,
                                     double d_sum, double sigma_y2, int j, int r);

/// Log of the exact full conditional of stick r at candidate value x,
/// up to an additive constant: the rank k >= r margin normals plus the
/// Beta(1, alpha) prior factor.
double xi_log_kernel(const RegionActivation& st, int r, double x);

/// Log Monte-Carlo weights of the alpha grid: for each grid value, the
/// log of the average over M draws of (phi, tau) from their priors of the
/// margin density at the current state.
std::vector<double> alpha_griddy_log_weights(const RegionActivation& st,
                                             const ShrinkageHyper& hyper, int M,
                                             RngHandle& rng);

// --- Gibbs updates ---

void update_alpha_griddy(RegionActivation& st, const ShrinkageHyper& hyper, int M,
                         RngHandle& rng, UpdateDiagnostics* diag = nullptr);

/// One Metropolis step on stick r with the stated N(current, 0.01^2)
/// proposal; recomputes phi on acceptance. Returns acceptance.
bool update_xi_mh(RegionActivation& st, int r, RngHandle& rng);
/// Deterministic accept/reject given a proposal and a uniform draw.
bool try_xi_update(RegionActivation& st, int r, double proposal, double u);

void update_tau(RegionActivation& st, const ShrinkageHyper& hyper, RngHandle& rng,
                UpdateDiagnostics* diag = nullptr);
void update_lambda(RegionActivation& st, const ShrinkageHyper& hyper, int j, int r,
                   RngHandle& rng);
void update_omega(RegionActivation& st, int j, int r, int l, RngHandle& rng);
void update_margin(RegionActivation& st, const RegionSuffStats& rs,
                   const DesignStats& ds, double d_sum, double sigma_y2, int j,
                   int r, RngHandle& rng);

/// Conjugate inverse-gamma draw of the shared noise variance.
double update_sigma_y(const ShrinkageHyper& hyper, double rss,
                      std::int64_t n_cells, RngHandle& rng);

/// Residual sum of squares of one region given composed coefficients b,
/// per-subject effects d (length n), and the region data summaries.
double region_rss(const DenseTensor& b, const RegionSuffStats& rs,
                  const DesignStats& ds, std::span<const double> d);

// --- vectorized per-voxel baseline ---

/// State of the voxel-wise shrinkage competitor for one region: a
/// coefficient per voxel with its own local scale, one lambda and one tau
/// per region.
struct RegionVectorized {
  std::vector<int> dims;
  std::vector<double> coeff;
  std::vector<double> omega;
  double lambda = 1.0;
  double tau = 1.0;
};

RegionVectorized init_region_vectorized(const std::vector<int>& dims,
                                        const ShrinkageHyper& hyper, RngHandle& rng,
                                        double init_scale = 0.01);

GigParams vectorized_tau_conditional(const RegionVectorized& st,
                                     const ShrinkageHyper& hyper);
GaussianVecParams vectorized_coeff_conditional(const RegionVectorized& st,
                                               const RegionSuffStats& rs,
                                               const DesignStats& ds, double d_sum,
                                               double sigma_y2);

/// Full per-region sweep of the baseline: tau, lambda, local scales, then
/// every voxel coefficient.
void update_vectorized_region(RegionVectorized& st, const RegionSuffStats& rs,
                              const DesignStats& ds, double d_sum, double sigma_y2,
                              const ShrinkageHyper& hyper, RngHandle& rng);

DenseTensor vectorized_composed(const RegionVectorized& st);

}  // namespace btac
