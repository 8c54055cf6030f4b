#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "btac/rng.hpp"
#include "btac/tensor.hpp"

namespace btac {

/// Boxcar stimulus: z_t = 1 iff kP < t < kP + P/2 for some integer k >= 0,
/// with t = 1..T (strict inequalities).
struct BlockDesign {
  int period = 0;
  int T = 0;
  std::vector<double> z;  // z[t-1] for t = 1..T
};

/// Double-gamma hemodynamic response parameters (canonical defaults).
struct HrfParams {
  double response_delay = 6.0;
  double undershoot_delay = 12.0;
  double response_dispersion = 0.9;
  double undershoot_dispersion = 0.9;
  double undershoot_scale = 0.35;
};

struct ConnectedPair {
  int a = 0, b = 0;  // region indices, 0-based
  double rho = 0.0;
};

struct SimSpec {
  int n = 20;
  int T = 100;
  int G = 10;
  int D = 3;
  int period = 30;
  double poisson_rate = 10.0;
  double cnr = 1.0;
  double snr = 5.0;
  double sigma_y2 = 1.0;
  double activation_cap = 0.05;
  std::vector<ConnectedPair> pairs;
  HrfParams hrf;
  int hrf_kernel_length = 32;
  /// When set, overrides the Poisson region draw.
  std::optional<std::vector<std::vector<int>>> region_dims;
};

struct DatasetTruth {
  bool present = false;
  std::vector<DenseTensor> coeff;  // scaled B^0 per region
  Eigen::MatrixXd effects;         // n x G
  Eigen::MatrixXd precision;       // G x G (inverse of the effect covariance)
};

/// In-memory dataset. Response series for (subject, region) are stored
/// time-major: y[i][g][t*V + v] with v the mode-1-fastest voxel index.
struct Dataset {
  int n = 0, T = 0, G = 0, D = 0;
  std::vector<std::vector<int>> region_dims;
  std::vector<double> covariate;                     // x_t, length T
  std::vector<std::vector<std::vector<double>>> y;   // [subject][region]
  DatasetTruth truth;

  std::int64_t region_size(int g) const { return cell_count(region_dims[g]); }
};

BlockDesign make_block_design(int period, int T);

/// Sampled double-gamma kernel h(i*dt), i = 0..length-1, peak-normalized
/// to 1. The bump g(t; delay a, dispersion b) = (t/(ab))^a exp(-(t-ab)/b)
/// peaks at t = ab.
std::vector<double> hrf_kernel(const HrfParams& params, int length, double dt);

/// Causal discrete convolution of the stimulus with the kernel, truncated
/// to the design length.
std::vector<double> convolve_stimulus(const BlockDesign& design,
                                      const std::vector<double>& kernel);

/// Per-region mode lengths: D Poisson(rate) draws each, redrawn until >= 5.
std::vector<std::vector<int>> make_regions(int G, int D, double rate,
                                           RngHandle& rng);

int draw_poisson(double rate, RngHandle& rng);

/// Number of lattice cells within Euclidean distance `radius` of a center
/// (unclipped).
std::int64_t sphere_cell_count(int D, int radius);

/// 0/1 support tensor of cells within `radius` of `center`, clipped to the
/// tensor bounds.
DenseTensor sphere_support(const std::vector<int>& dims,
                           const std::vector<int>& center, int radius);

/// One spherical 0/1 support whose voxel count respects cap * region size;
/// radius is the largest integer with that property and the center is
/// uniform over positions where the sphere fits (all positions in a mode
/// if none fit). Too-small regions get a single-voxel support.
DenseTensor make_true_coefficients(const std::vector<int>& dims, double cap,
                                   RngHandle& rng);

/// Region-effect covariance: correlation rho on the listed pairs, zero
/// elsewhere, scaled so the diagonal equals snr * sigma_y2. Throws if the
/// result is not positive definite.
Eigen::MatrixXd make_connectivity_covariance(int G,
                                             const std::vector<ConnectedPair>& pairs,
                                             double snr, double sigma_y2);

/// Forward-simulates Y[i][g][t,v] = B0_g[v] x_t + d_{i,g} + N(0, sigma_y2)
/// with d_i ~ N(0, covariance) and the covariate centered to zero temporal
/// mean (so the stimulus component of every series is centered). Active
/// cells of B0 equal cnr * sigma_y.
Dataset generate_dataset(const SimSpec& spec, RngHandle& rng);

}  // namespace btac
