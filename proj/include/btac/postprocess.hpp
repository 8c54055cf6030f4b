#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "btac/engine.hpp"
#include "btac/tensor.hpp"

namespace btac {

/// Output of the sequential 2-means signal search over posterior draws.
struct TwoMeansResult {
  int signal_count = 0;              // posterior median of the per-draw counts
  std::vector<int> per_draw_counts;  // h_s
  std::vector<double> median;        // per-coordinate posterior median
  std::vector<double> estimate;      // median with all but the H largest zeroed
  std::vector<int> selected;         // surviving coordinate indices, ascending
};

/// Exact 1-D 2-means split of the given values (no local optima).
struct TwoMeansSplit {
  double lower_center = 0.0, upper_center = 0.0;
  double pooled_sd = 0.0;
  std::vector<double> lower;  // values in the lower cluster
  std::size_t upper_size = 0;
};
TwoMeansSplit two_means_split(std::vector<double> values);

/// Signals in one draw: split the absolute values by 2-means, count the
/// upper cluster as signal while the centers are separated by more than
/// b_tune, and recurse into the lower cluster. b_tune <= 0 selects the
/// default 2 x the sd of the draw's absolute values (the single-cluster
/// pooled sd before any split).
int count_signals(std::span<const double> draw, double b_tune);

TwoMeansResult sequential_two_means(const std::vector<std::vector<double>>& draws,
                                    double b_tune = 0.0);

/// Deviance information criterion from posterior-mean plug-ins and a
/// stride-thinned post-burn-in draw average.
double dic(const ChainStore& chain, const EngineContext& ctx, int stride);
double dic(const ChainStore& chain, const Dataset& ds, int stride);

/// sqrt of the total squared error over all regions and cells.
double rmse_coefficients(const std::vector<DenseTensor>& estimate,
                         const std::vector<DenseTensor>& truth);

/// Rank-statistic AUC (ties count 1/2). The mask must contain at least
/// one positive and one negative.
double roc_auc(std::span<const double> scores, std::span<const int> truth_mask);

struct IntervalMetrics {
  double mean_length = 0.0;
  double coverage = 0.0;
};

/// 95% equal-tailed credible intervals of every composed coefficient cell
/// over the post-burn-in draws; coverage against the truth tensors.
IntervalMetrics interval_metrics(const ChainStore& chain,
                                 const std::vector<DenseTensor>& truth);

/// ESS with the initial-positive-sequence truncation, capped at the
/// series length; a constant series counts as fully mixed.
double effective_sample_size(std::span<const double> series);

/// Median ESS over every composed coefficient cell of the chain.
double median_coefficient_ess(const ChainStore& chain);

struct ConnectivitySelection {
  Eigen::MatrixXd precision;     // selected sparse precision (medians)
  Eigen::MatrixXd partial_corr;  // derived partial correlations
  std::vector<std::pair<int, int>> connected;  // upper-triangle pairs
};

/// Sequential 2-means over the off-diagonal precision draws; surviving
/// entries take their posterior medians, everything else is zeroed, then
/// the result is transformed to partial correlations.
ConnectivitySelection select_connectivity(const ChainStore& chain,
                                          double b_tune = 0.0);

struct PosteriorSummary {
  std::vector<DenseTensor> b_mean;
  std::vector<DenseTensor> b_median;
  std::vector<DenseTensor> b_selected;  // medians with non-signals zeroed
  std::vector<DenseTensor> ci_lower, ci_upper;
  int signal_count = 0;
  ConnectivitySelection connectivity;
};

PosteriorSummary summarize_chain(const ChainStore& chain, double b_tune = 0.0);

/// One metrics-table row. Truth-dependent entries are NaN when the
/// dataset carries no truth record.
struct MetricsRow {
  std::string label;
  double log_dic = 0.0;
  double rmse_b = 0.0;
  double auc = 0.0;
  double ci_length = 0.0;
  double ci_coverage = 0.0;
  double wall_hours = 0.0;
};

MetricsRow compute_metrics(const ChainStore& chain, const EngineContext& ctx,
                           const Dataset& ds);

}  // namespace btac
