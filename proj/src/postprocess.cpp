#include "btac/postprocess.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace btac {

TwoMeansSplit two_means_split(std::vector<double> values) {
  TwoMeansSplit out;
  const std::size_t n = values.size();
  if (n < 2) {
    out.lower = std::move(values);
    return out;
  }
  std::sort(values.begin(), values.end());
  std::vector<double> pre_sum(n + 1, 0.0), pre_ssq(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    pre_sum[i + 1] = pre_sum[i] + values[i];
    pre_ssq[i + 1] = pre_ssq[i] + values[i] * values[i];
  }
  double best = std::numeric_limits<double>::infinity();
  std::size_t best_k = 1;
  for (std::size_t k = 1; k < n; ++k) {
    const double lo_sum = pre_sum[k], hi_sum = pre_sum[n] - pre_sum[k];
    const double lo_ssq = pre_ssq[k], hi_ssq = pre_ssq[n] - pre_ssq[k];
    const double sse = (lo_ssq - lo_sum * lo_sum / k) +
                       (hi_ssq - hi_sum * hi_sum / (n - k));
    if (sse < best) {
      best = sse;
      best_k = k;
    }
  }
  out.lower_center = pre_sum[best_k] / best_k;
  out.upper_center = (pre_sum[n] - pre_sum[best_k]) / (n - best_k);
  out.pooled_sd = std::sqrt(std::max(best, 0.0) / std::max<std::size_t>(n - 2, 1));
  out.lower.assign(values.begin(), values.begin() + best_k);
  out.upper_size = n - best_k;
  return out;
}

int count_signals(std::span<const double> draw, double b_tune) {
  std::vector<double> work(draw.size());
  for (std::size_t i = 0; i < draw.size(); ++i) work[i] = std::abs(draw[i]);

  double b = b_tune;
  if (b <= 0.0 && work.size() >= 2) {
    // default separation scale: twice the sd of the draw's absolute
    // values (the single-cluster pooled sd before any split). A pure
    // noise split separates its centers by about 1.0 sd, which stays
    // below this bar; any real signal cluster pushes far beyond it.
    double mean = 0.0;
    for (double v : work) mean += v / static_cast<double>(work.size());
    double ss = 0.0;
    for (double v : work) ss += (v - mean) * (v - mean);
    b = 2.0 * std::sqrt(ss / static_cast<double>(work.size() - 1));
  }

  int h = 0;
  while (work.size() >= 2) {
    TwoMeansSplit split = two_means_split(std::move(work));
    if (!(split.upper_center - split.lower_center > b)) break;
    h += static_cast<int>(split.upper_size);
    work = std::move(split.lower);
  }
  return h;
}

TwoMeansResult sequential_two_means(const std::vector<std::vector<double>>& draws,
                                    double b_tune) {
  if (draws.empty())
    throw std::invalid_argument("sequential_two_means: need at least one draw");
  const std::size_t p = draws.front().size();
  for (const auto& d : draws)
    if (d.size() != p)
      throw std::invalid_argument("sequential_two_means: ragged draws");

  TwoMeansResult out;
  out.per_draw_counts.reserve(draws.size());
  for (const auto& d : draws) out.per_draw_counts.push_back(count_signals(d, b_tune));

  std::vector<int> counts = out.per_draw_counts;
  std::nth_element(counts.begin(), counts.begin() + counts.size() / 2, counts.end());
  out.signal_count = counts[counts.size() / 2];

  out.median.resize(p);
  std::vector<double> col(draws.size());
  for (std::size_t v = 0; v < p; ++v) {
    for (std::size_t s = 0; s < draws.size(); ++s) col[s] = draws[s][v];
    std::nth_element(col.begin(), col.begin() + col.size() / 2, col.end());
    out.median[v] = col[col.size() / 2];
  }

  out.estimate.assign(p, 0.0);
  if (out.signal_count > 0) {
    std::vector<std::size_t> order(p);
    std::iota(order.begin(), order.end(), 0);
    const std::size_t keep = std::min<std::size_t>(out.signal_count, p);
    std::partial_sort(order.begin(), order.begin() + keep, order.end(),
                      [&](std::size_t a, std::size_t b) {
                        return std::abs(out.median[a]) > std::abs(out.median[b]);
                      });
    out.selected.assign(order.begin(), order.begin() + keep);
    std::sort(out.selected.begin(), out.selected.end());
    for (int idx : out.selected) out.estimate[idx] = out.median[idx];
  }
  return out;
}

namespace {

struct PostBurn {
  int first = 0, count = 0;
};

PostBurn post_burn_range(const ChainStore& chain) {
  PostBurn pb;
  pb.first = chain.meta().burnin;
  pb.count = chain.iterations_recorded() - pb.first;
  if (pb.count < 1)
    throw std::invalid_argument("chain has no post-burn-in draws");
  return pb;
}

std::vector<DenseTensor> composed_all(const ChainStore& chain, int s) {
  std::vector<DenseTensor> b;
  b.reserve(chain.meta().G);
  for (int g = 0; g < chain.meta().G; ++g) b.push_back(chain.composed_b(s, g));
  return b;
}

// type-7 empirical quantile of a scratch vector (reordered in place)
double quantile(std::vector<double>& v, double q) {
  const double pos = q * (static_cast<double>(v.size()) - 1.0);
  const auto lo = static_cast<std::size_t>(pos);
  const double w = pos - static_cast<double>(lo);
  std::nth_element(v.begin(), v.begin() + lo, v.end());
  const double a = v[lo];
  if (w == 0.0 || lo + 1 >= v.size()) return a;
  const double b = *std::min_element(v.begin() + lo + 1, v.end());
  return a * (1.0 - w) + b * w;
}

}  // namespace

double dic(const ChainStore& chain, const EngineContext& ctx, int stride) {
  if (stride < 1) throw std::invalid_argument("dic: stride must be >= 1");
  const PostBurn pb = post_burn_range(chain);
  const int G = chain.meta().G;

  // posterior-mean plug-ins over all post-burn draws
  std::vector<DenseTensor> b_mean;
  for (int g = 0; g < G; ++g) b_mean.emplace_back(chain.meta().region_dims[g]);
  Eigen::MatrixXd d_mean = Eigen::MatrixXd::Zero(chain.meta().n, G);
  double s2_mean = 0.0;
  for (int s = pb.first; s < pb.first + pb.count; ++s) {
    for (int g = 0; g < G; ++g) {
      DenseTensor b = chain.composed_b(s, g);
      for (std::int64_t v = 0; v < b.size(); ++v) b_mean[g][v] += b[v] / pb.count;
    }
    d_mean += chain.effects(s) / pb.count;
    s2_mean += chain.sigma_y2(s) / pb.count;
  }
  const double l_hat = log_likelihood(ctx, b_mean, d_mean, s2_mean);

  double l_bar = 0.0;
  int thinned = 0;
  for (int s = pb.first; s < pb.first + pb.count; s += stride) {
    l_bar += log_likelihood(ctx, composed_all(chain, s), chain.effects(s),
                            chain.sigma_y2(s));
    ++thinned;
  }
  if (thinned < 2) throw std::invalid_argument("dic: need at least two thinned draws");
  l_bar /= thinned;

  const double p_dic = 2.0 * (l_hat - l_bar);
  return -2.0 * l_hat + 2.0 * p_dic;
}

double dic(const ChainStore& chain, const Dataset& ds, int stride) {
  return dic(chain, prepare_context(ds), stride);
}

double rmse_coefficients(const std::vector<DenseTensor>& estimate,
                         const std::vector<DenseTensor>& truth) {
  if (estimate.size() != truth.size())
    throw std::invalid_argument("rmse_coefficients: region count mismatch");
  double s = 0.0;
  for (std::size_t g = 0; g < estimate.size(); ++g) {
    if (estimate[g].dims() != truth[g].dims())
      throw std::invalid_argument("rmse_coefficients: dims mismatch");
    for (std::int64_t v = 0; v < estimate[g].size(); ++v) {
      const double d = estimate[g][v] - truth[g][v];
      s += d * d;
    }
  }
  return std::sqrt(s);
}

double roc_auc(std::span<const double> scores, std::span<const int> truth_mask) {
  if (scores.size() != truth_mask.size())
    throw std::invalid_argument("roc_auc: length mismatch");
  std::size_t npos = 0;
  for (int m : truth_mask) npos += m != 0 ? 1 : 0;
  const std::size_t nneg = truth_mask.size() - npos;
  if (npos == 0 || nneg == 0)
    throw std::invalid_argument("roc_auc: need both positives and negatives");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // midranks for ties, then the Mann-Whitney statistic
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
    for (std::size_t k = i; k <= j; ++k)
      if (truth_mask[order[k]] != 0) rank_sum_pos += midrank;
    i = j + 1;
  }
  const double u = rank_sum_pos - 0.5 * static_cast<double>(npos) * (npos + 1);
  return u / (static_cast<double>(npos) * static_cast<double>(nneg));
}

IntervalMetrics interval_metrics(const ChainStore& chain,
                                 const std::vector<DenseTensor>& truth) {
  const PostBurn pb = post_burn_range(chain);
  if (pb.count < 40)
    throw std::invalid_argument("interval_metrics: need >= 40 post-burn-in draws");
  const int G = chain.meta().G;
  if (static_cast<int>(truth.size()) != G)
    throw std::invalid_argument("interval_metrics: truth region count mismatch");

  double total_len = 0.0;
  std::int64_t covered = 0, cells = 0;
  for (int g = 0; g < G; ++g) {
    const std::int64_t V = cell_count(chain.meta().region_dims[g]);
    // draws x cells buffer for this region
    std::vector<double> buf(static_cast<std::size_t>(pb.count) * V);
    for (int s = 0; s < pb.count; ++s) {
      DenseTensor b = chain.composed_b(pb.first + s, g);
      std::copy(b.data().begin(), b.data().end(),
                buf.begin() + static_cast<std::size_t>(s) * V);
    }
    std::vector<double> col(pb.count);
    for (std::int64_t v = 0; v < V; ++v) {
      for (int s = 0; s < pb.count; ++s) col[s] = buf[static_cast<std::size_t>(s) * V + v];
      std::vector<double> tmp = col;
      const double lo = quantile(tmp, 0.025);
      tmp = col;
      const double hi = quantile(tmp, 0.975);
      total_len += hi - lo;
      const double t = truth[g][v];
      if (t >= lo && t <= hi) ++covered;
      ++cells;
    }
  }
  IntervalMetrics m;
  m.mean_length = total_len / static_cast<double>(cells);
  m.coverage = static_cast<double>(covered) / static_cast<double>(cells);
  return m;
}

double effective_sample_size(std::span<const double> series) {
  const std::size_t S = series.size();
  if (S < 10)
    throw std::invalid_argument("effective_sample_size: series too short");
  const double n = static_cast<double>(S);
  double mean = 0.0;
  for (double x : series) mean += x / n;
  double gamma0 = 0.0;
  for (double x : series) gamma0 += (x - mean) * (x - mean) / n;
  if (gamma0 <= 0.0) return n;  // constant series: no autocorrelation by convention

  auto gamma = [&](std::size_t k) {
    double s = 0.0;
    for (std::size_t t = 0; t + k < S; ++t)
      s += (series[t] - mean) * (series[t + k] - mean);
    return s / n;
  };

  double tau = -1.0;  // 2 * sum of pairwise sums - 1 = 1 + 2 sum_{k>=1} rho_k
  for (std::size_t m = 0;; ++m) {
    const std::size_t k0 = 2 * m, k1 = 2 * m + 1;
    if (k1 >= S) break;
    const double pair = (gamma(k0) + gamma(k1)) / gamma0;
    if (pair <= 0.0) break;
    tau += 2.0 * pair;
  }
  tau = std::max(tau, 1e-12);
  return std::min(n, n / tau);
}

double median_coefficient_ess(const ChainStore& chain) {
  const PostBurn pb = post_burn_range(chain);
  const int G = chain.meta().G;
  std::vector<double> ess;
  std::vector<double> series(pb.count);
  for (int g = 0; g < G; ++g) {
    const std::int64_t V = cell_count(chain.meta().region_dims[g]);
    std::vector<double> buf(static_cast<std::size_t>(pb.count) * V);
    for (int s = 0; s < pb.count; ++s) {
      DenseTensor b = chain.composed_b(pb.first + s, g);
      std::copy(b.data().begin(), b.data().end(),
                buf.begin() + static_cast<std::size_t>(s) * V);
    }
    for (std::int64_t v = 0; v < V; ++v) {
      for (int s = 0; s < pb.count; ++s)
        series[s] = buf[static_cast<std::size_t>(s) * V + v];
      ess.push_back(effective_sample_size(series));
    }
  }
  std::nth_element(ess.begin(), ess.begin() + ess.size() / 2, ess.end());
  return ess[ess.size() / 2];
}

ConnectivitySelection select_connectivity(const ChainStore& chain, double b_tune) {
  const PostBurn pb = post_burn_range(chain);
  const int G = chain.meta().G;
  const int m = G * (G - 1) / 2;

  ConnectivitySelection out;
  out.precision = Eigen::MatrixXd::Zero(G, G);
  out.partial_corr = Eigen::MatrixXd::Identity(G, G);
  if (m == 0) {
    out.precision(0, 0) = chain.sigma(pb.first)(0, 0);
    return out;
  }

  std::vector<std::vector<double>> draws(pb.count, std::vector<double>(m));
  std::vector<double> diag_col(pb.count);
  for (int s = 0; s < pb.count; ++s) {
    const Eigen::MatrixXd sig = chain.sigma(pb.first + s);
    int k = 0;
    for (int a = 0; a < G; ++a)
      for (int b = a + 1; b < G; ++b) draws[s][k++] = sig(a, b);
  }
  TwoMeansResult sel = sequential_two_means(draws, b_tune);

  // diagonal: per-entry posterior medians (never shrunk to zero)
  for (int g = 0; g < G; ++g) {
    for (int s = 0; s < pb.count; ++s)
      diag_col[s] = chain.sigma(pb.first + s)(g, g);
    std::nth_element(diag_col.begin(), diag_col.begin() + diag_col.size() / 2,
                     diag_col.end());
    out.precision(g, g) = diag_col[diag_col.size() / 2];
  }
  int k = 0;
  for (int a = 0; a < G; ++a)
    for (int b = a + 1; b < G; ++b) {
      if (sel.estimate[k] != 0.0) {
        out.precision(a, b) = out.precision(b, a) = sel.estimate[k];
        out.connected.emplace_back(a, b);
      }
      ++k;
    }
  out.partial_corr = partial_correlation(out.precision);
  return out;
}

PosteriorSummary summarize_chain(const ChainStore& chain, double b_tune) {
  const PostBurn pb = post_burn_range(chain);
  const int G = chain.meta().G;

  PosteriorSummary out;
  std::vector<std::int64_t> offsets(G + 1, 0);
  for (int g = 0; g < G; ++g)
    offsets[g + 1] = offsets[g] + cell_count(chain.meta().region_dims[g]);
  const std::int64_t total = offsets[G];

  std::vector<std::vector<double>> draws(
      pb.count, std::vector<double>(static_cast<std::size_t>(total)));
  for (int s = 0; s < pb.count; ++s)
    for (int g = 0; g < G; ++g) {
      DenseTensor b = chain.composed_b(pb.first + s, g);
      std::copy(b.data().begin(), b.data().end(),
                draws[s].begin() + offsets[g]);
    }

  TwoMeansResult sel = sequential_two_means(draws, b_tune);
  out.signal_count = sel.signal_count;

  std::vector<double> col(pb.count);
  for (int g = 0; g < G; ++g) {
    const auto& dims = chain.meta().region_dims[g];
    DenseTensor mean(dims), median(dims), selected(dims), lo(dims), hi(dims);
    const std::int64_t V = cell_count(dims);
    for (std::int64_t v = 0; v < V; ++v) {
      const std::size_t idx = static_cast<std::size_t>(offsets[g] + v);
      double m = 0.0;
      for (int s = 0; s < pb.count; ++s) {
        col[s] = draws[s][idx];
        m += col[s] / pb.count;
      }
      mean[v] = m;
      median[v] = sel.median[idx];
      selected[v] = sel.estimate[idx];
      std::vector<double> tmp = col;
      lo[v] = quantile(tmp, 0.025);
      tmp = col;
      hi[v] = quantile(tmp, 0.975);
    }
    out.b_mean.push_back(std::move(mean));
    out.b_median.push_back(std::move(median));
    out.b_selected.push_back(std::move(selected));
    out.ci_lower.push_back(std::move(lo));
    out.ci_upper.push_back(std::move(hi));
  }
  out.connectivity = select_connectivity(chain, b_tune);
  return out;
}

MetricsRow compute_metrics(const ChainStore& chain, const EngineContext& ctx,
                           const Dataset& ds) {
  MetricsRow row;
  row.label = chain.meta().label();
  const double d = dic(chain, ctx, chain.meta().dic_stride);
  row.log_dic = d > 0.0 ? std::log(d) : std::numeric_limits<double>::quiet_NaN();

  const PostBurn pb = post_burn_range(chain);
  const int G = chain.meta().G;
  std::vector<DenseTensor> b_mean;
  for (int g = 0; g < G; ++g) b_mean.emplace_back(chain.meta().region_dims[g]);
  for (int s = pb.first; s < pb.first + pb.count; ++s)
    for (int g = 0; g < G; ++g) {
      DenseTensor b = chain.composed_b(s, g);
      for (std::int64_t v = 0; v < b.size(); ++v) b_mean[g][v] += b[v] / pb.count;
    }

  if (ds.truth.present) {
    row.rmse_b = rmse_coefficients(b_mean, ds.truth.coeff);
    std::vector<double> scores;
    std::vector<int> mask;
    for (int g = 0; g < G; ++g)
      for (std::int64_t v = 0; v < b_mean[g].size(); ++v) {
        scores.push_back(std::abs(b_mean[g][v]));
        mask.push_back(ds.truth.coeff[g][v] != 0.0 ? 1 : 0);
      }
    row.auc = roc_auc(scores, mask);
    const IntervalMetrics im = interval_metrics(chain, ds.truth.coeff);
    row.ci_length = im.mean_length;
    row.ci_coverage = im.coverage;
  } else {
    row.rmse_b = std::numeric_limits<double>::quiet_NaN();
    row.auc = std::numeric_limits<double>::quiet_NaN();
    // interval length needs no truth; coverage does
    IntervalMetrics im;
    std::vector<DenseTensor> zeros;
    for (int g = 0; g < G; ++g) zeros.emplace_back(chain.meta().region_dims[g]);
    im = interval_metrics(chain, zeros);
    row.ci_length = im.mean_length;
    row.ci_coverage = std::numeric_limits<double>::quiet_NaN();
  }
  double wall = 0.0;
  for (double w : chain.wall_seconds()) wall += w;
  row.wall_hours = wall / 3600.0;
  return row;
}

}  // namespace btac
