#include "btac/activation.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace btac {

ShrinkageHyper ShrinkageHyper::defaults(int D, int R) {
  if (D < 2 || R < 1)
    throw std::invalid_argument("ShrinkageHyper::defaults: need D >= 2, R >= 1");
  ShrinkageHyper h;
  h.a_lambda = 3.0;
  h.b_lambda = std::pow(h.a_lambda, 1.0 / (2.0 * D));
  h.a_tau = static_cast<double>(D - 1);
  h.b_tau = std::pow(static_cast<double>(R), 1.0 / D - 1.0);
  h.a_sigma = 1.0;
  h.b_sigma = -std::log(0.95);
  h.alpha_grid = make_alpha_grid(D, R);
  return h;
}

std::vector<double> ShrinkageHyper::make_alpha_grid(int D, int R) {
  const double lo = std::pow(static_cast<double>(R), -static_cast<double>(D));
  const double hi = std::pow(static_cast<double>(R), -0.10);
  std::vector<double> grid(10);
  for (int i = 0; i < 10; ++i) grid[i] = lo + (hi - lo) * i / 9.0;
  return grid;
}

RegionSuffStats compute_region_stats(const Dataset& ds, int g) {
  RegionSuffStats rs;
  rs.dims = ds.region_dims[g];
  rs.vox = cell_count(rs.dims);
  rs.yx.assign(rs.vox, 0.0);
  rs.subj_sum.assign(ds.n, 0.0);
  for (int i = 0; i < ds.n; ++i) {
    const auto& series = ds.y[i][g];
    double acc = 0.0;
    for (int t = 0; t < ds.T; ++t) {
      const double xt = ds.covariate[t];
      const double* row = series.data() + static_cast<std::int64_t>(t) * rs.vox;
      for (std::int64_t v = 0; v < rs.vox; ++v) {
        rs.yx[v] += xt * row[v];
        rs.syy += row[v] * row[v];
        acc += row[v];
      }
    }
    rs.subj_sum[i] = acc;
  }
  return rs;
}

DesignStats compute_design_stats(const Dataset& ds) {
  DesignStats s;
  s.n = ds.n;
  s.T = ds.T;
  for (double x : ds.covariate) {
    s.sx += x;
    s.sxx += x * x;
  }
  return s;
}

int RegionActivation::margin_total() const {
  int p = 0;
  for (int d : dims()) p += d;
  return p;
}

std::vector<double> sticks_to_weights(const std::vector<double>& xi, int R) {
  std::vector<double> phi(R);
  double carry = 1.0;
  for (int r = 0; r < R - 1; ++r) {
    phi[r] = std::max(xi[r] * carry, DBL_MIN);
    carry *= (1.0 - xi[r]);
  }
  phi[R - 1] = std::max(carry, DBL_MIN);
  return phi;
}

void RegionActivation::refresh_phi() { phi = sticks_to_weights(xi, rank()); }

void RegionActivation::refresh_rank1() {
  rank1.resize(rank());
  for (int r = 0; r < rank(); ++r) coeff.compose_rank(r, rank1[r]);
}

DenseTensor RegionActivation::composed() const {
  DenseTensor out(dims());
  for (const auto& t : rank1) out += t;
  return out;
}

void RegionActivation::composed_excluding(int r, DenseTensor& out) const {
  if (out.dims() != dims()) out = DenseTensor(dims());
  out.fill(0.0);
  for (int l = 0; l < rank(); ++l)
    if (l != r) out += rank1[l];
}

double RegionActivation::quad_form(int j, int r) const {
  const auto m = coeff.margin(j, r);
  const auto& w = omega[static_cast<std::size_t>(j) * rank() + r];
  double q = 0.0;
  for (std::size_t l = 0; l < m.size(); ++l) q += m[l] * m[l] / w[l];
  return q;
}

RegionActivation init_region_activation(const std::vector<int>& dims, int R,
                                        const ShrinkageHyper& hyper, RngHandle& rng,
                                        double init_scale) {
  RegionActivation st;
  st.coeff = ParafacCoeff(dims, R);
  const int D = static_cast<int>(dims.size());
  for (int j = 0; j < D; ++j)
    for (int r = 0; r < R; ++r)
      for (auto& v : st.coeff.margin(j, r)) v = init_scale * rng.normal();
  st.xi.assign(std::max(R - 1, 0), 0.0);
  for (int r = 0; r < R - 1; ++r) st.xi[r] = 1.0 / (R - r);  // phi uniform at 1/R
  st.refresh_phi();
  st.tau = 1.0;
  st.lambda.assign(static_cast<std::size_t>(D) * R, hyper.a_lambda / hyper.b_lambda);
  st.omega.resize(static_cast<std::size_t>(D) * R);
  for (int j = 0; j < D; ++j)
    for (int r = 0; r < R; ++r)
      st.omega[static_cast<std::size_t>(j) * R + r].assign(dims[j], 1.0);
  st.alpha_index = static_cast<int>(hyper.alpha_grid.size()) / 2;
  st.alpha = hyper.alpha_grid.at(st.alpha_index);
  st.refresh_rank1();
  return st;
}

// --- conditional parameters ---

GigParams tau_conditional(const RegionActivation& st, const ShrinkageHyper& hyper,
                          UpdateDiagnostics* diag) {
  const int R = st.rank(), D = st.order();
  GigParams p;
  p.nu = hyper.a_tau - 0.5 * R * st.margin_total();
  p.psi = 2.0 * hyper.b_tau;
  double chi = 0.0;
  for (int r = 0; r < R; ++r) {
    double q = 0.0;
    for (int j = 0; j < D; ++j) q += st.quad_form(j, r);
    chi += q / st.phi[r];
  }
  if (chi <= 0.0 && p.nu <= 0.0) {
    chi = 1e-300;
    if (diag) ++diag->tau_chi_clamps;
  }
  p.chi = chi;
  return p;
}

GammaParams lambda_conditional(const RegionActivation& st, const ShrinkageHyper& hyper,
                               int j, int r) {
  const auto m = st.coeff.margin(j, r);
  double abs_sum = 0.0;
  for (double v : m) abs_sum += std::abs(v);
  GammaParams p;
  p.shape = hyper.a_lambda + static_cast<double>(m.size());
  p.rate = hyper.b_lambda + abs_sum / std::sqrt(st.phi[r] * st.tau);
  return p;
}

GigParams omega_conditional(const RegionActivation& st, int j, int r, int l) {
  const double beta = st.coeff.margin(j, r)[l];
  const double lam = st.lambda[static_cast<std::size_t>(j) * st.rank() + r];
  GigParams p;
  p.nu = 0.5;
  p.chi = beta * beta / (st.tau * st.phi[r]);
  p.psi = lam * lam;
  return p;
}

GaussianVecParams margin_conditional(const RegionActivation& st,
                                     const RegionSuffStats& rs, const DesignStats& ds,
                                     double d_sum, double sigma_y2, int j, int r) {
  const int R = st.rank(), D = st.order();
  const double prior_scale = st.phi[r] * st.tau;

  // residual accumulation tensor: sum_{i,t} x_t (y - d 1 - x_t B^{(-r)})
  DenseTensor c(st.dims());
  st.composed_excluding(r, c);
  for (std::int64_t v = 0; v < c.size(); ++v)
    c[v] = rs.yx[v] - ds.sx * d_sum - ds.n * ds.sxx * c[v];

  std::vector<std::span<const double>> margins(D);
  for (int k = 0; k < D; ++k) margins[k] = st.coeff.margin(k, r);
  std::vector<double> proj = outer_contraction(c, margins, j);

  double other_norm2 = 1.0;
  for (int k = 0; k < D; ++k) {
    if (k == j) continue;
    double s = 0.0;
    for (double v : st.coeff.margin(k, r)) s += v * v;
    other_norm2 *= s;
  }
  const double like_prec = ds.n * ds.sxx * other_norm2 / sigma_y2;

  const auto& w = st.omega[static_cast<std::size_t>(j) * R + r];
  GaussianVecParams out;
  out.mean.resize(proj.size());
  out.var.resize(proj.size());
  for (std::size_t z = 0; z < proj.size(); ++z) {
    const double prec = 1.0 / (prior_scale * w[z]) + like_prec;
    out.var[z] = 1.0 / prec;
    out.mean[z] = proj[z] / (sigma_y2 * prec);
  }
  return out;
}

double xi_log_kernel(const RegionActivation& st, int r, double x) {
  if (x <= 0.0 || x >= 1.0) return -std::numeric_limits<double>::infinity();
  const int R = st.rank(), D = st.order();
  const double pbar = st.margin_total();

  std::vector<double> xi_cand = st.xi;
  xi_cand[r] = x;
  const std::vector<double> phi = sticks_to_weights(xi_cand, R);

  double lp = (st.alpha - 1.0) * std::log1p(-x);
  for (int k = r; k < R; ++k) {
    double q = 0.0;
    for (int j = 0; j < D; ++j) q += st.quad_form(j, k);
    lp += -0.5 * pbar * std::log(phi[k]) - q / (2.0 * st.tau * phi[k]);
  }
  return lp;
}

std::vector<double> alpha_griddy_log_weights(const RegionActivation& st,
                                             const ShrinkageHyper& hyper, int M,
                                             RngHandle& rng) {
  const int R = st.rank(), D = st.order();
  const double neg_inf = -std::numeric_limits<double>::infinity();

  // alpha-independent pieces of the margin log density
  std::vector<double> q(static_cast<std::size_t>(D) * R), slw(q.size());
  for (int j = 0; j < D; ++j)
    for (int r = 0; r < R; ++r) {
      q[static_cast<std::size_t>(j) * R + r] = st.quad_form(j, r);
      double s = 0.0;
      for (double w : st.omega[static_cast<std::size_t>(j) * R + r]) s += std::log(w);
      slw[static_cast<std::size_t>(j) * R + r] = s;
    }
  const auto& dims = st.dims();

  std::vector<double> logw(hyper.alpha_grid.size(), neg_inf);
  std::vector<double> xi(std::max(R - 1, 0));
  for (std::size_t a = 0; a < hyper.alpha_grid.size(); ++a) {
    const double alpha = hyper.alpha_grid[a];
    double mx = neg_inf;
    std::vector<double> ld(M);
    for (int m = 0; m < M; ++m) {
      for (int r = 0; r < R - 1; ++r) xi[r] = draw_beta(1.0, alpha, rng);
      const std::vector<double> phi = sticks_to_weights(xi, R);
      const double tau = draw_gamma(hyper.a_tau, hyper.b_tau, rng);
      double lp = 0.0;
      for (int j = 0; j < D; ++j)
        for (int r = 0; r < R; ++r) {
          const std::size_t k = static_cast<std::size_t>(j) * R + r;
          const double scale = phi[r] * tau;
          if (!(scale > 0.0)) {  // underflowed prior draw: zero density
            lp = neg_inf;
            break;
          }
          lp += -0.5 * dims[j] * (std::log(2.0 * std::numbers::pi) + std::log(scale)) -
                0.5 * slw[k] - q[k] / (2.0 * scale);
        }
      ld[m] = lp;
      mx = std::max(mx, lp);
    }
    if (mx == neg_inf) continue;
    double s = 0.0;
    for (double v : ld) s += std::exp(v - mx);
    logw[a] = mx + std::log(s) - std::log(static_cast<double>(M));
  }
  return logw;
}

void update_alpha_griddy(RegionActivation& st, const ShrinkageHyper& hyper, int M,
                         RngHandle& rng, UpdateDiagnostics* diag) {
  const auto& grid = hyper.alpha_grid;
  if (grid.empty()) throw std::invalid_argument("update_alpha_griddy: empty grid");
  if (grid.size() == 1 || grid.back() - grid.front() < 1e-15) {
    // degenerate grid (rank 1): the conditional is uniform over equal values
    st.alpha_index = 0;
    st.alpha = grid[0];
    return;
  }
  if (M < 1) throw std::invalid_argument("update_alpha_griddy: M must be >= 1");

  std::vector<double> logw = alpha_griddy_log_weights(st, hyper, M, rng);
  double mx = -std::numeric_limits<double>::infinity();
  for (double& v : logw) {
    if (std::isnan(v)) v = -std::numeric_limits<double>::infinity();
    mx = std::max(mx, v);
  }
  std::vector<double> w(logw.size(), 1.0);
  if (std::isfinite(mx)) {
    for (std::size_t a = 0; a < logw.size(); ++a) w[a] = std::exp(logw[a] - mx);
  } else if (diag) {
    ++diag->griddy_uniform_fallbacks;
  }
  st.alpha_index = draw_categorical(w, rng);
  st.alpha = grid[st.alpha_index];
}

bool try_xi_update(RegionActivation& st, int r, double proposal, double u) {
  if (proposal <= 0.0 || proposal >= 1.0) return false;
  const double lr = xi_log_kernel(st, r, proposal) - xi_log_kernel(st, r, st.xi[r]);
  if (std::log(u) <= lr) {
    st.xi[r] = proposal;
    st.refresh_phi();
    return true;
  }
  return false;
}

bool update_xi_mh(RegionActivation& st, int r, RngHandle& rng) {
  const double proposal = st.xi[r] + 0.01 * rng.normal();
  const double u = rng.uniform();
  return try_xi_update(st, r, proposal, u);
}

void update_tau(RegionActivation& st, const ShrinkageHyper& hyper, RngHandle& rng,
                UpdateDiagnostics* diag) {
  const GigParams p = tau_conditional(st, hyper, diag);
  st.tau = draw_gig(p.nu, p.chi, p.psi, rng);
}

void update_lambda(RegionActivation& st, const ShrinkageHyper& hyper, int j, int r,
                   RngHandle& rng) {
  const GammaParams p = lambda_conditional(st, hyper, j, r);
  st.lambda[static_cast<std::size_t>(j) * st.rank() + r] = draw_gamma(p.shape, p.rate, rng);
}

void update_omega(RegionActivation& st, int j, int r, int l, RngHandle& rng) {
  const GigParams p = omega_conditional(st, j, r, l);
  st.omega[static_cast<std::size_t>(j) * st.rank() + r][l] =
      draw_gig(p.nu, p.chi, p.psi, rng);
}

void update_margin(RegionActivation& st, const RegionSuffStats& rs,
                   const DesignStats& ds, double d_sum, double sigma_y2, int j,
                   int r, RngHandle& rng) {
  const GaussianVecParams p = margin_conditional(st, rs, ds, d_sum, sigma_y2, j, r);
  auto m = st.coeff.margin(j, r);
  for (std::size_t z = 0; z < m.size(); ++z)
    m[z] = p.mean[z] + std::sqrt(p.var[z]) * rng.normal();
  st.coeff.compose_rank(r, st.rank1[r]);
}

double update_sigma_y(const ShrinkageHyper& hyper, double rss,
                      std::int64_t n_cells, RngHandle& rng) {
  return draw_inverse_gamma(hyper.a_sigma + 0.5 * static_cast<double>(n_cells),
                            hyper.b_sigma + 0.5 * rss, rng);
}

double region_rss(const DenseTensor& b, const RegionSuffStats& rs,
                  const DesignStats& ds, std::span<const double> d) {
  double dot_byx = 0.0, b_sum = 0.0, b_norm2 = 0.0;
  for (std::int64_t v = 0; v < b.size(); ++v) {
    dot_byx += b[v] * rs.yx[v];
    b_sum += b[v];
    b_norm2 += b[v] * b[v];
  }
  double d_sum = 0.0, d_norm2 = 0.0, d_dot_acc = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    d_sum += d[i];
    d_norm2 += d[i] * d[i];
    d_dot_acc += d[i] * rs.subj_sum[i];
  }
  return rs.syy - 2.0 * dot_byx - 2.0 * d_dot_acc + ds.n * ds.sxx * b_norm2 +
         2.0 * b_sum * ds.sx * d_sum +
         static_cast<double>(ds.T) * static_cast<double>(rs.vox) * d_norm2;
}

// --- vectorized baseline ---

RegionVectorized init_region_vectorized(const std::vector<int>& dims,
                                        const ShrinkageHyper& hyper, RngHandle& rng,
                                        double init_scale) {
  RegionVectorized st;
  st.dims = dims;
  const auto V = static_cast<std::size_t>(cell_count(dims));
  st.coeff.resize(V);
  for (auto& v : st.coeff) v = init_scale * rng.normal();
  st.omega.assign(V, 1.0);
  st.lambda = hyper.a_lambda / hyper.b_lambda;
  st.tau = 1.0;
  return st;
}

GigParams vectorized_tau_conditional(const RegionVectorized& st,
                                     const ShrinkageHyper& hyper) {
  GigParams p;
  p.nu = hyper.a_tau - 0.5 * static_cast<double>(st.coeff.size());
  p.psi = 2.0 * hyper.b_tau;
  double chi = 0.0;
  for (std::size_t v = 0; v < st.coeff.size(); ++v)
    chi += st.coeff[v] * st.coeff[v] / st.omega[v];
  p.chi = chi > 0.0 ? chi : (p.nu > 0.0 ? 0.0 : 1e-300);
  return p;
}

GaussianVecParams vectorized_coeff_conditional(const RegionVectorized& st,
                                               const RegionSuffStats& rs,
                                               const DesignStats& ds, double d_sum,
                                               double sigma_y2) {
  GaussianVecParams out;
  const std::size_t V = st.coeff.size();
  out.mean.resize(V);
  out.var.resize(V);
  const double like_prec = ds.n * ds.sxx / sigma_y2;
  for (std::size_t v = 0; v < V; ++v) {
    const double prec = 1.0 / (st.tau * st.omega[v]) + like_prec;
    const double c = rs.yx[v] - ds.sx * d_sum;
    out.var[v] = 1.0 / prec;
    out.mean[v] = c / (sigma_y2 * prec);
  }
  return out;
}

void update_vectorized_region(RegionVectorized& st, const RegionSuffStats& rs,
                              const DesignStats& ds, double d_sum, double sigma_y2,
                              const ShrinkageHyper& hyper, RngHandle& rng) {
  const std::size_t V = st.coeff.size();
  // tau
  const GigParams tp = vectorized_tau_conditional(st, hyper);
  st.tau = draw_gig(tp.nu, tp.chi, tp.psi, rng);
  // lambda (local scales marginalized out, as in the margin hierarchy)
  double abs_sum = 0.0;
  for (double v : st.coeff) abs_sum += std::abs(v);
  st.lambda = draw_gamma(hyper.a_lambda + static_cast<double>(V),
                         hyper.b_lambda + abs_sum / std::sqrt(st.tau), rng);
  // local scales
  for (std::size_t v = 0; v < V; ++v)
    st.omega[v] = draw_gig(0.5, st.coeff[v] * st.coeff[v] / st.tau,
                           st.lambda * st.lambda, rng);
  // coefficients
  const GaussianVecParams p = vectorized_coeff_conditional(st, rs, ds, d_sum, sigma_y2);
  for (std::size_t v = 0; v < V; ++v)
    st.coeff[v] = p.mean[v] + std::sqrt(p.var[v]) * rng.normal();
}

DenseTensor vectorized_composed(const RegionVectorized& st) {
  return DenseTensor(st.dims, st.coeff);
}

}  // namespace btac
