#include "btac/connectivity.hpp"

#include <cmath>
#include <stdexcept>

namespace btac {

ConnectivityState init_connectivity(int n, int G, const GraphicalHyper& hyper) {
  if (n < 1 || G < 1) throw std::invalid_argument("init_connectivity: bad sizes");
  ConnectivityState st;
  st.effects = Eigen::MatrixXd::Zero(n, G);
  st.sigma = Eigen::MatrixXd::Identity(G, G);
  st.upsilon = Eigen::MatrixXd::Ones(G, G);
  st.zeta = hyper.a_zeta / hyper.b_zeta;  // prior mean
  return st;
}

Eigen::MatrixXd compute_scatter(const Eigen::MatrixXd& effects) {
  if (effects.rows() < 1)
    throw std::invalid_argument("compute_scatter: need at least one subject");
  return effects.transpose() * effects;
}

Eigen::MatrixXd effects_precision(const Eigen::MatrixXd& sigma,
                                  const Eigen::VectorXd& voxcounts, int T,
                                  double sigma_y2) {
  Eigen::MatrixXd prec = sigma;
  prec.diagonal() += (static_cast<double>(T) / sigma_y2) * voxcounts;
  return prec;
}

Eigen::VectorXd draw_effect(const Eigen::LLT<Eigen::MatrixXd>& prec_llt,
                            const Eigen::VectorXd& resid_sum, double sigma_y2,
                            RngHandle& rng) {
  const Eigen::VectorXd mean = prec_llt.solve(resid_sum / sigma_y2);
  return draw_mvn_prec_llt(mean, prec_llt, rng);
}

void update_effects(ConnectivityState& st, const Eigen::MatrixXd& resid_sums,
                    const Eigen::VectorXd& voxcounts, int T, double sigma_y2,
                    std::span<RngHandle*> subject_rngs) {
  const int n = st.subjects();
  if (resid_sums.rows() != n || static_cast<int>(subject_rngs.size()) != n)
    throw std::invalid_argument("update_effects: shape mismatch");
  Eigen::MatrixXd prec = effects_precision(st.sigma, voxcounts, T, sigma_y2);
  Eigen::LLT<Eigen::MatrixXd> llt(prec);
  if (llt.info() != Eigen::Success)
    throw std::domain_error("update_effects: posterior precision not PD");
  for (int i = 0; i < n; ++i)
    st.effects.row(i) =
        draw_effect(llt, resid_sums.row(i).transpose(), sigma_y2, *subject_rngs[i])
            .transpose();
}

namespace {
std::vector<int> complement_of(int g, int G) {
  std::vector<int> idx;
  idx.reserve(G - 1);
  for (int k = 0; k < G; ++k)
    if (k != g) idx.push_back(k);
  return idx;
}
}  // namespace

void update_precision_column(ConnectivityState& st, const Eigen::MatrixXd& scatter,
                             int n, int g, RngHandle& rng) {
  const int G = st.regions();
  if (g < 0 || g >= G) throw std::invalid_argument("update_precision_column: bad g");
  const double s_gg = scatter(g, g);
  const double delta =
      draw_gamma(0.5 * n + 1.0, 0.5 * (s_gg + st.zeta), rng);
  if (G == 1) {
    st.sigma(0, 0) = delta;
    return;
  }

  const std::vector<int> rest = complement_of(g, G);
  Eigen::MatrixXd sigma_mm(G - 1, G - 1);
  Eigen::VectorXd s_g(G - 1), ups_g(G - 1);
  for (int a = 0; a < G - 1; ++a) {
    s_g[a] = scatter(rest[a], g);
    ups_g[a] = st.upsilon(rest[a], g);
    for (int b = 0; b < G - 1; ++b) sigma_mm(a, b) = st.sigma(rest[a], rest[b]);
  }
  Eigen::LLT<Eigen::MatrixXd> llt_mm(sigma_mm);
  if (llt_mm.info() != Eigen::Success)
    throw std::domain_error("update_precision_column: Sigma_{-g,-g} not PD");
  const Eigen::MatrixXd inv_mm =
      llt_mm.solve(Eigen::MatrixXd::Identity(G - 1, G - 1));

  Eigen::MatrixXd prec = (s_gg + st.zeta) * inv_mm;
  prec.diagonal() += ups_g.cwiseInverse();
  Eigen::LLT<Eigen::MatrixXd> llt_p(prec);
  if (llt_p.info() != Eigen::Success)
    throw std::domain_error("update_precision_column: eta precision not PD");
  const Eigen::VectorXd mean = llt_p.solve(-s_g);
  const Eigen::VectorXd eta = draw_mvn_prec_llt(mean, llt_p, rng);

  for (int a = 0; a < G - 1; ++a) {
    st.sigma(rest[a], g) = eta[a];
    st.sigma(g, rest[a]) = eta[a];
  }
  st.sigma(g, g) = delta + eta.dot(inv_mm * eta);
}

void update_precision(ConnectivityState& st, const Eigen::MatrixXd& scatter, int n,
                      RngHandle& rng) {
  for (int g = 0; g < st.regions(); ++g)
    update_precision_column(st, scatter, n, g, rng);
}

void update_latent_scales(ConnectivityState& st, RngHandle& rng) {
  const int G = st.regions();
  for (int g = 0; g < G; ++g)
    for (int i = g + 1; i < G; ++i) {
      const double s = std::max(std::abs(st.sigma(g, i)), 1e-12);
      const double u = draw_inverse_gaussian(st.zeta / s, st.zeta * st.zeta, rng);
      st.upsilon(g, i) = st.upsilon(i, g) = 1.0 / u;
    }
}

void update_zeta(ConnectivityState& st, const GraphicalHyper& hyper, RngHandle& rng) {
  const int G = st.regions();
  const double shape = hyper.a_zeta + 0.5 * G * (G + 1);
  const double rate = hyper.b_zeta + 0.5 * st.sigma.cwiseAbs().sum();
  st.zeta = draw_gamma(shape, rate, rng);
}

Eigen::MatrixXd partial_correlation(const Eigen::MatrixXd& precision) {
  const int G = static_cast<int>(precision.rows());
  for (int g = 0; g < G; ++g)
    if (!(precision(g, g) > 0.0))
      throw std::invalid_argument("partial_correlation: nonpositive diagonal");
  Eigen::MatrixXd rho = Eigen::MatrixXd::Identity(G, G);
  for (int a = 0; a < G; ++a)
    for (int b = 0; b < G; ++b)
      if (a != b)
        rho(a, b) = -precision(a, b) /
                    std::sqrt(precision(a, a) * precision(b, b));
  return rho;
}

}  // namespace btac
