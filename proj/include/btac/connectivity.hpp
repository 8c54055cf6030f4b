#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "btac/rng.hpp"

namespace btac {

struct GraphicalHyper {
  double a_zeta = 1.0;
  double b_zeta = 0.01;
};

/// Random-effect vectors, the region precision matrix and its latent
/// scale hierarchy. `sigma` is the precision of the effects (d_i ~
/// N(0, sigma^{-1})); `upsilon` holds the off-diagonal scale mixture.
struct ConnectivityState {
  Eigen::MatrixXd effects;  // n x G, one row per subject
  Eigen::MatrixXd sigma;    // G x G, symmetric positive definite
  Eigen::MatrixXd upsilon;  // G x G, symmetric, positive off-diagonals
  double zeta = 1.0;

  int subjects() const { return static_cast<int>(effects.rows()); }
  int regions() const { return static_cast<int>(sigma.rows()); }
};

ConnectivityState init_connectivity(int n, int G, const GraphicalHyper& hyper);

/// S = sum_i d_i d_i'.
Eigen::MatrixXd compute_scatter(const Eigen::MatrixXd& effects);

/// Posterior precision of every subject's effect vector:
/// sigma + (T/sigma_y2) diag(voxcount).
Eigen::MatrixXd effects_precision(const Eigen::MatrixXd& sigma,
                                  const Eigen::VectorXd& voxcounts, int T,
                                  double sigma_y2);

/// One subject's effect draw. resid_sum[g] = sum_{v,t} (y - Bx) over
/// region g; the posterior mean solves prec * mean = resid_sum / sigma_y2.
Eigen::VectorXd draw_effect(const Eigen::LLT<Eigen::MatrixXd>& prec_llt,
                            const Eigen::VectorXd& resid_sum, double sigma_y2,
                            RngHandle& rng);

/// Updates every subject's effect vector (single factorization, one MVN
/// draw per subject, one stream per subject).
void update_effects(ConnectivityState& st, const Eigen::MatrixXd& resid_sums,
                    const Eigen::VectorXd& voxcounts, int T, double sigma_y2,
                    std::span<RngHandle*> subject_rngs);

/// Row/column g of the precision matrix: gamma draw for the Schur
/// complement, Gaussian draw for the off-diagonal block, diagonal set to
/// delta + eta' Sigma_{-g,-g}^{-1} eta (keeps sigma positive definite).
void update_precision_column(ConnectivityState& st, const Eigen::MatrixXd& scatter,
                             int n, int g, RngHandle& rng);

/// Full ascending sweep over columns.
void update_precision(ConnectivityState& st, const Eigen::MatrixXd& scatter, int n,
                      RngHandle& rng);

/// Latent scales: for each off-diagonal pair, 1/upsilon is inverse
/// Gaussian with mean sqrt(zeta^2 / sigma_gi^2) and shape zeta^2
/// (|sigma_gi| floored at 1e-12).
void update_latent_scales(ConnectivityState& st, RngHandle& rng);

void update_zeta(ConnectivityState& st, const GraphicalHyper& hyper, RngHandle& rng);

/// rho_kl = -sigma_kl / sqrt(sigma_kk sigma_ll) off the diagonal, ones on
/// it. Throws on a nonpositive diagonal.
Eigen::MatrixXd partial_correlation(const Eigen::MatrixXd& precision);

}  // namespace btac
