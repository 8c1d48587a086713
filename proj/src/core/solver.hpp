#pragma once

#include "types.hpp"

#include <optional>

namespace cocreg {

struct SolverConfig {
  double tol = 1e-8;        // relative objective-change threshold
  int max_iter = 500;
  int n_restarts = 20;      // random restarts on top of the eigenvector inits
  std::uint64_t seed = 0;
  ConstraintMode constraint_mode = ConstraintMode::identity;
  bool eigen_init = true;   // pair the top-5 eigenvectors of the pooled covariances
  bool record_trace = false;
  int threads = 1;

  void validate() const;
};

// One estimated component pair with its coefficients.
struct ComponentFit {
  VectorXd gamma;   // length q, gamma^T H_y gamma = 1
  VectorXd theta;   // length p, theta^T H_x theta = 1
  double alpha = 0.0;
  VectorXd beta;    // length r
  double objective = 0.0;
  int n_iter = 0;
  bool converged = false;
  int restart_index = -1;
};

// Per-iteration record of one restart, for descent diagnostics.
struct RestartTrace {
  int restart_index = -1;
  std::vector<double> objective;             // value after each full cycle
  std::vector<double> gamma_constraint_dev;  // |gamma^T H_y gamma - 1|
  std::vector<double> theta_constraint_dev;
  bool converged = false;
  std::string error;
};

struct EigenSolveResult {
  VectorXd eigenvalues;   // descending
  MatrixXd eigenvectors;  // columns, v^T H v = 1
  VectorXd residual_norms;
};

// OLS objective of the log-linear model, (1/n) sum of squared residuals.
double objective(const VectorXd& gamma, const VectorXd& theta, double alpha,
                 const VectorXd& beta, const std::vector<CovariancePair>& pairs,
                 const MatrixXd& W);

// Closed-form coordinate minimizers of the objective.
double update_alpha(const VectorXd& theta, const VectorXd& gamma,
                    const VectorXd& beta, const std::vector<CovariancePair>& pairs,
                    const MatrixXd& W);
VectorXd update_beta(const VectorXd& theta, const VectorXd& gamma, double alpha,
                     const std::vector<CovariancePair>& pairs, const MatrixXd& W);

// Solves A v = lambda H v for symmetric A and SPD H by Cholesky whitening:
// H = L L^T, standard solve on L^{-1} A L^{-T}, back-transform.
EigenSolveResult generalized_symmetric_eigen(const MatrixXd& A, const MatrixXd& H);

// Lagrangian projection updates. Each evaluates the objective at every
// H-normalized eigenvector of the linearized stationarity system and keeps
// the minimizer only when it strictly improves on the previous iterate, so
// the objective never increases.
VectorXd update_gamma(const VectorXd& previous_gamma, const VectorXd& theta,
                      double alpha, const VectorXd& beta,
                      const std::vector<CovariancePair>& pairs, const MatrixXd& W,
                      const MatrixXd& H_y);
VectorXd update_theta(const VectorXd& previous_theta, const VectorXd& gamma,
                      double alpha, const VectorXd& beta,
                      const std::vector<CovariancePair>& pairs, const MatrixXd& W,
                      const MatrixXd& H_x);

// Coordinate-descent fit (cycle alpha, beta, theta, gamma) from eigenvector
// and random initializations; returns the minimum-objective solution.
ComponentFit fit_component(const std::vector<CovariancePair>& pairs,
                           const MatrixXd& W, const SolverConfig& config,
                           std::vector<RestartTrace>* diagnostics = nullptr);

// |cosine| of the angle between two nonzero vectors, in [0, 1].
double similarity(const VectorXd& a, const VectorXd& b);

// Joint least-squares solve for (alpha, beta) given fixed projections:
// regresses log(gamma^T Sigma_i gamma) on [log(theta^T Delta_i theta), w_i].
// Returns nullopt when the design is singular (condition >= 1e12).
std::optional<std::pair<double, VectorXd>> solve_coefficients(
    const VectorXd& log_outcome_forms, const VectorXd& log_predictor_forms,
    const MatrixXd& W);

// theta^T M_i theta (or gamma^T Sigma_i gamma) for every subject.
VectorXd outcome_quad_forms(const std::vector<CovariancePair>& pairs,
                            const VectorXd& gamma);
VectorXd predictor_quad_forms(const std::vector<CovariancePair>& pairs,
                              const VectorXd& theta);

}  // namespace cocreg
