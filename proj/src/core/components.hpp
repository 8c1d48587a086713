#pragma once

#include "solver.hpp"
#include "types.hpp"

namespace cocreg {

// Ordered component fits with the deviation-from-diagonality trace and the
// selected component count.
struct FitSequence {
  std::vector<ComponentFit> components;
  std::vector<std::pair<int, double>> dfd_trace;  // (k, DfD(k))
  int selected_k = 0;
  double threshold = 2.0;
  std::string status = "ok";  // "truncated: ..." when the sequence stops early
};

// data - data * basis * basis^T; basis columns must be orthonormal.
MatrixXd deflate(const MatrixXd& data, const MatrixXd& basis);

// det(diag(A)) / det(A) >= 1, equal to 1 iff A is diagonal. Log-determinant
// arithmetic throughout.
double nu(const MatrixXd& A);

// Weighted geometric mean of nu over the projected per-subject matrices.
double dfd_side(const MatrixXd& basis, const std::vector<MatrixXd>& mats,
                const std::vector<double>& weights);

// max of the outcome side (weights v_i) and predictor side (weights u_i).
double dfd(const MatrixXd& gamma_basis, const MatrixXd& theta_basis,
           const std::vector<CovariancePair>& pairs);

// Sequential extraction: fit on deflated data, evaluate DfD of the
// accumulated bases against the original covariance pairs, select
// k_hat = max{k : DfD(k) <= threshold}.
FitSequence fit_sequence(const Cohort& cohort, const SolverConfig& config,
                         int max_k, double threshold);

}  // namespace cocreg
