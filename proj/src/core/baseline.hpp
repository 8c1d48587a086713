#pragma once

#include "types.hpp"

namespace cocreg {

// One per-pair regression of the CPCA-Reg baseline.
struct PairRegression {
  int x_component = -1;  // index into the selected predictor eigenvectors
  int y_component = -1;
  double alpha = 0.0;
  VectorXd beta;
  double r_squared = 0.0;
  bool ok = false;
};

struct CpcaModel {
  MatrixXd y_eigenvectors;  // q x q, pooled order (descending eigenvalue)
  MatrixXd x_eigenvectors;  // p x p
  VectorXd y_pooled_eigenvalues;
  VectorXd x_pooled_eigenvalues;
  MatrixXd y_subject_eigenvalues;  // n x q, diag(V^T S_i V)
  MatrixXd x_subject_eigenvalues;  // n x p
  std::vector<int> y_selected;     // indices covering the variance fraction
  std::vector<int> x_selected;
  std::vector<PairRegression> regressions;
};

// Common-PCA estimate: eigenvectors of the weighted pooled covariance,
// descending pooled eigenvalue order; per-subject eigenvalues are the
// projected diagonals. A simplification of Flury's full CPC iteration.
void common_pca(const std::vector<MatrixXd>& mats,
                const std::vector<double>& weights, MatrixXd* eigenvectors,
                VectorXd* pooled_eigenvalues, MatrixXd* subject_eigenvalues);

// Smallest prefix of components whose cumulative variance share exceeds
// the fraction (total variation = trace of the pooled covariance).
std::vector<int> select_top_components(const VectorXd& pooled_eigenvalues,
                                       double fraction = 0.85);

// Full three-step baseline: common PCA per block, 85% selection, one
// regression per selected component pair.
CpcaModel cpca_reg(const std::vector<CovariancePair>& pairs, const MatrixXd& W,
                   double variance_fraction = 0.85);

}  // namespace cocreg
