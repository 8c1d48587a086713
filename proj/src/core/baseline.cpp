#include "baseline.hpp"

#include "solver.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

namespace cocreg {

void common_pca(const std::vector<MatrixXd>& mats,
                const std::vector<double>& weights, MatrixXd* eigenvectors,
                VectorXd* pooled_eigenvalues, MatrixXd* subject_eigenvalues) {
  if (mats.size() < 2) throw ValidationError("common_pca: need >= 2 subjects");
  if (mats.size() != weights.size())
    throw ValidationError("common_pca: matrices/weights mismatch");
  const Index d = mats[0].rows();
  MatrixXd pooled = MatrixXd::Zero(d, d);
  double total = 0.0;
  for (std::size_t i = 0; i < mats.size(); ++i) {
    pooled += weights[i] * mats[i];
    total += weights[i];
  }
  pooled /= total;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(pooled);
  if (es.info() != Eigen::Success)
    throw ComputeError("common_pca: eigendecomposition failed");

  eigenvectors->resize(d, d);
  pooled_eigenvalues->resize(d);
  for (Index j = 0; j < d; ++j) {
    eigenvectors->col(j) = es.eigenvectors().col(d - 1 - j);  // descending
    (*pooled_eigenvalues)[j] = es.eigenvalues()[d - 1 - j];
  }
  subject_eigenvalues->resize(static_cast<Index>(mats.size()), d);
  for (std::size_t i = 0; i < mats.size(); ++i)
    subject_eigenvalues->row(static_cast<Index>(i)) =
        (eigenvectors->array() * (mats[i] * (*eigenvectors)).array())
            .colwise()
            .sum();
}

std::vector<int> select_top_components(const VectorXd& pooled_eigenvalues,
                                       double fraction) {
  if (pooled_eigenvalues.size() == 0)
    throw ValidationError("select_top_components: empty eigenvalues");
  const double total = pooled_eigenvalues.sum();
  if (!(total > 0.0))
    throw ValidationError("select_top_components: eigenvalues must be positive");
  std::vector<int> selected;
  double cum = 0.0;
  for (Index j = 0; j < pooled_eigenvalues.size(); ++j) {
    selected.push_back(static_cast<int>(j));
    cum += pooled_eigenvalues[j];
    if (cum / total > fraction) break;
  }
  return selected;
}

CpcaModel cpca_reg(const std::vector<CovariancePair>& pairs, const MatrixXd& W,
                   double variance_fraction) {
  if (pairs.size() < 2) throw ValidationError("cpca_reg: need >= 2 subjects");
  CpcaModel model;
  std::vector<MatrixXd> sigmas, deltas;
  std::vector<double> vw, uw;
  for (const auto& pr : pairs) {
    sigmas.push_back(pr.sigma_hat);
    deltas.push_back(pr.delta_hat);
    vw.push_back(static_cast<double>(pr.v_obs));
    uw.push_back(static_cast<double>(pr.u_obs));
  }
  common_pca(sigmas, vw, &model.y_eigenvectors, &model.y_pooled_eigenvalues,
             &model.y_subject_eigenvalues);
  common_pca(deltas, uw, &model.x_eigenvectors, &model.x_pooled_eigenvalues,
             &model.x_subject_eigenvalues);
  model.y_selected = select_top_components(model.y_pooled_eigenvalues,
                                           variance_fraction);
  model.x_selected = select_top_components(model.x_pooled_eigenvalues,
                                           variance_fraction);

  const Index n = static_cast<Index>(pairs.size());
  for (int yj : model.y_selected) {
    for (int xj : model.x_selected) {
      PairRegression reg;
      reg.y_component = yj;
      reg.x_component = xj;
      VectorXd logxi(n), logzeta(n);
      bool positive = true;
      for (Index i = 0; i < n; ++i) {
        const double fy = model.y_subject_eigenvalues(i, yj);
        const double fx = model.x_subject_eigenvalues(i, xj);
        if (!(fy > 0.0) || !(fx > 0.0)) {
          positive = false;
          break;
        }
        logxi[i] = std::log(fy);
        logzeta[i] = std::log(fx);
      }
      if (positive) {
        if (auto coef = solve_coefficients(logxi, logzeta, W)) {
          reg.alpha = coef->first;
          reg.beta = coef->second;
          const VectorXd resid = logxi - reg.alpha * logzeta - W * reg.beta;
          const double tss =
              (logxi.array() - logxi.mean()).matrix().squaredNorm();
          reg.r_squared =
              tss > 0.0 ? std::max(0.0, 1.0 - resid.squaredNorm() / tss) : 0.0;
          reg.ok = true;
        }
      }
      model.regressions.push_back(std::move(reg));
    }
  }
  return model;
}

}  // namespace cocreg
