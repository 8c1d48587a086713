#include "covariance.hpp"

#include <Eigen/Eigenvalues>

namespace cocreg {

std::string constraint_mode_name(ConstraintMode mode) {
  return mode == ConstraintMode::identity ? "identity" : "pooled";
}

ConstraintMode constraint_mode_from_name(const std::string& name) {
  if (name == "identity") return ConstraintMode::identity;
  if (name == "pooled") return ConstraintMode::pooled;
  throw ValidationError("unknown constraint mode: " + name);
}

void SubjectDataset::validate() const {
  if (X.rows() < 2 || Y.rows() < 2)
    throw ValidationError("subject " + subject_id +
                          ": needs at least 2 observations per block");
  if (X.cols() < 1 || Y.cols() < 1 || w.size() < 1)
    throw ValidationError("subject " + subject_id + ": empty dimension");
  if (w[0] != 1.0)
    throw ValidationError("subject " + subject_id +
                          ": first covariate entry must be 1 (intercept)");
  if (!X.allFinite() || !Y.allFinite() || !w.allFinite())
    throw ValidationError("subject " + subject_id + ": non-finite entries");
}

MatrixXd Cohort::covariates() const {
  MatrixXd W(n(), r());
  for (Index i = 0; i < n(); ++i) W.row(i) = subjects[i].w.transpose();
  return W;
}

void Cohort::validate() const {
  if (subjects.size() < 2)
    throw ValidationError("cohort needs at least 2 subjects");
  const Index p0 = p(), q0 = q(), r0 = r();
  for (const auto& s : subjects) {
    s.validate();
    if (s.X.cols() != p0 || s.Y.cols() != q0 || s.w.size() != r0)
      throw ValidationError("subject " + s.subject_id +
                            ": dimensions differ from the rest of the cohort");
  }
}

MatrixXd center(const MatrixXd& M) {
  if (M.rows() < 1) throw ValidationError("center: empty matrix");
  if (!M.allFinite()) throw ValidationError("center: non-finite entries");
  return M.rowwise() - M.colwise().mean();
}

MatrixXd sample_covariance(const MatrixXd& M) {
  const Index m = M.rows();
  if (m < 2) throw ValidationError("sample_covariance: fewer than 2 rows");
  const MatrixXd C = center(M);
  MatrixXd S = (C.transpose() * C) / static_cast<double>(m);
  // Symmetrize away round-off from the product.
  S = 0.5 * (S + S.transpose()).eval();
  return S;
}

bool is_strictly_pd(const MatrixXd& A) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(A, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) return false;
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  return hi > 0.0 && lo > kPdTol * hi;
}

std::vector<CovariancePair> estimate_covariances(const Cohort& cohort) {
  cohort.validate();
  std::vector<CovariancePair> pairs;
  pairs.reserve(cohort.subjects.size());
  for (const auto& s : cohort.subjects) {
    if (s.u() <= cohort.p())
      throw ValidationError("subject " + s.subject_id +
                            ": u <= p, predictor covariance is rank deficient");
    if (s.v() <= cohort.q())
      throw ValidationError("subject " + s.subject_id +
                            ": v <= q, outcome covariance is rank deficient");
    CovariancePair pair;
    pair.sigma_hat = sample_covariance(s.Y);
    pair.delta_hat = sample_covariance(s.X);
    pair.v_obs = s.v();
    pair.u_obs = s.u();
    if (!is_strictly_pd(pair.sigma_hat))
      throw ComputeError("subject " + s.subject_id +
                         ": outcome sample covariance is not positive definite");
    if (!is_strictly_pd(pair.delta_hat))
      throw ComputeError("subject " + s.subject_id +
                         ": predictor sample covariance is not positive definite");
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

MatrixXd pooled_sigma(const std::vector<CovariancePair>& pairs) {
  if (pairs.empty()) throw ValidationError("pooled_sigma: empty list");
  MatrixXd S = MatrixXd::Zero(pairs[0].sigma_hat.rows(), pairs[0].sigma_hat.cols());
  double total = 0.0;
  for (const auto& pr : pairs) {
    S += static_cast<double>(pr.v_obs) * pr.sigma_hat;
    total += static_cast<double>(pr.v_obs);
  }
  return S / total;
}

MatrixXd pooled_delta(const std::vector<CovariancePair>& pairs) {
  if (pairs.empty()) throw ValidationError("pooled_delta: empty list");
  MatrixXd D = MatrixXd::Zero(pairs[0].delta_hat.rows(), pairs[0].delta_hat.cols());
  double total = 0.0;
  for (const auto& pr : pairs) {
    D += static_cast<double>(pr.u_obs) * pr.delta_hat;
    total += static_cast<double>(pr.u_obs);
  }
  return D / total;
}

ConstraintMatrices pooled_constraints(const std::vector<CovariancePair>& pairs,
                                      ConstraintMode mode) {
  if (pairs.empty()) throw ValidationError("pooled_constraints: empty list");
  ConstraintMatrices cm;
  cm.mode = mode;
  const Index q = pairs[0].sigma_hat.rows();
  const Index p = pairs[0].delta_hat.rows();
  if (mode == ConstraintMode::identity) {
    cm.H_y = MatrixXd::Identity(q, q);
    cm.H_x = MatrixXd::Identity(p, p);
  } else {
    cm.H_y = pooled_sigma(pairs);
    cm.H_x = pooled_delta(pairs);
  }
  return cm;
}

}  // namespace cocreg
