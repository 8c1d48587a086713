#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace cocreg {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using Index = Eigen::Index;

// Bad or inconsistent input (maps to exit/status code 2).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical failure during a computation (maps to exit/status code 3).
class ComputeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Relative eigenvalue floor below which a covariance matrix is treated as
// singular: min eigenvalue must exceed kPdTol * max eigenvalue.
inline constexpr double kPdTol = 1e-10;

// One subject's raw observations. X holds predictor rows (u_i x p),
// Y outcome rows (v_i x q), w the covariate vector with w[0] == 1.
struct SubjectDataset {
  std::string subject_id;
  MatrixXd X;
  MatrixXd Y;
  VectorXd w;

  Index u() const { return X.rows(); }
  Index v() const { return Y.rows(); }

  void validate() const;
};

struct Cohort {
  std::vector<SubjectDataset> subjects;

  Index n() const { return static_cast<Index>(subjects.size()); }
  Index p() const { return subjects.empty() ? 0 : subjects.front().X.cols(); }
  Index q() const { return subjects.empty() ? 0 : subjects.front().Y.cols(); }
  Index r() const { return subjects.empty() ? 0 : subjects.front().w.size(); }

  // Covariates stacked row-wise, n x r.
  MatrixXd covariates() const;

  void validate() const;
};

// Per-subject covariance estimates with their observation counts.
struct CovariancePair {
  MatrixXd sigma_hat;  // q x q outcome covariance
  MatrixXd delta_hat;  // p x p predictor covariance
  Index v_obs = 0;
  Index u_obs = 0;
};

enum class ConstraintMode { identity, pooled };

// Normalization metrics for the unit-ellipsoid constraints in the OLS
// objective. Identity by default; pooled uses observation-weighted
// averages of the per-subject covariance estimates.
struct ConstraintMatrices {
  MatrixXd H_y;
  MatrixXd H_x;
  ConstraintMode mode = ConstraintMode::identity;
};

std::string constraint_mode_name(ConstraintMode mode);
ConstraintMode constraint_mode_from_name(const std::string& name);

}  // namespace cocreg
