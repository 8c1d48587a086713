#pragma once

#include "types.hpp"

namespace cocreg {

// Removes column means. Idempotent; rejects non-finite input.
MatrixXd center(const MatrixXd& M);

// (1/m) * center(M)^T * center(M) with m = rows. Symmetric PSD.
// The divisor is the observation count, not count - 1.
MatrixXd sample_covariance(const MatrixXd& M);

// True when min eigenvalue > kPdTol * max eigenvalue (and max > 0).
bool is_strictly_pd(const MatrixXd& A);

// Per-subject sample covariances, order preserved. Every matrix must be
// strictly positive definite; otherwise the failing subject is named.
std::vector<CovariancePair> estimate_covariances(const Cohort& cohort);

// Observation-weighted pooled covariances of both blocks.
MatrixXd pooled_sigma(const std::vector<CovariancePair>& pairs);
MatrixXd pooled_delta(const std::vector<CovariancePair>& pairs);

// Identity matrices or the pooled covariances, per mode.
ConstraintMatrices pooled_constraints(const std::vector<CovariancePair>& pairs,
                                      ConstraintMode mode);

}  // namespace cocreg
