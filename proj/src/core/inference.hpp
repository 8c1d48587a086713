#pragma once

#include "solver.hpp"
#include "types.hpp"

namespace cocreg {

struct BootstrapResult {
  int B = 0;
  MatrixXd draws;  // B x (1 + r), alpha first then beta
  double level = 0.95;
  VectorXd lower;  // length 1 + r
  VectorXd upper;
  int n_failed = 0;
};

struct AsymptoticCovariance {
  double G_x = 0.0;
  MatrixXd Q_w;
  VectorXd H_xw;
  double M_n = 0.0;  // total outcome observation count
  MatrixXd cov;      // (1+r) x (1+r), block inverse / M_n
};

// Exact OLS for (alpha, beta) given fixed projections.
std::pair<double, VectorXd> refit_coefficients(
    const VectorXd& gamma, const VectorXd& theta,
    const std::vector<CovariancePair>& pairs, const MatrixXd& W);

// Subject-level resampling with replacement, coefficients refit per
// replicate with the original projections held fixed. Percentile intervals.
BootstrapResult bootstrap(const std::vector<CovariancePair>& pairs,
                          const MatrixXd& W, const ComponentFit& fitted, int B,
                          double level, std::uint64_t seed);

// Plug-in version of the large-sample coefficient covariance.
AsymptoticCovariance asymptotic_covariance(const VectorXd& gamma,
                                           const VectorXd& theta,
                                           const Cohort& cohort);

// Hazen quantile (h = n*p + 0.5) with linear interpolation.
double quantile(VectorXd values, double prob);

}  // namespace cocreg
