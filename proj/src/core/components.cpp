#include "components.hpp"

#include "covariance.hpp"
#include "rng.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

namespace cocreg {

namespace {

constexpr double kRidgeScale = 1e-10;  // keeps logs finite on deflated data

bool orthonormal_within(const MatrixXd& basis, double tol) {
  if (basis.cols() == 0) return true;
  const MatrixXd gram = basis.transpose() * basis;
  return (gram - MatrixXd::Identity(gram.rows(), gram.cols()))
             .cwiseAbs()
             .maxCoeff() <= tol;
}

// Gram-Schmidt of v against the columns of basis, renormalized.
VectorXd orthogonalize(const VectorXd& v, const MatrixXd& basis) {
  VectorXd out = v;
  if (basis.cols() > 0) out -= basis * (basis.transpose() * v);
  const double norm = out.norm();
  if (!(norm > 1e-12))
    throw ComputeError("component lies entirely in the deflated span");
  return out / norm;
}

void sign_fix(VectorXd& v) {
  Index idx = 0;
  v.cwiseAbs().maxCoeff(&idx);
  if (v[idx] < 0.0) v = -v;
}

MatrixXd append_column(const MatrixXd& basis, const VectorXd& v) {
  MatrixXd out(v.size(), basis.cols() + 1);
  if (basis.cols() > 0) out.leftCols(basis.cols()) = basis;
  out.col(basis.cols()) = v;
  return out;
}

}  // namespace

MatrixXd deflate(const MatrixXd& data, const MatrixXd& basis) {
  if (basis.cols() == 0) return data;
  if (basis.rows() != data.cols())
    throw ValidationError("deflate: basis rows must match data columns");
  if (basis.cols() >= data.cols())
    throw ValidationError("deflate: basis must have fewer columns than data");
  if (!orthonormal_within(basis, 1e-8))
    throw ValidationError("deflate: basis columns are not orthonormal");
  return data - data * basis * basis.transpose();
}

double nu(const MatrixXd& A) {
  if (A.rows() != A.cols()) throw ValidationError("nu: matrix must be square");
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(A, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success || !(es.eigenvalues().minCoeff() > 0.0))
    throw ComputeError("nu: matrix is not positive definite");
  double log_num = 0.0;
  for (Index j = 0; j < A.rows(); ++j) {
    if (!(A(j, j) > 0.0)) throw ComputeError("nu: non-positive diagonal entry");
    log_num += std::log(A(j, j));
  }
  const double log_den = es.eigenvalues().array().log().sum();
  return std::exp(std::max(0.0, log_num - log_den));
}

double dfd_side(const MatrixXd& basis, const std::vector<MatrixXd>& mats,
                const std::vector<double>& weights) {
  if (basis.cols() < 1) throw ValidationError("dfd_side: empty basis");
  if (mats.size() != weights.size() || mats.empty())
    throw ValidationError("dfd_side: matrices/weights mismatch");
  if (!orthonormal_within(basis, 1e-8))
    throw ValidationError("dfd_side: basis columns are not orthonormal");
  double total_weight = 0.0;
  for (double w : weights) total_weight += w;
  double log_acc = 0.0;
  for (std::size_t i = 0; i < mats.size(); ++i) {
    const MatrixXd projected = basis.transpose() * mats[i] * basis;
    log_acc += weights[i] * std::log(nu(projected));
  }
  return std::exp(log_acc / total_weight);
}

double dfd(const MatrixXd& gamma_basis, const MatrixXd& theta_basis,
           const std::vector<CovariancePair>& pairs) {
  std::vector<MatrixXd> sigmas, deltas;
  std::vector<double> vw, uw;
  sigmas.reserve(pairs.size());
  deltas.reserve(pairs.size());
  for (const auto& pr : pairs) {
    sigmas.push_back(pr.sigma_hat);
    deltas.push_back(pr.delta_hat);
    vw.push_back(static_cast<double>(pr.v_obs));
    uw.push_back(static_cast<double>(pr.u_obs));
  }
  return std::max(dfd_side(gamma_basis, sigmas, vw),
                  dfd_side(theta_basis, deltas, uw));
}

FitSequence fit_sequence(const Cohort& cohort, const SolverConfig& config,
                         int max_k, double threshold) {
  cohort.validate();
  if (max_k < 1) throw ValidationError("fit_sequence: max_k must be >= 1");
  if (max_k > std::min(cohort.p(), cohort.q()))
    throw ValidationError("fit_sequence: max_k must be <= min(p, q)");

  const MatrixXd W = cohort.covariates();
  const std::vector<CovariancePair> original_pairs = estimate_covariances(cohort);

  FitSequence seq;
  seq.threshold = threshold;
  MatrixXd gamma_basis(cohort.q(), 0);
  MatrixXd theta_basis(cohort.p(), 0);

  for (int k = 1; k <= max_k; ++k) {
    std::vector<CovariancePair> pairs_k;
    if (k == 1) {
      pairs_k = original_pairs;
    } else {
      pairs_k.reserve(cohort.subjects.size());
      bool degenerate = false;
      for (const auto& s : cohort.subjects) {
        CovariancePair pr;
        pr.sigma_hat = sample_covariance(deflate(s.Y, gamma_basis));
        pr.delta_hat = sample_covariance(deflate(s.X, theta_basis));
        pr.v_obs = s.v();
        pr.u_obs = s.u();
        // Deflated covariances are singular along the removed directions;
        // a trace-scaled ridge keeps the quadratic-form logs finite.
        pr.sigma_hat += kRidgeScale * (pr.sigma_hat.trace() / pr.sigma_hat.rows()) *
                        MatrixXd::Identity(pr.sigma_hat.rows(), pr.sigma_hat.cols());
        pr.delta_hat += kRidgeScale * (pr.delta_hat.trace() / pr.delta_hat.rows()) *
                        MatrixXd::Identity(pr.delta_hat.rows(), pr.delta_hat.cols());
        if (!(pr.sigma_hat.trace() > 0.0) || !(pr.delta_hat.trace() > 0.0)) {
          degenerate = true;
          break;
        }
        pairs_k.push_back(std::move(pr));
      }
      if (degenerate) {
        seq.status = "truncated: deflated covariance rank-deficient at k=" +
                     std::to_string(k);
        break;
      }
    }

    SolverConfig cfg_k = config;
    cfg_k.seed = mix_seed(config.seed, static_cast<std::uint64_t>(k));
    ComponentFit fit;
    try {
      fit = fit_component(pairs_k, W, cfg_k);
    } catch (const ComputeError& e) {
      seq.status = std::string("truncated: component fit failed at k=") +
                   std::to_string(k) + " (" + e.what() + ")";
      break;
    }

    // Deflation is exact only up to the estimation error of the earlier
    // components; re-orthogonalize against the accumulated bases.
    VectorXd g = orthogonalize(fit.gamma, gamma_basis);
    VectorXd t = orthogonalize(fit.theta, theta_basis);
    sign_fix(g);
    sign_fix(t);
    fit.gamma = g;
    fit.theta = t;
    const VectorXd logxi = outcome_quad_forms(pairs_k, g).array().log();
    const VectorXd logzeta = predictor_quad_forms(pairs_k, t).array().log();
    if (auto coef = solve_coefficients(logxi, logzeta, W)) {
      fit.alpha = coef->first;
      fit.beta = coef->second;
      fit.objective =
          (logxi - fit.alpha * logzeta - W * fit.beta).squaredNorm() / W.rows();
    }

    gamma_basis = append_column(gamma_basis, g);
    theta_basis = append_column(theta_basis, t);
    seq.components.push_back(std::move(fit));
    seq.dfd_trace.emplace_back(k, dfd(gamma_basis, theta_basis, original_pairs));
  }

  seq.selected_k = 0;
  for (const auto& [k, value] : seq.dfd_trace)
    if (value <= seq.threshold) seq.selected_k = std::max(seq.selected_k, k);
  return seq;
}

}  // namespace cocreg
