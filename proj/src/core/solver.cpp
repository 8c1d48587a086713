#include "solver.hpp"

#include "covariance.hpp"
#include "rng.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

namespace cocreg {

namespace {

constexpr double kObjectiveFloor = 1e-12;  // absolute floor when the fit is exact

VectorXd quad_forms(const std::vector<CovariancePair>& pairs, const VectorXd& v,
                    bool outcome) {
  VectorXd out(static_cast<Index>(pairs.size()));
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const MatrixXd& M = outcome ? pairs[i].sigma_hat : pairs[i].delta_hat;
    out[static_cast<Index>(i)] = v.dot(M * v);
  }
  return out;
}

VectorXd log_forms_or_throw(const std::vector<CovariancePair>& pairs,
                            const VectorXd& v, bool outcome) {
  VectorXd forms = quad_forms(pairs, v, outcome);
  for (Index i = 0; i < forms.size(); ++i) {
    if (!(forms[i] > 0.0))
      throw ComputeError(std::string(outcome ? "outcome" : "predictor") +
                         " quadratic form is non-positive for subject index " +
                         std::to_string(i));
  }
  return forms.array().log();
}

double mean_squared(const VectorXd& residuals) {
  return residuals.squaredNorm() / static_cast<double>(residuals.size());
}

double h_form(const VectorXd& v, const MatrixXd& H) { return v.dot(H * v); }

VectorXd h_normalize(const VectorXd& v, const MatrixXd& H) {
  const double s = h_form(v, H);
  if (!(s > 0.0)) throw ComputeError("cannot normalize onto H-ellipsoid");
  return v / std::sqrt(s);
}

// Largest-|entry| coordinate made positive.
void sign_fix(VectorXd& v) {
  Index idx = 0;
  v.cwiseAbs().maxCoeff(&idx);
  if (v[idx] < 0.0) v = -v;
}

// Objective values at every column of V used as the projection on one side,
// with the other side's contribution folded into `offset` (U_i or V_i).
// For the gamma update: residual = log(v^T Sigma_i v) - U_i, scale = 1.
// For the theta update: residual = offset_i - alpha * log(v^T Delta_i v),
// handled by the caller through `coef`.
struct CandidateScore {
  double objective = std::numeric_limits<double>::infinity();
  bool valid = false;
};

std::vector<CandidateScore> score_candidates(
    const std::vector<CovariancePair>& pairs, const MatrixXd& V, bool outcome,
    const VectorXd& offset, double coef) {
  const Index n = static_cast<Index>(pairs.size());
  const Index m = V.cols();
  std::vector<CandidateScore> scores(static_cast<std::size_t>(m));
  MatrixXd acc = MatrixXd::Zero(1, m);
  std::vector<bool> valid(static_cast<std::size_t>(m), true);
  for (Index i = 0; i < n; ++i) {
    const MatrixXd& M = outcome ? pairs[static_cast<std::size_t>(i)].sigma_hat
                                : pairs[static_cast<std::size_t>(i)].delta_hat;
    // diag(V^T M V), one quadratic form per candidate column
    Eigen::RowVectorXd forms = (V.array() * (M * V).array()).colwise().sum();
    for (Index c = 0; c < m; ++c) {
      if (!valid[static_cast<std::size_t>(c)]) continue;
      if (!(forms[c] > 0.0)) {
        valid[static_cast<std::size_t>(c)] = false;
        continue;
      }
      const double residual = coef * std::log(forms[c]) - offset[i];
      acc(0, c) += residual * residual;
    }
  }
  for (Index c = 0; c < m; ++c) {
    auto& s = scores[static_cast<std::size_t>(c)];
    s.valid = valid[static_cast<std::size_t>(c)];
    if (s.valid) s.objective = acc(0, c) / static_cast<double>(n);
  }
  return scores;
}

// Backtracking descent along the constraint ellipsoid, used when the
// linearized eigen move fails to improve. The rejected fixed points of the
// eigen move are not stationary points of the objective, so without this
// fallback the alternation can stall measurably above the optimum.
// Candidates are normalize(x - s * A x) with the step s halved until the
// objective strictly drops; A x is proportional to the Euclidean gradient.
VectorXd gradient_polish(const VectorXd& previous, const MatrixXd& A,
                         const MatrixXd& H,
                         const std::vector<CovariancePair>& pairs, bool outcome,
                         const VectorXd& offset, double coef, double current) {
  const VectorXd grad = A * previous;
  const double scale = grad.cwiseAbs().maxCoeff();
  if (!(scale > 0.0) || !std::isfinite(scale)) return previous;
  double s = 1.0 / scale;
  for (int k = 0; k < 40; ++k, s *= 0.5) {
    VectorXd cand = previous - s * grad;
    const double h = h_form(cand, H);
    if (!(h > 0.0)) continue;
    cand /= std::sqrt(h);
    const auto sc = score_candidates(pairs, cand, outcome, offset, coef);
    if (sc[0].valid && sc[0].objective < current) return cand;
  }
  return previous;
}

}  // namespace

void SolverConfig::validate() const {
  if (!(tol > 0.0)) throw ValidationError("solver tol must be > 0");
  if (max_iter < 1) throw ValidationError("solver max_iter must be >= 1");
  if (n_restarts < 1) throw ValidationError("solver n_restarts must be >= 1");
}

VectorXd outcome_quad_forms(const std::vector<CovariancePair>& pairs,
                            const VectorXd& gamma) {
  return quad_forms(pairs, gamma, true);
}

VectorXd predictor_quad_forms(const std::vector<CovariancePair>& pairs,
                              const VectorXd& theta) {
  return quad_forms(pairs, theta, false);
}

double objective(const VectorXd& gamma, const VectorXd& theta, double alpha,
                 const VectorXd& beta, const std::vector<CovariancePair>& pairs,
                 const MatrixXd& W) {
  const VectorXd logxi = log_forms_or_throw(pairs, gamma, true);
  const VectorXd logzeta = log_forms_or_throw(pairs, theta, false);
  return mean_squared(logxi - alpha * logzeta - W * beta);
}

double update_alpha(const VectorXd& theta, const VectorXd& gamma,
                    const VectorXd& beta, const std::vector<CovariancePair>& pairs,
                    const MatrixXd& W) {
  const VectorXd logxi = log_forms_or_throw(pairs, gamma, true);
  const VectorXd logzeta = log_forms_or_throw(pairs, theta, false);
  const double denom = logzeta.squaredNorm();
  if (denom < 1e-30)
    throw ComputeError("update_alpha: all predictor log-forms are zero");
  return (logxi - W * beta).dot(logzeta) / denom;
}

VectorXd update_beta(const VectorXd& theta, const VectorXd& gamma, double alpha,
                     const std::vector<CovariancePair>& pairs, const MatrixXd& W) {
  const VectorXd logxi = log_forms_or_throw(pairs, gamma, true);
  const VectorXd logzeta = log_forms_or_throw(pairs, theta, false);
  const MatrixXd gram = W.transpose() * W;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(gram, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || hi / lo >= 1e12)
    throw ComputeError("update_beta: collinear covariates (singular Gram matrix)");
  return gram.ldlt().solve(W.transpose() * (logxi - alpha * logzeta));
}

EigenSolveResult generalized_symmetric_eigen(const MatrixXd& A, const MatrixXd& H) {
  if (A.rows() != A.cols() || H.rows() != H.cols() || A.rows() != H.rows())
    throw ValidationError("generalized eigen: dimension mismatch");
  if ((A - A.transpose()).cwiseAbs().maxCoeff() > 1e-10 * std::max(1.0, A.cwiseAbs().maxCoeff()))
    throw ValidationError("generalized eigen: A is not symmetric");
  Eigen::LLT<MatrixXd> llt(H);
  if (llt.info() != Eigen::Success)
    throw ComputeError("generalized eigen: H is not positive definite");
  Eigen::GeneralizedSelfAdjointEigenSolver<MatrixXd> es(
      0.5 * (A + A.transpose()), H,
      Eigen::ComputeEigenvectors | Eigen::Ax_lBx);
  if (es.info() != Eigen::Success)
    throw ComputeError("generalized eigen: solver failed");
  const Index d = A.rows();
  EigenSolveResult out;
  out.eigenvalues.resize(d);
  out.eigenvectors.resize(d, d);
  out.residual_norms.resize(d);
  for (Index j = 0; j < d; ++j) {
    const Index src = d - 1 - j;  // Eigen returns ascending; we want descending
    out.eigenvalues[j] = es.eigenvalues()[src];
    out.eigenvectors.col(j) = es.eigenvectors().col(src);
    out.residual_norms[j] =
        (A * out.eigenvectors.col(j) - out.eigenvalues[j] * H * out.eigenvectors.col(j))
            .norm();
  }
  return out;
}

VectorXd update_gamma(const VectorXd& previous_gamma, const VectorXd& theta,
                      double alpha, const VectorXd& beta,
                      const std::vector<CovariancePair>& pairs, const MatrixXd& W,
                      const MatrixXd& H_y) {
  const Index n = static_cast<Index>(pairs.size());
  const VectorXd logzeta = log_forms_or_throw(pairs, theta, false);
  const VectorXd U = alpha * logzeta + W * beta;

  VectorXd xi = quad_forms(pairs, previous_gamma, true);
  MatrixXd A1 = MatrixXd::Zero(H_y.rows(), H_y.cols());
  double current = 0.0;
  for (Index i = 0; i < n; ++i) {
    if (!(xi[i] > 0.0))
      throw ComputeError("update_gamma: non-positive outcome form at subject index " +
                         std::to_string(i));
    const double residual = std::log(xi[i]) - U[i];
    A1 += (residual / xi[i]) * pairs[static_cast<std::size_t>(i)].sigma_hat;
    current += residual * residual;
  }
  A1 *= 2.0 / static_cast<double>(n);
  current /= static_cast<double>(n);

  const EigenSolveResult eig = generalized_symmetric_eigen(A1, H_y);
  const auto scores = score_candidates(pairs, eig.eigenvectors, true, U, 1.0);
  Index best = -1;
  double best_obj = current;
  for (Index c = 0; c < eig.eigenvectors.cols(); ++c) {
    const auto& s = scores[static_cast<std::size_t>(c)];
    if (s.valid && s.objective < best_obj) {
      best_obj = s.objective;
      best = c;
    }
  }
  if (best < 0)
    return gradient_polish(previous_gamma, A1, H_y, pairs, true, U, 1.0, current);
  return eig.eigenvectors.col(best);
}

VectorXd update_theta(const VectorXd& previous_theta, const VectorXd& gamma,
                      double alpha, const VectorXd& beta,
                      const std::vector<CovariancePair>& pairs, const MatrixXd& W,
                      const MatrixXd& H_x) {
  if (alpha == 0.0) return previous_theta;  // A2 vanishes, theta unidentified
  const Index n = static_cast<Index>(pairs.size());
  const VectorXd logxi = log_forms_or_throw(pairs, gamma, true);
  const VectorXd V = logxi - W * beta;

  VectorXd zeta = quad_forms(pairs, previous_theta, false);
  MatrixXd A2 = MatrixXd::Zero(H_x.rows(), H_x.cols());
  double current = 0.0;
  for (Index i = 0; i < n; ++i) {
    if (!(zeta[i] > 0.0))
      throw ComputeError("update_theta: non-positive predictor form at subject index " +
                         std::to_string(i));
    const double residual = alpha * std::log(zeta[i]) - V[i];
    A2 += (residual / zeta[i]) * pairs[static_cast<std::size_t>(i)].delta_hat;
    current += residual * residual;
  }
  A2 *= 2.0 * alpha / static_cast<double>(n);
  current /= static_cast<double>(n);

  const EigenSolveResult eig = generalized_symmetric_eigen(A2, H_x);
  const auto scores = score_candidates(pairs, eig.eigenvectors, false, V, alpha);
  Index best = -1;
  double best_obj = current;
  for (Index c = 0; c < eig.eigenvectors.cols(); ++c) {
    const auto& s = scores[static_cast<std::size_t>(c)];
    if (s.valid && s.objective < best_obj) {
      best_obj = s.objective;
      best = c;
    }
  }
  if (best < 0)
    return gradient_polish(previous_theta, A2, H_x, pairs, false, V, alpha, current);
  return eig.eigenvectors.col(best);
}

std::optional<std::pair<double, VectorXd>> solve_coefficients(
    const VectorXd& log_outcome_forms, const VectorXd& log_predictor_forms,
    const MatrixXd& W) {
  const Index n = W.rows();
  const Index r = W.cols();
  MatrixXd D(n, r + 1);
  D.col(0) = log_predictor_forms;
  D.rightCols(r) = W;
  const MatrixXd gram = D.transpose() * D;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(gram, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || hi / lo >= 1e12) return std::nullopt;
  const VectorXd sol = gram.ldlt().solve(D.transpose() * log_outcome_forms);
  return std::make_pair(sol[0], VectorXd(sol.tail(r)));
}

double similarity(const VectorXd& a, const VectorXd& b) {
  const double na = a.norm(), nb = b.norm();
  if (!(na > 0.0) || !(nb > 0.0))
    throw ValidationError("similarity: zero vector");
  return std::min(1.0, std::abs(a.dot(b)) / (na * nb));
}

namespace {

struct RestartResult {
  ComponentFit fit;
  bool ok = false;
  std::string error;
};

RestartResult run_restart(int restart_index, VectorXd gamma, VectorXd theta,
                          const std::vector<CovariancePair>& pairs,
                          const MatrixXd& W, const ConstraintMatrices& H,
                          const SolverConfig& cfg, RestartTrace* trace) {
  RestartResult res;
  res.fit.restart_index = restart_index;
  if (trace) trace->restart_index = restart_index;
  try {
    double alpha = 0.0;
    VectorXd beta = VectorXd::Zero(W.cols());
    double prev_obj = std::numeric_limits<double>::infinity();
    bool converged = false;
    int iter = 0;
    for (; iter < cfg.max_iter; ++iter) {
      alpha = update_alpha(theta, gamma, beta, pairs, W);
      beta = update_beta(theta, gamma, alpha, pairs, W);
      theta = update_theta(theta, gamma, alpha, beta, pairs, W, H.H_x);
      gamma = update_gamma(gamma, theta, alpha, beta, pairs, W, H.H_y);
      const double obj = objective(gamma, theta, alpha, beta, pairs, W);
      if (trace) {
        trace->objective.push_back(obj);
        trace->gamma_constraint_dev.push_back(std::abs(h_form(gamma, H.H_y) - 1.0));
        trace->theta_constraint_dev.push_back(std::abs(h_form(theta, H.H_x) - 1.0));
      }
      if (obj < kObjectiveFloor ||
          std::abs(prev_obj - obj) < cfg.tol * std::max(prev_obj, kObjectiveFloor)) {
        prev_obj = obj;
        converged = true;
        ++iter;
        break;
      }
      prev_obj = obj;
    }
    res.fit.gamma = gamma;
    res.fit.theta = theta;
    res.fit.alpha = alpha;
    res.fit.beta = beta;
    res.fit.objective = prev_obj;
    res.fit.n_iter = iter;
    res.fit.converged = converged;
    if (trace) trace->converged = converged;
    res.ok = true;
  } catch (const std::exception& e) {
    res.error = e.what();
    if (trace) trace->error = e.what();
  }
  return res;
}

}  // namespace

ComponentFit fit_component(const std::vector<CovariancePair>& pairs,
                           const MatrixXd& W, const SolverConfig& cfg,
                           std::vector<RestartTrace>* diagnostics) {
  cfg.validate();
  if (pairs.empty()) throw ValidationError("fit_component: no covariance pairs");
  if (static_cast<Index>(pairs.size()) != W.rows())
    throw ValidationError("fit_component: covariates/pairs size mismatch");
  if (W.rows() < W.cols() + 1)
    throw ValidationError("fit_component: need n >= r + 1 subjects");

  const ConstraintMatrices H = pooled_constraints(pairs, cfg.constraint_mode);

  // Initialization list: all pairings of the top-5 pooled eigenvectors,
  // then seeded uniform draws on the H-unit ellipsoids.
  std::vector<std::pair<VectorXd, VectorXd>> inits;
  if (cfg.eigen_init) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> ey(pooled_sigma(pairs));
    Eigen::SelfAdjointEigenSolver<MatrixXd> ex(pooled_delta(pairs));
    const Index q = ey.eigenvectors().cols();
    const Index p = ex.eigenvectors().cols();
    const Index ky = std::min<Index>(5, q);
    const Index kx = std::min<Index>(5, p);
    // Skip near-null directions (deflated data is rank-deficient).
    const double ey_floor = 1e-8 * ey.eigenvalues().cwiseAbs().maxCoeff();
    const double ex_floor = 1e-8 * ex.eigenvalues().cwiseAbs().maxCoeff();
    for (Index a = 0; a < ky; ++a) {
      if (ey.eigenvalues()[q - 1 - a] <= ey_floor) continue;
      for (Index b = 0; b < kx; ++b) {
        if (ex.eigenvalues()[p - 1 - b] <= ex_floor) continue;
        // eigenvalues ascend in Eigen, take the trailing columns
        VectorXd g = h_normalize(ey.eigenvectors().col(q - 1 - a), H.H_y);
        VectorXd t = h_normalize(ex.eigenvectors().col(p - 1 - b), H.H_x);
        inits.emplace_back(std::move(g), std::move(t));
      }
    }
  }
  const int n_eigen_inits = static_cast<int>(inits.size());
  const Index q = pairs[0].sigma_hat.rows();
  const Index p = pairs[0].delta_hat.rows();
  for (int k = 0; k < cfg.n_restarts; ++k) {
    const int restart_index = n_eigen_inits + k;
    std::mt19937_64 rng(cfg.seed ^ static_cast<std::uint64_t>(restart_index));
    std::normal_distribution<double> normal(0.0, 1.0);
    VectorXd g(q), t(p);
    for (Index j = 0; j < q; ++j) g[j] = normal(rng);
    for (Index j = 0; j < p; ++j) t[j] = normal(rng);
    inits.emplace_back(h_normalize(g, H.H_y), h_normalize(t, H.H_x));
  }

  const int total = static_cast<int>(inits.size());
  std::vector<RestartResult> results(static_cast<std::size_t>(total));
  if (diagnostics) diagnostics->assign(static_cast<std::size_t>(total), RestartTrace{});

  auto work = [&](int idx) {
    RestartTrace* trace =
        diagnostics ? &(*diagnostics)[static_cast<std::size_t>(idx)] : nullptr;
    results[static_cast<std::size_t>(idx)] =
        run_restart(idx, inits[static_cast<std::size_t>(idx)].first,
                    inits[static_cast<std::size_t>(idx)].second, pairs, W, H, cfg,
                    trace);
  };

  int n_threads = cfg.threads;
  if (n_threads <= 0)
    n_threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (n_threads <= 1 || total == 1) {
    for (int i = 0; i < total; ++i) work(i);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> workers;
    const int nw = std::min(n_threads, total);
    workers.reserve(static_cast<std::size_t>(nw));
    for (int t = 0; t < nw; ++t) {
      workers.emplace_back([&]() {
        for (int i = next.fetch_add(1); i < total; i = next.fetch_add(1)) work(i);
      });
    }
    for (auto& w : workers) w.join();
  }

  // Minimum objective wins; ties broken by lowest restart index.
  int best = -1;
  for (int i = 0; i < total; ++i) {
    const auto& r = results[static_cast<std::size_t>(i)];
    if (!r.ok) continue;
    if (best < 0 ||
        r.fit.objective < results[static_cast<std::size_t>(best)].fit.objective)
      best = i;
  }
  if (best < 0) {
    std::string detail = "fit_component: every restart failed;";
    for (int i = 0; i < total; ++i)
      detail += " [" + std::to_string(i) + "] " +
                results[static_cast<std::size_t>(i)].error + ";";
    throw ComputeError(detail);
  }
  ComponentFit fit = results[static_cast<std::size_t>(best)].fit;

  // With the projections fixed the coefficient problem is linear; the joint
  // solve lands exactly on the alternating fixed point of the closed-form
  // alpha/beta updates.
  const VectorXd logxi =
      outcome_quad_forms(pairs, fit.gamma).array().log();
  const VectorXd logzeta =
      predictor_quad_forms(pairs, fit.theta).array().log();
  if (auto coef = solve_coefficients(logxi, logzeta, W)) {
    const double refreshed =
        mean_squared(logxi - coef->first * logzeta - W * coef->second);
    if (refreshed <= fit.objective) {
      fit.alpha = coef->first;
      fit.beta = coef->second;
      fit.objective = refreshed;
    }
  }

  sign_fix(fit.gamma);
  sign_fix(fit.theta);
  fit.objective = objective(fit.gamma, fit.theta, fit.alpha, fit.beta, pairs, W);
  return fit;
}

}  // namespace cocreg
