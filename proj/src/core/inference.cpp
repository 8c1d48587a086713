#include "inference.hpp"

#include "covariance.hpp"
#include "rng.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace cocreg {

std::pair<double, VectorXd> refit_coefficients(
    const VectorXd& gamma, const VectorXd& theta,
    const std::vector<CovariancePair>& pairs, const MatrixXd& W) {
  if (pairs.empty() || static_cast<Index>(pairs.size()) != W.rows())
    throw ValidationError("refit_coefficients: covariates/pairs size mismatch");
  const VectorXd xi = outcome_quad_forms(pairs, gamma);
  const VectorXd zeta = predictor_quad_forms(pairs, theta);
  for (Index i = 0; i < xi.size(); ++i)
    if (!(xi[i] > 0.0) || !(zeta[i] > 0.0))
      throw ComputeError("refit_coefficients: non-positive quadratic form at subject index " +
                         std::to_string(i));
  auto coef = solve_coefficients(xi.array().log(), zeta.array().log(), W);
  if (!coef)
    throw ComputeError("refit_coefficients: singular design (collinear columns)");
  return *coef;
}

double quantile(VectorXd values, double prob) {
  const Index n = values.size();
  if (n == 0) throw ValidationError("quantile: empty sample");
  std::sort(values.data(), values.data() + n);
  double h = static_cast<double>(n) * prob + 0.5;
  h = std::clamp(h, 1.0, static_cast<double>(n));
  const Index lo = static_cast<Index>(std::floor(h)) - 1;
  const Index hi = std::min(lo + 1, n - 1);
  const double frac = h - std::floor(h);
  return values[lo] + frac * (values[hi] - values[lo]);
}

BootstrapResult bootstrap(const std::vector<CovariancePair>& pairs,
                          const MatrixXd& W, const ComponentFit& fitted, int B,
                          double level, std::uint64_t seed) {
  if (B < 100) throw ValidationError("bootstrap: B must be >= 100");
  if (!(level > 0.0 && level < 1.0))
    throw ValidationError("bootstrap: level must be in (0, 1)");
  const Index n = static_cast<Index>(pairs.size());
  if (n != W.rows())
    throw ValidationError("bootstrap: covariates/pairs size mismatch");
  const Index r = W.cols();

  // Per-subject log forms at the fixed projections; resampling only
  // reindexes these.
  const VectorXd logxi = [&] {
    VectorXd f = outcome_quad_forms(pairs, fitted.gamma);
    for (Index i = 0; i < n; ++i)
      if (!(f[i] > 0.0))
        throw ComputeError("bootstrap: non-positive outcome form");
    return VectorXd(f.array().log());
  }();
  const VectorXd logzeta = [&] {
    VectorXd f = predictor_quad_forms(pairs, fitted.theta);
    for (Index i = 0; i < n; ++i)
      if (!(f[i] > 0.0))
        throw ComputeError("bootstrap: non-positive predictor form");
    return VectorXd(f.array().log());
  }();

  BootstrapResult out;
  out.B = B;
  out.level = level;
  out.draws.resize(B, 1 + r);
  out.n_failed = 0;

  for (int b = 0; b < B; ++b) {
    std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(b)));
    std::uniform_int_distribution<Index> pick(0, n - 1);
    bool done = false;
    for (int attempt = 0; attempt < 10 && !done; ++attempt) {
      VectorXd y(n), x(n);
      MatrixXd Wb(n, r);
      for (Index i = 0; i < n; ++i) {
        const Index j = pick(rng);
        y[i] = logxi[j];
        x[i] = logzeta[j];
        Wb.row(i) = W.row(j);
      }
      if (auto coef = solve_coefficients(y, x, Wb)) {
        out.draws(b, 0) = coef->first;
        out.draws.row(b).tail(r) = coef->second.transpose();
        done = true;
      }
    }
    if (!done) {
      out.draws.row(b).setConstant(std::numeric_limits<double>::quiet_NaN());
      ++out.n_failed;
    }
  }
  if (out.n_failed > 0.05 * B)
    throw ComputeError("bootstrap: more than 5% of replicates had singular designs");

  const double lo_p = (1.0 - level) / 2.0;
  const double hi_p = 1.0 - lo_p;
  out.lower.resize(1 + r);
  out.upper.resize(1 + r);
  for (Index c = 0; c < 1 + r; ++c) {
    std::vector<double> ok;
    ok.reserve(static_cast<std::size_t>(B));
    for (int b = 0; b < B; ++b)
      if (std::isfinite(out.draws(b, c))) ok.push_back(out.draws(b, c));
    VectorXd v = Eigen::Map<VectorXd>(ok.data(), static_cast<Index>(ok.size()));
    out.lower[c] = quantile(v, lo_p);
    out.upper[c] = quantile(v, hi_p);
  }
  return out;
}

AsymptoticCovariance asymptotic_covariance(const VectorXd& gamma,
                                           const VectorXd& theta,
                                           const Cohort& cohort) {
  (void)gamma;  // the coefficient covariance depends on the predictor side only
  cohort.validate();
  const Index n = cohort.n();
  const Index r = cohort.r();
  AsymptoticCovariance out;
  out.Q_w = MatrixXd::Zero(r, r);
  out.H_xw = VectorXd::Zero(r);
  out.G_x = 0.0;
  out.M_n = 0.0;
  for (const auto& s : cohort.subjects) {
    // Second moments of centered data equal the sample covariance.
    const MatrixXd delta = sample_covariance(s.X);
    const double form = theta.dot(delta * theta);
    if (!(form > 0.0))
      throw ComputeError("asymptotic_covariance: non-positive predictor form for subject " +
                         s.subject_id);
    const double lf = std::log(form);
    out.G_x += lf * lf;
    out.H_xw += lf * s.w;
    out.Q_w += s.w * s.w.transpose();
    out.M_n += static_cast<double>(s.v());
  }
  out.G_x /= static_cast<double>(n);
  out.H_xw /= static_cast<double>(n);
  out.Q_w /= static_cast<double>(n);

  MatrixXd block(1 + r, 1 + r);
  block(0, 0) = out.G_x;
  block.block(0, 1, 1, r) = out.H_xw.transpose();
  block.block(1, 0, r, 1) = out.H_xw;
  block.block(1, 1, r, r) = out.Q_w;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(block, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || hi / lo >= 1e12)
    throw ComputeError("asymptotic_covariance: singular block matrix");
  out.cov = block.inverse() / out.M_n;
  return out;
}

}  // namespace cocreg
