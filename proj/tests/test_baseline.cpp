#include <doctest.h>

#include "core/baseline.hpp"
#include "core/covariance.hpp"
#include "core/simgen.hpp"
#include "core/solver.hpp"

#include <cmath>
#include <random>

using namespace cocreg;

namespace {

// Commonly diagonalizable pairs with a model-exact planted relation between
// the leading eigenvalues of both blocks.
struct ExactInstance {
  std::vector<CovariancePair> pairs;
  MatrixXd W;
  MatrixXd Qy, Qx;
  double alpha_true = 2.0;
  VectorXd beta_true;
};

ExactInstance exact_instance(Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  ExactInstance inst;
  inst.beta_true = VectorXd(2);
  inst.beta_true << 0.5, -0.7;
  inst.Qy = random_orthonormal(3, rng);
  inst.Qx = random_orthonormal(3, rng);
  inst.W = MatrixXd(n, 2);
  inst.W.col(0).setOnes();
  inst.pairs.resize(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    inst.W(i, 1) = normal(rng);
    VectorXd omega(3), lambda(3);
    omega << std::exp(1.5 + 0.8 * normal(rng)), std::exp(-1.0 + 0.05 * normal(rng)),
        std::exp(-2.0 + 0.05 * normal(rng));
    lambda << std::exp(inst.alpha_true * std::log(omega[0]) +
                       inst.W.row(i).dot(inst.beta_true)),
        std::exp(-1.0 + 0.05 * normal(rng)), std::exp(-2.0 + 0.05 * normal(rng));
    auto& pr = inst.pairs[static_cast<std::size_t>(i)];
    pr.delta_hat = inst.Qx * omega.asDiagonal() * inst.Qx.transpose();
    pr.sigma_hat = inst.Qy * lambda.asDiagonal() * inst.Qy.transpose();
    pr.v_obs = pr.u_obs = 100;
  }
  return inst;
}

}  // namespace

TEST_CASE("common_pca recovers a shared eigenbasis") {
  std::mt19937_64 rng(41);
  MatrixXd Q = random_orthonormal(4, rng);
  std::vector<MatrixXd> mats;
  std::vector<double> weights;
  std::normal_distribution<double> normal;
  for (int i = 0; i < 6; ++i) {
    VectorXd d(4);
    d << std::exp(2.0 + 0.1 * normal(rng)), std::exp(1.0 + 0.1 * normal(rng)),
        std::exp(0.0 + 0.1 * normal(rng)), std::exp(-1.0 + 0.1 * normal(rng));
    mats.push_back(Q * d.asDiagonal() * Q.transpose());
    weights.push_back(1.0);
  }
  MatrixXd V;
  VectorXd pooled;
  MatrixXd subj;
  common_pca(mats, weights, &V, &pooled, &subj);
  REQUIRE(V.cols() == 4);
  // Descending pooled eigenvalues.
  for (Index j = 1; j < 4; ++j) CHECK(pooled[j] <= pooled[j - 1]);
  // Columns match the shared basis up to sign.
  for (Index j = 0; j < 4; ++j)
    CHECK(similarity(V.col(j), Q.col(j)) > 1.0 - 1e-8);
  // Projections are diagonal: V^T S_i V off-diagonals vanish.
  for (const auto& S : mats) {
    MatrixXd P = V.transpose() * S * V;
    MatrixXd off = P - MatrixXd(P.diagonal().asDiagonal());
    CHECK(off.cwiseAbs().maxCoeff() < 1e-6);
  }
  // Per-subject eigenvalues are the projected diagonals.
  CHECK(subj.rows() == 6);
  CHECK(subj(0, 0) ==
        doctest::Approx(V.col(0).dot(mats[0] * V.col(0))).epsilon(1e-10));
}

TEST_CASE("common_pca respects subject weights") {
  MatrixXd A = MatrixXd::Identity(2, 2);
  MatrixXd B(2, 2);
  B << 5.0, 0.0, 0.0, 1.0;
  MatrixXd V;
  VectorXd pooled;
  MatrixXd subj;
  common_pca({A, B}, {100.0, 300.0}, &V, &pooled, &subj);
  // Pooled = 0.25 A + 0.75 B = diag(4, 1).
  CHECK(pooled[0] == doctest::Approx(4.0));
  CHECK(pooled[1] == doctest::Approx(1.0));
}

TEST_CASE("select_top_components takes the smallest sufficient prefix") {
  VectorXd dominant(3);
  dominant << 0.9, 0.05, 0.05;
  CHECK(select_top_components(dominant, 0.85) == std::vector<int>{0});

  VectorXd spread(3);
  spread << 0.5, 0.3, 0.2;
  CHECK(select_top_components(spread, 0.85) == std::vector<int>{0, 1, 2});

  VectorXd uniform = VectorXd::Constant(10, 0.1);
  std::vector<int> nine(9);
  for (int i = 0; i < 9; ++i) nine[static_cast<std::size_t>(i)] = i;
  CHECK(select_top_components(uniform, 0.85) == nine);
}

TEST_CASE("cpca_reg attains R^2 = 1 on a model-exact instance") {
  std::mt19937_64 rng(61);
  auto inst = exact_instance(40, rng);
  CpcaModel model = cpca_reg(inst.pairs, inst.W, 0.85);
  REQUIRE(!model.regressions.empty());
  double best_r2 = 0.0;
  const PairRegression* best = nullptr;
  for (const auto& reg : model.regressions) {
    if (reg.ok && reg.r_squared > best_r2) {
      best_r2 = reg.r_squared;
      best = &reg;
    }
  }
  REQUIRE(best != nullptr);
  CHECK(best_r2 > 1.0 - 1e-8);
  CHECK(best->alpha == doctest::Approx(inst.alpha_true).epsilon(1e-6));
  // The winning pair uses the planted leading directions.
  CHECK(similarity(model.x_eigenvectors.col(best->x_component), inst.Qx.col(0)) >
        0.999);
  CHECK(similarity(model.y_eigenvectors.col(best->y_component), inst.Qy.col(0)) >
        0.999);
}

TEST_CASE("cpca_reg with a single selected pair runs one regression") {
  std::mt19937_64 rng(71);
  auto inst = exact_instance(30, rng);
  // Leading components carry nearly all pooled variance at fraction 0.5.
  CpcaModel model = cpca_reg(inst.pairs, inst.W, 0.5);
  CHECK(model.y_selected.size() == 1);
  CHECK(model.x_selected.size() == 1);
  CHECK(model.regressions.size() == 1);
}

TEST_CASE("cpca_reg on simulated data tracks the planted direction") {
  SimScenario sc = preset_scenario("sim-i-small");
  sc.n = 60;
  sc.u = sc.v = 100;
  // Moderate spread so the planted predictor direction stays inside the 85%
  // pooled-variance prefix; a large spread inflates the non-planted pooled
  // eigenvalues by exp(sd^2/2) and pushes it out of the selected set.
  sc.log_sd = 0.85;
  ReplicateData rd = generate_replicate(sc, 31);
  auto pairs = estimate_covariances(rd.cohort);
  CpcaModel model = cpca_reg(pairs, rd.cohort.covariates(), 0.85);
  REQUIRE(!model.regressions.empty());
  // Some selected predictor eigenvector approximates the planted theta.
  const VectorXd theta_true =
      rd.truth.Upsilon.col(rd.truth.planted[0].x_index);
  double best = 0.0;
  for (int j : model.x_selected)
    best = std::max(best, similarity(model.x_eigenvectors.col(j), theta_true));
  CHECK(best > 0.95);
}
