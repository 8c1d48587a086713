#include <doctest.h>

#include "core/components.hpp"
#include "core/covariance.hpp"
#include "core/simgen.hpp"

#include <cmath>
#include <random>

using namespace cocreg;

TEST_CASE("deflate removes the projected column") {
  MatrixXd data(2, 2);
  data << 1, 2, 3, 4;
  MatrixXd basis(2, 1);
  basis << 1, 0;
  MatrixXd out = deflate(data, basis);
  CHECK(out(0, 0) == doctest::Approx(0.0));
  CHECK(out(1, 0) == doctest::Approx(0.0));
  CHECK(out(0, 1) == doctest::Approx(2.0));
  CHECK(out(1, 1) == doctest::Approx(4.0));
}

TEST_CASE("deflate rejects bad bases and passes empty ones through") {
  MatrixXd data(3, 2);
  data << 1, 2, 3, 4, 5, 6;
  // A full basis would zero the data entirely; that is rejected.
  CHECK_THROWS_AS(deflate(data, MatrixXd::Identity(2, 2)), ValidationError);
  MatrixXd skewed(2, 1);
  skewed << 1, 1;  // not unit norm
  CHECK_THROWS_AS(deflate(data, skewed), ValidationError);
  CHECK((deflate(data, MatrixXd(2, 0)) - data).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("deflated data is orthogonal to the basis and idempotent") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal;
  MatrixXd data = MatrixXd::NullaryExpr(20, 5, [&] { return normal(rng); });
  MatrixXd raw = MatrixXd::NullaryExpr(5, 2, [&] { return normal(rng); });
  MatrixXd basis = Eigen::HouseholderQR<MatrixXd>(raw).householderQ() *
                   MatrixXd::Identity(5, 2);
  MatrixXd out = deflate(data, basis);
  CHECK((out * basis).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((deflate(out, basis) - out).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("nu is 1 on diagonal matrices") {
  CHECK(nu(MatrixXd::Identity(3, 3)) == doctest::Approx(1.0));
  MatrixXd D = MatrixXd::Zero(2, 2);
  D.diagonal() << 2.0, 5.0;
  CHECK(nu(D) == doctest::Approx(1.0));
  CHECK(nu(MatrixXd::Constant(1, 1, 7.0)) == doctest::Approx(1.0));
}

TEST_CASE("nu hand value 4/3") {
  MatrixXd A(2, 2);
  A << 1.0, 0.5, 0.5, 1.0;
  CHECK(nu(A) == doctest::Approx(4.0 / 3.0));
}

TEST_CASE("nu is invariant to congruence by diagonal scalings") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> normal;
  MatrixXd B = MatrixXd::NullaryExpr(3, 3, [&] { return normal(rng); });
  MatrixXd A = B * B.transpose() + 0.5 * MatrixXd::Identity(3, 3);
  VectorXd d(3);
  d << 2.0, 0.3, 5.0;
  MatrixXd scaled = d.asDiagonal() * A * d.asDiagonal();
  CHECK(nu(scaled) == doctest::Approx(nu(A)).epsilon(1e-10));
  CHECK(nu(A) >= 1.0);
}

TEST_CASE("dfd_side: one-dimensional projections are exactly diagonal") {
  std::mt19937_64 rng(10);
  std::normal_distribution<double> normal;
  std::vector<MatrixXd> mats;
  for (int i = 0; i < 4; ++i) {
    MatrixXd B = MatrixXd::NullaryExpr(3, 3, [&] { return normal(rng); });
    mats.push_back(B * B.transpose() + 0.1 * MatrixXd::Identity(3, 3));
  }
  MatrixXd basis(3, 1);
  basis << 1, 0, 0;
  CHECK(dfd_side(basis, mats, {1, 1, 1, 1}) == doctest::Approx(1.0));
}

TEST_CASE("dfd_side: equal-weight geometric mean of (1, 4) is 2") {
  MatrixXd diag2 = MatrixXd::Identity(2, 2);
  MatrixXd corr(2, 2);
  const double rho = std::sqrt(0.75);  // nu = 1 / (1 - rho^2) = 4
  corr << 1.0, rho, rho, 1.0;
  MatrixXd basis = MatrixXd::Identity(2, 2);
  CHECK(dfd_side(basis, {diag2, corr}, {1.0, 1.0}) == doctest::Approx(2.0));
}

TEST_CASE("dfd_side: weights shift the mean toward the heavier subject") {
  MatrixXd diag2 = MatrixXd::Identity(2, 2);
  MatrixXd corr(2, 2);
  corr << 1.0, std::sqrt(0.75), std::sqrt(0.75), 1.0;  // nu = 4
  MatrixXd basis = MatrixXd::Identity(2, 2);
  // weights (1, 3): exp((0*log1 + 3*log4)/4) = 4^(3/4)
  CHECK(dfd_side(basis, {diag2, corr}, {1.0, 3.0}) ==
        doctest::Approx(std::pow(4.0, 0.75)));
}

TEST_CASE("dfd takes the max over the two sides") {
  CovariancePair pr;
  pr.sigma_hat = MatrixXd::Identity(2, 2);
  pr.delta_hat = MatrixXd(2, 2);
  pr.delta_hat << 1.0, 0.5, 0.5, 1.0;  // nu = 4/3 on the predictor side
  pr.v_obs = pr.u_obs = 100;
  MatrixXd basis = MatrixXd::Identity(2, 2);
  CHECK(dfd(basis, basis, {pr}) == doctest::Approx(4.0 / 3.0));
  // Single-column bases are always diagonal.
  CHECK(dfd(basis.col(0), basis.col(0), {pr}) == doctest::Approx(1.0));
}

TEST_CASE("fit_sequence with max_k = 1 selects one component") {
  SimScenario sc = preset_scenario("sim-i-small");
  sc.n = 40;
  sc.u = sc.v = 80;
  ReplicateData rd = generate_replicate(sc, 2);
  SolverConfig cfg;
  cfg.seed = 3;
  FitSequence seq = fit_sequence(rd.cohort, cfg, 1, 2.0);
  REQUIRE(seq.components.size() == 1);
  CHECK(seq.selected_k == 1);
  CHECK(seq.dfd_trace.size() == 1);
  CHECK(seq.dfd_trace[0].first == 1);
  CHECK(seq.dfd_trace[0].second == doctest::Approx(1.0));
}

TEST_CASE("fit_sequence components are constraint-orthogonal") {
  SimScenario sc = preset_scenario("sim-i-small");
  sc.n = 50;
  sc.u = sc.v = 100;
  ReplicateData rd = generate_replicate(sc, 4);
  SolverConfig cfg;
  cfg.seed = 6;
  FitSequence seq = fit_sequence(rd.cohort, cfg, 2, 2.0);
  REQUIRE(seq.components.size() == 2);
  const auto& c1 = seq.components[0];
  const auto& c2 = seq.components[1];
  CHECK(std::abs(c1.gamma.dot(c2.gamma)) < 1e-6);
  CHECK(std::abs(c1.theta.dot(c2.theta)) < 1e-6);
  CHECK(std::abs(c1.gamma.squaredNorm() - 1.0) < 1e-8);
  CHECK(std::abs(c2.theta.squaredNorm() - 1.0) < 1e-8);
  // DfD trace is recorded for both depths and starts at exactly 1.
  REQUIRE(seq.dfd_trace.size() == 2);
  CHECK(seq.dfd_trace[0].second == doctest::Approx(1.0));
  CHECK(seq.dfd_trace[1].second >= 1.0);
}

TEST_CASE("fit_sequence validates its inputs") {
  SimScenario sc = preset_scenario("sim-i-small");
  sc.n = 10;
  sc.u = sc.v = 40;
  ReplicateData rd = generate_replicate(sc, 9);
  SolverConfig cfg;
  CHECK_THROWS_AS(fit_sequence(rd.cohort, cfg, 0, 2.0), ValidationError);
  CHECK_THROWS_AS(fit_sequence(rd.cohort, cfg, 100, 2.0), ValidationError);
}
