#pragma once

#include "solver.hpp"
#include "types.hpp"

#include <random>

namespace cocreg {

enum class NoiseFamily { gaussian, mvt, matrix_gamma };

std::string noise_family_name(NoiseFamily f);
NoiseFamily noise_family_from_name(const std::string& name);

// One component pair planted to satisfy the log-linear model exactly:
// the outcome eigenvalue at y_index is set from the predictor eigenvalue
// at x_index and the covariates.
struct PlantedComponent {
  int y_index = 0;  // 0-based column of Pi
  int x_index = 0;  // 0-based column of Upsilon
  double alpha = 0.0;
  VectorXd beta;
};

struct SimScenario {
  std::string name = "custom";
  int p = 10, q = 5, r = 2;
  int n = 100, u = 100, v = 100;
  bool partial_common = false;
  int common_count_y = 0;  // leading shared columns when partial_common
  int common_count_x = 0;
  std::vector<PlantedComponent> planted;
  NoiseFamily family = NoiseFamily::gaussian;
  double mvt_df = 3.0;
  double gamma_shape = 1.0;
  double log_mean_hi = 1.0;   // eigenvalue log-mean decay endpoints
  double log_mean_lo = -2.0;
  double log_sd = 0.1;
  double planted_log_sd = 0.5;  // spread of the planted predictor eigenvalue
  std::uint64_t seed = 0;

  void validate() const;
};

// Per-subject eigenvalues for both blocks.
struct SubjectEigenvalues {
  VectorXd lambda;  // outcome, length q
  VectorXd omega;   // predictor, length p
};

// Haar-distributed orthonormal matrix (QR with sign-fixed R diagonal).
MatrixXd random_orthonormal(Index dim, std::mt19937_64& rng);

// Eigenvalue draws for one subject: non-planted log-means interpolate
// linearly from log_mean_hi to log_mean_lo over the non-planted index
// order; planted outcome eigenvalues satisfy the model exactly.
SubjectEigenvalues plant_eigenvalues(const SimScenario& scenario,
                                     const VectorXd& w, std::mt19937_64& rng);

// Sigma_i = Pi Lambda_i Pi^T given per-subject bases.
MatrixXd compose_covariance(const MatrixXd& eigenvectors,
                            const VectorXd& eigenvalues);

// Subject basis under partial common diagonalization: the leading
// common_count columns are shared, the rest drawn fresh per subject.
MatrixXd subject_basis(const MatrixXd& shared, Index common_count,
                       std::mt19937_64& rng);

// Zero-mean samplers with the requested population covariance.
MatrixXd sample_gaussian(const MatrixXd& cov, Index rows, std::mt19937_64& rng);
MatrixXd sample_mvt(const MatrixXd& cov, double df, Index rows,
                    std::mt19937_64& rng);
MatrixXd sample_matrix_gamma(const MatrixXd& cov, double shape, Index rows,
                             std::mt19937_64& rng);

// Everything needed to score one replicate against the truth.
struct GroundTruth {
  MatrixXd Pi;       // q x q shared outcome eigenvectors
  MatrixXd Upsilon;  // p x p shared predictor eigenvectors
  std::vector<PlantedComponent> planted;
  // Under partial common diagonalization a planted gamma direction may not
  // exist as a shared vector; gamma_defined flags that per component.
  std::vector<bool> gamma_defined;
};

struct ReplicateData {
  Cohort cohort;
  GroundTruth truth;
};

// One full draw of a scenario: bases, eigenvalues, covariates, raw data.
ReplicateData generate_replicate(const SimScenario& scenario, std::uint64_t seed);

// Monte-Carlo harness configuration and report.
struct MonteCarloConfig {
  int replicates = 100;
  std::uint64_t seed = 0;
  SolverConfig solver;
  double dfd_threshold = 2.0;
  int max_k = 0;          // 0 means the number of planted components
  bool run_baseline = false;
  bool run_bootstrap = false;
  int bootstrap_B = 200;
  double bootstrap_level = 0.95;
  double baseline_variance_fraction = 0.85;
};

struct CoefficientMetrics {
  std::string name;  // "alpha", "beta0", "beta1", ...
  double truth = 0.0;
  double bias = 0.0;
  double se = 0.0;
  double mse = 0.0;
  double coverage = -1.0;  // -1 when bootstrap was not requested
};

struct ComponentMetrics {
  std::string name;  // "C1", "C2", ...
  bool gamma_applicable = true;
  double gamma_sim_mean = 0.0, gamma_sim_se = 0.0;
  double theta_sim_mean = 0.0, theta_sim_se = 0.0;
  std::vector<CoefficientMetrics> coefficients;
  int n_scored = 0;  // replicates where this component was matched
};

struct MonteCarloReport {
  SimScenario scenario;
  int replicates = 0;
  int n_failed = 0;
  std::vector<ComponentMetrics> cocreg;
  std::vector<ComponentMetrics> baseline;  // empty unless requested
  std::vector<int> selected_k_counts;      // histogram over k = 0..max_k
  double mean_selected_k = 0.0;
};

MonteCarloReport run_monte_carlo(const SimScenario& scenario,
                                 const MonteCarloConfig& config);

// Named scenarios from the simulation studies.
SimScenario preset_scenario(const std::string& name);

}  // namespace cocreg
