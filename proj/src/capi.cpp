#include "cocreg/cocreg.h"

#include "core/baseline.hpp"
#include "core/components.hpp"
#include "core/covariance.hpp"
#include "core/inference.hpp"
#include "core/io.hpp"
#include "core/simgen.hpp"

#include <cstring>
#include <memory>
#include <string>

namespace {

thread_local std::string g_last_error;

char* dup_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

cocreg_status fail(cocreg_status code, const std::string& message) {
  g_last_error = message;
  return code;
}

template <typename Fn>
cocreg_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return COCREG_OK;
  } catch (const cocreg::ValidationError& e) {
    return fail(COCREG_INVALID_INPUT, e.what());
  } catch (const nlohmann::json::exception& e) {
    return fail(COCREG_INVALID_INPUT, e.what());
  } catch (const std::exception& e) {
    return fail(COCREG_COMPUTE_ERROR, e.what());
  }
}

void reject_unknown_keys(const nlohmann::json& j,
                         std::initializer_list<const char*> known) {
  if (!j.is_object()) throw cocreg::ValidationError("config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    bool found = false;
    for (const char* k : known)
      if (key == k) {
        found = true;
        break;
      }
    if (!found) throw cocreg::ValidationError("unknown config key: " + key);
  }
}

cocreg::SolverConfig solver_config_from_json(const nlohmann::json& j) {
  cocreg::SolverConfig cfg;
  cfg.tol = j.value("tol", cfg.tol);
  cfg.max_iter = j.value("max_iter", cfg.max_iter);
  cfg.n_restarts = j.value("n_restarts", cfg.n_restarts);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.threads = j.value("threads", cfg.threads);
  cfg.eigen_init = j.value("eigen_init", cfg.eigen_init);
  if (j.contains("constraint"))
    cfg.constraint_mode =
        cocreg::constraint_mode_from_name(j["constraint"].get<std::string>());
  cfg.validate();
  return cfg;
}

nlohmann::json parse_config(const char* config_json) {
  if (!config_json) throw cocreg::ValidationError("config must not be null");
  return nlohmann::json::parse(config_json);
}

cocreg::MatrixXd basis_from_json(const nlohmann::json& arr,
                                 const std::string& name) {
  if (!arr.is_array() || arr.empty())
    throw cocreg::ValidationError(name + " must be a non-empty array of vectors");
  const auto cols = static_cast<cocreg::Index>(arr.size());
  const auto rows = static_cast<cocreg::Index>(arr.front().size());
  cocreg::MatrixXd basis(rows, cols);
  cocreg::Index c = 0;
  for (const auto& vec : arr) {
    if (static_cast<cocreg::Index>(vec.size()) != rows)
      throw cocreg::ValidationError(name + " vectors must share one length");
    cocreg::Index r = 0;
    for (const auto& x : vec) basis(r++, c) = x.get<double>();
    ++c;
  }
  return basis;
}

}  // namespace

struct cocreg_cohort {
  cocreg::Cohort data;
};

extern "C" {

const char* cocreg_version(void) { return "0.1.0"; }

const char* cocreg_last_error(void) { return g_last_error.c_str(); }

cocreg_status cocreg_cohort_load(const char* dir, cocreg_cohort** out) {
  if (!dir || !out) return fail(COCREG_INVALID_INPUT, "null argument");
  *out = nullptr;
  return guarded([&] {
    auto handle = std::make_unique<cocreg_cohort>();
    handle->data = cocreg::load_cohort(dir);
    *out = handle.release();
  });
}

void cocreg_cohort_free(cocreg_cohort* cohort) { delete cohort; }

cocreg_status cocreg_fit(const cocreg_cohort* cohort, const char* config_json,
                         char** out_json) {
  if (!cohort || !out_json) return fail(COCREG_INVALID_INPUT, "null argument");
  return guarded([&] {
    const auto j = parse_config(config_json);
    reject_unknown_keys(j, {"max_k", "threshold", "seed", "tol", "max_iter",
                            "n_restarts", "constraint", "threads", "eigen_init"});
    const int max_k = j.value("max_k", 1);
    const double threshold = j.value("threshold", 2.0);
    const auto cfg = solver_config_from_json(j);
    const auto seq = cocreg::fit_sequence(cohort->data, cfg, max_k, threshold);
    *out_json = dup_string(cocreg::to_json(seq).dump());
  });
}

cocreg_status cocreg_bootstrap(const cocreg_cohort* cohort,
                               const char* config_json, char** out_json) {
  if (!cohort || !out_json) return fail(COCREG_INVALID_INPUT, "null argument");
  return guarded([&] {
    const auto j = parse_config(config_json);
    reject_unknown_keys(j, {"fit", "B", "level", "seed", "include_draws"});
    if (!j.contains("fit"))
      throw cocreg::ValidationError("bootstrap config needs a \"fit\" object");
    const auto fit = cocreg::component_fit_from_json(j["fit"]);
    const int B = j.value("B", 500);
    const double level = j.value("level", 0.95);
    const std::uint64_t seed = j.value("seed", std::uint64_t{0});
    const auto pairs = cocreg::estimate_covariances(cohort->data);
    const auto result = cocreg::bootstrap(pairs, cohort->data.covariates(), fit,
                                          B, level, seed);
    auto out = cocreg::to_json(result);
    if (j.value("include_draws", false)) {
      nlohmann::json rows = nlohmann::json::array();
      for (cocreg::Index i = 0; i < result.draws.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (cocreg::Index c = 0; c < result.draws.cols(); ++c)
          row.push_back(result.draws(i, c));
        rows.push_back(std::move(row));
      }
      out["draws"] = std::move(rows);
    }
    *out_json = dup_string(out.dump());
  });
}

cocreg_status cocreg_dfd(const cocreg_cohort* cohort, const char* config_json,
                         char** out_json) {
  if (!cohort || !out_json) return fail(COCREG_INVALID_INPUT, "null argument");
  return guarded([&] {
    const auto j = parse_config(config_json);
    reject_unknown_keys(j, {"gamma", "theta"});
    const auto gamma_basis = basis_from_json(j.at("gamma"), "gamma");
    const auto theta_basis = basis_from_json(j.at("theta"), "theta");
    const auto pairs = cocreg::estimate_covariances(cohort->data);
    nlohmann::json out;
    out["dfd"] = cocreg::dfd(gamma_basis, theta_basis, pairs);
    *out_json = dup_string(out.dump());
  });
}

cocreg_status cocreg_cpca_reg(const cocreg_cohort* cohort,
                              const char* config_json, char** out_json) {
  if (!cohort || !out_json) return fail(COCREG_INVALID_INPUT, "null argument");
  return guarded([&] {
    const auto j = parse_config(config_json);
    reject_unknown_keys(j, {"variance_fraction"});
    const double fraction = j.value("variance_fraction", 0.85);
    const auto pairs = cocreg::estimate_covariances(cohort->data);
    const auto model =
        cocreg::cpca_reg(pairs, cohort->data.covariates(), fraction);
    nlohmann::json out;
    out["y_selected"] = model.y_selected;
    out["x_selected"] = model.x_selected;
    out["regressions"] = nlohmann::json::array();
    for (const auto& reg : model.regressions) {
      nlohmann::json r;
      r["x_component"] = reg.x_component;
      r["y_component"] = reg.y_component;
      r["alpha"] = reg.alpha;
      nlohmann::json beta = nlohmann::json::array();
      for (cocreg::Index c = 0; c < reg.beta.size(); ++c)
        beta.push_back(reg.beta[c]);
      r["beta"] = std::move(beta);
      r["r_squared"] = reg.r_squared;
      r["ok"] = reg.ok;
      out["regressions"].push_back(std::move(r));
    }
    *out_json = dup_string(out.dump());
  });
}

cocreg_status cocreg_simulate(const char* config_json, char** out_json) {
  if (!out_json) return fail(COCREG_INVALID_INPUT, "null argument");
  return guarded([&] {
    const auto j = parse_config(config_json);
    reject_unknown_keys(
        j, {"scenario", "replicates", "seed", "baseline", "bootstrap",
            "bootstrap_B", "bootstrap_level", "max_k", "dfd_threshold",
            "solver", "overrides"});
    if (!j.contains("scenario"))
      throw cocreg::ValidationError("simulate config needs a \"scenario\"");
    cocreg::SimScenario scenario;
    if (j["scenario"].is_string())
      scenario = cocreg::preset_scenario(j["scenario"].get<std::string>());
    else
      scenario = cocreg::scenario_from_json(j["scenario"]);
    if (j.contains("overrides")) {
      auto merged = cocreg::to_json(scenario);
      merged.update(j["overrides"]);
      scenario = cocreg::scenario_from_json(merged);
    }
    cocreg::MonteCarloConfig cfg;
    cfg.replicates = j.value("replicates", cfg.replicates);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.run_baseline = j.value("baseline", cfg.run_baseline);
    cfg.run_bootstrap = j.value("bootstrap", cfg.run_bootstrap);
    cfg.bootstrap_B = j.value("bootstrap_B", cfg.bootstrap_B);
    cfg.bootstrap_level = j.value("bootstrap_level", cfg.bootstrap_level);
    cfg.max_k = j.value("max_k", cfg.max_k);
    cfg.dfd_threshold = j.value("dfd_threshold", cfg.dfd_threshold);
    if (j.contains("solver")) cfg.solver = solver_config_from_json(j["solver"]);
    cfg.solver.seed = cfg.seed;
    const auto report = cocreg::run_monte_carlo(scenario, cfg);
    *out_json = dup_string(cocreg::to_json(report).dump());
  });
}

void cocreg_free_string(char* s) { delete[] s; }

}  // extern "C"
