#pragma once

#include "components.hpp"
#include "inference.hpp"
#include "simgen.hpp"
#include "types.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>

namespace cocreg {

using nlohmann::json;

// Headerless numeric CSV.
MatrixXd read_csv_matrix(const std::filesystem::path& path);
void write_csv_matrix(const std::filesystem::path& path, const MatrixXd& M);

// Dataset directory: manifest.json with {"subjects": [dir, ...]}; each
// subject directory holds X.csv, Y.csv, w.csv.
Cohort load_cohort(const std::filesystem::path& dir);
void save_cohort(const std::filesystem::path& dir, const Cohort& cohort);

json to_json(const ComponentFit& fit);
ComponentFit component_fit_from_json(const json& j);

json to_json(const FitSequence& seq);
FitSequence fit_sequence_from_json(const json& j);

json to_json(const BootstrapResult& result);
json to_json(const AsymptoticCovariance& cov);

json to_json(const SimScenario& scenario);
SimScenario scenario_from_json(const json& j);

json to_json(const MonteCarloReport& report);
// metrics.csv rows: method,component,metric,... mirroring the report.
std::string metrics_csv(const MonteCarloReport& report);

// Gzip-compressed headerless CSV of the bootstrap draws matrix.
void write_draws_gz(const std::filesystem::path& path, const MatrixXd& draws);

}  // namespace cocreg
