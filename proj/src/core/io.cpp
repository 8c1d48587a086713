#include "io.hpp"

#include <zlib.h>

#include <fstream>
#include <sstream>

namespace cocreg {

namespace fs = std::filesystem;

namespace {

json vector_to_json(const VectorXd& v) {
  json arr = json::array();
  for (Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

VectorXd vector_from_json(const json& arr) {
  VectorXd v(static_cast<Index>(arr.size()));
  Index i = 0;
  for (const auto& x : arr) v[i++] = x.get<double>();
  return v;
}

json matrix_to_json(const MatrixXd& M) {
  json rows = json::array();
  for (Index i = 0; i < M.rows(); ++i) rows.push_back(vector_to_json(M.row(i)));
  return rows;
}

std::string format_double(double x) {
  std::ostringstream os;
  os.precision(17);
  os << x;
  return os.str();
}

}  // namespace

MatrixXd read_csv_matrix(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ValidationError("non-numeric cell in " + path.string() + ": " + cell);
      }
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw ValidationError("ragged rows in " + path.string());
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ValidationError("empty matrix file " + path.string());
  MatrixXd M(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (Index i = 0; i < M.rows(); ++i)
    for (Index j = 0; j < M.cols(); ++j)
      M(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  return M;
}

void write_csv_matrix(const fs::path& path, const MatrixXd& M) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  out.precision(17);
  for (Index i = 0; i < M.rows(); ++i) {
    for (Index j = 0; j < M.cols(); ++j) {
      if (j) out << ',';
      out << M(i, j);
    }
    out << '\n';
  }
}

Cohort load_cohort(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.json";
  std::ifstream in(manifest_path);
  if (!in) throw ValidationError("missing manifest.json in " + dir.string());
  json manifest;
  try {
    in >> manifest;
  } catch (const json::exception& e) {
    throw ValidationError("bad manifest.json: " + std::string(e.what()));
  }
  if (!manifest.contains("subjects") || !manifest["subjects"].is_array())
    throw ValidationError("manifest.json must list \"subjects\"");

  Cohort cohort;
  for (const auto& entry : manifest["subjects"]) {
    const std::string name = entry.get<std::string>();
    const fs::path sdir = dir / name;
    SubjectDataset s;
    s.subject_id = name;
    s.X = read_csv_matrix(sdir / "X.csv");
    s.Y = read_csv_matrix(sdir / "Y.csv");
    const MatrixXd wrow = read_csv_matrix(sdir / "w.csv");
    if (wrow.rows() != 1)
      throw ValidationError("w.csv must be a single row for subject " + name);
    s.w = wrow.row(0).transpose();
    cohort.subjects.push_back(std::move(s));
  }
  cohort.validate();
  return cohort;
}

void save_cohort(const fs::path& dir, const Cohort& cohort) {
  fs::create_directories(dir);
  json manifest;
  manifest["subjects"] = json::array();
  for (const auto& s : cohort.subjects) {
    manifest["subjects"].push_back(s.subject_id);
    const fs::path sdir = dir / s.subject_id;
    fs::create_directories(sdir);
    write_csv_matrix(sdir / "X.csv", s.X);
    write_csv_matrix(sdir / "Y.csv", s.Y);
    write_csv_matrix(sdir / "w.csv", s.w.transpose());
  }
  std::ofstream out(dir / "manifest.json");
  out << manifest.dump(2) << '\n';
}

json to_json(const ComponentFit& fit) {
  json j;
  j["gamma"] = vector_to_json(fit.gamma);
  j["theta"] = vector_to_json(fit.theta);
  j["alpha"] = fit.alpha;
  j["beta"] = vector_to_json(fit.beta);
  j["objective"] = fit.objective;
  j["n_iter"] = fit.n_iter;
  j["converged"] = fit.converged;
  j["restart_index"] = fit.restart_index;
  return j;
}

ComponentFit component_fit_from_json(const json& j) {
  ComponentFit fit;
  fit.gamma = vector_from_json(j.at("gamma"));
  fit.theta = vector_from_json(j.at("theta"));
  fit.alpha = j.at("alpha").get<double>();
  fit.beta = vector_from_json(j.at("beta"));
  fit.objective = j.value("objective", 0.0);
  fit.n_iter = j.value("n_iter", 0);
  fit.converged = j.value("converged", false);
  fit.restart_index = j.value("restart_index", -1);
  return fit;
}

json to_json(const FitSequence& seq) {
  json j;
  j["components"] = json::array();
  for (const auto& c : seq.components) j["components"].push_back(to_json(c));
  j["dfd"] = json::array();
  for (const auto& [k, value] : seq.dfd_trace)
    j["dfd"].push_back({{"k", k}, {"value", value}});
  j["selected_k"] = seq.selected_k;
  j["threshold"] = seq.threshold;
  j["status"] = seq.status;
  return j;
}

FitSequence fit_sequence_from_json(const json& j) {
  FitSequence seq;
  for (const auto& c : j.at("components"))
    seq.components.push_back(component_fit_from_json(c));
  if (j.contains("dfd"))
    for (const auto& d : j["dfd"])
      seq.dfd_trace.emplace_back(d.at("k").get<int>(), d.at("value").get<double>());
  seq.selected_k = j.value("selected_k", 0);
  seq.threshold = j.value("threshold", 2.0);
  seq.status = j.value("status", "ok");
  return seq;
}

json to_json(const BootstrapResult& result) {
  json j;
  j["B"] = result.B;
  j["level"] = result.level;
  j["n_failed"] = result.n_failed;
  j["lower"] = vector_to_json(result.lower);
  j["upper"] = vector_to_json(result.upper);
  return j;
}

json to_json(const AsymptoticCovariance& cov) {
  json j;
  j["G_x"] = cov.G_x;
  j["Q_w"] = matrix_to_json(cov.Q_w);
  j["H_xw"] = vector_to_json(cov.H_xw);
  j["M_n"] = cov.M_n;
  j["cov"] = matrix_to_json(cov.cov);
  return j;
}

json to_json(const SimScenario& s) {
  json j;
  j["name"] = s.name;
  j["p"] = s.p;
  j["q"] = s.q;
  j["r"] = s.r;
  j["n"] = s.n;
  j["u"] = s.u;
  j["v"] = s.v;
  j["partial_common"] = s.partial_common;
  j["common_count_y"] = s.common_count_y;
  j["common_count_x"] = s.common_count_x;
  j["family"] = noise_family_name(s.family);
  j["mvt_df"] = s.mvt_df;
  j["gamma_shape"] = s.gamma_shape;
  j["log_mean_hi"] = s.log_mean_hi;
  j["log_mean_lo"] = s.log_mean_lo;
  j["log_sd"] = s.log_sd;
  j["planted_log_sd"] = s.planted_log_sd;
  j["seed"] = s.seed;
  j["planted"] = json::array();
  for (const auto& c : s.planted)
    j["planted"].push_back({{"y_index", c.y_index},
                            {"x_index", c.x_index},
                            {"alpha", c.alpha},
                            {"beta", vector_to_json(c.beta)}});
  return j;
}

SimScenario scenario_from_json(const json& j) {
  SimScenario s;
  static const std::vector<std::string> known = {
      "name", "p", "q", "r", "n", "u", "v",
      "partial_common", "common_count_y", "common_count_x",
      "family", "mvt_df", "gamma_shape",
      "log_mean_hi", "log_mean_lo", "log_sd", "planted_log_sd",
      "seed", "planted"};
  for (const auto& [key, value] : j.items())
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw ValidationError("unknown scenario key: " + key);
  s.name = j.value("name", s.name);
  s.p = j.value("p", s.p);
  s.q = j.value("q", s.q);
  s.r = j.value("r", s.r);
  s.n = j.value("n", s.n);
  s.u = j.value("u", s.u);
  s.v = j.value("v", s.v);
  s.partial_common = j.value("partial_common", s.partial_common);
  s.common_count_y = j.value("common_count_y", s.common_count_y);
  s.common_count_x = j.value("common_count_x", s.common_count_x);
  if (j.contains("family"))
    s.family = noise_family_from_name(j["family"].get<std::string>());
  s.mvt_df = j.value("mvt_df", s.mvt_df);
  s.gamma_shape = j.value("gamma_shape", s.gamma_shape);
  s.log_mean_hi = j.value("log_mean_hi", s.log_mean_hi);
  s.log_mean_lo = j.value("log_mean_lo", s.log_mean_lo);
  s.log_sd = j.value("log_sd", s.log_sd);
  s.planted_log_sd = j.value("planted_log_sd", s.planted_log_sd);
  s.seed = j.value("seed", s.seed);
  if (j.contains("planted")) {
    for (const auto& c : j["planted"]) {
      PlantedComponent pc;
      pc.y_index = c.at("y_index").get<int>();
      pc.x_index = c.at("x_index").get<int>();
      pc.alpha = c.at("alpha").get<double>();
      pc.beta = vector_from_json(c.at("beta"));
      s.planted.push_back(std::move(pc));
    }
  }
  s.validate();
  return s;
}

namespace {

json component_metrics_to_json(const ComponentMetrics& cm) {
  json j;
  j["name"] = cm.name;
  j["gamma_applicable"] = cm.gamma_applicable;
  j["gamma_sim_mean"] = cm.gamma_sim_mean;
  j["gamma_sim_se"] = cm.gamma_sim_se;
  j["theta_sim_mean"] = cm.theta_sim_mean;
  j["theta_sim_se"] = cm.theta_sim_se;
  j["n_scored"] = cm.n_scored;
  j["coefficients"] = json::array();
  for (const auto& c : cm.coefficients)
    j["coefficients"].push_back({{"name", c.name},
                                 {"truth", c.truth},
                                 {"bias", c.bias},
                                 {"se", c.se},
                                 {"mse", c.mse},
                                 {"coverage", c.coverage}});
  return j;
}

}  // namespace

json to_json(const MonteCarloReport& report) {
  json j;
  j["scenario"] = to_json(report.scenario);
  j["replicates"] = report.replicates;
  j["n_failed"] = report.n_failed;
  j["cocreg"] = json::array();
  for (const auto& cm : report.cocreg) j["cocreg"].push_back(component_metrics_to_json(cm));
  if (!report.baseline.empty()) {
    j["baseline"] = json::array();
    for (const auto& cm : report.baseline)
      j["baseline"].push_back(component_metrics_to_json(cm));
  }
  j["selected_k_counts"] = report.selected_k_counts;
  j["mean_selected_k"] = report.mean_selected_k;
  return j;
}

std::string metrics_csv(const MonteCarloReport& report) {
  std::ostringstream out;
  out << "method,component,gamma_sim,gamma_sim_se,theta_sim,theta_sim_se,"
         "coefficient,truth,bias,se,mse,coverage,n_scored\n";
  auto emit = [&](const std::string& method,
                  const std::vector<ComponentMetrics>& metrics) {
    for (const auto& cm : metrics) {
      for (const auto& c : cm.coefficients) {
        out << method << ',' << cm.name << ','
            << (cm.gamma_applicable ? format_double(cm.gamma_sim_mean) : "NA")
            << ','
            << (cm.gamma_applicable ? format_double(cm.gamma_sim_se) : "NA")
            << ',' << format_double(cm.theta_sim_mean) << ','
            << format_double(cm.theta_sim_se) << ',' << c.name << ','
            << format_double(c.truth) << ',' << format_double(c.bias) << ','
            << format_double(c.se) << ',' << format_double(c.mse) << ','
            << (c.coverage >= 0.0 ? format_double(c.coverage) : "NA") << ','
            << cm.n_scored << '\n';
      }
    }
  };
  emit("cocreg", report.cocreg);
  emit("cpca-reg", report.baseline);
  return out.str();
}

void write_draws_gz(const fs::path& path, const MatrixXd& draws) {
  std::ostringstream os;
  os.precision(17);
  for (Index i = 0; i < draws.rows(); ++i) {
    for (Index j = 0; j < draws.cols(); ++j) {
      if (j) os << ',';
      os << draws(i, j);
    }
    os << '\n';
  }
  const std::string text = os.str();
  gzFile gz = gzopen(path.string().c_str(), "wb");
  if (!gz) throw ComputeError("cannot open " + path.string() + " for writing");
  const int written =
      gzwrite(gz, text.data(), static_cast<unsigned>(text.size()));
  gzclose(gz);
  if (written <= 0 && !text.empty())
    throw ComputeError("gzip write failed for " + path.string());
}

}  // namespace cocreg
