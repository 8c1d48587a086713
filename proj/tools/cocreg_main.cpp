#include <cocreg/cocreg.h>

#include <CLI11.hpp>
#include <json.hpp>
#include <zlib.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CohortHandle {
  cocreg_cohort* ptr = nullptr;
  ~CohortHandle() { cocreg_cohort_free(ptr); }
};

struct ResultString {
  char* ptr = nullptr;
  ~ResultString() { cocreg_free_string(ptr); }
  std::string str() const { return ptr ? std::string(ptr) : std::string(); }
};

int report_error(cocreg_status status) {
  std::cerr << "cocreg: " << cocreg_last_error() << '\n';
  return static_cast<int>(status);
}

std::optional<std::uint64_t> env_seed() {
  const char* s = std::getenv("COCREG_SEED");
  if (!s || !*s) return std::nullopt;
  try {
    return std::stoull(s);
  } catch (const std::exception&) {
    throw CLI::ValidationError("COCREG_SEED", "must be a non-negative integer");
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::string format_double(double x) {
  std::ostringstream os;
  os.precision(17);
  os << x;
  return os.str();
}

// loadings.csv rows: component,kind,v0,v1,...  (gamma then theta per k)
std::string loadings_csv(const json& fit_result) {
  std::ostringstream out;
  int k = 1;
  for (const auto& comp : fit_result.at("components")) {
    for (const char* kind : {"gamma", "theta"}) {
      out << k << ',' << kind;
      for (const auto& x : comp.at(kind)) out << ',' << format_double(x.get<double>());
      out << '\n';
    }
    ++k;
  }
  return out.str();
}

std::string coefficients_csv(const json& fit_result) {
  std::ostringstream out;
  out << "component,alpha";
  if (!fit_result.at("components").empty()) {
    const auto& beta0 = fit_result["components"][0].at("beta");
    for (std::size_t c = 0; c < beta0.size(); ++c) out << ",beta" << c;
  }
  out << '\n';
  int k = 1;
  for (const auto& comp : fit_result.at("components")) {
    out << k << ',' << format_double(comp.at("alpha").get<double>());
    for (const auto& b : comp.at("beta")) out << ',' << format_double(b.get<double>());
    out << '\n';
    ++k;
  }
  return out.str();
}

std::string metrics_csv_from_report(const json& report) {
  std::ostringstream out;
  out << "method,component,gamma_sim,gamma_sim_se,theta_sim,theta_sim_se,"
         "coefficient,truth,bias,se,mse,coverage,n_scored\n";
  auto emit = [&](const std::string& method, const json& metrics) {
    for (const auto& cm : metrics) {
      const bool g_ok = cm.at("gamma_applicable").get<bool>();
      for (const auto& c : cm.at("coefficients")) {
        const double coverage = c.at("coverage").get<double>();
        out << method << ',' << cm.at("name").get<std::string>() << ','
            << (g_ok ? format_double(cm.at("gamma_sim_mean").get<double>()) : "NA")
            << ','
            << (g_ok ? format_double(cm.at("gamma_sim_se").get<double>()) : "NA")
            << ',' << format_double(cm.at("theta_sim_mean").get<double>()) << ','
            << format_double(cm.at("theta_sim_se").get<double>()) << ','
            << c.at("name").get<std::string>() << ','
            << format_double(c.at("truth").get<double>()) << ','
            << format_double(c.at("bias").get<double>()) << ','
            << format_double(c.at("se").get<double>()) << ','
            << format_double(c.at("mse").get<double>()) << ','
            << (coverage >= 0.0 ? format_double(coverage) : "NA") << ','
            << cm.at("n_scored").get<int>() << '\n';
      }
    }
  };
  emit("cocreg", report.at("cocreg"));
  if (report.contains("baseline")) emit("cpca-reg", report["baseline"]);
  return out.str();
}

void write_gz(const fs::path& path, const std::string& text) {
  gzFile gz = gzopen(path.string().c_str(), "wb");
  if (!gz) throw std::runtime_error("cannot write " + path.string());
  const int written = gzwrite(gz, text.data(), static_cast<unsigned>(text.size()));
  gzclose(gz);
  if (written <= 0 && !text.empty())
    throw std::runtime_error("gzip write failed for " + path.string());
}

struct FitOptions {
  std::string data_dir;
  std::string out_dir = ".";
  int max_k = 1;
  double rho = 2.0;
  std::uint64_t seed = 0;
  double tol = 1e-8;
  int max_iter = 500;
  int n_restarts = 20;
  std::string constraint = "identity";
  int threads = 1;
};

json fit_config_json(const FitOptions& opt) {
  json cfg;
  cfg["max_k"] = opt.max_k;
  cfg["threshold"] = opt.rho;
  cfg["seed"] = env_seed().value_or(opt.seed);
  cfg["tol"] = opt.tol;
  cfg["max_iter"] = opt.max_iter;
  cfg["n_restarts"] = opt.n_restarts;
  cfg["constraint"] = opt.constraint;
  cfg["threads"] = opt.threads;
  return cfg;
}

int cmd_fit(const FitOptions& opt) {
  CohortHandle cohort;
  if (auto s = cocreg_cohort_load(opt.data_dir.c_str(), &cohort.ptr))
    return report_error(s);
  ResultString result;
  const std::string cfg = fit_config_json(opt).dump();
  if (auto s = cocreg_fit(cohort.ptr, cfg.c_str(), &result.ptr))
    return report_error(s);
  const json fit = json::parse(result.str());
  fs::create_directories(opt.out_dir);
  write_text(fs::path(opt.out_dir) / "fit.json", fit.dump(2) + "\n");
  write_text(fs::path(opt.out_dir) / "loadings.csv", loadings_csv(fit));
  write_text(fs::path(opt.out_dir) / "coefficients.csv", coefficients_csv(fit));
  std::cout << "selected_k=" << fit.at("selected_k").get<int>() << '\n';
  return 0;
}

struct BootstrapOptions {
  std::string data_dir;
  std::string fit_file;
  std::string out_dir = ".";
  int component = 1;  // 1-based index into fit.json components
  int B = 500;
  double level = 0.95;
  std::uint64_t seed = 0;
  bool draws = false;
};

int cmd_bootstrap(const BootstrapOptions& opt) {
  json fit;
  {
    std::ifstream in(opt.fit_file);
    if (!in) {
      std::cerr << "cocreg: cannot open " << opt.fit_file << '\n';
      return 2;
    }
    try {
      in >> fit;
    } catch (const json::exception& e) {
      std::cerr << "cocreg: bad fit file: " << e.what() << '\n';
      return 2;
    }
  }
  const auto& components = fit.at("components");
  if (opt.component < 1 ||
      opt.component > static_cast<int>(components.size())) {
    std::cerr << "cocreg: component index out of range\n";
    return 2;
  }
  CohortHandle cohort;
  if (auto s = cocreg_cohort_load(opt.data_dir.c_str(), &cohort.ptr))
    return report_error(s);
  json cfg;
  cfg["fit"] = components[static_cast<std::size_t>(opt.component - 1)];
  cfg["B"] = opt.B;
  cfg["level"] = opt.level;
  cfg["seed"] = env_seed().value_or(opt.seed);
  cfg["include_draws"] = opt.draws;
  ResultString result;
  const std::string cfg_str = cfg.dump();
  if (auto s = cocreg_bootstrap(cohort.ptr, cfg_str.c_str(), &result.ptr))
    return report_error(s);
  json out = json::parse(result.str());
  fs::create_directories(opt.out_dir);
  if (opt.draws && out.contains("draws")) {
    std::ostringstream csv;
    for (const auto& row : out["draws"]) {
      bool first = true;
      for (const auto& x : row) {
        if (!first) csv << ',';
        csv << format_double(x.get<double>());
        first = false;
      }
      csv << '\n';
    }
    write_gz(fs::path(opt.out_dir) / "draws.csv.gz", csv.str());
    out.erase("draws");
  }
  out["component"] = opt.component;
  write_text(fs::path(opt.out_dir) / "ci.json", out.dump(2) + "\n");
  return 0;
}

struct SimulateOptions {
  std::string preset;
  std::string scenario_file;
  std::string out_dir = ".";
  int replicates = 100;
  std::uint64_t seed = 0;
  std::string baseline;  // "cpca-reg" enables the baseline
  bool bootstrap = false;
  int bootstrap_B = 200;
  double bootstrap_level = 0.95;
  int max_k = 0;
  double rho = 2.0;
  int n_restarts = 20;
  int threads = 1;
  std::vector<std::string> grid;  // "key=v1,v2,..."
  std::vector<std::string> overrides;  // "key=value"
};

json parse_override_value(const std::string& value) {
  try {
    return json::parse(value);
  } catch (const json::exception&) {
    return json(value);  // bare strings, e.g. family names
  }
}

int cmd_simulate(const SimulateOptions& opt) {
  json scenario;
  if (!opt.scenario_file.empty()) {
    std::ifstream in(opt.scenario_file);
    if (!in) {
      std::cerr << "cocreg: cannot open " << opt.scenario_file << '\n';
      return 2;
    }
    try {
      in >> scenario;
    } catch (const json::exception& e) {
      std::cerr << "cocreg: bad scenario file: " << e.what() << '\n';
      return 2;
    }
  } else if (!opt.preset.empty()) {
    scenario = opt.preset;
  } else {
    std::cerr << "cocreg: need --preset or --scenario\n";
    return 2;
  }

  json overrides = json::object();
  for (const auto& kv : opt.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      std::cerr << "cocreg: bad --set (expected key=value): " << kv << '\n';
      return 2;
    }
    overrides[kv.substr(0, eq)] = parse_override_value(kv.substr(eq + 1));
  }

  // Grid points: cross product over every --grid key=v1,v2,... flag; the
  // pseudo-key "nuv" sets n, u, and v together.
  std::vector<json> points{json::object()};
  for (const auto& spec : opt.grid) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos) {
      std::cerr << "cocreg: bad --grid (expected key=v1,v2,...): " << spec << '\n';
      return 2;
    }
    const std::string key = spec.substr(0, eq);
    std::vector<json> values;
    std::stringstream ss(spec.substr(eq + 1));
    std::string item;
    while (std::getline(ss, item, ','))
      values.push_back(parse_override_value(item));
    if (values.empty()) {
      std::cerr << "cocreg: empty --grid value list: " << spec << '\n';
      return 2;
    }
    std::vector<json> next;
    for (const auto& point : points)
      for (const auto& v : values) {
        json merged = point;
        if (key == "nuv") {
          merged["n"] = v;
          merged["u"] = v;
          merged["v"] = v;
        } else {
          merged[key] = v;
        }
        next.push_back(std::move(merged));
      }
    points = std::move(next);
  }

  fs::create_directories(opt.out_dir);
  const bool single = points.size() == 1;
  for (std::size_t g = 0; g < points.size(); ++g) {
    json cfg;
    cfg["scenario"] = scenario;
    json merged_overrides = overrides;
    merged_overrides.update(points[g]);
    if (!merged_overrides.empty()) cfg["overrides"] = merged_overrides;
    cfg["replicates"] = opt.replicates;
    cfg["seed"] = env_seed().value_or(opt.seed);
    if (opt.baseline == "cpca-reg") cfg["baseline"] = true;
    else if (!opt.baseline.empty()) {
      std::cerr << "cocreg: unknown baseline: " << opt.baseline << '\n';
      return 2;
    }
    cfg["bootstrap"] = opt.bootstrap;
    cfg["bootstrap_B"] = opt.bootstrap_B;
    cfg["bootstrap_level"] = opt.bootstrap_level;
    cfg["max_k"] = opt.max_k;
    cfg["dfd_threshold"] = opt.rho;
    json solver;
    solver["n_restarts"] = opt.n_restarts;
    solver["threads"] = opt.threads;
    cfg["solver"] = solver;

    ResultString result;
    const std::string cfg_str = cfg.dump();
    if (auto s = cocreg_simulate(cfg_str.c_str(), &result.ptr))
      return report_error(s);
    const json report = json::parse(result.str());

    std::string stem = "metrics";
    if (!single) {
      for (const auto& [key, value] : points[g].items())
        stem += "_" + key + value.dump();
    }
    write_text(fs::path(opt.out_dir) / (stem + ".json"), report.dump(2) + "\n");
    write_text(fs::path(opt.out_dir) / (stem + ".csv"),
               metrics_csv_from_report(report));
    std::cout << stem << ": replicates=" << report.at("replicates").get<int>()
              << " failed=" << report.at("n_failed").get<int>() << '\n';
  }
  return 0;
}

struct DfdOptions {
  std::string data_dir;
  std::string loadings_file;
  std::string out_dir = ".";
};

int cmd_dfd(const DfdOptions& opt) {
  std::ifstream in(opt.loadings_file);
  if (!in) {
    std::cerr << "cocreg: cannot open " << opt.loadings_file << '\n';
    return 2;
  }
  json gamma = json::array(), theta = json::array();
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');  // component index, unused here
    std::string kind;
    std::getline(ss, kind, ',');
    json vec = json::array();
    while (std::getline(ss, cell, ',')) {
      try {
        vec.push_back(std::stod(cell));
      } catch (const std::exception&) {
        std::cerr << "cocreg: non-numeric loading value: " << cell << '\n';
        return 2;
      }
    }
    if (kind == "gamma") gamma.push_back(std::move(vec));
    else if (kind == "theta") theta.push_back(std::move(vec));
    else {
      std::cerr << "cocreg: unknown loading kind: " << kind << '\n';
      return 2;
    }
  }
  CohortHandle cohort;
  if (auto s = cocreg_cohort_load(opt.data_dir.c_str(), &cohort.ptr))
    return report_error(s);
  json cfg;
  cfg["gamma"] = std::move(gamma);
  cfg["theta"] = std::move(theta);
  ResultString result;
  const std::string cfg_str = cfg.dump();
  if (auto s = cocreg_dfd(cohort.ptr, cfg_str.c_str(), &result.ptr))
    return report_error(s);
  fs::create_directories(opt.out_dir);
  write_text(fs::path(opt.out_dir) / "dfd.json",
             json::parse(result.str()).dump(2) + "\n");
  std::cout << result.str() << '\n';
  return 0;
}

struct BaselineOptions {
  std::string data_dir;
  std::string out_dir = ".";
  double fraction = 0.85;
};

int cmd_baseline(const BaselineOptions& opt) {
  CohortHandle cohort;
  if (auto s = cocreg_cohort_load(opt.data_dir.c_str(), &cohort.ptr))
    return report_error(s);
  json cfg;
  cfg["variance_fraction"] = opt.fraction;
  ResultString result;
  const std::string cfg_str = cfg.dump();
  if (auto s = cocreg_cpca_reg(cohort.ptr, cfg_str.c_str(), &result.ptr))
    return report_error(s);
  fs::create_directories(opt.out_dir);
  write_text(fs::path(opt.out_dir) / "baseline.json",
             json::parse(result.str()).dump(2) + "\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Covariance-on-covariance regression toolkit"};
  app.set_version_flag("--version", std::string(cocreg_version()));
  app.require_subcommand(1);

  FitOptions fit_opt;
  auto* fit = app.add_subcommand("fit", "Fit components on a dataset directory");
  fit->add_option("--data", fit_opt.data_dir, "Dataset directory")->required();
  fit->add_option("--out", fit_opt.out_dir, "Output directory");
  fit->add_option("--max-k", fit_opt.max_k, "Components to extract")
      ->check(CLI::PositiveNumber);
  fit->add_option("--rho", fit_opt.rho, "DfD selection threshold");
  fit->add_option("--seed", fit_opt.seed, "Solver seed");
  fit->add_option("--tol", fit_opt.tol, "Convergence tolerance");
  fit->add_option("--max-iter", fit_opt.max_iter, "Iteration cap");
  fit->add_option("--restarts", fit_opt.n_restarts, "Random restarts");
  fit->add_option("--constraint", fit_opt.constraint, "identity or pooled")
      ->check(CLI::IsMember({"identity", "pooled"}));
  fit->add_option("--threads", fit_opt.threads, "Worker threads");

  BootstrapOptions bs_opt;
  auto* bs = app.add_subcommand("bootstrap", "Bootstrap coefficient intervals");
  bs->add_option("--data", bs_opt.data_dir, "Dataset directory")->required();
  bs->add_option("--fit", bs_opt.fit_file, "fit.json from a fit run")->required();
  bs->add_option("--component", bs_opt.component, "1-based component index");
  bs->add_option("--B", bs_opt.B, "Bootstrap replicates")->check(CLI::PositiveNumber);
  bs->add_option("--level", bs_opt.level, "Confidence level");
  bs->add_option("--seed", bs_opt.seed, "Resampling seed");
  bs->add_option("--out", bs_opt.out_dir, "Output directory");
  bs->add_flag("--draws", bs_opt.draws, "Also write draws.csv.gz");

  SimulateOptions sim_opt;
  auto* sim = app.add_subcommand("simulate", "Monte-Carlo simulation study");
  sim->add_option("--preset", sim_opt.preset,
                  "sim-i-small, sim-i-large, sim-ii, mvt, or matrix-gamma");
  sim->add_option("--scenario", sim_opt.scenario_file, "Scenario JSON file");
  sim->add_option("--replicates", sim_opt.replicates, "Monte-Carlo replicates")
      ->check(CLI::PositiveNumber);
  sim->add_option("--seed", sim_opt.seed, "Base seed");
  sim->add_option("--out", sim_opt.out_dir, "Output directory");
  sim->add_option("--baseline", sim_opt.baseline, "cpca-reg to add baseline rows");
  sim->add_flag("--bootstrap", sim_opt.bootstrap, "Bootstrap coverage per replicate");
  sim->add_option("--B", sim_opt.bootstrap_B, "Bootstrap replicates");
  sim->add_option("--level", sim_opt.bootstrap_level, "Bootstrap level");
  sim->add_option("--max-k", sim_opt.max_k, "Components to extract (0 = planted)");
  sim->add_option("--rho", sim_opt.rho, "DfD selection threshold");
  sim->add_option("--restarts", sim_opt.n_restarts, "Random restarts");
  sim->add_option("--threads", sim_opt.threads, "Worker threads");
  sim->add_option("--grid", sim_opt.grid,
                  "key=v1,v2,... scenario sweep (nuv sets n, u, v together)");
  sim->add_option("--set", sim_opt.overrides, "key=value scenario override");

  DfdOptions dfd_opt;
  auto* dfd = app.add_subcommand("dfd", "Evaluate DfD for a loadings file");
  dfd->add_option("--data", dfd_opt.data_dir, "Dataset directory")->required();
  dfd->add_option("--loadings", dfd_opt.loadings_file, "loadings.csv")->required();
  dfd->add_option("--out", dfd_opt.out_dir, "Output directory");

  BaselineOptions base_opt;
  auto* base = app.add_subcommand("baseline", "CPCA-Reg baseline fit");
  base->add_option("--data", base_opt.data_dir, "Dataset directory")->required();
  base->add_option("--out", base_opt.out_dir, "Output directory");
  base->add_option("--fraction", base_opt.fraction, "Variance fraction");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (fit->parsed()) return cmd_fit(fit_opt);
    if (bs->parsed()) return cmd_bootstrap(bs_opt);
    if (sim->parsed()) return cmd_simulate(sim_opt);
    if (dfd->parsed()) return cmd_dfd(dfd_opt);
    if (base->parsed()) return cmd_baseline(base_opt);
  } catch (const json::exception& e) {
    std::cerr << "cocreg: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "cocreg: " << e.what() << '\n';
    return 3;
  }
  return 2;
}
