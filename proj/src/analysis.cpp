#include "elwqr/analysis.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "elwqr/errors.hpp"
#include "elwqr/inference.hpp"
#include "elwqr/rng.hpp"
#include "elwqr/version.hpp"

namespace elwqr {

namespace {

std::string format17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string provenance_line(const RunConfig& cfg) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "# elwqr %s seed=%llu config_hash=%016llx",
                ELWQR_VERSION,
                static_cast<unsigned long long>(cfg.seed),
                static_cast<unsigned long long>(cfg.config_hash));
  return buf;
}

} // namespace

void RunConfig::validate() const {
  if (tau_grid.empty())
    throw std::invalid_argument("RunConfig: tau grid is empty");
  double prev = 0.0;
  for (double t : tau_grid) {
    if (!(t > 0.0 && t < 1.0))
      throw std::invalid_argument("RunConfig: tau levels must lie in (0,1)");
    if (t <= prev)
      throw std::invalid_argument("RunConfig: tau grid must be strictly increasing");
    prev = t;
  }
  if (estimators.empty())
    throw std::invalid_argument("RunConfig: no estimators requested");
  if (bootstrap_b < 2)
    throw std::invalid_argument("RunConfig: bootstrap B must be >= 2");
}

AnalysisReport run_analysis(const Dataset& data, const RunConfig& config) {
  config.validate();
  data.validate();
  std::filesystem::create_directories(config.output_dir);

  const std::vector<std::string> comps = data.component_names();
  const int k = static_cast<int>(config.estimators.size());

  AnalysisReport report;
  std::string coef_rows, se_rows;
  for (size_t ti = 0; ti < config.tau_grid.size(); ++ti) {
    const double tau = config.tau_grid[ti];
    for (int e = 0; e < k; ++e) {
      const EstimatorKind kind = config.estimators[static_cast<size_t>(e)];
      const std::uint64_t task_seed =
          derive_seed(config.seed, ti * static_cast<size_t>(k) + static_cast<size_t>(e));
      try {
        FitResult fit = fit_estimator(data, QuantileLevel(tau), kind);
        BootstrapResult boot = bootstrap_se(data, QuantileLevel(tau), kind,
                                            config.bootstrap_b, task_seed,
                                            config.threads);
        for (size_t j = 0; j < comps.size(); ++j) {
          const std::string prefix = format17(tau) + "," + to_string(kind) + "," + comps[j] + ",";
          coef_rows += prefix + format17(fit.beta[static_cast<Eigen::Index>(j)]) + "\n";
          se_rows += prefix + format17(boot.se[static_cast<Eigen::Index>(j)]) + "\n";
        }
      } catch (const NumericalError& err) {
        report.failures.push_back({tau, kind, err.what()});
      }
    }
  }

  const std::string head = provenance_line(config);
  report.coefficients_path =
      (std::filesystem::path(config.output_dir) / "coefficients.csv").string();
  report.se_path = (std::filesystem::path(config.output_dir) / "se.csv").string();
  report.report_path =
      (std::filesystem::path(config.output_dir) / "run_report.json").string();

  {
    std::ofstream out(report.coefficients_path);
    out << head << "\ntau,estimator,component,value\n" << coef_rows;
  }
  {
    std::ofstream out(report.se_path);
    out << head << "\ntau,estimator,component,value\n" << se_rows;
  }
  {
    nlohmann::json j;
    j["version"] = ELWQR_VERSION;
    j["seed"] = config.seed;
    j["config_hash"] = config.config_hash;
    j["bootstrap_B"] = config.bootstrap_b;
    j["failures"] = nlohmann::json::array();
    for (const AnalysisFailure& f : report.failures)
      j["failures"].push_back({{"tau", f.tau},
                               {"estimator", to_string(f.estimator)},
                               {"message", f.message}});
    std::ofstream out(report.report_path);
    out << j.dump(2) << "\n";
  }
  return report;
}

} // namespace elwqr
