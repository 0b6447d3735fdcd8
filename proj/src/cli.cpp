#include "elwqr/cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "elwqr/analysis.hpp"
#include "elwqr/appconfig.hpp"
#include "elwqr/csv.hpp"
#include "elwqr/errors.hpp"
#include "elwqr/fixture.hpp"
#include "elwqr/inference.hpp"
#include "elwqr/rng.hpp"
#include "elwqr/simgen.hpp"
#include "elwqr/version.hpp"

namespace elwqr {

namespace {

using nlohmann::json;

std::string format17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

json vec_to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

json mat_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

json fit_to_json(const FitResult& fit) {
  json j;
  j["estimator"] = to_string(fit.estimator);
  j["tau"] = fit.tau;
  j["beta"] = vec_to_json(fit.beta);
  j["qr"] = {{"objective", fit.qr.objective},
             {"iterations", fit.qr.iterations},
             {"status", to_string(fit.qr.status)}};
  if (fit.gamma_fit) {
    j["gamma"] = {{"gamma", vec_to_json(fit.gamma_fit->gamma)},
                  {"loglik", fit.gamma_fit->loglik},
                  {"score_norm", fit.gamma_fit->score_norm},
                  {"iterations", fit.gamma_fit->iterations},
                  {"status", to_string(fit.gamma_fit->status)},
                  {"min_pi", fit.gamma_fit->min_pi}};
  }
  if (fit.el) {
    j["el"] = {{"lambda", vec_to_json(fit.el->lambda)},
               {"constraint_residual", fit.el->constraint_residual},
               {"min_denominator", fit.el->min_denominator},
               {"iterations", fit.el->iterations},
               {"status", to_string(fit.el->status)},
               {"weights", vec_to_json(fit.el->weights)}};
  }
  return j;
}

Dataset load_dataset(const std::string& path, const std::string& config_path) {
  ColumnSpec spec = config_path.empty()
                        ? default_spec_for_header(read_csv_header(path))
                        : parse_column_spec_file(config_path);
  return load_csv(path, spec).data;
}

std::string default_out_dir() {
  const char* env = std::getenv("ELWQR_OUT");
  return env && *env ? env : ".";
}

struct CliOptions {
  std::string data_path;
  std::string config_path;
  std::string out = default_out_dir();
  double tau = 0.5;
  std::string estimator = "elw";
  int bootstrap_b = 200;
  std::uint64_t seed = 1;
  int threads = 0;
  int fixture_n = 7104;
  double fixture_rate = 0.5329;
};

void write_simulation_csv(const SimulateConfig& cfg, std::uint64_t seed,
                          int threads, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  const std::string path =
      (std::filesystem::path(out_dir) / "simulation.csv").string();
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write " + path);
  char head[128];
  std::snprintf(head, sizeof(head), "# elwqr %s seed=%llu config_hash=%016llx",
                ELWQR_VERSION, static_cast<unsigned long long>(seed),
                static_cast<unsigned long long>(cfg.config_hash));
  out << head << "\n";
  out << "tau,n,estimator,beta0_bias,beta0_rmse,beta1_bias,beta1_rmse,"
         "beta2_bias,beta2_rmse,failures,reps_used,status\n";
  std::uint64_t cell = 0;
  for (double tau : cfg.tau_values) {
    for (int n : cfg.n_values) {
      MonteCarloResult mc =
          monte_carlo(cfg.design, n, QuantileLevel(tau), cfg.reps,
                      cfg.estimators, derive_seed(seed, cell++), threads);
      for (const McEstimatorSummary& s : mc.estimators) {
        out << format17(tau) << ',' << n << ',' << to_string(s.kind);
        for (int j = 0; j < 3; ++j)
          out << ',' << format17(s.bias[j]) << ',' << format17(s.rmse[j]);
        out << ',' << s.failures << ',' << s.reps_used << ','
            << (s.ok ? "ok" : "error") << "\n";
      }
    }
  }
  std::cout << "wrote " << path << "\n";
}

int dispatch(const CLI::App& app, const CliOptions& opt) {
  if (app.got_subcommand("simulate")) {
    SimulateConfig cfg = parse_simulate_config(opt.config_path);
    write_simulation_csv(cfg, opt.seed, opt.threads, opt.out);
    return 0;
  }
  if (app.got_subcommand("fit")) {
    Dataset data = load_dataset(opt.data_path, opt.config_path);
    FitResult fit = fit_estimator(data, QuantileLevel(opt.tau),
                                  estimator_from_string(opt.estimator));
    std::cout << fit_to_json(fit).dump(2) << "\n";
    return 0;
  }
  if (app.got_subcommand("bootstrap")) {
    Dataset data = load_dataset(opt.data_path, opt.config_path);
    const EstimatorKind kind = estimator_from_string(opt.estimator);
    FitResult fit = fit_estimator(data, QuantileLevel(opt.tau), kind);
    BootstrapResult boot = bootstrap_se(data, QuantileLevel(opt.tau), kind,
                                        opt.bootstrap_b, opt.seed, opt.threads);
    json j = fit_to_json(fit);
    j["bootstrap"] = {{"B", boot.b},
                      {"seed", boot.seed},
                      {"failures", boot.failures},
                      {"se", vec_to_json(boot.se)},
                      {"cov", mat_to_json(boot.cov)}};
    std::cout << j.dump(2) << "\n";
    return 0;
  }
  if (app.got_subcommand("analyze")) {
    AnalyzeConfig cfg = parse_analyze_config(opt.config_path);
    LoadReport loaded = load_csv(opt.data_path, cfg.columns);
    if (cfg.run.output_dir.empty()) cfg.run.output_dir = opt.out;
    if (app.count("--seed") > 0) cfg.run.seed = opt.seed;
    cfg.run.threads = opt.threads;
    AnalysisReport report = run_analysis(loaded.data, cfg.run);
    std::cout << "wrote " << report.coefficients_path << "\n"
              << "wrote " << report.se_path << "\n"
              << "wrote " << report.report_path << "\n";
    if (!report.failures.empty())
      std::cerr << report.failures.size() << " estimator/tau cells failed; see "
                << report.report_path << "\n";
    return 0;
  }
  if (app.got_subcommand("check")) {
    Dataset data = load_dataset(opt.data_path, opt.config_path);
    FitResult fit = fit_estimator(data, QuantileLevel(opt.tau), EstimatorKind::elw);
    CovComponents cov = plugin_components(data, *fit.theta, QuantileLevel(opt.tau));
    const double residual = block_identity_check(cov);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov.sigma_cca - cov.sigma_elw);
    json j;
    j["tau"] = opt.tau;
    j["block_identity_residual"] = residual;
    j["el"] = {{"constraint_residual", fit.el->constraint_residual},
               {"min_denominator", fit.el->min_denominator},
               {"iterations", fit.el->iterations},
               {"status", to_string(fit.el->status)}};
    j["min_pi"] = fit.gamma_fit->min_pi;
    j["bandwidth"] = cov.bandwidth;
    j["efficiency_gap_min_eigenvalue"] = es.eigenvalues().minCoeff();
    j["sigma_cca"] = mat_to_json(cov.sigma_cca);
    j["sigma_elw"] = mat_to_json(cov.sigma_elw);
    std::cout << j.dump(2) << "\n";
    return 0;
  }
  if (app.got_subcommand("fixture")) {
    FixtureOptions fx;
    fx.n = opt.fixture_n;
    fx.missing_rate = opt.fixture_rate;
    fx.seed = opt.seed;
    std::filesystem::path path(opt.out);
    if (path.extension() != ".csv") {
      std::filesystem::create_directories(path);
      path /= "fixture.csv";
    }
    write_bp_fixture(path.string(), fx);
    std::cout << "wrote " << path.string() << "\n";
    return 0;
  }
  return 1;
}

} // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Empirical-likelihood-weighted quantile regression with "
               "nonignorable missing covariates"};
  app.set_version_flag("--version", ELWQR_VERSION);
  app.require_subcommand(1);

  CliOptions opt;
  app.add_option("--seed", opt.seed, "master RNG seed");
  app.add_option("--tau", opt.tau, "quantile level in (0,1)");
  app.add_option("--out", opt.out, "output directory (or file for fixture)");
  app.add_option("--config", opt.config_path, "JSON config file");
  app.add_option("--threads", opt.threads, "worker threads (0 = all cores)");

  auto* sim = app.add_subcommand("simulate", "Monte Carlo bias/RMSE table from a design config");
  sim->callback([&] {
    if (opt.config_path.empty())
      throw CLI::ValidationError("simulate requires --config");
  });

  auto* fit = app.add_subcommand("fit", "fit one estimator on a CSV dataset, print JSON");
  fit->add_option("data", opt.data_path, "CSV data file")->required();
  fit->add_option("--estimator", opt.estimator, "cca | ipw_mar | elw");

  auto* boot = app.add_subcommand("bootstrap", "bootstrap standard errors, print JSON");
  boot->add_option("data", opt.data_path, "CSV data file")->required();
  boot->add_option("--estimator", opt.estimator, "cca | ipw_mar | elw");
  boot->add_option("--B", opt.bootstrap_b, "bootstrap replicates");

  auto* ana = app.add_subcommand("analyze", "tau-grid fits with bootstrap SEs to CSV");
  ana->add_option("data", opt.data_path, "CSV data file")->required();
  ana->callback([&] {
    if (opt.config_path.empty())
      throw CLI::ValidationError("analyze requires --config");
  });

  auto* chk = app.add_subcommand("check", "EL diagnostics and covariance identity check");
  chk->add_option("data", opt.data_path, "CSV data file")->required();

  auto* fx = app.add_subcommand("fixture", "write a synthetic analysis fixture CSV");
  fx->add_option("--n", opt.fixture_n, "rows");
  fx->add_option("--rate", opt.fixture_rate, "target missing rate");

  // global flags remain valid after the subcommand name
  for (CLI::App* sub : {sim, fit, boot, ana, chk, fx}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help() << "\n";
    return 1;
  }

  try {
    return dispatch(app, opt);
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

} // namespace elwqr
