#include "elwqr/appconfig.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace elwqr {

namespace {

using nlohmann::json;

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("config parse error in " + path + ": " + e.what());
  }
  if (!j.contains("schema_version") || j["schema_version"].get<int>() != 1)
    throw std::invalid_argument("config " + path + ": expected schema_version 1");
  return j;
}

std::vector<EstimatorKind> parse_estimators(const json& j) {
  std::vector<EstimatorKind> out;
  for (const auto& name : j) out.push_back(estimator_from_string(name.get<std::string>()));
  return out;
}

ColumnSpec parse_columns(const json& j) {
  ColumnSpec spec;
  spec.response = j.at("response").get<std::string>();
  for (const auto& c : j.value("always_observed", json::array()))
    spec.always_observed.push_back(c.get<std::string>());
  for (const auto& c : j.value("missing_covariates", json::array()))
    spec.missing_covariates.push_back(c.get<std::string>());
  for (const auto& t : j.value("transforms", json::array())) {
    ColumnTransform tr;
    tr.column = t.at("column").get<std::string>();
    tr.from = t.value("from", tr.column);
    for (const auto& o : t.at("ops")) {
      TransformOp op;
      const std::string kind = o.at("op").get<std::string>();
      if (kind == "log1p") {
        op.kind = TransformOp::Kind::log1p;
      } else if (kind == "affine") {
        op.kind = TransformOp::Kind::affine;
        op.shift = o.value("shift", 0.0);
        op.scale = o.value("scale", 1.0);
      } else if (kind == "square") {
        op.kind = TransformOp::Kind::square;
      } else {
        throw std::invalid_argument("unknown transform op: " + kind);
      }
      tr.ops.push_back(op);
    }
    spec.transforms.push_back(std::move(tr));
  }
  return spec;
}

} // namespace

std::uint64_t hash_config_text(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

SimulateConfig parse_simulate_config(const std::string& path) {
  const json j = load_json(path);
  SimulateConfig cfg;
  cfg.config_hash = hash_config_text(j.dump());

  if (j.contains("design")) {
    const json& d = j["design"];
    if (d.contains("psi")) {
      const auto& psi = d["psi"];
      if (psi.size() != 3)
        throw std::invalid_argument("simulate config: psi must be 3x3");
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
          cfg.design.psi(r, c) = psi.at(r).at(c).get<double>();
    }
    cfg.design.p_delta = d.value("p_delta", 0.5);
    const std::string form = d.value("sigma_sq_form", "as_printed");
    if (form == "as_printed")
      cfg.design.sigma_form = SigmaSqForm::as_printed;
    else if (form == "standard")
      cfg.design.sigma_form = SigmaSqForm::standard_conditional;
    else
      throw std::invalid_argument("simulate config: bad sigma_sq_form " + form);
  }
  for (const auto& n : j.at("n")) cfg.n_values.push_back(n.get<int>());
  for (const auto& t : j.at("tau")) cfg.tau_values.push_back(t.get<double>());
  cfg.reps = j.value("reps", 1000);
  cfg.estimators = j.contains("estimators")
                       ? parse_estimators(j["estimators"])
                       : std::vector<EstimatorKind>{EstimatorKind::cca,
                                                    EstimatorKind::ipw_mar,
                                                    EstimatorKind::elw};
  return cfg;
}

AnalyzeConfig parse_analyze_config(const std::string& path) {
  const json j = load_json(path);
  AnalyzeConfig cfg;
  cfg.columns = parse_columns(j.at("columns"));
  const json& r = j.at("run");
  for (const auto& t : r.at("tau_grid")) cfg.run.tau_grid.push_back(t.get<double>());
  cfg.run.estimators = r.contains("estimators")
                           ? parse_estimators(r["estimators"])
                           : std::vector<EstimatorKind>{EstimatorKind::cca,
                                                        EstimatorKind::elw};
  cfg.run.bootstrap_b = r.value("bootstrap_B", 200);
  cfg.run.seed = r.value("seed", std::uint64_t{1});
  cfg.run.output_dir = r.value("output_dir", std::string{});
  cfg.run.config_hash = hash_config_text(j.dump());
  return cfg;
}

ColumnSpec parse_column_spec_file(const std::string& path) {
  const json j = load_json(path);
  return parse_columns(j.at("columns"));
}

} // namespace elwqr
