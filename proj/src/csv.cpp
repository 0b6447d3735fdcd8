#include "elwqr/csv.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace elwqr {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

bool is_missing_token(const std::string& tok) { return tok.empty() || tok == "NA"; }

double parse_number(const std::string& tok, int line_no, const std::string& col) {
  try {
    size_t used = 0;
    double v = std::stod(tok, &used);
    if (used != tok.size()) throw std::invalid_argument("");
    if (!std::isfinite(v)) throw std::invalid_argument("");
    return v;
  } catch (...) {
    throw std::invalid_argument("load_csv: unparseable numeric field '" + tok +
                                "' in column " + col + " at line " +
                                std::to_string(line_no));
  }
}

double apply_ops(double v, const std::vector<TransformOp>& ops) {
  for (const TransformOp& op : ops) {
    switch (op.kind) {
      case TransformOp::Kind::log1p: v = std::log1p(v); break;
      case TransformOp::Kind::affine: v = (v + op.shift) * op.scale; break;
      case TransformOp::Kind::square: v = v * v; break;
    }
  }
  return v;
}

std::string format17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

} // namespace

std::vector<std::string> read_csv_header(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open file: " + path);
  std::string line;
  if (!std::getline(in, line))
    throw std::invalid_argument("load_csv: empty file: " + path);
  return split_line(line);
}

ColumnSpec default_spec_for_header(const std::vector<std::string>& header) {
  ColumnSpec spec;
  for (const std::string& name : header) {
    if (name == "y")
      spec.response = name;
    else if (!name.empty() && name[0] == 'z')
      spec.always_observed.push_back(name);
    else if (!name.empty() && name[0] == 'x')
      spec.missing_covariates.push_back(name);
  }
  if (spec.response.empty())
    throw std::invalid_argument(
        "no column spec given and the header has no 'y' column");
  return spec;
}

LoadReport load_csv(const std::string& path, const ColumnSpec& spec) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open file: " + path);

  std::string line;
  if (!std::getline(in, line))
    throw std::invalid_argument("load_csv: empty file: " + path);
  std::vector<std::string> header = split_line(line);
  std::map<std::string, int> index;
  for (size_t j = 0; j < header.size(); ++j)
    index[header[j]] = static_cast<int>(j);

  auto require_source = [&](const std::string& name) {
    if (!index.count(name))
      throw std::invalid_argument("load_csv: column '" + name +
                                  "' not found in header");
  };

  // Derived columns get virtual indices past the physical ones.
  std::map<std::string, const ColumnTransform*> pipeline_for;
  int next_virtual = static_cast<int>(header.size());
  for (const ColumnTransform& tr : spec.transforms) {
    const std::string src = tr.from.empty() ? tr.column : tr.from;
    require_source(src);
    pipeline_for[tr.column] = &tr;
    if (!index.count(tr.column)) index[tr.column] = next_virtual++;
  }
  require_source(spec.response);
  std::vector<std::string> all_used = spec.always_observed;
  all_used.insert(all_used.end(), spec.missing_covariates.begin(),
                  spec.missing_covariates.end());
  all_used.push_back(spec.response);
  for (const std::string& name : all_used) {
    if (index.count(name)) continue;
    throw std::invalid_argument("load_csv: column '" + name +
                                "' not found in header or transforms");
  }
  // Column sets must be disjoint.
  for (const std::string& zc : spec.always_observed)
    for (const std::string& xc : spec.missing_covariates)
      if (zc == xc || zc == spec.response || xc == spec.response)
        throw std::invalid_argument("load_csv: response/z/x column sets overlap");

  LoadReport report;
  report.data.dim_z = static_cast<int>(spec.always_observed.size());
  report.data.dim_x = static_cast<int>(spec.missing_covariates.size());
  report.data.y_name = spec.response;
  report.data.z_names = spec.always_observed;
  report.data.x_names = spec.missing_covariates;

  int line_no = 1;
  int n_missing = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::vector<std::string> tok = split_line(line);
    if (tok.size() < header.size())
      throw std::invalid_argument("load_csv: too few fields at line " +
                                  std::to_string(line_no));

    // Raw parse of the physical columns used anywhere.
    std::map<std::string, double> raw;
    std::map<std::string, bool> raw_missing;
    auto parse_physical = [&](const std::string& name) {
      if (raw.count(name) || raw_missing.count(name)) return;
      const std::string& t = tok[static_cast<size_t>(index[name])];
      if (is_missing_token(t)) {
        raw_missing[name] = true;
      } else {
        raw[name] = parse_number(t, line_no, name);
      }
    };
    parse_physical(spec.response);
    for (const std::string& c : spec.always_observed)
      if (index[c] < static_cast<int>(header.size())) parse_physical(c);
    for (const std::string& c : spec.missing_covariates)
      if (index[c] < static_cast<int>(header.size())) parse_physical(c);
    for (const auto& [target, tr] : pipeline_for)
      parse_physical(tr->from.empty() ? tr->column : tr->from);

    auto value_of = [&](const std::string& name, bool& missing) -> double {
      auto it = pipeline_for.find(name);
      if (it != pipeline_for.end()) {
        const ColumnTransform& tr = *it->second;
        const std::string src = tr.from.empty() ? tr.column : tr.from;
        if (raw_missing.count(src)) { missing = true; return 0.0; }
        missing = false;
        return apply_ops(raw.at(src), tr.ops);
      }
      if (raw_missing.count(name)) { missing = true; return 0.0; }
      missing = false;
      return raw.at(name);
    };

    bool missing = false;
    Observation obs;
    obs.y = value_of(spec.response, missing);
    bool reject = missing;
    obs.z.resize(report.data.dim_z);
    for (int j = 0; j < report.data.dim_z && !reject; ++j) {
      obs.z[j] = value_of(spec.always_observed[static_cast<size_t>(j)], missing);
      reject = reject || missing;
    }
    if (reject) {
      ++report.rejected_rows;
      continue;
    }

    Eigen::VectorXd x(report.data.dim_x);
    bool any_x_missing = false;
    for (int j = 0; j < report.data.dim_x; ++j) {
      bool mj = false;
      x[j] = value_of(spec.missing_covariates[static_cast<size_t>(j)], mj);
      any_x_missing = any_x_missing || mj;
    }
    obs.delta = !any_x_missing;
    if (obs.delta) obs.x = x;
    else ++n_missing;
    report.data.rows.push_back(std::move(obs));
  }
  if (!report.data.rows.empty())
    report.missing_rate =
        static_cast<double>(n_missing) / static_cast<double>(report.data.n());
  report.data.validate();
  return report;
}

void save_csv(const Dataset& data, const std::string& path) {
  Dataset named = data;
  named.ensure_names();
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write file: " + path);
  out << named.y_name;
  for (const std::string& name : named.x_names) out << ',' << name;
  for (const std::string& name : named.z_names) out << ',' << name;
  out << '\n';
  for (const Observation& obs : data.rows) {
    out << format17(obs.y);
    for (int j = 0; j < data.dim_x; ++j) {
      if (obs.delta) out << ',' << format17(obs.x[j]);
      else out << ",NA";
    }
    for (int j = 0; j < data.dim_z; ++j) out << ',' << format17(obs.z[j]);
    out << '\n';
  }
}

} // namespace elwqr
