#include "elwqr/dataset.hpp"

#include <cmath>
#include <stdexcept>

namespace elwqr {

int Dataset::n_complete() const {
  int k = 0;
  for (const auto& row : rows) k += row.delta ? 1 : 0;
  return k;
}

void Dataset::validate() const {
  for (size_t i = 0; i < rows.size(); ++i) {
    const Observation& r = rows[i];
    if (!std::isfinite(r.y))
      throw std::invalid_argument("Dataset: non-finite y at row " + std::to_string(i));
    if (r.z.size() != dim_z || !r.z.allFinite())
      throw std::invalid_argument("Dataset: bad z at row " + std::to_string(i));
    if (r.delta && (r.x.size() != dim_x || !r.x.allFinite()))
      throw std::invalid_argument("Dataset: complete row lacks valid x at row " +
                                  std::to_string(i));
  }
}

DesignRow Dataset::design_row(int i) const {
  const Observation& r = rows[static_cast<size_t>(i)];
  if (!r.delta)
    throw std::invalid_argument("Dataset: design_row on incomplete row");
  DesignRow d;
  d.w.resize(p());
  d.w[0] = 1.0;
  d.w.segment(1, dim_x) = r.x;
  d.w.segment(1 + dim_x, dim_z) = r.z;
  d.y = r.y;
  return d;
}

Eigen::VectorXd Dataset::yz_basis(int i) const {
  const Observation& r = rows[static_cast<size_t>(i)];
  Eigen::VectorXd h(2 + dim_z);
  h[0] = 1.0;
  h[1] = r.y;
  h.segment(2, dim_z) = r.z;
  return h;
}

void Dataset::ensure_names() {
  if (y_name.empty()) y_name = "y";
  while (static_cast<int>(x_names.size()) < dim_x)
    x_names.push_back("x" + std::to_string(x_names.size() + 1));
  while (static_cast<int>(z_names.size()) < dim_z)
    z_names.push_back("z" + std::to_string(z_names.size() + 1));
}

std::vector<std::string> Dataset::component_names() const {
  std::vector<std::string> out;
  out.push_back("intercept");
  for (int j = 0; j < dim_x; ++j)
    out.push_back(j < static_cast<int>(x_names.size()) ? x_names[j]
                                                       : "x" + std::to_string(j + 1));
  for (int j = 0; j < dim_z; ++j)
    out.push_back(j < static_cast<int>(z_names.size()) ? z_names[j]
                                                       : "z" + std::to_string(j + 1));
  return out;
}

} // namespace elwqr
