#include "dpofield/field.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dpofield {

namespace {

std::vector<double> axis(double lo, double hi, int n, Spacing spacing) {
  std::vector<double> out(static_cast<std::size_t>(n));
  if (n == 1) {
    out[0] = lo;
    return out;
  }
  if (spacing == Spacing::Linear) {
    const double step = (hi - lo) / (n - 1);
    for (int i = 0; i < n; ++i) out[i] = lo + step * i;
  } else {
    const double a = std::log(lo);
    const double step = (std::log(hi) - a) / (n - 1);
    for (int i = 0; i < n; ++i) out[i] = std::exp(a + step * i);
    out.front() = lo;
  }
  out.back() = hi;
  return out;
}

void check_axis(double lo, double hi, int n, const char* name, bool allow_single) {
  if (!std::isfinite(lo) || !std::isfinite(hi) || lo < kDomainFloor) {
    throw DomainError(std::string(name) + " range must be finite with min >= " +
                      std::to_string(kDomainFloor));
  }
  if (allow_single && n == 1) {
    if (hi < lo) throw DomainError(std::string(name) + " range needs max >= min");
    return;
  }
  if (!(hi > lo)) throw DomainError(std::string(name) + " range needs max > min");
  if (n < 2) throw DomainError(std::string(name) + " axis needs at least 2 samples");
}

}  // namespace

Spacing parse_spacing(const std::string& name) {
  if (name == "linear") return Spacing::Linear;
  if (name == "log" || name == "logarithmic") return Spacing::Logarithmic;
  throw std::invalid_argument("unknown spacing '" + name + "' (expected linear or log)");
}

std::string to_string(Spacing s) { return s == Spacing::Linear ? "linear" : "log"; }

GridSpec GridSpec::square(double lo, double hi, int n, Spacing spacing) {
  return GridSpec{lo, hi, lo, hi, n, n, spacing};
}

void GridSpec::validate(bool allow_single_node) const {
  check_axis(x1_min, x1_max, n1, "x1", allow_single_node);
  check_axis(x2_min, x2_max, n2, "x2", allow_single_node);
}

std::vector<double> GridSpec::x1_nodes() const { return axis(x1_min, x1_max, n1, spacing); }
std::vector<double> GridSpec::x2_nodes() const { return axis(x2_min, x2_max, n2, spacing); }

RatioPoint GridSpec::node(int i, int j) const { return {x1_nodes().at(i), x2_nodes().at(j)}; }

std::string to_string(Region r) {
  switch (r) {
    case Region::TopLeft:
      return "TopLeft";
    case Region::TopRight:
      return "TopRight";
    case Region::BottomLowX2:
      return "BottomLowX2";
    case Region::Interior:
      return "Interior";
  }
  return "?";
}

RegionThresholds RegionThresholds::for_grid(const GridSpec& grid) {
  const double lo = std::min(grid.x1_min, grid.x2_min);
  const double hi = std::max(grid.x1_max, grid.x2_max);
  return {lo + 0.25 * (hi - lo), lo + 0.75 * (hi - lo)};
}

Region classify_region(const RatioPoint& p, const RegionThresholds& t) {
  if (!(t.low < t.high)) throw std::invalid_argument("region thresholds need low < high");
  if (p.x1 <= t.low && p.x2 >= t.high) return Region::TopLeft;
  if (p.x1 >= t.high && p.x2 >= t.high) return Region::TopRight;
  if (p.x2 <= t.low && p.x1 > t.low) return Region::BottomLowX2;
  return Region::Interior;
}

std::vector<LandscapeSample> sample_landscape(const GridSpec& grid, const LossParams& params) {
  grid.validate();
  validate(params);
  const auto xs = grid.x1_nodes();
  const auto ys = grid.x2_nodes();
  std::vector<LandscapeSample> out;
  out.reserve(grid.size());
  for (double y : ys) {
    for (double x : xs) {
      const RatioPoint p{x, y};
      out.push_back({p, dpo_loss(p, params)});
    }
  }
  return out;
}

FieldSample sample_point(const RatioPoint& p, const LossParams& params,
                         const RegionThresholds& thresholds) {
  FieldSample s;
  s.point = p;
  s.loss = dpo_loss(p, params);
  s.grad = dpo_gradient(p, params);
  s.grad_norm = s.grad.norm();
  if (s.grad_norm > 0.0) s.unit_dir = {-s.grad.d_x1 / s.grad_norm, -s.grad.d_x2 / s.grad_norm};
  s.ratio = update_rate(p);
  s.region = classify_region(p, thresholds);
  return s;
}

std::vector<FieldSample> sample_field(const GridSpec& grid, const LossParams& params,
                                      const RegionThresholds& thresholds) {
  grid.validate();
  validate(params);
  const auto xs = grid.x1_nodes();
  const auto ys = grid.x2_nodes();
  std::vector<FieldSample> out;
  out.reserve(grid.size());
  for (double y : ys) {
    for (double x : xs) out.push_back(sample_point({x, y}, params, thresholds));
  }
  return out;
}

std::vector<FieldSample> sample_field(const GridSpec& grid, const LossParams& params) {
  return sample_field(grid, params, RegionThresholds::for_grid(grid));
}

Table landscape_table(const std::vector<LandscapeSample>& samples) {
  Table t;
  t.header = {"x1", "x2", "loss"};
  t.rows.reserve(samples.size());
  for (const auto& s : samples) t.rows.push_back({s.point.x1, s.point.x2, s.loss});
  return t;
}

Table field_table(const std::vector<FieldSample>& samples) {
  Table t;
  t.header = {"x1",        "x2",     "loss",   "g_x1",  "g_x2",
              "grad_norm", "dir_x1", "dir_x2", "ratio", "region"};
  t.rows.reserve(samples.size());
  for (const auto& s : samples) {
    t.rows.push_back({s.point.x1, s.point.x2, s.loss, s.grad.d_x1, s.grad.d_x2, s.grad_norm,
                      s.unit_dir.first, s.unit_dir.second, s.ratio, to_string(s.region)});
  }
  return t;
}

}  // namespace dpofield
