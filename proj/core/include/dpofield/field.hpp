#pragma once

// Sampling of the loss landscape and gradient field over a rectangular grid in
// (x1, x2), with coarse region labels for the corners of the plane.

#include <string>
#include <utility>
#include <vector>

#include "dpofield/loss.hpp"
#include "dpofield/table.hpp"

namespace dpofield {

enum class Spacing { Linear, Logarithmic };

Spacing parse_spacing(const std::string& name);
std::string to_string(Spacing s);

struct GridSpec {
  double x1_min = 0.01;
  double x1_max = 2.0;
  double x2_min = 0.01;
  double x2_max = 2.0;
  int n1 = 50;
  int n2 = 50;
  Spacing spacing = Spacing::Linear;

  /// Same axis range and count on both axes.
  static GridSpec square(double lo, double hi, int n, Spacing spacing = Spacing::Linear);

  /// Throws DomainError. `allow_single_node` admits n = 1 on an axis (the node
  /// is then the axis minimum), which only sweeps accept.
  void validate(bool allow_single_node = false) const;
  std::vector<double> x1_nodes() const;
  std::vector<double> x2_nodes() const;
  std::size_t size() const { return static_cast<std::size_t>(n1) * static_cast<std::size_t>(n2); }

  /// Node (i, j) lives at index j * n1 + i: x2 is the outer (row) index and
  /// x1 the inner (column) index.
  RatioPoint node(int i, int j) const;
};

enum class Region { TopLeft, TopRight, BottomLowX2, Interior };

std::string to_string(Region r);

struct RegionThresholds {
  double low = 0.25;
  double high = 0.75;

  /// low/high at 25% / 75% of the span covered by both axes of `grid`.
  static RegionThresholds for_grid(const GridSpec& grid);
};

/// Priority order TopLeft, TopRight, BottomLowX2, Interior:
///   TopLeft      x1 <= low  and x2 >= high
///   TopRight     x1 >= high and x2 >= high
///   BottomLowX2  x2 <= low  and x1 >  low   (the bottom-left corner is Interior)
///   Interior     otherwise
/// Throws std::invalid_argument unless low < high.
Region classify_region(const RatioPoint& p, const RegionThresholds& thresholds);

struct LandscapeSample {
  RatioPoint point;
  double loss = 0.0;
};

struct FieldSample {
  RatioPoint point;
  double loss = 0.0;
  GradientVec grad;
  double grad_norm = 0.0;
  // Unit descent direction -grad / |grad|.
  std::pair<double, double> unit_dir{0.0, 0.0};
  double ratio = 0.0;
  Region region = Region::Interior;
};

/// One loss per node in row-major order (see GridSpec::node).
std::vector<LandscapeSample> sample_landscape(const GridSpec& grid, const LossParams& params);

FieldSample sample_point(const RatioPoint& p, const LossParams& params,
                         const RegionThresholds& thresholds);

std::vector<FieldSample> sample_field(const GridSpec& grid, const LossParams& params,
                                      const RegionThresholds& thresholds);
std::vector<FieldSample> sample_field(const GridSpec& grid, const LossParams& params);

// Header: x1,x2,loss
Table landscape_table(const std::vector<LandscapeSample>& samples);
// Header: x1,x2,loss,g_x1,g_x2,grad_norm,dir_x1,dir_x2,ratio,region
Table field_table(const std::vector<FieldSample>& samples);

}  // namespace dpofield
