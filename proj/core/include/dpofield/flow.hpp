#pragma once

// Gradient-flow dynamics d(x1, x2)/dt = -grad L in ratio space.
//
// Along exact trajectories x1 rises, x2 falls, and x1^2 + x2^2 is conserved
// (x1 * dx1/dt = -x2 * dx2/dt). For beta < 1 the flow drives x2 to zero in
// finite time, so integration stops at a configurable floor.

#include <limits>
#include <string>
#include <vector>

#include "dpofield/field.hpp"
#include "dpofield/loss.hpp"
#include "dpofield/table.hpp"

namespace dpofield {

enum class Integrator { Euler, RK4 };

Integrator parse_integrator(const std::string& name);
std::string to_string(Integrator m);

struct IntegratorConfig {
  Integrator method = Integrator::RK4;
  double step = 1e-3;
  long max_steps = 1'000'000;
  double stop_loss = 1e-4;
  double floor = kDomainFloor;

  void validate() const;
};

enum class Termination { LossReached, FloorHit, MaxSteps, SingularRegion };

std::string to_string(Termination t);

struct TrajectoryStep {
  double t = 0.0;
  RatioPoint point;
  double loss = 0.0;
  GradientVec grad;
  double ratio = 0.0;
};

struct Trajectory {
  LossParams params;
  IntegratorConfig config;
  std::vector<TrajectoryStep> steps;
  Termination termination = Termination::MaxSteps;

  const TrajectoryStep& final_step() const { return steps.back(); }
};

/// Integrates from `init` until loss <= stop_loss, x2 would reach the floor,
/// the x2 gradient exceeds 1/floor, or max_steps is exhausted.
///
/// A step whose stages or result would leave (floor, inf) is not taken; a final
/// clamp record at t + step with x1 unchanged and x2 = floor is appended and the
/// run ends with FloorHit. No record ever holds NaN or infinity.
Trajectory integrate_flow(const RatioPoint& init, const LossParams& params,
                          const IntegratorConfig& config);

struct SlowInterval {
  double t_start = 0.0;
  double t_end = 0.0;
  double min_grad_norm = 0.0;
};

/// Maximal runs of consecutive records with |grad L| < eps. Intervals are
/// closed on the first and last slow record.
std::vector<SlowInterval> detect_slow_regions(const Trajectory& traj, double eps);

/// Sum of (t_end - t_start) over the slow intervals.
double slow_time(const std::vector<SlowInterval>& intervals);

struct SweepConfig {
  IntegratorConfig integrator;
  double slow_eps = 0.05;
  /// 0 picks std::thread::hardware_concurrency().
  unsigned threads = 0;
};

struct SweepCell {
  RatioPoint init;
  Region region = Region::Interior;
  long steps_to_stop = 0;
  Termination termination = Termination::MaxSteps;
  RatioPoint final_point;
  double slow_time = 0.0;
  /// First time at which x1 >= 2 * x1(0); infinity if never reached.
  double x1_doubling_time = std::numeric_limits<double>::infinity();
};

struct SweepReport {
  GridSpec grid;
  LossParams params;
  SweepConfig config;
  RegionThresholds thresholds;
  std::vector<SweepCell> cells;  // row-major, same order as the grid
};

/// One integration per grid node. Per-cell failures are recorded, not thrown.
/// Cells are computed in parallel; the result does not depend on thread count.
SweepReport sweep_initial_conditions(const GridSpec& grid, const LossParams& params,
                                     const SweepConfig& config);

// Header: t,x1,x2,loss,g_x1,g_x2,grad_norm,ratio
Table trajectory_table(const Trajectory& traj);
// Header: x1_0,x2_0,region,steps_to_stop,termination,final_x1,final_x2,slow_time
Table sweep_table(const SweepReport& report);

}  // namespace dpofield
