#include "dpofield/flow.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <thread>

namespace dpofield {

namespace {

struct Velocity {
  double v1 = 0.0;
  double v2 = 0.0;
};

enum class StageFailure { None, Floor, Singular };

// Evaluates -grad L at p, or reports why p is unusable as a stage point.
StageFailure velocity_at(const RatioPoint& p, const LossParams& params, double floor,
                         Velocity& out) {
  if (!std::isfinite(p.x1) || !std::isfinite(p.x2) || p.x2 <= floor || p.x1 < kDomainFloor) {
    return StageFailure::Floor;
  }
  const GradientVec g = dpo_gradient(p, params);
  if (std::abs(g.d_x2) > 1.0 / floor) return StageFailure::Singular;
  out = {-g.d_x1, -g.d_x2};
  return StageFailure::None;
}

StageFailure advance(const RatioPoint& p, const LossParams& params, const IntegratorConfig& cfg,
                     RatioPoint& next) {
  const double h = cfg.step;
  Velocity k1;
  if (auto f = velocity_at(p, params, cfg.floor, k1); f != StageFailure::None) return f;
  if (cfg.method == Integrator::Euler) {
    next = {p.x1 + h * k1.v1, p.x2 + h * k1.v2};
  } else {
    Velocity k2, k3, k4;
    if (auto f = velocity_at({p.x1 + 0.5 * h * k1.v1, p.x2 + 0.5 * h * k1.v2}, params, cfg.floor,
                             k2);
        f != StageFailure::None) {
      return f;
    }
    if (auto f = velocity_at({p.x1 + 0.5 * h * k2.v1, p.x2 + 0.5 * h * k2.v2}, params, cfg.floor,
                             k3);
        f != StageFailure::None) {
      return f;
    }
    if (auto f = velocity_at({p.x1 + h * k3.v1, p.x2 + h * k3.v2}, params, cfg.floor, k4);
        f != StageFailure::None) {
      return f;
    }
    next = {p.x1 + h / 6.0 * (k1.v1 + 2.0 * k2.v1 + 2.0 * k3.v1 + k4.v1),
            p.x2 + h / 6.0 * (k1.v2 + 2.0 * k2.v2 + 2.0 * k3.v2 + k4.v2)};
  }
  if (!std::isfinite(next.x1) || !std::isfinite(next.x2) || next.x2 <= cfg.floor) {
    return StageFailure::Floor;
  }
  return StageFailure::None;
}

TrajectoryStep make_step(double t, const RatioPoint& p, const LossParams& params) {
  return {t, p, dpo_loss(p, params), dpo_gradient(p, params), update_rate(p)};
}

unsigned resolve_threads(unsigned requested, std::size_t work) {
  unsigned n = requested ? requested : std::max(1u, std::thread::hardware_concurrency());
  return static_cast<unsigned>(std::min<std::size_t>(n, std::max<std::size_t>(work, 1)));
}

}  // namespace

Integrator parse_integrator(const std::string& name) {
  if (name == "rk4") return Integrator::RK4;
  if (name == "euler") return Integrator::Euler;
  throw std::invalid_argument("unknown integrator '" + name + "' (expected rk4 or euler)");
}

std::string to_string(Integrator m) { return m == Integrator::RK4 ? "rk4" : "euler"; }

std::string to_string(Termination t) {
  switch (t) {
    case Termination::LossReached:
      return "LossReached";
    case Termination::FloorHit:
      return "FloorHit";
    case Termination::MaxSteps:
      return "MaxSteps";
    case Termination::SingularRegion:
      return "SingularRegion";
  }
  return "?";
}

void IntegratorConfig::validate() const {
  if (!std::isfinite(step) || step <= 0.0) throw DomainError("integrator step must be > 0");
  if (max_steps < 1) throw DomainError("max_steps must be >= 1");
  if (!std::isfinite(stop_loss) || stop_loss < 0.0) throw DomainError("stop_loss must be >= 0");
  if (!std::isfinite(floor) || floor < kDomainFloor) {
    throw DomainError("floor must be >= " + std::to_string(kDomainFloor));
  }
}

Trajectory integrate_flow(const RatioPoint& init, const LossParams& params,
                          const IntegratorConfig& config) {
  validate(init);
  validate(params);
  config.validate();
  if (init.x2 <= config.floor) throw DomainError("initial x2 must lie above the floor");

  Trajectory traj{params, config, {}, Termination::MaxSteps};
  traj.steps.push_back(make_step(0.0, init, params));
  if (traj.steps.back().loss <= config.stop_loss) {
    traj.termination = Termination::LossReached;
    return traj;
  }

  RatioPoint p = init;
  for (long k = 1; k <= config.max_steps; ++k) {
    const double t = static_cast<double>(k) * config.step;
    RatioPoint next;
    const StageFailure failure = advance(p, params, config, next);
    if (failure == StageFailure::Singular) {
      traj.termination = Termination::SingularRegion;
      return traj;
    }
    if (failure == StageFailure::Floor) {
      traj.steps.push_back(make_step(t, {p.x1, config.floor}, params));
      traj.termination = Termination::FloorHit;
      return traj;
    }
    p = next;
    traj.steps.push_back(make_step(t, p, params));
    if (traj.steps.back().loss <= config.stop_loss) {
      traj.termination = Termination::LossReached;
      return traj;
    }
  }
  return traj;
}

std::vector<SlowInterval> detect_slow_regions(const Trajectory& traj, double eps) {
  if (!(eps > 0.0)) {
    if (eps == 0.0) return {};
    throw std::invalid_argument("slow-region threshold must be > 0");
  }
  std::vector<SlowInterval> out;
  std::optional<SlowInterval> open;
  for (const auto& s : traj.steps) {
    const double n = s.grad.norm();
    if (n < eps) {
      if (!open) open = SlowInterval{s.t, s.t, n};
      open->t_end = s.t;
      open->min_grad_norm = std::min(open->min_grad_norm, n);
    } else if (open) {
      out.push_back(*open);
      open.reset();
    }
  }
  if (open) out.push_back(*open);
  return out;
}

double slow_time(const std::vector<SlowInterval>& intervals) {
  double total = 0.0;
  for (const auto& iv : intervals) total += iv.t_end - iv.t_start;
  return total;
}

SweepReport sweep_initial_conditions(const GridSpec& grid, const LossParams& params,
                                     const SweepConfig& config) {
  grid.validate(true);
  validate(params);
  config.integrator.validate();
  if (!(config.slow_eps >= 0.0)) throw DomainError("slow_eps must be >= 0");

  SweepReport report{grid, params, config, RegionThresholds::for_grid(grid), {}};
  const auto xs = grid.x1_nodes();
  const auto ys = grid.x2_nodes();
  report.cells.resize(grid.size());

  auto run_cell = [&](std::size_t idx) {
    SweepCell& cell = report.cells[idx];
    cell.init = {xs[idx % xs.size()], ys[idx / xs.size()]};
    cell.region = report.thresholds.low < report.thresholds.high
                      ? classify_region(cell.init, report.thresholds)
                      : Region::Interior;
    cell.final_point = cell.init;
    try {
      const Trajectory traj = integrate_flow(cell.init, params, config.integrator);
      cell.steps_to_stop = static_cast<long>(traj.steps.size()) - 1;
      cell.termination = traj.termination;
      cell.final_point = traj.final_step().point;
      cell.slow_time = slow_time(detect_slow_regions(traj, config.slow_eps));
      for (const auto& s : traj.steps) {
        if (s.point.x1 >= 2.0 * cell.init.x1) {
          cell.x1_doubling_time = s.t;
          break;
        }
      }
    } catch (const DomainError&) {
      // Initial condition at or below the floor.
      cell.termination = Termination::FloorHit;
    }
  };

  const unsigned n_threads = resolve_threads(config.threads, report.cells.size());
  if (n_threads == 1) {
    for (std::size_t i = 0; i < report.cells.size(); ++i) run_cell(i);
  } else {
    std::vector<std::jthread> workers;
    workers.reserve(n_threads);
    for (unsigned w = 0; w < n_threads; ++w) {
      workers.emplace_back([&, w] {
        for (std::size_t i = w; i < report.cells.size(); i += n_threads) run_cell(i);
      });
    }
  }
  return report;
}

Table trajectory_table(const Trajectory& traj) {
  Table t;
  t.header = {"t", "x1", "x2", "loss", "g_x1", "g_x2", "grad_norm", "ratio"};
  t.rows.reserve(traj.steps.size());
  for (const auto& s : traj.steps) {
    t.rows.push_back(
        {s.t, s.point.x1, s.point.x2, s.loss, s.grad.d_x1, s.grad.d_x2, s.grad.norm(), s.ratio});
  }
  return t;
}

Table sweep_table(const SweepReport& report) {
  Table t;
  t.header = {"x1_0",        "x2_0",     "region",   "steps_to_stop",
              "termination", "final_x1", "final_x2", "slow_time"};
  t.rows.reserve(report.cells.size());
  for (const auto& c : report.cells) {
    t.rows.push_back({c.init.x1, c.init.x2, to_string(c.region),
                      static_cast<std::int64_t>(c.steps_to_stop), to_string(c.termination),
                      c.final_point.x1, c.final_point.x2, c.slow_time});
  }
  return t;
}

}  // namespace dpofield
