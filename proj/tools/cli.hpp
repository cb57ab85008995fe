#pragma once

// Command-line front end: landscape, field, flow, sweep, train, check-grad.
//
// Exit status: 0 on success, 2 on usage/validation errors, 1 on runtime errors.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dpofield/loss.hpp"

namespace dpofield::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

inline constexpr double kCheckGradTolerance = 1e-6;
inline constexpr double kCheckGradStep = 1e-6;
inline constexpr double kSampleMin = 0.01;
inline constexpr double kSampleMax = 2.0;

struct CheckGradReport {
  double max_rel_err = 0.0;
  RatioPoint worst_point;
  int samples = 0;
};

/// Max relative error between dpo_gradient and finite_diff_gradient over
/// `samples` points drawn uniformly from [0.01, 2]^2 by a seeded generator, or
/// at `forced` when given.
CheckGradReport check_grad(int samples, const LossParams& params, std::uint64_t seed,
                           std::optional<RatioPoint> forced = std::nullopt,
                           double h = kCheckGradStep);

/// Deterministic points in [lo, hi]^2 from a 64-bit Mersenne Twister; the
/// mapping to doubles is fixed so sequences match across standard libraries.
std::vector<RatioPoint> sample_points(int count, std::uint64_t seed, double lo = kSampleMin,
                                      double hi = kSampleMax);

/// `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dpofield::cli
