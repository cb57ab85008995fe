// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "dpofield/field.hpp"
#include "dpofield/flow.hpp"
#include "dpofield/loss.hpp"
#include "dpofield/policy.hpp"
#include "oracles.hpp"

using namespace dpofield;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  const char* name;
  double time_limit;  // seconds; 0 = none
  std::function<Outcome()> body;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

constexpr double kBetas[] = {0.1, 0.3, 0.5, 1.0};
constexpr int kPoints = 10000;

std::vector<RatioPoint> seeded_points(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.01, 2.0);
  std::vector<RatioPoint> out(static_cast<std::size_t>(n));
  for (auto& p : out) p = {u(rng), u(rng)};
  return out;
}

std::int64_t ulp_distance(double a, double b) {
  std::int64_t ia, ib;
  std::memcpy(&ia, &a, sizeof a);
  std::memcpy(&ib, &b, sizeof b);
  return ia > ib ? ia - ib : ib - ia;
}

// Central differences of the long-double power-form loss.
std::pair<long double, long double> fd_power_form(const RatioPoint& p, double beta, double h) {
  const long double x1 = p.x1, x2 = p.x2, b = beta, hh = h;
  return {(oracle::power_form_loss(x1 + hh, x2, b) - oracle::power_form_loss(x1 - hh, x2, b)) /
              (2 * hh),
          (oracle::power_form_loss(x1, x2 + hh, b) - oracle::power_form_loss(x1, x2 - hh, b)) /
              (2 * hh)};
}

Outcome gradient_vs_fd() {
  const auto pts = seeded_points(kPoints, 20240601);
  double worst = 0.0;
  RatioPoint worst_p;
  double worst_beta = 0.0;
  for (double beta : kBetas) {
    for (const auto& p : pts) {
      const auto g = dpo_gradient(p, {beta});
      const auto [f1, f2] = fd_power_form(p, beta, 1e-6);
      const double e = std::max(std::abs(g.d_x1 - static_cast<double>(f1)) / std::abs(g.d_x1),
                                std::abs(g.d_x2 - static_cast<double>(f2)) / std::abs(g.d_x2));
      if (e > worst) {
        worst = e;
        worst_p = p;
        worst_beta = beta;
      }
    }
  }
  return {worst < 1e-6, fmt("max_rel_err=%.3e at (%.6g, %.6g) beta=%g over %d points (tol 1e-6)",
                            worst, worst_p.x1, worst_p.x2, worst_beta, kPoints * 4)};
}

Outcome ratio_identity() {
  const auto pts = seeded_points(kPoints, 20240602);
  std::int64_t worst = 0;
  for (double beta : kBetas) {
    for (const auto& p : pts) {
      const auto g = dpo_gradient(p, {beta});
      worst = std::max(worst, ulp_distance(std::abs(g.d_x1) / g.d_x2, p.x2 / p.x1));
    }
  }
  return {worst <= 8, fmt("max distance %lld ulp over %d points (tol 8)",
                          static_cast<long long>(worst), kPoints * 4)};
}

Outcome form_equivalence() {
  std::mt19937_64 rng(20240603);
  std::uniform_real_distribution<double> x(0.01, 2.0);
  std::uniform_real_distribution<double> ref(0.005, 1.0);
  double worst = 0.0;
  int n = 0;
  for (double beta : kBetas) {
    for (int i = 0; i < kPoints; ++i) {
      // Unit references half the time, arbitrary reference pairs otherwise.
      const ReferencePair r = i % 2 ? ReferencePair{ref(rng), ref(rng)} : ReferencePair{};
      double x1, x2;
      do {
        x1 = x(rng);
        x2 = x(rng);
      } while (x1 * r.ref_w > 1.0 || x2 * r.ref_l > 1.0);
      const double pw = x1 * r.ref_w;
      const double pl = x2 * r.ref_l;
      const double a = dpo_loss_sigmoid_form(pw, pl, r, {beta});
      const double b = dpo_loss({pw / r.ref_w, pl / r.ref_l}, {beta});
      worst = std::max(worst, std::abs(a - b) / std::abs(b));
      ++n;
    }
  }
  return {worst < 1e-12, fmt("max_rel_diff=%.3e over %d points (tol 1e-12)", worst, n)};
}

Outcome flow_monotonicity() {
  std::mt19937_64 rng(20240604);
  std::uniform_real_distribution<double> u(0.01, 2.0);
  constexpr double tol = 1e-9;
  int bad = 0, asym_checked = 0, below = 0;
  long total_steps = 0;
  std::string first_bad;
  for (int i = 0; i < 100; ++i) {
    const RatioPoint init{u(rng), u(rng)};
    const double beta = kBetas[i % 4];
    if (init.x2 < init.x1) ++below;
    const auto tr = integrate_flow(init, {beta}, IntegratorConfig{});
    total_steps += static_cast<long>(tr.steps.size());
    for (std::size_t k = 1; k < tr.steps.size(); ++k) {
      const auto& a = tr.steps[k - 1];
      const auto& b = tr.steps[k];
      bool ok = b.point.x1 >= a.point.x1 - tol && b.point.x2 <= a.point.x2 + tol &&
                b.loss <= a.loss + tol && b.ratio < a.ratio;
      if (a.point.x2 < a.point.x1) {
        ++asym_checked;
        ok = ok && (a.point.x2 - b.point.x2) > (b.point.x1 - a.point.x1);
      }
      if (!ok) {
        if (bad++ == 0) first_bad = fmt(" first at trajectory %d step %zu", i, k);
      }
    }
  }
  return {bad == 0 && below > 0,
          fmt("100 trajectories (%d start with x2 < x1), %ld states, %d asymmetry checks, "
              "%d violations%s",
              below, total_steps, asym_checked, bad, first_bad.c_str())};
}

Outcome region_properties() {
  const GridSpec grid = GridSpec::square(0.01, 2.0, 50);
  const LossParams params{0.1};
  const auto samples = sample_field(grid, params);
  int tl = 0, tl_ok = 0, bl = 0, bl_ok = 0, tr = 0;
  double tr_norm = 0.0, refl_norm = 0.0;
  for (int j = 0; j < grid.n2; ++j) {
    for (int i = 0; i < grid.n1; ++i) {
      const auto& s = samples[static_cast<std::size_t>(j * grid.n1 + i)];
      switch (s.region) {
        case Region::TopLeft:
          ++tl;
          tl_ok += dominance(s.point) == Dominance::X1Dominant;
          break;
        case Region::BottomLowX2:
          ++bl;
          bl_ok += dominance(s.point) == Dominance::X2Dominant;
          break;
        case Region::TopRight: {
          ++tr;
          tr_norm += s.grad_norm;
          const auto& m = samples[static_cast<std::size_t>((grid.n2 - 1 - j) * grid.n1 +
                                                           (grid.n1 - 1 - i))];
          refl_norm += m.grad_norm;
          break;
        }
        case Region::Interior:
          break;
      }
    }
  }
  tr_norm /= tr;
  refl_norm /= tr;
  return {tl > 0 && bl > 0 && tr > 0 && tl_ok == tl && bl_ok == bl && tr_norm < refl_norm,
          fmt("TopLeft %d/%d X1Dominant, BottomLowX2 %d/%d X2Dominant, mean |grad| TopRight "
              "%.4g < reflected low corner %.4g",
              tl_ok, tl, bl_ok, bl, tr_norm, refl_norm)};
}

double table_rel_err(const LogitTable& analytic, const LogitTable& fd) {
  double worst = 0.0;
  for (const auto& [key, row] : fd) {
    const auto it = analytic.find(key);
    for (std::size_t j = 0; j < row.size(); ++j) {
      const double a = it == analytic.end() ? 0.0 : it->second[j];
      worst = std::max(worst, oracle::relative_error(a, row[j], 1e-4));
    }
  }
  return worst;
}

Outcome policy_gradient_check() {
  std::mt19937_64 rng(20240606);
  double worst_atomic = 0.0, worst_ar = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const bool atomic = i % 2 == 0;
    const auto inst = atomic ? oracle::random_atomic_instance(rng)
                             : oracle::random_autoregressive_instance(rng);
    const std::vector<PreferenceTriple> data{inst.triple};
    const double e =
        table_rel_err(dpo_policy_gradient(inst.policy, inst.ref, inst.triple, inst.params),
                      oracle::fd_policy_gradient(inst.policy, inst.ref, data, inst.params));
    (atomic ? worst_atomic : worst_ar) = std::max(atomic ? worst_atomic : worst_ar, e);
  }
  return {worst_atomic < 1e-5 && worst_ar < 1e-5,
          fmt("1000 instances: max_rel_err atomic %.3e, autoregressive %.3e (tol 1e-5)",
              worst_atomic, worst_ar)};
}

Outcome shared_prefix_cancellation() {
  std::mt19937_64 rng(20240607);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  int nonzero = 0, moved_early = 0, stuck_late = 0, cases = 0;
  // Divergence at each position 0..3 of a length-4 path over vocab 4.
  for (int d = 0; d < 4; ++d) {
    for (int trial = 0; trial < 5; ++trial) {
      ++cases;
      Response w(4), l(4);
      std::uniform_int_distribution<int> tok(0, 3);
      for (auto& t : w) t = tok(rng);
      l = w;
      l[static_cast<std::size_t>(d)] = (w[static_cast<std::size_t>(d)] + 1 + trial % 3) % 4;
      auto pol = TabularPolicy::autoregressive(4, 4, {"q"});
      if (trial > 0) {
        for (const Response* y : {&w, &l}) {
          for (std::size_t k = 0; k < 4; ++k) {
            for (auto& v : pol.mutable_row("q", std::span<const int>(y->data(), k))) v = u(rng);
          }
        }
      }
      const PreferenceTriple t{"q", w, l};
      const LossParams params{0.1 + 0.2 * trial};
      const auto g = dpo_policy_gradient(pol, pol, t, params);
      for (const auto& [key, row] : g) {
        if (key.prefix.size() < static_cast<std::size_t>(d)) {
          for (double v : row) nonzero += v != 0.0;
        }
      }
      const std::vector<PreferenceTriple> data{t};
      const auto trace = train(pol, pol, data, {0.1, 1, params});
      const auto& after = trace.final_policy;
      for (const auto& [key, row] : after.logits()) {
        const bool changed = row != pol.row(key.prompt, key.prefix);
        if (key.prefix.size() < static_cast<std::size_t>(d)) moved_early += changed;
      }
      // Every post-divergence row on either path must move.
      for (const Response* y : {&w, &l}) {
        for (std::size_t k = static_cast<std::size_t>(d); k < 4; ++k) {
          const std::span<const int> prefix(y->data(), k);
          stuck_late += after.row("q", prefix) == pol.row("q", prefix);
        }
      }
    }
  }
  return {nonzero == 0 && moved_early == 0 && stuck_late == 0,
          fmt("%d vocab-4 length-4 cases: %d nonzero shared-prefix entries, %d shared rows moved, "
              "%d post-divergence rows unmoved",
              cases, nonzero, moved_early, stuck_late)};
}

Outcome oracle_training() {
  struct Setup {
    const char* name;
    TabularPolicy policy;
    TabularPolicy ref;
    std::vector<PreferenceTriple> data;
    TrainOptions opts;
  };
  std::vector<Setup> setups;
  {
    auto p = TabularPolicy::atomic(4, {"p"});
    setups.push_back({"atomic K=4 uniform", p, p, {{"p", {0}, {1}}}, {0.1, 200, {0.1}}});
  }
  {
    auto p = atomic_preset(4, 0, 1, 0.1, 0.6, {"p"});
    setups.push_back({"atomic preset (0.1, 0.6)", p, p, {{"p", {0}, {1}}}, {0.1, 200, {0.5}}});
  }
  {
    auto p = TabularPolicy::autoregressive(4, 4, {"p"});
    setups.push_back(
        {"autoregressive shared prefix", p, p, {{"p", {1, 2, 3, 0}, {1, 2, 0, 0}}}, {0.1, 200, {0.3}}});
  }
  {
    auto p = TabularPolicy::atomic(4, {"a", "b"});
    setups.push_back({"atomic two prompts",
                      p,
                      p,
                      {{"a", {0}, {1}}, {"a", {2}, {1}}, {"b", {3}, {2}}},
                      {0.1, 200, {0.2}}});
  }
  double worst = 0.0;
  std::string where;
  for (const auto& s : setups) {
    const auto a = train(s.policy, s.ref, s.data, s.opts);
    const auto b = train(s.policy, s.ref, s.data, s.opts, oracle::fd_gradient_fn());
    if (a.records.size() != b.records.size() || a.records.size() != 201) return {false, "trace lengths differ"};
    for (std::size_t k = 0; k < a.records.size(); ++k) {
      const auto& r = a.records[k];
      const auto& o = b.records[k];
      const double fields[][2] = {{r.loss, o.loss},         {r.objective, o.objective},
                                  {r.pi_w, o.pi_w},         {r.pi_l, o.pi_l},
                                  {r.x1, o.x1},             {r.x2, o.x2},
                                  {r.margin, o.margin},     {r.rest_mass, o.rest_mass},
                                  {r.grad_norm, o.grad_norm}, {r.d_pi_w, o.d_pi_w},
                                  {r.d_pi_l, o.d_pi_l}};
      for (const auto& f : fields) {
        const double e = std::abs(f[0] - f[1]);
        if (e > worst) {
          worst = e;
          where = fmt("%s step %zu", s.name, k);
        }
      }
    }
  }
  return {worst < 1e-6, fmt("%zu runs x 200 steps, max field difference %.3e (%s) (tol 1e-6)",
                            setups.size(), worst, where.c_str())};
}

Outcome rate_asymmetry() {
  struct Preset {
    int k;
    double pi_w, pi_l, beta;
  };
  const Preset presets[] = {{4, 0.375, 0.125, 0.1}, {4, 0.5, 0.1, 0.1},  {4, 0.3, 0.05, 0.5},
                            {3, 0.6, 0.3, 1.0},     {6, 0.2, 0.02, 0.3}, {4, 0.26, 0.24, 0.1},
                            {2, 0.7, 0.3, 0.5}};
  int violations = 0, steps = 0;
  std::string curves;
  for (const auto& p : presets) {
    const auto pol = atomic_preset(p.k, 0, 1, p.pi_w, p.pi_l, {"p"});
    const auto ref = TabularPolicy::atomic(p.k, {"p"});
    const std::vector<PreferenceTriple> data{{"p", {0}, {1}}};
    const auto trace = train(pol, ref, data, {0.1, 200, {p.beta}});
    if (!(trace.records[0].x2 < trace.records[0].x1)) return {false, "preset does not start with x2 < x1"};
    const auto rep = rate_asymmetry_report(trace);
    violations += static_cast<int>(rep.violations.size());
    steps += static_cast<int>(rep.steps.size());
    if (rep.cumulative_pi_w_gain.size() != rep.steps.size() ||
        rep.cumulative_pi_l_loss.size() != rep.steps.size()) {
      return {false, "cumulative curves have the wrong length"};
    }
    curves += fmt("\n       K=%d (%.3g, %.3g) beta=%g: cum pi_w gain %.4f, cum pi_l loss %.4f, "
                  "dispreferred faster on %.0f%% of steps",
                  p.k, p.pi_w, p.pi_l, p.beta, rep.cumulative_pi_w_gain.back(),
                  rep.cumulative_pi_l_loss.back(), 100 * rep.fraction_dispreferred_faster);
  }
  return {violations == 0,
          fmt("%d steps over %zu presets, %d violations of |dlog x2| >= dlog x1 - lr^2", steps,
              std::size(presets), violations) +
              curves};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "analytic gradient matches central finite differences", 5.0, gradient_vs_fd},
      {2, "update-rate identity |dL/dx1| / dL/dx2 = x2/x1", 1.0, ratio_identity},
      {3, "sigmoid form equals ratio form", 0.0, form_equivalence},
      {4, "gradient-flow monotonicity and discrete speed asymmetry", 30.0, flow_monotonicity},
      {5, "region properties on a 50x50 field", 0.0, region_properties},
      {6, "policy logit gradients match finite differences", 0.0, policy_gradient_check},
      {7, "shared-prefix cancellation", 0.0, shared_prefix_cancellation},
      {8, "analytic training traces match finite-difference training", 0.0, oracle_training},
      {9, "rate asymmetry from presets with x2 < x1", 0.0, rate_asymmetry},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.body();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = c.time_limit <= 0.0 || secs < c.time_limit;
    const bool pass = o.pass && in_time;
    failures += !pass;
    std::printf("[%s] %d. %s: %s; %.2fs%s\n", pass ? "PASS" : "FAIL", c.id, c.name,
                o.detail.c_str(), secs,
                c.time_limit > 0 ? fmt(" (limit %gs)", c.time_limit).c_str() : "");
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures,
              criteria.size());
  return failures == 0 ? 0 : 1;
}
