#include "cli.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <random>
#include <stdexcept>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "dpofield/field.hpp"
#include "dpofield/flow.hpp"
#include "dpofield/policy.hpp"
#include "dpofield/table.hpp"

#ifndef DPOFIELD_VERSION
#define DPOFIELD_VERSION "0.0.0"
#endif

namespace dpofield::cli {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

constexpr int kSchemaVersion = 1;
constexpr double kBetaMin = 0.01;
constexpr double kBetaMax = 2.0;

// Range / syntax problems found after parsing; exit 2.
class InvalidArgument : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Options {
  double beta = kDefaultBeta;
  std::string out = ".";
  std::string format = "csv";

  std::string grid = "0.01:2:50";
  std::string grid2;
  std::string spacing = "linear";
  std::optional<double> low;
  std::optional<double> high;

  std::string init = "1,1";
  std::string method = "rk4";
  double step = 1e-3;
  long max_steps = 1'000'000;
  double stop_loss = 1e-4;
  double floor = kDomainFloor;
  double slow_eps = 0.05;
  unsigned threads = 0;

  std::string mode = "atomic";
  std::string dataset;
  int responses = 4;
  int vocab = 4;
  int max_len = 4;
  double lr = 0.1;
  int steps = 200;
  std::string init_pi;
  std::string ref = "init";
  std::size_t tracked = 0;

  int samples = 1000;
  std::uint64_t seed = 42;
  std::string point;
  double h = kCheckGradStep;
};

double parse_number(std::string_view text, const std::string& flag) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (!text.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last || !std::isfinite(v)) {
    throw InvalidArgument(flag + ": cannot parse '" + std::string(text) + "' as a number");
  }
  return v;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    parts.push_back(s.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

std::pair<double, double> parse_pair(const std::string& text, const std::string& flag) {
  const auto parts = split(text, ',');
  if (parts.size() != 2) throw InvalidArgument(flag + ": expected 'a,b', got '" + text + "'");
  return {parse_number(parts[0], flag), parse_number(parts[1], flag)};
}

struct Axis {
  double lo, hi;
  int n;
};

Axis parse_axis(const std::string& text, const std::string& flag) {
  const auto parts = split(text, ':');
  if (parts.size() != 3) throw InvalidArgument(flag + ": expected 'min:max:n', got '" + text + "'");
  const double lo = parse_number(parts[0], flag);
  const double hi = parse_number(parts[1], flag);
  const double n = parse_number(parts[2], flag);
  if (n != std::floor(n) || n < 1 || n > 100000) {
    throw InvalidArgument(flag + ": sample count must be an integer in [1, 100000]");
  }
  if (lo < kDomainFloor) {
    throw InvalidArgument(flag + ": min must be >= " + format_double(kDomainFloor));
  }
  if (!(hi >= lo)) throw InvalidArgument(flag + ": max must be >= min");
  return {lo, hi, static_cast<int>(n)};
}

void require(bool ok, const std::string& message) {
  if (!ok) throw InvalidArgument(message);
}

void check_beta(double beta) {
  require(beta >= kBetaMin && beta <= kBetaMax,
          "--beta must lie in [" + format_double(kBetaMin) + ", " + format_double(kBetaMax) +
              "], got " + format_double(beta));
}

GridSpec resolve_grid(const Options& o, bool allow_single) {
  const Axis a = parse_axis(o.grid, "--grid");
  const Axis b = o.grid2.empty() ? a : parse_axis(o.grid2, "--grid2");
  GridSpec g{a.lo, a.hi, b.lo, b.hi, a.n, b.n, Spacing::Linear};
  try {
    g.spacing = parse_spacing(o.spacing);
  } catch (const std::invalid_argument& e) {
    throw InvalidArgument(std::string("--spacing: ") + e.what());
  }
  if (!allow_single) {
    require(a.n >= 2 && b.n >= 2, "--grid: field and landscape grids need n >= 2 per axis");
  }
  require((a.n == 1 || a.hi > a.lo) && (b.n == 1 || b.hi > b.lo),
          "--grid: max must be > min when n >= 2");
  return g;
}

RegionThresholds resolve_thresholds(const Options& o, const GridSpec& g) {
  RegionThresholds t = RegionThresholds::for_grid(g);
  if (o.low) t.low = *o.low;
  if (o.high) t.high = *o.high;
  require(t.low < t.high, "--low must be < --high");
  return t;
}

IntegratorConfig resolve_integrator(const Options& o) {
  IntegratorConfig c;
  try {
    c.method = parse_integrator(o.method);
  } catch (const std::invalid_argument& e) {
    throw InvalidArgument(std::string("--method: ") + e.what());
  }
  require(o.step > 0.0 && std::isfinite(o.step), "--step must be > 0");
  require(o.max_steps >= 1, "--max-steps must be >= 1");
  require(o.stop_loss >= 0.0 && std::isfinite(o.stop_loss), "--stop-loss must be >= 0");
  require(o.floor >= kDomainFloor && std::isfinite(o.floor),
          "--floor must be >= " + format_double(kDomainFloor));
  c.step = o.step;
  c.max_steps = o.max_steps;
  c.stop_loss = o.stop_loss;
  c.floor = o.floor;
  return c;
}

TableFormat resolve_format(const Options& o) {
  try {
    return parse_table_format(o.format);
  } catch (const std::invalid_argument& e) {
    throw InvalidArgument(std::string("--format: ") + e.what());
  }
}

json grid_json(const GridSpec& g) {
  return {{"x1_min", g.x1_min}, {"x1_max", g.x1_max}, {"x2_min", g.x2_min},
          {"x2_max", g.x2_max}, {"n1", g.n1},         {"n2", g.n2},
          {"spacing", to_string(g.spacing)}};
}

json integrator_json(const IntegratorConfig& c) {
  return {{"method", to_string(c.method)},
          {"step", c.step},
          {"max_steps", c.max_steps},
          {"stop_loss", c.stop_loss},
          {"floor", c.floor}};
}

class Output {
 public:
  Output(const std::string& dir, TableFormat format) : dir_(dir), format_(format) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec || !fs::is_directory(dir_)) throw IoError(dir_, "cannot create output directory");
  }

  void table(const std::string& stem, const Table& t) {
    const fs::path p = dir_ / (stem + (format_ == TableFormat::Csv ? ".csv" : ".json"));
    export_table(t, format_, p);
    written_.push_back(p.filename().string());
  }

  void meta(const std::string& command, json parameters, json results, double seconds) {
    json m;
    m["artifact"] = "dpofield";
    m["version"] = DPOFIELD_VERSION;
    m["schema_version"] = kSchemaVersion;
    m["command"] = command;
    m["parameters"] = std::move(parameters);
    m["results"] = std::move(results);
    m["outputs"] = written_;
    m["wall_clock_seconds"] = seconds;
    const fs::path p = dir_ / "meta.json";
    std::ofstream f(p, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError(p, "cannot open for writing");
    f << m.dump(2) << '\n';
    if (!f) throw IoError(p, "write failed");
  }

 private:
  fs::path dir_;
  TableFormat format_;
  std::vector<std::string> written_;
};

double elapsed(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

int cmd_landscape(const Options& o, bool field, std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  check_beta(o.beta);
  const GridSpec grid = resolve_grid(o, false);
  const TableFormat format = resolve_format(o);
  const LossParams params{o.beta};
  json p = {{"beta", o.beta}, {"grid", grid_json(grid)}, {"format", o.format}};
  json r = json::object();

  Output dest(o.out, format);
  if (field) {
    const RegionThresholds t = resolve_thresholds(o, grid);
    const auto samples = sample_field(grid, params, t);
    dest.table("field", field_table(samples));
    p["thresholds"] = {{"low", t.low}, {"high", t.high}};
    std::size_t counts[4] = {0, 0, 0, 0};
    for (const auto& s : samples) ++counts[static_cast<int>(s.region)];
    r["region_counts"] = {{"TopLeft", counts[0]},
                          {"TopRight", counts[1]},
                          {"BottomLowX2", counts[2]},
                          {"Interior", counts[3]}};
    out << "wrote " << samples.size() << " field samples to " << o.out << '\n';
  } else {
    const auto samples = sample_landscape(grid, params);
    dest.table("landscape", landscape_table(samples));
    out << "wrote " << samples.size() << " landscape samples to " << o.out << '\n';
  }
  dest.meta(field ? "field" : "landscape", std::move(p), std::move(r), elapsed(start));
  return kExitOk;
}

int cmd_flow(const Options& o, std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  check_beta(o.beta);
  const auto [x1, x2] = parse_pair(o.init, "--init");
  require(x1 >= kDomainFloor && x2 > o.floor, "--init: x1 must be >= " +
                                                  format_double(kDomainFloor) +
                                                  " and x2 above the floor");
  const IntegratorConfig cfg = resolve_integrator(o);
  require(o.slow_eps >= 0.0, "--slow-eps must be >= 0");
  const TableFormat format = resolve_format(o);

  const Trajectory traj = integrate_flow({x1, x2}, {o.beta}, cfg);
  const auto slow = detect_slow_regions(traj, o.slow_eps);

  Output dest(o.out, format);
  dest.table("trajectory", trajectory_table(traj));
  json intervals = json::array();
  for (const auto& iv : slow) {
    intervals.push_back(
        {{"t_start", iv.t_start}, {"t_end", iv.t_end}, {"min_grad_norm", iv.min_grad_norm}});
  }
  const auto& last = traj.final_step();
  json r = {{"termination", to_string(traj.termination)},
            {"steps", traj.steps.size() - 1},
            {"final_x1", last.point.x1},
            {"final_x2", last.point.x2},
            {"final_loss", last.loss},
            {"slow_intervals", intervals}};
  json p = {{"beta", o.beta},
            {"init", {x1, x2}},
            {"integrator", integrator_json(cfg)},
            {"slow_eps", o.slow_eps},
            {"format", o.format}};
  dest.meta("flow", std::move(p), std::move(r), elapsed(start));
  out << "flow terminated with " << to_string(traj.termination) << " after "
      << traj.steps.size() - 1 << " steps\n";
  return kExitOk;
}

int cmd_sweep(const Options& o, std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  check_beta(o.beta);
  const GridSpec grid = resolve_grid(o, true);
  SweepConfig cfg;
  cfg.integrator = resolve_integrator(o);
  require(o.slow_eps >= 0.0, "--slow-eps must be >= 0");
  cfg.slow_eps = o.slow_eps;
  cfg.threads = o.threads;
  const TableFormat format = resolve_format(o);

  const SweepReport report = sweep_initial_conditions(grid, {o.beta}, cfg);
  Output dest(o.out, format);
  dest.table("sweep", sweep_table(report));
  json p = {{"beta", o.beta},
            {"grid", grid_json(grid)},
            {"integrator", integrator_json(cfg.integrator)},
            {"slow_eps", cfg.slow_eps},
            {"thresholds", {{"low", report.thresholds.low}, {"high", report.thresholds.high}}},
            {"format", o.format}};
  dest.meta("sweep", std::move(p), {{"cells", report.cells.size()}}, elapsed(start));
  out << "swept " << report.cells.size() << " initial conditions\n";
  return kExitOk;
}

std::vector<PreferenceTriple> default_dataset(PolicyMode mode, int vocab, int max_len) {
  if (mode == PolicyMode::Atomic) return {{"p0", {0}, {1}}};
  // Same path except for the final token.
  Response w(static_cast<std::size_t>(max_len));
  for (int t = 0; t < max_len; ++t) w[t] = t % vocab;
  Response l = w;
  l.back() = (w.back() + 1) % vocab;
  return {{"p0", w, l}};
}

int cmd_train(const Options& o, std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  check_beta(o.beta);
  PolicyMode mode;
  try {
    mode = parse_policy_mode(o.mode);
  } catch (const std::invalid_argument& e) {
    throw InvalidArgument(std::string("--mode: ") + e.what());
  }
  require(o.lr >= 0.0 && std::isfinite(o.lr), "--lr must be >= 0");
  require(o.steps >= 0, "--steps must be >= 0");
  require(o.responses >= 2, "--responses must be >= 2");
  require(o.vocab >= 2, "--vocab must be >= 2");
  require(o.max_len >= 1, "--max-len must be >= 1");
  require(o.ref == "init" || o.ref == "uniform", "--ref must be 'init' or 'uniform'");
  const TableFormat format = resolve_format(o);

  std::vector<PreferenceTriple> data =
      o.dataset.empty() ? default_dataset(mode, o.vocab, o.max_len) : read_dataset(o.dataset);
  require(!data.empty(), "--dataset: no triples");
  require(o.tracked < data.size(), "--tracked: index out of range");
  std::vector<std::string> prompts;
  for (const auto& t : data) prompts.push_back(t.prompt);

  auto fresh = [&] {
    return mode == PolicyMode::Atomic ? TabularPolicy::atomic(o.responses, prompts)
                                      : TabularPolicy::autoregressive(o.vocab, o.max_len, prompts);
  };
  TabularPolicy policy = fresh();
  if (!o.init_pi.empty()) {
    require(mode == PolicyMode::Atomic, "--init-pi is only supported in atomic mode");
    const auto [pw, pl] = parse_pair(o.init_pi, "--init-pi");
    const auto& t = data[o.tracked];
    require(t.y_w.size() == 1 && t.y_l.size() == 1, "--init-pi: atomic triples need single ids");
    try {
      policy = atomic_preset(o.responses, t.y_w[0], t.y_l[0], pw, pl, prompts);
    } catch (const std::invalid_argument& e) {
      throw InvalidArgument(std::string("--init-pi: ") + e.what());
    }
  }
  const TabularPolicy ref = o.ref == "init" ? policy : fresh();
  for (const auto& t : data) {
    try {
      validate(t, policy);
    } catch (const std::exception& e) {
      throw InvalidArgument(std::string("--dataset: ") + e.what());
    }
  }

  TrainOptions opts;
  opts.lr = o.lr;
  opts.steps = o.steps;
  opts.params = {o.beta};
  opts.tracked = o.tracked;
  const TrainingTrace trace = train(policy, ref, data, opts);

  Output dest(o.out, format);
  dest.table("trace", trace_table(trace));
  json r = {{"final_loss", trace.records.back().loss},
            {"final_margin", trace.records.back().margin}};
  if (trace.records.size() >= 2) {
    const auto rep = rate_asymmetry_report(trace);
    dest.table("rate", rate_table(rep));
    r["fraction_dispreferred_faster"] = rep.fraction_dispreferred_faster;
    r["cumulative_pi_w_gain"] = rep.cumulative_pi_w_gain.back();
    r["cumulative_pi_l_loss"] = rep.cumulative_pi_l_loss.back();
    r["asymmetry_violations"] = rep.violations.size();
    r["degenerate"] = rep.degenerate;
  }
  json p = {{"beta", o.beta},     {"mode", to_string(mode)}, {"lr", o.lr},
            {"steps", o.steps},   {"ref", o.ref},            {"tracked", o.tracked},
            {"format", o.format}, {"dataset", o.dataset.empty() ? "default" : o.dataset}};
  if (mode == PolicyMode::Atomic) {
    p["responses"] = o.responses;
  } else {
    p["vocab"] = o.vocab;
    p["max_len"] = o.max_len;
  }
  if (!o.init_pi.empty()) p["init_pi"] = o.init_pi;
  dest.meta("train", std::move(p), std::move(r), elapsed(start));
  out << "trained " << o.steps << " steps; final loss "
      << format_double(trace.records.back().loss) << '\n';
  return kExitOk;
}

int cmd_check_grad(const Options& o, bool write_files, std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  check_beta(o.beta);
  require(o.samples >= 1, "--samples must be >= 1");
  require(o.h > 0.0 && o.h < kSampleMin, "--fd-step must lie in (0, 0.01)");
  std::optional<RatioPoint> forced;
  if (!o.point.empty()) {
    const auto [x1, x2] = parse_pair(o.point, "--point");
    require(x1 - o.h >= kDomainFloor && x2 - o.h >= kDomainFloor,
            "--point: stencil would leave the domain");
    forced = RatioPoint{x1, x2};
  }
  const CheckGradReport rep = check_grad(o.samples, {o.beta}, o.seed, forced, o.h);
  const bool pass = rep.max_rel_err < kCheckGradTolerance;
  out << "max_rel_err=" << format_double(rep.max_rel_err) << " worst_point=("
      << format_double(rep.worst_point.x1) << ", " << format_double(rep.worst_point.x2)
      << ") samples=" << rep.samples << " beta=" << format_double(o.beta) << ' '
      << (pass ? "PASS" : "FAIL") << '\n';
  if (write_files) {
    Output dest(o.out, TableFormat::Json);
    json p = {{"beta", o.beta}, {"samples", o.samples}, {"seed", o.seed}, {"h", o.h}};
    if (forced) p["point"] = {forced->x1, forced->x2};
    json r = {{"max_rel_err", rep.max_rel_err},
              {"worst_point", {rep.worst_point.x1, rep.worst_point.x2}},
              {"tolerance", kCheckGradTolerance},
              {"pass", pass}};
    dest.meta("check-grad", std::move(p), std::move(r), elapsed(start));
  }
  return pass ? kExitOk : kExitRuntime;
}

void add_common(CLI::App* sub, Options& o, bool with_format = true) {
  sub->add_option("--beta", o.beta, "Temperature beta in [0.01, 2]")->capture_default_str();
  sub->add_option("--out", o.out, "Output directory")->capture_default_str();
  if (with_format) sub->add_option("--format", o.format, "csv or json")->capture_default_str();
}

void add_grid(CLI::App* sub, Options& o) {
  sub->add_option("--grid", o.grid, "Axis range min:max:n (both axes)")->capture_default_str();
  sub->add_option("--grid2", o.grid2, "x2 axis range min:max:n");
  sub->add_option("--spacing", o.spacing, "linear or log")->capture_default_str();
}

void add_integrator(CLI::App* sub, Options& o) {
  sub->add_option("--method", o.method, "rk4 or euler")->capture_default_str();
  sub->add_option("--step", o.step, "Integration step")->capture_default_str();
  sub->add_option("--max-steps", o.max_steps, "Step budget")->capture_default_str();
  sub->add_option("--stop-loss", o.stop_loss, "Stop when loss <= this")->capture_default_str();
  sub->add_option("--floor", o.floor, "Terminate when x2 reaches this")->capture_default_str();
  sub->add_option("--slow-eps", o.slow_eps, "Gradient-norm threshold for slow regions")
      ->capture_default_str();
}

}  // namespace

std::vector<RatioPoint> sample_points(int count, std::uint64_t seed, double lo, double hi) {
  std::mt19937_64 rng(seed);
  auto unit = [&rng] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  std::vector<RatioPoint> pts;
  pts.reserve(static_cast<std::size_t>(std::max(count, 0)));
  for (int i = 0; i < count; ++i) {
    const double a = lo + (hi - lo) * unit();
    const double b = lo + (hi - lo) * unit();
    pts.push_back({a, b});
  }
  return pts;
}

CheckGradReport check_grad(int samples, const LossParams& params, std::uint64_t seed,
                           std::optional<RatioPoint> forced, double h) {
  if (samples < 1) throw std::invalid_argument("check_grad needs at least one sample");
  const auto pts = forced ? std::vector<RatioPoint>(static_cast<std::size_t>(samples), *forced)
                          : sample_points(samples, seed);
  CheckGradReport rep;
  rep.samples = samples;
  rep.worst_point = pts.front();
  for (const auto& p : pts) {
    const GradientVec a = dpo_gradient(p, params);
    const GradientVec n = finite_diff_gradient(p, params, h);
    const double err = std::max(std::abs(a.d_x1 - n.d_x1) / std::abs(a.d_x1),
                                std::abs(a.d_x2 - n.d_x2) / std::abs(a.d_x2));
    if (err > rep.max_rel_err) {
      rep.max_rel_err = err;
      rep.worst_point = p;
    }
  }
  return rep;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"dpofield: DPO loss landscape, gradient flow and tabular policy experiments",
               "dpofield"};
  app.require_subcommand(1);
  app.set_version_flag("--version", DPOFIELD_VERSION);

  Options o;
  auto* landscape = app.add_subcommand("landscape", "Sample the loss over a grid");
  add_common(landscape, o);
  add_grid(landscape, o);

  auto* field = app.add_subcommand("field", "Sample the gradient field over a grid");
  add_common(field, o);
  add_grid(field, o);
  field->add_option("--low", o.low, "Region threshold for 'small'");
  field->add_option("--high", o.high, "Region threshold for 'large'");

  auto* flow = app.add_subcommand("flow", "Integrate the gradient flow from one point");
  add_common(flow, o);
  add_integrator(flow, o);
  flow->add_option("--init", o.init, "Initial point x1,x2")->capture_default_str();

  auto* sweep = app.add_subcommand("sweep", "Integrate from every node of a grid");
  add_common(sweep, o);
  add_grid(sweep, o);
  add_integrator(sweep, o);
  sweep->add_option("--threads", o.threads, "Worker threads (0 = all cores)");

  auto* trainc = app.add_subcommand("train", "Train a tabular policy with the DPO loss");
  add_common(trainc, o);
  trainc->add_option("--mode", o.mode, "atomic or autoregressive")->capture_default_str();
  trainc->add_option("--dataset", o.dataset, "Line-delimited JSON preference triples");
  trainc->add_option("--responses", o.responses, "Atomic responses per prompt")
      ->capture_default_str();
  trainc->add_option("--vocab", o.vocab, "Autoregressive vocabulary")->capture_default_str();
  trainc->add_option("--max-len", o.max_len, "Autoregressive max length")->capture_default_str();
  trainc->add_option("--lr", o.lr, "Learning rate")->capture_default_str();
  trainc->add_option("--steps", o.steps, "Gradient steps")->capture_default_str();
  trainc->add_option("--init-pi", o.init_pi, "Atomic preset pi_w,pi_l");
  trainc->add_option("--ref", o.ref, "Reference policy: init or uniform")->capture_default_str();
  trainc->add_option("--tracked", o.tracked, "Triple reported in the trace")
      ->capture_default_str();

  auto* check = app.add_subcommand("check-grad", "Compare analytic and numeric gradients");
  add_common(check, o, false);
  check->add_option("--samples", o.samples, "Number of sampled points")->capture_default_str();
  check->add_option("--seed", o.seed, "Sampling seed")->capture_default_str();
  check->add_option("--point", o.point, "Evaluate only at x1,x2");
  check->add_option("--fd-step", o.h, "Finite-difference step")->capture_default_str();

  std::vector<std::string> argv_store{"dpofield"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_store) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << DPOFIELD_VERSION << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (landscape->parsed()) return cmd_landscape(o, false, out);
    if (field->parsed()) return cmd_landscape(o, true, out);
    if (flow->parsed()) return cmd_flow(o, out);
    if (sweep->parsed()) return cmd_sweep(o, out);
    if (trainc->parsed()) return cmd_train(o, out);
    if (check->parsed()) return cmd_check_grad(o, check->count("--out") > 0, out);
  } catch (const InvalidArgument& e) {
    err << "invalid argument: " << e.what() << '\n';
    return kExitUsage;
  } catch (const IoError& e) {
    err << "output error: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "runtime error: " << e.what() << '\n';
    return kExitRuntime;
  }
  err << "usage error: no command given\n";
  return kExitUsage;
}

}  // namespace dpofield::cli
