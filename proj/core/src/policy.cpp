#include "dpofield/policy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "numeric.hpp"

namespace dpofield {

namespace {

constexpr double kMaxEnumeration = 1 << 20;

std::vector<double> log_softmax(const std::vector<double>& logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double v : logits) sum += std::exp(v - m);
  const double lse = m + std::log(sum);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
  return out;
}

// Adds sign * (onehot(token) - p) to `acc`, entry by entry.
void accumulate_score(std::vector<double>& acc, const std::vector<double>& p, int token,
                      double sign) {
  for (std::size_t j = 0; j < p.size(); ++j) {
    const double score = (static_cast<int>(j) == token ? 1.0 : 0.0) - p[j];
    acc[j] += sign * score;
  }
}

void accumulate_path(LogitTable& acc, const TabularPolicy& policy, const std::string& prompt,
                     const Response& y, double sign) {
  const std::size_t positions = policy.mode() == PolicyMode::Atomic ? 1 : y.size();
  for (std::size_t t = 0; t < positions; ++t) {
    const std::span<const int> prefix =
        policy.mode() == PolicyMode::Atomic ? std::span<const int>{}
                                            : std::span<const int>(y.data(), t);
    const auto p = policy.distribution(prompt, prefix);
    auto [it, inserted] =
        acc.try_emplace(LogitKey{prompt, {prefix.begin(), prefix.end()}}, p.size(), 0.0);
    accumulate_score(it->second, p, y[t], sign);
  }
}

void merge_into(LogitTable& total, const LogitTable& part) {
  for (const auto& [key, row] : part) {
    auto [it, inserted] = total.try_emplace(key, row.size(), 0.0);
    for (std::size_t j = 0; j < row.size(); ++j) it->second[j] += row[j];
  }
}

Response parse_response(const nlohmann::json& v, std::size_t line) {
  if (v.is_number_integer()) return {v.get<int>()};
  if (v.is_array()) {
    Response r;
    for (const auto& tok : v) {
      if (!tok.is_number_integer()) {
        throw std::invalid_argument("dataset line " + std::to_string(line) +
                                    ": response tokens must be integers");
      }
      r.push_back(tok.get<int>());
    }
    return r;
  }
  throw std::invalid_argument("dataset line " + std::to_string(line) +
                              ": response must be an integer or an array of integers");
}

void enumerate_paths(const TabularPolicy& policy, const std::string& prompt, Response& prefix,
                     std::size_t length, double log_p, const PreferenceTriple& triple,
                     double& rest) {
  if (prefix.size() == length) {
    if (prefix != triple.y_w && prefix != triple.y_l) rest += std::exp(log_p);
    return;
  }
  const auto lp = log_softmax(policy.row(prompt, prefix));
  for (int tok = 0; tok < policy.width(); ++tok) {
    prefix.push_back(tok);
    enumerate_paths(policy, prompt, prefix, length, log_p + lp[tok], triple, rest);
    prefix.pop_back();
  }
}

}  // namespace

std::string to_string(PolicyMode m) {
  return m == PolicyMode::Atomic ? "atomic" : "autoregressive";
}

PolicyMode parse_policy_mode(const std::string& name) {
  if (name == "atomic") return PolicyMode::Atomic;
  if (name == "autoregressive" || name == "ar") return PolicyMode::Autoregressive;
  throw std::invalid_argument("unknown policy mode '" + name +
                              "' (expected atomic or autoregressive)");
}

TabularPolicy::TabularPolicy(PolicyMode mode, int width, int max_length)
    : mode_(mode), width_(width), max_length_(max_length) {}

TabularPolicy TabularPolicy::atomic(int num_responses, const std::vector<std::string>& prompts) {
  if (num_responses < 2) throw std::invalid_argument("atomic policy needs >= 2 responses");
  TabularPolicy p(PolicyMode::Atomic, num_responses, 1);
  for (const auto& s : prompts) p.add_prompt(s);
  return p;
}

TabularPolicy TabularPolicy::autoregressive(int vocab, int max_length,
                                            const std::vector<std::string>& prompts) {
  if (vocab < 2) throw std::invalid_argument("autoregressive policy needs vocab >= 2");
  if (max_length < 1) throw std::invalid_argument("autoregressive policy needs max length >= 1");
  TabularPolicy p(PolicyMode::Autoregressive, vocab, max_length);
  for (const auto& s : prompts) p.add_prompt(s);
  return p;
}

void TabularPolicy::add_prompt(const std::string& prompt) { prompts_.insert(prompt); }

LogitKey TabularPolicy::key(const std::string& prompt, std::span<const int> prefix) const {
  if (!has_prompt(prompt)) throw LookupError("unknown prompt '" + prompt + "'");
  if (mode_ == PolicyMode::Atomic && !prefix.empty()) {
    throw LookupError("atomic policies have no token prefixes");
  }
  if (prefix.size() >= static_cast<std::size_t>(max_length_) && mode_ != PolicyMode::Atomic) {
    throw LookupError("prefix longer than the policy's max length");
  }
  return {prompt, {prefix.begin(), prefix.end()}};
}

std::vector<double> TabularPolicy::row(const std::string& prompt,
                                       std::span<const int> prefix) const {
  const auto it = logits_.find(key(prompt, prefix));
  if (it == logits_.end()) return std::vector<double>(static_cast<std::size_t>(width_), 0.0);
  return it->second;
}

std::vector<double>& TabularPolicy::mutable_row(const std::string& prompt,
                                                std::span<const int> prefix) {
  auto [it, inserted] =
      logits_.try_emplace(key(prompt, prefix), static_cast<std::size_t>(width_), 0.0);
  return it->second;
}

std::vector<double> TabularPolicy::distribution(const std::string& prompt,
                                                std::span<const int> prefix) const {
  auto lp = log_softmax(row(prompt, prefix));
  for (double& v : lp) v = std::exp(v);
  return lp;
}

void TabularPolicy::apply_gradient(const LogitTable& grad, double lr) {
  for (const auto& [k, g] : grad) {
    if (g.size() != static_cast<std::size_t>(width_)) {
      throw std::invalid_argument("gradient row width does not match the policy");
    }
    auto& r = mutable_row(k.prompt, k.prefix);
    for (std::size_t j = 0; j < g.size(); ++j) r[j] -= lr * g[j];
  }
}

void TabularPolicy::check(const std::string& prompt, const Response& response) const {
  if (!has_prompt(prompt)) throw LookupError("unknown prompt '" + prompt + "'");
  if (mode_ == PolicyMode::Atomic) {
    if (response.size() != 1) throw LookupError("atomic responses are a single id");
  } else if (response.empty() || response.size() > static_cast<std::size_t>(max_length_)) {
    throw LookupError("response length must be in [1, " + std::to_string(max_length_) + "]");
  }
  for (int tok : response) {
    if (tok < 0 || tok >= width_) {
      throw LookupError("response token " + std::to_string(tok) + " outside [0, " +
                        std::to_string(width_) + ")");
    }
  }
}

TabularPolicy atomic_preset(int num_responses, int w, int l, double pi_w, double pi_l,
                            const std::vector<std::string>& prompts) {
  auto policy = TabularPolicy::atomic(num_responses, prompts);
  if (w == l || w < 0 || l < 0 || w >= num_responses || l >= num_responses) {
    throw std::invalid_argument("preset needs two distinct response ids in range");
  }
  if (!(pi_w > 0.0) || !(pi_l > 0.0)) throw std::invalid_argument("preset probabilities must be > 0");
  const double rest = 1.0 - pi_w - pi_l;
  double lw, ll;
  if (num_responses == 2) {
    if (std::abs(rest) > 1e-12) throw std::invalid_argument("with 2 responses pi_w + pi_l must be 1");
    lw = std::log(pi_w);
    ll = std::log(pi_l);
  } else {
    if (!(rest > 0.0)) throw std::invalid_argument("preset needs pi_w + pi_l < 1");
    // Other responses keep logit 0, each carrying rest / (K - 2).
    const double other = rest / (num_responses - 2);
    lw = std::log(pi_w / other);
    ll = std::log(pi_l / other);
  }
  for (const auto& prompt : prompts) {
    auto& r = policy.mutable_row(prompt);
    r[w] = lw;
    r[l] = ll;
  }
  return policy;
}

double response_log_prob(const TabularPolicy& policy, const std::string& prompt,
                         const Response& response) {
  policy.check(prompt, response);
  if (policy.mode() == PolicyMode::Atomic) {
    return log_softmax(policy.row(prompt))[response[0]];
  }
  double total = 0.0;
  for (std::size_t t = 0; t < response.size(); ++t) {
    total += log_softmax(policy.row(prompt, std::span<const int>(response.data(), t)))[response[t]];
  }
  return total;
}

double response_prob(const TabularPolicy& policy, const std::string& prompt,
                     const Response& response) {
  return std::exp(response_log_prob(policy, prompt, response));
}

void validate(const PreferenceTriple& triple, const TabularPolicy& policy) {
  policy.check(triple.prompt, triple.y_w);
  policy.check(triple.prompt, triple.y_l);
  if (triple.y_w == triple.y_l) throw std::invalid_argument("y_w and y_l must differ");
}

double policy_margin(const TabularPolicy& policy, const TabularPolicy& ref,
                     const PreferenceTriple& triple, const LossParams& params) {
  validate(triple, policy);
  validate(triple, ref);
  validate(params);
  const double log_x1 = response_log_prob(policy, triple.prompt, triple.y_w) -
                        response_log_prob(ref, triple.prompt, triple.y_w);
  const double log_x2 = response_log_prob(policy, triple.prompt, triple.y_l) -
                        response_log_prob(ref, triple.prompt, triple.y_l);
  return params.beta * (log_x1 - log_x2);
}

double dpo_policy_loss(const TabularPolicy& policy, const TabularPolicy& ref,
                       const PreferenceTriple& triple, const LossParams& params) {
  validate(triple, policy);
  validate(triple, ref);
  return dpo_loss_sigmoid_form(response_prob(policy, triple.prompt, triple.y_w),
                               response_prob(policy, triple.prompt, triple.y_l),
                               {response_prob(ref, triple.prompt, triple.y_w),
                                response_prob(ref, triple.prompt, triple.y_l)},
                               params);
}

LogitTable dpo_policy_gradient(const TabularPolicy& policy, const TabularPolicy& ref,
                               const PreferenceTriple& triple, const LossParams& params) {
  const double z = policy_margin(policy, ref, triple, params);
  // dL/dz = -sigmoid(-z); dz/dtheta = beta * (dlog pi_w - dlog pi_l).
  const double coef = -params.beta * detail::sigmoid(-z);
  LogitTable grad;
  accumulate_path(grad, policy, triple.prompt, triple.y_w, +1.0);
  accumulate_path(grad, policy, triple.prompt, triple.y_l, -1.0);
  for (auto& [key, row] : grad) {
    for (double& v : row) v *= coef;
  }
  return grad;
}

double dataset_loss(const TabularPolicy& policy, const TabularPolicy& ref,
                    std::span<const PreferenceTriple> data, const LossParams& params) {
  double total = 0.0;
  for (const auto& t : data) total += detail::softplus(-policy_margin(policy, ref, t, params));
  return total;
}

LogitTable dataset_gradient(const TabularPolicy& policy, const TabularPolicy& ref,
                            std::span<const PreferenceTriple> data, const LossParams& params) {
  if (data.size() == 1) return dpo_policy_gradient(policy, ref, data[0], params);
  LogitTable total;
  for (const auto& t : data) merge_into(total, dpo_policy_gradient(policy, ref, t, params));
  return total;
}

double gradient_norm(const LogitTable& grad) {
  double sq = 0.0;
  for (const auto& [key, row] : grad) {
    for (double v : row) sq += v * v;
  }
  return std::sqrt(sq);
}

double rest_mass(const TabularPolicy& policy, const PreferenceTriple& triple) {
  validate(triple, policy);
  if (policy.mode() == PolicyMode::Atomic) {
    const auto p = policy.distribution(triple.prompt);
    double rest = 0.0;
    for (int j = 0; j < policy.width(); ++j) {
      if (j != triple.y_w[0] && j != triple.y_l[0]) rest += p[j];
    }
    return rest;
  }
  const std::size_t n = triple.y_w.size();
  if (n != triple.y_l.size() || std::pow(policy.width(), n) > kMaxEnumeration) {
    return std::nan("");
  }
  double rest = 0.0;
  Response prefix;
  enumerate_paths(policy, triple.prompt, prefix, n, 0.0, triple, rest);
  return rest;
}

TrainingTrace train(TabularPolicy policy, const TabularPolicy& ref,
                    std::span<const PreferenceTriple> data, const TrainOptions& options,
                    const GradientFn& gradient) {
  if (data.empty()) throw std::invalid_argument("training needs at least one triple");
  if (options.tracked >= data.size()) throw std::invalid_argument("tracked triple out of range");
  if (!std::isfinite(options.lr) || options.lr < 0.0) {
    throw std::invalid_argument("learning rate must be finite and >= 0");
  }
  if (options.steps < 0) throw std::invalid_argument("steps must be >= 0");
  validate(options.params);
  for (const auto& t : data) {
    validate(t, policy);
    validate(t, ref);
  }

  const PreferenceTriple& tracked = data[options.tracked];
  const double ref_w = response_log_prob(ref, tracked.prompt, tracked.y_w);
  const double ref_l = response_log_prob(ref, tracked.prompt, tracked.y_l);

  TrainingTrace trace{options.params, options.lr, tracked, {}, policy};
  trace.records.reserve(static_cast<std::size_t>(options.steps) + 1);
  int rising = 0;
  for (int k = 0; k <= options.steps; ++k) {
    const LogitTable grad = gradient(policy, ref, data, options.params);

    TraceRecord r;
    r.step = k;
    const double log_pw = response_log_prob(policy, tracked.prompt, tracked.y_w);
    const double log_pl = response_log_prob(policy, tracked.prompt, tracked.y_l);
    r.pi_w = std::exp(log_pw);
    r.pi_l = std::exp(log_pl);
    r.x1 = std::exp(log_pw - ref_w);
    r.x2 = std::exp(log_pl - ref_l);
    r.margin = options.params.beta * ((log_pw - ref_w) - (log_pl - ref_l));
    r.loss = detail::softplus(-r.margin);
    r.objective = dataset_loss(policy, ref, data, options.params);
    r.rest_mass = rest_mass(policy, tracked);
    r.grad_norm = gradient_norm(grad);
    if (!trace.records.empty()) {
      const TraceRecord& prev = trace.records.back();
      r.d_pi_w = r.pi_w - prev.pi_w;
      r.d_pi_l = r.pi_l - prev.pi_l;
      rising = r.objective > prev.objective ? rising + 1 : 0;
      if (rising >= options.divergence_patience) {
        throw TrainingDiverged("objective rose for " + std::to_string(rising) +
                               " consecutive steps (step " + std::to_string(k) + ")");
      }
    }
    trace.records.push_back(r);
    if (k < options.steps) policy.apply_gradient(grad, options.lr);
  }
  trace.final_policy = std::move(policy);
  return trace;
}

RateAsymmetryReport rate_asymmetry_report(const TrainingTrace& trace) {
  if (trace.records.size() < 2) {
    throw std::invalid_argument("rate asymmetry needs a trace with at least 2 records");
  }
  RateAsymmetryReport rep;
  rep.slack = trace.lr * trace.lr;
  rep.degenerate = true;
  double gain = 0.0;
  double loss = 0.0;
  std::size_t faster = 0;
  for (std::size_t k = 1; k < trace.records.size(); ++k) {
    const TraceRecord& a = trace.records[k - 1];
    const TraceRecord& b = trace.records[k];
    RateStep s;
    s.step = b.step;
    s.d_pi_w = b.pi_w - a.pi_w;
    s.d_pi_l = b.pi_l - a.pi_l;
    s.dlog_x1 = std::log(b.x1) - std::log(a.x1);
    s.dlog_x2 = std::log(b.x2) - std::log(a.x2);
    s.x2_below_x1 = a.x2 < a.x1;
    s.dispreferred_faster = std::abs(s.dlog_x2) > std::abs(s.dlog_x1);
    if (s.d_pi_w != 0.0 || s.d_pi_l != 0.0 || s.dlog_x1 != 0.0 || s.dlog_x2 != 0.0) {
      rep.degenerate = false;
    }
    if (s.dispreferred_faster) ++faster;
    if (s.x2_below_x1 && std::abs(s.dlog_x2) < s.dlog_x1 - rep.slack) rep.violations.push_back(s.step);
    gain += s.d_pi_w;
    loss += -s.d_pi_l;
    rep.cumulative_pi_w_gain.push_back(gain);
    rep.cumulative_pi_l_loss.push_back(loss);
    rep.steps.push_back(s);
  }
  rep.fraction_dispreferred_faster =
      static_cast<double>(faster) / static_cast<double>(rep.steps.size());
  return rep;
}

Table trace_table(const TrainingTrace& trace) {
  Table t;
  t.header = {"step",   "loss",      "pi_w",      "pi_l",   "x1",    "x2",
              "margin", "rest_mass", "grad_norm", "d_pi_w", "d_pi_l"};
  t.rows.reserve(trace.records.size());
  for (const auto& r : trace.records) {
    t.rows.push_back({static_cast<std::int64_t>(r.step), r.loss, r.pi_w, r.pi_l, r.x1, r.x2,
                      r.margin, r.rest_mass, r.grad_norm, r.d_pi_w, r.d_pi_l});
  }
  return t;
}

Table rate_table(const RateAsymmetryReport& report) {
  Table t;
  t.header = {"step",    "d_pi_w",        "d_pi_l",       "dlog_x1",
              "dlog_x2", "cum_pi_w_gain", "cum_pi_l_loss"};
  for (std::size_t i = 0; i < report.steps.size(); ++i) {
    const auto& s = report.steps[i];
    t.rows.push_back({static_cast<std::int64_t>(s.step), s.d_pi_w, s.d_pi_l, s.dlog_x1, s.dlog_x2,
                      report.cumulative_pi_w_gain[i], report.cumulative_pi_l_loss[i]});
  }
  return t;
}

std::vector<PreferenceTriple> parse_dataset(std::istream& in) {
  std::vector<PreferenceTriple> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw std::invalid_argument("dataset line " + std::to_string(lineno) + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("prompt") || !j.contains("y_w") || !j.contains("y_l") ||
        !j["prompt"].is_string()) {
      throw std::invalid_argument("dataset line " + std::to_string(lineno) +
                                  ": expected {\"prompt\": str, \"y_w\": ..., \"y_l\": ...}");
    }
    out.push_back({j["prompt"].get<std::string>(), parse_response(j["y_w"], lineno),
                   parse_response(j["y_l"], lineno)});
  }
  return out;
}

std::vector<PreferenceTriple> read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path, "cannot open dataset");
  return parse_dataset(in);
}

}  // namespace dpofield
