#pragma once

// Tabular softmax policies trained with the full DPO objective.
//
// Atomic policies hold one logit row per prompt (one logit per response id).
// Autoregressive policies hold one row per (prompt, token prefix); a response
// is a token path and its probability is the product of the per-position
// conditionals. Rows that were never written are all-zero (uniform).

#include <compare>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dpofield/loss.hpp"
#include "dpofield/table.hpp"

namespace dpofield {

enum class PolicyMode { Atomic, Autoregressive };

std::string to_string(PolicyMode m);
PolicyMode parse_policy_mode(const std::string& name);

/// Token path (Autoregressive) or a single response id (Atomic).
using Response = std::vector<int>;

struct PreferenceTriple {
  std::string prompt;
  Response y_w;
  Response y_l;
};

struct LogitKey {
  std::string prompt;
  std::vector<int> prefix;

  auto operator<=>(const LogitKey&) const = default;
  bool operator==(const LogitKey&) const = default;
};

using LogitTable = std::map<LogitKey, std::vector<double>>;

class LookupError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

class TabularPolicy {
 public:
  static TabularPolicy atomic(int num_responses, const std::vector<std::string>& prompts);
  static TabularPolicy autoregressive(int vocab, int max_length,
                                      const std::vector<std::string>& prompts);

  PolicyMode mode() const { return mode_; }
  /// Responses per prompt (Atomic) or vocabulary size (Autoregressive).
  int width() const { return width_; }
  int max_length() const { return max_length_; }
  const std::set<std::string>& prompts() const { return prompts_; }
  const LogitTable& logits() const { return logits_; }

  void add_prompt(const std::string& prompt);
  bool has_prompt(const std::string& prompt) const { return prompts_.contains(prompt); }

  /// Logit row for (prompt, prefix); zeros when never written.
  std::vector<double> row(const std::string& prompt, std::span<const int> prefix = {}) const;
  std::vector<double>& mutable_row(const std::string& prompt, std::span<const int> prefix = {});
  std::vector<double> distribution(const std::string& prompt,
                                   std::span<const int> prefix = {}) const;

  /// logits -= lr * grad, row by row.
  void apply_gradient(const LogitTable& grad, double lr);

  /// Throws LookupError if the prompt is unknown or the response is not in the universe.
  void check(const std::string& prompt, const Response& response) const;

 private:
  TabularPolicy(PolicyMode mode, int width, int max_length);
  LogitKey key(const std::string& prompt, std::span<const int> prefix) const;

  PolicyMode mode_;
  int width_;
  int max_length_;
  std::set<std::string> prompts_;
  LogitTable logits_;
};

/// Atomic policy whose response `w` has probability pi_w and `l` has pi_l; the
/// remaining mass is spread uniformly over the other responses.
TabularPolicy atomic_preset(int num_responses, int w, int l, double pi_w, double pi_l,
                            const std::vector<std::string>& prompts);

double response_log_prob(const TabularPolicy& policy, const std::string& prompt,
                         const Response& response);
double response_prob(const TabularPolicy& policy, const std::string& prompt,
                     const Response& response);

void validate(const PreferenceTriple& triple, const TabularPolicy& policy);

/// beta * (log x1 - log x2) for the triple.
double policy_margin(const TabularPolicy& policy, const TabularPolicy& ref,
                     const PreferenceTriple& triple, const LossParams& params);

double dpo_policy_loss(const TabularPolicy& policy, const TabularPolicy& ref,
                       const PreferenceTriple& triple, const LossParams& params);

/// Analytic dL/dlogits. Only rows on the y_w / y_l paths appear. Rows shared by
/// both paths up to and including the same next token are exactly zero.
LogitTable dpo_policy_gradient(const TabularPolicy& policy, const TabularPolicy& ref,
                               const PreferenceTriple& triple, const LossParams& params);

/// Summed loss and gradient over a dataset.
double dataset_loss(const TabularPolicy& policy, const TabularPolicy& ref,
                    std::span<const PreferenceTriple> data, const LossParams& params);
LogitTable dataset_gradient(const TabularPolicy& policy, const TabularPolicy& ref,
                            std::span<const PreferenceTriple> data, const LossParams& params);

double gradient_norm(const LogitTable& grad);

using GradientFn = std::function<LogitTable(const TabularPolicy&, const TabularPolicy&,
                                            std::span<const PreferenceTriple>, const LossParams&)>;

struct TrainOptions {
  double lr = 0.1;
  int steps = 0;
  LossParams params;
  /// Which triple the per-step probability columns describe.
  std::size_t tracked = 0;
  /// Abort once the objective has risen this many steps in a row.
  int divergence_patience = 10;
};

struct TraceRecord {
  int step = 0;
  double loss = 0.0;       // tracked triple
  double objective = 0.0;  // summed over the dataset
  double pi_w = 0.0;
  double pi_l = 0.0;
  double x1 = 0.0;
  double x2 = 0.0;
  double margin = 0.0;
  double rest_mass = 0.0;
  double grad_norm = 0.0;  // of the objective gradient at this step's parameters
  double d_pi_w = 0.0;
  double d_pi_l = 0.0;
};

struct TrainingTrace {
  LossParams params;
  double lr = 0.0;
  PreferenceTriple tracked;
  std::vector<TraceRecord> records;
  TabularPolicy final_policy;
};

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Full-batch gradient descent. Record k describes the parameters after k
/// updates; steps = 0 yields only the initial record.
TrainingTrace train(TabularPolicy policy, const TabularPolicy& ref,
                    std::span<const PreferenceTriple> data, const TrainOptions& options,
                    const GradientFn& gradient = dataset_gradient);

/// Probability of every response other than y_w and y_l. Autoregressive mode
/// enumerates same-length paths; NaN when |y_w| != |y_l| or the space is too large.
double rest_mass(const TabularPolicy& policy, const PreferenceTriple& triple);

struct RateStep {
  int step = 0;  // index of the record after the update
  double d_pi_w = 0.0;
  double d_pi_l = 0.0;
  double dlog_x1 = 0.0;
  double dlog_x2 = 0.0;
  bool x2_below_x1 = false;  // before the update
  bool dispreferred_faster = false;
};

struct RateAsymmetryReport {
  std::vector<RateStep> steps;
  std::vector<double> cumulative_pi_w_gain;
  std::vector<double> cumulative_pi_l_loss;
  double fraction_dispreferred_faster = 0.0;
  double slack = 0.0;  // lr^2
  bool degenerate = false;
  /// Steps with x2 < x1 where |dlog x2| < dlog x1 - slack.
  std::vector<int> violations;
};

RateAsymmetryReport rate_asymmetry_report(const TrainingTrace& trace);

// Header: step,loss,pi_w,pi_l,x1,x2,margin,rest_mass,grad_norm,d_pi_w,d_pi_l
Table trace_table(const TrainingTrace& trace);
// Header: step,d_pi_w,d_pi_l,dlog_x1,dlog_x2,cum_pi_w_gain,cum_pi_l_loss
Table rate_table(const RateAsymmetryReport& report);

/// One JSON object per line: {"prompt": str, "y_w": int | [int], "y_l": int | [int]}.
std::vector<PreferenceTriple> parse_dataset(std::istream& in);
std::vector<PreferenceTriple> read_dataset(const std::filesystem::path& path);

}  // namespace dpofield
