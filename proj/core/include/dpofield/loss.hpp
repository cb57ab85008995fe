#pragma once

// DPO loss and its gradient in probability-ratio coordinates.
//
//   x1 = pi_theta(y_w|x) / pi_ref(y_w|x)
//   x2 = pi_theta(y_l|x) / pi_ref(y_l|x)
//   L(x1, x2) = -log(x1^b / (x1^b + x2^b))
//
// Everything here is a pure function of its arguments.

#include <stdexcept>
#include <string>

namespace dpofield {

/// Smallest admissible ratio or probability. Inputs below it are rejected.
inline constexpr double kDomainFloor = 1e-8;

/// Gradients whose x2 component exceeds this are flagged as singular.
inline constexpr double kGradientGuard = 1.0 / kDomainFloor;

inline constexpr double kDefaultBeta = 0.1;
inline constexpr double kDefaultDominanceTol = 1e-9;

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

struct RatioPoint {
  double x1 = 1.0;
  double x2 = 1.0;

  friend bool operator==(const RatioPoint&, const RatioPoint&) = default;
};

struct LossParams {
  double beta = kDefaultBeta;
};

struct GradientVec {
  double d_x1 = 0.0;
  double d_x2 = 0.0;
  // |d_x2| exceeded kGradientGuard; the values are still finite.
  bool singular = false;

  double norm() const;
};

struct ReferencePair {
  double ref_w = 1.0;
  double ref_l = 1.0;
};

enum class Dominance { X2Dominant, X1Dominant, Balanced };

std::string to_string(Dominance d);

// Throw DomainError when the argument is outside the valid domain.
void validate(const RatioPoint& p);
void validate(const LossParams& params);
void validate(const ReferencePair& refs);

/// Evaluated as softplus(b*log x2 - b*log x1), which never overflows.
double dpo_loss(const RatioPoint& p, const LossParams& params);

/// -log sigmoid(b*log(pi_w/ref_w) - b*log(pi_l/ref_l)).
double dpo_loss_sigmoid_form(double pi_w, double pi_l, const ReferencePair& refs,
                             const LossParams& params);

/// Closed-form partials:
///   dL/dx1 = -b * x2^b / (x1 * (x1^b + x2^b))
///   dL/dx2 =  b * x2^(b-1) / (x1^b + x2^b)
GradientVec dpo_gradient(const RatioPoint& p, const LossParams& params);

/// Central-difference gradient of dpo_loss with step h in each coordinate.
/// Throws DomainError when the stencil would leave the domain.
GradientVec finite_diff_gradient(const RatioPoint& p, const LossParams& params, double h);

/// x2 / x1, equal to |dL/dx1 / dL/dx2| for every beta.
double update_rate(const RatioPoint& p);

Dominance dominance(const RatioPoint& p, double tol = kDefaultDominanceTol);

}  // namespace dpofield
