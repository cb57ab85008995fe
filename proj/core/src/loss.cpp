#include "dpofield/loss.hpp"

#include <cmath>

#include "numeric.hpp"

namespace dpofield {

namespace {

void require_probability(double v, const char* name) {
  if (!std::isfinite(v) || v < kDomainFloor || v > 1.0) {
    throw DomainError(std::string(name) + " must lie in [" + std::to_string(kDomainFloor) +
                      ", 1], got " + std::to_string(v));
  }
}

}  // namespace

double GradientVec::norm() const { return std::hypot(d_x1, d_x2); }

std::string to_string(Dominance d) {
  switch (d) {
    case Dominance::X2Dominant:
      return "X2Dominant";
    case Dominance::X1Dominant:
      return "X1Dominant";
    case Dominance::Balanced:
      return "Balanced";
  }
  return "?";
}

void validate(const RatioPoint& p) {
  if (!std::isfinite(p.x1) || p.x1 < kDomainFloor) {
    throw DomainError("x1 must be finite and >= " + std::to_string(kDomainFloor) + ", got " +
                      std::to_string(p.x1));
  }
  if (!std::isfinite(p.x2) || p.x2 < kDomainFloor) {
    throw DomainError("x2 must be finite and >= " + std::to_string(kDomainFloor) + ", got " +
                      std::to_string(p.x2));
  }
}

void validate(const LossParams& params) {
  if (!std::isfinite(params.beta) || params.beta <= 0.0) {
    throw DomainError("beta must be finite and > 0, got " + std::to_string(params.beta));
  }
}

void validate(const ReferencePair& refs) {
  require_probability(refs.ref_w, "ref_w");
  require_probability(refs.ref_l, "ref_l");
}

double dpo_loss(const RatioPoint& p, const LossParams& params) {
  validate(p);
  validate(params);
  const double margin = params.beta * (std::log(p.x1) - std::log(p.x2));
  return detail::softplus(-margin);
}

double dpo_loss_sigmoid_form(double pi_w, double pi_l, const ReferencePair& refs,
                             const LossParams& params) {
  require_probability(pi_w, "pi_w");
  require_probability(pi_l, "pi_l");
  validate(refs);
  validate(params);
  const double z = params.beta * (std::log(pi_w) - std::log(refs.ref_w)) -
                   params.beta * (std::log(pi_l) - std::log(refs.ref_l));
  return detail::softplus(-z);
}

GradientVec dpo_gradient(const RatioPoint& p, const LossParams& params) {
  validate(p);
  validate(params);
  // s = x2^b / (x1^b + x2^b); both partials share the factor b*s.
  const double s = detail::sigmoid(params.beta * (std::log(p.x2) - std::log(p.x1)));
  const double scale = params.beta * s;
  GradientVec g;
  g.d_x1 = -scale / p.x1;
  g.d_x2 = scale / p.x2;
  g.singular = std::abs(g.d_x2) > kGradientGuard;
  return g;
}

GradientVec finite_diff_gradient(const RatioPoint& p, const LossParams& params, double h) {
  validate(p);
  validate(params);
  if (!std::isfinite(h) || h <= 0.0) {
    throw DomainError("finite-difference step must be > 0, got " + std::to_string(h));
  }
  if (p.x1 - h < kDomainFloor || p.x2 - h < kDomainFloor) {
    throw DomainError("finite-difference stencil leaves the domain");
  }
  GradientVec g;
  g.d_x1 = (dpo_loss({p.x1 + h, p.x2}, params) - dpo_loss({p.x1 - h, p.x2}, params)) / (2 * h);
  g.d_x2 = (dpo_loss({p.x1, p.x2 + h}, params) - dpo_loss({p.x1, p.x2 - h}, params)) / (2 * h);
  g.singular = std::abs(g.d_x2) > kGradientGuard;
  return g;
}

double update_rate(const RatioPoint& p) {
  validate(p);
  return p.x2 / p.x1;
}

Dominance dominance(const RatioPoint& p, double tol) {
  if (!(tol >= 0.0)) throw DomainError("dominance tolerance must be >= 0");
  const double r = update_rate(p);
  if (r < 1.0 - tol) return Dominance::X2Dominant;
  if (r > 1.0 + tol) return Dominance::X1Dominant;
  return Dominance::Balanced;
}

}  // namespace dpofield
