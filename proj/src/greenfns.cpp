#include "bubblelab/greenfns.hpp"

#include <cmath>
#include <numbers>

#include "bubblelab/errors.hpp"
#include "bubblelab/liouville.hpp"

namespace bubblelab::greenfns {

using std::numbers::pi;

double norm(const Point& x) { return std::hypot(x[0], x[1]); }

namespace {

double distance(const Point& x, const Point& y) { return std::hypot(x[0] - y[0], x[1] - y[1]); }

void check_domain(const Point& x, const Point& y) {
  if (!(norm(x) <= 1.0 + 1e-14)) throw DomainError("green: |x| must be <= 1");
  if (!(norm(y) < 1.0)) throw DomainError("green: |y| must be < 1");
}

// |y| |x - y*| with y* = y / |y|^2, written without forming y* so that it stays
// accurate for small |y|:  |y|^2 |x|^2 - 2 x.y + 1.
double image_distance(const Point& x, const Point& y) {
  const double xy = x[0] * y[0] + x[1] * y[1];
  const double yy = y[0] * y[0] + y[1] * y[1];
  const double xx = x[0] * x[0] + x[1] * x[1];
  return std::sqrt(std::max(0.0, yy * xx - 2.0 * xy + 1.0));
}

}  // namespace

double green_disk(const Point& x, const Point& y) {
  check_domain(x, y);
  const double d = distance(x, y);
  if (d == 0.0) throw DomainError("green: x and y coincide (logarithmic singularity)");
  if (norm(x) >= 1.0) return 0.0;
  return std::log(image_distance(x, y) / d) / (2.0 * pi);
}

double regular_part(const Point& x, const Point& y) {
  check_domain(x, y);
  // G + log|x-y|/2pi = log(|y||x - y*|)/2pi; on the diagonal this is log(1-|y|^2)/2pi.
  return std::log(image_distance(x, y)) / (2.0 * pi);
}

std::string to_string(HstarKind kind) {
  switch (kind) {
    case HstarKind::constant: return "constant";
    case HstarKind::gaussian: return "gaussian";
    case HstarKind::polynomial: return "polynomial";
  }
  return "unknown";
}

HstarKind hstar_kind_from_string(const std::string& name) {
  if (name == "constant") return HstarKind::constant;
  if (name == "gaussian") return HstarKind::gaussian;
  if (name == "polynomial") return HstarKind::polynomial;
  throw DomainError("unknown hstar kind '" + name + "'");
}

WeightSpec WeightSpec::constant_spec(double alpha, double c) {
  WeightSpec s;
  s.alpha = alpha;
  s.kind = HstarKind::constant;
  s.c = c;
  s.validate();
  return s;
}

WeightSpec WeightSpec::gaussian_spec(double alpha, double beta) {
  WeightSpec s;
  s.alpha = alpha;
  s.kind = HstarKind::gaussian;
  s.beta = beta;
  s.validate();
  return s;
}

WeightSpec WeightSpec::polynomial_spec(double alpha, std::vector<double> coefficients) {
  WeightSpec s;
  s.alpha = alpha;
  s.kind = HstarKind::polynomial;
  s.coefficients = std::move(coefficients);
  s.validate();
  return s;
}

void WeightSpec::validate() const {
  liouville::validate_alpha(alpha);
  if (kind == HstarKind::polynomial && coefficients.empty())
    throw DomainError("hstar: polynomial needs at least one coefficient");
  if (kind == HstarKind::gaussian && !std::isfinite(beta))
    throw DomainError("hstar: beta must be finite");
  for (int i = 0; i <= 1000; ++i) {
    const double v = hstar(i / 1000.0);
    if (!(v > 0.0) || !std::isfinite(v))
      throw DomainError("hstar must be positive on the closed disk");
  }
}

double WeightSpec::hstar(double r) const {
  switch (kind) {
    case HstarKind::constant: return c;
    case HstarKind::gaussian: return std::exp(beta * r * r);
    case HstarKind::polynomial: {
      const double q = r * r;
      double v = 0.0;
      for (auto it = coefficients.rbegin(); it != coefficients.rend(); ++it) v = v * q + *it;
      return v;
    }
  }
  return 0.0;
}

double WeightSpec::log_hstar(double r) const {
  if (kind == HstarKind::gaussian) return beta * r * r;
  return std::log(hstar(r));
}

double WeightSpec::dlog_hstar_dr(double r) const {
  switch (kind) {
    case HstarKind::constant: return 0.0;
    case HstarKind::gaussian: return 2.0 * beta * r;
    case HstarKind::polynomial: {
      const double q = r * r;
      double v = 0.0, dv = 0.0;  // value and d/dq
      for (auto it = coefficients.rbegin(); it != coefficients.rend(); ++it) {
        dv = dv * q + v;
        v = v * q + *it;
      }
      return 2.0 * r * dv / v;
    }
  }
  return 0.0;
}

double WeightSpec::lap_log_hstar_at_origin() const {
  switch (kind) {
    case HstarKind::constant: return 0.0;
    case HstarKind::gaussian: return 4.0 * beta;
    case HstarKind::polynomial:
      return coefficients.size() > 1 ? 4.0 * coefficients[1] / coefficients[0] : 0.0;
  }
  return 0.0;
}

double assemble_weight(const WeightSpec& spec, const Point& x) {
  const double r = norm(x);
  if (r == 0.0) return 0.0;
  return spec.hstar(r) * std::exp(-4.0 * pi * spec.alpha * green_disk(x, {0.0, 0.0}));
}

double hbar1(const WeightSpec& spec, const Point& x) {
  return spec.hstar(norm(x)) * std::exp(-4.0 * pi * spec.alpha * regular_part(x, {0.0, 0.0}));
}

double hamiltonian_Hp(const WeightSpec& spec, const Point& x) {
  const Point origin{0.0, 0.0};
  if (!(norm(x) < 1.0)) throw DomainError("hamiltonian: |x| must be < 1");
  const double regular = regular_part(x, origin) - regular_part(origin, origin);
  const double weight = std::log(hbar1(spec, x)) - std::log(hbar1(spec, origin));
  return 8.0 * pi * (1.0 + spec.alpha) * regular + weight;
}

double ell_coefficient(double alpha, double hbar1_at_p, double lap_log_hstar_at_p) {
  liouville::validate_alpha(alpha);
  if (!(hbar1_at_p > 0.0)) throw DomainError("ell: hbar1(p) must be positive");
  const double a1 = 1.0 + alpha;
  const double prefactor = 2.0 * pi * pi / (a1 * std::sin(pi / a1));
  return prefactor * std::pow(a1 / (pi * hbar1_at_p), 1.0 / a1) * lap_log_hstar_at_p;
}

double ell_coefficient(const WeightSpec& spec) {
  return ell_coefficient(spec.alpha, hbar1(spec, {0.0, 0.0}), spec.lap_log_hstar_at_origin());
}

double epsilon0(double alpha) {
  // Plain piecewise formula; integers are allowed so continuity at 1 can be checked.
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw DomainError("alpha must be positive");
  return 2.0 - 2.0 * std::max(0.0, 1.0 - alpha);
}

}  // namespace bubblelab::greenfns
