#include "bubblelab/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "bubblelab/errors.hpp"
#include "bubblelab/liouville.hpp"
#include "bubblelab/numerics.hpp"

namespace bubblelab {

namespace {

constexpr double kLinearGrading = 1e-8;

double log_sinh(double x) { return x + std::log1p(-std::exp(-2.0 * x)) - std::log(2.0); }

// Grading a > 0 with sinh(a s_c) / sinh(a) = tau, for tau < s_c.
double solve_grading(double tau, double s_c) {
  if (tau >= s_c) return 0.0;
  const double target = std::log(tau);
  double lo = 0.0, hi = 1.0;
  auto log_ratio = [&](double a) { return log_sinh(a * s_c) - log_sinh(a); };
  while (log_ratio(hi) > target) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e4) throw DomainError("mesh: core scale too small to grade");
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= kLinearGrading) {
      lo = mid;
      continue;
    }
    (log_ratio(mid) > target ? lo : hi) = mid;
    if (hi - lo < 1e-14 * hi) break;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

RadialMesh::RadialMesh(double alpha, int elements, int degree, double grading, double radius)
    : alpha_(alpha), radius_(radius), grading_(grading), elements_(elements), degree_(degree) {
  liouville::validate_alpha(alpha);
  if (elements < 1 || degree < 1) throw PreconditionError("mesh: need elements >= 1, degree >= 1");
  if (!(grading >= 0.0) || !std::isfinite(grading)) throw PreconditionError("mesh: bad grading");
  if (!(radius > 0.0)) throw PreconditionError("mesh: radius must be positive");
  t_max_ = std::pow(radius, 1.0 + alpha);
  sinh_a_ = grading_ > kLinearGrading ? std::sinh(grading_) : 0.0;

  const auto gll = numerics::gauss_lobatto(degree);
  ref_nodes_ = gll.nodes;
  ref_weights_ = gll.weights;
  ref_bary_ = numerics::barycentric_weights(ref_nodes_);
  ref_diff_ = numerics::differentiation_matrix(ref_nodes_);

  const int p = degree_;
  const int n = elements_ * p + 1;
  const double h = 1.0 / elements_;
  s_.resize(n);
  t_.resize(n);
  r_.resize(n);
  gprime_.resize(n);
  for (int e = 0; e < elements_; ++e)
    for (int a = 0; a <= p; ++a) s_[e * p + a] = (e + 0.5 * (ref_nodes_[a] + 1.0)) * h;
  s_.front() = 0.0;
  s_.back() = 1.0;
  for (int i = 0; i < n; ++i) {
    t_[i] = t_of_s(s_[i]);
    gprime_[i] = dt_ds(s_[i]);
  }
  t_.back() = t_max_;
  for (int i = 0; i < n; ++i) r_[i] = r_of_t(t_[i]);
  r_.back() = radius_;

  mass_.assign(n, 0.0);
  inv_mass_.assign(n, 0.0);
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(elements_) * (p + 1) * (p + 1));
  const double jac = 0.5 * h;  // ds / dxi
  for (int e = 0; e < elements_; ++e) {
    const int base = e * p;
    for (int a = 0; a <= p; ++a) {
      const int i = base + a;
      const double w = ref_weights_[a] * jac;
      mass_[i] += w * t_[i] * gprime_[i];
      if (t_[i] > 0.0) inv_mass_[i] += w * gprime_[i] / t_[i];
    }
    // K_ab = sum_q w_q jac (t / g')(q) (D_qa / jac)(D_qb / jac)
    for (int a = 0; a <= p; ++a) {
      for (int b = 0; b <= p; ++b) {
        double v = 0.0;
        for (int q = 0; q <= p; ++q) {
          const int iq = base + q;
          v += ref_weights_[q] * (t_[iq] / gprime_[iq]) * ref_diff_[q * (p + 1) + a] *
               ref_diff_[q * (p + 1) + b];
        }
        triplets.emplace_back(base + a, base + b, v / jac);
      }
    }
  }
  stiffness_.resize(n, n);
  stiffness_.setFromTriplets(triplets.begin(), triplets.end());
  stiffness_.makeCompressed();
}

RadialMesh RadialMesh::graded(double alpha, const MeshPolicy& policy, double t_core,
                              double radius) {
  if (policy.nodes < 2) throw PreconditionError("mesh: node count too small");
  if (!(policy.core_fraction > 0.0 && policy.core_fraction < 1.0))
    throw PreconditionError("mesh: core_fraction must lie in (0, 1)");
  const int p = policy.degree;
  const int elements = std::max(1, (policy.nodes - 1 + p - 1) / p);
  const double t_max = std::pow(radius, 1.0 + alpha);
  const double a = solve_grading(t_core / t_max, policy.core_fraction);
  return RadialMesh(alpha, elements, p, a, radius);
}

RadialMesh RadialMesh::for_lambda(double alpha, const MeshPolicy& policy, double lambda,
                                  double hbar1_at_origin) {
  const double gamma_bar = std::numbers::pi * hbar1_at_origin / (1.0 + alpha);
  const double t_core = std::exp(-0.5 * lambda) / std::sqrt(gamma_bar);
  return graded(alpha, policy, t_core, 1.0);
}

double RadialMesh::t_of_s(double s) const {
  if (sinh_a_ == 0.0) return t_max_ * s;
  return t_max_ * std::sinh(grading_ * s) / sinh_a_;
}

double RadialMesh::dt_ds(double s) const {
  if (sinh_a_ == 0.0) return t_max_;
  return t_max_ * grading_ * std::cosh(grading_ * s) / sinh_a_;
}

double RadialMesh::s_of_t(double t) const {
  if (sinh_a_ == 0.0) return t / t_max_;
  return std::asinh(t * sinh_a_ / t_max_) / grading_;
}

double RadialMesh::t_of_r(double r) const { return std::pow(r, 1.0 + alpha_); }

double RadialMesh::r_of_t(double t) const { return std::pow(t, 1.0 / (1.0 + alpha_)); }

int RadialMesh::locate(double s) const {
  return std::clamp(static_cast<int>(std::floor(s * elements_)), 0, elements_ - 1);
}

RadialMesh::Sample RadialMesh::evaluate(std::span<const double> values, double r) const {
  if (static_cast<int>(values.size()) != size())
    throw PreconditionError("mesh: value vector has the wrong size");
  if (!(r >= 0.0) || r > radius_ * (1.0 + 1e-14))
    throw DomainError("mesh: radius outside the mesh");
  const double t = std::min(t_of_r(r), t_max_);
  const double s = std::clamp(s_of_t(t), 0.0, 1.0);
  const int e = locate(s);
  const double xi = std::clamp(2.0 * (s * elements_ - e) - 1.0, -1.0, 1.0);
  const auto local = values.subspan(static_cast<std::size_t>(e) * degree_, degree_ + 1);
  const auto iv = numerics::barycentric_eval(ref_nodes_, ref_bary_, local, xi);
  const double d_ds = iv.derivative * 2.0 * elements_;
  const double d_dt = d_ds / dt_ds(s);
  const double d_dr = r > 0.0 ? d_dt * (1.0 + alpha_) * std::pow(r, alpha_) : 0.0;
  return {iv.value, d_dr, d_dt};
}

std::vector<double> RadialMesh::derivative_r(std::span<const double> values) const {
  if (static_cast<int>(values.size()) != size())
    throw PreconditionError("mesh: value vector has the wrong size");
  const int p = degree_;
  std::vector<double> out(size(), 0.0), count(size(), 0.0);
  for (int e = 0; e < elements_; ++e) {
    const int base = e * p;
    for (int a = 0; a <= p; ++a) {
      double d = 0.0;
      for (int b = 0; b <= p; ++b) d += ref_diff_[a * (p + 1) + b] * values[base + b];
      out[base + a] += d * 2.0 * elements_;
      count[base + a] += 1.0;
    }
  }
  for (int i = 0; i < size(); ++i) {
    const double d_dt = out[i] / count[i] / gprime_[i];
    out[i] = r_[i] > 0.0 ? d_dt * (1.0 + alpha_) * std::pow(r_[i], alpha_) : 0.0;
  }
  return out;
}

double RadialMesh::integrate_density(const std::function<double(double)>& f, double R) const {
  if (!(R >= 0.0) || R > radius_ * (1.0 + 1e-14))
    throw DomainError("mesh: integration radius outside the mesh");
  if (R == 0.0) return 0.0;
  const double s_end = std::min(1.0, s_of_t(std::min(t_of_r(R), t_max_)));
  const auto gl = numerics::gauss_legendre(degree_ + 4);
  double total = 0.0;
  for (int e = 0; e < elements_; ++e) {
    const double s0 = static_cast<double>(e) / elements_;
    if (s0 >= s_end) break;
    const double s1 = std::min(static_cast<double>(e + 1) / elements_, s_end);
    const double half = 0.5 * (s1 - s0);
    for (std::size_t q = 0; q < gl.nodes.size(); ++q) {
      const double s = s0 + half * (gl.nodes[q] + 1.0);
      const double t = t_of_s(s);
      total += gl.weights[q] * half * f(r_of_t(t)) * t * dt_ds(s);
    }
  }
  return 2.0 * std::numbers::pi / (1.0 + alpha_) * total;
}

double RadialMesh::lumped_density_integral(std::span<const double> f) const {
  if (static_cast<int>(f.size()) != size())
    throw PreconditionError("mesh: value vector has the wrong size");
  double total = 0.0;
  for (int i = 0; i < size(); ++i) total += mass_[i] * f[i];
  return 2.0 * std::numbers::pi / (1.0 + alpha_) * total;
}

}  // namespace bubblelab
