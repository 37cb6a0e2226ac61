#pragma once

// Singular Liouville bubbles v_mu on the plane, their radial kernel element
// Y0, masses, and the entire-plane linearized operator.

#include <span>
#include <vector>

namespace bubblelab::liouville {

/// Throws DomainError unless alpha > 0 and alpha is at least 1e-12 away from
/// every positive integer.
void validate_alpha(double alpha);

/// Closed-form bubble with strength alpha and scale mu.
class BubbleProfile {
 public:
  BubbleProfile(double alpha, double mu);

  double alpha() const noexcept { return alpha_; }
  double mu() const noexcept { return mu_; }

  /// v_mu(r) = log(8(1+a)^2 e^mu) - 2 log(1 + e^mu r^(2(1+a))).
  double operator()(double r) const;
  /// Mass of |z|^{2a} e^{v_mu} over the disk of radius R (R may be +inf).
  double mass(double R) const;

 private:
  double alpha_;
  double mu_;
};

double bubble_profile(double alpha, double mu, double r);
double bubble_mass(double alpha, double mu, double R);

/// Y0(r) = (1 - r^(2(1+a))) / (1 + r^(2(1+a))).
double kernel_Y0(double alpha, double r);

/// 8(1+a)^2 r^{2a} / (1 + r^{2(1+a)})^2, the potential of the entire operator.
double entire_potential(double alpha, double r);

struct LinearizedApplyResult {
  std::vector<double> values;
  double error_estimate = 0.0;   // max |L4 - L6| between stencil orders
  bool accuracy_warning = false;
};

/// Discrete L phi = Laplacian(phi) + entire_potential * phi for radial samples
/// on a strictly increasing positive mesh. Derivatives are taken in t = r^(1+a)
/// with sixth-order Fornberg stencils; the fourth-order result provides the
/// error estimate that drives the accuracy warning.
LinearizedApplyResult entire_linearized_apply(double alpha, std::span<const double> phi,
                                              std::span<const double> radii,
                                              double warning_tolerance = 1e-6);

}  // namespace bubblelab::liouville
