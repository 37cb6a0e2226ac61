#pragma once

// Post-processing along a branch: rate-law fits, the matching identity, the
// outer profile, Pohozaev residuals and the monotonicity surrogate for
// uniqueness. Everything here is a pure function of converged data.

#include <functional>
#include <string>
#include <vector>

#include "bubblelab/radial_solver.hpp"

namespace bubblelab::diagnostics {

struct Window {
  double lo = 8.0;
  double hi = 14.0;
  bool contains(double lambda) const { return lambda >= lo - 1e-9 && lambda <= hi + 1e-9; }
};

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  int points = 0;
  Window window;
  bool r2_ok = false;  // r2 >= 0.99
};

/// Unweighted least squares y = intercept + slope * x (needs >= 5 points).
LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y, Window window);

/// Fit of log|f(point)| against lambda over the points inside the window.
LinearFit fit_log_decay(const Branch& branch, const std::function<double(const SolutionPoint&)>& f,
                        Window window);

/// log|rho - 8 pi (1+a)| = intercept + slope * lambda. Requires window.lo >= 6.
LinearFit rate_law_fit(const Branch& branch, Window window = {});

/// Same with rho replaced by rho * int_{B(0, r0)} h e^{u~}.
LinearFit local_rate_law_fit(const Branch& branch, double r0, Window window = {});

/// lambda - log int h e^u + 2 log gamma + 8 pi (1+a) R(0, 0).
double matching_residual(const SolutionPoint& point);

/// sup over nodes with r >= r0 of |u(r) - rho G(x, 0)|, r0 in (0, 1].
double outer_profile_residual(const SolutionPoint& point, double r0);

/// sup over nodes with r >= r0 of |d/dr (u~ - rho G(x, 0))|.
double outer_gradient_residual(const SolutionPoint& point, double r0);

/// Radial field sample: value and r-derivative.
struct FieldSample {
  double value;
  double d_dr;
};
using RadialField = std::function<FieldSample(double)>;

/// Pair form of the Pohozaev identity at radius r for two normalized radial
/// fields u1, u2 (values of u~) sharing rho. `rho1` is the local mass that
/// scales the regular-part correction R_{n,1}(x) = rho1 R(x, 0) subtracted
/// to form v = u~ - (R_{n,1}(x) - R_{n,1}(0)); `norm` is ||v1 - v2||_inf.
/// The bulk integral uses the quadrature of `mesh`. Returns LHS - RHS.
double pohozaev_pair_fields(const greenfns::WeightSpec& spec, double rho, double rho1,
                            const RadialField& u1, const RadialField& u2, double norm, double r,
                            const RadialMesh& mesh);

/// Linearized identity for a normalized field u~ and a candidate xi.
double pohozaev_linearized_fields(const greenfns::WeightSpec& spec, double rho, double rho1,
                                  const RadialField& u, const RadialField& xi, double r,
                                  const RadialMesh& mesh);

/// Pair identity for two solutions with equal rho (to 1e-10).
double pohozaev_residual(const SolutionPoint& a, const SolutionPoint& b, double r);

/// Linearized identity for xi solving Lap xi + rho h e^{u~} xi = 0.
double pohozaev_residual_linearized(const SolutionPoint& point, std::span<const double> xi,
                                    double r);

/// Backward error of xi in the discrete form of Lap xi + rho h e^{u~} xi = 0
/// (all rows except the outer node): max_i |F_i| / (sum_j |K_ij xi_j| + |b_i xi_i|).
double linearized_equation_residual(const SolutionPoint& point, std::span<const double> xi);

/// Linearized identity evaluated with planar quadrature: trapezoid rule in
/// the angle on the circle, Gauss-Legendre in r times trapezoid in the
/// angle for the bulk, weight and gradients taken from the planar formulas.
double pohozaev_residual_linearized_tensor(const SolutionPoint& point,
                                           std::span<const double> xi, double r,
                                           int n_theta = 64);

/// |grad log(hbar1 e^{R_{n,1} + psi})| at x with R_{n,1} = rho1 R(x, 0);
/// psi vanishes for radial data.
double psi1_gradient_at(const greenfns::WeightSpec& spec, double rho1, const greenfns::Point& x);

/// psi1_gradient_at the origin for a branch point.
double psi1_gradient_check(const SolutionPoint& point);

struct UniquenessVerdict {
  std::vector<double> lambda_mid;  // midpoints
  std::vector<double> derivative;  // finite-difference d rho / d lambda
  int sign = 0;                    // common sign, 0 if it changes
  int expected_sign = 0;           // -sign(ell), +1 when ell = 0
  bool constant_sign = false;
  bool matches_expected = false;
};

UniquenessVerdict uniqueness_probe(const Branch& branch, Window window = {});

/// Relative deficit |rho_{n,1} - 8 pi (1+a)| / (8 pi (1+a)).
double concentration_deficit(const SolutionPoint& point, double r0);

}  // namespace bubblelab::diagnostics
