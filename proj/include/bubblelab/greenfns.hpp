#pragma once

// Green function of the unit disk, its regular part, and the weight
// h = h_* |x|^{2 alpha} generated by a single singular source at the
// origin, together with the quantities built from it (hbar_1, the
// desingularized Hamiltonian, the rate coefficient ell(p)).

#include <array>
#include <string>
#include <vector>

namespace bubblelab::greenfns {

using Point = std::array<double, 2>;

double norm(const Point& x);

/// G(x, y) with -Lap G = delta_y in the unit disk, G = 0 on the circle.
/// Requires |x| <= 1, |y| < 1 and x != y.
double green_disk(const Point& x, const Point& y);

/// R(x, y) = G(x, y) + log|x - y| / 2pi, with R(y, y) = log(1 - |y|^2) / 2pi.
double regular_part(const Point& x, const Point& y);

enum class HstarKind { constant, gaussian, polynomial };

std::string to_string(HstarKind kind);
HstarKind hstar_kind_from_string(const std::string& name);

/// Problem data: singular strength alpha at the centre and a positive
/// radial smooth factor h_*.
struct WeightSpec {
  double alpha = 0.5;
  HstarKind kind = HstarKind::constant;
  double c = 1.0;                    // constant: h_* = c
  double beta = 0.0;                 // gaussian: h_* = exp(beta |x|^2)
  std::vector<double> coefficients;  // polynomial: h_* = sum_k c_k |x|^{2k}

  static WeightSpec constant_spec(double alpha, double c = 1.0);
  static WeightSpec gaussian_spec(double alpha, double beta);
  static WeightSpec polynomial_spec(double alpha, std::vector<double> coefficients);

  /// Throws DomainError for a bad alpha or when h_* is not positive on the
  /// closed disk (checked on 1001 radii).
  void validate() const;

  double hstar(double r) const;
  double log_hstar(double r) const;
  /// d/dr log h_*(r).
  double dlog_hstar_dr(double r) const;
  /// Laplacian of log h_* at the origin, analytic for every family.
  double lap_log_hstar_at_origin() const;
  bool is_constant() const { return kind == HstarKind::constant; }
};

/// h(x) = h_*(x) exp(-4 pi alpha G(x, 0)) = h_*(x) |x|^{2 alpha}.
double assemble_weight(const WeightSpec& spec, const Point& x);

/// hbar_1 = h / |x|^{2 alpha}, evaluated as h_* exp(-4 pi alpha R(x, 0)).
double hbar1(const WeightSpec& spec, const Point& x);

/// H_p(x) = 8 pi (1+a)(R(x,0) - R(0,0)) + log hbar_1(x) - log hbar_1(0).
double hamiltonian_Hp(const WeightSpec& spec, const Point& x);

/// ell(p) = 2 pi^2 / ((1+a) sin(pi/(1+a))) * ((1+a)/(pi hbar_1(p)))^(1/(1+a)) * Lap log h_*(p).
double ell_coefficient(double alpha, double hbar1_at_p, double lap_log_hstar_at_p);

/// ell(p) for a built-in spec at the origin.
double ell_coefficient(const WeightSpec& spec);

/// epsilon_0 = 2 - 2 (1 - alpha)^+.
double epsilon0(double alpha);

}  // namespace bubblelab::greenfns
