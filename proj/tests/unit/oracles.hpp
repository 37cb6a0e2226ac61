#pragma once

// Independent reference computations for the unit tests. Nothing here calls
// into the library.

#include <cmath>
#include <functional>
#include <numbers>

namespace oracle {

inline constexpr double pi = std::numbers::pi;

// Adaptive Simpson on [a, b].
inline double simpson(const std::function<double(double)>& f, double a, double b, double tol,
                      int depth = 50) {
  std::function<double(double, double, double, double, double, double, int)> rec =
      [&](double lo, double hi, double flo, double fmid, double fhi, double whole, int d) {
        const double mid = 0.5 * (lo + hi);
        const double lm = 0.5 * (lo + mid), rm = 0.5 * (mid + hi);
        const double flm = f(lm), frm = f(rm);
        const double left = (mid - lo) / 6.0 * (flo + 4.0 * flm + fmid);
        const double right = (hi - mid) / 6.0 * (fmid + 4.0 * frm + fhi);
        if (d <= 0 || std::abs(left + right - whole) <= 15.0 * tol)
          return left + right + (left + right - whole) / 15.0;
        return rec(lo, mid, flo, flm, fmid, left, d - 1) + rec(mid, hi, fmid, frm, fhi, right, d - 1);
      };
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  return rec(a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), depth);
}

// Closed-form exact disk family with h_* = c.
struct ExactFamily {
  double alpha, m, c = 1.0;
  double a1() const { return 1.0 + alpha; }
  double rho() const { return 8.0 * pi * a1() * m / (1.0 + m); }
  double lambda() const { return std::log(a1() * (1.0 + m) / (pi * c)); }
  double log_mass() const { return std::log(c * pi * (1.0 + m) / a1()); }
  double u(double r) const { return 2.0 * std::log((1.0 + m) / (1.0 + m * std::pow(r, 2.0 * a1()))); }
  double u_tilde(double r) const { return u(r) - log_mass(); }
  double local_mass(double r) const {
    const double T2 = std::pow(r, 2.0 * a1());
    return rho() * (1.0 + m) * T2 / (1.0 + m * T2);
  }
  static double m_of_lambda(double alpha, double lambda, double c = 1.0) {
    return pi * c * std::exp(lambda) / (1.0 + alpha) - 1.0;
  }
};

// Direct evaluation of ell(p) with long double arithmetic.
inline double ell(double alpha, double hbar1, double lap) {
  const long double a1 = 1.0L + alpha;
  const long double pil = std::numbers::pi_v<long double>;
  return static_cast<double>(2.0L * pil * pil / (a1 * std::sin(pil / a1)) *
                             std::pow(a1 / (pil * hbar1), 1.0L / a1) * lap);
}

}  // namespace oracle
