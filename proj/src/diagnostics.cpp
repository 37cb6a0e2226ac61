#include "bubblelab/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "bubblelab/errors.hpp"
#include "bubblelab/numerics.hpp"

namespace bubblelab::diagnostics {

namespace {

constexpr double pi = std::numbers::pi;
constexpr greenfns::Point origin{0.0, 0.0};

double limit_mass(double alpha) { return 8.0 * pi * (1.0 + alpha); }

// R(x, 0) along the positive axis and its r-derivative.
double regular_radial(double r) { return greenfns::regular_part({r, 0.0}, origin); }

double regular_radial_derivative(double r) {
  const double h = 1e-6;
  return (regular_radial(r + h) - regular_radial(r - h)) / (2.0 * h);
}

// Ingredients shared by the pair and linearized identities.
struct Bookkeeping {
  const greenfns::WeightSpec& spec;
  double rho1;

  // phi_n(r) = R_{n,1}(x) - R_{n,1}(0) and its derivative.
  double phi(double r) const { return rho1 * (regular_radial(r) - regular_radial(0.0)); }
  double dphi(double r) const { return rho1 * regular_radial_derivative(r); }
  // d/dr log hbar_1 = d/dr log h_* - 4 pi alpha dR/dr.
  double dlog_hbar1(double r) const {
    return spec.dlog_hstar_dr(r) - 4.0 * pi * spec.alpha * regular_radial_derivative(r);
  }
  double bulk_factor(double r) const {
    return 2.0 + 2.0 * spec.alpha + r * dlog_hbar1(r) + r * dphi(r);
  }
  // h(r) without the |x|^{2 alpha} factor, which integrate_density supplies.
  double weight(double r) const { return spec.hstar(r) * std::pow(r, 2.0 * spec.alpha); }
};

void check_radius(double r, double r_max) {
  if (!(r > 0.0) || r > r_max + 1e-12)
    throw PreconditionError("Pohozaev radius must lie in (0, r0]");
}

RadialField field_of(const SolutionPoint& point) {
  return [&point](double r) {
    const auto s = point.u_at(r);
    return FieldSample{s.value - point.log_mass, s.d_dr};
  };
}

RadialField nodal_field(const RadialMesh& mesh, std::span<const double> values) {
  return [&mesh, values](double r) {
    const auto s = mesh.evaluate(values, r);
    return FieldSample{s.value, s.d_dr};
  };
}

}  // namespace

LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y, Window window) {
  if (x.size() != y.size()) throw PreconditionError("fit_line: size mismatch");
  const int n = static_cast<int>(x.size());
  if (n < 5) {
    std::ostringstream msg;
    msg << "insufficient data: " << n << " points in window [" << window.lo << ", " << window.hi
        << "], need at least 5";
    throw InsufficientDataError(msg.str());
  }
  double mx = 0.0, my = 0.0;
  for (int i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (int i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0.0) throw InsufficientDataError("insufficient data: abscissae coincide");
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double sse = 0.0;
  for (int i = 0; i < n; ++i) {
    const double e = y[i] - fit.intercept - fit.slope * x[i];
    sse += e * e;
  }
  fit.r2 = syy > 0.0 ? 1.0 - sse / syy : 1.0;
  fit.points = n;
  fit.window = window;
  fit.r2_ok = fit.r2 >= 0.99;
  return fit;
}

LinearFit fit_log_decay(const Branch& branch, const std::function<double(const SolutionPoint&)>& f,
                        Window window) {
  std::vector<double> x, y;
  for (const auto& p : branch.points) {
    if (!window.contains(p.lambda)) continue;
    const double v = std::abs(f(p));
    if (!(v > 0.0) || !std::isfinite(v)) continue;
    x.push_back(p.lambda);
    y.push_back(std::log(v));
  }
  return fit_line(x, y, window);
}

LinearFit rate_law_fit(const Branch& branch, Window window) {
  if (window.lo < 6.0) throw PreconditionError("rate-law window must start at lambda >= 6");
  const double limit = limit_mass(branch.alpha);
  return fit_log_decay(branch, [&](const SolutionPoint& p) { return p.rho - limit; }, window);
}

LinearFit local_rate_law_fit(const Branch& branch, double r0, Window window) {
  if (window.lo < 6.0) throw PreconditionError("rate-law window must start at lambda >= 6");
  if (!(r0 > 0.0 && r0 <= 1.0)) throw PreconditionError("r0 must lie in (0, 1]");
  const double limit = limit_mass(branch.alpha);
  return fit_log_decay(
      branch, [&](const SolutionPoint& p) { return p.local_mass_at(r0) - limit; }, window);
}

double matching_residual(const SolutionPoint& point) {
  const double a = point.spec.alpha;
  return point.lambda - point.log_mass + 2.0 * std::log(point.gamma) +
         limit_mass(a) * greenfns::regular_part(origin, origin);
}

double outer_profile_residual(const SolutionPoint& point, double r0) {
  // r0 = 1 leaves only the boundary node, where both terms vanish.
  if (!(r0 > 0.0 && r0 <= 1.0)) throw PreconditionError("r0 must lie in (0, 1]");
  const auto& r = point.mesh->r();
  double worst = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (r[i] < r0) continue;
    const double g = greenfns::green_disk({r[i], 0.0}, origin);
    worst = std::max(worst, std::abs(point.u[i] - point.rho * g));
  }
  return worst;
}

double outer_gradient_residual(const SolutionPoint& point, double r0) {
  if (!(r0 > 0.0 && r0 < 1.0)) throw PreconditionError("r0 must lie in (0, 1)");
  const auto& r = point.mesh->r();
  const auto du = point.mesh->derivative_r(point.u);
  double worst = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (r[i] < r0) continue;
    worst = std::max(worst, std::abs(du[i] + point.rho / (2.0 * pi * r[i])));
  }
  return worst;
}

double pohozaev_pair_fields(const greenfns::WeightSpec& spec, double rho, double rho1,
                            const RadialField& u1, const RadialField& u2, double norm, double r,
                            const RadialMesh& mesh) {
  if (!(norm > 0.0)) throw PreconditionError("pair difference must be nonzero");
  const Bookkeeping bk{spec, rho1};
  const FieldSample a = u1(r), b = u2(r);
  // v = u~ - phi_n: the difference is phi-free, the sum is not.
  const double dsum = a.d_dr + b.d_dr - 2.0 * bk.dphi(r);
  const double dxi = (a.d_dr - b.d_dr) / norm;
  const double lhs = -pi * r * r * dsum * dxi;

  auto density_gap = [&](const FieldSample& p, const FieldSample& q) {
    return std::exp(q.value) * std::expm1(p.value - q.value) / norm;
  };
  const double flux = 2.0 * pi * r * r * rho * bk.weight(r) * density_gap(a, b);
  auto bulk_integrand = [&](double s) {
    const FieldSample p = u1(s), q = u2(s);
    return rho * spec.hstar(s) * density_gap(p, q) * bk.bulk_factor(s);
  };
  const double bulk = mesh.integrate_density(bulk_integrand, r);
  return lhs - (flux - bulk);
}

double pohozaev_linearized_fields(const greenfns::WeightSpec& spec, double rho, double rho1,
                                  const RadialField& u, const RadialField& xi, double r,
                                  const RadialMesh& mesh) {
  const Bookkeeping bk{spec, rho1};
  const FieldSample a = u(r), x = xi(r);
  const double lhs = -2.0 * pi * r * r * (a.d_dr - bk.dphi(r)) * x.d_dr;
  const double flux = 2.0 * pi * r * r * rho * bk.weight(r) * std::exp(a.value) * x.value;
  auto bulk_integrand = [&](double s) {
    return rho * spec.hstar(s) * std::exp(u(s).value) * xi(s).value * bk.bulk_factor(s);
  };
  const double bulk = mesh.integrate_density(bulk_integrand, r);
  return lhs - (flux - bulk);
}

double pohozaev_residual(const SolutionPoint& a, const SolutionPoint& b, double r) {
  if (std::abs(a.rho - b.rho) > 1e-10 * std::max(1.0, std::abs(a.rho)))
    throw PreconditionError("Pohozaev pair needs equal rho (to 1e-10)");
  check_radius(r, a.r0);
  double norm = 0.0;
  for (const auto* p : {&a, &b}) {
    for (double s : p->mesh->r()) {
      const double d = (a.u_at(s).value - a.log_mass) - (b.u_at(s).value - b.log_mass);
      norm = std::max(norm, std::abs(d));
    }
  }
  return pohozaev_pair_fields(a.spec, a.rho, a.local_mass, field_of(a), field_of(b), norm, r,
                              *a.mesh);
}

double pohozaev_residual_linearized(const SolutionPoint& point, std::span<const double> xi,
                                    double r) {
  if (static_cast<int>(xi.size()) != point.mesh->size())
    throw PreconditionError("xi must be sampled on the point's mesh");
  check_radius(r, point.r0);
  return pohozaev_linearized_fields(point.spec, point.rho, point.local_mass, field_of(point),
                                    nodal_field(*point.mesh, xi), r, *point.mesh);
}

double linearized_equation_residual(const SolutionPoint& point, std::span<const double> xi) {
  const RadialMesh& mesh = *point.mesh;
  const int n = mesh.size();
  if (static_cast<int>(xi.size()) != n) throw PreconditionError("xi must be sampled on the point's mesh");
  const double a1 = 1.0 + point.spec.alpha;
  std::vector<double> kx(n, 0.0), scale(n, 0.0);
  const SparseMatrix& K = mesh.stiffness();
  for (int col = 0; col < K.outerSize(); ++col)
    for (SparseMatrix::InnerIterator it(K, col); it; ++it) {
      kx[it.row()] += it.value() * xi[col];
      scale[it.row()] += std::abs(it.value() * xi[col]);
    }
  double worst = 0.0;
  for (int i = 0; i + 1 < n; ++i) {
    const double w = point.rho * point.spec.hstar(mesh.r()[i]) *
                     std::exp(point.u[i] - point.log_mass) / (a1 * a1);
    const double bx = mesh.mass()[i] * w * xi[i];
    const double denom = scale[i] + std::abs(bx);
    if (denom > 0.0) worst = std::max(worst, std::abs(bx - kx[i]) / denom);
  }
  return worst;
}

double pohozaev_residual_linearized_tensor(const SolutionPoint& point,
                                           std::span<const double> xi, double r, int n_theta) {
  if (static_cast<int>(xi.size()) != point.mesh->size())
    throw PreconditionError("xi must be sampled on the point's mesh");
  if (n_theta < 8) throw PreconditionError("n_theta must be at least 8");
  check_radius(r, point.r0);
  const RadialMesh& mesh = *point.mesh;
  const auto& spec = point.spec;
  const double rho1 = point.local_mass;
  const double h = 1e-6;

  // Planar pieces: u~, xi and their gradients from the radial interpolants,
  // the weight and log hbar_1 + phi_n from the planar formulas.
  auto radial = [&](const greenfns::Point& x, std::span<const double> f, double shift,
                    double& value, greenfns::Point& grad) {
    const double s = greenfns::norm(x);
    const auto e = mesh.evaluate(f, s);
    value = e.value - shift;
    grad = {e.d_dr * x[0] / s, e.d_dr * x[1] / s};
  };
  auto potential = [&](const greenfns::Point& x) {
    return std::log(greenfns::hbar1(spec, x)) +
           rho1 * (greenfns::regular_part(x, origin) - greenfns::regular_part(origin, origin));
  };
  auto potential_grad = [&](const greenfns::Point& x) {
    return greenfns::Point{
        (potential({x[0] + h, x[1]}) - potential({x[0] - h, x[1]})) / (2.0 * h),
        (potential({x[0], x[1] + h}) - potential({x[0], x[1] - h})) / (2.0 * h)};
  };

  const double dtheta = 2.0 * pi / n_theta;
  double lhs = 0.0, flux = 0.0;
  for (int j = 0; j < n_theta; ++j) {
    const double th = j * dtheta;
    const greenfns::Point nu{std::cos(th), std::sin(th)};
    const greenfns::Point x{r * nu[0], r * nu[1]};
    double uv, xv;
    greenfns::Point du, dxi;
    radial(x, point.u, point.log_mass, uv, du);
    radial(x, xi, 0.0, xv, dxi);
    const double x_du = x[0] * du[0] + x[1] * du[1];
    const double x_dxi = x[0] * dxi[0] + x[1] * dxi[1];
    const double nu_du = nu[0] * du[0] + nu[1] * du[1];
    const double nu_dxi = nu[0] * dxi[0] + nu[1] * dxi[1];
    const double x_nu = x[0] * nu[0] + x[1] * nu[1];
    const double du_dxi = du[0] * dxi[0] + du[1] * dxi[1];
    // With the radial correction phi_n(x) folded into Dv through R(x, 0).
    const greenfns::Point dphi{
        rho1 * (greenfns::regular_part({x[0] + h, x[1]}, origin) -
                greenfns::regular_part({x[0] - h, x[1]}, origin)) / (2.0 * h),
        rho1 * (greenfns::regular_part({x[0], x[1] + h}, origin) -
                greenfns::regular_part({x[0], x[1] - h}, origin)) / (2.0 * h)};
    const double x_dphi = x[0] * dphi[0] + x[1] * dphi[1];
    const double nu_dphi = nu[0] * dphi[0] + nu[1] * dphi[1];
    const double dphi_dxi = dphi[0] * dxi[0] + dphi[1] * dxi[1];
    lhs -= ((x_du - x_dphi) * nu_dxi + x_dxi * (nu_du - nu_dphi) - x_nu * (du_dxi - dphi_dxi)) *
           r * dtheta;
    flux += x_nu * point.rho * greenfns::assemble_weight(spec, x) * std::exp(uv) * xv * r *
            dtheta;
  }

  // Bulk: Gauss-Legendre in r on the element intervals, trapezoid in angle.
  const auto gl = numerics::gauss_legendre(mesh.degree() + 4);
  const auto& nodes_r = mesh.r();
  double bulk = 0.0;
  for (int e = 0; e < mesh.elements(); ++e) {
    const double lo = nodes_r[mesh.element_first_node(e)];
    const double hi = std::min(nodes_r[mesh.element_first_node(e + 1)], r);
    if (hi <= lo) break;
    for (std::size_t q = 0; q < gl.nodes.size(); ++q) {
      const double s = lo + 0.5 * (hi - lo) * (gl.nodes[q] + 1.0);
      const double ws = 0.5 * (hi - lo) * gl.weights[q];
      for (int j = 0; j < n_theta; ++j) {
        const double th = (j + 0.5) * dtheta;
        const greenfns::Point x{s * std::cos(th), s * std::sin(th)};
        double uv, xv;
        greenfns::Point du, dxi;
        radial(x, point.u, point.log_mass, uv, du);
        radial(x, xi, 0.0, xv, dxi);
        const auto g = potential_grad(x);
        const double factor = 2.0 + 2.0 * spec.alpha + x[0] * g[0] + x[1] * g[1];
        bulk += point.rho * greenfns::assemble_weight(spec, x) * std::exp(uv) * xv * factor * s *
                ws * dtheta;
      }
    }
  }
  return lhs - (flux - bulk);
}

double psi1_gradient_at(const greenfns::WeightSpec& spec, double rho1, const greenfns::Point& x) {
  auto f = [&](double a, double b) {
    const greenfns::Point p{a, b};
    return std::log(greenfns::hbar1(spec, p)) + rho1 * greenfns::regular_part(p, origin);
  };
  const double h = 1e-5;
  const double gx = (f(x[0] + h, x[1]) - f(x[0] - h, x[1])) / (2.0 * h);
  const double gy = (f(x[0], x[1] + h) - f(x[0], x[1] - h)) / (2.0 * h);
  return std::hypot(gx, gy);
}

double psi1_gradient_check(const SolutionPoint& point) {
  return psi1_gradient_at(point.spec, point.local_mass, origin);
}

UniquenessVerdict uniqueness_probe(const Branch& branch, Window window) {
  const double ell = greenfns::ell_coefficient(branch.spec);
  const bool degenerate = std::abs(ell) < 1e-14;
  if (!degenerate && window.lo < 6.0)
    throw PreconditionError("uniqueness probe window must start at lambda >= 6");
  std::vector<const SolutionPoint*> pts;
  for (const auto& p : branch.points)
    if (window.contains(p.lambda)) pts.push_back(&p);
  if (pts.size() < 3) throw InsufficientDataError("window too short for a derivative table");

  UniquenessVerdict v;
  v.expected_sign = degenerate ? 1 : (ell > 0.0 ? -1 : 1);
  int pos = 0, neg = 0;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const double dl = pts[i]->lambda - pts[i - 1]->lambda;
    if (dl == 0.0) continue;
    const double d = (pts[i]->rho - pts[i - 1]->rho) / dl;
    v.lambda_mid.push_back(0.5 * (pts[i]->lambda + pts[i - 1]->lambda));
    v.derivative.push_back(d);
    if (d > 0.0) ++pos;
    if (d < 0.0) ++neg;
  }
  const int n = static_cast<int>(v.derivative.size());
  if (n < 2) throw InsufficientDataError("window too short for a derivative table");
  v.constant_sign = pos == n || neg == n;
  v.sign = pos == n ? 1 : (neg == n ? -1 : 0);
  v.matches_expected = v.constant_sign && v.sign == v.expected_sign;
  return v;
}

double concentration_deficit(const SolutionPoint& point, double r0) {
  const double limit = limit_mass(point.spec.alpha);
  return std::abs(point.local_mass_at(r0) - limit) / limit;
}

}  // namespace bubblelab::diagnostics
