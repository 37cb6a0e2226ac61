#include "bubblelab/radial_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>

#include <Eigen/SparseLU>

#include "bubblelab/errors.hpp"
#include "bubblelab/numerics.hpp"

namespace bubblelab {

using std::numbers::pi;

namespace {

// Nodal data of the nonlinearity for a given u: log of the mass, the
// normalized density E_i = h_*(r_i) e^{u_i - log M} and the t-form source
// S_i = rho E_i / (1+a)^2.
struct Nonlinearity {
  double log_mass = 0.0;
  std::vector<double> density;  // E
  std::vector<double> source;   // S
};

std::vector<double> nodal_hstar(const greenfns::WeightSpec& spec, const RadialMesh& mesh) {
  std::vector<double> hs(mesh.size());
  for (int i = 0; i < mesh.size(); ++i) hs[i] = spec.hstar(mesh.r()[i]);
  return hs;
}

double log_mass_of(std::span<const double> u, std::span<const double> hs, const RadialMesh& mesh) {
  const auto& w = mesh.mass();
  double shift = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < u.size(); ++i)
    if (w[i] > 0.0) shift = std::max(shift, u[i] + std::log(hs[i]));
  if (!std::isfinite(shift)) throw SolverError("mass integral is not finite");
  double sum = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i)
    if (w[i] > 0.0) sum += w[i] * std::exp(u[i] + std::log(hs[i]) - shift);
  return std::log(2.0 * pi / (1.0 + mesh.alpha())) + shift + std::log(sum);
}

Nonlinearity nonlinearity(std::span<const double> u, double rho, std::span<const double> hs,
                          const RadialMesh& mesh) {
  Nonlinearity nl;
  nl.log_mass = log_mass_of(u, hs, mesh);
  const double a1sq = (1.0 + mesh.alpha()) * (1.0 + mesh.alpha());
  nl.density.resize(u.size());
  nl.source.resize(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    nl.density[i] = hs[i] * std::exp(u[i] - nl.log_mass);
    nl.source[i] = rho * nl.density[i] / a1sq;
  }
  return nl;
}


// K u formed from differences u_j - u_i; K annihilates constants, so this
// avoids the cancellation of the offset of u (rounding stays shift-invariant).
std::vector<double> stiffness_apply(const SparseMatrix& K, std::span<const double> u) {
  std::vector<double> ku(u.size(), 0.0);
  for (int col = 0; col < K.outerSize(); ++col)
    for (SparseMatrix::InnerIterator it(K, col); it; ++it)
      ku[it.row()] += it.value() * (u[col] - u[it.row()]);
  return ku;
}

// max_i (|F_i| - e_i) / (sum_j |K_ij (u_j - u_i)| + |Omega_i S_i|) over the free
// nodes, e_i = 16 eps sum_j |K_ij u_j| the rounding noise of K u. The scale
// ignores the offset of u; without e_i the rows next to the origin, where u
// barely varies, would sit at a rounding floor above 1e-10.
double backward_error(std::span<const double> u, const Nonlinearity& nl, const RadialMesh& mesh) {
  constexpr double kRounding = 16.0 * std::numeric_limits<double>::epsilon();
  const int n = mesh.size();
  const auto& K = mesh.stiffness();
  const auto ku = stiffness_apply(K, u);
  std::vector<double> scale(n, 0.0), noise(n, 0.0);
  for (int col = 0; col < K.outerSize(); ++col)
    for (SparseMatrix::InnerIterator it(K, col); it; ++it) {
      scale[it.row()] += std::abs(it.value() * (u[col] - u[it.row()]));
      noise[it.row()] += kRounding * std::abs(it.value() * u[col]);
    }
  double worst = 0.0;
  for (int i = 0; i + 1 < n; ++i) {
    const double src = mesh.mass()[i] * nl.source[i];
    const double f = std::max(0.0, std::abs(-ku[i] + src) - noise[i]);
    const double sc = scale[i] + std::abs(src);
    worst = std::max(worst, sc > 0.0 ? f / sc : f);
  }
  return worst;
}

void check_field(std::span<const double> u, const RadialMesh& mesh) {
  if (static_cast<int>(u.size()) != mesh.size())
    throw PreconditionError("field size does not match the mesh");
  for (double v : u)
    if (!std::isfinite(v)) throw PreconditionError("field has non-finite values");
}

}  // namespace

std::vector<double> SolutionPoint::u_tilde() const {
  std::vector<double> out(u);
  for (auto& v : out) v -= log_mass;
  return out;
}

RadialMesh::Sample SolutionPoint::u_at(double r) const { return mesh->evaluate(u, r); }

double SolutionPoint::local_mass_at(double R) const {
  const auto* m = mesh.get();
  auto f = [&](double r) { return spec.hstar(r) * std::exp(m->evaluate(u, r).value - log_mass); };
  return rho * m->integrate_density(f, std::min(R, m->radius()));
}

std::vector<double> residual(std::span<const double> u, double rho,
                             const greenfns::WeightSpec& spec, const RadialMesh& mesh) {
  check_field(u, mesh);
  const int n = mesh.size();
  std::vector<double> out(n, 0.0);
  const auto hs = nodal_hstar(spec, mesh);
  const auto nl = nonlinearity(u, rho, hs, mesh);
  const auto ku = stiffness_apply(mesh.stiffness(), u);
  const double a1 = 1.0 + mesh.alpha();
  for (int i = 1; i + 1 < n; ++i) {
    const double metric = a1 * a1 * std::pow(mesh.r()[i], 2.0 * mesh.alpha());
    out[i] = metric * (-ku[i] / mesh.mass()[i] + nl.source[i]);
  }
  // Boundary node: strong Laplacian (1/t)(t u_t)_t from the last element.
  const int p = mesh.degree();
  const int base = n - 1 - p;
  const auto& ref = mesh.reference_nodes();
  const auto D = numerics::differentiation_matrix(ref);
  const double ds = 2.0 * mesh.elements();
  std::vector<double> ut(p + 1);
  for (int a = 0; a <= p; ++a) {
    double d = 0.0;
    for (int b = 0; b <= p; ++b) d += D[a * (p + 1) + b] * u[base + b];
    ut[a] = d * ds / mesh.dt_ds(mesh.s()[base + a]);
  }
  double utt = 0.0;
  for (int b = 0; b <= p; ++b) utt += D[p * (p + 1) + b] * ut[b];
  utt *= ds / mesh.dt_ds(1.0);
  const double lap_t = utt + ut[p] / mesh.t_max();
  out[n - 1] = a1 * a1 * std::pow(mesh.radius(), 2.0 * mesh.alpha()) * (lap_t + nl.source[n - 1]);
  return out;
}

double residual_norm(std::span<const double> u, double rho, const greenfns::WeightSpec& spec,
                     const RadialMesh& mesh) {
  check_field(u, mesh);
  const auto hs = nodal_hstar(spec, mesh);
  return backward_error(u, nonlinearity(u, rho, hs, mesh), mesh);
}

MeshPtr mesh_for_exact_family(double alpha, double m, const MeshPolicy& policy) {
  if (!(m > 0.0)) throw DomainError("exact family: m must be positive");
  const double lambda = std::log((1.0 + alpha) * (1.0 + m) / pi);
  return std::make_shared<const RadialMesh>(RadialMesh::for_lambda(alpha, policy, lambda, 1.0));
}

SolutionPoint exact_disk_family(const greenfns::WeightSpec& spec, double m, MeshPtr mesh,
                                double r0) {
  if (!spec.is_constant())
    throw PreconditionError("exact family is not applicable: h_* must be constant");
  if (!(m > 0.0) || !std::isfinite(m)) throw DomainError("exact family: m must be positive");
  const double a = spec.alpha;
  if (std::abs(mesh->alpha() - a) > 0.0) throw PreconditionError("mesh alpha differs from spec");
  SolutionPoint p;
  p.mesh = std::move(mesh);
  p.spec = spec;
  p.r0 = r0;
  const auto& t = p.mesh->t();
  p.u.resize(t.size());
  for (std::size_t i = 0; i < t.size(); ++i)
    p.u[i] = 2.0 * (std::log1p(m) - std::log1p(m * t[i] * t[i]));
  p.u.back() = 0.0;
  p.rho = 8.0 * pi * (1.0 + a) * m / (1.0 + m);
  p.log_mass = std::log(spec.c * pi / (1.0 + a)) + std::log1p(m);
  p.mass_total = std::exp(p.log_mass);
  p.lambda = 2.0 * std::log1p(m) - p.log_mass;
  p.gamma = p.rho * spec.c / (8.0 * (1.0 + a) * (1.0 + a));
  p.sigma = std::exp(-p.lambda / (2.0 * (1.0 + a)));
  const double T2 = std::pow(std::min(r0, 1.0), 2.0 * (1.0 + a));
  p.local_mass = p.rho * (1.0 + m) * T2 / (1.0 + m * T2);
  p.res_norm = residual_norm(p.u, p.rho, spec, *p.mesh);
  return p;
}

void finalize_point(SolutionPoint& point) {
  const auto& mesh = *point.mesh;
  const double a = mesh.alpha();
  const auto hs = nodal_hstar(point.spec, mesh);
  point.log_mass = log_mass_of(point.u, hs, mesh);
  point.mass_total = std::exp(point.log_mass);
  point.lambda = point.u.front() - point.log_mass;
  point.gamma = point.rho * point.spec.hstar(0.0) / (8.0 * (1.0 + a) * (1.0 + a));
  point.sigma = std::exp(-point.lambda / (2.0 * (1.0 + a)));
  point.local_mass = point.local_mass_at(point.r0);
  point.res_norm = backward_error(point.u, nonlinearity(point.u, point.rho, hs, mesh), mesh);
}

SolutionPoint newton_solve(const Constraint& constraint, std::span<const double> initial,
                           const greenfns::WeightSpec& spec, MeshPtr mesh,
                           const NewtonOptions& options, double rho_guess) {
  const RadialMesh& M = *mesh;
  check_field(initial, M);
  const bool fixed_lambda = constraint.kind == Constraint::Kind::fixed_lambda;
  if (!std::isfinite(constraint.value)) throw PreconditionError("constraint value must be finite");

  SolutionPoint point;
  point.mesh = mesh;
  point.spec = spec;
  point.r0 = options.r0;
  point.u.assign(initial.begin(), initial.end());
  point.u.back() = 0.0;

  if (!fixed_lambda && constraint.value == 0.0) {
    std::fill(point.u.begin(), point.u.end(), 0.0);
    point.rho = 0.0;
    finalize_point(point);
    return point;
  }

  double rho = fixed_lambda ? (rho_guess > 0.0 ? rho_guess : 8.0 * pi * (1.0 + spec.alpha))
                            : constraint.value;
  const int N = M.size();
  const int n = N - 1;  // free nodes
  const int dim = n + (fixed_lambda ? 2 : 1);
  const auto hs = nodal_hstar(spec, M);
  const auto& K = M.stiffness();
  const auto& W = M.mass();
  const double a1sq = (1.0 + spec.alpha) * (1.0 + spec.alpha);
  const double qscale = 2.0 * pi / (1.0 + spec.alpha);

  auto merit = [&](const std::vector<double>& u, double r) {
    const auto nl = nonlinearity(u, r, hs, M);
    double m = backward_error(u, nl, M);
    if (fixed_lambda) m = std::max(m, std::abs(u[0] - nl.log_mass - constraint.value));
    return m;
  };

  std::vector<double> trace;
  double current = merit(point.u, rho);
  trace.push_back(current);
  int iter = 0;
  while (!(current <= options.tolerance) || iter < options.min_iterations) {
    if (iter >= options.max_iterations)
      throw SolverError("newton: maximum iterations exceeded", trace);
    if (!std::isfinite(current)) throw SolverError("newton: residual is not finite", trace);
    ++iter;
    const auto nl = nonlinearity(point.u, rho, hs, M);
    const auto ku = stiffness_apply(K, point.u);

    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(K.nonZeros() + 4 * static_cast<std::size_t>(n));
    for (int col = 0; col < n; ++col)
      for (SparseMatrix::InnerIterator it(K, col); it; ++it)
        if (it.row() < n) trips.emplace_back(it.row(), col, -it.value());
    Eigen::VectorXd rhs(dim);
    for (int i = 0; i < n; ++i) {
      const double ws = W[i] * nl.source[i];
      trips.emplace_back(i, i, ws);
      trips.emplace_back(i, n, -ws);
      trips.emplace_back(n, i, qscale * W[i] * nl.density[i]);
      rhs[i] = ku[i] - ws;
    }
    trips.emplace_back(n, n, -1.0);
    rhs[n] = 0.0;
    if (fixed_lambda) {
      for (int i = 0; i < n; ++i) trips.emplace_back(i, n + 1, W[i] * nl.density[i] / a1sq);
      trips.emplace_back(n + 1, 0, 1.0);
      trips.emplace_back(n + 1, n, -1.0);
      rhs[n + 1] = -(point.u[0] - nl.log_mass - constraint.value);
    }
    SparseMatrix J(dim, dim);
    J.setFromTriplets(trips.begin(), trips.end());
    Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu;
    lu.compute(J);
    if (lu.info() != Eigen::Success)
      throw SolverError(fixed_lambda ? "newton: singular Jacobian"
                                     : "newton: singular Jacobian at fixed rho (near a fold); "
                                       "use the lambda parameterization",
                        trace);
    const Eigen::VectorXd delta = lu.solve(rhs);
    if (!delta.allFinite()) throw SolverError("newton: non-finite update", trace);

    double step = 1.0;
    std::vector<double> trial(N, 0.0);
    double trial_rho = rho;
    double trial_merit = std::numeric_limits<double>::infinity();
    for (int halving = 0; halving < 12; ++halving) {
      for (int i = 0; i < n; ++i) trial[i] = point.u[i] + step * delta[i];
      trial[N - 1] = 0.0;
      trial_rho = fixed_lambda ? rho + step * delta[n + 1] : rho;
      try {
        trial_merit = merit(trial, trial_rho);
      } catch (const SolverError&) {
        trial_merit = std::numeric_limits<double>::infinity();
      }
      if (trial_merit < current || current <= 1e-3) break;
      step *= 0.5;
    }
    if (!std::isfinite(trial_merit)) throw SolverError("newton: line search failed", trace);
    point.u = trial;
    rho = trial_rho;
    current = trial_merit;
    trace.push_back(current);
  }
  point.rho = rho;
  point.iterations = iter;
  finalize_point(point);
  return point;
}

double approximate_log_mass(double lambda, const greenfns::WeightSpec& spec) {
  const double gamma = pi * spec.hstar(0.0) / (1.0 + spec.alpha);
  return lambda + 2.0 * std::log(gamma);
}

std::function<double(double)> inner_profile_U(double lambda, const greenfns::WeightSpec& spec) {
  const double a1 = 1.0 + spec.alpha;
  const double log_gamma = std::log(pi * spec.hstar(0.0) / a1);
  return [=](double r) {
    if (r == 0.0) return lambda;
    return lambda - 2.0 * numerics::softplus(log_gamma + lambda + 2.0 * a1 * std::log(r));
  };
}

std::function<double(double)> approximate_profile(double lambda, const greenfns::WeightSpec& spec) {
  constexpr double r0 = 0.25;
  const double rho = 8.0 * pi * (1.0 + spec.alpha);
  const double log_mass = approximate_log_mass(lambda, spec);
  const auto U = inner_profile_U(lambda, spec);
  return [=](double r) {
    if (r <= r0) return U(r);
    const double outer = (r >= 1.0 ? 0.0 : -rho * std::log(r) / (2.0 * pi)) - log_mass;
    if (r >= 2.0 * r0) return outer;
    const double c = std::cos(0.5 * pi * (r - r0) / r0);
    const double chi = c * c;
    return chi * U(r) + (1.0 - chi) * outer;
  };
}

SolutionPoint solve_at_lambda(double lambda, const greenfns::WeightSpec& spec,
                              const MeshPolicy& policy, const NewtonOptions& options) {
  auto mesh = std::make_shared<const RadialMesh>(
      RadialMesh::for_lambda(spec.alpha, policy, lambda, spec.hstar(0.0)));
  const auto profile = approximate_profile(lambda, spec);
  const double shift = approximate_log_mass(lambda, spec);
  std::vector<double> u(mesh->size());
  for (int i = 0; i < mesh->size(); ++i) u[i] = profile(mesh->r()[i]) + shift;
  u.back() = 0.0;
  return newton_solve(Constraint::lambda(lambda), u, spec, mesh, options,
                      8.0 * pi * (1.0 + spec.alpha));
}

SolutionPoint continue_to(const SolutionPoint& from, const SolutionPoint* before,
                          double lambda_target, const MeshPolicy& policy,
                          const ContinuationOptions& options) {
  SolutionPoint current = from;
  std::optional<SolutionPoint> previous;
  if (before) previous = *before;
  const double direction = lambda_target >= from.lambda ? 1.0 : -1.0;
  double step = options.initial_step;
  std::vector<double> trace;
  while (direction * (lambda_target - current.lambda) > 1e-12) {
    const double h = direction * std::min(step, direction * (lambda_target - current.lambda));
    const double lam = current.lambda + h;
    auto mesh = std::make_shared<const RadialMesh>(
        RadialMesh::for_lambda(current.spec.alpha, policy, lam, current.spec.hstar(0.0)));
    std::vector<double> guess(mesh->size());
    double rho_guess = current.rho;
    const bool secant = previous && std::abs(current.lambda - previous->lambda) > 1e-14;
    const double ratio = secant ? h / (current.lambda - previous->lambda) : 0.0;
    for (int i = 0; i < mesh->size(); ++i) {
      const double r = mesh->r()[i];
      const double uc = current.u_at(r).value;
      guess[i] = secant ? uc + ratio * (uc - previous->u_at(r).value) : uc;
    }
    if (secant) rho_guess += ratio * (current.rho - previous->rho);
    guess.back() = 0.0;
    try {
      SolutionPoint next = newton_solve(Constraint::lambda(lam), guess, current.spec, mesh,
                                        options.newton, rho_guess);
      previous = std::move(current);
      current = std::move(next);
      step = std::min(options.initial_step, 2.0 * step);
    } catch (const SolverError& err) {
      trace.push_back(lam);
      step *= 0.5;
      if (step < options.min_step)
        throw SolverError("continuation: step fell below the minimum near lambda = " +
                              std::to_string(current.lambda) + " (" + err.what() + ")",
                          trace);
    }
  }
  return current;
}

std::vector<int> detect_folds(const std::vector<SolutionPoint>& points) {
  std::vector<int> flags;
  for (std::size_t k = 1; k + 1 < points.size(); ++k) {
    const double d0 = (points[k].rho - points[k - 1].rho) / (points[k].lambda - points[k - 1].lambda);
    const double d1 = (points[k + 1].rho - points[k].rho) / (points[k + 1].lambda - points[k].lambda);
    if (d0 * d1 < 0.0) flags.push_back(static_cast<int>(k));
  }
  return flags;
}

Branch continue_branch(double lambda_start, double lambda_end, int steps,
                       const greenfns::WeightSpec& spec, const MeshPolicy& policy,
                       const ContinuationOptions& options) {
  spec.validate();
  if (!std::isfinite(lambda_start) || !std::isfinite(lambda_end))
    throw PreconditionError("continuation: lambda range must be finite");
  if (lambda_end < lambda_start) throw PreconditionError("continuation: lambda_end < lambda_start");
  const bool single = lambda_end == lambda_start;
  if (!single && steps < 2) throw PreconditionError("continuation: need at least 2 steps");
  const int count = single ? 1 : steps;

  Branch branch;
  branch.alpha = spec.alpha;
  branch.spec = spec;

  SolutionPoint first;
  try {
    first = solve_at_lambda(lambda_start, spec, policy, options.newton);
  } catch (const SolverError&) {
    // Start from the minimal solution at small rho and walk up in lambda.
    auto mesh = std::make_shared<const RadialMesh>(
        RadialMesh::for_lambda(spec.alpha, policy, 0.0, spec.hstar(0.0)));
    std::vector<double> zero(mesh->size(), 0.0);
    const auto small = newton_solve(Constraint::rho(1.0), zero, spec, mesh, options.newton);
    first = continue_to(small, nullptr, lambda_start, policy, options);
  }
  branch.points.push_back(std::move(first));

  for (int k = 1; k < count; ++k) {
    const double target = lambda_start + (lambda_end - lambda_start) * k / (count - 1);
    const auto& last = branch.points.back();
    const SolutionPoint* before =
        branch.points.size() >= 2 ? &branch.points[branch.points.size() - 2] : nullptr;
    try {
      branch.points.push_back(continue_to(last, before, target, policy, options));
    } catch (const SolverError& err) {
      branch.complete = false;
      branch.failure = err.what();
      break;
    }
  }
  branch.fold_flags = detect_folds(branch.points);
  return branch;
}

NormalizedPoint normalize(const SolutionPoint& point) {
  NormalizedPoint out;
  out.u_tilde = point.u_tilde();
  out.lambda = out.u_tilde.front();
  const double a = point.mesh->alpha();
  out.gamma = point.rho * point.spec.hstar(0.0) / (8.0 * (1.0 + a) * (1.0 + a));
  out.sigma = std::exp(-out.lambda / (2.0 * (1.0 + a)));
  return out;
}

SolutionPoint resolve_on_mesh(const SolutionPoint& point, MeshPtr mesh,
                              const NewtonOptions& options) {
  std::vector<double> guess(mesh->size());
  for (int i = 0; i < mesh->size(); ++i) guess[i] = point.u_at(mesh->r()[i]).value;
  guess.back() = 0.0;
  return newton_solve(Constraint::lambda(point.lambda), guess, point.spec, std::move(mesh),
                      options, point.rho);
}

}  // namespace bubblelab
