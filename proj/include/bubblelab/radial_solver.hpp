#pragma once

// Radial solutions of the mean field problem
//   -Lap u = rho h e^u / int h e^u   in the unit disk,  u = 0 on the circle,
// with h = h_*(|x|) |x|^{2 alpha}. Newton at fixed rho or at fixed
// lambda = max(u - log int h e^u), continuation in lambda, and the closed-form
// family available for constant h_*.

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "bubblelab/greenfns.hpp"
#include "bubblelab/mesh.hpp"

namespace bubblelab {

using MeshPtr = std::shared_ptr<const RadialMesh>;

struct SolutionPoint {
  MeshPtr mesh;
  greenfns::WeightSpec spec;
  std::vector<double> u;  // nodal values, u.back() == 0
  double rho = 0.0;
  double lambda = 0.0;
  double gamma = 0.0;
  double sigma = 0.0;
  double mass_total = 0.0;  // int_Omega h e^u
  double log_mass = 0.0;    // log mass_total, formed in log space
  double r0 = 0.25;
  double local_mass = 0.0;  // rho * int_{B(0, r0)} h e^{u~}
  double res_norm = 0.0;
  int iterations = 0;

  std::vector<double> u_tilde() const;
  /// u and du/dr at radius r by interpolation.
  RadialMesh::Sample u_at(double r) const;
  /// rho * int_{B(0, R)} h e^{u~}.
  double local_mass_at(double R) const;
};

struct Branch {
  double alpha = 0.5;
  greenfns::WeightSpec spec;
  std::vector<SolutionPoint> points;
  std::vector<int> fold_flags;  // indices where d rho / d lambda changes sign
  bool complete = true;
  std::string failure;           // set when the continuation stopped early
};

struct NewtonOptions {
  double tolerance = 1e-10;
  int max_iterations = 50;
  int min_iterations = 0;
  double r0 = 0.25;
};

struct Constraint {
  enum class Kind { fixed_rho, fixed_lambda };
  Kind kind = Kind::fixed_rho;
  double value = 0.0;
  static Constraint rho(double v) { return {Kind::fixed_rho, v}; }
  static Constraint lambda(double v) { return {Kind::fixed_lambda, v}; }
};

/// Strong residual Lap u + rho h e^u / int h e^u at the mesh nodes. The
/// Laplacian is the discrete one of the solver (weak form divided by the
/// lumped mass); the boundary node uses the strong element derivative.
std::vector<double> residual(std::span<const double> u, double rho,
                             const greenfns::WeightSpec& spec, const RadialMesh& mesh);

/// Backward-error mesh norm of the discrete equations:
/// max_i (|F_i| - e_i) / (sum_j |K_ij (u_j - u_i)| + |N_i(u)|), F = -K u + N(u),
/// with e_i = 16 eps sum_j |K_ij u_j| the rounding noise of K u.
double residual_norm(std::span<const double> u, double rho, const greenfns::WeightSpec& spec,
                     const RadialMesh& mesh);

/// Closed-form solution for constant h_*:
/// u = 2 log((1+m)/(1+m r^{2+2a})), rho = 8pi(1+a) m/(1+m),
/// lambda = log((1+a)(1+m)/(pi c)). Nodal samples on the given mesh.
SolutionPoint exact_disk_family(const greenfns::WeightSpec& spec, double m, MeshPtr mesh,
                                double r0 = 0.25);

/// Mesh graded for the exact family at scale m.
MeshPtr mesh_for_exact_family(double alpha, double m, const MeshPolicy& policy = {});

/// Fills lambda, gamma, sigma, masses and the residual norm from u and rho.
void finalize_point(SolutionPoint& point);

SolutionPoint newton_solve(const Constraint& constraint, std::span<const double> initial,
                           const greenfns::WeightSpec& spec, MeshPtr mesh,
                           const NewtonOptions& options = {}, double rho_guess = -1.0);

/// Approximate normalized profile u~ at height lambda: the bubble
/// U = lambda - 2 log(1 + gamma e^lambda r^{2+2a}) inside r0 = 0.25, blended
/// into rho G(x, 0) - log M_est by r = 0.5 (rho = 8pi(1+a)).
std::function<double(double)> approximate_profile(double lambda,
                                                  const greenfns::WeightSpec& spec);

/// The bubble U = lambda - 2 log(1 + gamma e^lambda r^{2+2a}) alone.
std::function<double(double)> inner_profile_U(double lambda, const greenfns::WeightSpec& spec);

/// Estimated log int h e^u at height lambda (lambda + 2 log gamma).
double approximate_log_mass(double lambda, const greenfns::WeightSpec& spec);

/// Solves at fixed lambda starting from approximate_profile.
SolutionPoint solve_at_lambda(double lambda, const greenfns::WeightSpec& spec,
                              const MeshPolicy& policy, const NewtonOptions& options = {});

struct ContinuationOptions {
  double initial_step = 0.25;
  double min_step = 1e-3;
  NewtonOptions newton;
};

/// Lambda continuation with `steps` evenly spaced output points (one point
/// when lambda_end == lambda_start). The mesh is regraded at every lambda.
Branch continue_branch(double lambda_start, double lambda_end, int steps,
                       const greenfns::WeightSpec& spec, const MeshPolicy& policy,
                       const ContinuationOptions& options = {});

/// Moves a converged point to a new height by adaptive lambda steps.
SolutionPoint continue_to(const SolutionPoint& from, const SolutionPoint* before,
                          double lambda_target, const MeshPolicy& policy,
                          const ContinuationOptions& options = {});

std::vector<int> detect_folds(const std::vector<SolutionPoint>& points);

struct NormalizedPoint {
  std::vector<double> u_tilde;
  double lambda;
  double gamma;
  double sigma;
};

NormalizedPoint normalize(const SolutionPoint& point);

/// Re-samples a point on another mesh and re-converges it at the same lambda.
SolutionPoint resolve_on_mesh(const SolutionPoint& point, MeshPtr mesh,
                              const NewtonOptions& options = {});

}  // namespace bubblelab
