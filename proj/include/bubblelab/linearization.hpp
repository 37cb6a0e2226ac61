#pragma once

// Angular-mode decomposition of the linearized nonlocal operator
//   L phi = Lap phi + rho h e^{u~} (phi - int h e^{u~} phi)
// at a radial solution, and its spectrum in the weighted inner product
// <f, g>_W = int rho h e^{u~} f g. For mode k the weak form in t reads
//   A = -K - kappa^2 P + diag(b) - [k == 0] c b b^T,
//   b = Omega W^,  W^ = rho h_* e^{u~} / (1+a)^2,  kappa = k / (1+a),
// with c = 2 pi (1+a) / rho. The generalized problem A phi = mu diag(b) phi
// is invariant under the inner rescaling z = r / sigma, so its eigenvalues
// are directly comparable with those of the entire operator.

#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "bubblelab/radial_solver.hpp"

namespace bubblelab {

enum class OuterBoundary { dirichlet, neumann };

struct ModeOperator {
  int k = 0;
  double kappa = 0.0;
  MeshPtr mesh;
  SparseMatrix local;      // -K - kappa^2 P + diag(b), full N x N
  Eigen::VectorXd weight;  // b
  double coupling = 0.0;   // c (zero for k >= 1)
  OuterBoundary outer = OuterBoundary::dirichlet;

  /// Weak-form product A phi including the rank-one term.
  Eigen::VectorXd apply(const Eigen::VectorXd& phi) const;
  /// Strong form L phi at interior nodes: (1+a)^2 r^{2a} (A phi)_i / Omega_i.
  Eigen::VectorXd apply_strong(const Eigen::VectorXd& phi) const;
  int size() const { return static_cast<int>(weight.size()); }
};

ModeOperator build_mode_operator(const SolutionPoint& point, int k);

/// Entire operator Lap + 8(1+a)^2 r^{2a} (1 + r^{2+2a})^{-2} truncated to
/// r <= radius with a natural (decay) condition at the outer edge.
ModeOperator build_entire_mode_operator(double alpha, int k, double radius = 50.0,
                                        const MeshPolicy& policy = {1025, 4, 0.3});

struct ModeSpectrum {
  int k = 0;
  std::vector<double> eigenvalues;  // sorted by magnitude
  double smallest_magnitude = 0.0;
  std::vector<double> eigenvector_0;  // nodal values, max-norm 1, positive at r = 0 side
  double residual = 0.0;              // max relative eigen-residual
  double imaginary_noise = 0.0;       // always 0 for the symmetric form
};

/// The `count` smallest-magnitude eigenvalues by shift-invert Lanczos at 0
/// (dense symmetric solver for small or singular operators). `seed` drives
/// the Lanczos start vector.
ModeSpectrum mode_spectrum(const ModeOperator& op, int count = 8, std::uint64_t seed = 0);

/// Symmetrized reduced matrix B^{-1/2} A' B^{-1/2} (dense), for tests.
Eigen::MatrixXd symmetrized_matrix(const ModeOperator& op);

struct ScanRow {
  double lambda = 0.0;
  std::vector<double> eig_min;       // per mode: signed smallest-magnitude eigenvalue
  std::vector<double> eig_min_next;  // per mode: the next one
  double min_magnitude = 0.0;
  bool kernel_flag = false;
};

struct ScanOptions {
  int count = 8;
  double kernel_threshold = 1e-8;
  std::uint64_t seed = 0;
  int threads = 1;
};

std::vector<ScanRow> nondegeneracy_scan(const Branch& branch, int k_max,
                                        const ScanOptions& options = {});

/// Radial solution of Lap Xi + rho h e^{u~} Xi = 0 regular at the origin
/// (no outer boundary condition), scaled to max-norm 1 with Xi(0) > 0.
std::vector<double> local_kernel_field(const SolutionPoint& point);

struct B0Result {
  double b0 = 0.0;
  bool unreliable_scale = false;  // lambda < 2
};

/// Projection of xi (nodal values on the point's mesh) onto
/// xi0(z) = (1 - gbar z^{2+2a}) / (1 + gbar z^{2+2a}), z = r / sigma, with the
/// weight z^{2a} (1 + gbar z^{2+2a})^{-2} over |z| <= r0 / sigma.
B0Result b0_projection(std::span<const double> xi, const SolutionPoint& point, double r0 = 0.25);

/// Same projection for a planar field xi(x, y); the angular integral uses
/// the trapezoid rule with n_theta points.
B0Result b0_projection(const std::function<double(double, double)>& xi,
                       const SolutionPoint& point, double r0 = 0.25, int n_theta = 64);

struct FoldPair {
  SolutionPoint first;
  SolutionPoint second;
  int fold_index = -1;
};

/// For every fold of the branch, two solutions on opposite sides of the
/// turning point sharing rho to 1e-10.
std::vector<FoldPair> find_fold_pairs(const Branch& branch, const MeshPolicy& policy,
                                      const ContinuationOptions& options = {});

/// (u_a - u_b) / ||u_a - u_b||_inf on the mesh of point a, normalized
/// differences of u~ (the b0 input for a fold pair).
std::vector<double> normalized_difference(const SolutionPoint& a, const SolutionPoint& b);

}  // namespace bubblelab
