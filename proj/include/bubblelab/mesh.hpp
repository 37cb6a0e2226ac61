#pragma once

// Graded spectral-element mesh on [0, R] in the substituted variable
// t = r^(1+alpha). Elements are uniform in a computational coordinate s in
// [0, 1] mapped by t = T sinh(a s) / sinh(a), T = R^(1+alpha); each element
// carries Gauss-Lobatto nodes of a fixed degree. The stiffness matrix is the
// weak form of (1/t)(t u_t)_t and the lumped mass is the GLL quadrature of
// t dt, so the discrete radial Laplacian is exactly symmetric.

#include <functional>
#include <span>
#include <vector>

#include <Eigen/Sparse>

namespace bubblelab {

using SparseMatrix = Eigen::SparseMatrix<double>;

struct MeshPolicy {
  int nodes = 512;             // target node count (rounded up to E*p + 1)
  int degree = 4;              // polynomial degree per element
  double core_fraction = 0.3;  // share of the s-interval spent inside the core
};

class RadialMesh {
 public:
  /// Mesh on [0, radius] with `elements` elements of the given degree and
  /// grading parameter a >= 0 (a = 0 is uniform in t).
  RadialMesh(double alpha, int elements, int degree, double grading, double radius = 1.0);

  /// Chooses the grading so that a `core_fraction` of the s-interval covers
  /// t <= t_core, and the element count so that there are at least
  /// policy.nodes nodes.
  static RadialMesh graded(double alpha, const MeshPolicy& policy, double t_core,
                           double radius = 1.0);

  /// Grading that resolves a blow-up core of height lambda for weight value
  /// hbar1(0): t_core = exp(-lambda/2) / sqrt(pi hbar1(0) / (1+alpha)).
  static RadialMesh for_lambda(double alpha, const MeshPolicy& policy, double lambda,
                               double hbar1_at_origin);

  double alpha() const noexcept { return alpha_; }
  double radius() const noexcept { return radius_; }
  double t_max() const noexcept { return t_max_; }
  double grading() const noexcept { return grading_; }
  int elements() const noexcept { return elements_; }
  int degree() const noexcept { return degree_; }
  int size() const noexcept { return static_cast<int>(t_.size()); }

  const std::vector<double>& s() const noexcept { return s_; }
  const std::vector<double>& t() const noexcept { return t_; }
  const std::vector<double>& r() const noexcept { return r_; }
  /// Lumped mass: Omega_j ~ integral of phi_j t dt.
  const std::vector<double>& mass() const noexcept { return mass_; }
  /// Lumped integral of phi_j / t dt (node 0 is set to 0).
  const std::vector<double>& inverse_mass() const noexcept { return inv_mass_; }
  /// K_ij = integral of t phi_i' phi_j' dt.
  const SparseMatrix& stiffness() const noexcept { return stiffness_; }

  double t_of_s(double s) const;
  double dt_ds(double s) const;
  double s_of_t(double t) const;
  double t_of_r(double r) const;
  double r_of_t(double t) const;

  struct Sample {
    double value;
    double d_dr;  // derivative with respect to r
    double d_dt;  // derivative with respect to t
  };

  /// Interpolates nodal values at radius r (0 <= r <= radius).
  Sample evaluate(std::span<const double> values, double r) const;

  /// Nodal derivative du/dr through the element differentiation matrices
  /// (average of the two one-sided values at element interfaces).
  std::vector<double> derivative_r(std::span<const double> values) const;

  /// Integral over B(0, R) of |x|^{2 alpha} f(|x|) dx, computed in t as
  /// 2pi/(1+alpha) * int_0^{R^(1+alpha)} f(r(t)) t dt by Gauss-Legendre on
  /// every element (split at R).
  double integrate_density(const std::function<double(double)>& f, double R) const;

  /// Nodal quadrature of |x|^{2a} f over the whole mesh disk with the lumped
  /// weights (exact for the discrete problem).
  double lumped_density_integral(std::span<const double> f) const;

  /// Index range of element e in the global node numbering.
  int element_first_node(int e) const noexcept { return e * degree_; }

  const std::vector<double>& reference_nodes() const noexcept { return ref_nodes_; }
  const std::vector<double>& reference_weights() const noexcept { return ref_weights_; }

 private:
  int locate(double s) const;

  double alpha_;
  double radius_;
  double t_max_;
  double grading_;
  double sinh_a_;
  int elements_;
  int degree_;
  std::vector<double> ref_nodes_, ref_weights_, ref_bary_, ref_diff_;
  std::vector<double> s_, t_, r_, gprime_;
  std::vector<double> mass_, inv_mass_;
  SparseMatrix stiffness_;
};

}  // namespace bubblelab
