#pragma once

// Small polynomial toolbox shared by the mesh, the quadratures and the
// finite-difference operators.

#include <span>
#include <vector>

namespace bubblelab::numerics {

struct QuadratureRule {
  std::vector<double> nodes;    // on [-1, 1]
  std::vector<double> weights;
};

/// Gauss-Lobatto-Legendre rule with degree + 1 points (both endpoints).
QuadratureRule gauss_lobatto(int degree);

/// Gauss-Legendre rule with n interior points.
QuadratureRule gauss_legendre(int n);

/// Barycentric weights for Lagrange interpolation on the given nodes.
std::vector<double> barycentric_weights(std::span<const double> nodes);

/// Row-major (n x n) matrix D with D[i*n + j] = l_j'(x_i).
std::vector<double> differentiation_matrix(std::span<const double> nodes);

struct InterpolatedValue {
  double value;
  double derivative;
};

/// Evaluates the interpolant through (nodes, values) and its derivative at x.
InterpolatedValue barycentric_eval(std::span<const double> nodes,
                                   std::span<const double> bary,
                                   std::span<const double> values, double x);

/// Fornberg's finite-difference weights: returns weights[m*n + j] for the
/// m-th derivative at z using stencil points x[0..n-1], m = 0..max_order.
std::vector<double> fornberg_weights(double z, std::span<const double> x, int max_order);

/// Stable log(1 + exp(x)).
double softplus(double x);

}  // namespace bubblelab::numerics
