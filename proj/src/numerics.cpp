#include "bubblelab/numerics.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace bubblelab::numerics {

namespace {

// Legendre P_n(x) and P_n'(x) by the three-term recurrence.
std::pair<double, double> legendre(int n, double x) {
  double p0 = 1.0, p1 = x;
  if (n == 0) return {1.0, 0.0};
  for (int k = 2; k <= n; ++k) {
    const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
    p0 = p1;
    p1 = p2;
  }
  const double dp = (std::abs(x) == 1.0)
                        ? 0.5 * n * (n + 1.0) * std::pow(x, n + 1)
                        : n * (x * p1 - p0) / (x * x - 1.0);
  return {p1, dp};
}

}  // namespace

QuadratureRule gauss_lobatto(int degree) {
  if (degree < 1) throw std::invalid_argument("gauss_lobatto: degree must be >= 1");
  const int n = degree + 1;
  QuadratureRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  // Interior nodes are the roots of P_p'; Newton from Chebyshev-Lobatto guesses
  // applied to q(x) = (1 - x^2) P_p'(x) via the identity q' = -p(p+1) P_p.
  for (int i = 0; i < n; ++i) {
    double x = -std::cos(std::numbers::pi * i / degree);
    if (i != 0 && i != degree) {
      for (int it = 0; it < 100; ++it) {
        auto [p, dp] = legendre(degree, x);
        const double q = (1.0 - x * x) * dp;
        const double dq = -degree * (degree + 1.0) * p;
        const double dx = q / dq;
        x -= dx;
        if (std::abs(dx) < 1e-16) break;
      }
    }
    rule.nodes[i] = x;
    const double p = legendre(degree, x).first;
    rule.weights[i] = 2.0 / (degree * (degree + 1.0) * p * p);
  }
  return rule;
}

QuadratureRule gauss_legendre(int n) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: n must be >= 1");
  QuadratureRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    double x = -std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 1.0;
    for (int it = 0; it < 100; ++it) {
      auto [p, d] = legendre(n, x);
      dp = d;
      const double dx = p / d;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    dp = legendre(n, x).second;
    rule.nodes[i] = x;
    rule.weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  return rule;
}

std::vector<double> barycentric_weights(std::span<const double> nodes) {
  const std::size_t n = nodes.size();
  std::vector<double> w(n, 1.0);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t k = 0; k < n; ++k)
      if (k != j) w[j] /= (nodes[j] - nodes[k]);
  return w;
}

std::vector<double> differentiation_matrix(std::span<const double> nodes) {
  const std::size_t n = nodes.size();
  const auto w = barycentric_weights(nodes);
  std::vector<double> d(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double diag = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double v = (w[j] / w[i]) / (nodes[i] - nodes[j]);
      d[i * n + j] = v;
      diag -= v;
    }
    d[i * n + i] = diag;
  }
  return d;
}

InterpolatedValue barycentric_eval(std::span<const double> nodes,
                                   std::span<const double> bary,
                                   std::span<const double> values, double x) {
  const std::size_t n = nodes.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (x == nodes[i]) {
      // Derivative from the differentiation-matrix row at the node.
      double deriv = 0.0;
      for (std::size_t j = 0; j < n; ++j)
        if (j != i) deriv += (bary[j] / bary[i]) / (nodes[i] - nodes[j]) * (values[j] - values[i]);
      return {values[i], deriv};
    }
  }
  double num = 0.0, den = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double c = bary[j] / (x - nodes[j]);
    num += c * values[j];
    den += c;
  }
  const double p = num / den;
  double dnum = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double c = bary[j] / (x - nodes[j]);
    dnum += c * (p - values[j]) / (x - nodes[j]);
  }
  return {p, dnum / den};
}

std::vector<double> fornberg_weights(double z, std::span<const double> x, int max_order) {
  const int n = static_cast<int>(x.size());
  const int m = max_order;
  std::vector<double> c((m + 1) * n, 0.0);
  auto at = [&](int k, int j) -> double& { return c[k * n + j]; };
  double c1 = 1.0;
  double c4 = x[0] - z;
  at(0, 0) = 1.0;
  for (int i = 1; i < n; ++i) {
    const int mn = std::min(i, m);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = x[i] - z;
    for (int j = 0; j < i; ++j) {
      const double c3 = x[i] - x[j];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k)
          at(k, i) = c1 * (k * at(k - 1, i - 1) - c5 * at(k, i - 1)) / c2;
        at(0, i) = -c1 * c5 * at(0, i - 1) / c2;
      }
      for (int k = mn; k >= 1; --k) at(k, j) = (c4 * at(k, j) - k * at(k - 1, j)) / c3;
      at(0, j) = c4 * at(0, j) / c3;
    }
    c1 = c2;
  }
  return c;
}

double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

}  // namespace bubblelab::numerics
