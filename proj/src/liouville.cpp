#include "bubblelab/liouville.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "bubblelab/errors.hpp"
#include "bubblelab/numerics.hpp"

namespace bubblelab::liouville {

using std::numbers::pi;

void validate_alpha(double alpha) {
  if (!std::isfinite(alpha) || alpha <= 0.0)
    throw DomainError("alpha must be positive, got " + std::to_string(alpha));
  if (std::abs(alpha - std::round(alpha)) < 1e-12)
    throw DomainError("alpha must be non-integer, got " + std::to_string(alpha));
}

BubbleProfile::BubbleProfile(double alpha, double mu) : alpha_(alpha), mu_(mu) {
  validate_alpha(alpha);
  if (!std::isfinite(mu)) throw DomainError("mu must be finite");
}

double BubbleProfile::operator()(double r) const {
  if (!(r >= 0.0) || !std::isfinite(r)) throw DomainError("radius must be finite and >= 0");
  const double head = std::log(8.0 * (1.0 + alpha_) * (1.0 + alpha_)) + mu_;
  if (r == 0.0) return head;
  return head - 2.0 * numerics::softplus(mu_ + 2.0 * (1.0 + alpha_) * std::log(r));
}

double BubbleProfile::mass(double R) const {
  if (!(R > 0.0)) {
    if (R == 0.0) return 0.0;
    throw DomainError("cutoff radius must be positive");
  }
  const double full = 8.0 * pi * (1.0 + alpha_);
  if (std::isinf(R)) return full;
  // s / (1 + s) with s = e^mu R^(2+2a), evaluated as a logistic in log s.
  const double log_s = mu_ + 2.0 * (1.0 + alpha_) * std::log(R);
  return full / (1.0 + std::exp(-log_s));
}

double bubble_profile(double alpha, double mu, double r) { return BubbleProfile(alpha, mu)(r); }

double bubble_mass(double alpha, double mu, double R) { return BubbleProfile(alpha, mu).mass(R); }

double kernel_Y0(double alpha, double r) {
  validate_alpha(alpha);
  if (std::isinf(r)) return -1.0;
  const double q = std::pow(r, 2.0 * (1.0 + alpha));
  if (std::isinf(q)) return -1.0;
  return (1.0 - q) / (1.0 + q);
}

double entire_potential(double alpha, double r) {
  const double q = std::pow(r, 2.0 * (1.0 + alpha));
  const double d = 1.0 + q;
  return 8.0 * (1.0 + alpha) * (1.0 + alpha) * std::pow(r, 2.0 * alpha) / (d * d);
}

namespace {

// Laplacian in the t variable, (1/t)(t phi_t)_t, using a centred stencil of
// `width` points (shifted one-sided near the mesh ends).
std::vector<double> laplacian_t(std::span<const double> t, std::span<const double> phi,
                                int width) {
  const int n = static_cast<int>(t.size());
  std::vector<double> out(n);
  const int half = width / 2;
  for (int i = 0; i < n; ++i) {
    int lo = std::clamp(i - half, 0, n - width);
    std::span<const double> xs = t.subspan(lo, width);
    const auto w = numerics::fornberg_weights(t[i], xs, 2);
    // Differences against phi[i]: derivative weights sum to zero, so constants are exact.
    double d1 = 0.0, d2 = 0.0;
    for (int j = 0; j < width; ++j) {
      const double dphi = phi[lo + j] - phi[i];
      d1 += w[1 * width + j] * dphi;
      d2 += w[2 * width + j] * dphi;
    }
    out[i] = d2 + d1 / t[i];
  }
  return out;
}

}  // namespace

LinearizedApplyResult entire_linearized_apply(double alpha, std::span<const double> phi,
                                              std::span<const double> radii,
                                              double warning_tolerance) {
  validate_alpha(alpha);
  const std::size_t n = radii.size();
  if (phi.size() != n) throw PreconditionError("phi and mesh sizes differ");
  if (n < 7) throw PreconditionError("mesh needs at least 7 points");
  for (std::size_t i = 0; i < n; ++i) {
    if (!(radii[i] > 0.0)) throw PreconditionError("mesh radii must be positive");
    if (i > 0 && !(radii[i] > radii[i - 1]))
      throw PreconditionError("mesh radii must be strictly increasing");
  }
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = std::pow(radii[i], 1.0 + alpha);

  const auto lap6 = laplacian_t(t, phi, 7);
  const auto lap4 = laplacian_t(t, phi, 5);

  LinearizedApplyResult result;
  result.values.resize(n);
  double scale = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double metric = (1.0 + alpha) * (1.0 + alpha) * std::pow(radii[i], 2.0 * alpha);
    const double potential = entire_potential(alpha, radii[i]) * phi[i];
    result.values[i] = metric * lap6[i] + potential;
    result.error_estimate =
        std::max(result.error_estimate, metric * std::abs(lap6[i] - lap4[i]));
    scale = std::max(scale, std::abs(potential));
  }
  result.accuracy_warning = result.error_estimate > warning_tolerance * scale;
  return result;
}

}  // namespace bubblelab::liouville
