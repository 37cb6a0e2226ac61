#include <doctest.h>

#include <random>

#include "bubblelab/errors.hpp"
#include "bubblelab/linearization.hpp"
#include "bubblelab/liouville.hpp"
#include "oracles.hpp"

using namespace bubblelab;
using greenfns::WeightSpec;
using oracle::pi;

namespace {

const WeightSpec kConst = WeightSpec::constant_spec(0.5);
const WeightSpec kGauss = WeightSpec::gaussian_spec(0.5, 0.25);

SolutionPoint exact_point(double m) { return exact_disk_family(kConst, m, mesh_for_exact_family(0.5, m)); }

Eigen::VectorXd as_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

double weighted_cosine(const std::vector<double>& a, const std::vector<double>& b,
                       const Eigen::VectorXd& w) {
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += w[i] * a[i] * b[i];
    aa += w[i] * a[i] * a[i];
    bb += w[i] * b[i] * b[i];
  }
  return ab / std::sqrt(aa * bb);
}

std::vector<double> xi0_samples(const SolutionPoint& p) {
  const double a1 = 1.5, gbar = pi * p.spec.hstar(0.0) / a1;
  std::vector<double> out;
  for (double r : p.mesh->r()) {
    const double q = gbar * std::pow(r / p.sigma, 2.0 * a1);
    out.push_back((1.0 - q) / (1.0 + q));
  }
  return out;
}

const Branch& gaussian_branch() {
  static const Branch b = continue_branch(6.0, 14.0, 9, kGauss, MeshPolicy{});
  return b;
}

}  // namespace

TEST_CASE("constants are annihilated by the nonlocal mode-0 operator") {
  const auto p = exact_point(100.0);
  const auto op = build_mode_operator(p, 0);
  const Eigen::VectorXd one = Eigen::VectorXd::Ones(op.size());
  const Eigen::VectorXd out = op.apply(one);
  const Eigen::VectorXd row_scale = op.local.cwiseAbs() * one;
  for (int i = 0; i < op.size(); ++i) CHECK(std::abs(out[i]) <= 1e-12 * row_scale[i]);
  // phi = 1 is still excluded by the Dirichlet condition at r = 1.
  CHECK(op.coupling == doctest::Approx(2.0 * pi * 1.5 / p.rho));
}

TEST_CASE("nonlocal term only in mode 0") {
  const auto p = gaussian_branch().points[3];
  std::mt19937_64 gen(5);
  std::normal_distribution<double> nd;
  Eigen::VectorXd phi(p.mesh->size());
  for (auto& v : phi) v = nd(gen);
  for (int k : {1, 2, 5}) {
    const auto op = build_mode_operator(p, k);
    CHECK(op.coupling == 0.0);
    const Eigen::VectorXd diff = op.apply(phi) - op.local * phi;
    CHECK(diff.cwiseAbs().maxCoeff() <= 1e-14 * (op.local * phi).cwiseAbs().maxCoeff());
  }
  const auto op0 = build_mode_operator(p, 0);
  const Eigen::VectorXd rank_one = op0.local * phi - op0.apply(phi);
  const Eigen::VectorXd expected = op0.coupling * op0.weight * op0.weight.dot(phi);
  CHECK((rank_one - expected).cwiseAbs().maxCoeff() <= 1e-12 * (op0.local * phi).cwiseAbs().maxCoeff());
  CHECK(expected.cwiseAbs().maxCoeff() > 0.0);
  CHECK_THROWS_AS(build_mode_operator(p, -1), PreconditionError);
}

TEST_CASE("symmetrized mode operators are self-adjoint") {
  const auto p = gaussian_branch().points[4];
  std::mt19937_64 gen(11);
  std::normal_distribution<double> nd;
  for (int k : {0, 1, 3}) {
    const Eigen::MatrixXd A = symmetrized_matrix(build_mode_operator(p, k));
    for (int trial = 0; trial < 5; ++trial) {
      Eigen::VectorXd x(A.rows()), y(A.rows());
      for (auto& v : x) v = nd(gen);
      for (auto& v : y) v = nd(gen);
      x.normalize();
      y.normalize();
      const double lhs = (A * x).dot(y), rhs = x.dot(A * y);
      CHECK(std::abs(lhs - rhs) <= 1e-10 * std::max(1.0, A.cwiseAbs().maxCoeff()));
    }
  }
}

TEST_CASE("entire operator: one bounded kernel vector, Y0") {
  const auto op = build_entire_mode_operator(0.5, 0);
  const auto s = mode_spectrum(op, 8);
  REQUIRE(s.eigenvalues.size() == 8);
  int small = 0;
  for (double e : s.eigenvalues) small += std::abs(e) <= 1e-4;
  CHECK(small == 1);
  CHECK(s.smallest_magnitude <= 1e-4);
  std::vector<double> y0;
  for (double r : op.mesh->r()) y0.push_back(liouville::kernel_Y0(0.5, r));
  CHECK(weighted_cosine(s.eigenvector_0, y0, op.weight) >= 0.999);
  for (int k = 1; k <= 8; ++k) CHECK(mode_spectrum(build_entire_mode_operator(0.5, k), 8).smallest_magnitude >= 0.1);
}

TEST_CASE("exact family mode-0 spectrum approaches the entire one") {
  const double entire = mode_spectrum(build_entire_mode_operator(0.5, 0), 8).eigenvalues[0];
  double prev = INFINITY;
  for (double m : {10.0, 100.0, 1e4, 1e6}) {
    const double e = mode_spectrum(build_mode_operator(exact_point(m), 0), 8).eigenvalues[0];
    const double gap = std::abs(e - entire);
    CHECK(gap < prev);
    prev = gap;
  }
  CHECK(prev <= 1e-4);
}

TEST_CASE("kernel correspondence at m = 1e4") {
  // The eigenvector is the bounded kernel element plus an additive constant
  // coming from the nonlocal term; compare after removing its weighted mean.
  const auto p = exact_point(1e4);
  const auto op = build_mode_operator(p, 0);
  const auto s = mode_spectrum(op, 4);
  const auto& phi = s.eigenvector_0;
  const double mean = op.weight.dot(as_vector(phi)) / op.weight.sum();
  std::vector<double> centred(phi.size());
  for (std::size_t i = 0; i < phi.size(); ++i) centred[i] = phi[i] - mean;
  const double c0 = centred.front();
  for (auto& v : centred) v /= c0;
  const auto xi0 = xi0_samples(p);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < phi.size(); ++i) {
    num += op.weight[i] * (centred[i] - xi0[i]) * (centred[i] - xi0[i]);
    den += op.weight[i] * xi0[i] * xi0[i];
  }
  CHECK(std::sqrt(num / den) <= 0.05);
  CHECK(weighted_cosine(centred, xi0, op.weight) >= 0.99);
}

TEST_CASE("large modes grow like k^2") {
  const auto& p = gaussian_branch().points[4];
  const double e20 = mode_spectrum(build_mode_operator(p, 20), 4).smallest_magnitude;
  const double e40 = mode_spectrum(build_mode_operator(p, 40), 4).smallest_magnitude;
  CHECK(e40 / e20 == doctest::Approx(4.0).epsilon(0.2));
}

TEST_CASE("mode monotonicity for k >= 2") {
  for (const auto& p : gaussian_branch().points) {
    double prev = 0.0;
    for (int k = 2; k <= 8; ++k) {
      const double e = mode_spectrum(build_mode_operator(p, k), 4).smallest_magnitude;
      CHECK(e >= prev * (1.0 - 1e-8));
      prev = e;
    }
  }
}

TEST_CASE("zero operator fixture") {
  for (int n : {20, 200}) {
    ModeOperator op;
    op.k = 1;
    op.local.resize(n, n);
    op.weight = Eigen::VectorXd::Ones(n);
    const auto s = mode_spectrum(op, 8);
    REQUIRE(s.eigenvalues.size() == 8);
    for (double e : s.eigenvalues) CHECK(e == 0.0);
  }
}

TEST_CASE("nondegeneracy scan on the gaussian branch") {
  const auto& branch = gaussian_branch();
  const auto rows = nondegeneracy_scan(branch, 8);
  REQUIRE(rows.size() == branch.points.size());
  MeshPolicy fine;
  fine.nodes = 1024;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& row = rows[i];
    CHECK_FALSE(row.kernel_flag);
    CHECK(row.min_magnitude >= 1e-6);
    CHECK(row.eig_min.size() == 9);
    const auto& p = branch.points[i];
    const auto pf = resolve_on_mesh(
        p, std::make_shared<const RadialMesh>(RadialMesh::for_lambda(0.5, fine, p.lambda, 1.0)));
    for (int k = 0; k <= 8; ++k) {
      const double e = mode_spectrum(build_mode_operator(pf, k), 8).eigenvalues[0];
      CHECK(std::abs(row.eig_min[k] - e) <= 0.01 * std::abs(e));
    }
  }
  ScanOptions threaded;
  threaded.threads = 4;
  const auto again = nondegeneracy_scan(branch, 8, threaded);
  for (std::size_t i = 0; i < rows.size(); ++i) CHECK(again[i].eig_min == rows[i].eig_min);
}

TEST_CASE("scan edge cases") {
  const auto single = continue_branch(8.0, 8.0, 1, kGauss, MeshPolicy{});
  CHECK(nondegeneracy_scan(single, 3).size() == 1);
  // ell = 0: recorded, the smallest mode-0 value shrinks like e^{-lambda}.
  const auto flat = continue_branch(10.0, 16.0, 4, kConst, MeshPolicy{});
  ScanOptions opt;
  opt.kernel_threshold = 1e-6;
  const auto rows = nondegeneracy_scan(flat, 2, opt);
  CHECK(rows.size() == 4);
  CHECK(std::abs(rows.back().eig_min[0]) < std::abs(rows.front().eig_min[0]));
  CHECK(rows.back().kernel_flag);
}

TEST_CASE("b0 projection") {
  const auto p = exact_point(100.0);
  CHECK(b0_projection(xi0_samples(p), p).b0 == doctest::Approx(1.0).epsilon(1e-6));
  auto odd = [](double x, double y) { return x * std::exp(-(x * x + y * y)); };
  CHECK(std::abs(b0_projection(odd, p).b0) <= 1e-12);
  auto radial = [&](double x, double y) {
    return p.mesh->evaluate(xi0_samples(p), std::hypot(x, y)).value;
  };
  CHECK(b0_projection(radial, p).b0 == doctest::Approx(1.0).epsilon(1e-6));

  // lambda-tangent of the family, normalized in max norm.
  const double lam = p.lambda, d = 1e-4;
  const double m2 = oracle::ExactFamily::m_of_lambda(0.5, lam + d);
  const oracle::ExactFamily e1{0.5, 100.0}, e2{0.5, m2};
  std::vector<double> tangent;
  double norm = 0.0;
  for (double r : p.mesh->r()) {
    tangent.push_back((e2.u_tilde(r) - e1.u_tilde(r)) / d);
    norm = std::max(norm, std::abs(tangent.back()));
  }
  for (auto& v : tangent) v /= norm;
  const auto res = b0_projection(tangent, p);
  CHECK(std::abs(res.b0) >= 0.5);
  CHECK_FALSE(res.unreliable_scale);
  CHECK(b0_projection(xi0_samples(exact_point(1.0)), exact_point(1.0)).unreliable_scale);
}
