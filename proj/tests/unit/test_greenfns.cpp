#include <doctest.h>

#include <random>

#include "bubblelab/errors.hpp"
#include "bubblelab/greenfns.hpp"
#include "oracles.hpp"

using namespace bubblelab;
using namespace bubblelab::greenfns;
using oracle::pi;

namespace {

Point polar(double r, double th) { return {r * std::cos(th), r * std::sin(th)}; }

Point random_interior(std::mt19937_64& gen) {
  std::uniform_real_distribution<double> ur(0.0, 0.95), ut(0.0, 2.0 * pi);
  return polar(std::sqrt(ur(gen)), ut(gen));
}

}  // namespace

TEST_CASE("green function values and boundary condition") {
  CHECK(green_disk({0.5, 0.0}, {0.0, 0.0}) == doctest::Approx(-std::log(0.5) / (2.0 * pi)).epsilon(1e-15));
  CHECK(green_disk({0.5, 0.0}, {0.0, 0.0}) == doctest::Approx(0.110318).epsilon(1e-5));
  std::mt19937_64 gen(1);
  for (int i = 0; i < 50; ++i) {
    const Point y = random_interior(gen);
    const Point x = polar(1.0, 0.37 * i);
    CHECK(std::abs(green_disk(x, y)) <= 1e-14);
  }
  CHECK_THROWS_AS(green_disk({0.2, 0.1}, {0.2, 0.1}), DomainError);
  CHECK_THROWS_AS(green_disk({0.2, 0.1}, {1.0, 0.0}), DomainError);
  CHECK_THROWS_AS(green_disk({1.2, 0.0}, {0.1, 0.0}), DomainError);
}

TEST_CASE("green function symmetry and positivity") {
  std::mt19937_64 gen(2);
  for (int i = 0; i < 100; ++i) {
    const Point x = random_interior(gen), y = random_interior(gen);
    CHECK(std::abs(green_disk(x, y) - green_disk(y, x)) <= 1e-12);
    CHECK(green_disk(x, y) > 0.0);
  }
}

TEST_CASE("unit flux around the source") {
  const double eps = 1e-3, h = 1e-7;
  for (const Point y : {Point{0.0, 0.0}, Point{0.3, -0.2}, Point{-0.6, 0.5}}) {
    const int n = 256;
    double flux = 0.0;
    for (int j = 0; j < n; ++j) {
      const double th = 2.0 * pi * j / n;
      const Point nu{std::cos(th), std::sin(th)};
      const Point xp{y[0] + (eps + h) * nu[0], y[1] + (eps + h) * nu[1]};
      const Point xm{y[0] + (eps - h) * nu[0], y[1] + (eps - h) * nu[1]};
      const double dn = (green_disk(xp, y) - green_disk(xm, y)) / (2.0 * h);
      flux -= dn * eps * 2.0 * pi / n;
    }
    CHECK(std::abs(flux - 1.0) <= 1e-6);
  }
}

TEST_CASE("regular part") {
  std::mt19937_64 gen(3);
  for (int i = 0; i < 50; ++i) CHECK(std::abs(regular_part(random_interior(gen), {0.0, 0.0})) <= 1e-15);
  CHECK(regular_part({0.0, 0.0}, {0.0, 0.0}) == 0.0);
  const Point y = polar(0.5, 0.8);
  CHECK(regular_part(y, y) == doctest::Approx(std::log(0.75) / (2.0 * pi)).epsilon(1e-14));
  CHECK(regular_part(y, y) == doctest::Approx(-0.045787).epsilon(1e-4));
  // Along the circle through y the first-order change vanishes; in a general
  // direction it is |grad R| d, about 0.1 d here.
  const Point tangent{-std::sin(0.8), std::cos(0.8)};
  for (double d : {1e-4, 1e-6, 1e-8}) {
    const Point xt{y[0] + d * tangent[0], y[1] + d * tangent[1]};
    CHECK(std::abs(regular_part(xt, y) - regular_part(y, y)) <= 1e-6);
    const Point x{y[0] + d * 0.6, y[1] - d * 0.8};
    CHECK(std::abs(regular_part(x, y) - regular_part(y, y)) <= 1e-6 + 0.11 * d);
  }
}

TEST_CASE("weight assembly and hbar1") {
  const auto one = WeightSpec::constant_spec(0.5);
  CHECK(assemble_weight(one, {0.5, 0.0}) == doctest::Approx(0.5).epsilon(1e-15));
  for (const auto& s : {one, WeightSpec::gaussian_spec(1.5, 0.25), WeightSpec::polynomial_spec(0.3, {1.0, 0.3})})
    CHECK(assemble_weight(s, {0.0, 0.0}) == 0.0);
  double worst = 0.0;
  for (int i = 1; i <= 1000; ++i) {
    const Point x = polar(i / 1000.0, 0.1 * i);
    worst = std::max(worst, std::abs(assemble_weight(one, x) - std::exp(-4.0 * pi * 0.5 * green_disk(x, {0.0, 0.0}))));
  }
  CHECK(worst <= 1e-12);

  for (int i = 0; i < 100; ++i) {
    const Point x = polar(0.01 * (i + 1), 0.7 * i);
    CHECK(hbar1(one, x) == 1.0);
    const auto g = WeightSpec::gaussian_spec(0.7, -0.4);
    const double lhs = hbar1(g, x) * std::pow(norm(x), 1.4);
    CHECK(std::abs(lhs - assemble_weight(g, x)) <= 1e-14 * std::max(1.0, lhs));
  }
  CHECK(hbar1(WeightSpec::gaussian_spec(0.5, 0.25), {1.0, 0.0}) == doctest::Approx(std::exp(0.25)).epsilon(1e-14));
  CHECK(hbar1(WeightSpec::gaussian_spec(0.5, 0.25), {1.0, 0.0}) == doctest::Approx(1.28403).epsilon(1e-5));
}

TEST_CASE("weight spec validation") {
  CHECK_THROWS_AS(WeightSpec::polynomial_spec(0.5, {1.0, -2.0}).validate(), DomainError);
  CHECK_THROWS_AS(WeightSpec::constant_spec(0.5, -1.0).validate(), DomainError);
  CHECK_THROWS_AS(WeightSpec::constant_spec(2.0).validate(), DomainError);
  CHECK_NOTHROW(WeightSpec::polynomial_spec(0.5, {1.0, -0.9}).validate());
  CHECK_NOTHROW(WeightSpec::gaussian_spec(0.5, -3.0).validate());
}

TEST_CASE("hamiltonian") {
  for (const auto& s : {WeightSpec::constant_spec(0.5, 3.0), WeightSpec::gaussian_spec(1.5, 0.25),
                        WeightSpec::polynomial_spec(0.3, {1.0, 0.3, 0.1})})
    CHECK(hamiltonian_Hp(s, {0.0, 0.0}) == 0.0);
  const auto g = WeightSpec::gaussian_spec(0.5, 0.25);
  CHECK(hamiltonian_Hp(g, polar(0.6, 1.1)) == doctest::Approx(0.09).epsilon(1e-14));
  const double h = 1e-5;
  for (const auto& s : {g, WeightSpec::polynomial_spec(0.3, {1.0, 0.3, 0.1})}) {
    const double dx = (hamiltonian_Hp(s, {h, 0.0}) - hamiltonian_Hp(s, {-h, 0.0})) / (2.0 * h);
    const double dy = (hamiltonian_Hp(s, {0.0, h}) - hamiltonian_Hp(s, {0.0, -h})) / (2.0 * h);
    CHECK(std::hypot(dx, dy) <= 1e-9);
  }
  // Scaling h_* by a constant shifts log h_* and leaves H_p unchanged.
  const auto p1 = WeightSpec::polynomial_spec(0.5, {1.0, 0.3});
  const auto p2 = WeightSpec::polynomial_spec(0.5, {2.0, 0.6});
  for (int i = 0; i < 20; ++i) {
    const Point x = polar(0.045 * i, 0.3 * i);
    CHECK(std::abs(hamiltonian_Hp(p1, x) - hamiltonian_Hp(p2, x)) <= 1e-15);
  }
  CHECK(hamiltonian_Hp(WeightSpec::constant_spec(0.5, 1.0), polar(0.3, 0.0)) ==
        hamiltonian_Hp(WeightSpec::constant_spec(0.5, 7.0), polar(0.3, 0.0)));
}

TEST_CASE("rate coefficient") {
  CHECK(ell_coefficient(0.5, 1.0, 0.0) == 0.0);
  CHECK(ell_coefficient(WeightSpec::constant_spec(0.5)) == 0.0);
  const double l = ell_coefficient(0.5, 1.0, 1.0);
  CHECK(l == doctest::Approx(oracle::ell(0.5, 1.0, 1.0)).epsilon(1e-14));
  CHECK(l == doctest::Approx(9.2832).epsilon(1e-4));
  for (double a : {0.3, 1.5, 2.7})
    for (double hb : {0.5, 1.0, 3.0})
      CHECK(ell_coefficient(a, hb, -0.7) == doctest::Approx(oracle::ell(a, hb, -0.7)).epsilon(1e-13));
  CHECK(ell_coefficient(1.5, 2.0, 1.0) / ell_coefficient(1.5, 1.0, 1.0) ==
        doctest::Approx(std::pow(2.0, -0.4)).epsilon(1e-14));
  CHECK(ell_coefficient(WeightSpec::gaussian_spec(0.5, 0.25)) ==
        doctest::Approx(oracle::ell(0.5, 1.0, 1.0)).epsilon(1e-14));
  CHECK(WeightSpec::gaussian_spec(0.5, 0.25).lap_log_hstar_at_origin() == 1.0);
  CHECK(WeightSpec::polynomial_spec(0.5, {2.0, 0.6}).lap_log_hstar_at_origin() == doctest::Approx(1.2));
  CHECK_THROWS_AS(ell_coefficient(1.0, 1.0, 1.0), DomainError);
  CHECK_THROWS_AS(ell_coefficient(0.5, 0.0, 1.0), DomainError);
}

TEST_CASE("epsilon0") {
  CHECK(epsilon0(2.5) == 2.0);
  CHECK(epsilon0(0.5) == 1.0);
  CHECK(epsilon0(1.0) == 2.0);
  CHECK(epsilon0(1.0 - 1e-12) == doctest::Approx(2.0).epsilon(1e-11));
  CHECK_THROWS_AS(epsilon0(-0.2), DomainError);
}
