#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "kacsphere/density1d.hpp"

using namespace kacsphere;

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;

// cumulative distribution oracle by fine midpoint quadrature
double cdf_oracle(const Density1D& f, double x) {
  const int n = 200000;
  const double lo = f.grid.lo;
  if (x <= lo) return 0.0;
  const double h = (std::min(x, f.grid.hi) - lo) / n;
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += f.pdf(lo + (i + 0.5) * h);
  return s * h;
}
}  // namespace

TEST_CASE("moments of the built-in families") {
  const Density1D g = gaussian_density(1.0);
  CHECK(moment(g, 2.0) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(moment(g, 4.0) == doctest::Approx(3.0).epsilon(1e-8));
  const Density1D u = uniform_density(-std::sqrt(3.0), std::sqrt(3.0));
  CHECK(moment(u, 2.0) == doctest::Approx(1.0).epsilon(1e-10));
  const Density1D b = bump_density(1.0);
  CHECK(moment(b, 2.0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(moment(b, 4.0) == doctest::Approx(2.6).epsilon(1e-12));  // sum of three U[-1,1]
  CHECK(moment(b, 0.0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("relative entropy closed forms") {
  const Density1D g1 = gaussian_density(1.0);
  const Density1D g2 = gaussian_density(2.0);
  CHECK(std::abs(relative_entropy(g1, g1)) < 1e-10);
  // (σ² - 1 - log σ²)/2
  CHECK(relative_entropy(g2, g1) ==
        doctest::Approx(0.5 * (1.0 - std::log(2.0))).epsilon(1e-7));
  const Density1D u = uniform_density(-std::sqrt(3.0), std::sqrt(3.0));
  const double expected = -std::log(2.0 * std::sqrt(3.0)) + 0.5 * kLog2Pi + 0.5;
  CHECK(relative_entropy(u, g1) == doctest::Approx(expected).epsilon(1e-7));
  CHECK(relative_entropy_vs_gaussian(u) == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("relative entropy: sentinel when f sits where g vanishes") {
  const Density1D g1 = gaussian_density(1.0);
  const Density1D b = bump_density(1.0);
  std::string diag;
  CHECK(std::isinf(relative_entropy(g1, b, &diag)));
  CHECK(!diag.empty());
  CHECK(std::isfinite(relative_entropy(b, g1)));
}

TEST_CASE("Gibbs: relative entropy nonnegative, zero only at equality") {
  const Density1D g1 = gaussian_density(1.0);
  const Density1D g2 = gaussian_density(2.0);
  const Density1D b = bump_density(1.0);
  CHECK(relative_entropy(b, g1) > 1e-3);
  CHECK(relative_entropy(g2, g1) > 1e-3);
  CHECK(relative_entropy(g1, g1) > -1e-9);
  CHECK(relative_entropy(b, b) > -1e-9);
  CHECK(std::abs(relative_entropy(b, b)) < 1e-10);
}

TEST_CASE("fisher information closed forms") {
  CHECK(fisher_information(gaussian_density(1.0)) == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(fisher_information(gaussian_density(4.0)) == doctest::Approx(0.25).epsilon(1e-7));
  // bump: I = (√3/2) log(2+√3); the edge pieces contribute the constant 1/4
  const double bump_fisher = 0.5 * std::sqrt(3.0) * std::log(2.0 + std::sqrt(3.0));
  CHECK(fisher_information(bump_density(1.0)) == doctest::Approx(bump_fisher).epsilon(1e-9));
  CHECK(fisher_information(bump_density(1.0)) >= 0.0);
  const Density1D u = uniform_density(0.0, 1.0);
  CHECK_THROWS_AS(fisher_information(u), std::invalid_argument);
}

TEST_CASE("relative Fisher against the Gaussian: identity route equals quadrature") {
  const Density1D g1 = gaussian_density(1.0);
  const Density1D g2 = gaussian_density(2.0);
  const Density1D b = bump_density(1.0);
  CHECK(std::abs(relative_fisher_gaussian(g1)) < 1e-7);
  CHECK(relative_fisher_gaussian(g2) == doctest::Approx(0.5).epsilon(1e-6));
  for (const Density1D* f : {&g1, &g2, &b}) {
    const double via_identity = relative_fisher_gaussian(*f);
    const double direct = relative_fisher_gaussian_direct(*f);
    CHECK(via_identity >= -1e-9);
    CHECK(std::abs(via_identity - direct) < 1e-6);
  }
}

TEST_CASE("pole control") {
  const Density1D u = uniform_density(-1.0, 1.0);
  // fine-quadrature oracle at ~10x the working resolution
  const Grid1D fine = make_panel_grid(-1.0, 1.0, {}, 640, 16);
  const double oracle =
      fine.integrate([](double v) { return 0.5 * std::pow(1.0 - v * v / 4.0, -2.0); });
  CHECK(pole_control(u, 4, 4.0) == doctest::Approx(oracle).epsilon(1e-10));
  CHECK(pole_control(u, 100000, 4.0) == doctest::Approx(1.0).epsilon(1e-4));
  CHECK_THROWS_AS(pole_control(u, 4, 2.0), std::invalid_argument);

  // support bound: P_q <= (1 - R²/N)^{-q/(q-2)} for support in [-R, R]
  const Density1D b = bump_density(1.0);
  const double q = 3.0;
  for (int N : {16, 64}) {
    const double cap = std::pow(1.0 - 9.0 / N, -q / (q - 2.0));
    CHECK(pole_control(b, N, q) <= cap + 1e-9);
  }
}

TEST_CASE("sup-norm bound via Fisher information") {
  const Density1D g1 = gaussian_density(1.0);
  const double b1 = supnorm_via_fisher(g1);
  CHECK(b1 == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(g1.pdf(0.0) ==
        doctest::Approx(1.0 / std::sqrt(2.0 * std::numbers::pi)).epsilon(1e-12));
  CHECK(*std::max_element(g1.values.begin(), g1.values.end()) <= b1 + 1e-6);
  const Density1D g4 = gaussian_density(4.0);
  CHECK(supnorm_via_fisher(g4) == doctest::Approx(0.5).epsilon(1e-7));
  CHECK_NOTHROW(supnorm_via_fisher(bump_density(1.0)));
}

TEST_CASE("Cauchy-Schwarz moment bound across families") {
  for (const Density1D& f : {gaussian_density(1.0), gaussian_density(2.0), bump_density(1.0),
                             uniform_density(-std::sqrt(3.0), std::sqrt(3.0))}) {
    CHECK(moment(f, 1.0) <= std::sqrt(moment(f, 2.0)) + 1e-12);
  }
}

TEST_CASE("quantile table examples") {
  const Density1D u = uniform_density(0.0, 1.0);
  const QuantileTable qu = quantile_table(u, 1 << 12);
  CHECK(qu(0.5) == doctest::Approx(0.5).epsilon(1e-9));
  const Density1D g = gaussian_density(1.0);
  const QuantileTable qg = quantile_table(g, 1 << 14);
  CHECK(std::abs(qg(0.5)) < 1e-9);
  CHECK(qg(0.841344746) == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("CDF composed with the quantile table is the identity") {
  const Density1D g = gaussian_density(1.0);
  const QuantileTable qt = quantile_table(g, 1 << 16);
  double sup = 0.0;
  for (int i = 1; i < 999; ++i) {
    const double t = i / 1000.0;
    sup = std::max(sup, std::abs(cdf_oracle(g, qt(t)) - t));
  }
  CHECK(sup < 1e-8);
}

TEST_CASE("csv loader renormalises and differentiates") {
  const char* path = "test_density_tmp.csv";
  {
    std::ofstream out(path);
    out << "v,f\n";
    for (int i = 0; i <= 400; ++i) {
      const double v = -6.0 + 12.0 * i / 400.0;
      out << v << "," << 2.0 * std::exp(-0.5 * v * v) << "\n";  // deliberately unnormalised
    }
  }
  double renorm = 0.0;
  const Density1D f = density_from_csv(path, &renorm);
  CHECK(renorm == doctest::Approx(2.0 * std::sqrt(2.0 * std::numbers::pi)).epsilon(1e-4));
  CHECK(moment(f, 2.0) == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(f.has_derivative());
  CHECK(fisher_information(f) == doctest::Approx(1.0).epsilon(1e-3));
  std::remove(path);
}

TEST_CASE("square pushforward carries the mass and the kinks") {
  const Density1D b = bump_density(1.0);
  const UDensity g = square_pushforward(b, 16.0, 1 << 12);
  CHECK(g.alpha == -0.5);
  CHECK(g.mass() == doctest::Approx(1.0).epsilon(1e-10));
  REQUIRE(g.kinks.size() == 2);
  CHECK(g.kinks[0] == doctest::Approx(1.0));
  CHECK(g.kinks[1] == doctest::Approx(9.0));
}
