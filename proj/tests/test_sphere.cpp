#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "kacsphere/sphere.hpp"

using namespace kacsphere;

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;

double gaussian_pdf(double v) {
  return std::exp(-0.5 * v * v) / std::sqrt(2.0 * std::numbers::pi);
}
}  // namespace

TEST_CASE("z-curve reproduces the Gaussian closed form") {
  const Density1D g = gaussian_density(1.0);
  for (int N : {8, 32, 128}) {
    const NormalizationCurve c = build_zcurve(g, N, 2.0 * N + 8.0);
    REQUIRE(c.u_lo < 0.5 * N);
    REQUIRE(c.u_hi >= 2.0 * N);
    double sup = 0.0;
    for (double u = 0.5 * N; u <= 2.0 * N; u += 0.25) {
      const double expected = -0.5 * N * kLog2Pi - 0.5 * u;
      sup = std::max(sup, std::abs(c.log_z_at(u) - expected));
    }
    CHECK(sup < 1e-6);
    CHECK(c.mass_drift < 1e-6);
  }
}

TEST_CASE("z-curve lambda field: flat for the Gaussian after closed-form subtraction") {
  const Density1D g = gaussian_density(1.0);
  const int N = 32;
  const NormalizationCurve c = build_zcurve(g, N, 2.0 * N);
  // lambda from the exact chi-square law of |v|²
  auto lambda_exact = [N](double u) {
    const double sig = std::sqrt(2.0);
    const double log_h = 0.5 * (N - 2) * std::log(u) - 0.5 * u - 0.5 * N * std::log(2.0) -
                         std::lgamma(0.5 * N);
    const double dev = (u - N) / (std::sqrt(static_cast<double>(N)) * sig);
    return std::sqrt(2.0 * std::numbers::pi * N) * sig * std::exp(log_h) -
           std::exp(-0.5 * dev * dev);
  };
  double sup = 0.0;
  for (std::size_t i = 0; i < c.u.size(); i += 7)
    sup = std::max(sup, std::abs(c.lambda[i] - lambda_exact(c.u[i])));
  CHECK(sup < 1e-6);
}

TEST_CASE("z-curve lambda decays with N for the bump family") {
  const Density1D b = bump_density(1.0);
  const NormalizationCurve c16 = build_zcurve(b, 16, 64.0);
  const NormalizationCurve c64 = build_zcurve(b, 64, 160.0);
  const NormalizationCurve c256 = build_zcurve(b, 256, 512.0);
  const double s16 = c16.sup_abs_lambda();
  const double s64 = c64.sup_abs_lambda();
  const double s256 = c256.sup_abs_lambda();
  CHECK(s64 < s16);
  CHECK(s256 < s64);
  CHECK(s256 < 0.5 * s16);
}

TEST_CASE("z-curve csv export") {
  const Density1D g = gaussian_density(1.0);
  const NormalizationCurve c = build_zcurve(g, 8, 24.0);
  const char* path = "zcurve_tmp.csv";
  c.export_csv(path);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "u,log_z,lambda");
  int rows = 0;
  std::string line;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == static_cast<int>(c.u.size()));
  std::remove(path);
}

TEST_CASE("uniform marginal: exact constant at N=3") {
  const SphereDensity F = SphereDensity::uniform(3);
  const Density1D p = marginal1(F);
  const double expected = 1.0 / (2.0 * std::sqrt(3.0));
  for (double v : {-1.5, -0.3, 0.0, 0.9, 1.7}) {
    CHECK(p.pdf(v) == doctest::Approx(expected).epsilon(1e-12));
  }
  CHECK(moment(p, 2.0) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("uniform marginal approaches the Gaussian") {
  const SphereDensity F = SphereDensity::uniform(10000);
  const Density1D p = marginal1(F);
  double sup = 0.0;
  for (double v = -5.0; v <= 5.0; v += 0.01)
    sup = std::max(sup, std::abs(p.pdf(v) - gaussian_pdf(v)));
  CHECK(sup < 1e-3);
}

TEST_CASE("marginal weight factor expansion at v = 0") {
  const int N = 1000;
  const double factor = std::exp(log_marginal_weight(N, 0.0));
  const double expansion = (1.0 - 3.0 / (4.0 * N)) / std::sqrt(2.0 * std::numbers::pi);
  CHECK(std::abs(factor - expansion) < 1e-4 * expansion);
}

TEST_CASE("gaussian conditioned tensorization has the uniform marginal") {
  const SphereDensity Fg =
      SphereDensity::conditioned_tensorization(gaussian_density(1.0), 16);
  const SphereDensity Fu = SphereDensity::uniform(16);
  const Density1D pg = marginal1(Fg);
  const Density1D pu = marginal1(Fu);
  double sup = 0.0;
  for (double v = -3.8; v <= 3.8; v += 0.05)
    sup = std::max(sup, std::abs(pg.pdf(v) - pu.pdf(v)));
  CHECK(sup < 1e-6);
}

TEST_CASE("conditioned marginal: normalisation drift and the sphere second moment") {
  const Density1D b = bump_density(1.0);
  for (int N : {8, 16, 64}) {
    const SphereDensity F = SphereDensity::conditioned_tensorization(b, N);
    double drift = 1.0;
    const Density1D p = marginal1(F, 0, &drift);
    CHECK(drift < 1e-5);
    // Σ_j ∫ v_j² F dσ = N forces ∫ v² Π₁ = 1 exactly
    CHECK(moment(p, 2.0) == doctest::Approx(1.0).epsilon(2e-6));
  }
}

TEST_CASE("rejects invalid conditioned tensorization bases") {
  CHECK_THROWS_AS(SphereDensity::conditioned_tensorization(gaussian_density(2.0), 16),
                  std::invalid_argument);
  CHECK_THROWS_AS(marginal1(SphereDensity::uniform(3), 7), std::invalid_argument);
}

TEST_CASE("order-2 marginal: uniform N=4 is constant on the disk") {
  const SphereDensity F = SphereDensity::uniform(4);
  const SphereMarginal m = marginal2(F);
  const double expected = std::exp(log_sphere_area(2) - log_sphere_area(4) - std::log(4.0));
  CHECK(m.density2(0.3, 0.4) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(m.density2(1.2, -0.7) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(m.density2(1.5, 1.4) == 0.0);  // outside the disk
  const double mass = m.integrate([](double, double) { return 1.0; });
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("order-2 marginal: mass and consistency with the first marginal") {
  const Density1D b = bump_density(1.0);
  const SphereDensity F = SphereDensity::conditioned_tensorization(b, 16);
  const SphereMarginal m2 = marginal2(F);
  CHECK(m2.mass_drift < 1e-6);
  const Density1D p1 = marginal1(F);
  // marginalise out v2 by quadrature and compare
  std::vector<double> nodes, wts;
  gauss_legendre(16, nodes, wts);
  double sup = 0.0;
  for (double v1 : {-2.1, -0.8, 0.0, 0.6, 1.9}) {
    const double lim = std::min(3.0, std::sqrt(16.0 - v1 * v1));
    double acc = 0.0;
    const int panels = 60;
    for (int p = 0; p < panels; ++p) {
      const double a = -lim + 2.0 * lim * p / panels;
      const double bb = -lim + 2.0 * lim * (p + 1) / panels;
      const double c = 0.5 * (a + bb), h = 0.5 * (bb - a);
      for (int i = 0; i < 16; ++i) acc += h * wts[i] * m2.density2(v1, c + h * nodes[i]);
    }
    sup = std::max(sup, std::abs(acc - p1.pdf(v1)));
  }
  CHECK(sup < 1e-5);
}

TEST_CASE("line to sphere marginal conversion and round trip") {
  const SphereDensity Fu = SphereDensity::uniform(16);
  const Density1D pu = marginal1(Fu);
  const GridFunction fj = sphere_marginal_from_line(pu, 16);
  for (std::size_t i = 0; i < fj.values.size(); i += 37) {
    if (fj.values[i] != 0.0) CHECK(fj.values[i] == doctest::Approx(1.0).epsilon(1e-9));
  }

  const Density1D b = bump_density(1.0);
  const SphereDensity Fb = SphereDensity::conditioned_tensorization(b, 32);
  const Density1D pb = marginal1(Fb);
  const GridFunction fjb = sphere_marginal_from_line(pb, 32);
  const Density1D back = line_from_sphere_marginal(fjb, 32);
  double sup = 0.0;
  for (std::size_t i = 0; i < pb.values.size(); ++i) {
    if (fjb.values[i] == 0.0) continue;  // flagged pole underflow, excluded
    sup = std::max(sup, std::abs(back.values[i] - pb.values[i]));
  }
  CHECK(sup < 1e-9);
}

TEST_CASE("spherical entropy: uniform and gaussian tensorization vanish") {
  CHECK(spherical_entropy(SphereDensity::uniform(16)) == 0.0);
  const SphereDensity Fg =
      SphereDensity::conditioned_tensorization(gaussian_density(1.0), 16);
  CHECK(std::abs(spherical_entropy(Fg)) < 1e-6);
  const SphereDensity Fg64 =
      SphereDensity::conditioned_tensorization(gaussian_density(1.0), 64);
  CHECK(std::abs(spherical_entropy(Fg64)) < 1e-6);
}

TEST_CASE("spherical entropy per particle approaches H(f|gamma)") {
  const Density1D b = bump_density(1.0);
  const double h_line = relative_entropy_vs_gaussian(b);
  CHECK(h_line > 0.0);
  const SphereDensity F = SphereDensity::conditioned_tensorization(b, 512);
  const double ratio = spherical_entropy(F) / 512.0;
  CHECK(std::abs(ratio - h_line) < 0.01);
}

TEST_CASE("partial entropy sum: degenerate families vanish, bump obeys the factor 2") {
  CHECK(std::abs(partial_entropy_sum(SphereDensity::uniform(16))) < 1e-9);
  const SphereDensity Fg =
      SphereDensity::conditioned_tensorization(gaussian_density(1.0), 16);
  CHECK(std::abs(partial_entropy_sum(Fg)) < 1e-6);
  const Density1D b = bump_density(1.0);
  const SphereDensity Fb = SphereDensity::conditioned_tensorization(b, 64);
  const double partial = partial_entropy_sum(Fb);
  const double hn = spherical_entropy(Fb);
  CHECK(partial >= 0.0);
  CHECK(partial <= 2.0 * hn + 1e-8);
}

TEST_CASE("spherical Fisher of the marginal: three-term cancellation for the uniform") {
  for (int N : {8, 16, 64, 256, 1024}) {
    const SphericalFisherMarginal r = spherical_fisher_marginal(SphereDensity::uniform(N));
    CHECK(std::abs(r.value) < 1e-6);
  }
  const SphereDensity Fg =
      SphereDensity::conditioned_tensorization(gaussian_density(1.0), 16);
  CHECK(std::abs(spherical_fisher_marginal(Fg).value) < 1e-6);
  const SphereDensity Fb =
      SphereDensity::conditioned_tensorization(bump_density(1.0), 64);
  CHECK(spherical_fisher_marginal(Fb).value >= 0.0);
}

TEST_CASE("full spherical Fisher: gaussian cancels, BCD inequality holds") {
  const SphereDensity Fg =
      SphereDensity::conditioned_tensorization(gaussian_density(1.0), 16);
  CHECK(std::abs(spherical_fisher_full(Fg)) < 1e-5);

  const Density1D b = bump_density(1.0);
  for (int N : {16, 64}) {
    const SphereDensity Fb = SphereDensity::conditioned_tensorization(b, N);
    const double full = spherical_fisher_full(Fb);
    const double marg = spherical_fisher_marginal(Fb).value;
    CHECK(full >= 0.0);
    CHECK(N * marg <= 2.0 * full + 1e-6);
  }
}

TEST_CASE("full spherical Fisher per particle is bounded by the score average") {
  const Density1D b = bump_density(1.0);
  const SphereDensity F = SphereDensity::conditioned_tensorization(b, 64);
  const Density1D p = marginal1(F);
  double score_avg = 0.0;
  for (std::size_t i = 0; i < p.grid.size(); ++i) {
    const double x = p.grid.points[i];
    const double fv = b.pdf(x);
    if (fv < kAtomFloor) continue;
    const double g = b.dpdf(x) / fv;
    score_avg += p.grid.weights[i] * g * g * p.values[i];
  }
  CHECK(spherical_fisher_full(F) / 64.0 <= score_avg + 1e-9);
}

TEST_CASE("condition report") {
  const SphereDensity Fg =
      SphereDensity::conditioned_tensorization(gaussian_density(1.0), 16);
  const ConditionReport rg = condition_report(Fg, 4.0, 3.0);
  CHECK(!rg.c_h_positive);  // H_N = 0: the C_H hypothesis fails and is flagged

  const Density1D b = bump_density(1.0);
  for (int N : {16, 64}) {
    const SphereDensity Fb = SphereDensity::conditioned_tensorization(b, N);
    const ConditionReport r = condition_report(Fb, 4.0, 3.0);
    CHECK(std::isfinite(r.a_k));
    CHECK(std::isfinite(r.a_i));
    CHECK(std::isfinite(r.a_pq));
    CHECK(std::isfinite(r.i_over_n));
    CHECK(r.c_h_positive);
    // the marginal's moments are controlled by the base's through the
    // normalisation-curve ratio
    const double lam_n = Fb.z_n->lambda_at(static_cast<double>(N));
    const double cap = std::sqrt(N / (N - 1.0)) *
                       (1.0 + Fb.z_nm1->sup_abs_lambda()) / (1.0 + lam_n) *
                       moment(b, 4.0);
    CHECK(r.a_k <= cap + 1e-9);
  }
}
