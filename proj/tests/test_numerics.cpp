#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "kacsphere/numerics.hpp"

using namespace kacsphere;

namespace {
constexpr double kPi = std::numbers::pi;

double chi2_pdf(double u, int n) {
  if (u <= 0.0) return 0.0;
  return std::exp(0.5 * (n - 2) * std::log(u) - 0.5 * u - 0.5 * n * std::log(2.0) -
                  std::lgamma(0.5 * n));
}
}  // namespace

TEST_CASE("LogScaled round trips and zero handling") {
  CHECK(LogScaled::from_value(0.0).sign == 0);
  CHECK(LogScaled::from_value(0.0).value() == 0.0);
  const LogScaled a = LogScaled::from_value(-3.5);
  CHECK(a.sign == -1);
  CHECK(a.value() == doctest::Approx(-3.5).epsilon(1e-15));
  const LogScaled b = LogScaled::from_log(800.0);  // overflows a double
  const LogScaled c = b / LogScaled::from_log(799.0);
  CHECK(c.value() == doctest::Approx(std::exp(1.0)));
  CHECK((a * LogScaled::zero()).sign == 0);
}

TEST_CASE("log_sphere_area closed forms") {
  CHECK(log_sphere_area(2) == doctest::Approx(std::log(2.0 * kPi)).epsilon(1e-14));
  CHECK(log_sphere_area(3) == doctest::Approx(std::log(4.0 * kPi)).epsilon(1e-14));
  CHECK(log_sphere_area(4) == doctest::Approx(std::log(2.0 * kPi * kPi)).epsilon(1e-14));
  CHECK(log_sphere_area(1) == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  CHECK_THROWS_AS(log_sphere_area(0), std::invalid_argument);
}

TEST_CASE("gamma_ratio_factor matches the chi-moment product") {
  // even k = 2l: (2/N)^l Γ(N/2+l)/Γ(N/2) = prod_{i<l} (1 + 2i/N)
  auto product = [](int N, int l) {
    double prod = 1.0;
    for (int i = 0; i < l; ++i) prod *= 1.0 + 2.0 * i / static_cast<double>(N);
    return prod;
  };
  CHECK(gamma_ratio_factor(10, 2.0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(gamma_ratio_factor(10, 4.0) == doctest::Approx(1.2).epsilon(1e-12));
  CHECK(gamma_ratio_factor(4, 6.0) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(gamma_ratio_factor(4, 6.0) == doctest::Approx(product(4, 3)).epsilon(1e-12));
  for (int N : {2, 3, 7, 16, 128, 1024}) {
    for (int l = 1; l <= 6; ++l) {
      CHECK(gamma_ratio_factor(N, 2.0 * l) ==
            doctest::Approx(product(N, l)).epsilon(1e-10));
    }
  }
}

TEST_CASE("gamma_ratio_factor is exactly 1 at k=2 and tends to 1") {
  for (int N = 2; N <= 4096; N = N < 32 ? N + 1 : N * 2) {
    CHECK(std::abs(gamma_ratio_factor(N, 2.0) - 1.0) < 1e-12);
  }
  for (double k : {3.0, 4.0, 5.0, 6.0}) {
    const double sup = gamma_ratio_sup(k);
    CHECK(std::isfinite(sup));
    CHECK(sup >= 1.0);
    // sup is attained at N=2: Γ(1 + k/2)
    CHECK(sup == doctest::Approx(std::exp(std::lgamma(1.0 + 0.5 * k))).epsilon(1e-12));
    CHECK(std::abs(gamma_ratio_factor(4096, k) - 1.0) < 0.01);
  }
}

TEST_CASE("Gauss-Legendre integrates polynomials exactly") {
  std::vector<double> x, w;
  gauss_legendre(8, x, w);
  double s0 = 0.0, s2 = 0.0, s14 = 0.0;
  for (int i = 0; i < 8; ++i) {
    s0 += w[i];
    s2 += w[i] * x[i] * x[i];
    s14 += w[i] * std::pow(x[i], 14);
  }
  CHECK(s0 == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(s2 == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(s14 == doctest::Approx(2.0 / 15.0).epsilon(1e-13));
}

TEST_CASE("panel grid invariants") {
  const Grid1D g = make_panel_grid(-3.0, 3.0, {-1.0, 1.0}, 64, 16, 10);
  CHECK_NOTHROW(g.validate());
  double s = 0.0;
  for (double w : g.weights) s += w;
  CHECK(s == doctest::Approx(6.0).epsilon(1e-13));
  // integrate |v| (kink at an aligned knot 0? not aligned; use v^2)
  const double m2 = g.integrate([](double v) { return v * v; });
  CHECK(m2 == doctest::Approx(18.0).epsilon(1e-13));
}

TEST_CASE("sphere grid absorbs the endpoint weight") {
  const double N = 8.0;
  const Grid1D g = make_sphere_grid(N, 128, 16);
  CHECK_NOTHROW(g.validate());
  // ∫ (1 - v²/N)^{-1/2} dv = π √N picks up the inverse square-root weight
  const double val = g.integrate([N](double v) { return 1.0 / std::sqrt(1.0 - v * v / N); });
  CHECK(val == doctest::Approx(kPi * std::sqrt(N)).epsilon(1e-10));
}

TEST_CASE("spline and pchip reproduce smooth functions") {
  std::vector<double> x, y;
  for (int i = 0; i <= 60; ++i) {
    x.push_back(-2.0 + 4.0 * i / 60.0);
    y.push_back(std::exp(-x.back() * x.back()));
  }
  const CubicSpline s(x, y);
  const Pchip p(x, y);
  for (double t : {-1.73, -0.41, 0.0, 0.97, 1.55}) {
    const double ref = std::exp(-t * t);
    CHECK(s(t) == doctest::Approx(ref).epsilon(1e-6));
    CHECK(p(t) == doctest::Approx(ref).epsilon(1e-4));
    CHECK(s.derivative(t) == doctest::Approx(-2.0 * t * ref).epsilon(2e-3));
    CHECK(p.derivative(t) == doctest::Approx(-2.0 * t * ref).epsilon(2e-2));
  }
}

TEST_CASE("fft_convolve_power: chi-square closed form") {
  // base = chi²₁ with the u^{-1/2} singular factor tabulated smoothly
  UDensity base;
  base.u_max = 128.0;
  base.alpha = -0.5;
  const int n = 1 << 15;
  base.values.resize(n + 1);
  base.smooth_eval = [](double u) { return std::exp(-0.5 * u) / std::sqrt(2.0 * kPi); };
  for (int i = 0; i <= n; ++i) base.values[i] = base.smooth_eval(i * base.du());
  CHECK(base.mass() == doctest::Approx(1.0).epsilon(1e-10));

  ConvolveReport rep;
  const UDensity h4 = fft_convolve_power(base, 4, &rep);
  CHECK(rep.mass_drift < 1e-6);
  double sup = 0.0;
  for (std::size_t i = 0; i < h4.size(); ++i) {
    const double u = i * h4.du();
    if (u > 60.0) break;
    sup = std::max(sup, std::abs(h4.values[i] - chi2_pdf(u, 4)));
  }
  CHECK(sup < 1e-8);
}

TEST_CASE("fft_convolve_power: N=1 returns the base unchanged") {
  UDensity base;
  base.u_max = 64.0;
  base.alpha = -0.5;
  const int n = 1 << 12;
  base.values.resize(n + 1);
  base.smooth_eval = [](double u) { return std::exp(-0.5 * u) / std::sqrt(2.0 * kPi); };
  for (int i = 0; i <= n; ++i) base.values[i] = base.smooth_eval(i * base.du());
  const UDensity h1 = fft_convolve_power(base, 1);
  CHECK(h1.alpha == base.alpha);
  for (std::size_t i = 0; i < h1.size(); i += 97) CHECK(h1.values[i] == base.values[i]);
}

TEST_CASE("fft_convolve_power: uniform to triangle") {
  UDensity base;
  base.u_max = 4.0;
  base.alpha = 0.0;
  const int n = 1 << 12;
  base.values.assign(n + 1, 0.0);
  const double du = base.du();
  for (int i = 0; i <= n; ++i) {
    const double u = i * du;
    base.values[i] = u < 1.0 ? 1.0 : (u == 1.0 ? 0.5 : 0.0);
  }
  CHECK(base.mass() == doctest::Approx(1.0).epsilon(1e-8));
  const UDensity h2 = fft_convolve_power(base, 2);
  double sup = 0.0;
  for (std::size_t i = 0; i < h2.size(); ++i) {
    const double u = i * du;
    const double tri = u <= 1.0 ? u : (u <= 2.0 ? 2.0 - u : 0.0);
    sup = std::max(sup, std::abs(h2.values[i] - tri));
  }
  CHECK(sup < 3.0 * du);  // first-order accurate across the jump of the base
}

TEST_CASE("fft_convolve_power: aliasing detector fires on a cramped grid") {
  UDensity base;
  base.u_max = 4.0;
  base.alpha = 0.0;
  const int n = 1 << 12;
  base.values.assign(n + 1, 0.0);
  const double du = base.du();
  for (int i = 0; i <= n; ++i) {
    const double u = i * du;
    base.values[i] = u < 3.0 ? 1.0 / 3.0 : (u == 3.0 ? 0.5 / 3.0 : 0.0);
  }
  // N=2 support reaches 6 > u_max: boundary mass must trip the detector
  CHECK_THROWS_AS(fft_convolve_power(base, 2), std::runtime_error);
}

TEST_CASE("corrected convolution is high order on smooth data") {
  const int n = 4096;
  const double U = 8.0, du = U / n;
  std::vector<double> a(n + 1), b(n + 1);
  for (int i = 0; i <= n; ++i) {
    const double u = i * du;
    a[i] = std::exp(-u);
    b[i] = std::exp(-2.0 * u);
  }
  const std::vector<double> c = corrected_convolution(a, b, du);
  // ∫ e^{-s} e^{-2(u-s)} ds = e^{-u} - e^{-2u}
  for (int i = 64; i <= n; i += 512) {
    const double u = i * du;
    CHECK(c[i] == doctest::Approx(std::exp(-u) - std::exp(-2.0 * u)).epsilon(1e-11));
  }
}

TEST_CASE("quantile table: left-continuous inverse across a flat stretch") {
  // cdf flat on [1,2]: inverse at the flat level returns the left abscissa
  std::vector<double> x{0.0, 0.5, 1.0, 2.0, 3.0};
  std::vector<double> cdf{0.0, 0.25, 0.5, 0.5, 1.0};
  const QuantileTable qt = quantile_from_cdf(x, cdf, 4);
  CHECK(qt(0.5) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(qt(0.25) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(qt(0.75) == doctest::Approx(2.5).epsilon(1e-12));
}
