#include "kacsphere/sphere.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>

namespace kacsphere {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kWindowFloor = 1e-13;  // trusted-window cut relative to the peak

double round_up_pow2(double x) {
  double u = 2.0;
  while (u < x) u *= 2.0;
  return u;
}
}  // namespace

// ---------------------------------------------------------------------------
// NormalizationCurve

double NormalizationCurve::log_z_at(double uu) const {
  if (u.empty() || uu < u_lo || uu > u_hi) return -std::numeric_limits<double>::infinity();
  return interp(uu);
}

double NormalizationCurve::dlogz_du(double uu) const {
  if (u.empty() || uu < u_lo || uu > u_hi) return 0.0;
  return interp.derivative(uu);
}

double NormalizationCurve::lambda_at(double uu) const {
  if (u.empty() || uu < u_lo || uu > u_hi) return 0.0;
  const double step = u[1] - u[0];
  const std::size_t i =
      std::min(lambda.size() - 1, static_cast<std::size_t>((uu - u.front()) / step + 0.5));
  return lambda[i];
}

double NormalizationCurve::sup_abs_lambda() const {
  double s = 0.0;
  for (double l : lambda) s = std::max(s, std::abs(l));
  return s;
}

void NormalizationCurve::export_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("NormalizationCurve: cannot write " + path);
  out << "u,log_z,lambda\n";
  char buf[128];
  for (std::size_t i = 0; i < u.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.12g,%.12g,%.12g\n", u[i], log_z[i], lambda[i]);
    out << buf;
  }
}

NormalizationCurve build_zcurve(const Density1D& f, int N, double u_max) {
  if (N < 2) throw std::invalid_argument("build_zcurve: N must be >= 2");
  const double m2 = moment(f, 2.0);
  if (std::abs(m2 - 1.0) > 1e-6)
    throw std::invalid_argument("build_zcurve: base must have unit second moment");
  const double sigma_sq = moment(f, 4.0) - 1.0;
  const double edge = std::max(std::abs(f.grid.lo), std::abs(f.grid.hi));
  const double rootN = std::sqrt(static_cast<double>(N));
  const double need =
      std::max(u_max, N + 12.0 * rootN * std::max(1.0, std::sqrt(std::max(sigma_sq, 0.0)))) +
      edge * edge + 16.0;
  const double U = round_up_pow2(need);
  const int n_cells = 1 << 16;

  UDensity base = square_pushforward(f, U, n_cells);
  ConvolveReport rep;
  UDensity h = fft_convolve_power(base, N, &rep);

  NormalizationCurve curve;
  curve.N = N;
  curve.sigma_sq = sigma_sq;
  curve.mass_drift = rep.mass_drift;

  const double du = h.du();
  const std::size_t n = h.size();
  double peak = 0.0;
  std::size_t ipeak = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (h.values[i] > peak) {
      peak = h.values[i];
      ipeak = i;
    }
  if (peak <= 0.0) throw std::runtime_error("build_zcurve: empty convolution");

  std::size_t lo = ipeak, hi = ipeak;
  while (lo > 1 && h.values[lo - 1] >= peak * kWindowFloor) --lo;
  while (hi + 1 < n && h.values[hi + 1] >= peak * kWindowFloor) ++hi;
  while (hi * du > u_max && hi > ipeak) --hi;

  const double log_area_half = log_sphere_area(N) - std::log(2.0);
  const double sig = std::sqrt(std::max(sigma_sq, 1e-300));
  curve.u.reserve(hi - lo + 1);
  for (std::size_t i = lo; i <= hi; ++i) {
    const double uu = i * du;
    const double hv = h.values[i];
    curve.u.push_back(uu);
    curve.log_z.push_back(std::log(hv) - log_area_half - 0.5 * (N - 2) * std::log(uu));
    const double dev = (uu - N) / (rootN * sig);
    curve.lambda.push_back(std::sqrt(2.0 * std::numbers::pi) * rootN * sig * hv -
                           std::exp(-0.5 * dev * dev));
  }
  curve.u_lo = curve.u.front();
  curve.u_hi = curve.u.back();
  curve.interp = Pchip(curve.u, curve.log_z);
  return curve;
}

// ---------------------------------------------------------------------------
// SphereDensity

SphereDensity SphereDensity::uniform(int N) {
  if (N < 3) throw std::invalid_argument("SphereDensity: N must be >= 3");
  SphereDensity F;
  F.family = Family::Uniform;
  F.N = N;
  return F;
}

SphereDensity SphereDensity::conditioned_tensorization(const Density1D& base, int N,
                                                       double zcurve_u_max) {
  if (N < 3) throw std::invalid_argument("SphereDensity: N must be >= 3");
  const double m2 = moment(base, 2.0);
  if (std::abs(m2 - 1.0) > 1e-6)
    throw std::invalid_argument("SphereDensity: base must have M2 = 1 within 1e-6");
  if (!std::isfinite(moment(base, 4.0)))
    throw std::invalid_argument("SphereDensity: base must have finite M4");
  SphereDensity F;
  F.family = Family::ConditionedTensorization;
  F.N = N;
  F.base = base;
  const double u_max = zcurve_u_max > 0.0 ? zcurve_u_max : static_cast<double>(N) + 8.0;
  F.z_n = std::make_shared<NormalizationCurve>(build_zcurve(base, N, u_max));
  F.z_nm1 = std::make_shared<NormalizationCurve>(build_zcurve(base, N - 1, u_max));
  if (N >= 4) F.z_nm2 = std::make_shared<NormalizationCurve>(build_zcurve(base, N - 2, u_max));
  return F;
}

std::string SphereDensity::label() const {
  if (is_uniform()) return "uniform(N=" + std::to_string(N) + ")";
  return base->label + "^N/Z(N=" + std::to_string(N) + ")";
}

double log_marginal_weight(int N, double v) {
  const double t = 1.0 - v * v / static_cast<double>(N);
  if (t <= 0.0) return -std::numeric_limits<double>::infinity();
  return log_sphere_area(N - 1) - log_sphere_area(N) - 0.5 * std::log(static_cast<double>(N)) +
         0.5 * (N - 3) * std::log1p(-v * v / static_cast<double>(N));
}

// ---------------------------------------------------------------------------
// marginals

namespace {

// d/dv of log m_N(v)
double dlog_marginal_weight(int N, double v) {
  const double t = 1.0 - v * v / static_cast<double>(N);
  if (t <= 0.0) return 0.0;
  return -static_cast<double>(N - 3) * v / (static_cast<double>(N) * t);
}

struct CondMarginalData {
  Density1D base;
  std::shared_ptr<const NormalizationCurve> z_m1;  // dimension N-1
  double log_zn;                                   // log Z_N(f, sqrt(N))
  int N;
};

double cond_marginal_raw(const CondMarginalData& d, double v) {
  const double fv = d.base.pdf(v);
  if (fv <= 0.0) return 0.0;
  const double u = d.N - v * v;
  const double lz = d.z_m1->log_z_at(u);
  if (!std::isfinite(lz)) return 0.0;
  const double lw = log_marginal_weight(d.N, v);
  if (!std::isfinite(lw)) return 0.0;
  return std::exp(lw + lz - d.log_zn) * fv;
}

double cond_marginal_draw(const CondMarginalData& d, double v) {
  const double fv = d.base.pdf(v);
  const double u = d.N - v * v;
  const double lz = d.z_m1->log_z_at(u);
  if (!std::isfinite(lz)) return 0.0;
  const double lw = log_marginal_weight(d.N, v);
  if (!std::isfinite(lw)) return 0.0;
  const double w = std::exp(lw + lz - d.log_zn);
  const double dfv = d.base.dpdf(v);
  const double dlogw = dlog_marginal_weight(d.N, v) + d.z_m1->dlogz_du(u) * (-2.0 * v);
  return w * (dfv + fv * dlogw);
}

}  // namespace

Density1D marginal1(const SphereDensity& F, int j, double* drift) {
  if (j < 0 || j >= F.N) throw std::invalid_argument("marginal1: index out of range");
  if (F.N < 3) throw std::invalid_argument("marginal1: N must be >= 3");
  const int N = F.N;
  const double rootN = std::sqrt(static_cast<double>(N));

  if (F.is_uniform()) {
    Density1D p;
    p.grid = make_sphere_grid(static_cast<double>(N), 256, 16);
    p.label = "pi1(uniform,N=" + std::to_string(N) + ")";
    p.pdf_fn = [N](double v) { return std::exp(log_marginal_weight(N, v)); };
    p.dpdf_fn = [N](double v) {
      return std::exp(log_marginal_weight(N, v)) * dlog_marginal_weight(N, v);
    };
    p.finalize();
    if (drift) *drift = std::abs(p.grid.integrate(p.values) - 1.0);
    return p;
  }

  CondMarginalData data{*F.base, F.z_nm1, F.z_n->log_z_at(static_cast<double>(N)), N};
  if (!std::isfinite(data.log_zn))
    throw std::runtime_error("marginal1: Z_N(f, sqrt(N)) not resolvable");
  const double edge = std::max(std::abs(F.base->grid.lo), std::abs(F.base->grid.hi));
  const double s = std::min(edge, rootN * (1.0 - 1e-14));
  std::vector<double> knots;
  for (double k : F.base->knots)
    if (std::abs(k) < s) knots.push_back(k);

  Grid1D grid = make_panel_grid(-s, s, knots, 224, 16, 14);
  double mass = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i)
    mass += grid.weights[i] * cond_marginal_raw(data, grid.points[i]);
  if (drift) *drift = std::abs(mass - 1.0);
  if (std::abs(mass - 1.0) > 1e-5)
    throw std::runtime_error("marginal1: mass drift " + std::to_string(mass - 1.0) +
                             " exceeds 1e-5");
  const double inv = 1.0 / mass;
  Density1D p;
  p.grid = std::move(grid);
  p.knots = knots;
  p.label = "pi1(" + F.base->label + ",N=" + std::to_string(N) + ")";
  p.pdf_fn = [data, inv](double v) { return inv * cond_marginal_raw(data, v); };
  p.dpdf_fn = [data, inv](double v) { return inv * cond_marginal_draw(data, v); };
  p.finalize();
  return p;
}

namespace {

// knot-aligned cartesian quadrature over [-b, b]² clipped by the disk of
// radius R; kernel is evaluated as phi * rho pointwise
double cartesian_fold(const std::function<double(double, double)>& kernel,
                      const std::vector<double>& knots, double b, double R) {
  std::vector<double> cuts{-b, b};
  for (double k : knots)
    if (std::abs(k) < b) cuts.push_back(k);
  std::sort(cuts.begin(), cuts.end());
  std::vector<double> nodes, wts;
  gauss_legendre(12, nodes, wts);
  auto line = [&](double lim, const std::function<double(double)>& f1d) {
    double acc = 0.0;
    for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
      const double a0 = std::max(cuts[s], -lim), a1 = std::min(cuts[s + 1], lim);
      if (a1 <= a0) continue;
      const int sub = std::max(4, static_cast<int>((a1 - a0) / 0.15));
      for (int p = 0; p < sub; ++p) {
        const double p0 = a0 + (a1 - a0) * p / sub, p1 = a0 + (a1 - a0) * (p + 1) / sub;
        const double c = 0.5 * (p0 + p1), h = 0.5 * (p1 - p0);
        for (int i = 0; i < 12; ++i) acc += h * wts[i] * f1d(c + h * nodes[i]);
      }
    }
    return acc;
  };
  return line(b, [&](double v1) {
    const double rem = R * R - v1 * v1;
    if (rem <= 0.0) return 0.0;
    const double lim = std::min(b, std::sqrt(rem) * (1.0 - 1e-15));
    return line(lim, [&](double v2) { return kernel(v1, v2); });
  });
}

}  // namespace

SphereMarginal marginal2(const SphereDensity& F) {
  if (F.N < 4) throw std::invalid_argument("marginal2: N must be >= 4");
  const int N = F.N;
  const double rootN = std::sqrt(static_cast<double>(N));
  const double log_c2 =
      log_sphere_area(N - 2) - log_sphere_area(N) - std::log(static_cast<double>(N));

  SphereMarginal m;
  m.order = 2;
  m.N = N;
  m.support_radius = rootN;

  if (F.is_uniform()) {
    m.box_half = rootN;
    auto profile = [N, log_c2](double r2) {
      const double t = 1.0 - r2 / static_cast<double>(N);
      if (t <= 0.0) return 0.0;
      return std::exp(log_c2 + 0.5 * (N - 4) * std::log(t));
    };
    m.density2 = [profile](double v1, double v2) { return profile(v1 * v1 + v2 * v2); };
    m.mass_drift = 0.0;
    // polar quadrature; the radial factor carries the half-integer power
    m.integrator = [profile, rootN](const std::function<double(double, double)>& phi) {
      const Grid1D rg = make_panel_grid(0.0, rootN, {}, 48, 16, 12);
      const int ntheta = 256;
      double acc = 0.0;
      for (std::size_t i = 0; i < rg.size(); ++i) {
        const double r = rg.points[i];
        double th_acc = 0.0;
        for (int j = 0; j < ntheta; ++j) {
          const double th = 2.0 * std::numbers::pi * j / ntheta;
          th_acc += phi(r * std::cos(th), r * std::sin(th));
        }
        th_acc *= 2.0 * std::numbers::pi / ntheta;
        acc += rg.weights[i] * r * profile(r * r) * th_acc;
      }
      return acc;
    };
    return m;
  }

  const Density1D base = *F.base;
  const auto z_m2 = F.z_nm2;
  const double log_zn = F.z_n->log_z_at(static_cast<double>(N));
  const double edge = std::max(std::abs(base.grid.lo), std::abs(base.grid.hi));
  const double b = std::min(edge, rootN);
  m.box_half = b;
  auto raw = [N, log_c2, base, z_m2, log_zn](double v1, double v2) {
    const double f1 = base.pdf(v1), f2 = base.pdf(v2);
    if (f1 <= 0.0 || f2 <= 0.0) return 0.0;
    const double r2 = v1 * v1 + v2 * v2;
    const double t = 1.0 - r2 / static_cast<double>(N);
    if (t <= 0.0) return 0.0;
    const double lz = z_m2->log_z_at(N - r2);
    if (!std::isfinite(lz)) return 0.0;
    return std::exp(log_c2 + 0.5 * (N - 4) * std::log(t) + lz - log_zn) * f1 * f2;
  };
  const std::vector<double> knots = base.knots;
  const double mass = cartesian_fold([&](double v1, double v2) { return raw(v1, v2); },
                                     knots, b, rootN);
  m.mass_drift = std::abs(mass - 1.0);
  const double inv = 1.0 / mass;
  m.density2 = [raw, inv](double v1, double v2) { return inv * raw(v1, v2); };
  auto rho = m.density2;
  m.integrator = [rho, knots, b, rootN](const std::function<double(double, double)>& phi) {
    return cartesian_fold([&](double v1, double v2) { return phi(v1, v2) * rho(v1, v2); },
                          knots, b, rootN);
  };
  return m;
}

// ---------------------------------------------------------------------------
// line <-> sphere marginal conversion

GridFunction sphere_marginal_from_line(const Density1D& p, int N) {
  GridFunction out;
  out.grid = p.grid;
  out.values.resize(p.grid.size());
  for (std::size_t i = 0; i < p.grid.size(); ++i) {
    const double lw = log_marginal_weight(N, p.grid.points[i]);
    const double w = std::exp(lw);
    out.values[i] = (w > 1e-12) ? p.values[i] / w : 0.0;  // flagged by zero
  }
  return out;
}

Density1D line_from_sphere_marginal(const GridFunction& fj, int N) {
  Density1D p;
  p.grid = fj.grid;
  p.values.resize(fj.grid.size());
  for (std::size_t i = 0; i < fj.grid.size(); ++i)
    p.values[i] = fj.values[i] * std::exp(log_marginal_weight(N, fj.grid.points[i]));
  p.label = "line_from_sphere_marginal";
  p.finalize();
  return p;
}

// ---------------------------------------------------------------------------
// entropies

double spherical_entropy(const SphereDensity& F) {
  if (F.is_uniform()) return 0.0;
  const int N = F.N;
  const Density1D pi1 = marginal1(F);
  double i1 = 0.0;
  for (std::size_t i = 0; i < pi1.grid.size(); ++i) {
    const double pv = pi1.values[i];
    if (pv < kAtomFloor) continue;
    const double fv = F.base->pdf(pi1.grid.points[i]);
    if (fv < kAtomFloor) return std::numeric_limits<double>::infinity();
    i1 += pi1.grid.weights[i] * pv * std::log(fv);
  }
  const double log_zn = F.z_n->log_z_at(static_cast<double>(N));
  return N * i1 - log_zn;
}

double partial_entropy_sum(const SphereDensity& F) {
  const int N = F.N;
  const Density1D pi1 = marginal1(F);
  double direct = 0.0, h_gauss = 0.0, m2 = 0.0, pole_log = 0.0;
  for (std::size_t i = 0; i < pi1.grid.size(); ++i) {
    const double w = pi1.grid.weights[i];
    const double x = pi1.grid.points[i];
    const double pv = pi1.values[i];
    if (pv < kAtomFloor) continue;
    const double lp = std::log(pv);
    direct += w * pv * (lp - log_marginal_weight(N, x));
    h_gauss += w * pv * lp;
    m2 += w * pv * x * x;
    pole_log += w * pv * std::log1p(-x * x / static_cast<double>(N));
  }
  h_gauss += 0.5 * kLog2Pi + 0.5 * m2;  // H(pi1 | gamma)
  const double log_ratio =
      log_sphere_area(N - 1) - log_sphere_area(N) + 0.5 * kLog2Pi - 0.5 * std::log(double(N));
  const double assembled = h_gauss - log_ratio - 0.5 * m2 - 0.5 * (N - 3) * pole_log;
  if (std::abs(direct - assembled) > 1e-6)
    throw std::runtime_error("partial_entropy_sum: route disagreement " +
                             std::to_string(direct - assembled));
  return static_cast<double>(N) * direct;
}

// ---------------------------------------------------------------------------
// Fisher information

SphericalFisherMarginal spherical_fisher_marginal(const SphereDensity& F) {
  const int N = F.N;
  const Density1D pi1 = marginal1(F);
  const double dN = static_cast<double>(N);

  double tilted = 0.0;
  for (std::size_t i = 0; i < pi1.grid.size(); ++i) {
    const double pv = pi1.values[i];
    if (pv < kAtomFloor) continue;
    const double x = pi1.grid.points[i];
    const double d = (*pi1.derivative_values)[i];
    tilted += pi1.grid.weights[i] * (1.0 - x * x / dN) * d * d / pv;
  }

  auto pole_with = [&](int panels) {
    const Grid1D g = F.is_uniform() ? make_sphere_grid(dN, panels, 16) : pi1.grid;
    double s = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double x = g.points[i];
      const double t = 1.0 - x * x / dN;
      if (t <= 0.0) return std::numeric_limits<double>::infinity();
      s += g.weights[i] * x * x * pi1.pdf(x) / t;
    }
    return s;
  };
  double pole;
  if (F.is_uniform()) {
    const double p1 = pole_with(256), p2 = pole_with(512);
    if (!std::isfinite(p1) || !std::isfinite(p2) || std::abs(p2 - p1) > 0.01 * std::abs(p2))
      return {std::numeric_limits<double>::infinity(), tilted};
    pole = p2;
  } else {
    pole = pole_with(0);
  }
  const double c = (dN - 3.0) / dN;
  return {tilted - 2.0 * c + c * c * pole, tilted};
}

double spherical_fisher_full(const SphereDensity& F) {
  if (F.is_uniform()) return 0.0;
  if (!F.base->has_derivative())
    throw std::invalid_argument("spherical_fisher_full: base derivative missing");
  const Density1D& base = *F.base;
  const SphereMarginal pi2 = marginal2(F);
  // g = (log f)'; the score products stay bounded because f vanishes at most
  // quadratically at its support edge
  const double e1 = pi2.integrate([&](double v1, double v2) {
    const double f2 = base.pdf(v2);
    if (f2 < kAtomFloor) return 0.0;
    const double d2 = base.dpdf(v2);
    return v1 * v1 * (d2 / f2) * (d2 / f2);
  });
  const double ec = pi2.integrate([&](double v1, double v2) {
    const double f1 = base.pdf(v1), f2 = base.pdf(v2);
    if (f1 < kAtomFloor || f2 < kAtomFloor) return 0.0;
    return v1 * (base.dpdf(v1) / f1) * v2 * (base.dpdf(v2) / f2);
  });
  return (F.N - 1) * (e1 - ec);
}

ConditionReport condition_report(const SphereDensity& F, double k, double q) {
  ConditionReport r;
  r.N = F.N;
  r.k = k;
  r.q = q;
  const Density1D pi1 = marginal1(F);
  r.a_k = moment(pi1, k);
  r.a_i = fisher_information(pi1);
  r.a_pq = pole_control(pi1, F.N, q);
  const double hn = spherical_entropy(F);
  r.h_over_n = hn / static_cast<double>(F.N);
  r.i_over_n = spherical_fisher_full(F) / static_cast<double>(F.N);
  // quadrature noise keeps a degenerate H_N near 1e-9 rather than at 0
  r.c_h_positive = r.h_over_n > 1e-7;
  return r;
}

}  // namespace kacsphere
