#include "kacsphere/extension.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace kacsphere {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;

struct YKernel {
  Density1D pi1;
  int N;
  double log_pre;  // log |S^{N-1}| + (1/2) log N - (N/2) log 2π
  double y_lo, y_hi;
  std::vector<double> pi1_knots;  // incl. support edges

  // Π̃₁(v) = pre ∫_{|v|}^∞ y^{N-2} e^{-y²/2} Π₁(√N v / y) dy
  double eval(double v) const {
    const double rootN = std::sqrt(static_cast<double>(N));
    const double av = std::abs(v);
    double lo = std::max(av, y_lo);
    if (lo >= y_hi) return 0.0;
    std::vector<double> cuts{lo, y_hi};
    if (v != 0.0) {
      for (double k : pi1_knots) {
        if (k <= 0.0) continue;
        const double ys = rootN * av / k;  // Π₁ argument crosses a breakpoint
        if (ys > lo && ys < y_hi) cuts.push_back(ys);
      }
    }
    std::sort(cuts.begin(), cuts.end());
    std::vector<double> nodes, wts;
    gauss_legendre(12, nodes, wts);
    // log-sum-exp over panels to keep the chi(N) factor in range
    double lmax = -std::numeric_limits<double>::infinity();
    std::vector<double> ys, ws;
    for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
      const int sub = std::max(2, static_cast<int>((cuts[s + 1] - cuts[s]) / 0.4));
      for (int p = 0; p < sub; ++p) {
        const double a = cuts[s] + (cuts[s + 1] - cuts[s]) * p / sub;
        const double b = cuts[s] + (cuts[s + 1] - cuts[s]) * (p + 1) / sub;
        const double c = 0.5 * (a + b), h = 0.5 * (b - a);
        for (int i = 0; i < 12; ++i) {
          const double y = c + h * nodes[i];
          const double px = pi1.pdf(v == 0.0 ? 0.0 : rootN * v / y);
          if (px <= 0.0) continue;
          const double l = (N - 2) * std::log(y) - 0.5 * y * y + std::log(px);
          ys.push_back(l);
          ws.push_back(h * wts[i]);
          lmax = std::max(lmax, l);
        }
      }
    }
    if (ys.empty()) return 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < ys.size(); ++i) acc += ws[i] * std::exp(ys[i] - lmax);
    return std::exp(log_pre + lmax) * acc;
  }
};

}  // namespace

ExtensionMarginal extension_marginal1(const SphereDensity& F) {
  const int N = F.N;
  const double rootN = std::sqrt(static_cast<double>(N));
  const Density1D pi1 = marginal1(F);

  YKernel ker;
  ker.pi1 = pi1;
  ker.N = N;
  ker.log_pre = log_sphere_area(N) + 0.5 * std::log(static_cast<double>(N)) - 0.5 * N * kLog2Pi;
  // chi(N) bulk: y ∈ [√(N-1) - 14, √(N-1) + 14] covers the mass to below 1e-12
  ker.y_lo = std::max(0.0, std::sqrt(static_cast<double>(N - 1)) - 14.0);
  ker.y_hi = std::sqrt(static_cast<double>(N - 1)) + 14.0;
  ker.pi1_knots = pi1.knots;
  ker.pi1_knots.push_back(std::abs(pi1.grid.hi));
  for (double& k : ker.pi1_knots) k = std::abs(k);
  std::sort(ker.pi1_knots.begin(), ker.pi1_knots.end());

  const double x_max = std::max(std::abs(pi1.grid.lo), std::abs(pi1.grid.hi));
  const double v_cut = x_max * (1.0 + 12.0 / rootN);

  Density1D out;
  out.grid = make_panel_grid(-v_cut, v_cut, {}, 256, 16);
  out.label = "pi1_ext(" + F.label() + ")";
  out.values.resize(out.grid.size());
  for (std::size_t i = 0; i < out.grid.size(); ++i) out.values[i] = ker.eval(out.grid.points[i]);
  const double mass = out.grid.integrate(out.values);
  ExtensionMarginal em;
  em.N = N;
  em.mass_drift = std::abs(mass - 1.0);
  const double inv = 1.0 / mass;
  for (double& v : out.values) v *= inv;
  out.pdf_fn = [ker, inv](double v) { return inv * ker.eval(v); };
  out.finalize();
  em.density = std::move(out);
  return em;
}

double extension_marginal1_direct_at(const SphereDensity& F, double v) {
  if (v == 0.0) throw std::invalid_argument("direct kernel route needs v != 0");
  const int N = F.N;
  const double rootN = std::sqrt(static_cast<double>(N));
  const Density1D pi1 = marginal1(F);
  const double log_pre =
      log_sphere_area(N) + 0.5 * N * (std::log(static_cast<double>(N)) - kLog2Pi);
  const double av = std::abs(v);
  const double x_hi = std::min(rootN, std::max(std::abs(pi1.grid.lo), std::abs(pi1.grid.hi)));
  // integrand peaks at x = |v| with width ~ |v|/√N; geometric panels around it
  std::vector<double> cuts;
  const double lo = av * 1e-3;
  for (double c = lo; c < x_hi; c *= 1.35) cuts.push_back(c);
  cuts.push_back(x_hi);
  for (double k : pi1.knots)
    if (std::abs(k) > lo && std::abs(k) < x_hi) cuts.push_back(std::abs(k));
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  std::vector<double> nodes, wts;
  gauss_legendre(16, nodes, wts);
  double lmax = -std::numeric_limits<double>::infinity();
  std::vector<double> ls, ws;
  for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
    const int sub = 8;
    for (int p = 0; p < sub; ++p) {
      const double a = cuts[s] + (cuts[s + 1] - cuts[s]) * p / sub;
      const double b = cuts[s] + (cuts[s + 1] - cuts[s]) * (p + 1) / sub;
      const double c = 0.5 * (a + b), h = 0.5 * (b - a);
      for (int i = 0; i < 16; ++i) {
        const double x = c + h * nodes[i];
        const double px = pi1.pdf(v > 0.0 ? x : -x);
        if (px <= 0.0) continue;
        const double l = std::log(px) + (N - 1) * std::log(av) - N * std::log(x) -
                         0.5 * N * v * v / (x * x);
        ls.push_back(l);
        ws.push_back(h * wts[i]);
        lmax = std::max(lmax, l);
      }
    }
  }
  if (ls.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < ls.size(); ++i) acc += ws[i] * std::exp(ls[i] - lmax);
  return std::exp(log_pre + lmax) * acc;
}

double extension_moment_identity_check(const SphereDensity& F, double k) {
  const Density1D pi1 = marginal1(F);
  const ExtensionMarginal ext = extension_marginal1(F);
  const double mk_line = moment(pi1, k);
  const double mk_ext = moment(ext.density, k);
  const double factor = gamma_ratio_factor(F.N, k);
  return std::abs(mk_ext - factor * mk_line) / mk_line;
}

namespace {

// first marginal of the (M)-dimensional conditioned tensorization on the
// sphere of radius r: (|S^{M-2}|/(|S^{M-1}| r)) (1 - w²/r²)^{(M-3)/2}
// f(w) Z_{M-1}(√(r²-w²)) / Z_M(r)
double inner_log_f_average(const Density1D& f, int M, double r,
                           const NormalizationCurve& z_m, const NormalizationCurve& z_mm1,
                           const std::vector<double>& cuts_template) {
  const double log_zr = z_m.log_z_at(r * r);
  if (!std::isfinite(log_zr)) return std::numeric_limits<double>::quiet_NaN();
  const double log_pref = log_sphere_area(M - 1) - log_sphere_area(M) - std::log(r);
  const double lim = std::min(r * (1.0 - 1e-12), cuts_template.back());
  std::vector<double> nodes, wts;
  gauss_legendre(12, nodes, wts);
  double mass = 0.0, acc = 0.0;
  for (std::size_t s = 0; s + 1 < cuts_template.size(); ++s) {
    const double a0 = std::max(-lim, cuts_template[s]);
    const double a1 = std::min(lim, cuts_template[s + 1]);
    if (a1 <= a0) continue;
    const int sub = std::max(4, static_cast<int>((a1 - a0) / 0.1));
    for (int p = 0; p < sub; ++p) {
      const double p0 = a0 + (a1 - a0) * p / sub, p1 = a0 + (a1 - a0) * (p + 1) / sub;
      const double c = 0.5 * (p0 + p1), h = 0.5 * (p1 - p0);
      for (int i = 0; i < 12; ++i) {
        const double w = c + h * nodes[i];
        const double fw = f.pdf(w);
        if (fw <= 0.0) continue;
        const double t = 1.0 - w * w / (r * r);
        if (t <= 0.0) continue;
        const double lz = z_mm1.log_z_at(r * r - w * w);
        if (!std::isfinite(lz)) continue;
        const double dens = std::exp(log_pref + 0.5 * (M - 3) * std::log(t) + lz - log_zr) * fw;
        const double ww = h * wts[i];
        mass += ww * dens;
        acc += ww * dens * std::log(fw);
      }
    }
  }
  if (mass <= 0.0) return std::numeric_limits<double>::quiet_NaN();
  return acc / mass;
}

}  // namespace

double extension_entropy_consistency(const SphereDensity& F) {
  const double rhs = spherical_entropy(F);  // H_N
  if (F.is_uniform()) return std::abs(0.0 - rhs);
  if (F.N < 4) throw std::invalid_argument("extension_entropy_consistency: needs N >= 4");

  // H(F̃|γ_N) by conditioning on the first coordinate: given v₁ = v the rest
  // is the (N-1)-dimensional conditioned tensorization at radius √(N - v²)
  const int N = F.N;
  const Density1D& f = *F.base;
  const Density1D pi1 = marginal1(F);
  const double log_zn = F.z_n->log_z_at(static_cast<double>(N));

  std::vector<double> cuts{f.grid.lo, f.grid.hi};
  for (double k : f.knots) cuts.push_back(k);
  std::sort(cuts.begin(), cuts.end());

  double lhs = 0.0;
  for (std::size_t i = 0; i < pi1.grid.size(); ++i) {
    const double v = pi1.grid.points[i];
    const double pv = pi1.values[i];
    if (pv < kAtomFloor) continue;
    const double fv = f.pdf(v);
    if (fv < kAtomFloor) continue;
    const double r = std::sqrt(static_cast<double>(N) - v * v);
    const double j = inner_log_f_average(f, N - 1, r, *F.z_nm1, *F.z_nm2, cuts);
    if (!std::isfinite(j))
      throw std::runtime_error("extension_entropy_consistency: inner marginal unresolved");
    lhs += pi1.grid.weights[i] * pv * (std::log(fv) + (N - 1) * j);
  }
  lhs -= log_zn;
  return std::abs(lhs - rhs);
}

double euclidean_superadditivity_check(const SphereDensity& F) {
  const double hn = spherical_entropy(F);
  const ExtensionMarginal ext = extension_marginal1(F);
  const double h_line = relative_entropy_vs_gaussian(ext.density);
  return hn - static_cast<double>(F.N) * h_line;
}

}  // namespace kacsphere
