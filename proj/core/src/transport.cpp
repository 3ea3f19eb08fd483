#include "kacsphere/transport.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace kacsphere {

namespace {

// ∫₀¹ |Qf - Qg|^q dt over the union of both tables' breakpoints, with
// geometric refinement toward the endpoints where quantiles steepen
double quantile_distance_pow(const QuantileTable& qf, const QuantileTable& qg, double q) {
  std::vector<double> cuts;
  cuts.reserve(qf.t.size() + qg.t.size() + 64);
  for (double t : qf.t)
    if (t > 0.0 && t < 1.0) cuts.push_back(t);
  for (double t : qg.t)
    if (t > 0.0 && t < 1.0) cuts.push_back(t);
  for (int j = 4; j <= 48; ++j) {
    cuts.push_back(std::ldexp(1.0, -j));
    cuts.push_back(1.0 - std::ldexp(1.0, -j));
  }
  cuts.push_back(0.0);
  cuts.push_back(1.0);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  std::vector<double> nodes, wts;
  gauss_legendre(4, nodes, wts);
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double c = 0.5 * (cuts[i] + cuts[i + 1]), h = 0.5 * (cuts[i + 1] - cuts[i]);
    if (h <= 0.0) continue;
    for (int j = 0; j < 4; ++j) {
      const double t = c + h * nodes[j];
      const double d = std::abs(qf(t) - qg(t));
      acc += h * wts[j] * std::pow(d, q);
    }
  }
  return acc;
}

}  // namespace

double wasserstein_exact(const Density1D& f, const Density1D& g, double q) {
  if (q < 1.0) throw std::invalid_argument("wasserstein_exact: q must be >= 1");
  const int res = 1 << 16;
  const QuantileTable qf = quantile_table(f, res);
  const QuantileTable qg = quantile_table(g, res);
  double w = std::pow(quantile_distance_pow(qf, qg, q), 1.0 / q);
  // Richardson-style check at double resolution
  const QuantileTable qf2 = quantile_table(f, res << 1);
  const QuantileTable qg2 = quantile_table(g, res << 1);
  const double w2 = std::pow(quantile_distance_pow(qf2, qg2, q), 1.0 / q);
  if (std::abs(w2 - w) > 1e-6) {
    const QuantileTable qf4 = quantile_table(f, res << 2);
    const QuantileTable qg4 = quantile_table(g, res << 2);
    return std::pow(quantile_distance_pow(qf4, qg4, q), 1.0 / q);
  }
  return w2;
}

W1SphereReport w1_sphere_bound(const Density1D& pi1, const Density1D& pi1_ext, int N) {
  W1SphereReport r;
  r.m2_line = moment(pi1, 2.0);
  // 1 - E[Y/√N], Y ~ chi(N), evaluated as -expm1(log factor) for accuracy
  const double log_factor = 0.5 * (std::log(2.0) - std::log(static_cast<double>(N))) +
                            std::lgamma(0.5 * (N + 1)) - std::lgamma(0.5 * N);
  const double one_minus = -std::expm1(log_factor);
  r.bound_b1 = std::sqrt(2.0 * r.m2_line) * std::sqrt(one_minus);
  r.w1_exact = wasserstein_exact(pi1, pi1_ext, 1.0);
  r.slack = r.bound_b1 - r.w1_exact;
  r.tau_hat = 2.0 * std::sqrt(static_cast<double>(N) * one_minus) - 1.0;
  return r;
}

W1SphereReport w1_sphere_bound(const SphereDensity& F) {
  const Density1D pi1 = marginal1(F);
  const ExtensionMarginal ext = extension_marginal1(F);
  return w1_sphere_bound(pi1, ext.density, F.N);
}

HMLiftReport hm_lift_bound(const Density1D& f, const Density1D& g, double q, double k) {
  if (!(q >= 2.0) || !(q < k)) throw std::invalid_argument("hm_lift_bound: needs 2 <= q < k");
  HMLiftReport r;
  auto script_m = [k](const Density1D& d) {
    double s = 0.0;
    for (std::size_t i = 0; i < d.grid.size(); ++i) {
      const double v = d.grid.points[i];
      s += d.grid.weights[i] * std::pow(1.0 + v * v, 0.5 * k) * d.values[i];
    }
    return s;
  };
  r.m_script_k = script_m(f) + script_m(g);
  r.w1 = wasserstein_exact(f, g, 1.0);
  r.wq_exact = wasserstein_exact(f, g, q);
  r.bound = std::pow(2.0, 1.0 + 1.0 / q) * std::pow(r.m_script_k, 1.0 / k) *
            std::pow(r.w1, 1.0 / q - 1.0 / k);
  r.slack = r.bound - r.wq_exact;
  return r;
}

double pointwise_wq_inequality_check(double x, double y, double R, double q, double k) {
  if (R < 1.0) throw std::invalid_argument("pointwise_wq_inequality_check: R must be >= 1");
  if (k <= q) throw std::invalid_argument("pointwise_wq_inequality_check: needs k > q");
  const double d = std::min(std::abs(x - y), 1.0);
  return std::pow(R, q) * d +
         std::pow(2.0, k) * std::pow(R, q - k) * (std::pow(std::abs(x), k) + std::pow(std::abs(y), k)) -
         std::pow(std::abs(x - y), q);
}

double hwi_check(const Density1D& f, const Density1D& g) {
  const double rel_fisher = relative_fisher_gaussian(f);
  if (!std::isfinite(rel_fisher)) throw std::domain_error("hwi_check: infinite Fisher information");
  const double hf = relative_entropy_vs_gaussian(f);
  const double hg = relative_entropy_vs_gaussian(g);
  const double w2 = wasserstein_exact(f, g, 2.0);
  return hg + std::sqrt(std::max(0.0, rel_fisher)) * w2 - hf;
}

DistortedHwiReport distorted_hwi_check(const SphereDensity& F, const Density1D& pi1,
                                       const Density1D& pi1_ext, double q) {
  if (!(q > 2.0)) throw std::invalid_argument("distorted_hwi_check: q must be > 2");
  DistortedHwiReport r;
  const SphericalFisherMarginal fj = spherical_fisher_marginal(F);
  r.tilted_fisher = fj.tilted_integral;
  r.pole_term = pole_control(pi1, F.N, q);
  if (!std::isfinite(r.pole_term))
    throw std::domain_error("distorted_hwi_check: P_q diverges");
  const double m2 = moment(pi1, 2.0);
  const double inner = std::pow(r.tilted_fisher, 0.5 * q / (q - 1.0)) *
                           std::pow(r.pole_term, 0.5 * (q - 2.0) / (q - 1.0)) +
                       1.0 + m2;
  r.multiplier = std::pow(2.0, 1.0 / q) * std::pow(inner, (q - 1.0) / q);
  r.wq = wasserstein_exact(pi1, pi1_ext, q);
  const double lhs = relative_entropy_vs_gaussian(pi1);
  const double rhs = relative_entropy_vs_gaussian(pi1_ext) + r.multiplier * r.wq;
  r.slack = rhs - lhs;
  return r;
}

DistortedHwiReport distorted_hwi_check(const SphereDensity& F, double q) {
  const Density1D pi1 = marginal1(F);
  const ExtensionMarginal ext = extension_marginal1(F);
  return distorted_hwi_check(F, pi1, ext.density, q);
}

}  // namespace kacsphere
