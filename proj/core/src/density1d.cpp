#include "kacsphere/density1d.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace kacsphere {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;  // log(2π)
}

// ---------------------------------------------------------------------------
// Density1D

double Density1D::pdf(double v) const {
  // analytic evaluators decay (or vanish) on their own beyond the grid; only
  // spline-backed tables are clipped to the tabulated support
  if (pdf_fn) return std::max(0.0, pdf_fn(v));
  if (v < grid.lo || v > grid.hi) return 0.0;
  if (!value_spline) throw std::logic_error("Density1D: finalize() not called");
  return std::max(0.0, (*value_spline)(v));
}

double Density1D::dpdf(double v) const {
  if (dpdf_fn) return dpdf_fn(v);
  if (v < grid.lo || v > grid.hi) return 0.0;
  if (deriv_spline) return (*deriv_spline)(v);
  throw std::invalid_argument("Density1D: derivative table missing");
}

void Density1D::finalize() {
  if (values.empty()) {
    if (!pdf_fn) throw std::invalid_argument("Density1D: neither values nor pdf");
    values.resize(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) values[i] = pdf_fn(grid.points[i]);
  }
  if (!derivative_values && dpdf_fn) {
    derivative_values.emplace(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) (*derivative_values)[i] = dpdf_fn(grid.points[i]);
  }
  if (!pdf_fn) value_spline = std::make_shared<CubicSpline>(grid.points, values);
  if (!dpdf_fn && derivative_values)
    deriv_spline = std::make_shared<CubicSpline>(grid.points, *derivative_values);
  validate();
}

void Density1D::validate() const {
  grid.validate();
  if (values.size() != grid.size()) throw std::invalid_argument("Density1D: bad value table");
  for (double v : values)
    if (v < 0.0) throw std::invalid_argument("Density1D: negative value");
  const double mass = grid.integrate(values);
  if (std::abs(mass - 1.0) > 1e-8)
    throw std::invalid_argument("Density1D '" + label + "': mass " + std::to_string(mass) +
                                " is not 1 within 1e-8");
  const double m2 = moment(*this, 2.0);
  if (!std::isfinite(m2)) throw std::invalid_argument("Density1D: M2 not finite");
}

// ---------------------------------------------------------------------------
// families

Density1D gaussian_density(double variance) {
  if (variance <= 0.0) throw std::invalid_argument("gaussian_density: variance must be > 0");
  const double sigma = std::sqrt(variance);
  const double cut = 12.0 * sigma;
  const double mass = std::erf(12.0 / std::numbers::sqrt2);  // Φ(12) - Φ(-12)
  const double norm = 1.0 / (mass * sigma * std::sqrt(2.0 * std::numbers::pi));
  Density1D f;
  f.grid = make_panel_grid(-cut, cut, {}, 192, 16);
  f.label = "gaussian(var=" + std::to_string(variance) + ")";
  f.pdf_fn = [norm, variance](double v) { return norm * std::exp(-0.5 * v * v / variance); };
  f.dpdf_fn = [norm, variance](double v) {
    return -v / variance * norm * std::exp(-0.5 * v * v / variance);
  };
  f.finalize();
  return f;
}

Density1D uniform_density(double a, double b) {
  if (b <= a) throw std::invalid_argument("uniform_density: empty interval");
  const double h = 1.0 / (b - a);
  Density1D f;
  f.grid = make_panel_grid(a, b, {}, 64, 16);
  f.label = "uniform[" + std::to_string(a) + "," + std::to_string(b) + "]";
  f.pdf_fn = [a, b, h](double v) { return (v >= a && v <= b) ? h : 0.0; };
  f.finalize();
  return f;
}

Density1D bump_density(double R) {
  if (R <= 0.0) throw std::invalid_argument("bump_density: R must be > 0");
  // quadratic B-spline rescaled to unit second moment: the law of
  // U1+U2+U3 with Ui ~ U[-1,1], supported on [-3,3]; the shape is
  // scale-free so the normalised density does not depend on R
  Density1D f;
  f.grid = make_panel_grid(-3.0, 3.0, {-1.0, 1.0}, 192, 16, 14);
  f.knots = {-1.0, 1.0};
  f.label = "bump";
  f.pdf_fn = [](double v) {
    const double a = std::abs(v);
    if (a >= 3.0) return 0.0;
    if (a <= 1.0) return (3.0 - v * v) / 8.0;
    return (3.0 - a) * (3.0 - a) / 16.0;
  };
  f.dpdf_fn = [](double v) {
    const double a = std::abs(v);
    if (a >= 3.0) return 0.0;
    if (a <= 1.0) return -v / 4.0;
    const double s = v > 0.0 ? 1.0 : -1.0;
    return -s * (3.0 - a) / 8.0;
  };
  f.finalize();
  return f;
}

Density1D density_from_csv(const std::string& path, double* renormalization) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("density_from_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("density_from_csv: empty file");
  std::vector<double> xs, ys;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    double x, y;
    if (!(ss >> x >> y)) throw std::runtime_error("density_from_csv: bad row '" + line + "'");
    if (!xs.empty() && x <= xs.back())
      throw std::runtime_error("density_from_csv: abscissas not strictly increasing");
    if (y < 0.0) throw std::runtime_error("density_from_csv: negative density value");
    xs.push_back(x);
    ys.push_back(y);
  }
  if (xs.size() < 8) throw std::runtime_error("density_from_csv: too few rows");

  CubicSpline raw(xs, ys);
  Density1D f;
  f.grid = make_panel_grid(xs.front(), xs.back(), {}, 192, 16, 8);
  f.label = "file:" + path;
  f.values.resize(f.grid.size());
  for (std::size_t i = 0; i < f.grid.size(); ++i)
    f.values[i] = std::max(0.0, raw(f.grid.points[i]));
  const double mass = f.grid.integrate(f.values);
  if (mass <= 0.0) throw std::runtime_error("density_from_csv: zero mass");
  for (double& v : f.values) v /= mass;
  if (renormalization) *renormalization = mass;

  // 4th-order central differences on a uniform resample for the derivative
  const int n = 4096;
  const double lo = xs.front(), hi = xs.back();
  const double h = (hi - lo) / (n - 1);
  std::vector<double> ux(n), uf(n);
  for (int i = 0; i < n; ++i) {
    ux[i] = lo + h * i;
    uf[i] = std::max(0.0, raw(ux[i])) / mass;
  }
  std::vector<double> ud(n, 0.0);
  for (int i = 2; i < n - 2; ++i)
    ud[i] = (-uf[i + 2] + 8.0 * uf[i + 1] - 8.0 * uf[i - 1] + uf[i - 2]) / (12.0 * h);
  ud[0] = (uf[1] - uf[0]) / h;
  ud[1] = (uf[2] - uf[0]) / (2.0 * h);
  ud[n - 2] = (uf[n - 1] - uf[n - 3]) / (2.0 * h);
  ud[n - 1] = (uf[n - 1] - uf[n - 2]) / h;
  CubicSpline dspl(ux, ud);
  f.derivative_values.emplace(f.grid.size());
  for (std::size_t i = 0; i < f.grid.size(); ++i)
    (*f.derivative_values)[i] = dspl(f.grid.points[i]);
  f.finalize();
  return f;
}

// ---------------------------------------------------------------------------
// functionals

double moment(const Density1D& f, double k) {
  if (k < 0.0) throw std::invalid_argument("moment: k must be >= 0");
  double s = 0.0;
  for (std::size_t i = 0; i < f.grid.size(); ++i)
    s += f.grid.weights[i] * std::pow(std::abs(f.grid.points[i]), k) * f.values[i];
  return s;
}

MomentReport moment_report(const Density1D& f, double k) {
  return MomentReport{k, moment(f, k), f.label};
}

double relative_entropy(const Density1D& f, const Density1D& g, std::string* diagnostic) {
  double s = 0.0;
  for (std::size_t i = 0; i < f.grid.size(); ++i) {
    const double fv = f.values[i];
    if (fv < kAtomFloor) continue;
    const double gv = g.pdf(f.grid.points[i]);
    if (gv < kAtomFloor) {
      if (diagnostic)
        *diagnostic = "f has mass at v=" + std::to_string(f.grid.points[i]) + " where g vanishes";
      return std::numeric_limits<double>::infinity();
    }
    s += f.grid.weights[i] * fv * std::log(fv / gv);
  }
  return s;
}

double relative_entropy_vs_gaussian(const Density1D& f) {
  double s = 0.0;
  for (std::size_t i = 0; i < f.grid.size(); ++i) {
    const double fv = f.values[i];
    if (fv < kAtomFloor) continue;
    s += f.grid.weights[i] * fv * std::log(fv);
  }
  return s + 0.5 * kLog2Pi + 0.5 * moment(f, 2.0);
}

double fisher_information(const Density1D& f) {
  if (!f.has_derivative()) throw std::invalid_argument("fisher_information: derivative missing");
  double s = 0.0;
  for (std::size_t i = 0; i < f.grid.size(); ++i) {
    const double fv = f.values[i];
    if (fv < kAtomFloor) continue;
    const double d = f.derivative_values ? (*f.derivative_values)[i] : f.dpdf(f.grid.points[i]);
    s += f.grid.weights[i] * d * d / fv;
  }
  return s;
}

double relative_fisher_gaussian(const Density1D& f) {
  return fisher_information(f) + moment(f, 2.0) - 2.0;
}

double relative_fisher_gaussian_direct(const Density1D& f) {
  if (!f.has_derivative()) throw std::invalid_argument("relative_fisher: derivative missing");
  double s = 0.0;
  for (std::size_t i = 0; i < f.grid.size(); ++i) {
    const double fv = f.values[i];
    if (fv < kAtomFloor) continue;
    const double d = f.derivative_values ? (*f.derivative_values)[i] : f.dpdf(f.grid.points[i]);
    const double t = d / fv + f.grid.points[i];  // (log(f/γ))'
    s += f.grid.weights[i] * t * t * fv;
  }
  return s;
}

double pole_control(const Density1D& f, int N, double q) {
  if (q <= 2.0) throw std::invalid_argument("pole_control: q must be > 2");
  const double rootN = std::sqrt(static_cast<double>(N));
  if (f.grid.lo < -rootN - 1e-12 || f.grid.hi > rootN + 1e-12)
    throw std::invalid_argument("pole_control: support exceeds [-sqrt(N), sqrt(N)]");
  const double expo = -q / (q - 2.0);
  auto weight = [&](double v) {
    const double t = 1.0 - v * v / N;
    return t > 0.0 ? std::pow(t, expo) : std::numeric_limits<double>::infinity();
  };
  const bool touches = f.grid.hi > rootN - 1e-6 || f.grid.lo < -rootN + 1e-6;
  if (!touches) {
    double s = 0.0;
    for (std::size_t i = 0; i < f.grid.size(); ++i)
      s += f.grid.weights[i] * f.values[i] * weight(f.grid.points[i]);
    return s;
  }
  // support touches the poles: require stability under edge refinement
  auto eval = [&](int panels) {
    const Grid1D g = make_sphere_grid(static_cast<double>(N), panels, 16);
    double s = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i)
      s += g.weights[i] * f.pdf(g.points[i]) * weight(g.points[i]);
    return s;
  };
  const double i1 = eval(256), i2 = eval(512);
  if (!std::isfinite(i1) || !std::isfinite(i2) || std::abs(i2 - i1) > 0.01 * std::abs(i2))
    return std::numeric_limits<double>::infinity();
  return i2;
}

double supnorm_via_fisher(const Density1D& f) {
  const double bound = std::sqrt(fisher_information(f));
  const double maxv = *std::max_element(f.values.begin(), f.values.end());
  if (maxv > bound + 1e-6)
    throw std::runtime_error("supnorm_via_fisher: grid maximum " + std::to_string(maxv) +
                             " exceeds I(f)^{1/2} = " + std::to_string(bound));
  return bound;
}

QuantileTable quantile_table(const Density1D& f, int resolution) {
  // CDF accumulated over a partition refined to ~resolution cells,
  // panel-exact GL on each cell
  const double lo = f.grid.lo, hi = f.grid.hi;
  std::vector<double> cuts{lo, hi};
  for (double k : f.knots)
    if (k > lo && k < hi) cuts.push_back(k);
  std::sort(cuts.begin(), cuts.end());
  const int cells = std::max(1024, resolution);
  std::vector<double> xs;
  xs.push_back(lo);
  for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
    const double len = cuts[s + 1] - cuts[s];
    const int sub = std::max(1, static_cast<int>(std::round(cells * len / (hi - lo))));
    for (int j = 1; j <= sub; ++j) xs.push_back(cuts[s] + len * j / sub);
  }
  std::vector<double> nodes, wts;
  gauss_legendre(8, nodes, wts);
  std::vector<double> cdf(xs.size(), 0.0);
  for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
    const double c = 0.5 * (xs[i] + xs[i + 1]), h = 0.5 * (xs[i + 1] - xs[i]);
    double m = 0.0;
    for (int j = 0; j < 8; ++j) m += h * wts[j] * f.pdf(c + h * nodes[j]);
    cdf[i + 1] = cdf[i] + m;
  }
  const double total = cdf.back();
  if (total <= 0.0) throw std::runtime_error("quantile_table: zero mass");
  for (double& c : cdf) c /= total;
  return quantile_from_cdf(xs, cdf, resolution);
}

UDensity square_pushforward(const Density1D& f, double u_max, int n_cells) {
  UDensity g;
  g.u_max = u_max;
  g.alpha = -0.5;
  g.values.assign(static_cast<std::size_t>(n_cells) + 1, 0.0);
  const Density1D fc = f;  // capture by value, immutable
  g.smooth_eval = [fc](double u) {
    if (u < 0.0) return 0.0;
    const double r = std::sqrt(u);
    return 0.5 * (fc.pdf(r) + fc.pdf(-r));
  };
  for (std::size_t i = 0; i < g.values.size(); ++i) g.values[i] = g.smooth_eval(i * g.du());
  const double edge = std::max(std::abs(f.grid.lo), std::abs(f.grid.hi));
  for (double k : f.knots) g.kinks.push_back(k * k);
  g.kinks.push_back(edge * edge);
  std::sort(g.kinks.begin(), g.kinks.end());
  g.kinks.erase(std::unique(g.kinks.begin(), g.kinks.end()), g.kinks.end());
  return g;
}

}  // namespace kacsphere
