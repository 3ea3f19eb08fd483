#include "kacsphere/numerics.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>

namespace kacsphere {

namespace {
constexpr double kPi = std::numbers::pi;
}

// ---------------------------------------------------------------------------
// LogScaled

LogScaled LogScaled::from_value(double x) {
  LogScaled r;
  if (x == 0.0) return r;
  r.sign = x > 0 ? 1 : -1;
  r.log_magnitude = std::log(std::abs(x));
  return r;
}

LogScaled LogScaled::from_log(double log_mag, int sign) {
  LogScaled r;
  r.log_magnitude = log_mag;
  r.sign = sign;
  return r;
}

double LogScaled::value() const {
  if (sign == 0) return 0.0;
  return sign * std::exp(log_magnitude);
}

LogScaled LogScaled::operator*(const LogScaled& o) const {
  if (sign == 0 || o.sign == 0) return zero();
  return from_log(log_magnitude + o.log_magnitude, sign * o.sign);
}

LogScaled LogScaled::operator/(const LogScaled& o) const {
  if (o.sign == 0) throw std::domain_error("LogScaled: division by zero");
  if (sign == 0) return zero();
  return from_log(log_magnitude - o.log_magnitude, sign * o.sign);
}

// ---------------------------------------------------------------------------
// special functions

double log_sphere_area(int n) {
  if (n < 1) throw std::invalid_argument("log_sphere_area: n must be >= 1");
  return std::log(2.0) + 0.5 * n * std::log(kPi) - std::lgamma(0.5 * n);
}

double gamma_ratio_factor(int N, double k) {
  if (N < 2) throw std::invalid_argument("gamma_ratio_factor: N must be >= 2");
  if (k <= 0.0) throw std::invalid_argument("gamma_ratio_factor: k must be > 0");
  // even k: Γ(N/2 + l) = Γ(N/2) prod_{i<l} (N/2 + i), so the factor is the
  // exact product prod (1 + 2i/N); avoids lgamma cancellation for large N
  const double l = 0.5 * k;
  if (l == std::floor(l)) {
    double prod = 1.0;
    for (int i = 0; i < static_cast<int>(l); ++i) prod *= 1.0 + 2.0 * i / static_cast<double>(N);
    return prod;
  }
  const double logf = 0.5 * k * (std::log(2.0) - std::log(static_cast<double>(N))) +
                      std::lgamma(0.5 * (N + k)) - std::lgamma(0.5 * N);
  return std::exp(logf);
}

double gamma_ratio_sup(double k) {
  // decreasing in N toward 1; scan guards the monotonicity assumption
  double sup = 1.0;
  for (int N = 2; N <= 8192; N = N < 64 ? N + 1 : N + N / 8) {
    sup = std::max(sup, gamma_ratio_factor(N, k));
  }
  return sup;
}

// ---------------------------------------------------------------------------
// Gauss-Legendre

void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights) {
  nodes.assign(n, 0.0);
  weights.assign(n, 0.0);
  const int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
      }
      pp = n * (x * p0 - p1) / (x * x - 1.0);
      const double dx = p0 / pp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    nodes[i] = -x;
    nodes[n - 1 - i] = x;
    weights[i] = 2.0 / ((1.0 - x * x) * pp * pp);
    weights[n - 1 - i] = weights[i];
  }
}

namespace {

struct GLRule {
  std::vector<double> x, w;
};

const GLRule& gl_rule(int n) {
  static std::vector<GLRule> cache(65);
  if (n < 1 || n > 64) throw std::invalid_argument("gl_rule: order out of range");
  if (cache[n].x.empty()) gauss_legendre(n, cache[n].x, cache[n].w);
  return cache[n];
}

void append_panel(Grid1D& g, double a, double b, int pts) {
  const GLRule& r = gl_rule(pts);
  const double c = 0.5 * (a + b), h = 0.5 * (b - a);
  for (int i = 0; i < pts; ++i) {
    g.points.push_back(c + h * r.x[i]);
    g.weights.push_back(h * r.w[i]);
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Grid1D

double Grid1D::integrate(const std::vector<double>& vals) const {
  if (vals.size() != points.size()) throw std::invalid_argument("Grid1D::integrate: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < vals.size(); ++i) s += weights[i] * vals[i];
  return s;
}

double Grid1D::integrate(const std::function<double(double)>& fn) const {
  double s = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) s += weights[i] * fn(points[i]);
  return s;
}

void Grid1D::validate() const {
  if (points.size() != weights.size() || points.empty())
    throw std::invalid_argument("Grid1D: empty or mismatched");
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i] < lo || points[i] > hi) throw std::invalid_argument("Grid1D: point outside support");
    if (i > 0 && points[i] <= points[i - 1])
      throw std::invalid_argument("Grid1D: points not strictly increasing");
    if (weights[i] < 0.0) throw std::invalid_argument("Grid1D: negative weight");
  }
  double s = 0.0;
  for (double w : weights) s += w;
  const double len = hi - lo;
  if (std::abs(s - len) > 1e-12 * std::max(1.0, len))
    throw std::invalid_argument("Grid1D: weights do not sum to the support length");
}

Grid1D make_panel_grid(double lo, double hi, const std::vector<double>& knots,
                       int panels, int pts_per_panel, int graded_levels) {
  if (hi <= lo) throw std::invalid_argument("make_panel_grid: empty interval");
  std::vector<double> cuts{lo, hi};
  for (double k : knots)
    if (k > lo && k < hi) cuts.push_back(k);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  // graded panels hug both endpoints, geometric ratio 1/2
  std::vector<double> bounds;
  if (graded_levels > 0) {
    const double w0 = (cuts[1] - cuts[0]);
    for (int l = graded_levels; l >= 1; --l) bounds.push_back(lo + w0 * std::ldexp(1.0, -l));
    const double w1 = (cuts[cuts.size() - 1] - cuts[cuts.size() - 2]);
    for (int l = 1; l <= graded_levels; ++l) bounds.push_back(hi - w1 * std::ldexp(1.0, -l));
  }
  for (double c : cuts) bounds.push_back(c);
  std::sort(bounds.begin(), bounds.end());
  bounds.erase(std::unique(bounds.begin(), bounds.end()), bounds.end());

  // split the remaining coarse sections so the total panel count is reached
  std::vector<std::pair<double, double>> segs;
  for (std::size_t i = 0; i + 1 < bounds.size(); ++i) segs.emplace_back(bounds[i], bounds[i + 1]);
  int extra = panels - static_cast<int>(segs.size());
  if (extra > 0) {
    std::vector<std::pair<double, double>> out;
    double total = 0.0;
    for (auto& s : segs) total += s.second - s.first;
    for (auto& s : segs) {
      const double len = s.second - s.first;
      int parts = 1 + static_cast<int>(std::floor(extra * len / total + 0.5));
      parts = std::max(parts, 1);
      for (int j = 0; j < parts; ++j)
        out.emplace_back(s.first + len * j / parts, s.first + len * (j + 1) / parts);
    }
    segs.swap(out);
  }

  Grid1D g;
  g.lo = lo;
  g.hi = hi;
  for (auto& s : segs) append_panel(g, s.first, s.second, pts_per_panel);
  g.validate();
  return g;
}

Grid1D make_sphere_grid(double N, int panels, int pts_per_panel) {
  // v = sqrt(N) sin(theta); integrand smooth in theta for weights
  // (1 - v^2/N)^p with p >= -1/2
  const double rootN = std::sqrt(N);
  Grid1D g;
  g.lo = -rootN;
  g.hi = rootN;
  const GLRule& r = gl_rule(pts_per_panel);
  const double th_lo = -0.5 * kPi, th_hi = 0.5 * kPi;
  for (int p = 0; p < panels; ++p) {
    const double a = th_lo + (th_hi - th_lo) * p / panels;
    const double b = th_lo + (th_hi - th_lo) * (p + 1) / panels;
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    for (int i = 0; i < pts_per_panel; ++i) {
      const double th = c + h * r.x[i];
      g.points.push_back(rootN * std::sin(th));
      g.weights.push_back(h * r.w[i] * rootN * std::cos(th));
    }
  }
  g.validate();
  return g;
}

// ---------------------------------------------------------------------------
// cubic spline (natural)

CubicSpline::CubicSpline(std::vector<double> x, std::vector<double> y)
    : x_(std::move(x)), y_(std::move(y)) {
  const std::size_t n = x_.size();
  if (n < 2 || y_.size() != n) throw std::invalid_argument("CubicSpline: bad input");
  m_.assign(n, 0.0);
  if (n == 2) return;
  std::vector<double> a(n, 0.0), b(n, 0.0), c(n, 0.0), d(n, 0.0);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double h0 = x_[i] - x_[i - 1], h1 = x_[i + 1] - x_[i];
    a[i] = h0 / 6.0;
    b[i] = (h0 + h1) / 3.0;
    c[i] = h1 / 6.0;
    d[i] = (y_[i + 1] - y_[i]) / h1 - (y_[i] - y_[i - 1]) / h0;
  }
  // Thomas solve on the interior
  for (std::size_t i = 2; i + 1 < n; ++i) {
    const double w = a[i] / b[i - 1];
    b[i] -= w * c[i - 1];
    d[i] -= w * d[i - 1];
  }
  for (std::size_t i = n - 2; i >= 1; --i) {
    m_[i] = (d[i] - c[i] * m_[i + 1]) / b[i];
    if (i == 1) break;
  }
}

namespace {
std::size_t locate(const std::vector<double>& x, double v) {
  if (v <= x.front()) return 0;
  if (v >= x.back()) return x.size() - 2;
  const auto it = std::upper_bound(x.begin(), x.end(), v);
  return static_cast<std::size_t>(it - x.begin()) - 1;
}
}  // namespace

double CubicSpline::operator()(double x) const {
  const std::size_t i = locate(x_, x);
  const double h = x_[i + 1] - x_[i];
  const double t = (x - x_[i]) / h, u = 1.0 - t;
  return u * y_[i] + t * y_[i + 1] +
         h * h / 6.0 * ((u * u * u - u) * m_[i] + (t * t * t - t) * m_[i + 1]);
}

double CubicSpline::derivative(double x) const {
  const std::size_t i = locate(x_, x);
  const double h = x_[i + 1] - x_[i];
  const double t = (x - x_[i]) / h, u = 1.0 - t;
  return (y_[i + 1] - y_[i]) / h +
         h / 6.0 * (-(3.0 * u * u - 1.0) * m_[i] + (3.0 * t * t - 1.0) * m_[i + 1]);
}

// ---------------------------------------------------------------------------
// pchip (Fritsch-Carlson)

Pchip::Pchip(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
  const std::size_t n = x_.size();
  if (n < 2 || y_.size() != n) throw std::invalid_argument("Pchip: bad input");
  d_.assign(n, 0.0);
  std::vector<double> h(n - 1), del(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    h[i] = x_[i + 1] - x_[i];
    del[i] = (y_[i + 1] - y_[i]) / h[i];
  }
  if (n == 2) {
    d_[0] = d_[1] = del[0];
    return;
  }
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (del[i - 1] * del[i] <= 0.0) {
      d_[i] = 0.0;
    } else {
      const double w1 = 2.0 * h[i] + h[i - 1];
      const double w2 = h[i] + 2.0 * h[i - 1];
      d_[i] = (w1 + w2) / (w1 / del[i - 1] + w2 / del[i]);
    }
  }
  auto end_slope = [](double h0, double h1, double d0, double d1) {
    double d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if (d * d0 <= 0.0)
      d = 0.0;
    else if (d0 * d1 < 0.0 && std::abs(d) > 3.0 * std::abs(d0))
      d = 3.0 * d0;
    return d;
  };
  d_[0] = end_slope(h[0], h[1], del[0], del[1]);
  d_[n - 1] = end_slope(h[n - 2], h[n - 3], del[n - 2], del[n - 3]);
}

double Pchip::operator()(double x) const {
  const std::size_t i = locate(x_, x);
  const double h = x_[i + 1] - x_[i];
  const double t = (x - x_[i]) / h;
  const double h00 = (1.0 + 2.0 * t) * (1.0 - t) * (1.0 - t);
  const double h10 = t * (1.0 - t) * (1.0 - t);
  const double h01 = t * t * (3.0 - 2.0 * t);
  const double h11 = t * t * (t - 1.0);
  return h00 * y_[i] + h * h10 * d_[i] + h01 * y_[i + 1] + h * h11 * d_[i + 1];
}

double Pchip::derivative(double x) const {
  const std::size_t i = locate(x_, x);
  const double h = x_[i + 1] - x_[i];
  const double t = (x - x_[i]) / h;
  const double g00 = 6.0 * t * t - 6.0 * t;
  const double g10 = 3.0 * t * t - 4.0 * t + 1.0;
  const double g01 = -g00;
  const double g11 = 3.0 * t * t - 2.0 * t;
  return g00 * y_[i] / h + g10 * d_[i] + g01 * y_[i + 1] / h + g11 * d_[i + 1];
}

// ---------------------------------------------------------------------------
// UDensity

namespace {

// local cubic (4-point Lagrange) interpolation on a uniform grid
double uniform_cubic(const std::vector<double>& v, double du, double u) {
  const std::size_t n = v.size();
  if (u <= 0.0) return v.front();
  const double s = u / du;
  if (s >= static_cast<double>(n - 1)) return v.back();
  std::size_t i = static_cast<std::size_t>(s);
  if (i == 0) i = 1;
  if (i + 2 >= n) i = n - 3;
  const double t = s - static_cast<double>(i);
  const double vm = v[i - 1], v0 = v[i], v1 = v[i + 1], v2 = v[i + 2];
  return v0 + t * ((v1 - vm) / 2.0 +
                   t * ((vm - 2.0 * v0 + v1) / 2.0 +
                        t * ((v2 - vm) / 6.0 + (v0 - v1) / 2.0)));
}

double smooth_at(const UDensity& g, double u) {
  if (u < 0.0 || u > g.u_max) return 0.0;
  if (g.smooth_eval) return g.smooth_eval(u);
  return uniform_cubic(g.values, g.du(), u);
}

}  // namespace

double UDensity::density_at(double u) const {
  if (u < 0.0 || u > u_max) return 0.0;
  const double s = smooth_at(*this, u);
  if (alpha == 0.0) return s;
  if (u == 0.0) return std::numeric_limits<double>::infinity();
  return std::pow(u, alpha) * s;
}

double UDensity::mass() const {
  if (alpha == 0.0) {
    const double h = du();
    double s = 0.0;
    for (double v : values) s += v;
    s -= 0.5 * (values.front() + values.back());
    double m = h * s;
    // Euler-Maclaurin endpoint correction
    if (values.size() >= 5) {
      auto d1 = [&](std::size_t o, int dir) {
        static const double c[5] = {-25.0 / 12.0, 4.0, -3.0, 4.0 / 3.0, -0.25};
        double r = 0.0;
        for (int i = 0; i < 5; ++i) r += c[i] * values[o + dir * i];
        return dir * r / h;
      };
      m -= h * h / 12.0 * (d1(values.size() - 1, -1) - d1(0, +1));
    }
    return m;
  }
  // integral of u^{-1/2} G(u): substitute u = t^2
  const double tmax = std::sqrt(u_max);
  std::vector<double> cuts{0.0, tmax};
  for (double k : kinks)
    if (k > 0.0 && k < u_max) cuts.push_back(std::sqrt(k));
  std::sort(cuts.begin(), cuts.end());
  const GLRule& r = gl_rule(16);
  double m = 0.0;
  for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
    const int sub = std::max(1, static_cast<int>(std::ceil((cuts[s + 1] - cuts[s]) / 0.25)));
    for (int j = 0; j < sub; ++j) {
      const double a = cuts[s] + (cuts[s + 1] - cuts[s]) * j / sub;
      const double b = cuts[s] + (cuts[s + 1] - cuts[s]) * (j + 1) / sub;
      const double c = 0.5 * (a + b), hw = 0.5 * (b - a);
      for (int i = 0; i < 16; ++i) {
        const double t = c + hw * r.x[i];
        m += hw * r.w[i] * 2.0 * smooth_at(*this, t * t);
      }
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// FFT convolution with Euler-Maclaurin endpoint corrections

namespace {

std::vector<double> fft_linear_conv(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t n = a.size();
  std::size_t L = 1;
  while (L < 2 * n) L <<= 1;
  std::vector<double> fa(L, 0.0), fb(L, 0.0);
  std::copy(a.begin(), a.end(), fa.begin());
  std::copy(b.begin(), b.end(), fb.begin());
  std::vector<std::complex<double>> Fa(L / 2 + 1), Fb(L / 2 + 1);
  fftw_plan pa = fftw_plan_dft_r2c_1d(static_cast<int>(L), fa.data(),
                                      reinterpret_cast<fftw_complex*>(Fa.data()), FFTW_ESTIMATE);
  fftw_execute(pa);
  fftw_destroy_plan(pa);
  fftw_plan pb = fftw_plan_dft_r2c_1d(static_cast<int>(L), fb.data(),
                                      reinterpret_cast<fftw_complex*>(Fb.data()), FFTW_ESTIMATE);
  fftw_execute(pb);
  fftw_destroy_plan(pb);
  for (std::size_t i = 0; i < Fa.size(); ++i) Fa[i] *= Fb[i];
  std::vector<double> out(L, 0.0);
  fftw_plan pc = fftw_plan_dft_c2r_1d(static_cast<int>(L), reinterpret_cast<fftw_complex*>(Fa.data()),
                                      out.data(), FFTW_ESTIMATE);
  fftw_execute(pc);
  fftw_destroy_plan(pc);
  const double inv = 1.0 / static_cast<double>(L);
  out.resize(n);
  for (double& v : out) v *= inv;
  return out;
}

}  // namespace

std::vector<double> corrected_convolution(const std::vector<double>& a,
                                          const std::vector<double>& b, double du) {
  if (a.size() != b.size() || a.size() < 12)
    throw std::invalid_argument("corrected_convolution: bad input sizes");
  const std::size_t n = a.size();
  std::vector<double> raw = fft_linear_conv(a, b);

  // ∫_0^{u_k} a(s) b(u_k - s) ds = trapezoid - du²/12 ΔF' + du⁴/720 ΔF'''
  static const double d1[5] = {-25.0 / 12.0, 4.0, -3.0, 4.0 / 3.0, -0.25};
  static const double d3[5] = {-2.5, 9.0, -12.0, 7.0, -1.5};
  std::vector<double> out(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    double c = raw[k] - 0.5 * (a[0] * b[k] + a[k] * b[0]);
    if (k >= 10) {
      double s1 = 0.0, s3 = 0.0;
      for (int i = 0; i < 5; ++i) {
        const double left = a[i] * b[k - i];
        const double right = a[k - i] * b[i];
        s1 += d1[i] * (left + right);
        s3 += d3[i] * (left + right);
      }
      c += s1 / 12.0 - s3 / 720.0;
    }
    out[k] = du * c;
  }
  return out;
}

namespace {

double trapz_mass_with_em(const std::vector<double>& v, double du) {
  UDensity tmp;
  tmp.u_max = du * static_cast<double>(v.size() - 1);
  tmp.alpha = 0.0;
  tmp.values = v;
  return tmp.mass();
}

// FFT roundoff is absolute; values far below the peak are recomputed from the
// final pair of factors by direct quadrature so the tail of the result stays
// accurate in relative terms (log Z is read off down to ~1e-13 of the peak).
void patch_conv_tail(std::vector<double>& c, const std::vector<double>& x,
                     const std::vector<double>& y, double du) {
  const std::size_t n = c.size();
  double peak = 0.0;
  for (double v : c) peak = std::max(peak, v);
  if (peak <= 0.0) return;
  auto support = [&](const std::vector<double>& v, double floor) {
    double pk = 0.0;
    for (double t : v) pk = std::max(pk, t);
    std::size_t lo = 0, hi = v.size() - 1;
    while (lo < v.size() && v[lo] < pk * floor) ++lo;
    while (hi > 0 && v[hi] < pk * floor) --hi;
    return std::make_pair(lo * du, hi * du);
  };
  const auto [xlo, xhi] = support(x, 1e-18);
  const auto [ylo, yhi] = support(y, 1e-18);
  const GLRule& r = gl_rule(12);
  for (std::size_t k = 0; k < n; ++k) {
    if (c[k] >= peak * 1e-5 || c[k] <= 0.0) continue;
    const double u = k * du;
    const double a = std::max(xlo, u - yhi);
    const double b = std::min(xhi, u - ylo);
    if (b <= a) continue;
    const int panels = std::min(48, std::max(8, static_cast<int>((b - a) / 0.5)));
    double acc = 0.0;
    for (int p = 0; p < panels; ++p) {
      const double pa = a + (b - a) * p / panels;
      const double pb = a + (b - a) * (p + 1) / panels;
      const double cm = 0.5 * (pa + pb), hw = 0.5 * (pb - pa);
      for (int i = 0; i < 12; ++i) {
        const double s = cm + hw * r.x[i];
        acc += hw * r.w[i] * uniform_cubic(x, du, s) * uniform_cubic(y, du, u - s);
      }
    }
    c[k] = std::max(0.0, acc);
  }
}

// first self-convolution of u^{-1/2} G(u): s = u sin²φ turns
// ∫ s^{-1/2}(u-s)^{-1/2} G(s)G(u-s) ds into 2∫_0^{π/2} G(u sin²)G(u cos²) dφ
UDensity selfconv_singular(const UDensity& g) {
  const std::size_t n = g.size();
  const double du = g.du();
  UDensity out;
  out.u_max = g.u_max;
  out.alpha = 0.0;
  out.values.assign(n, 0.0);
  const GLRule& r = gl_rule(12);
  for (std::size_t k = 0; k < n; ++k) {
    const double u = k * du;
    if (u == 0.0) {
      const double g0 = smooth_at(g, 0.0);
      out.values[k] = kPi * g0 * g0;
      continue;
    }
    std::vector<double> cuts{0.0, 0.5 * kPi};
    for (double kk : g.kinks) {
      if (kk > 0.0 && kk < u) {
        const double sn = std::sqrt(kk / u);
        cuts.push_back(std::asin(std::min(1.0, sn)));
        cuts.push_back(std::acos(std::min(1.0, sn)));
      }
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end(),
                           [](double x, double y) { return std::abs(x - y) < 1e-14; }),
               cuts.end());
    double acc = 0.0;
    for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
      const double c = 0.5 * (cuts[s] + cuts[s + 1]), hw = 0.5 * (cuts[s + 1] - cuts[s]);
      for (int i = 0; i < 12; ++i) {
        const double ph = c + hw * r.x[i];
        const double sp = std::sin(ph), cp = std::cos(ph);
        acc += hw * r.w[i] * smooth_at(g, u * sp * sp) * smooth_at(g, u * cp * cp);
      }
    }
    out.values[k] = 2.0 * acc;
  }
  return out;
}

// h * g with g = u^{-1/2} G(u): 2 ∫_0^{√·} G(t²) h(u - t²) dt
UDensity conv_singular_smooth(const UDensity& g, const UDensity& h) {
  const std::size_t n = h.size();
  const double du = h.du();
  double t_end = std::sqrt(g.u_max);
  if (!g.kinks.empty()) t_end = std::min(t_end, std::sqrt(g.kinks.back()));
  std::vector<double> cuts{0.0};
  for (double kk : g.kinks) {
    const double t = std::sqrt(kk);
    if (t > 0.0 && t < t_end) cuts.push_back(t);
  }
  cuts.push_back(t_end);
  std::sort(cuts.begin(), cuts.end());
  // fixed panels, fine enough for h varying on unit u-scale
  std::vector<std::pair<double, double>> panels;
  for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
    const int sub = std::max(1, static_cast<int>(std::ceil((cuts[s + 1] - cuts[s]) / 0.20)));
    for (int j = 0; j < sub; ++j)
      panels.emplace_back(cuts[s] + (cuts[s + 1] - cuts[s]) * j / sub,
                          cuts[s] + (cuts[s + 1] - cuts[s]) * (j + 1) / sub);
  }
  const GLRule& r = gl_rule(12);
  UDensity out;
  out.u_max = h.u_max;
  out.alpha = 0.0;
  out.values.assign(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    const double u = k * du;
    double acc = 0.0;
    for (auto& pn : panels) {
      if (pn.first * pn.first >= u) break;
      const double b = std::min(pn.second, std::sqrt(u));
      const double c = 0.5 * (pn.first + b), hw = 0.5 * (b - pn.first);
      if (hw <= 0.0) continue;
      for (int i = 0; i < 12; ++i) {
        const double t = c + hw * r.x[i];
        acc += hw * r.w[i] * smooth_at(g, t * t) * uniform_cubic(h.values, du, u - t * t);
      }
    }
    out.values[k] = 2.0 * acc;
  }
  return out;
}

}  // namespace

UDensity fft_convolve_power(const UDensity& base, int N, ConvolveReport* report) {
  if (N < 1) throw std::invalid_argument("fft_convolve_power: N must be >= 1");
  if (base.values.size() < 32) throw std::invalid_argument("fft_convolve_power: table too small");
  const double base_mass = base.mass();
  if (std::abs(base_mass - 1.0) > 1e-8)
    throw std::invalid_argument("fft_convolve_power: base does not integrate to 1");

  ConvolveReport rep;
  LogScaled scale = LogScaled::from_value(1.0);
  const double du = base.du();

  auto renorm = [&](UDensity& d) {
    const double m = trapz_mass_with_em(d.values, du);
    if (m <= 0.0) throw std::runtime_error("fft_convolve_power: nonpositive stage mass");
    scale = scale * LogScaled::from_value(m);
    const double inv = 1.0 / m;
    for (double& v : d.values) v *= inv;
    rep.stages += 1;
  };

  std::vector<double> last_x, last_y;  // operands of the latest FFT stage
  double last_scale = 1.0;             // renormalisation applied to its output
  auto conv_pair = [&](const UDensity& x, const UDensity& y) {
    UDensity z;
    z.u_max = x.u_max;
    z.alpha = 0.0;
    last_x = x.values;
    last_y = y.values;
    z.values = corrected_convolution(x.values, y.values, du);
    const double m = trapz_mass_with_em(z.values, du);
    if (m <= 0.0) throw std::runtime_error("fft_convolve_power: nonpositive stage mass");
    scale = scale * LogScaled::from_value(m);
    last_scale = m;
    for (double& v : z.values) v /= m;
    rep.stages += 1;
    return z;
  };
  auto patch_result = [&](UDensity& z) {
    if (last_x.empty()) return;
    std::vector<double> raw = z.values;
    for (double& v : raw) v *= last_scale;
    patch_conv_tail(raw, last_x, last_y, du);
    for (std::size_t i = 0; i < raw.size(); ++i) z.values[i] = raw[i] / last_scale;
  };

  UDensity result;
  if (N == 1) {
    result = base;
  } else if (base.alpha == 0.0) {
    // square-and-multiply on the FFT-domain factors
    UDensity cur = base;
    bool have = false;
    int e = N;
    while (e > 0) {
      if (e & 1) {
        result = have ? conv_pair(result, cur) : cur;
        have = true;
      }
      e >>= 1;
      if (e) cur = conv_pair(cur, cur);
    }
    patch_result(result);
  } else {
    UDensity g2 = selfconv_singular(base);
    renorm(g2);
    const int m = N / 2;
    UDensity cur = g2;
    bool have = false;
    int e = m;
    while (e > 0) {
      if (e & 1) {
        result = have ? conv_pair(result, cur) : cur;
        have = true;
      }
      e >>= 1;
      if (e) cur = conv_pair(cur, cur);
    }
    patch_result(result);
    if (N % 2 == 1) {
      result = conv_singular_smooth(base, result);
      renorm(result);
    }
  }

  // clamp ringing, detect coarse grids via boundary mass
  double peak = 0.0;
  for (double v : result.values) peak = std::max(peak, v);
  for (double& v : result.values) {
    if (v < 0.0) {
      if (v < -1e-12 * peak) throw std::runtime_error("fft_convolve_power: negative density");
      v = 0.0;
    }
  }
  if (N > 1) {
    const std::size_t n = result.values.size();
    const std::size_t i0 = static_cast<std::size_t>(0.99 * static_cast<double>(n - 1));
    double bmass = 0.0;
    for (std::size_t i = i0; i < n; ++i) bmass += result.values[i];
    bmass *= du;
    rep.boundary_mass = bmass;
    if (bmass > 1e-10)
      throw std::runtime_error("fft_convolve_power: grid too coarse (mass near u_max boundary)");
    const double final_mass = trapz_mass_with_em(result.values, du);
    scale = scale * LogScaled::from_value(final_mass);
    const double inv = 1.0 / final_mass;
    for (double& v : result.values) v *= inv;
  }
  rep.mass_drift = std::abs(scale.value() - 1.0);
  if (report) *report = rep;
  result.kinks.clear();
  result.smooth_eval = nullptr;
  return result;
}

// ---------------------------------------------------------------------------
// quantiles

QuantileTable quantile_from_cdf(const std::vector<double>& x, const std::vector<double>& cdf,
                                int resolution) {
  if (x.size() != cdf.size() || x.size() < 2)
    throw std::invalid_argument("quantile_from_cdf: bad input");
  QuantileTable qt;
  qt.t.reserve(x.size());
  qt.q.reserve(x.size());
  // flat CDF stretches collapse to their two boundary rows; the lookup is
  // left-continuous at the shared level
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (cdf[i] < 0.0 || cdf[i] > 1.0 + 1e-12 || (i > 0 && cdf[i] < cdf[i - 1] - 1e-15))
      throw std::invalid_argument("quantile_from_cdf: cdf not monotone in [0,1]");
    const double level = std::min(cdf[i], 1.0);
    if (!qt.t.empty() && level <= qt.t.back()) {
      if (qt.t.size() >= 2 && qt.t[qt.t.size() - 2] == qt.t.back()) {
        qt.q.back() = x[i];  // move the flat run's right edge
      } else {
        qt.t.push_back(qt.t.back());
        qt.q.push_back(x[i]);
      }
      continue;
    }
    qt.t.push_back(level);
    qt.q.push_back(x[i]);
  }
  // refine linearly to the requested table size
  while (static_cast<int>(qt.t.size()) < resolution) {
    std::vector<double> t2, q2;
    t2.reserve(qt.t.size() * 2);
    q2.reserve(qt.q.size() * 2);
    for (std::size_t i = 0; i + 1 < qt.t.size(); ++i) {
      t2.push_back(qt.t[i]);
      q2.push_back(qt.q[i]);
      t2.push_back(0.5 * (qt.t[i] + qt.t[i + 1]));
      q2.push_back(0.5 * (qt.q[i] + qt.q[i + 1]));
    }
    t2.push_back(qt.t.back());
    q2.push_back(qt.q.back());
    qt.t.swap(t2);
    qt.q.swap(q2);
  }
  return qt;
}

double QuantileTable::operator()(double prob) const {
  if (prob <= t.front()) return q.front();
  if (prob >= t.back()) {
    const auto lb = std::lower_bound(t.begin(), t.end(), t.back());
    return q[static_cast<std::size_t>(lb - t.begin())];
  }
  const auto lb = std::lower_bound(t.begin(), t.end(), prob);
  if (*lb == prob)  // left-continuous at a table level
    return q[static_cast<std::size_t>(lb - t.begin())];
  const std::size_t i = static_cast<std::size_t>(lb - t.begin()) - 1;
  const double dt = t[i + 1] - t[i];
  if (dt <= 0.0) return q[i];
  const double w = (prob - t[i]) / dt;
  return q[i] + w * (q[i + 1] - q[i]);
}

}  // namespace kacsphere
