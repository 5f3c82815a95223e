#include "yukawa2d/geometry.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <stdexcept>

namespace yukawa {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftBuffers {
  double* re;
  fftw_complex* cx;
  int n;
  FftBuffers(int n_) : n(n_) {
    re = fftw_alloc_real(n);
    cx = fftw_alloc_complex(n / 2 + 1);
  }
  ~FftBuffers() {
    fftw_free(re);
    fftw_free(cx);
  }
  FftBuffers(const FftBuffers&) = delete;
  FftBuffers& operator=(const FftBuffers&) = delete;
};

std::vector<std::complex<double>> rfft(const std::vector<double>& x) {
  const int n = (int)x.size();
  FftBuffers b(n);
  std::copy(x.begin(), x.end(), b.re);
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    plan = fftw_plan_dft_r2c_1d(n, b.re, b.cx, FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(plan);
  }
  std::vector<std::complex<double>> out(n / 2 + 1);
  for (int k = 0; k <= n / 2; ++k) out[k] = {b.cx[k][0], b.cx[k][1]};
  return out;
}

std::vector<double> irfft(std::vector<std::complex<double>> c, int n) {
  FftBuffers b(n);
  for (int k = 0; k <= n / 2; ++k) {
    b.cx[k][0] = c[k].real();
    b.cx[k][1] = c[k].imag();
  }
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    plan = fftw_plan_dft_c2r_1d(n, b.cx, b.re, FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(plan);
  }
  std::vector<double> out(n);
  const double s = 1.0 / n;  // FFTW transforms are unnormalized
  for (int j = 0; j < n; ++j) out[j] = b.re[j] * s;
  return out;
}

void require_even(size_t n) {
  if (n < 2 || n % 2 != 0)
    throw std::invalid_argument("sample count must be even and >= 2");
}

// Periodic sinc for even N; D(t_j - t_m) = delta_jm on the grid.
double interp_kernel(int N, double t) {
  t = std::remainder(t, 2.0 * kPi);
  const double s = std::sin(0.5 * t);
  if (std::abs(s) < 1e-15) return std::cos(0.5 * N * t);
  return std::sin(0.5 * N * t) / std::tan(0.5 * t) / N;
}

double signed_area(const std::vector<Vec2>& y) {
  double a = 0.0;
  const int n = (int)y.size();
  for (int j = 0; j < n; ++j) {
    const Vec2& p = y[j];
    const Vec2& q = y[(j + 1) % n];
    a += p.x * q.y - q.x * p.y;
  }
  return 0.5 * a;
}

bool segments_intersect(Vec2 a, Vec2 b, Vec2 c, Vec2 d) {
  auto orient = [](Vec2 p, Vec2 q, Vec2 r) {
    return (q.x - p.x) * (r.y - p.y) - (q.y - p.y) * (r.x - p.x);
  };
  const double o1 = orient(a, b, c), o2 = orient(a, b, d);
  const double o3 = orient(c, d, a), o4 = orient(c, d, b);
  return o1 * o2 < 0 && o3 * o4 < 0;
}

bool is_self_intersecting(const std::vector<Vec2>& y) {
  const int n = (int)y.size();
  for (int i = 0; i < n; ++i) {
    for (int j = i + 2; j < n; ++j) {
      if (i == 0 && j == n - 1) continue;  // adjacent across the wrap
      if (segments_intersect(y[i], y[(i + 1) % n], y[j], y[(j + 1) % n]))
        return true;
    }
  }
  return false;
}

Curve finish_curve(std::vector<Vec2> samples) {
  const int N = (int)samples.size();
  Curve c;
  c.N = N;
  c.h = 2.0 * kPi / N;
  c.y = std::move(samples);

  std::vector<double> xs(N), ys(N);
  for (int j = 0; j < N; ++j) {
    xs[j] = c.y[j].x;
    ys[j] = c.y[j].y;
  }
  const std::vector<double> dx = spectral_derivative(xs);
  const std::vector<double> dy = spectral_derivative(ys);
  const std::vector<double> d2x = spectral_second_derivative(xs);
  const std::vector<double> d2y = spectral_second_derivative(ys);

  c.w.resize(N);
  c.w2.resize(N);
  c.speed.resize(N);
  c.normal.resize(N);
  c.kappa.resize(N);
  for (int j = 0; j < N; ++j) {
    c.w[j] = {dx[j], dy[j]};
    c.w2[j] = {d2x[j], d2y[j]};
    const double sp = c.w[j].norm();
    if (sp < 1e-14)
      throw std::invalid_argument("degenerate parametrization: |dy/dparam| ~ 0");
    c.speed[j] = sp;
    c.normal[j] = {c.w[j].y / sp, -c.w[j].x / sp};
    c.kappa[j] = c.w[j].cross(c.w2[j]) / (sp * sp * sp);
  }
  return c;
}

void flip_curve(Curve& c) {
  for (int j = 0; j < c.N; ++j) {
    c.normal[j] = {-c.normal[j].x, -c.normal[j].y};
    c.kappa[j] = -c.kappa[j];
  }
  c.flipped = !c.flipped;
}

}  // namespace

std::vector<double> spectral_derivative(const std::vector<double>& values) {
  require_even(values.size());
  const int n = (int)values.size();
  auto c = rfft(values);
  for (int k = 0; k < n / 2; ++k) c[k] *= std::complex<double>(0.0, k);
  c[n / 2] = 0.0;  // the Nyquist cosine has zero derivative at the nodes
  return irfft(std::move(c), n);
}

std::vector<double> spectral_second_derivative(const std::vector<double>& values) {
  require_even(values.size());
  const int n = (int)values.size();
  auto c = rfft(values);
  for (int k = 0; k <= n / 2; ++k) c[k] *= -double(k) * double(k);
  return irfft(std::move(c), n);
}

std::vector<double> fourier_interpolate(const std::vector<double>& values,
                                        const std::vector<double>& at_params) {
  require_even(values.size());
  const int n = (int)values.size();
  const double h = 2.0 * kPi / n;
  std::vector<double> out(at_params.size());
  for (size_t i = 0; i < at_params.size(); ++i) {
    double s = 0.0;
    for (int m = 0; m < n; ++m) s += values[m] * interp_kernel(n, at_params[i] - m * h);
    out[i] = s;
  }
  return out;
}

ShiftedGridInterp::ShiftedGridInterp(int N, double delta) : N_(N), delta_(delta) {
  require_even(N);
  const double h = 2.0 * kPi / N;
  kernel_.resize(N);
  for (int r = 0; r < N; ++r) kernel_[r] = interp_kernel(N, delta - r * h);
  phase_.resize(N / 2 + 1);
  for (int k = 0; k < N / 2; ++k)
    phase_[k] = {std::cos(k * delta), std::sin(k * delta)};
  // shifting the Nyquist cosine keeps only its cosine part on the new grid
  phase_[N / 2] = {std::cos(0.5 * N * delta), 0.0};
}

void ShiftedGridInterp::apply(const double* in, double* out) const {
  std::vector<double> tmp(in, in + N_);
  auto c = rfft(tmp);
  for (int k = 0; k <= N_ / 2; ++k) c[k] *= phase_[k];
  const std::vector<double> shifted = irfft(std::move(c), N_);
  std::copy(shifted.begin(), shifted.end(), out);
}

Curve ellipse(Vec2 center, double a, double b, double rotation, int N) {
  if (!(a > 0.0) || !(b > 0.0))
    throw std::invalid_argument("ellipse semi-axes must be positive");
  if (N < 16 || N % 2 != 0)
    throw std::invalid_argument("ellipse needs an even node count >= 16");
  const double cr = std::cos(rotation), sr = std::sin(rotation);
  std::vector<Vec2> samples(N);
  for (int j = 0; j < N; ++j) {
    const double t = 2.0 * kPi * j / N;
    const double px = a * std::cos(t), py = b * std::sin(t);
    samples[j] = {center.x + cr * px - sr * py, center.y + sr * px + cr * py};
  }
  return finish_curve(std::move(samples));
}

Curve curve_from_fourier(const std::vector<std::complex<double>>& coeffs, int N) {
  if (N < 16 || N % 2 != 0)
    throw std::invalid_argument("fourier curve needs an even node count >= 16");
  if (coeffs.empty() || coeffs.size() % 2 == 0)
    throw std::invalid_argument("fourier coefficients must be a centered odd-length list");
  if ((int)coeffs.size() > N / 2)
    throw std::invalid_argument("fourier coefficient count must be <= N/2");
  const int K = ((int)coeffs.size() - 1) / 2;

  auto sample = [&](const std::vector<std::complex<double>>& cs) {
    std::vector<Vec2> y(N);
    for (int j = 0; j < N; ++j) {
      const double t = 2.0 * kPi * j / N;
      std::complex<double> z = 0.0;
      for (int k = -K; k <= K; ++k)
        z += cs[k + K] * std::polar(1.0, k * t);
      y[j] = {z.real(), z.imag()};
    }
    return y;
  };

  std::vector<Vec2> y = sample(coeffs);
  if (signed_area(y) < 0.0) {
    std::vector<std::complex<double>> rev(coeffs.size());
    for (int k = -K; k <= K; ++k) rev[k + K] = coeffs[-k + K];  // z(t) -> z(-t)
    y = sample(rev);
  }
  if (is_self_intersecting(y))
    throw std::invalid_argument("fourier curve is self-intersecting");
  return finish_curve(std::move(y));
}

int winding_number(const Curve& c, Vec2 p) {
  double total = 0.0;
  double prev = std::atan2(c.y[c.N - 1].y - p.y, c.y[c.N - 1].x - p.x);
  for (int j = 0; j < c.N; ++j) {
    const double cur = std::atan2(c.y[j].y - p.y, c.y[j].x - p.x);
    total += std::remainder(cur - prev, 2.0 * kPi);
    prev = cur;
  }
  return (int)std::lround(total / (2.0 * kPi));
}

Domain::Domain(std::vector<Curve> cs, bool is_bounded)
    : curves(std::move(cs)), bounded(is_bounded) {
  if (curves.empty()) throw std::invalid_argument("domain needs at least one curve");
  // n must point out of the solution domain: away from the enclosed region
  // on a bounded outer boundary, into the enclosed region on hole curves
  // and on every obstacle of an unbounded domain.
  for (size_t k = 0; k < curves.size(); ++k) {
    const bool outer = bounded && k == 0;
    if (!outer) flip_curve(curves[k]);
  }
  if (bounded) {
    for (size_t k = 1; k < curves.size(); ++k) {
      if (winding_number(curves[0], curves[k].y[0]) != 1)
        throw std::invalid_argument("hole curve lies outside the outer boundary");
    }
  }
  // disjointness check: sample-to-sample separation below five spacings of
  // the coarser curve only warns; close-to-touching quadrature is the
  // caller's risk
  for (size_t k = 0; k + 1 < curves.size(); ++k) {
    for (size_t m = k + 1; m < curves.size(); ++m) {
      double dmin = 1e300;
      double hmax = 0.0;
      for (int i = 0; i < curves[k].N; ++i) {
        for (int j = 0; j < curves[m].N; ++j) {
          const Vec2 d{curves[k].y[i].x - curves[m].y[j].x,
                       curves[k].y[i].y - curves[m].y[j].y};
          const double r2 = d.norm2();
          if (r2 < dmin) dmin = r2;
        }
      }
      dmin = std::sqrt(dmin);
      for (int i = 0; i < curves[k].N; ++i)
        hmax = std::max(hmax, curves[k].h * curves[k].speed[i]);
      for (int j = 0; j < curves[m].N; ++j)
        hmax = std::max(hmax, curves[m].h * curves[m].speed[j]);
      if (dmin < 5.0 * hmax)
        warnings.push_back("curves " + std::to_string(k) + " and " +
                           std::to_string(m) + " are closer than 5 grid spacings");
    }
  }
}

int Domain::total_nodes() const {
  int n = 0;
  for (const Curve& c : curves) n += c.N;
  return n;
}

bool Domain::contains(Vec2 p) const {
  if (bounded) {
    if (winding_number(curves[0], p) != 1) return false;
    for (size_t k = 1; k < curves.size(); ++k)
      if (winding_number(curves[k], p) != 0) return false;
    return true;
  }
  for (const Curve& c : curves)
    if (winding_number(c, p) != 0) return false;
  return true;
}

void Domain::nearest_sample(Vec2 p, double* dist, double* local_h) const {
  double best = 1e300;
  double lh = 0.0;
  for (const Curve& c : curves) {
    for (int j = 0; j < c.N; ++j) {
      const Vec2 d{p.x - c.y[j].x, p.y - c.y[j].y};
      const double r2 = d.norm2();
      if (r2 < best) {
        best = r2;
        lh = c.h * c.speed[j];
      }
    }
  }
  *dist = std::sqrt(best);
  *local_h = lh;
}

}  // namespace yukawa
