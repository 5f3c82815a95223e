#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <random>
#include <stdexcept>
#include <vector>

#include "yukawa2d/geometry.hpp"

using namespace yukawa;

namespace {
constexpr double kPi = 3.141592653589793238462643383279502884;
}

TEST_CASE("unit circle: speed, curvature, normals, arclength") {
  const Curve c = ellipse({0, 0}, 1, 1, 0, 64);
  double arclen = 0.0;
  for (int j = 0; j < c.N; ++j) {
    CHECK(c.speed[j] == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(c.kappa[j] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(c.normal[j].norm() == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(std::abs(c.normal[j].dot(c.w[j])) < 1e-12);
    // raw orientation: normal points away from the enclosed region
    CHECK(c.normal[j].dot(c.y[j]) > 0.99);
    arclen += c.h * c.speed[j];
  }
  CHECK(arclen == doctest::Approx(2.0 * kPi).epsilon(1e-13));
}

TEST_CASE("ellipse derivatives and curvature match analytic values") {
  const double a = 2.0, b = 1.0;
  const Curve c = ellipse({0, 0}, a, b, 0, 128);
  for (int j = 0; j < c.N; ++j) {
    const double t = c.h * j;
    CHECK(c.w[j].x == doctest::Approx(-a * std::sin(t)).epsilon(1e-12));
    CHECK(c.w[j].y == doctest::Approx(b * std::cos(t)).epsilon(1e-12));
    const double denom = std::pow(a * a * std::sin(t) * std::sin(t) +
                                  b * b * std::cos(t) * std::cos(t), 1.5);
    CHECK(c.kappa[j] == doctest::Approx(a * b / denom).epsilon(1e-11));
  }
  // kappa = a/b^2 at parameter 0, b/a^2 at pi/2
  CHECK(c.kappa[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(c.kappa[32] == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("rotating an ellipse by pi/2 equals swapping its axes up to shift") {
  const int N = 128;
  const Curve r = ellipse({0, 0}, 2, 1, kPi / 2, N);
  const Curve s = ellipse({0, 0}, 1, 2, 0, N);
  for (int j = 0; j < N; ++j) {
    const int js = (j + N / 4) % N;
    CHECK(r.y[j].x == doctest::Approx(s.y[js].x).epsilon(1e-13));
    CHECK(r.y[j].y == doctest::Approx(s.y[js].y).epsilon(1e-13));
  }
}

TEST_CASE("ellipse rejects bad node counts") {
  CHECK_THROWS_AS(ellipse({0, 0}, 1, 1, 0, 15), std::invalid_argument);
  CHECK_THROWS_AS(ellipse({0, 0}, 1, 1, 0, 8), std::invalid_argument);
  CHECK_THROWS_AS(ellipse({0, 0}, 1, 0, 0, 64), std::invalid_argument);
}

TEST_CASE("fourier circle reproduces ellipse samples") {
  // c_{-1} = 0, c_0 = center, c_1 = r
  const std::vector<std::complex<double>> cs = {
      {0, 0}, {0.3, -0.2}, {0.7, 0}};
  const Curve f = curve_from_fourier(cs, 64);
  const Curve e = ellipse({0.3, -0.2}, 0.7, 0.7, 0, 64);
  for (int j = 0; j < 64; ++j) {
    CHECK(std::abs(f.y[j].x - e.y[j].x) < 1e-15);
    CHECK(std::abs(f.y[j].y - e.y[j].y) < 1e-15);
  }
}

TEST_CASE("flower curve spectral derivative matches analytic derivative") {
  // z = e^{it} + 0.1 e^{6it} + 0.1 e^{-4it}, i.e. r(t) = 1 + 0.2 cos(5t)
  std::vector<std::complex<double>> cs(13, 0.0);
  const int K = 6;
  cs[-4 + K] = 0.1;
  cs[1 + K] = 1.0;
  cs[6 + K] = 0.1;
  const Curve f = curve_from_fourier(cs, 64);
  for (int j = 0; j < f.N; ++j) {
    const double t = f.h * j;
    const std::complex<double> i(0, 1);
    const std::complex<double> dz = i * std::polar(1.0, t) +
                                    0.6 * i * std::polar(1.0, 6 * t) -
                                    0.4 * i * std::polar(1.0, -4 * t);
    CHECK(f.w[j].x == doctest::Approx(dz.real()).epsilon(1e-12));
    CHECK(f.w[j].y == doctest::Approx(dz.imag()).epsilon(1e-12));
  }
}

TEST_CASE("self-intersecting fourier curve is rejected") {
  // x = sin 2t, y = sin t crosses itself at the origin
  std::vector<std::complex<double>> cs(5, 0.0);
  const int K = 2;
  cs[1 + K] = {0.5, 0.0};
  cs[-1 + K] = {-0.5, 0.0};
  cs[2 + K] = {0.0, -0.5};
  cs[-2 + K] = {0.0, 0.5};
  CHECK_THROWS_AS(curve_from_fourier(cs, 64), std::invalid_argument);
}

TEST_CASE("clockwise fourier input is stored counterclockwise") {
  // z = 0.5 e^{-it}: clockwise circle
  const std::vector<std::complex<double>> cs = {{0.5, 0}, {0, 0}, {0, 0}};
  const Curve f = curve_from_fourier(cs, 32);
  double area = 0.0;
  for (int j = 0; j < f.N; ++j) area += 0.5 * f.y[j].cross(f.y[(j + 1) % f.N]);
  CHECK(area > 0.0);
  for (int j = 0; j < f.N; ++j) CHECK(f.kappa[j] == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("spectral derivative on band-limited and smooth data") {
  const int N = 32;
  std::vector<double> v(N), want(N);
  for (int j = 0; j < N; ++j) {
    const double t = 2.0 * kPi * j / N;
    v[j] = std::sin(3 * t);
    want[j] = 3 * std::cos(3 * t);
  }
  auto d = spectral_derivative(v);
  for (int j = 0; j < N; ++j) CHECK(d[j] == doctest::Approx(want[j]).epsilon(1e-13));

  std::vector<double> c(N, 4.2);
  auto dc = spectral_derivative(c);
  for (int j = 0; j < N; ++j) CHECK(std::abs(dc[j]) < 1e-14);

  const int M = 64;
  std::vector<double> e(M);
  for (int j = 0; j < M; ++j) e[j] = std::exp(std::cos(2.0 * kPi * j / M));
  auto de = spectral_derivative(e);
  for (int j = 0; j < M; ++j) {
    const double t = 2.0 * kPi * j / M;
    CHECK(de[j] == doctest::Approx(-std::sin(t) * std::exp(std::cos(t))).epsilon(1e-10));
  }

  CHECK_THROWS_AS(spectral_derivative(std::vector<double>(7, 0.0)),
                  std::invalid_argument);
}

TEST_CASE("fourier interpolation: identity at nodes, exact on band-limited data") {
  const int N = 32;
  std::vector<double> v(N), nodes(N);
  std::mt19937 rng(77);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int j = 0; j < N; ++j) {
    v[j] = u(rng);
    nodes[j] = 2.0 * kPi * j / N;
  }
  auto at_nodes = fourier_interpolate(v, nodes);
  for (int j = 0; j < N; ++j) CHECK(at_nodes[j] == doctest::Approx(v[j]).epsilon(1e-13));

  for (int j = 0; j < N; ++j) v[j] = std::sin(5 * nodes[j]);
  auto off = fourier_interpolate(v, {0.123});
  CHECK(off[0] == doctest::Approx(std::sin(0.615)).epsilon(1e-13));
}

TEST_CASE("shifted-grid interpolation agrees with the direct kernel sum") {
  const int N = 64;
  const double h = 2.0 * kPi / N;
  std::vector<double> v(N);
  std::mt19937 rng(123);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int j = 0; j < N; ++j) v[j] = u(rng);

  for (double delta : {0.37 * h, 1.93 * h, 0.001 * h, -0.6 * h}) {
    const ShiftedGridInterp op(N, delta);
    std::vector<double> fast(N);
    op.apply(v.data(), fast.data());

    std::vector<double> params(N);
    for (int j = 0; j < N; ++j) params[j] = j * h + delta;
    const auto direct = fourier_interpolate(v, params);
    for (int j = 0; j < N; ++j) CHECK(fast[j] == doctest::Approx(direct[j]).epsilon(1e-13));

    // circulant weights describe the same operator
    for (int j = 0; j < N; ++j) {
      double s = 0.0;
      for (int r = 0; r < N; ++r) s += op.weights()[r] * v[(j + r) % N];
      CHECK(s == doctest::Approx(fast[j]).epsilon(1e-12));
    }
  }
}

TEST_CASE("domain orientation: normals point out of the solution domain") {
  // bounded: circle of radius 1 with an elliptical hole around (0.4, 0)
  std::vector<Curve> cs;
  cs.push_back(ellipse({0, 0}, 1, 1, 0, 64));
  cs.push_back(ellipse({0.4, 0}, 0.15, 0.1, 0.3, 64));
  const Domain dom(std::move(cs), true);

  const Curve& outer = dom.curves[0];
  for (int j = 0; j < outer.N; ++j) {
    CHECK(outer.normal[j].dot(outer.y[j]) > 0.99);  // away from the interior
    CHECK(outer.kappa[j] == doctest::Approx(1.0).epsilon(1e-12));
  }
  const Curve& hole = dom.curves[1];
  for (int j = 0; j < hole.N; ++j) {
    const Vec2 from_center = hole.y[j] - Vec2{0.4, 0};
    CHECK(hole.normal[j].dot(from_center) < 0.0);  // into the hole
    CHECK(hole.kappa[j] < 0.0);
  }

  CHECK(dom.holes() == 1);
  CHECK(dom.total_nodes() == 128);
  CHECK(dom.contains({-0.5, 0.0}));
  CHECK(dom.contains({0.4, 0.5}));
  CHECK_FALSE(dom.contains({0.4, 0.0}));   // inside the hole
  CHECK_FALSE(dom.contains({1.5, 0.0}));   // outside the outer boundary
}

TEST_CASE("unbounded domain: every obstacle normal points into its obstacle") {
  std::vector<Curve> cs;
  cs.push_back(ellipse({-1, 0}, 0.3, 0.2, 0, 32));
  cs.push_back(ellipse({1.5, 0.5}, 0.25, 0.25, 0, 32));
  const Domain dom(std::move(cs), false);
  CHECK(dom.holes() == 2);
  for (const Curve& c : dom.curves)
    for (int j = 0; j < c.N; ++j) CHECK(c.kappa[j] < 0.0);
  const Curve& disk = dom.curves[1];
  for (int j = 0; j < disk.N; ++j) {
    const Vec2 from_center = (disk.y[j] - Vec2{1.5, 0.5}) / 0.25;
    CHECK(disk.normal[j].dot(from_center) < -0.99);
  }
  CHECK(dom.contains({0.0, 3.0}));
  CHECK(dom.contains({0.2, 0.0}));
  CHECK_FALSE(dom.contains({-1.0, 0.0}));
  CHECK_FALSE(dom.contains({1.5, 0.5}));
}

TEST_CASE("winding number on a known interior and exterior point") {
  const Curve c = ellipse({2, -1}, 0.8, 0.5, 1.1, 64);
  CHECK(winding_number(c, {2, -1}) == 1);
  CHECK(winding_number(c, {5, 5}) == 0);
}

TEST_CASE("hole outside the outer boundary is rejected") {
  std::vector<Curve> cs;
  cs.push_back(ellipse({0, 0}, 1, 1, 0, 32));
  cs.push_back(ellipse({3, 0}, 0.2, 0.2, 0, 32));
  CHECK_THROWS_AS(Domain(std::move(cs), true), std::invalid_argument);
}

TEST_CASE("close curves produce a separation warning, distant ones do not") {
  {
    std::vector<Curve> cs;
    cs.push_back(ellipse({0, 0}, 1, 1, 0, 64));
    cs.push_back(ellipse({0, 0}, 0.97, 0.97, 0, 64));
    const Domain dom(std::move(cs), true);
    CHECK(dom.warnings.size() == 1);
  }
  {
    std::vector<Curve> cs;
    cs.push_back(ellipse({0, 0}, 1, 1, 0, 64));
    cs.push_back(ellipse({0, 0}, 0.3, 0.3, 0, 64));
    const Domain dom(std::move(cs), true);
    CHECK(dom.warnings.empty());
  }
}

TEST_CASE("nearest sample distance and local spacing") {
  std::vector<Curve> cs;
  cs.push_back(ellipse({0, 0}, 1, 1, 0, 64));
  const Domain dom(std::move(cs), true);
  double dist = 0, lh = 0;
  dom.nearest_sample({0.5, 0.0}, &dist, &lh);
  CHECK(dist == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(lh == doctest::Approx(2.0 * kPi / 64).epsilon(1e-12));
}
