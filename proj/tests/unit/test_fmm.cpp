#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <complex>
#include <random>
#include <stdexcept>
#include <vector>

#include "bessel_oracle.hpp"
#include "doctest.h"
#include "yukawa2d/fmm.hpp"
#include "yukawa2d/special.hpp"

using namespace yukawa;

namespace {

const double kPi = 3.141592653589793238462643383279;

Vec2 rotate(Vec2 v, double phi) {
  double c = std::cos(phi), s = std::sin(phi);
  return {c * v.x - s * v.y, s * v.x + c * v.y};
}

// mixed monopole/dipole cloud inside the square of the given center/width
std::vector<Source> random_cloud(int n, Vec2 center, double width,
                                 unsigned seed) {
  std::mt19937 gen(seed);
  std::uniform_real_distribution<double> pos(-0.5 * width, 0.5 * width);
  std::uniform_real_distribution<double> val(-1.0, 1.0);
  std::uniform_real_distribution<double> ang(0.0, 2.0 * kPi);
  std::vector<Source> out(n);
  for (int i = 0; i < n; ++i) {
    out[i].position = {center.x + pos(gen), center.y + pos(gen)};
    if (i % 2 == 0) {
      out[i].monopole = val(gen);
    } else {
      out[i].dipole = val(gen);
      double a = ang(gen);
      out[i].dipole_dir = {std::cos(a), std::sin(a)};
    }
  }
  return out;
}

double rel_max_diff(const std::vector<double>& got,
                    const std::vector<double>& want) {
  REQUIRE(got.size() == want.size());
  double num = 0, den = 0;
  for (size_t i = 0; i < got.size(); ++i) {
    num = std::max(num, std::abs(got[i] - want[i]));
    den = std::max(den, std::abs(want[i]));
  }
  return num / den;
}

double rel_max_diff(const std::vector<Vec2>& got,
                    const std::vector<Vec2>& want) {
  REQUIRE(got.size() == want.size());
  double num = 0, den = 0;
  for (size_t i = 0; i < got.size(); ++i) {
    num = std::max({num, std::abs(got[i].x - want[i].x),
                    std::abs(got[i].y - want[i].y)});
    den = std::max({den, std::abs(want[i].x), std::abs(want[i].y)});
  }
  return num / den;
}

int leaf_point_count_max(const QuadTree& t) {
  int m = 0;
  for (const auto& n : t.nodes)
    if (n.leaf()) m = std::max(m, static_cast<int>(n.point_indices.size()));
  return m;
}

}  // namespace

TEST_CASE("tree: single point gives a root leaf") {
  QuadTree t = build_tree({{0.3, 0.7}}, 40);
  CHECK(t.nodes.size() == 1);
  CHECK(t.nodes[0].level == 0);
  CHECK(t.nodes[0].leaf());
  CHECK(t.nodes[0].point_indices.size() == 1);
  CHECK(t.depth() == 0);
}

TEST_CASE("tree: over-full boxes split until leaves fit") {
  const int s_max = 10;
  std::mt19937 gen(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Vec2> pts(4 * s_max);
  for (auto& p : pts) p = {u(gen), u(gen)};

  QuadTree t = build_tree(pts, s_max);
  CHECK(t.depth() >= 1);
  CHECK(leaf_point_count_max(t) <= s_max);

  // every point in exactly one leaf
  std::vector<int> seen(pts.size(), 0);
  for (const auto& n : t.nodes)
    if (n.leaf())
      for (int i : n.point_indices) seen[i]++;
  for (int c : seen) CHECK(c == 1);
}

TEST_CASE("tree: refinement follows clustering, not empty space") {
  std::vector<Vec2> pts;
  for (int k = 0; k < 1000; ++k) {
    double th = 2.0 * kPi * k / 1000.0;
    pts.push_back({0.28 + 0.11 * std::cos(th), 0.31 + 0.05 * std::sin(th)});
    pts.push_back({0.71 + 0.08 * std::cos(th), 0.66 + 0.13 * std::sin(th)});
  }
  QuadTree t = build_tree(pts, 40);

  CHECK(t.depth() >= 3);
  // children are appended after their parent, so a reverse sweep is bottom-up
  std::vector<int> subtree(t.nodes.size(), 0);
  for (size_t i = t.nodes.size(); i-- > 0;) {
    if (t.nodes[i].leaf())
      subtree[i] = static_cast<int>(t.nodes[i].point_indices.size());
    else
      for (int c : t.nodes[i].children)
        if (c >= 0) subtree[i] += subtree[c];
  }
  // adaptive: only over-full boxes were split
  for (size_t i = 0; i < t.nodes.size(); ++i)
    if (!t.nodes[i].leaf()) CHECK(subtree[i] > 40);

  QuadTree again = build_tree(pts, 40);
  REQUIRE(again.nodes.size() == t.nodes.size());
  for (size_t i = 0; i < t.nodes.size(); ++i) {
    CHECK(again.nodes[i].level == t.nodes[i].level);
    CHECK(again.nodes[i].ix == t.nodes[i].ix);
    CHECK(again.nodes[i].iy == t.nodes[i].iy);
    CHECK(again.nodes[i].point_indices == t.nodes[i].point_indices);
  }
}

TEST_CASE("tree: coincident points stop at a warned leaf") {
  std::vector<Vec2> pts(100, Vec2{0.4, 0.4});
  QuadTree t = build_tree(pts, 10);
  CHECK(t.nodes.size() == 1);
  CHECK(t.nodes[0].leaf());
  CHECK(!t.warnings.empty());
}

TEST_CASE("tree: input validation") {
  CHECK_THROWS_AS(build_tree({}, 10), std::invalid_argument);
  CHECK_THROWS_AS(build_tree({{0, 0}}, 0), std::invalid_argument);
  double bad = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(build_tree({{bad, 0}}, 10), std::invalid_argument);
}

TEST_CASE("p2m: centered charges have transparent coefficients") {
  double alpha = 0.7;

  std::vector<Source> mono(1);
  mono[0] = {{0, 0}, 1.0, 0.0, {1, 0}, -1};
  Expansion e = p2m(mono, {0, 0}, alpha, 8);
  CHECK(std::abs(e.coeff[0] - std::complex<long double>(1)) < 1e-18);
  for (int l = 1; l <= 8; ++l) CHECK(std::abs(e.coeff[l]) < 1e-18);

  // charges +-1 mirrored through the center cancel at l = 0
  std::vector<Source> pair(2);
  pair[0] = {{0.2, 0.1}, 1.0, 0.0, {1, 0}, -1};
  pair[1] = {{-0.2, -0.1}, -1.0, 0.0, {1, 0}, -1};
  Expansion e2 = p2m(pair, {0, 0}, alpha, 8);
  CHECK(std::abs(e2.coeff[0]) < 1e-18);

  // centered unit dipole along +x concentrates in the l = 1 coefficient
  std::vector<Source> dip(1);
  dip[0] = {{0, 0}, 0.0, 1.0, {1, 0}, -1};
  Expansion e3 = p2m(dip, {0, 0}, alpha, 8);
  CHECK(std::abs(e3.coeff[1] - std::complex<long double>(0.5L / alpha)) <
        1e-17);
  CHECK(std::abs(e3.coeff[0]) < 1e-18);
  CHECK(std::abs(e3.coeff[2]) < 1e-18);
}

TEST_CASE("p2m: leaf expansion reproduces the far field") {
  double alpha = 0.8;
  auto sources = random_cloud(10, {0, 0}, 1.0, 23);
  int p = trunc_order_for_tolerance(1e-12);
  Expansion e = p2m(sources, {0, 0}, alpha, p);

  ParticleSystem sys;
  sys.sources = sources;
  sys.alpha = alpha;
  sys.want_gradient = true;
  for (int k = 0; k < 8; ++k) {
    double th = 2.0 * kPi * k / 8.0;
    sys.targets.push_back({3.0 * std::cos(th), 3.0 * std::sin(th)});
  }
  ParticleOutputs direct = direct_evaluate(sys);

  std::vector<double> phi(sys.targets.size());
  std::vector<Vec2> grad(sys.targets.size());
  for (size_t i = 0; i < sys.targets.size(); ++i)
    m2p(e, sys.targets[i], &phi[i], &grad[i]);

  CHECK(rel_max_diff(phi, direct.potential) < 1e-12);
  CHECK(rel_max_diff(grad, direct.gradient) < 1e-12);
}

TEST_CASE("p2m: order cap enforced") {
  std::vector<Source> s(1);
  s[0] = {{0, 0}, 1.0, 0.0, {1, 0}, -1};
  CHECK_THROWS_AS(p2m(s, {0, 0}, 1.0, kExpansionOrderCap + 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(p2m(s, {0, 0}, 1.0, -1), std::invalid_argument);
  CHECK_THROWS_AS(p2m(s, {0, 0}, -1.0, 8), std::invalid_argument);
}

TEST_CASE("m2m: zero offset is the identity") {
  auto sources = random_cloud(6, {0.1, -0.2}, 0.5, 31);
  Expansion e = p2m(sources, {0.1, -0.2}, 1.3, 12);
  Expansion shifted = m2m(e, {0.1, -0.2}, e.lambda);
  REQUIRE(shifted.coeff.size() == e.coeff.size());
  for (size_t l = 0; l < e.coeff.size(); ++l)
    CHECK(shifted.coeff[l] == e.coeff[l]);
}

TEST_CASE("m2m: shifted expansion matches a direct one") {
  double alpha = 0.9;
  std::vector<Source> one(1);
  one[0] = {{0.3, 0.2}, 0.7, 0.4, {0.6, 0.8}, -1};

  Expansion child = p2m(one, {0.25, 0.25}, alpha, 20);
  Expansion viaShift = m2m(child, {0, 0});
  Expansion fresh = p2m(one, {0, 0}, alpha, 20);
  for (int l = 0; l <= 20; ++l)
    CHECK(std::abs(viaShift.coeff[l] - fresh.coeff[l]) < 1e-12);

  auto cloud = random_cloud(12, {0.25, 0.25}, 0.5, 7);
  Expansion ec = p2m(cloud, {0.25, 0.25}, alpha, 25);
  Expansion ep = m2m(ec, {0, 0});
  ParticleSystem sys;
  sys.sources = cloud;
  sys.alpha = alpha;
  sys.targets = {{3.1, -0.4}, {-2.8, 2.2}};
  ParticleOutputs direct = direct_evaluate(sys);
  for (size_t i = 0; i < sys.targets.size(); ++i) {
    double a = 0, b = 0;
    m2p(ec, sys.targets[i], &a, nullptr);
    m2p(ep, sys.targets[i], &b, nullptr);
    CHECK(std::abs(a - direct.potential[i]) <
          1e-12 * std::abs(direct.potential[i]));
    CHECK(std::abs(b - direct.potential[i]) <
          1e-12 * std::abs(direct.potential[i]));
  }
}

TEST_CASE("m2l: distant charge collapses to K0 at the local center") {
  double alpha = 0.8;
  Vec2 tc{3.0, 0.5};

  // charge at the multipole center: translation is exact at the center
  std::vector<Source> centered(1);
  centered[0] = {{0, 0}, 1.0, 0.0, {1, 0}, -1};
  Expansion m = p2m(centered, {0, 0}, alpha, 30);
  Expansion loc = m2l(m, tc);
  double phi = 0;
  l2p(loc, tc, &phi, nullptr);
  double k0, k1;
  special::bessel_k01(tc.norm() / alpha, k0, k1);
  CHECK(std::abs(phi - k0) < 1e-14 * k0);

  // off-center charge: exact up to the truncated multipole tail
  std::vector<Source> off(1);
  off[0] = {{0.1, -0.15}, 1.0, 0.0, {1, 0}, -1};
  Expansion m2 = p2m(off, {0, 0}, alpha, 30);
  Expansion loc2 = m2l(m2, tc);
  double phi2 = 0;
  l2p(loc2, tc, &phi2, nullptr);
  double r = (tc - off[0].position).norm();
  special::bessel_k01(r / alpha, k0, k1);
  CHECK(std::abs(phi2 - k0) < 1e-12 * k0);

  CHECK_THROWS_AS(m2l(m, {0, 0}), std::invalid_argument);
}

TEST_CASE("m2l: rotating the configuration twists the coefficients") {
  double alpha = 1.1, phi = 0.7;
  auto cloud = random_cloud(9, {0, 0}, 0.8, 41);
  Vec2 tc{2.4, 0.6};

  Expansion L = m2l(p2m(cloud, {0, 0}, alpha, 18), tc);

  auto turned = cloud;
  for (auto& s : turned) {
    s.position = rotate(s.position, phi);
    s.dipole_dir = rotate(s.dipole_dir, phi);
  }
  Expansion Lr = m2l(p2m(turned, {0, 0}, alpha, 18), rotate(tc, phi));

  long double scale = 0;
  for (auto c : L.coeff) scale = std::max(scale, std::abs(c));
  for (int l = 0; l <= 18; ++l) {
    std::complex<long double> tw =
        L.coeff[l] * std::exp(std::complex<long double>(0, -l * phi));
    CHECK(std::abs(Lr.coeff[l] - tw) < 1e-13 * scale);
  }

  // and the represented field is invariant
  Vec2 probe{2.6, 0.4};
  double a = 0, b = 0;
  l2p(L, probe, &a, nullptr);
  l2p(Lr, rotate(probe, phi), &b, nullptr);
  CHECK(a == doctest::Approx(b).epsilon(1e-13));
}

TEST_CASE("m2l: truncation error decays geometrically to the floor") {
  double alpha = 0.9;
  auto sources = random_cloud(50, {0, 0}, 1.0, 53);
  std::mt19937 gen(67);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  ParticleSystem sys;
  sys.sources = sources;
  sys.alpha = alpha;
  for (int i = 0; i < 30; ++i) sys.targets.push_back({2.0 + u(gen), u(gen)});
  ParticleOutputs direct = direct_evaluate(sys);

  double prev = 1e300;
  double final_err = 1e300;
  for (int p = 4; p <= 40; p += 4) {
    Expansion loc = m2l(p2m(sources, {0, 0}, alpha, p), {2.0, 0.0});
    std::vector<double> phi(sys.targets.size());
    for (size_t i = 0; i < sys.targets.size(); ++i)
      l2p(loc, sys.targets[i], &phi[i], nullptr);
    double err = rel_max_diff(phi, direct.potential);
    if (p > 4) {
      // geometric until the arithmetic floor, never increasing above it
      CHECK(err <= std::max(0.6 * prev, 5e-14));
    }
    prev = err;
    final_err = err;
  }
  CHECK(final_err < 1e-12);
}

TEST_CASE("l2l: zero offset is the identity") {
  auto cloud = random_cloud(5, {2.0, 0.0}, 0.4, 71);
  Expansion L = p2l(cloud, {0.1, 0.1}, 0.8, 10);
  Expansion moved = l2l(L, {0.1, 0.1}, L.lambda);
  REQUIRE(moved.coeff.size() == L.coeff.size());
  for (size_t l = 0; l < L.coeff.size(); ++l)
    CHECK(moved.coeff[l] == L.coeff[l]);
}

TEST_CASE("l2l: re-centered expansion agrees inside the child") {
  double alpha = 1.2;
  auto cloud = random_cloud(8, {3.0, 1.0}, 0.8, 83);
  Expansion parent = p2l(cloud, {0, 0}, alpha, 24);
  Expansion child = l2l(parent, {0.25, -0.25});

  for (Vec2 x : {Vec2{0.3, -0.2}, Vec2{0.1, -0.4}, Vec2{0.35, -0.1}}) {
    double a = 0, b = 0;
    Vec2 ga, gb;
    l2p(parent, x, &a, &ga);
    l2p(child, x, &b, &gb);
    CHECK(a == doctest::Approx(b).epsilon(1e-13));
    CHECK(ga.x == doctest::Approx(gb.x).epsilon(1e-12));
    CHECK(ga.y == doctest::Approx(gb.y).epsilon(1e-12));
  }
}

TEST_CASE("l2p: potential and gradient of a distant charge") {
  double alpha = 1.0;
  std::vector<Source> one(1);
  one[0] = {{4.0, 1.0}, 1.0, 0.0, {1, 0}, -1};
  Expansion L = p2l(one, {0, 0}, alpha, 30);

  Vec2 x{0.3, -0.2};
  double phi = 0;
  Vec2 g;
  l2p(L, x, &phi, &g);

  Vec2 dx = x - one[0].position;
  double r = dx.norm();
  double k0, k1;
  special::bessel_k01(r / alpha, k0, k1);
  CHECK(std::abs(phi - k0) < 1e-11 * std::abs(k0));
  Vec2 want{-k1 / alpha * dx.x / r, -k1 / alpha * dx.y / r};
  CHECK(std::abs(g.x - want.x) < 1e-11 * std::abs(want.x));
  CHECK(std::abs(g.y - want.y) < 1e-11 * std::abs(want.y));

  // centered differences of the expansion's own potential
  double h = 1e-5;
  double pp = 0, pm = 0;
  l2p(L, {x.x + h, x.y}, &pp, nullptr);
  l2p(L, {x.x - h, x.y}, &pm, nullptr);
  CHECK(std::abs((pp - pm) / (2 * h) - g.x) < 1e-6);
  l2p(L, {x.x, x.y + h}, &pp, nullptr);
  l2p(L, {x.x, x.y - h}, &pm, nullptr);
  CHECK(std::abs((pp - pm) / (2 * h) - g.y) < 1e-6);
}

TEST_CASE("expansion kind mismatches are rejected") {
  auto cloud = random_cloud(3, {0, 0}, 0.5, 5);
  Expansion m = p2m(cloud, {0, 0}, 1.0, 6);
  Expansion L = p2l(cloud, {3, 0}, 1.0, 6);
  CHECK_THROWS_AS(m2m(L, {1, 1}), std::invalid_argument);
  CHECK_THROWS_AS(m2l(L, {1, 1}), std::invalid_argument);
  CHECK_THROWS_AS(l2l(m, {1, 1}), std::invalid_argument);
  double out;
  CHECK_THROWS_AS(l2p(m, {0, 0}, &out, nullptr), std::invalid_argument);
  CHECK_THROWS_AS(m2p(L, {0, 0}, &out, nullptr), std::invalid_argument);
}

TEST_CASE("direct: single pair and symmetry") {
  ParticleSystem sys;
  sys.alpha = 0.6;
  sys.sources.resize(1);
  sys.sources[0] = {{0, 0}, 0.8, 0.0, {1, 0}, -1};
  sys.targets = {{0.9, 1.2}};
  ParticleOutputs out = direct_evaluate(sys);
  double k0, k1;
  special::bessel_k01(1.5 / 0.6, k0, k1);
  CHECK(out.potential[0] == doctest::Approx(0.8 * k0).epsilon(1e-15));

  // two equal charges equidistant from the target double the value
  sys.sources.resize(2);
  sys.sources[1] = {{1.8, 2.4}, 0.8, 0.0, {1, 0}, -1};
  ParticleOutputs two = direct_evaluate(sys);
  CHECK(two.potential[0] ==
        doctest::Approx(2 * out.potential[0]).epsilon(1e-15));
}

TEST_CASE("direct: matches an extended-precision recomputation") {
  auto sources = random_cloud(100, {0.5, 0.5}, 1.0, 97);
  ParticleSystem sys;
  sys.sources = sources;
  sys.alpha = 0.7;
  sys.want_gradient = true;
  std::mt19937 gen(101);
  std::uniform_real_distribution<double> u(-1.5, 2.5);
  for (int i = 0; i < 20; ++i) sys.targets.push_back({u(gen), u(gen)});
  ParticleOutputs out = direct_evaluate(sys);

  for (size_t t = 0; t < sys.targets.size(); ++t) {
    long double phi = 0;
    for (const auto& s : sources) {
      long double rx = (long double)sys.targets[t].x - s.position.x;
      long double ry = (long double)sys.targets[t].y - s.position.y;
      long double r = sqrtl(rx * rx + ry * ry);
      long double arg = r / sys.alpha;
      if (s.monopole != 0) phi += s.monopole * oracle::bessel_k(0, arg);
      if (s.dipole != 0) {
        long double rd = rx * s.dipole_dir.x + ry * s.dipole_dir.y;
        phi += s.dipole * oracle::bessel_k(1, arg) / sys.alpha * rd / r;
      }
    }
    CHECK(std::abs(out.potential[t] - (double)phi) <=
          1e-13 * std::abs((double)phi) + 1e-16);
  }
}

TEST_CASE("evaluate: a pure near-field case is exactly the direct sum") {
  ParticleSystem sys;
  sys.alpha = 0.9;
  sys.sources.resize(2);
  sys.sources[0] = {{0.1, 0.2}, 1.0, 0.0, {1, 0}, -1};
  sys.sources[1] = {{0.7, 0.4}, 0.0, -0.5, {0.8, 0.6}, -1};
  sys.targets = {{0.3, 0.9}, {0.5, 0.1}};
  sys.want_gradient = true;

  ParticleOutputs fast = evaluate(sys, 1e-11);
  ParticleOutputs slow = direct_evaluate(sys);
  for (int i = 0; i < 2; ++i) {
    CHECK(fast.potential[i] == slow.potential[i]);
    CHECK(fast.gradient[i].x == slow.gradient[i].x);
    CHECK(fast.gradient[i].y == slow.gradient[i].y);
  }
}

TEST_CASE("evaluate: mixed charges on the benchmark layout") {
  // half the points uniform in the unit square, half on two ellipse rims
  const int n = 4096;
  std::mt19937 gen(113);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::uniform_real_distribution<double> val(-1.0, 1.0);

  ParticleSystem sys;
  sys.alpha = 1.0;
  sys.want_gradient = true;
  sys.sources.resize(n);
  for (int i = 0; i < n; ++i) {
    Vec2 p;
    if (i < n / 2) {
      p = {u01(gen), u01(gen)};
    } else {
      double th = 2.0 * kPi * u01(gen);
      if (i % 2 == 0)
        p = {0.3 + 0.22 * std::cos(th), 0.35 + 0.1 * std::sin(th)};
      else
        p = {0.68 + 0.12 * std::cos(th), 0.67 + 0.21 * std::sin(th)};
    }
    Source& s = sys.sources[i];
    s.position = p;
    s.tag = i;
    if (i % 2 == 0) {
      s.monopole = val(gen);
    } else {
      s.dipole = val(gen);
      double a = 2.0 * kPi * u01(gen);
      s.dipole_dir = {std::cos(a), std::sin(a)};
    }
    sys.targets.push_back(p);
    sys.target_tags.push_back(i);
  }

  ParticleOutputs fast = evaluate(sys, 1e-11);
  ParticleOutputs slow = direct_evaluate(sys);
  CHECK(rel_max_diff(fast.potential, slow.potential) < 1e-10);
  CHECK(rel_max_diff(fast.gradient, slow.gradient) < 1e-10);
}

TEST_CASE("evaluate: skewed cluster next to sparse points") {
  // one deep cluster plus isolated far points exercises the level-skewed
  // interaction lists
  auto cluster = random_cloud(500, {0.1, 0.1}, 0.02, 127);
  ParticleSystem sys;
  sys.alpha = 0.3;
  sys.want_gradient = true;
  sys.sources = cluster;
  int tag = 0;
  for (auto& s : sys.sources) s.tag = tag++;
  for (Vec2 p : {Vec2{0.9, 0.9}, Vec2{0.85, 0.1}, Vec2{0.1, 0.88}, Vec2{0.5, 0.5},
                 Vec2{0.12, 0.13}}) {
    Source s;
    s.position = p;
    s.monopole = 1.0;
    s.tag = tag++;
    sys.sources.push_back(s);
  }
  for (size_t i = 0; i < sys.sources.size(); ++i) {
    sys.targets.push_back(sys.sources[i].position);
    sys.target_tags.push_back(sys.sources[i].tag);
  }

  ParticleOutputs fast = evaluate(sys, 1e-11, 20);
  ParticleOutputs slow = direct_evaluate(sys);
  CHECK(rel_max_diff(fast.potential, slow.potential) < 1e-10);
  CHECK(rel_max_diff(fast.gradient, slow.gradient) < 1e-10);
}

TEST_CASE("evaluate: linear in the source strengths") {
  auto a = random_cloud(600, {0.5, 0.5}, 1.0, 139);
  auto b = a;
  std::mt19937 gen(149);
  std::uniform_real_distribution<double> val(-1.0, 1.0);
  for (auto& s : b) {
    if (s.monopole != 0) s.monopole = val(gen);
    if (s.dipole != 0) s.dipole = val(gen);
  }
  auto sum = a;
  for (size_t i = 0; i < a.size(); ++i) {
    sum[i].monopole = a[i].monopole + b[i].monopole;
    sum[i].dipole = a[i].dipole + b[i].dipole;
  }

  ParticleSystem sys;
  sys.alpha = 0.8;
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (int i = 0; i < 50; ++i) sys.targets.push_back({u01(gen), u01(gen)});

  sys.sources = a;
  auto oa = evaluate(sys, 1e-11);
  sys.sources = b;
  auto ob = evaluate(sys, 1e-11);
  sys.sources = sum;
  auto os = evaluate(sys, 1e-11);

  double num = 0, den = 0;
  for (size_t i = 0; i < os.potential.size(); ++i) {
    num = std::max(num,
                   std::abs(os.potential[i] - oa.potential[i] - ob.potential[i]));
    den = std::max(den, std::abs(os.potential[i]));
  }
  CHECK(num / den < 1e-12);
}

TEST_CASE("evaluate: bitwise deterministic") {
  auto cloud = random_cloud(800, {0.5, 0.5}, 1.0, 151);
  ParticleSystem sys;
  sys.alpha = 0.5;
  sys.sources = cloud;
  sys.want_gradient = true;
  std::mt19937 gen(157);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (int i = 0; i < 64; ++i) sys.targets.push_back({u01(gen), u01(gen)});

  ParticleOutputs x = evaluate(sys, 1e-9);
  ParticleOutputs y = evaluate(sys, 1e-9);
  for (size_t i = 0; i < x.potential.size(); ++i) {
    CHECK(x.potential[i] == y.potential[i]);
    CHECK(x.gradient[i].x == y.gradient[i].x);
    CHECK(x.gradient[i].y == y.gradient[i].y);
  }
}

TEST_CASE("evaluate: identity tags exclude self-interaction") {
  auto cloud = random_cloud(80, {0.5, 0.5}, 1.0, 163);
  ParticleSystem sys;
  sys.alpha = 0.7;
  sys.sources = cloud;
  for (size_t i = 0; i < cloud.size(); ++i) {
    sys.sources[i].tag = static_cast<int>(i);
    sys.targets.push_back(cloud[i].position);
    sys.target_tags.push_back(static_cast<int>(i));
  }
  ParticleOutputs fast = evaluate(sys, 1e-11);
  ParticleOutputs slow = direct_evaluate(sys);
  for (size_t i = 0; i < sys.targets.size(); ++i)
    CHECK(fast.potential[i] ==
          doctest::Approx(slow.potential[i]).epsilon(1e-11));

  // untagged coincidence is a hard error in both paths
  ParticleSystem bare = sys;
  for (auto& s : bare.sources) s.tag = -1;
  bare.target_tags.clear();
  CHECK_THROWS_AS(direct_evaluate(bare), std::domain_error);
  CHECK_THROWS_AS(evaluate(bare, 1e-11), std::domain_error);
}

TEST_CASE("evaluate: validation") {
  ParticleSystem sys;
  sys.sources.resize(1);
  sys.sources[0] = {{0, 0}, 1.0, 0.0, {1, 0}, -1};
  sys.targets = {{1, 1}};

  CHECK_THROWS_AS(evaluate(sys, 1e-15), std::invalid_argument);
  CHECK_THROWS_AS(evaluate(sys, 1e-2), std::invalid_argument);
  CHECK_THROWS_AS(evaluate(sys, 1e-11, 0), std::invalid_argument);

  ParticleSystem bad = sys;
  bad.alpha = 0.0;
  CHECK_THROWS_AS(evaluate(bad, 1e-11), std::invalid_argument);
  bad = sys;
  bad.target_tags = {1, 2};
  CHECK_THROWS_AS(evaluate(bad, 1e-11), std::invalid_argument);
}

TEST_CASE("truncation table: anchored and monotone") {
  CHECK(trunc_order_for_tolerance(1e-11) == 30);
  int prev = 0;
  for (double tol : {1e-3, 1e-5, 1e-7, 1e-9, 1e-11, 1e-13, 1e-14}) {
    int p = trunc_order_for_tolerance(tol);
    CHECK(p >= prev);
    CHECK(p <= kExpansionOrderCap);
    prev = p;
  }
  CHECK_THROWS_AS(trunc_order_for_tolerance(1e-15), std::invalid_argument);
  CHECK_THROWS_AS(trunc_order_for_tolerance(1e-2), std::invalid_argument);
}
