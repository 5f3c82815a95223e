#include "yukawa2d/fmm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <unordered_map>

#include "yukawa2d/special.hpp"

namespace yukawa {

namespace {

using cplx = std::complex<long double>;

#include "fmm_ptable.inc"

// Coordinates degenerate past this depth; deeper clusters go to oversized
// leaves and the direct near-field path absorbs them.
constexpr int kMaxDepth = 30;

void check_order(int p) {
  if (p < 0 || p > kExpansionOrderCap)
    throw std::invalid_argument("expansion order out of range");
}

// e^{ik theta} for k = 0..kmax; negative k by conjugation.
void fill_phases(long double theta, int kmax, std::vector<cplx>& ph) {
  ph.resize(kmax + 1);
  ph[0] = 1;
  const cplx step(std::cos(theta), std::sin(theta));
  for (int k = 1; k <= kmax; ++k) ph[k] = ph[k - 1] * step;
}

// ---------------------------------------------------------------------------
// Expansion cores. A coefficient block c[0..p] stands for orders -p..p with
// c_{-l} = conj(c_l); all source data is real so the symmetry is exact.
// Radial factors are I_l(x)/lambda^l (multipole side) and K_l(x)*lambda^l
// (local side); every lambda power appearing below has a non-negative
// exponent, which is what makes the translations safe at any box/alpha ratio.

// Add one source's contribution to a multipole block about `center + rel`.
void p2m_add(cplx* c, int p, Vec2 rel, long double alpha_u, long double lambda,
             long double q, long double mu, Vec2 dir) {
  const long double r = std::hypot((long double)rel.x, (long double)rel.y);
  const long double th = std::atan2((long double)rel.y, (long double)rel.x);
  long double itil[special::kMaxOrder + 1];
  special::bessel_i_ratio_seq(r / alpha_u, lambda, p + 1, itil);
  static thread_local std::vector<cplx> ph;
  fill_phases(-th, p + 1, ph);
  if (q != 0)
    for (int l = 0; l <= p; ++l) c[l] += q * itil[l] * ph[l];
  if (mu != 0) {
    const cplx delta((long double)dir.x, (long double)dir.y);
    const cplx deltab = std::conj(delta);
    const long double pre = mu / (2 * alpha_u);
    for (int l = 0; l <= p; ++l) {
      // I_{l-1} e^{-i(l-1)th} / lambda^l ; order -1 folds back to +1
      const cplx t1 = (l >= 1) ? itil[l - 1] / lambda * ph[l - 1]
                               : itil[1] * lambda * std::conj(ph[1]);
      const cplx t2 = itil[l + 1] * lambda * ph[l + 1];
      c[l] += pre * (deltab * t1 + delta * t2);
    }
  }
}

// Add one distant source directly to a local block (rel = source - center).
void p2l_add(cplx* c, int p, Vec2 rel, long double alpha_u, long double lambda,
             long double q, long double mu, Vec2 dir) {
  const long double r = std::hypot((long double)rel.x, (long double)rel.y);
  const long double th = std::atan2((long double)rel.y, (long double)rel.x);
  long double ktil[special::kMaxOrder + 1];
  special::bessel_k_ratio_seq(r / alpha_u, lambda, p + 1, ktil);
  static thread_local std::vector<cplx> ph;
  fill_phases(-th, p + 1, ph);
  if (q != 0)
    for (int l = 0; l <= p; ++l) c[l] += q * ktil[l] * ph[l];
  if (mu != 0) {
    const cplx delta((long double)dir.x, (long double)dir.y);
    const cplx deltab = std::conj(delta);
    const long double pre = -mu / (2 * alpha_u);
    for (int l = 0; l <= p; ++l) {
      const cplx t1 = (l >= 1) ? ktil[l - 1] * lambda * ph[l - 1]
                               : ktil[1] / lambda * std::conj(ph[1]);
      const cplx t2 = ktil[l + 1] / lambda * ph[l + 1];
      c[l] += pre * (deltab * t1 + delta * t2);
    }
  }
}

// Shift a multipole block; rel = source center - destination center.
void m2m_core(const cplx* src, int p, long double src_lambda, Vec2 rel,
              long double alpha_u, long double dst_lambda, cplx* dst) {
  const long double b = std::hypot((long double)rel.x, (long double)rel.y);
  const long double beta = std::atan2((long double)rel.y, (long double)rel.x);
  long double itil[special::kMaxOrder + 1];
  special::bessel_i_ratio_seq(b / alpha_u, dst_lambda, 2 * p, itil);
  static thread_local std::vector<cplx> ph;
  fill_phases(-beta, 2 * p, ph);
  const long double ratio = src_lambda / dst_lambda;
  static thread_local std::vector<long double> rpow, dpow;
  rpow.resize(2 * p + 1);
  dpow.resize(2 * p + 1);
  rpow[0] = dpow[0] = 1;
  for (int k = 1; k <= 2 * p; ++k) {
    rpow[k] = rpow[k - 1] * ratio;
    dpow[k] = dpow[k - 1] * dst_lambda;
  }
  for (int l = 0; l <= p; ++l) {
    cplx acc = 0;
    for (int n = -p; n <= p; ++n) {
      const int an = n < 0 ? -n : n;
      const int m = l >= n ? l - n : n - l;
      const cplx mn = n >= 0 ? src[n] : std::conj(src[-n]);
      const long double factor = itil[m] * rpow[an] * dpow[an + m - l];
      acc += mn * factor * (l >= n ? ph[l - n] : std::conj(ph[n - l]));
    }
    dst[l] += acc;
  }
}

// Far-field conversion; rel = local center - multipole center.
void m2l_core(const cplx* src, int p, long double src_lambda, Vec2 rel,
              long double alpha_u, long double dst_lambda, cplx* dst) {
  const long double d = std::hypot((long double)rel.x, (long double)rel.y);
  if (d <= 0) throw std::invalid_argument("m2l: coincident centers");
  const long double th = std::atan2((long double)rel.y, (long double)rel.x);
  long double ktil[special::kMaxOrder + 1];
  special::bessel_k_ratio_seq(d / alpha_u, dst_lambda, 2 * p, ktil);
  static thread_local std::vector<cplx> ph;
  fill_phases(th, 2 * p, ph);
  const long double ratio = src_lambda / dst_lambda;
  static thread_local std::vector<long double> rpow, dpow;
  rpow.resize(2 * p + 1);
  dpow.resize(2 * p + 1);
  rpow[0] = dpow[0] = 1;
  for (int k = 1; k <= 2 * p; ++k) {
    rpow[k] = rpow[k - 1] * ratio;
    dpow[k] = dpow[k - 1] * dst_lambda;
  }
  for (int l = 0; l <= p; ++l) {
    cplx acc = 0;
    for (int n = -p; n <= p; ++n) {
      const int an = n < 0 ? -n : n;
      const int m = n >= l ? n - l : l - n;
      const cplx mn = n >= 0 ? src[n] : std::conj(src[-n]);
      const long double factor = ktil[m] * rpow[an] * dpow[an + l - m];
      acc += mn * factor * (n >= l ? ph[n - l] : std::conj(ph[l - n]));
    }
    dst[l] += (l & 1) ? -acc : acc;
  }
}

// Shift a local block; rel = destination center - source center.
void l2l_core(const cplx* src, int p, long double src_lambda, Vec2 rel,
              long double alpha_u, long double dst_lambda, cplx* dst) {
  const long double b = std::hypot((long double)rel.x, (long double)rel.y);
  const long double beta = std::atan2((long double)rel.y, (long double)rel.x);
  long double itil[special::kMaxOrder + 1];
  special::bessel_i_ratio_seq(b / alpha_u, src_lambda, 2 * p, itil);
  static thread_local std::vector<cplx> ph;
  fill_phases(beta, 2 * p, ph);
  const long double ratio = dst_lambda / src_lambda;
  static thread_local std::vector<long double> rpow, spow;
  rpow.resize(p + 1);
  spow.resize(2 * p + 1);
  rpow[0] = spow[0] = 1;
  for (int k = 1; k <= p; ++k) rpow[k] = rpow[k - 1] * ratio;
  for (int k = 1; k <= 2 * p; ++k) spow[k] = spow[k - 1] * src_lambda;
  for (int m = 0; m <= p; ++m) {
    cplx acc = 0;
    for (int n = -p; n <= p; ++n) {
      const int an = n < 0 ? -n : n;
      const int k = n >= m ? n - m : m - n;
      const cplx ln = n >= 0 ? src[n] : std::conj(src[-n]);
      const long double factor = itil[k] * rpow[m] * spow[m + k - an];
      acc += ln * factor * (n >= m ? ph[n - m] : std::conj(ph[m - n]));
    }
    dst[m] += acc;
  }
}

// Evaluate a local block at rel = point - center. Gradient comes from the
// raising relation (d_x + i d_y) I_l e^{il th} = I_{l+1} e^{i(l+1) th}/alpha;
// with real data the minus branch is the conjugate, so dx = Re, dy = Im.
void l2p_eval(const cplx* c, int p, long double lambda, Vec2 rel,
              long double alpha_u, double* phi, Vec2* grad) {
  const long double r = std::hypot((long double)rel.x, (long double)rel.y);
  const long double th = std::atan2((long double)rel.y, (long double)rel.x);
  long double itil[special::kMaxOrder + 1];
  special::bessel_i_ratio_seq(r / alpha_u, lambda, p + 1, itil);
  static thread_local std::vector<cplx> ph;
  fill_phases(th, p + 1, ph);
  if (phi) {
    long double acc = c[0].real() * itil[0];
    for (int l = 1; l <= p; ++l)
      acc += 2 * (c[l] * itil[l] * ph[l]).real();
    *phi = (double)acc;
  }
  if (grad) {
    cplx g = 0;
    for (int l = 0; l <= p; ++l) g += c[l] * (itil[l + 1] * lambda) * ph[l + 1];
    for (int l = 1; l <= p; ++l) {
      const long double val = (l == 1 ? itil[0] : itil[l - 1]) / lambda;
      const cplx phase = l == 1 ? cplx(1) : std::conj(ph[l - 1]);
      g += std::conj(c[l]) * val * phase;
    }
    g /= alpha_u;
    *grad = Vec2{(double)g.real(), (double)g.imag()};
  }
}

// Evaluate a multipole block at rel = point - center (outside the cluster).
void m2p_eval(const cplx* c, int p, long double lambda, Vec2 rel,
              long double alpha_u, double* phi, Vec2* grad) {
  const long double r = std::hypot((long double)rel.x, (long double)rel.y);
  const long double th = std::atan2((long double)rel.y, (long double)rel.x);
  long double ktil[special::kMaxOrder + 1];
  special::bessel_k_ratio_seq(r / alpha_u, lambda, p + 1, ktil);
  static thread_local std::vector<cplx> ph;
  fill_phases(th, p + 1, ph);
  if (phi) {
    long double acc = c[0].real() * ktil[0];
    for (int l = 1; l <= p; ++l)
      acc += 2 * (c[l] * ktil[l] * ph[l]).real();
    *phi = (double)acc;
  }
  if (grad) {
    cplx g = 0;
    for (int l = 0; l <= p; ++l) g += c[l] * (ktil[l + 1] / lambda) * ph[l + 1];
    for (int l = 1; l <= p; ++l) {
      const long double val = (l == 1 ? ktil[0] : ktil[l - 1]) * lambda;
      const cplx phase = l == 1 ? cplx(1) : std::conj(ph[l - 1]);
      g += std::conj(c[l]) * val * phase;
    }
    g /= -alpha_u;  // K side lowers with a sign
    *grad = Vec2{(double)g.real(), (double)g.imag()};
  }
}

// ---------------------------------------------------------------------------
// Near-field pair in world coordinates; also the direct-sum kernel.

void p2p_pair(Vec2 x, const Source& s, double alpha, bool want_p, bool want_g,
              double& phi, Vec2& grad) {
  if (s.monopole == 0 && s.dipole == 0) return;
  const Vec2 diff = x - s.position;
  const double r = diff.norm();
  double k0, k1;
  special::bessel_k01(r / alpha, k0, k1);
  if (s.monopole != 0) {
    if (want_p) phi += s.monopole * k0;
    if (want_g) grad += diff * (-s.monopole * k1 / (alpha * r));
  }
  if (s.dipole != 0) {
    const Vec2 d = s.dipole_dir;
    const double ed = diff.dot(d) / r;
    if (want_p) phi += s.dipole * k1 / alpha * ed;
    if (want_g)
      grad += (diff * (ed * (-k0 / (alpha * alpha) - 2 * k1 / (alpha * r)) / r) +
               d * (k1 / (alpha * r))) *
              s.dipole;
  }
}

void validate_system(const ParticleSystem& sys) {
  if (!(sys.alpha > 0)) throw std::invalid_argument("alpha must be > 0");
  for (const Source& s : sys.sources)
    if (!std::isfinite(s.position.x) || !std::isfinite(s.position.y) ||
        !std::isfinite(s.monopole) || !std::isfinite(s.dipole) ||
        !std::isfinite(s.dipole_dir.x) || !std::isfinite(s.dipole_dir.y))
      throw std::invalid_argument("source data must be finite");
  for (const Vec2& t : sys.targets)
    if (!std::isfinite(t.x) || !std::isfinite(t.y))
      throw std::invalid_argument("target positions must be finite");
  if (!sys.target_tags.empty() && sys.target_tags.size() != sys.targets.size())
    throw std::invalid_argument("target_tags length mismatch");
}

}  // namespace

// ---------------------------------------------------------------------------
// Public expansion API (used by the evaluator's tests; the tree pass calls the
// cores directly).

Expansion p2m(const std::vector<Source>& sources, Vec2 center, double alpha,
              int order, double lambda) {
  check_order(order);
  if (!(alpha > 0) || !(lambda > 0))
    throw std::invalid_argument("alpha and lambda must be > 0");
  Expansion e;
  e.kind = Expansion::Kind::Multipole;
  e.center = center;
  e.alpha = alpha;
  e.lambda = lambda;
  e.coeff.assign(order + 1, cplx(0));
  for (const Source& s : sources)
    p2m_add(e.coeff.data(), order, s.position - center, alpha, lambda,
            s.monopole, s.dipole, s.dipole_dir);
  return e;
}

Expansion p2l(const std::vector<Source>& sources, Vec2 center, double alpha,
              int order, double lambda) {
  check_order(order);
  if (!(alpha > 0) || !(lambda > 0))
    throw std::invalid_argument("alpha and lambda must be > 0");
  Expansion e;
  e.kind = Expansion::Kind::Local;
  e.center = center;
  e.alpha = alpha;
  e.lambda = lambda;
  e.coeff.assign(order + 1, cplx(0));
  for (const Source& s : sources)
    p2l_add(e.coeff.data(), order, s.position - center, alpha, lambda,
            s.monopole, s.dipole, s.dipole_dir);
  return e;
}

Expansion m2m(const Expansion& child, Vec2 parent_center, double parent_lambda) {
  if (child.kind != Expansion::Kind::Multipole)
    throw std::invalid_argument("m2m needs a multipole expansion");
  Expansion e;
  e.kind = Expansion::Kind::Multipole;
  e.center = parent_center;
  e.alpha = child.alpha;
  e.lambda = parent_lambda;
  e.coeff.assign(child.coeff.size(), cplx(0));
  m2m_core(child.coeff.data(), child.order(), child.lambda,
           child.center - parent_center, child.alpha, parent_lambda,
           e.coeff.data());
  return e;
}

Expansion m2l(const Expansion& multipole, Vec2 local_center,
              double local_lambda) {
  if (multipole.kind != Expansion::Kind::Multipole)
    throw std::invalid_argument("m2l needs a multipole expansion");
  Expansion e;
  e.kind = Expansion::Kind::Local;
  e.center = local_center;
  e.alpha = multipole.alpha;
  e.lambda = local_lambda;
  e.coeff.assign(multipole.coeff.size(), cplx(0));
  m2l_core(multipole.coeff.data(), multipole.order(), multipole.lambda,
           local_center - multipole.center, multipole.alpha, local_lambda,
           e.coeff.data());
  return e;
}

Expansion l2l(const Expansion& parent, Vec2 child_center, double child_lambda) {
  if (parent.kind != Expansion::Kind::Local)
    throw std::invalid_argument("l2l needs a local expansion");
  Expansion e;
  e.kind = Expansion::Kind::Local;
  e.center = child_center;
  e.alpha = parent.alpha;
  e.lambda = child_lambda;
  e.coeff.assign(parent.coeff.size(), cplx(0));
  l2l_core(parent.coeff.data(), parent.order(), parent.lambda,
           child_center - parent.center, parent.alpha, child_lambda,
           e.coeff.data());
  return e;
}

void l2p(const Expansion& local, Vec2 point, double* potential, Vec2* gradient) {
  if (local.kind != Expansion::Kind::Local)
    throw std::invalid_argument("l2p needs a local expansion");
  l2p_eval(local.coeff.data(), local.order(), local.lambda,
           point - local.center, local.alpha, potential, gradient);
}

void m2p(const Expansion& multipole, Vec2 point, double* potential,
         Vec2* gradient) {
  if (multipole.kind != Expansion::Kind::Multipole)
    throw std::invalid_argument("m2p needs a multipole expansion");
  m2p_eval(multipole.coeff.data(), multipole.order(), multipole.lambda,
           point - multipole.center, multipole.alpha, potential, gradient);
}

// ---------------------------------------------------------------------------
// Tree construction.

int QuadTree::depth() const {
  int d = 0;
  for (const QuadTreeNode& n : nodes) d = std::max(d, n.level);
  return d;
}

namespace {

struct TreeBuilder {
  const std::vector<Vec2>& unit;  // positions mapped into [0,1]^2
  int leaf_size;
  QuadTree& tree;
  bool warned = false;

  int build(std::vector<int>&& idx, int level, int ix, int iy, int parent) {
    const int id = (int)tree.nodes.size();
    tree.nodes.emplace_back();
    {
      QuadTreeNode& n = tree.nodes.back();
      const double w = std::ldexp(1.0, -level);
      n.level = level;
      n.ix = ix;
      n.iy = iy;
      n.parent = parent;
      n.half_width = 0.5 * w * tree.size;
      n.center = tree.origin + Vec2{(ix + 0.5) * w, (iy + 0.5) * w} * tree.size;
    }
    bool split = (int)idx.size() > leaf_size;
    if (split) {
      bool all_same = true;
      for (size_t k = 1; k < idx.size() && all_same; ++k)
        all_same = unit[idx[k]].x == unit[idx[0]].x &&
                   unit[idx[k]].y == unit[idx[0]].y;
      if (all_same || level >= kMaxDepth) {
        split = false;
        if (!warned) {
          tree.warnings.push_back(
              "coincident points force a leaf above the size limit");
          warned = true;
        }
      }
    }
    if (!split) {
      tree.nodes[id].point_indices = std::move(idx);
      return id;
    }
    const double w = std::ldexp(1.0, -level);
    const double cx = (ix + 0.5) * w, cy = (iy + 0.5) * w;
    std::array<std::vector<int>, 4> part;
    for (int i : idx) {
      const int q = (unit[i].x >= cx ? 1 : 0) + (unit[i].y >= cy ? 2 : 0);
      part[q].push_back(i);
    }
    idx.clear();
    for (int q = 0; q < 4; ++q) {
      if (part[q].empty()) continue;
      const int child = build(std::move(part[q]), level + 1, ix * 2 + (q & 1),
                              iy * 2 + (q >> 1), id);
      tree.nodes[id].children[q] = child;
    }
    return id;
  }
};

}  // namespace

QuadTree build_tree(const std::vector<Vec2>& positions, int leaf_size) {
  if (positions.empty()) throw std::invalid_argument("build_tree: no points");
  if (leaf_size < 1) throw std::invalid_argument("build_tree: leaf_size < 1");
  double xmin = positions[0].x, xmax = xmin;
  double ymin = positions[0].y, ymax = ymin;
  for (const Vec2& p : positions) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y))
      throw std::invalid_argument("build_tree: positions must be finite");
    xmin = std::min(xmin, p.x);
    xmax = std::max(xmax, p.x);
    ymin = std::min(ymin, p.y);
    ymax = std::max(ymax, p.y);
  }
  QuadTree tree;
  tree.size = std::max(xmax - xmin, ymax - ymin);
  if (tree.size <= 0) tree.size = 1;
  tree.origin = Vec2{0.5 * (xmin + xmax) - 0.5 * tree.size,
                     0.5 * (ymin + ymax) - 0.5 * tree.size};
  std::vector<Vec2> unit(positions.size());
  for (size_t i = 0; i < positions.size(); ++i) {
    unit[i] = Vec2{(positions[i].x - tree.origin.x) / tree.size,
                   (positions[i].y - tree.origin.y) / tree.size};
    unit[i].x = std::min(unit[i].x, 1.0);  // guard the top edge
    unit[i].y = std::min(unit[i].y, 1.0);
  }
  std::vector<int> all(positions.size());
  for (size_t i = 0; i < all.size(); ++i) all[i] = (int)i;
  TreeBuilder builder{unit, leaf_size, tree};
  builder.build(std::move(all), 0, 0, 0, -1);
  return tree;
}

int trunc_order_for_tolerance(double tolerance) {
  if (!(tolerance >= 1e-14 && tolerance <= 1e-3))
    throw std::invalid_argument("tolerance must lie in [1e-14, 1e-3]");
  int decade = (int)std::ceil(-std::log10(tolerance) - 1e-9);
  decade = std::clamp(decade, 3, 14);
  return kTruncByDecade[decade];
}

// ---------------------------------------------------------------------------
// Evaluator.

namespace {

struct Evaluator {
  const ParticleSystem& sys;
  int p;
  QuadTree tree;
  std::vector<Vec2> unit;              // sources then targets, [0,1]^2
  long double alpha_u = 1;
  double scale = 1;
  std::vector<long double> lam;        // per-level coefficient scaling
  std::vector<int> src_cnt, tgt_cnt;   // subtree totals
  std::vector<std::vector<int>> by_level;
  std::vector<std::unordered_map<uint64_t, int>> grid;
  ParticleOutputs out;

  explicit Evaluator(const ParticleSystem& s, int order, int leaf_size)
      : sys(s), p(order) {
    const size_t ns = sys.sources.size(), nt = sys.targets.size();
    std::vector<Vec2> all;
    all.reserve(ns + nt);
    for (const Source& src : sys.sources) all.push_back(src.position);
    for (const Vec2& t : sys.targets) all.push_back(t);
    tree = build_tree(all, leaf_size);
    scale = tree.size;
    alpha_u = (long double)sys.alpha / scale;
    unit.resize(all.size());
    for (size_t i = 0; i < all.size(); ++i)
      unit[i] = Vec2{std::min((all[i].x - tree.origin.x) / scale, 1.0),
                     std::min((all[i].y - tree.origin.y) / scale, 1.0)};

    const int nn = (int)tree.nodes.size();
    const int depth = tree.depth();
    lam.resize(depth + 1);
    for (int l = 0; l <= depth; ++l)
      lam[l] = std::ldexp(1.0L, -l - 2) / alpha_u;
    by_level.assign(depth + 1, {});
    grid.assign(depth + 1, {});
    src_cnt.assign(nn, 0);
    tgt_cnt.assign(nn, 0);
    for (int i = 0; i < nn; ++i) {
      QuadTreeNode& n = tree.nodes[i];
      by_level[n.level].push_back(i);
      grid[n.level].emplace(key(n.ix, n.iy), i);
      if (n.leaf())
        for (int idx : n.point_indices) {
          if (idx < (int)ns)
            n.source_indices.push_back(idx);
          else
            n.target_indices.push_back(idx - (int)ns);
        }
    }
    for (int l = depth; l >= 0; --l)
      for (int i : by_level[l]) {
        const QuadTreeNode& n = tree.nodes[i];
        if (n.leaf()) {
          src_cnt[i] = (int)n.source_indices.size();
          tgt_cnt[i] = (int)n.target_indices.size();
        } else {
          for (int c : n.children)
            if (c >= 0) {
              src_cnt[i] += src_cnt[c];
              tgt_cnt[i] += tgt_cnt[c];
            }
        }
      }
  }

  static uint64_t key(int ix, int iy) {
    return ((uint64_t)(uint32_t)ix << 32) | (uint32_t)iy;
  }

  Vec2 unit_center(int i) const {
    const QuadTreeNode& n = tree.nodes[i];
    const double w = std::ldexp(1.0, -n.level);
    return Vec2{(n.ix + 0.5) * w, (n.iy + 0.5) * w};
  }

  // closed boxes touch or overlap (levels may differ)
  bool adjacent(int a, int b) const {
    const QuadTreeNode &na = tree.nodes[a], &nb = tree.nodes[b];
    const int la = na.level, lb = nb.level;
    int64_t ax0 = na.ix, ay0 = na.iy, bx0 = nb.ix, by0 = nb.iy;
    int64_t ax1 = ax0 + 1, ay1 = ay0 + 1, bx1 = bx0 + 1, by1 = by0 + 1;
    if (la < lb) {
      const int s = lb - la;
      ax0 <<= s;
      ay0 <<= s;
      ax1 <<= s;
      ay1 <<= s;
    } else if (lb < la) {
      const int s = la - lb;
      bx0 <<= s;
      by0 <<= s;
      bx1 <<= s;
      by1 <<= s;
    }
    return ax0 <= bx1 && bx0 <= ax1 && ay0 <= by1 && by0 <= ay1;
  }

  // same-level adjacent boxes, self excluded, in fixed scan order
  void colleagues(int i, std::vector<int>& out_ids) const {
    out_ids.clear();
    const QuadTreeNode& n = tree.nodes[i];
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        if (dx == 0 && dy == 0) continue;
        const int jx = n.ix + dx, jy = n.iy + dy;
        if (jx < 0 || jy < 0 || jx >= (1 << n.level) || jy >= (1 << n.level))
          continue;
        auto it = grid[n.level].find(key(jx, jy));
        if (it != grid[n.level].end()) out_ids.push_back(it->second);
      }
  }

  void build_lists() {
    std::vector<int> cols;
    for (auto& level : by_level)
      for (int i : level) {
        QuadTreeNode& n = tree.nodes[i];
        if (n.leaf()) {
          n.u_list.push_back(i);  // self
          colleagues(i, cols);
          for (int g : cols) {
            if (tree.nodes[g].leaf())
              n.u_list.push_back(g);
            else
              descend(i, g);
          }
        }
        if (n.parent >= 0) {
          colleagues(n.parent, cols);
          cols.push_back(n.parent);
          for (int g : cols)
            for (int d : tree.nodes[g].children)
              if (d >= 0 && d != i && !adjacent(d, i)) n.v_list.push_back(d);
        }
      }
  }

  // walk a colleague's subtree for leaf b: adjacent leaves feed the direct
  // list (both directions; the deeper leaf never looks back up), and the
  // first non-adjacent box on each path splits into the two one-sided lists
  void descend(int b, int g) {
    for (int d : tree.nodes[g].children) {
      if (d < 0) continue;
      if (adjacent(d, b)) {
        if (tree.nodes[d].leaf()) {
          tree.nodes[b].u_list.push_back(d);
          tree.nodes[d].u_list.push_back(b);
        } else {
          descend(b, d);
        }
      } else {
        tree.nodes[b].w_list.push_back(d);
        tree.nodes[d].x_list.push_back(b);
      }
    }
  }

  void upward() {
    for (int l = (int)by_level.size() - 1; l >= 0; --l)
      for (int i : by_level[l]) {
        if (src_cnt[i] == 0) continue;
        QuadTreeNode& n = tree.nodes[i];
        n.multipole.assign(p + 1, cplx(0));
        if (n.leaf()) {
          const Vec2 c = unit_center(i);
          for (int s : n.source_indices) {
            const Source& src = sys.sources[s];
            p2m_add(n.multipole.data(), p, unit[s] - c, alpha_u, lam[l],
                    src.monopole, src.dipole / scale, src.dipole_dir);
          }
        } else {
          for (int ch : n.children)
            if (ch >= 0 && src_cnt[ch] > 0)
              m2m_core(tree.nodes[ch].multipole.data(), p, lam[l + 1],
                       unit_center(ch) - unit_center(i), alpha_u, lam[l],
                       n.multipole.data());
        }
      }
  }

  void downward() {
    const bool want_p = sys.want_potential, want_g = sys.want_gradient;
    if (want_p) out.potential.assign(sys.targets.size(), 0.0);
    if (want_g) out.gradient.assign(sys.targets.size(), Vec2{});
    for (auto& level : by_level)
      for (int i : level) {
        if (tgt_cnt[i] == 0) continue;
        QuadTreeNode& n = tree.nodes[i];
        n.local.assign(p + 1, cplx(0));
        const Vec2 c = unit_center(i);
        if (n.parent >= 0 && !tree.nodes[n.parent].local.empty())
          l2l_core(tree.nodes[n.parent].local.data(), p, lam[n.level - 1],
                   c - unit_center(n.parent), alpha_u, lam[n.level],
                   n.local.data());
        for (int d : n.v_list)
          if (src_cnt[d] > 0)
            m2l_core(tree.nodes[d].multipole.data(), p, lam[n.level],
                     c - unit_center(d), alpha_u, lam[n.level], n.local.data());
        for (int b : n.x_list)
          for (int s : tree.nodes[b].source_indices) {
            const Source& src = sys.sources[s];
            p2l_add(n.local.data(), p, unit[s] - c, alpha_u, lam[n.level],
                    src.monopole, src.dipole / scale, src.dipole_dir);
          }
        if (!n.leaf()) continue;
        for (int t : n.target_indices) {
          double phi = 0;
          Vec2 grad{};
          double lphi;
          Vec2 lgrad;
          l2p_eval(n.local.data(), p, lam[n.level], unit[(int)sys.sources.size() + t] - c,
                   alpha_u, want_p ? &lphi : nullptr, want_g ? &lgrad : nullptr);
          if (want_p) phi += lphi;
          if (want_g) grad += lgrad;
          for (int d : n.w_list) {
            if (src_cnt[d] == 0) continue;
            m2p_eval(tree.nodes[d].multipole.data(), p, lam[tree.nodes[d].level],
                     unit[(int)sys.sources.size() + t] - unit_center(d), alpha_u,
                     want_p ? &lphi : nullptr, want_g ? &lgrad : nullptr);
            if (want_p) phi += lphi;
            if (want_g) grad += lgrad;
          }
          if (want_g) grad = grad / scale;  // unit-coordinate chain rule
          const int tag =
              sys.target_tags.empty() ? -1 : sys.target_tags[t];
          const Vec2 x = sys.targets[t];
          for (int u : n.u_list)
            for (int s : tree.nodes[u].source_indices) {
              const Source& src = sys.sources[s];
              if (src.tag >= 0 && src.tag == tag) continue;
              p2p_pair(x, src, sys.alpha, want_p, want_g, phi, grad);
            }
          if (want_p) out.potential[t] = phi;
          if (want_g) out.gradient[t] = grad;
        }
      }
  }
};

}  // namespace

ParticleOutputs evaluate(const ParticleSystem& system, double tolerance,
                         int leaf_size) {
  const int p = trunc_order_for_tolerance(tolerance);
  validate_system(system);
  if (leaf_size < 1) throw std::invalid_argument("leaf_size must be >= 1");
  ParticleOutputs out;
  if (system.targets.empty()) return out;
  if (system.sources.empty()) {
    if (system.want_potential) out.potential.assign(system.targets.size(), 0.0);
    if (system.want_gradient) out.gradient.assign(system.targets.size(), Vec2{});
    return out;
  }
  Evaluator ev(system, p, leaf_size);
  ev.build_lists();
  ev.upward();
  ev.downward();
  return ev.out;
}

ParticleOutputs direct_evaluate(const ParticleSystem& system) {
  validate_system(system);
  ParticleOutputs out;
  if (system.want_potential) out.potential.assign(system.targets.size(), 0.0);
  if (system.want_gradient) out.gradient.assign(system.targets.size(), Vec2{});
  for (size_t t = 0; t < system.targets.size(); ++t) {
    const int tag = system.target_tags.empty() ? -1 : system.target_tags[t];
    double phi = 0;
    Vec2 grad{};
    for (const Source& s : system.sources) {
      if (s.tag >= 0 && s.tag == tag) continue;
      p2p_pair(system.targets[t], s, system.alpha, system.want_potential,
               system.want_gradient, phi, grad);
    }
    if (system.want_potential) out.potential[t] = phi;
    if (system.want_gradient) out.gradient[t] = grad;
  }
  return out;
}

}  // namespace yukawa
