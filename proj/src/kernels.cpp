#include "yukawa2d/kernels.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

#include "yukawa2d/fmm.hpp"
#include "yukawa2d/special.hpp"

namespace yukawa {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

// Shared by kernel_eval and the assembly loops, which have already
// validated their inputs and hoisted the normal choice.
inline double kernel_core(Vec2 d, Vec2 n, double alpha) {
  const double r = d.norm();
  return special::bessel_k1(r / alpha) * d.dot(n) / (r * alpha);
}

}  // namespace

double kernel_eval(KernelKind kind, Vec2 y, Vec2 x, Vec2 n_y, Vec2 n_x,
                   double alpha) {
  if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be positive");
  const Vec2 d = y - x;
  if (d.x == 0.0 && d.y == 0.0)
    throw std::domain_error(
        "kernel_eval at coincident points; use kernel_diagonal");
  return kernel_core(d, kind == KernelKind::Dirichlet ? n_y : n_x, alpha);
}

double kernel_diagonal(double kappa, KernelKind kind) {
  return kind == KernelKind::Dirichlet ? 0.5 * kappa : -0.5 * kappa;
}

DiscreteOperator::DiscreteOperator(Domain domain, KernelKind kind,
                                   double alpha, int order, Backend backend,
                                   double fmm_tol)
    : domain_(std::move(domain)),
      kind_(kind),
      alpha_(alpha),
      rule_(alpert_rule(order)),
      backend_(backend),
      fmm_tol_(fmm_tol) {
  if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be positive");
  offsets_.reserve(domain_.curves.size() + 1);
  for (const Curve& c : domain_.curves) {
    offsets_.push_back(total_);
    if (c.N < 4 * rule_.a + 2 * rule_.nodes)
      throw std::invalid_argument("curve too coarse for the quadrature band");
    total_ += c.N;
  }
  offsets_.push_back(total_);

  off_.reserve(domain_.curves.size() * rule_.nodes * 2);
  for (const Curve& c : domain_.curves) {
    const double sgn = c.flipped ? -1.0 : 1.0;
    std::vector<double> buf(c.N), yx(c.N), yy(c.N), wx(c.N), wy(c.N);
    for (int m = 0; m < rule_.nodes; ++m) {
      for (int s = 0; s < 2; ++s) {
        const double delta = (s == 0 ? 1.0 : -1.0) * (double)rule_.v[m] * c.h;
        OffGrid og{ShiftedGridInterp(c.N, delta), {}, {}, {}, {}};
        auto shift = [&](auto field, std::vector<double>& out) {
          for (int j = 0; j < c.N; ++j) buf[j] = field(j);
          og.interp.apply(buf.data(), out.data());
        };
        shift([&](int j) { return c.y[j].x; }, yx);
        shift([&](int j) { return c.y[j].y; }, yy);
        shift([&](int j) { return c.w[j].x; }, wx);
        shift([&](int j) { return c.w[j].y; }, wy);
        og.y.resize(c.N);
        og.w.resize(c.N);
        og.speed.resize(c.N);
        og.normal.resize(c.N);
        for (int j = 0; j < c.N; ++j) {
          og.y[j] = {yx[j], yy[j]};
          og.w[j] = {wx[j], wy[j]};
          og.speed[j] = og.w[j].norm();
          og.normal[j] = Vec2{wy[j], -wx[j]} * (sgn / og.speed[j]);
        }
        off_.push_back(std::move(og));
      }
    }
  }

  if (backend_ == Backend::Dense)
    dense_ = std::make_shared<const Eigen::MatrixXd>(assemble_dense(*this));
}

Eigen::MatrixXd assemble_dense(const DiscreteOperator& op, int cap) {
  const Domain& dom = op.domain();
  const int total = op.size();
  if (total > cap)
    throw std::invalid_argument("dense assembly exceeds the node cap");
  const KernelKind kind = op.kind();
  const double alpha = op.alpha();
  const AlpertRule& rule = op.rule();

  Eigen::MatrixXd A = Eigen::MatrixXd::Identity(total, total);
  for (int kt = 0; kt < (int)dom.curves.size(); ++kt) {
    const Curve& ct = dom.curves[kt];
    const int row0 = op.curve_offset(kt);
    for (int j = 0; j < ct.N; ++j) {
      const int row = row0 + j;
      const Vec2 x = ct.y[j];
      const Vec2 nx = ct.normal[j];

      for (int ks = 0; ks < (int)dom.curves.size(); ++ks) {
        const Curve& cs = dom.curves[ks];
        const int col0 = op.curve_offset(ks);
        const double hpi = cs.h / kPi;
        if (ks != kt) {
          // disjoint curves: the kernel is smooth, plain trapezoid
          for (int n = 0; n < cs.N; ++n) {
            const Vec2 d = cs.y[n] - x;
            const Vec2& nrm = kind == KernelKind::Dirichlet ? cs.normal[n] : nx;
            A(row, col0 + n) += hpi * cs.speed[n] * kernel_core(d, nrm, alpha);
          }
          continue;
        }
        // self curve: trapezoid outside the band around the target node
        for (int n = j + rule.a; n <= cs.N + j - rule.a; ++n) {
          const int c = ((n % cs.N) + cs.N) % cs.N;
          const Vec2 d = cs.y[c] - x;
          const Vec2& nrm = kind == KernelKind::Dirichlet ? cs.normal[c] : nx;
          A(row, col0 + c) += hpi * cs.speed[c] * kernel_core(d, nrm, alpha);
        }
        // band replaced by the rule's off-grid nodes; density values come
        // from the interpolation operator, folded here into the columns
        for (int m = 0; m < rule.nodes; ++m) {
          for (int s = 0; s < 2; ++s) {
            const auto& og = op.off_grid(kt, m, s);
            const Vec2 d = og.y[j] - x;
            const Vec2& nrm = kind == KernelKind::Dirichlet ? og.normal[j] : nx;
            const double coef = hpi * (double)rule.u[m] * og.speed[j] *
                                kernel_core(d, nrm, alpha);
            const std::vector<double>& ker = og.interp.weights();
            for (int r = 0; r < cs.N; ++r)
              A(row, col0 + (j + r) % cs.N) += coef * ker[r];
          }
        }
        if (rule.order == 0)
          A(row, row) +=
              hpi * cs.speed[j] * kernel_diagonal(ct.kappa[j], kind);
      }
    }
  }
  return A;
}

std::vector<double> DiscreteOperator::apply(
    const std::vector<double>& sigma) const {
  if ((int)sigma.size() != total_)
    throw std::invalid_argument("density length does not match discretization");
  std::vector<double> out(sigma.size());

  if (backend_ == Backend::Dense) {
    Eigen::Map<const Eigen::VectorXd> s(sigma.data(), total_);
    Eigen::Map<Eigen::VectorXd> o(out.data(), total_);
    o = (*dense_) * s;
    return out;
  }

  // Matrix-free path: a global all-pairs trapezoid sum (i) done by the tree
  // code, minus the self-curve band it wrongly includes (ii), plus the rule
  // corrections and diagonal (iii). Steps (ii)-(iii) only touch a band of
  // nodes around each target.
  const int K = (int)domain_.curves.size();

  // (i) every node both radiates and receives; the identity tags drop the
  // n = j pair. Dirichlet radiates dipoles along the source normals (the
  // kernel is the negated normal derivative of K0); Neumann radiates
  // monopoles and reads the target-normal component of the gradient.
  std::vector<double> global(sigma.size());
  {
    ParticleSystem ps;
    ps.alpha = alpha_;
    ps.want_potential = kind_ == KernelKind::Dirichlet;
    ps.want_gradient = kind_ == KernelKind::Neumann;
    ps.sources.resize(sigma.size());
    ps.targets.resize(sigma.size());
    ps.target_tags.resize(sigma.size());
    for (int ks = 0; ks < K; ++ks) {
      const Curve& cs = domain_.curves[ks];
      const double hpi = cs.h / kPi;
      for (int n = 0; n < cs.N; ++n) {
        const int idx = offsets_[ks] + n;
        Source& src = ps.sources[idx];
        src.position = cs.y[n];
        src.tag = idx;
        const double w = hpi * cs.speed[n] * sigma[idx];
        if (kind_ == KernelKind::Dirichlet) {
          src.dipole = w;
          src.dipole_dir = cs.normal[n];
        } else {
          src.monopole = w;
        }
        ps.targets[idx] = cs.y[n];
        ps.target_tags[idx] = idx;
      }
    }
    ParticleOutputs po = evaluate(ps, fmm_tol_);
    for (int kt = 0; kt < K; ++kt) {
      const Curve& ct = domain_.curves[kt];
      for (int j = 0; j < ct.N; ++j) {
        const int row = offsets_[kt] + j;
        global[row] = kind_ == KernelKind::Dirichlet
                          ? -po.potential[row]
                          : po.gradient[row].x * ct.normal[j].x +
                                po.gradient[row].y * ct.normal[j].y;
      }
    }
  }
  for (int kt = 0; kt < K; ++kt) {
    const Curve& ct = domain_.curves[kt];
    const int row0 = offsets_[kt];

    // density at the correction nodes, whole shifted grids at once
    std::vector<std::vector<double>> soff((size_t)rule_.nodes * 2);
    for (int m = 0; m < rule_.nodes; ++m)
      for (int s = 0; s < 2; ++s) {
        auto& dst = soff[(size_t)m * 2 + s];
        dst.resize(ct.N);
        off_grid(kt, m, s).interp.apply(sigma.data() + row0, dst.data());
      }

    for (int j = 0; j < ct.N; ++j) {
      const int row = row0 + j;
      const Vec2 x = ct.y[j];
      const Vec2 nx = ct.normal[j];
      double acc = global[row];

      const double hpi = ct.h / kPi;
      for (int n = j - rule_.a + 1; n <= j + rule_.a - 1; ++n) {
        if (n == j) continue;
        const int c = ((n % ct.N) + ct.N) % ct.N;
        const Vec2 d = ct.y[c] - x;
        const Vec2& nrm = kind_ == KernelKind::Dirichlet ? ct.normal[c] : nx;
        acc -= hpi * ct.speed[c] * kernel_core(d, nrm, alpha_) *
               sigma[row0 + c];
      }

      for (int m = 0; m < rule_.nodes; ++m)
        for (int s = 0; s < 2; ++s) {
          const auto& og = off_grid(kt, m, s);
          const Vec2 d = og.y[j] - x;
          const Vec2& nrm = kind_ == KernelKind::Dirichlet ? og.normal[j] : nx;
          acc += hpi * (double)rule_.u[m] * og.speed[j] *
                 kernel_core(d, nrm, alpha_) * soff[(size_t)m * 2 + s][j];
        }
      if (rule_.order == 0)
        acc += hpi * ct.speed[j] * kernel_diagonal(ct.kappa[j], kind_) *
               sigma[row];

      out[row] = sigma[row] + acc;
    }
  }
  return out;
}

std::vector<double> apply_operator(const DiscreteOperator& op,
                                   const std::vector<double>& sigma) {
  return op.apply(sigma);
}

}  // namespace yukawa
