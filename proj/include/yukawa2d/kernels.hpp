#pragma once

#include <Eigen/Core>
#include <memory>
#include <vector>

#include "yukawa2d/geometry.hpp"
#include "yukawa2d/point.hpp"
#include "yukawa2d/quadrature.hpp"

namespace yukawa {

// Dirichlet uses the source normal, Neumann the target normal; the two are
// adjoint: K_N(y, x, ny, nx) = -K_D(x, y, nx, ny).
enum class KernelKind { Dirichlet, Neumann };

// (1/alpha) K1(|y-x|/alpha) ((y-x).n)/|y-x| with n picked by kind.
// Coincident points are a domain error; use kernel_diagonal instead.
double kernel_eval(KernelKind kind, Vec2 y, Vec2 x, Vec2 n_y, Vec2 n_x,
                   double alpha);

// Limiting value of the kernel as y -> x along a curve of signed curvature
// kappa: +kappa/2 for Dirichlet, -kappa/2 for Neumann (the limit flips sign
// with the normal's role).
double kernel_diagonal(double kappa, KernelKind kind);

enum class Backend { Dense, Fmm };

// Discretization of I + (1/pi) * integral operator on a Domain: plain
// trapezoid between distinct curves, trapezoid minus a band plus off-grid
// corrections on the self-curve blocks. Immutable once built; apply() is
// safe to call concurrently.
class DiscreteOperator {
 public:
  // fmm_tol is the summation tolerance of the tree backend; the dense
  // backend ignores it.
  DiscreteOperator(Domain domain, KernelKind kind, double alpha, int order,
                   Backend backend = Backend::Dense, double fmm_tol = 1e-11);

  const Domain& domain() const { return domain_; }
  KernelKind kind() const { return kind_; }
  double alpha() const { return alpha_; }
  const AlpertRule& rule() const { return rule_; }
  Backend backend() const { return backend_; }
  int size() const { return total_; }

  // y = sigma + (1/pi) * quadrature sums; sigma is the concatenation of the
  // per-curve densities in domain order.
  std::vector<double> apply(const std::vector<double>& sigma) const;

  // Correction-node geometry for one side of a curve's band, sampled on the
  // whole shifted grid param_j + delta.
  struct OffGrid {
    ShiftedGridInterp interp;   // density interpolation, weights() foldable
    std::vector<Vec2> y;
    std::vector<Vec2> w;
    std::vector<double> speed;
    std::vector<Vec2> normal;
  };

  // off_grid(k, m, s): curve k, rule node m, side s (0: +v_m, 1: -v_m)
  const OffGrid& off_grid(int k, int m, int s) const {
    return off_[(size_t)(k * rule_.nodes + m) * 2 + s];
  }
  int curve_offset(int k) const { return offsets_[k]; }

 private:
  Domain domain_;
  KernelKind kind_;
  double alpha_;
  AlpertRule rule_;
  Backend backend_;
  double fmm_tol_;
  int total_ = 0;
  std::vector<int> offsets_;
  std::vector<OffGrid> off_;
  std::shared_ptr<const Eigen::MatrixXd> dense_;  // Dense backend only
};

// Full matrix of the same map, correction interpolation folded into the
// columns. Oracle for the matrix-free path and feedstock for small direct
// solves. Throws when the node total exceeds the cap.
Eigen::MatrixXd assemble_dense(const DiscreteOperator& op, int cap = 8192);

std::vector<double> apply_operator(const DiscreteOperator& op,
                                   const std::vector<double>& sigma);

}  // namespace yukawa
