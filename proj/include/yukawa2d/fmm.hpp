#pragma once

// Fast summation of screened-Coulomb potentials
//
//   Phi(x) = sum_i q_i K0(|x - y_i|/alpha) + mu_i (d_i . grad_y) K0(|x - y_i|/alpha)
//
// and their target gradients, on an adaptive quad-tree. Far fields travel as
// truncated Bessel expansions (multipole I_l/K_l pairs); near fields are summed
// directly. Coefficients are stored with a per-level radial scaling so the
// machinery survives any box-size-to-alpha ratio.

#include <array>
#include <complex>
#include <string>
#include <vector>

#include "yukawa2d/point.hpp"

namespace yukawa {

// Expansions refuse orders beyond this; the tolerance table never asks for
// more at the supported tolerances.
inline constexpr int kExpansionOrderCap = 60;

struct Source {
  Vec2 position;
  double monopole = 0.0;
  double dipole = 0.0;
  Vec2 dipole_dir{1.0, 0.0};  // unit length when dipole != 0
  int tag = -1;               // identity label; matching target tags skip the pair
};

struct ParticleSystem {
  std::vector<Source> sources;
  std::vector<Vec2> targets;
  std::vector<int> target_tags;  // empty, or one label per target
  double alpha = 1.0;
  bool want_potential = true;
  bool want_gradient = false;
};

struct ParticleOutputs {
  std::vector<double> potential;  // sized per request, else empty
  std::vector<Vec2> gradient;
};

// Truncated expansion about a center. Stored coefficients cover l = 0..order;
// negative orders follow from conjugate symmetry (all source data is real).
// The radial factors are kept as I_l(r/alpha)/lambda^l resp. K_l(r/alpha)*lambda^l,
// so lambda ~ (box size)/(2 alpha) keeps entries near unit scale.
struct Expansion {
  enum class Kind { Multipole, Local };
  Kind kind = Kind::Multipole;
  Vec2 center;
  double alpha = 1.0;
  double lambda = 1.0;
  std::vector<std::complex<long double>> coeff;
  int order() const { return static_cast<int>(coeff.size()) - 1; }
};

// Outer expansion of a source cluster; valid outside the cluster radius.
Expansion p2m(const std::vector<Source>& sources, Vec2 center, double alpha,
              int order, double lambda = 1.0);

// Inner expansion of a distant cluster's field; valid near the center.
Expansion p2l(const std::vector<Source>& sources, Vec2 center, double alpha,
              int order, double lambda = 1.0);

// Re-center an outer expansion (child box to parent box).
Expansion m2m(const Expansion& child, Vec2 parent_center,
              double parent_lambda = 1.0);

// Convert the outer expansion of a well-separated box into an inner one.
Expansion m2l(const Expansion& multipole, Vec2 local_center,
              double local_lambda = 1.0);

// Re-center an inner expansion (parent box to child box).
Expansion l2l(const Expansion& parent, Vec2 child_center,
              double child_lambda = 1.0);

// Evaluate expansions at a point. Null output pointers skip that output.
void l2p(const Expansion& local, Vec2 point, double* potential, Vec2* gradient);
void m2p(const Expansion& multipole, Vec2 point, double* potential,
         Vec2* gradient);

struct QuadTreeNode {
  Vec2 center;
  double half_width = 0.0;
  int level = 0;
  int ix = 0, iy = 0;  // grid coordinates at this level
  int parent = -1;
  std::array<int, 4> children{-1, -1, -1, -1};  // all -1 iff leaf
  std::vector<int> point_indices;               // leaves: indices into build input

  // filled by the evaluator on its internal tree
  std::vector<int> source_indices, target_indices;
  std::vector<std::complex<long double>> multipole, local;
  std::vector<int> u_list, v_list, w_list, x_list;

  bool leaf() const {
    return children[0] < 0 && children[1] < 0 && children[2] < 0 &&
           children[3] < 0;
  }
};

struct QuadTree {
  std::vector<QuadTreeNode> nodes;  // nodes[0] is the root
  Vec2 origin;                      // world corner of the root square
  double size = 1.0;                // world edge length of the root square
  std::vector<std::string> warnings;

  int depth() const;
};

// Adaptive tree over the bounding square: boxes split while they hold more
// than leaf_size points, stopping (with a warning) at the depth where
// coordinates degenerate. Deterministic for a fixed input order.
QuadTree build_tree(const std::vector<Vec2>& positions, int leaf_size);

// Truncation order that meets `tolerance` on the worst-case separated-box
// benchmark (table calibrated against direct summation).
int trunc_order_for_tolerance(double tolerance);

// Potential/gradient sums for all targets; relative error vs direct_evaluate
// bounded by ~10x tolerance. tolerance in [1e-14, 1e-3].
ParticleOutputs evaluate(const ParticleSystem& system, double tolerance,
                         int leaf_size = 40);

// Reference quadratic-cost sum; the oracle for every fast-path test.
ParticleOutputs direct_evaluate(const ParticleSystem& system);

}  // namespace yukawa
