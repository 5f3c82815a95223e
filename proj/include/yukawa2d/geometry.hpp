#pragma once

#include <complex>
#include <string>
#include <vector>

#include "yukawa2d/point.hpp"

namespace yukawa {

// Closed contour sampled at N equispaced parameter values on [0, 2pi).
// Stored counterclockwise. The raw normal points away from the enclosed
// region; Domain flips it (and the curvature sign) on curves where "out of
// the solution domain" means into the enclosed region.
struct Curve {
  int N = 0;
  double h = 0.0;                 // 2pi / N
  std::vector<Vec2> y;            // samples
  std::vector<Vec2> w;            // dy/dparam, spectral
  std::vector<Vec2> w2;           // d2y/dparam2, spectral
  std::vector<double> speed;      // |w|
  std::vector<Vec2> normal;       // unit
  std::vector<double> kappa;      // signed, consistent with normal
  bool flipped = false;
};

Curve ellipse(Vec2 center, double a, double b, double rotation, int N);

// Trigonometric curve z(t) = sum_{k=-K}^{K} c_k e^{ikt}; coefficients given
// centered, index 0 holds c_{-K}. Rejects self-intersecting curves; a
// clockwise parametrization is reversed to the stored orientation.
Curve curve_from_fourier(const std::vector<std::complex<double>>& coeffs, int N);

struct Domain {
  std::vector<Curve> curves;      // index 0 = outer boundary when bounded
  bool bounded = true;
  std::vector<std::string> warnings;

  Domain() = default;
  Domain(std::vector<Curve> cs, bool is_bounded);

  int holes() const { return bounded ? (int)curves.size() - 1 : (int)curves.size(); }
  int total_nodes() const;
  bool contains(Vec2 p) const;
  // distance from p to the nearest sample, and the local node spacing there
  void nearest_sample(Vec2 p, double* dist, double* local_h) const;
};

int winding_number(const Curve& c, Vec2 p);

// Derivative of the trigonometric interpolant at the nodes. N even.
std::vector<double> spectral_derivative(const std::vector<double>& values);
std::vector<double> spectral_second_derivative(const std::vector<double>& values);

// Trigonometric interpolant of nodal values evaluated at arbitrary
// parameters (direct kernel sum, O(N) per point).
std::vector<double> fourier_interpolate(const std::vector<double>& values,
                                        const std::vector<double>& at_params);

// Maps nodal values to interpolant values on the uniformly shifted grid
// param_j + delta for all j at once. The same operator both ways: apply()
// runs the transform pipeline, weights() exposes the equivalent circulant
// kernel so dense assembly can fold it into matrix columns.
class ShiftedGridInterp {
 public:
  ShiftedGridInterp(int N, double delta);
  void apply(const double* in, double* out) const;
  // out[j] = sum_r kernel[r] * in[(j + r) mod N]
  const std::vector<double>& weights() const { return kernel_; }
  double delta() const { return delta_; }

 private:
  int N_;
  double delta_;
  std::vector<double> kernel_;
  std::vector<std::complex<double>> phase_;  // e^{ik delta}, k = 0..N/2
};

}  // namespace yukawa
