#pragma once

// Modified Bessel functions I_l, K_l for real x > 0 and integer order.
//
// The screened-potential kernels only ever need orders 0 and 1; the
// multipole machinery needs sequences of orders up to ~2x the expansion
// order, with per-order power rescaling so the entries stay representable
// for any box-size-to-screening-length ratio. Everything here is
// self-contained: small-argument series, Chebyshev fits of exp(x) K(x)
// sqrt(x) (tables generated by tools/gen_special_tables.py), and
// large-argument asymptotic series.

#include <stdexcept>

namespace yukawa::special {

inline constexpr int kMaxOrder = 130;

// Unscaled values. x must be > 0 (K) or >= 0 (I); K throws
// std::overflow_error where the true value exceeds the double range.
double bessel_i0(double x);
double bessel_i1(double x);
double bessel_k0(double x);
double bessel_k1(double x);
double bessel_i(int l, double x);
double bessel_k(int l, double x);

// Both K0 and K1 in one call; the boundary kernels evaluate them together.
void bessel_k01(double x, double& k0, double& k1);

// Scaled variants: exp(-x) I_l(x) and exp(x) K_l(x). Finite for the whole
// supported range (long double carries the extreme small-x, high-l corner).
double bessel_i_scaled(int l, double x);
double bessel_k_scaled(int l, double x);
long double bessel_i_scaled_ld(int l, long double x);
long double bessel_k_scaled_ld(int l, long double x);

// Sequences for expansion machinery, orders 0..lmax into out[0..lmax].
// The ratio forms fold in a per-order power of lambda chosen by the caller
// so that products I_l(x)/lambda^l * K_l(y)*lambda^l stay in range:
//   i: out[l] = I_l(x) / lambda^l
//   k: out[l] = K_l(x) * lambda^l
void bessel_i_ratio_seq(long double x, long double lambda, int lmax,
                        long double* out);
void bessel_k_ratio_seq(long double x, long double lambda, int lmax,
                        long double* out);

}  // namespace yukawa::special
