#include "yukawa2d/special.hpp"

#include <cmath>
#include <limits>

#include "special_tables.inc"

namespace yukawa::special {
namespace {

// Series, Chebyshev and asymptotic regions for K; series/asymptotic for I.
constexpr double kKSeriesEnd = 2.0;    // K: ascending series below
constexpr double kKChebSplit = 8.0;    // K: table A below, table B above
constexpr double kISeriesEnd = 19.0;   // I: ascending series below

template <class Real>
void check_domain(Real x, bool need_positive) {
    if (std::isnan(static_cast<double>(x)) || x < Real(0) ||
        (need_positive && x == Real(0)))
        throw std::domain_error("bessel: argument must be positive");
}

void check_order(int l) {
    if (l < 0 || l > kMaxOrder)
        throw std::invalid_argument("bessel: order out of range");
}

// sum_m (x^2/4)^m / (m!)^2
template <class Real>
Real i0_series(Real x) {
    const Real q = x * x / 4;
    Real term = 1, sum = 1;
    for (int m = 1; m < 200; ++m) {
        term *= q / (Real(m) * Real(m));
        sum += term;
        if (term < sum * std::numeric_limits<Real>::epsilon()) break;
    }
    return sum;
}

// (x/2) sum_m (x^2/4)^m / (m! (m+1)!)
template <class Real>
Real i1_series(Real x) {
    const Real q = x * x / 4;
    Real term = 1, sum = 1;
    for (int m = 1; m < 200; ++m) {
        term *= q / (Real(m) * Real(m + 1));
        sum += term;
        if (term < sum * std::numeric_limits<Real>::epsilon()) break;
    }
    return x / 2 * sum;
}

// K0 = -(log(x/2) + g) I0 + sum_{m>=1} H_m (x^2/4)^m / (m!)^2
template <class Real>
Real k0_series(Real x) {
    const Real q = x * x / 4;
    Real term = 1, sum = 0, harmonic = 0;
    for (int m = 1; m < 200; ++m) {
        term *= q / (Real(m) * Real(m));
        harmonic += Real(1) / Real(m);
        sum += term * harmonic;
        if (term * harmonic < sum * std::numeric_limits<Real>::epsilon()) break;
    }
    const Real lg = std::log(x / 2) + Real(kEulerGamma);
    return -lg * i0_series(x) + sum;
}

// K1 = 1/x + (log(x/2) + g) I1 - (x/4) sum_m (H_m + H_{m+1}) (x^2/4)^m / (m!(m+1)!)
template <class Real>
Real k1_series(Real x) {
    const Real q = x * x / 4;
    Real term = 1, harmonic = 0, sum = 1;   // m = 0: H_0 + H_1 = 1
    for (int m = 1; m < 200; ++m) {
        term *= q / (Real(m) * Real(m + 1));
        harmonic += Real(1) / Real(m);
        const Real contrib = term * (2 * harmonic + Real(1) / Real(m + 1));
        sum += contrib;
        if (contrib < sum * std::numeric_limits<Real>::epsilon()) break;
    }
    const Real lg = std::log(x / 2) + Real(kEulerGamma);
    return 1 / x + lg * i1_series(x) - x / 4 * sum;
}

template <class Real>
Real clenshaw(const long double* c, int n, Real t) {
    Real b1 = 0, b2 = 0;
    for (int k = n - 1; k >= 1; --k) {
        const Real b0 = 2 * t * b1 - b2 + Real(c[k]);
        b2 = b1;
        b1 = b0;
    }
    return t * b1 - b2 + Real(c[0]);
}

template <int N, class T>
constexpr int array_len(const T (&)[N]) { return N; }

// exp(x) K_nu(x) sqrt(x) via the generated Chebyshev tables, x >= 2.
template <class Real>
Real k_cheb_scaled(int nu, Real x) {
    if (x <= Real(kKChebSplit)) {
        const Real t = (16 / x - 5) / 3;
        return nu == 0 ? clenshaw(kChebK0A, array_len(kChebK0A), t)
                       : clenshaw(kChebK1A, array_len(kChebK1A), t);
    }
    const Real t = 16 / x - 1;
    return nu == 0 ? clenshaw(kChebK0B, array_len(kChebK0B), t)
                   : clenshaw(kChebK1B, array_len(kChebK1B), t);
}

// exp(-x) I_l(x) sqrt(2 pi x) = sum_k (-1)^k a_k(l) / (8x)^k, x >= kISeriesEnd.
template <class Real>
Real i_asymptotic_scaled(int l, Real x) {
    const Real mu = Real(4) * l * l;
    Real term = 1, sum = 1, prev = std::numeric_limits<Real>::max();
    for (int k = 0; k < 80; ++k) {
        const Real f = (mu - Real(2 * k + 1) * Real(2 * k + 1)) /
                       (8 * x * Real(k + 1));
        term *= -f;
        if (std::abs(term) >= prev) break;   // divergence floor reached
        prev = std::abs(term);
        sum += term;
        if (std::abs(term) < std::abs(sum) * std::numeric_limits<Real>::epsilon())
            break;
    }
    const Real two_pi = Real(2) * Real(3.14159265358979323846264338327950288L);
    return sum / std::sqrt(two_pi * x);
}

// exp(x) K_l(x) = sqrt(pi/(2x)) sum_k a_k(l) / (8x)^k, for 8x well above mu.
template <class Real>
Real k_asymptotic_scaled(int l, Real x) {
    const Real mu = Real(4) * l * l;
    Real term = 1, sum = 1, prev = std::numeric_limits<Real>::max();
    for (int k = 0; k < 80; ++k) {
        const Real f = (mu - Real(2 * k + 1) * Real(2 * k + 1)) /
                       (8 * x * Real(k + 1));
        term *= f;
        if (std::abs(term) >= prev) break;
        prev = std::abs(term);
        sum += term;
        if (std::abs(term) < std::abs(sum) * std::numeric_limits<Real>::epsilon())
            break;
    }
    const Real pi = Real(3.14159265358979323846264338327950288L);
    return sum * std::sqrt(pi / (2 * x));
}

template <class Real>
Real i0_scaled_impl(Real x) {
    return x < Real(kISeriesEnd) ? i0_series(x) * std::exp(-x)
                                 : i_asymptotic_scaled(0, x);
}

template <class Real>
Real i1_scaled_impl(Real x) {
    return x < Real(kISeriesEnd) ? i1_series(x) * std::exp(-x)
                                 : i_asymptotic_scaled(1, x);
}

template <class Real>
Real k0_scaled_impl(Real x) {
    return x < Real(kKSeriesEnd) ? k0_series(x) * std::exp(x)
                                 : k_cheb_scaled(0, x) / std::sqrt(x);
}

template <class Real>
Real k1_scaled_impl(Real x) {
    return x < Real(kKSeriesEnd) ? k1_series(x) * std::exp(x)
                                 : k_cheb_scaled(1, x) / std::sqrt(x);
}

// I_{l+1}(x) / I_l(x) by the continued fraction
// r_l = 1 / (2(l+1)/x + r_{l+1}), evaluated with the modified Lentz scheme.
long double i_ratio_cf(int l, long double x) {
    const long double tiny = 1e-2400L;
    long double f = tiny, c = f, d = 0;
    for (int k = 1; k < 40000; ++k) {
        const long double b = 2 * (l + k) / x;
        d = b + d;
        if (d == 0) d = tiny;
        c = b + 1 / c;
        if (c == 0) c = tiny;
        d = 1 / d;
        const long double delta = c * d;
        f *= delta;
        if (std::abs(delta - 1) < 1e-19L) break;
    }
    return f;
}

// Growth guard for the unscaled public API.
double narrow_or_throw(long double v) {
    if (std::abs(v) > static_cast<long double>(std::numeric_limits<double>::max()))
        throw std::overflow_error("bessel: value exceeds double range");
    return static_cast<double>(v);
}

}  // namespace

double bessel_i0(double x) {
    check_domain(x, false);
    if (x < kISeriesEnd) return i0_series(x);
    return narrow_or_throw(i_asymptotic_scaled<long double>(0, x) *
                           std::exp(static_cast<long double>(x)));
}

double bessel_i1(double x) {
    check_domain(x, false);
    if (x < kISeriesEnd) return i1_series(x);
    return narrow_or_throw(i_asymptotic_scaled<long double>(1, x) *
                           std::exp(static_cast<long double>(x)));
}

double bessel_k0(double x) {
    check_domain(x, true);
    if (x < kKSeriesEnd) return k0_series(x);
    return k_cheb_scaled(0, x) / std::sqrt(x) * std::exp(-x);
}

double bessel_k1(double x) {
    check_domain(x, true);
    if (x < kKSeriesEnd) {
        const double v = k1_series(x);
        if (std::isinf(v)) throw std::overflow_error("bessel_k1: overflow");
        return v;
    }
    return k_cheb_scaled(1, x) / std::sqrt(x) * std::exp(-x);
}

void bessel_k01(double x, double& k0, double& k1) {
    check_domain(x, true);
    if (x < kKSeriesEnd) {
        k0 = k0_series(x);
        k1 = k1_series(x);
        if (std::isinf(k1)) throw std::overflow_error("bessel_k01: overflow");
        return;
    }
    // bitwise identical to the single-value entry points
    const double s = std::sqrt(x), e = std::exp(-x);
    k0 = k_cheb_scaled(0, x) / s * e;
    k1 = k_cheb_scaled(1, x) / s * e;
}

long double bessel_i_scaled_ld(int l, long double x) {
    check_order(l);
    check_domain(x, false);
    if (x == 0) return l == 0 ? 1.0L : 0.0L;
    if (l == 0) return i0_scaled_impl(x);
    if (l == 1) return i1_scaled_impl(x);
    // far beyond the turning point the uniform asymptotic series is cheaper
    // and the CF below would need O(x) iterations
    if (x > 4.0L * l * l * 0.35L + 50.0L) return i_asymptotic_scaled(l, x);
    // ratios r_m = I_{m+1}/I_m: CF at the top, then the stable downward
    // recurrence r_{m-1} = 1 / (2m/x + r_m)
    long double ratios[kMaxOrder + 1];
    long double r = i_ratio_cf(l - 1, x);
    for (int m = l - 1; m >= 1; --m) {
        ratios[m] = r;
        r = 1 / (2 * m / x + r);
    }
    ratios[0] = r;
    long double value = i0_scaled_impl(x);
    for (int m = 0; m < l; ++m) value *= ratios[m];
    return value;
}

long double bessel_k_scaled_ld(int l, long double x) {
    check_order(l);
    check_domain(x, true);
    if (l == 0) return k0_scaled_impl(x);
    if (l == 1) return k1_scaled_impl(x);
    long double km1 = k0_scaled_impl(x), k = k1_scaled_impl(x);
    for (int m = 1; m < l; ++m) {
        const long double kp1 = km1 + 2 * m / x * k;
        km1 = k;
        k = kp1;
    }
    return k;
}

double bessel_i_scaled(int l, double x) {
    const long double v = bessel_i_scaled_ld(l, x);
    return narrow_or_throw(v);
}

double bessel_k_scaled(int l, double x) {
    const long double v = bessel_k_scaled_ld(l, x);
    return narrow_or_throw(v);
}

double bessel_i(int l, double x) {
    check_domain(x, false);
    if (x == 0) return l == 0 ? 1.0 : 0.0;
    const long double v = bessel_i_scaled_ld(l, x) *
                          std::exp(static_cast<long double>(x));
    return narrow_or_throw(v);
}

double bessel_k(int l, double x) {
    const long double v = bessel_k_scaled_ld(l, x) *
                          std::exp(-static_cast<long double>(x));
    return narrow_or_throw(v);
}

void bessel_i_ratio_seq(long double x, long double lambda, int lmax,
                        long double* out) {
    check_order(lmax);
    check_domain(x, false);
    if (lambda <= 0) throw std::invalid_argument("bessel: lambda must be > 0");
    if (x == 0) {
        out[0] = 1;
        for (int l = 1; l <= lmax; ++l) out[l] = 0;
        return;
    }
    if (lmax == 0) {
        out[0] = i0_scaled_impl(x) * std::exp(x);
        return;
    }
    // downward recurrence on ratios r_m = I_{m+1}/I_m seeded by the CF
    long double ratios_buf[kMaxOrder + 1];
    long double r = i_ratio_cf(lmax - 1, x);
    for (int m = lmax - 1; m >= 1; --m) {
        ratios_buf[m] = r;
        r = 1 / (2 * m / x + r);
    }
    ratios_buf[0] = r;
    out[0] = i0_scaled_impl(x) * std::exp(x);   // unscaled I_0
    for (int l = 0; l < lmax; ++l) out[l + 1] = out[l] * (ratios_buf[l] / lambda);
}

void bessel_k_ratio_seq(long double x, long double lambda, int lmax,
                        long double* out) {
    check_order(lmax);
    check_domain(x, true);
    if (lambda <= 0) throw std::invalid_argument("bessel: lambda must be > 0");
    const long double e = std::exp(-x);
    out[0] = k0_scaled_impl(x) * e;
    if (lmax == 0) return;
    out[1] = k1_scaled_impl(x) * e * lambda;
    // K_{l+1} lam^{l+1} = lam^2 (K_{l-1} lam^{l-1}) + (2l/x) lam (K_l lam^l)
    for (int m = 1; m < lmax; ++m)
        out[m + 1] = lambda * lambda * out[m - 1] + 2 * m / x * lambda * out[m];
}

}  // namespace yukawa::special
