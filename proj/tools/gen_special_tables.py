#!/usr/bin/env python3
"""Generate Chebyshev tables for the mid/large-argument K0, K1 evaluation.

The small-argument series loses no accuracy up to x = 2, and the large-x
asymptotic series only reaches ~1e-7 at x = 8, so the gap is covered by
Chebyshev fits of g(x) = exp(x) * K(x) * sqrt(x), smooth in 1/x:

    interval A: x in [2, 8],   t = (16/x - 5) / 3
    interval B: x in [8, inf), t = 16/x - 1

Coefficients are kept to a 1e-21 relative tail so the tables also serve the
long double code path. Fit quality is verified on a dense grid against
mpmath.besselk before anything is written.

Output: ../src/special_tables.inc
"""

import pathlib

import mpmath as mp


def cheb_fit(f, n):
    """Chebyshev coefficients of f on t in [-1, 1] sampled at n points."""
    xs = [mp.cos(mp.pi * (k + mp.mpf('0.5')) / n) for k in range(n)]
    fs = [f(x) for x in xs]
    cs = []
    for m in range(n):
        s = mp.fsum(fs[k] * mp.cos(mp.pi * m * (k + mp.mpf('0.5')) / n)
                    for k in range(n))
        cs.append(s * 2 / n)
    cs[0] /= 2
    return cs


def clenshaw(cs, t):
    b1 = b2 = mp.mpf(0)
    for c in reversed(cs[1:]):
        b1, b2 = 2 * t * b1 - b2 + c, b1
    return t * b1 - b2 + cs[0]


def trim(cs, rel=mp.mpf('1e-21')):
    scale = max(abs(c) for c in cs)
    n = len(cs)
    while n > 1 and abs(cs[n - 1]) < rel * scale and abs(cs[n - 2]) < rel * scale:
        n -= 1
    return cs[:n]


def fit_interval(nu, x_of_t, t_of_x, xlo, xhi, label):
    def g(t):
        x = x_of_t(t)
        return mp.exp(x) * mp.besselk(nu, x) * mp.sqrt(x)

    cs = trim(cheb_fit(g, 64))
    worst = mp.mpf(0)
    for k in range(1500):
        # dense in t covers the whole x range including the open end
        t = -1 + mp.mpf(2 * k + 1) / 1500
        x = x_of_t(t)
        approx = clenshaw(cs, t)
        exact = mp.exp(x) * mp.besselk(nu, x) * mp.sqrt(x)
        worst = max(worst, abs(approx / exact - 1))
    print(f'{label}: {len(cs)} coefficients, max rel err {mp.nstr(worst, 3)}')
    assert worst < mp.mpf('1e-19'), 'fit not converged'
    return cs


def fmt(x):
    return mp.nstr(x, 36, strip_zeros=False) + 'L'


def emit(lines, name, cs):
    lines.append(f'static const long double {name}[{len(cs)}] = {{')
    for c in cs:
        lines.append(f'    {fmt(c)},')
    lines.append('};')


def main():
    mp.mp.dps = 50
    # interval A: x in [2, 8]
    xa = lambda t: 16 / (3 * t + 5)
    # interval B: x in [8, inf); t = -1 is the x = inf endpoint
    xb = lambda t: 16 / (t + 1) if t != -1 else mp.mpf('1e60')

    k0a = fit_interval(0, xa, None, 2, 8, 'K0 [2,8]')
    k0b = fit_interval(0, xb, None, 8, mp.inf, 'K0 [8,inf)')
    k1a = fit_interval(1, xa, None, 2, 8, 'K1 [2,8]')
    k1b = fit_interval(1, xb, None, 8, mp.inf, 'K1 [8,inf)')

    lines = ['// Generated by tools/gen_special_tables.py. Do not edit by hand.',
             '// Chebyshev coefficients of exp(x) K(x) sqrt(x); interval A is',
             '// x in [2,8] with t = (16/x-5)/3, interval B is x in [8,inf)',
             '// with t = 16/x-1.', '']
    emit(lines, 'kChebK0A', k0a)
    emit(lines, 'kChebK0B', k0b)
    emit(lines, 'kChebK1A', k1a)
    emit(lines, 'kChebK1B', k1b)
    lines.append('')
    lines.append(f'static const long double kEulerGamma = {fmt(mp.euler)};')
    lines.append('')
    out = pathlib.Path(__file__).resolve().parent.parent / 'src' / 'special_tables.inc'
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text('\n'.join(lines))
    print(f'wrote {out}')


if __name__ == '__main__':
    main()
