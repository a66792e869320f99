"""Independent reference computations used only by the tests.

Nothing here calls the chain recursion or the basis tables of the package:
integrals over the simplex use a plain Duffy-mapped tensor Gauss-Legendre
rule, and Jacobi values come from scipy or from Rodrigues' formula in sympy.
"""
from math import factorial

import numpy as np
from scipy.special import eval_jacobi, gammaln


def gl01(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1), 0.5 * w


def phi_ref(d, i, k, t):
    """Orthonormal basis member from scipy's Jacobi and the normalizer formula."""
    lr = 0.5 * (np.log(2 * k + d) + gammaln(k + 1) + gammaln(k + d)
                - gammaln(k + d - i + 1) - gammaln(k + i))
    base = 0.5 * (gammaln(d - i + 1) + gammaln(i))
    return np.exp(lr + base) * eval_jacobi(k, d - i, i - 1, 2 * np.asarray(t) - 1)


def pair_integral(d, i, j, a, b, n=60):
    """``int_simplex a(x_i) b(x_j) dx`` for i < j (1-based), Lebesgue measure.

    The other coordinates integrate out to volumes: ``s^(i-1)/(i-1)!`` below,
    ``(t-s)^(j-i-1)/(j-i-1)!`` between and ``(1-t)^(d-j)/(d-j)!`` above; the
    remaining triangle ``0 <= s <= t <= 1`` uses ``s = t u``.
    """
    x, w = gl01(n)
    t = x[:, None]
    u = x[None, :]
    s = t * u
    jac = t * w[:, None] * w[None, :]
    vol = (s ** (i - 1) / factorial(i - 1) * (t - s) ** (j - i - 1) / factorial(j - i - 1)
           * (1 - t) ** (d - j) / factorial(d - j))
    return float(np.sum(jac * vol * a(s) * b(t)))


def triangle_rule(n=200):
    """Points and weights for the d=2 ordered simplex via a tensor GL rule."""
    x, w = gl01(n)
    t = np.repeat(x, n)
    u = np.tile(x, n)
    pts = np.column_stack([t * u, t])
    wts = np.repeat(w, n) * np.tile(w, n) * t
    return pts, wts
