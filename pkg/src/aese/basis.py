"""Jacobi polynomials and the simplex-adapted orthonormal bases.

For dimension ``d`` and coordinate ``i`` the family ``phi_{i,k}`` is the
shifted Jacobi family with ``alpha = d - i`` and ``beta = i - 1``, rescaled to
be orthonormal in ``L^2(q_i)`` where ``q_i`` is the ``i``-th marginal of
Lebesgue measure on the ordered simplex.  All factorial ratios go through
``lgamma`` so that large degrees do not overflow.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from math import exp, lgamma, log, sqrt

import numpy as np

from .quadrature import MarginalMeasure, QuadratureGrid, default_grid

__all__ = [
    "JacobiParams",
    "BasisFamily",
    "CorrelationMatrix",
    "jacobi_eval",
    "jacobi_table",
    "basis_family",
    "phi_eval",
    "mixed_scalar_product",
    "correlation_matrix",
    "project_log_component",
    "phi_sup_norm",
    "phi_sup_bound",
    "sup_norm_constant",
    "projection_error_factor",
    "projection_sup_error_factor",
]

_EDGE_TOL = 1e-12


def _lfact(n) -> float:
    return lgamma(n + 1)


@dataclass(frozen=True)
class JacobiParams:
    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha > -1 and self.beta > -1):
            raise ValueError(f"Jacobi parameters must exceed -1, got {self.alpha}, {self.beta}")

    @classmethod
    def from_coordinate(cls, d: int, i: int) -> "JacobiParams":
        if not 1 <= i <= d:
            raise ValueError(f"need 1 <= i <= d, got d={d}, i={i}")
        return cls(d - i, i - 1)

    def weight(self, t):
        t = np.asarray(t, dtype=float)
        return (1.0 - t) ** self.alpha * (1.0 + t) ** self.beta


def _check_interval(t: np.ndarray, lo: float, hi: float):
    if np.any(t < lo - _EDGE_TOL) or np.any(t > hi + _EDGE_TOL) or np.any(np.isnan(t)):
        bad = t[(t < lo - _EDGE_TOL) | (t > hi + _EDGE_TOL) | np.isnan(t)]
        raise ValueError(f"argument outside [{lo}, {hi}]: {bad[:3]}")


def jacobi_table(p: JacobiParams, kmax: int, t) -> np.ndarray:
    """``P_k^{(alpha, beta)}(t)`` for ``k = 0..kmax``, stacked on the last axis."""
    if kmax < 0:
        raise ValueError("degree must be non-negative")
    t = np.asarray(t, dtype=float)
    _check_interval(t, -1.0, 1.0)
    a, b = float(p.alpha), float(p.beta)
    out = np.empty(t.shape + (kmax + 1,))
    out[..., 0] = 1.0
    if kmax >= 1:
        out[..., 1] = (a + 1.0) + (a + b + 2.0) * (t - 1.0) / 2.0
    for n in range(2, kmax + 1):
        s = 2 * n + a + b
        c1 = 2 * n * (n + a + b) * (s - 2)
        c2 = (s - 1) * ((s * (s - 2)) * t + a * a - b * b)
        c3 = 2 * (n + a - 1) * (n + b - 1) * s
        out[..., n] = (c2 * out[..., n - 1] - c3 * out[..., n - 2]) / c1
    return out


def jacobi_eval(p: JacobiParams, k: int, t):
    """Jacobi polynomial of degree ``k`` by the three-term recurrence."""
    vals = jacobi_table(p, k, t)[..., k]
    return vals if np.ndim(vals) else float(vals)


def _log_rho(d: int, i: int, k: int) -> float:
    return 0.5 * (log(2 * k + d) + _lfact(k) + _lfact(k + d - 1)
                  - _lfact(k + d - i) - _lfact(k + i - 1))


@dataclass(frozen=True)
class BasisFamily:
    """``phi_{i,0..max_degree}`` for coordinate ``i`` of a ``d``-simplex."""

    d: int
    i: int
    max_degree: int
    normalizers: tuple = field(init=False, repr=False, compare=False)
    _scale: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.d < 2:
            raise ValueError("dimension must be at least 2")
        if not 1 <= self.i <= self.d:
            raise ValueError(f"need 1 <= i <= d, got d={self.d}, i={self.i}")
        if self.max_degree < 0:
            raise ValueError("max_degree must be non-negative")
        d, i = self.d, self.i
        logs = [_log_rho(d, i, k) for k in range(self.max_degree + 1)]
        base = 0.5 * (_lfact(d - i) + _lfact(i - 1))
        scale = np.exp(np.array(logs) + base)
        scale.setflags(write=False)
        object.__setattr__(self, "normalizers", tuple(exp(v) for v in logs))
        object.__setattr__(self, "_scale", scale)

    @property
    def jacobi(self) -> JacobiParams:
        return JacobiParams.from_coordinate(self.d, self.i)

    @property
    def measure(self) -> MarginalMeasure:
        return MarginalMeasure(self.d, self.i)

    def table(self, t, kmax: int | None = None) -> np.ndarray:
        """All members ``phi_{i,0..kmax}`` at ``t``, degree on the last axis."""
        kmax = self.max_degree if kmax is None else kmax
        if kmax > self.max_degree:
            raise ValueError(f"degree {kmax} exceeds max_degree {self.max_degree}")
        t = np.asarray(t, dtype=float)
        _check_interval(t, 0.0, 1.0)
        s = np.clip(2.0 * t - 1.0, -1.0, 1.0)
        return jacobi_table(self.jacobi, kmax, s) * self._scale[: kmax + 1]

    def __call__(self, k: int, t):
        if not 0 <= k <= self.max_degree:
            raise ValueError(f"degree {k} outside [0, {self.max_degree}]")
        vals = self.table(t, k)[..., k]
        return vals if np.ndim(vals) else float(vals)


@lru_cache(maxsize=256)
def basis_family(d: int, i: int, max_degree: int) -> BasisFamily:
    return BasisFamily(d, i, max_degree)


def phi_eval(b: BasisFamily, k: int, t):
    """``phi_{i,k}(t) = rho_{i,k} sqrt((d-i)!(i-1)!) P_k^{(d-i,i-1)}(2t-1)``."""
    return b(k, t)


def mixed_scalar_product(d: int, i: int, j: int, k: int, l: int) -> float:
    """``int_simplex phi_{i,k}(x_i) phi_{j,l}(x_j) dx`` in closed form (``i < j``)."""
    if not i < j:
        raise ValueError(f"mixed scalar product needs i < j, got i={i}, j={j}")
    if not (1 <= i and j <= d):
        raise ValueError(f"indices out of range for d={d}")
    if k < 0 or l < 0:
        raise ValueError("degrees must be non-negative")
    if k != l:
        return 0.0
    lv = 0.5 * (_lfact(j - 1) + _lfact(d - i) - _lfact(i - 1) - _lfact(d - j))
    lv += 0.5 * (_lfact(k + d - j) + _lfact(k + i - 1) - _lfact(k + d - i) - _lfact(k + j - 1))
    # the value is at most 1; lgamma rounding can push it a few ulps above
    return min(exp(lv), 1.0)


@dataclass(frozen=True)
class CorrelationMatrix:
    """Degree-``k`` cross-coordinate Gram matrix ``R_k``."""

    k: int
    d: int
    entries: np.ndarray = field(repr=False, compare=False)

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.entries)

    @property
    def min_eigenvalue(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def predicted_min_eigenvalue(self) -> float:
        return self.k / (self.k + self.d - 1)


def correlation_matrix(d: int, k: int) -> CorrelationMatrix:
    if k < 1 or d < 2:
        raise ValueError(f"need k >= 1 and d >= 2, got k={k}, d={d}")
    r = np.eye(d)
    for i in range(1, d + 1):
        for j in range(i + 1, d + 1):
            r[i - 1, j - 1] = r[j - 1, i - 1] = mixed_scalar_product(d, i, j, k, k)
    r.setflags(write=False)
    return CorrelationMatrix(k, d, r)


def project_log_component(h, b: BasisFamily, m_i: int,
                          grid: QuadratureGrid | None = None) -> np.ndarray:
    """Coefficients ``int_I h phi_{i,k} q_i`` for ``k = 1..m_i``."""
    grid = grid or default_grid()
    t = grid.nodes
    hv = np.broadcast_to(np.asarray(h(t), dtype=float), t.shape)
    tab = basis_family(b.d, b.i, max(m_i, b.max_degree)).table(t, m_i)
    w = grid.weights * b.measure.density(t) * hv
    return w @ tab[:, 1:]


def phi_sup_norm(d: int, i: int, k: int) -> float:
    """Exact ``sup_I |phi_{i,k}|`` from the Jacobi sup-norm formula."""
    a = 0.5 * (_lfact(i - 1) + _lfact(k + d - i) - _lfact(d - i) - _lfact(k + i - 1))
    return exp(0.5 * (log(2 * k + d) + _lfact(k + d - 1) - _lfact(k)) + abs(a))


def phi_sup_bound(d: int, k: int) -> float:
    """Uniform bound ``sqrt((d-1)!) sqrt(2k+d) (k+d-1)!/k!`` on ``sup_I |phi_{i,k}|``."""
    return exp(0.5 * _lfact(d - 1) + 0.5 * log(2 * k + d) + _lfact(k + d - 1) - _lfact(k))


def sup_norm_constant(d: int, m) -> float:
    """``kappa_m = sqrt(2 d!) sqrt(sum_i (m_i + d)^{2d})``."""
    s = sum(float(mi + d) ** (2 * d) for mi in m)
    return sqrt(2.0 * exp(_lfact(d))) * sqrt(s)


def projection_error_factor(d: int, m_i: int, r: int) -> float:
    """Bound factor on the squared ``L^2(q_i)`` tail of a degree-``m_i`` projection.

    Multiplies ``||h^{(r)}||^2_{L^2(q_i)}``; requires ``m_i + 1 >= r``.
    """
    if m_i + 1 < r:
        raise ValueError("need m_i + 1 >= r")
    return exp(-2 * r * log(2) + _lfact(m_i + 1 - r) + _lfact(m_i + d)
               - _lfact(m_i + 1) - _lfact(m_i + d + r))


def projection_sup_error_factor(d: int, m_i: int, r: int) -> float:
    """Bound factor on the sup-norm tail; requires ``m_i + 1 >= r > d``."""
    if not m_i + 1 >= r > d:
        raise ValueError("need m_i + 1 >= r > d")
    return (2.0 ** (-r) * sqrt(2 * exp(_lfact(d - 1))) * exp(r) / sqrt(2 * r - 2 * d - 1)
            / (m_i + r) ** (r - d - 0.5))
