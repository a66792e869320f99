"""Scoring estimators against a true density, and the kernel baseline.

Any object with a dimension ``d`` and a vectorized ``log_pdf(points)`` that
returns ``-inf`` off the simplex can be scored.  Objects that also expose
``additive_form()`` (per-coordinate log components plus a constant) can be
scored through the nested one-dimensional recursion instead of a full grid.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import log, pi
from typing import Callable, Protocol

import numpy as np
from scipy.special import logsumexp

from .mle import SimplexSample
from .quadrature import (QuadratureGrid, SimplexGrid, chain_integrals, default_grid,
                         simplex_grid)

__all__ = [
    "DensityHandle",
    "CallableDensity",
    "KernelEstimate",
    "kl_divergence",
    "l2_distance",
    "integrated_squared_error",
    "score",
    "total_mass",
    "kernel_fit",
    "scott_bandwidths",
]

_TINY_LOG = log(1e-300)


class DensityHandle(Protocol):
    d: int

    def log_pdf(self, x: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class CallableDensity:
    """Wrap a bare log-density callable.

    With ``normalized=True`` the mass over the simplex is checked on the
    default scoring grid when the handle is created.
    """

    d: int
    func: Callable
    normalized: bool = True
    tol: float = 1e-6

    def __post_init__(self):
        if self.normalized:
            mass = total_mass(self)
            if abs(mass - 1.0) > self.tol:
                raise ValueError(f"density integrates to {mass:.10g}, not 1")

    def log_pdf(self, x):
        return np.asarray(self.func(np.atleast_2d(x)), dtype=float)


def _grid_for(d: int, grid: SimplexGrid | None) -> SimplexGrid:
    if grid is None:
        return simplex_grid(d)
    if grid.d != d:
        raise ValueError(f"grid is for d={grid.d}, densities have d={d}")
    return grid


def _same_dim(p, q):
    if p.d != q.d:
        raise ValueError(f"dimension mismatch: {p.d} vs {q.d}")


def total_mass(q, grid: SimplexGrid | None = None) -> float:
    grid = _grid_for(q.d, grid)
    return float(grid.weights @ np.exp(q.log_pdf(grid.points)))


def _additive(obj):
    form = getattr(obj, "additive_form", None)
    return form() if form is not None else None


def _kl_additive(p, q, line: QuadratureGrid) -> float:
    pc, pconst = _additive(p)
    qc, qconst = _additive(q)
    t = line.nodes
    a = np.stack([np.asarray(f(t), dtype=float) for f in pc])
    b = np.stack([np.asarray(f(t), dtype=float) for f in qc])
    e, fwd, bwd, shift, total = chain_integrals(a, line)
    val = pconst - qconst
    for i in range(p.d):
        marg = e[i] * fwd[i] * bwd[i + 1] / total
        live = marg > 0
        if np.any(~np.isfinite(b[i][live])):
            return np.inf
        val += line.weights[live] @ (marg[live] * (a[i][live] - b[i][live]))
    return float(val)


def _kl_from_logs(w, lp, lq) -> float:
    live = lp > _TINY_LOG
    lql = lq[live]
    if np.any(~np.isfinite(lql)):
        return np.inf
    lpl = lp[live]
    return float(w[live] @ (np.exp(lpl) * (lpl - lql)))


def _clamp(val: float) -> float:
    return 0.0 if -1e-10 < val < 0 else val


def kl_divergence(p, q, grid: SimplexGrid | None = None, line: QuadratureGrid | None = None) -> float:
    """``KL(p || q) = int p log(p / q)`` by quadrature over the simplex.

    For ``d = 2`` (or when ``grid`` is given) the collapsed tensor grid is
    used; for larger ``d`` with two additive densities the nested recursion on
    ``line`` is used.  Returns ``inf`` when ``q`` vanishes where ``p`` does not.
    """
    _same_dim(p, q)
    if grid is None and p.d > 2 and _additive(p) and _additive(q):
        return _clamp(_kl_additive(p, q, line or default_grid()))
    grid = _grid_for(p.d, grid)
    return _clamp(_kl_from_logs(grid.weights, p.log_pdf(grid.points), q.log_pdf(grid.points)))


def _log_cross_additive(p, q, line: QuadratureGrid) -> float:
    pc, pconst = _additive(p)
    qc, qconst = _additive(q)
    t = line.nodes
    g = np.stack([np.asarray(f(t), dtype=float) + np.asarray(h(t), dtype=float)
                  for f, h in zip(pc, qc)])
    _, _, _, shift, total = chain_integrals(g, line)
    return float(pconst + qconst + shift + np.log(total))


def integrated_squared_error(p, q, grid: SimplexGrid | None = None,
                             line: QuadratureGrid | None = None) -> float:
    """``int (p - q)^2`` over the simplex, the square of :func:`l2_distance`."""
    _same_dim(p, q)
    if grid is None and p.d > 2 and _additive(p) and _additive(q):
        line = line or default_grid()
        pp = np.exp(_log_cross_additive(p, p, line))
        qq = np.exp(_log_cross_additive(q, q, line))
        pq = np.exp(_log_cross_additive(p, q, line))
        return float(max(pp + qq - 2 * pq, 0.0))
    grid = _grid_for(p.d, grid)
    diff = np.exp(p.log_pdf(grid.points)) - np.exp(q.log_pdf(grid.points))
    return float(grid.weights @ diff ** 2)


def l2_distance(p, q, grid: SimplexGrid | None = None, line: QuadratureGrid | None = None) -> float:
    """``sqrt(int (p - q)^2)`` over the simplex."""
    return float(np.sqrt(integrated_squared_error(p, q, grid, line)))


def score(p, q, grid: SimplexGrid | None = None, line: QuadratureGrid | None = None):
    """``(KL(p || q), ||p - q||_2)`` with each density evaluated only once."""
    _same_dim(p, q)
    if grid is None and p.d > 2 and _additive(p) and _additive(q):
        return kl_divergence(p, q, line=line), l2_distance(p, q, line=line)
    grid = _grid_for(p.d, grid)
    lp = p.log_pdf(grid.points)
    lq = q.log_pdf(grid.points)
    kl = _clamp(_kl_from_logs(grid.weights, lp, lq))
    ise = float(grid.weights @ (np.exp(lp) - np.exp(lq)) ** 2)
    return kl, float(np.sqrt(ise))


def scott_bandwidths(points: np.ndarray) -> np.ndarray:
    """Per-coordinate ``sigma_i n^(-1/(d+4))`` with the sample standard deviation."""
    points = np.asarray(points, dtype=float)
    n, d = points.shape
    sd = points.std(axis=0, ddof=1)
    if np.any(~(sd > 0)):
        raise ValueError(f"zero-variance coordinate(s) {np.flatnonzero(~(sd > 0)) + 1}")
    return sd * n ** (-1.0 / (d + 4))


@dataclass(frozen=True)
class KernelEstimate:
    """Gaussian product-kernel mixture restricted to the simplex and renormalized."""

    points: np.ndarray
    bandwidths: np.ndarray
    log_c: float

    @property
    def d(self) -> int:
        return self.points.shape[1]

    @property
    def n(self) -> int:
        return self.points.shape[0]

    def _log_raw(self, x: np.ndarray, chunk: int = 2048) -> np.ndarray:
        h = self.bandwidths
        norm = -log(self.n) - float(np.sum(np.log(h))) - 0.5 * self.d * log(2 * pi)
        c = self.points / h
        half_c2 = 0.5 * np.einsum("ij,ij->i", c, c)
        out = np.empty(x.shape[0])
        for s in range(0, x.shape[0], chunk):
            xs = x[s:s + chunk] / h
            # -|x - c|^2 / 2 = x.c - |c|^2/2 - |x|^2/2, the last term added back below
            expo = xs @ c.T
            expo -= half_c2
            top = expo.max(axis=1)
            expo -= top[:, None]
            np.exp(expo, out=expo)
            with np.errstate(divide="ignore"):
                out[s:s + chunk] = (top + np.log(expo.sum(axis=1))
                                    - 0.5 * np.einsum("ij,ij->i", xs, xs))
        return out + norm

    def log_pdf(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        x = np.atleast_2d(x)
        inside = (x[:, 0] >= 0) & (x[:, -1] <= 1) & np.all(np.diff(x, axis=1) >= 0, axis=1)
        out = np.full(x.shape[0], -np.inf)
        if np.any(inside):
            out[inside] = self._log_raw(x[inside]) - self.log_c
        return float(out[0]) if single else out

    def pdf(self, x):
        return np.exp(self.log_pdf(x))


def _log_kernel_mass(points: np.ndarray, h: np.ndarray, line: QuadratureGrid) -> float:
    t = line.nodes
    n, d = points.shape
    # one product-form integrand per kernel centre, batched on the last axis
    g = np.stack([-0.5 * ((t[:, None] - points[None, :, i]) / h[i]) ** 2
                  - np.log(h[i]) - 0.5 * log(2 * pi) for i in range(d)])
    _, _, _, shift, total = chain_integrals(g, line)
    return float(logsumexp(shift + np.log(total)) - log(n))


def kernel_fit(sample, bandwidths=None, grid: QuadratureGrid | None = None) -> KernelEstimate:
    """Truncated Gaussian kernel estimate with Scott's-rule bandwidths.

    The raw mixture ``(1/n) sum_j prod_i N(x_i; X_ji, h_i^2)`` is divided by its
    own mass on the simplex.  ``bandwidths`` overrides Scott's rule.
    """
    if not isinstance(sample, SimplexSample):
        sample = SimplexSample(sample)
    if sample.n < 2:
        raise ValueError("kernel estimate needs at least two observations")
    pts = np.array(sample.points)
    h = scott_bandwidths(pts) if bandwidths is None else np.asarray(bandwidths, dtype=float)
    if h.shape != (sample.d,) or np.any(~(h > 0)):
        raise ValueError(f"bandwidths must be {sample.d} positive numbers")
    log_c = _log_kernel_mass(pts, h, grid or default_grid())
    return KernelEstimate(pts, h, log_c)
