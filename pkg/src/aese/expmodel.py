"""Additive exponential series densities on the ordered simplex.

A model index ``m = (m_1, ..., m_d)`` selects the basis functions
``phi_{i,1..m_i}`` of each coordinate; a coefficient vector ``theta`` of length
``|m|`` defines ``f_theta = exp(theta . phi_m - psi(theta))`` on the simplex.
The log-normalizer, the moment map (its gradient) and the covariance (its
Hessian) are all computed with the nested prefix/suffix chains of
:mod:`aese.quadrature` on one fixed grid.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .basis import basis_family
from .quadrature import QuadratureGrid, chain_integrals, default_grid

__all__ = [
    "ModelIndex",
    "SeriesDensity",
    "ExpFamilyState",
    "evaluate_state",
    "log_normalizer",
    "moment_map",
    "covariance_matrix",
    "coordinate_moments",
    "on_simplex",
    "series_density",
]

RECORD_TAG = "aese v1"


@dataclass(frozen=True)
class ModelIndex:
    """Per-coordinate truncation degrees ``(m_1, ..., m_d)``."""

    degrees: tuple

    def __init__(self, degrees: Sequence[int]):
        degrees = tuple(int(v) for v in degrees)
        if len(degrees) < 2:
            raise ValueError("a model index needs d >= 2 coordinates")
        if any(v < 1 for v in degrees):
            raise ValueError(f"all degrees must be >= 1, got {degrees}")
        object.__setattr__(self, "degrees", degrees)

    @classmethod
    def uniform(cls, d: int, v: int) -> "ModelIndex":
        return cls((v,) * d)

    @property
    def d(self) -> int:
        return len(self.degrees)

    @property
    def size(self) -> int:
        return sum(self.degrees)

    @property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.degrees)])

    def blocks(self, theta: np.ndarray) -> list:
        theta = np.asarray(theta, dtype=float)
        off = self.offsets
        return [theta[..., off[i]:off[i + 1]] for i in range(self.d)]

    def flat(self, i: int, k: int) -> int:
        """Flat offset of ``theta_{i,k}`` (both 1-based)."""
        if not (1 <= i <= self.d and 1 <= k <= self.degrees[i - 1]):
            raise IndexError(f"(i={i}, k={k}) outside {self.degrees}")
        return int(self.offsets[i - 1]) + k - 1

    def pad(self, theta: np.ndarray, target: "ModelIndex") -> np.ndarray:
        """Embed ``theta`` in a larger index with zeros for the extra degrees."""
        if target.d != self.d or any(a > b for a, b in zip(self.degrees, target.degrees)):
            raise ValueError(f"{self.degrees} does not embed in {target.degrees}")
        out = np.zeros(target.size)
        toff = target.offsets
        for i, blk in enumerate(self.blocks(theta)):
            out[toff[i]:toff[i] + blk.size] = blk
        return out

    def __str__(self):
        return ",".join(map(str, self.degrees))


@lru_cache(maxsize=64)
def _node_basis(grid: QuadratureGrid, index: ModelIndex) -> tuple:
    d = index.d
    mats = []
    for i, mi in enumerate(index.degrees, start=1):
        tab = basis_family(d, i, mi).table(grid.nodes)[:, 1:]
        tab.setflags(write=False)
        mats.append(tab)
    return tuple(mats)


def on_simplex(x: np.ndarray) -> np.ndarray:
    """Row mask for ``0 <= x_1 <= ... <= x_d <= 1``."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    ok = (x[:, 0] >= 0.0) & (x[:, -1] <= 1.0)
    return ok & np.all(np.diff(x, axis=1) >= 0.0, axis=1)


def _additive_values(index: ModelIndex, theta: np.ndarray, x: np.ndarray) -> np.ndarray:
    d = index.d
    out = np.zeros(x.shape[0])
    for i, (mi, blk) in enumerate(zip(index.degrees, index.blocks(theta)), start=1):
        t = np.clip(x[:, i - 1], 0.0, 1.0)
        out += basis_family(d, i, mi).table(t)[:, 1:] @ blk
    return out


@dataclass(frozen=True)
class ExpFamilyState:
    """Log-normalizer and derivatives at one ``theta``.

    ``gradient`` is the moment map ``E_theta[phi_m(X)]`` and ``hessian`` the
    covariance of ``phi_m(X)``; ``hessian`` is ``None`` when not requested.
    """

    log_norm: float
    gradient: np.ndarray
    hessian: np.ndarray | None
    marginals: np.ndarray = field(repr=False)


def evaluate_state(index: ModelIndex, theta, grid: QuadratureGrid | None = None,
                   order: int = 2) -> ExpFamilyState:
    """Compute ``psi``, and optionally ``A_m`` (order>=1) and ``Cov`` (order 2)."""
    grid = grid or default_grid()
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (index.size,):
        raise ValueError(f"theta has shape {theta.shape}, expected ({index.size},)")
    if not np.all(np.isfinite(theta)):
        raise ValueError("theta must be finite")
    phis = _node_basis(grid, index)
    g = np.stack([p @ b for p, b in zip(phis, index.blocks(theta))])
    e, fwd, bwd, log_shift, total = chain_integrals(g, grid)
    if not total > 0:
        raise FloatingPointError(f"normalizing integral is {total:.3g}; refine the grid")
    log_norm = float(log_shift + np.log(total))
    d = index.d
    marg = np.stack([e[i] * fwd[i] * bwd[i + 1] for i in range(d)]) / total
    if order == 0:
        return ExpFamilyState(log_norm, np.empty(0), None, marg)
    w = grid.weights
    grad = np.concatenate([(w * marg[i]) @ phis[i] for i in range(d)])
    if order == 1:
        return ExpFamilyState(log_norm, grad, None, marg)
    off = index.offsets
    second = np.empty((index.size, index.size))
    for i in range(d):
        si = slice(off[i], off[i + 1])
        second[si, si] = (phis[i] * (w * marg[i])[:, None]).T @ phis[i]
        h = grid.cumulative(phis[i] * (e[i] * fwd[i])[:, None])
        for j in range(i + 1, d):
            sj = slice(off[j], off[j + 1])
            right = phis[j] * (w * e[j] * bwd[j + 1])[:, None]
            blk = h.T @ right / total
            second[si, sj] = blk
            second[sj, si] = blk.T
            h = grid.cumulative(h * e[j][:, None])
    cov = second - np.outer(grad, grad)
    return ExpFamilyState(log_norm, grad, 0.5 * (cov + cov.T), marg)


def log_normalizer(index: ModelIndex, theta, grid: QuadratureGrid | None = None) -> float:
    """``psi(theta) = log int_simplex exp(theta . phi_m)``."""
    return evaluate_state(index, theta, grid, order=0).log_norm


def moment_map(index: ModelIndex, theta, grid: QuadratureGrid | None = None) -> np.ndarray:
    """``A_m(theta) = E_theta[phi_m(X)]``, the gradient of ``psi``."""
    return evaluate_state(index, theta, grid, order=1).gradient


def covariance_matrix(index: ModelIndex, theta, grid: QuadratureGrid | None = None) -> np.ndarray:
    """Covariance of ``phi_m(X)`` under ``f_theta`` (the Hessian of ``psi``).

    Raises ``FloatingPointError`` when the result is not positive definite,
    which signals an under-resolved grid.
    """
    cov = evaluate_state(index, theta, grid, order=2).hessian
    try:
        np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        raise FloatingPointError("covariance is not positive definite; refine the grid")
    return cov


@dataclass(frozen=True)
class SeriesDensity:
    """A normalized member ``f_theta`` of the additive exponential series family."""

    index: ModelIndex
    theta: np.ndarray
    log_norm: float

    def __post_init__(self):
        theta = np.array(self.theta, dtype=float)
        if theta.shape != (self.index.size,):
            raise ValueError(f"theta has shape {theta.shape}, expected ({self.index.size},)")
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)

    @property
    def d(self) -> int:
        return self.index.d

    def log_component(self, i: int, t) -> np.ndarray:
        """``theta_i . phi_{i,m}(t)`` for coordinate ``i`` (1-based)."""
        blk = self.index.blocks(self.theta)[i - 1]
        fam = basis_family(self.d, i, self.index.degrees[i - 1])
        return fam.table(t)[..., 1:] @ blk

    def log_pdf(self, x) -> np.ndarray:
        """``theta . phi_m(x) - psi`` on the simplex, ``-inf`` elsewhere."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        x = np.atleast_2d(x)
        if x.shape[1] != self.d:
            raise ValueError(f"points have {x.shape[1]} coordinates, model has d={self.d}")
        inside = on_simplex(x)
        out = np.full(x.shape[0], -np.inf)
        if np.any(inside):
            out[inside] = _additive_values(self.index, self.theta, x[inside]) - self.log_norm
        return float(out[0]) if single else out

    def pdf(self, x) -> np.ndarray:
        return np.exp(self.log_pdf(x))

    def additive_form(self):
        """Per-coordinate log components and the additive constant."""
        comps = [lambda t, i=i: self.log_component(i, t) for i in range(1, self.d + 1)]
        return comps, -self.log_norm

    def to_text(self) -> str:
        lines = [RECORD_TAG, " ".join(map(str, (self.d,) + self.index.degrees))]
        for i, blk in enumerate(self.index.blocks(self.theta), start=1):
            for k, v in enumerate(blk, start=1):
                lines.append(f"{i} {k} {float(v):.17g}")
        lines.append(f"psi {self.log_norm:.17g}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "SeriesDensity":
        lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
        if not lines or lines[0] != RECORD_TAG:
            raise ValueError(f"not a series record (expected header {RECORD_TAG!r})")
        head = [int(v) for v in lines[1].split()]
        d, degrees = head[0], head[1:]
        if len(degrees) != d:
            raise ValueError(f"header declares d={d} but lists {len(degrees)} degrees")
        index = ModelIndex(degrees)
        theta = np.full(index.size, np.nan)
        psi = None
        for ln in lines[2:]:
            parts = ln.split()
            if parts[0] == "psi":
                psi = float(parts[1])
                continue
            i, k, v = int(parts[0]), int(parts[1]), float(parts[2])
            theta[index.flat(i, k)] = v
        if psi is None or np.any(np.isnan(theta)):
            raise ValueError("incomplete series record")
        return cls(index, theta, psi)


def series_density(index: ModelIndex, theta, grid: QuadratureGrid | None = None) -> SeriesDensity:
    """Build a normalized :class:`SeriesDensity`, computing ``psi`` on ``grid``."""
    return SeriesDensity(index, np.asarray(theta, dtype=float), log_normalizer(index, theta, grid))


def coordinate_moments(density: SeriesDensity, degrees: Sequence[int],
                       grid: QuadratureGrid | None = None) -> list:
    """``E[phi_{i,k}(X_i)]`` for ``k = 1..degrees[i]`` under ``density``."""
    grid = grid or default_grid()
    state = evaluate_state(density.index, density.theta, grid, order=0)
    out = []
    for i, mi in enumerate(degrees, start=1):
        tab = basis_family(density.d, i, mi).table(grid.nodes)[:, 1:]
        out.append((grid.weights * state.marginals[i - 1]) @ tab)
    return out
