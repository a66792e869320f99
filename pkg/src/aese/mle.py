"""Maximum-likelihood fitting of additive exponential series densities."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .basis import basis_family
from .expmodel import ModelIndex, SeriesDensity, coordinate_moments, evaluate_state
from .quadrature import QuadratureGrid, default_grid

__all__ = [
    "SimplexSample",
    "FitResult",
    "empirical_moments",
    "fit",
    "fit_moments",
    "kl_between_series",
]

log = logging.getLogger(__name__)


class SampleError(ValueError):
    pass


@dataclass(frozen=True)
class SimplexSample:
    """Rows of ordered coordinates ``0 <= x_1 <= ... <= x_d <= 1``."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] < 2:
            raise SampleError(f"expected an (n, d) array with d >= 2, got shape {pts.shape}")
        bad_range = (pts < 0.0) | (pts > 1.0) | ~np.isfinite(pts)
        bad_order = np.diff(pts, axis=1) < 0.0
        bad = np.any(bad_range, axis=1) | np.any(bad_order, axis=1)
        if np.any(bad):
            row = int(np.argmax(bad))
            raise SampleError(f"row {row} is not an ordered point of [0,1]^d: {pts[row].tolist()}")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def __len__(self):
        return self.n

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"x{i}" for i in range(1, self.d + 1)])
            for row in self.points:
                w.writerow([repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path) -> "SimplexSample":
        with open(Path(path), newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows:
            raise SampleError(f"{path}: empty file")
        header = [h.strip() for h in rows[0]]
        expected = [f"x{i}" for i in range(1, len(header) + 1)]
        if header != expected:
            raise SampleError(f"{path}: header must be {','.join(expected)}, got {','.join(header)}")
        return cls(np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float))


def empirical_moments(sample: SimplexSample, index: ModelIndex) -> np.ndarray:
    """Sample means of ``phi_{i,k}(X_i)`` in flat ``(i, k)`` order."""
    if not isinstance(sample, SimplexSample):
        sample = SimplexSample(sample)
    if sample.d != index.d:
        raise ValueError(f"sample has d={sample.d}, model has d={index.d}")
    parts = []
    for i, mi in enumerate(index.degrees, start=1):
        tab = basis_family(index.d, i, mi).table(sample.points[:, i - 1])[:, 1:]
        parts.append(tab.mean(axis=0))
    return np.concatenate(parts)


@dataclass(frozen=True)
class FitResult:
    density: SeriesDensity
    residual: float
    iterations: int
    converged: bool
    moments: np.ndarray

    @property
    def theta(self) -> np.ndarray:
        return self.density.theta


def fit_moments(moments, index: ModelIndex, grid: QuadratureGrid | None = None,
                tol: float = 1e-8, max_iter: int = 200, theta0=None,
                step_tol: float = 1e-10) -> FitResult:
    """Maximize ``theta . moments - psi(theta)`` by damped Newton.

    The Newton direction solves ``Cov(theta) s = moments - A_m(theta)``; steps
    are halved until the Armijo condition (slope ``1e-4``) holds.  When the
    covariance is numerically singular the iteration falls back to the plain
    gradient for that step.  Stops once ``||moments - A_m(theta)||_inf < tol``
    and either the last Newton step moved ``theta`` by less than ``step_tol``
    or the residual has stopped shrinking (the rounding floor).  The step test
    matters when ``Cov`` is nearly singular: a residual below ``tol`` can then
    leave ``theta`` far from the solution.
    """
    grid = grid or default_grid()
    mu = np.asarray(moments, dtype=float)
    if mu.shape != (index.size,):
        raise ValueError(f"moments have shape {mu.shape}, expected ({index.size},)")
    theta = np.zeros(index.size) if theta0 is None else np.array(theta0, dtype=float)
    state = evaluate_state(index, theta, grid)
    obj = theta @ mu - state.log_norm
    it = 0
    converged = False
    last_move, last_res = np.inf, np.inf
    for it in range(1, max_iter + 1):
        grad = mu - state.gradient
        res = np.max(np.abs(grad))
        if res < tol and (res == 0 or last_move < step_tol or res > 0.5 * last_res):
            converged = True
            it -= 1
            break
        last_res = res
        try:
            chol = np.linalg.cholesky(state.hessian)
            step = np.linalg.solve(chol.T, np.linalg.solve(chol, grad))
        except np.linalg.LinAlgError:
            log.debug("singular covariance at iteration %d; gradient step", it)
            step = grad
        slope = grad @ step
        t = 1.0
        accepted = False
        # below this the predicted gain is lost in the rounding of obj, and
        # the full step is judged by the residual instead
        flat = slope <= 1e-10 * max(1.0, abs(obj))
        for _ in range(0 if flat else 60):
            cand = theta + t * step
            try:
                cstate = evaluate_state(index, cand, grid, order=0)
            except (FloatingPointError, ValueError):
                t *= 0.5
                continue
            cobj = cand @ mu - cstate.log_norm
            if np.isfinite(cobj) and cobj >= obj + 1e-4 * t * slope:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            # objective is flat to rounding; accept a full step only if it
            # shrinks the moment residual
            cand = theta + step
            cstate = evaluate_state(index, cand, grid, order=1)
            if np.max(np.abs(mu - cstate.gradient)) < res:
                last_move = np.max(np.abs(step))
                theta = cand
                state = evaluate_state(index, theta, grid)
                obj = theta @ mu - state.log_norm
                continue
            break
        last_move = t * np.max(np.abs(step))
        theta = cand
        state = evaluate_state(index, theta, grid)
        obj = theta @ mu - state.log_norm
    residual = float(np.max(np.abs(mu - state.gradient)))
    converged = converged or residual < tol
    density = SeriesDensity(index, theta, state.log_norm)
    if not converged:
        log.warning("fit for m=%s did not converge (residual %.3g)", index, residual)
    return FitResult(density, residual, it, converged, mu)


def fit(sample: SimplexSample, index: ModelIndex, grid: QuadratureGrid | None = None,
        tol: float = 1e-8, max_iter: int = 200) -> FitResult:
    """Maximum-likelihood estimate of ``f_theta`` from an ordered sample."""
    if not isinstance(sample, SimplexSample):
        sample = SimplexSample(sample)
    if sample.n < 2:
        raise SampleError("need at least two observations")
    return fit_moments(empirical_moments(sample, index), index, grid, tol, max_iter)


def kl_between_series(p: SeriesDensity, q: SeriesDensity,
                      grid: QuadratureGrid | None = None) -> float:
    """``KL(p || q)`` from the exponential-family identity.

    ``E_p[log p - log q] = E_p[theta_p . phi] - E_p[theta_q . phi] - psi_p + psi_q``.
    """
    if p.d != q.d:
        raise ValueError("densities live on simplices of different dimension")
    degrees = [max(a, b) for a, b in zip(p.index.degrees, q.index.degrees)]
    moms = coordinate_moments(p, degrees, grid)
    val = q.log_norm - p.log_norm
    for i in range(p.d):
        mp, mq = p.index.degrees[i], q.index.degrees[i]
        val += moms[i][:mp] @ p.index.blocks(p.theta)[i]
        val -= moms[i][:mq] @ q.index.blocks(q.theta)[i]
    return max(float(val), 0.0) if val > -1e-10 else float(val)
