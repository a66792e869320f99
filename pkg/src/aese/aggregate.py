"""Convex aggregation of fitted log-densities.

Candidates ``f_m = exp(l_m - psi_m)`` fitted on one part of the sample are
blended as ``f_lambda = exp(sum_m lambda_m l_m - psi_lambda)`` with weights in
the probability simplex, chosen on the other part by maximizing

    H(lambda) = mean_j sum_m lambda_m l_m(X_j) - psi_lambda - pen(lambda) / 2

with ``pen(lambda) = sum_m lambda_m KL(f_lambda || f_m)``.  Because the
cross-entropy terms cancel, ``pen(lambda) = sum_m lambda_m psi_m - psi_lambda``,
so ``H`` is a linear function minus ``psi_lambda / 2`` and hence concave.
Every blend is itself a series density in the coordinatewise-largest index,
which is how ``psi_lambda`` and its gradient are computed.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from math import floor

import numpy as np

from .expmodel import ModelIndex, SeriesDensity, evaluate_state
from .mle import SampleError, SimplexSample
from .quadrature import QuadratureGrid, default_grid

__all__ = [
    "CandidateGrid",
    "AggregateDensity",
    "build_candidates",
    "fixed_candidates",
    "split_sample",
    "aggregate_log_norm",
    "penalty",
    "criterion_H",
    "select_weights",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CandidateGrid:
    """Candidate indices ``m = (v, ..., v)`` for the listed degrees ``v``."""

    d: int
    degrees: tuple

    def __post_init__(self):
        if not self.degrees or any(v < 1 for v in self.degrees):
            raise ValueError(f"candidate degrees must be positive, got {self.degrees}")

    @property
    def indices(self) -> list:
        return [ModelIndex.uniform(self.d, v) for v in self.degrees]

    def __len__(self):
        return len(self.degrees)


def _floor_root(n: int, p: int) -> int:
    v = int(floor(n ** (1.0 / p)))
    while (v + 1) ** p <= n:
        v += 1
    while v > 1 and v ** p > n:
        v -= 1
    return max(v, 1)


def build_candidates(n: int, d: int, n_candidates: int) -> CandidateGrid:
    """Degrees ``floor(n^(1/(2(d+j)+1)))`` for ``j = 1..N_n``, deduplicated.

    The result is ordered from the largest degree (``j = 1``) down.
    """
    if n_candidates < 1:
        raise ValueError("need at least one candidate")
    seen = []
    for j in range(1, n_candidates + 1):
        v = _floor_root(n, 2 * (d + j) + 1)
        if v not in seen:
            seen.append(v)
    return CandidateGrid(d, tuple(seen))


def fixed_candidates(d: int, degrees) -> CandidateGrid:
    """Explicit list of uniform degrees, e.g. ``(1, 2, 3, 4)``."""
    return CandidateGrid(d, tuple(dict.fromkeys(int(v) for v in degrees)))


def split_sample(sample: SimplexSample, ce: float, seed=None):
    """Shuffle once with ``seed`` and cut after ``floor(ce * n)`` rows."""
    if not 0 < ce < 1:
        raise ValueError(f"split fraction must lie in (0, 1), got {ce}")
    n = sample.n
    n1 = int(floor(ce * n))
    if min(n1, n - n1) < 2:
        raise SampleError(f"split of n={n} at {ce} leaves a part with fewer than 2 rows")
    perm = np.random.default_rng(seed).permutation(n)
    pts = sample.points[perm]
    return SimplexSample(pts[:n1]), SimplexSample(pts[n1:])


def _common_index(candidates) -> ModelIndex:
    d = candidates[0].d
    if any(c.d != d for c in candidates):
        raise ValueError("candidates have different dimensions")
    return ModelIndex([max(c.index.degrees[i] for c in candidates) for i in range(d)])


def _theta_matrix(candidates, index: ModelIndex) -> np.ndarray:
    return np.stack([c.index.pad(c.theta, index) for c in candidates])


def _check_weights(lam, k: int) -> np.ndarray:
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (k,):
        raise ValueError(f"expected {k} weights, got shape {lam.shape}")
    if np.any(lam < -1e-12) or abs(lam.sum() - 1.0) > 1e-9:
        raise ValueError("weights must lie in the probability simplex")
    return lam


@dataclass(frozen=True)
class AggregateDensity:
    """``exp(sum_m lambda_m l_m - psi_lambda)`` on the simplex."""

    candidates: tuple
    weights: np.ndarray
    log_norm: float
    criterion: float = float("nan")
    iterations: int = 0
    converged: bool = True
    blended: SeriesDensity = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "candidates", tuple(self.candidates))
        index = _common_index(self.candidates)
        theta = w @ _theta_matrix(self.candidates, index)
        object.__setattr__(self, "blended", SeriesDensity(index, theta, self.log_norm))

    @property
    def d(self) -> int:
        return self.candidates[0].d

    def log_pdf(self, x):
        return self.blended.log_pdf(x)

    def pdf(self, x):
        return self.blended.pdf(x)

    def additive_form(self):
        return self.blended.additive_form()

    def to_text(self) -> str:
        body = "".join(c.to_text() for c in self.candidates)
        return body + "lambda " + " ".join(f"{v:.17g}" for v in self.weights) + "\n"

    @classmethod
    def from_text(cls, text: str, grid: QuadratureGrid | None = None) -> "AggregateDensity":
        lines = text.strip().splitlines()
        if not lines or not lines[-1].startswith("lambda"):
            raise ValueError("aggregate record must end with a 'lambda' line")
        weights = np.array([float(v) for v in lines[-1].split()[1:]])
        chunks, cur = [], []
        for ln in lines[:-1]:
            if ln.strip() == "aese v1" and cur:
                chunks.append("\n".join(cur))
                cur = []
            cur.append(ln)
        if cur:
            chunks.append("\n".join(cur))
        cands = [SeriesDensity.from_text(c) for c in chunks]
        if len(cands) != weights.size:
            raise ValueError(f"{len(cands)} candidates but {weights.size} weights")
        return cls(cands, weights, aggregate_log_norm(cands, weights, grid))


def aggregate_log_norm(candidates, lam, grid: QuadratureGrid | None = None) -> float:
    """``psi_lambda = log int_simplex exp(sum_m lambda_m l_m)``."""
    lam = _check_weights(lam, len(candidates))
    index = _common_index(candidates)
    theta = lam @ _theta_matrix(candidates, index)
    return evaluate_state(index, theta, grid, order=0).log_norm


def penalty(candidates, lam, grid: QuadratureGrid | None = None) -> float:
    """``sum_m lambda_m KL(f_lambda || f_m) = sum_m lambda_m psi_m - psi_lambda``."""
    lam = _check_weights(lam, len(candidates))
    psis = np.array([c.log_norm for c in candidates])
    val = float(lam @ psis - aggregate_log_norm(candidates, lam, grid))
    if val < -1e-10:
        raise FloatingPointError(f"negative penalty {val:.3g}; quadrature is under-resolved")
    return max(val, 0.0)


class _Criterion:
    """``H`` and its gradient for fixed candidates and validation sample."""

    def __init__(self, candidates, part2: SimplexSample, grid: QuadratureGrid):
        self.candidates = list(candidates)
        self.grid = grid
        self.index = _common_index(self.candidates)
        self.thetas = _theta_matrix(self.candidates, self.index)
        self.psis = np.array([c.log_norm for c in self.candidates])
        # mean unnormalized log-density of each candidate on the validation part
        self.loglik = np.array([np.mean(c.log_pdf(part2.points)) + c.log_norm
                                for c in self.candidates])
        self.linear = self.loglik - 0.5 * self.psis

    def value(self, lam) -> float:
        st = evaluate_state(self.index, lam @ self.thetas, self.grid, order=0)
        return float(lam @ self.linear - 0.5 * st.log_norm)

    def value_and_grad(self, lam):
        st = evaluate_state(self.index, lam @ self.thetas, self.grid, order=1)
        val = float(lam @ self.linear - 0.5 * st.log_norm)
        grad = self.linear - 0.5 * self.thetas @ st.gradient
        return val, grad, st.log_norm


def criterion_H(candidates, lam, part2: SimplexSample, grid: QuadratureGrid | None = None) -> float:
    """Penalized validation log-likelihood of the blend with weights ``lam``."""
    lam = _check_weights(lam, len(candidates))
    if part2.n < 1:
        raise SampleError("validation part is empty")
    return _Criterion(candidates, part2, grid or default_grid()).value(lam)


def select_weights(candidates, part2: SimplexSample, grid: QuadratureGrid | None = None,
                   step: float = 0.5, tol: float = 1e-10, max_iter: int = 5000,
                   weight_tol: float = 1e-9) -> AggregateDensity:
    """Maximize ``H`` over the simplex by entropic mirror ascent.

    ``lambda <- lambda * exp(step * grad H) / Z`` starting from uniform weights.
    A step that fails to increase ``H`` is retried at half the size; an
    accepted step lets the next one grow by half again, which keeps the
    iteration count low when ``H`` is nearly flat.  Iteration stops once the
    Frank-Wolfe gap ``max_m grad_m - lambda . grad`` (an upper bound on the
    distance to the optimal value, by concavity) drops below ``tol``, or an
    accepted step moves no weight by more than ``weight_tol``.  The returned
    weights are never worse than the best single candidate.
    """
    candidates = list(candidates)
    if not candidates:
        raise ValueError("need at least one candidate")
    grid = grid or default_grid()
    crit = _Criterion(candidates, part2, grid)
    k = len(candidates)
    lam = np.full(k, 1.0 / k)
    val, grad, psi = crit.value_and_grad(lam)
    converged = k == 1
    it = 0
    while not converged and it < max_iter:
        if grad.max() - lam @ grad < tol:
            converged = True
            break
        it += 1
        logits = np.log(np.maximum(lam, 1e-300)) + step * grad
        logits -= logits.max()
        new = np.exp(logits)
        new /= new.sum()
        nval, ngrad, npsi = crit.value_and_grad(new)
        if not nval >= val:
            step *= 0.5
            if step < 1e-14:
                # no ascent direction left at working precision
                converged = True
            continue
        change = np.max(np.abs(new - lam))
        lam, val, grad, psi = new, nval, ngrad, npsi
        if change < weight_tol:
            converged = True
        step *= 1.5
    if not converged:
        log.warning("weight selection stopped after %d iterations (gap %.3g)",
                    it, grad.max() - lam @ grad)
    for m in range(k):
        vertex = np.eye(k)[m]
        vval = crit.value(vertex)
        if vval > val:
            lam, val = vertex, vval
            psi = evaluate_state(crit.index, vertex @ crit.thetas, grid, order=0).log_norm
    return AggregateDensity(candidates, lam, psi, val, it, converged)
