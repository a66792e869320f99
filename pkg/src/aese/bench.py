"""Replicated simulation experiments: AESE aggregate versus the kernel baseline.

An experiment is described by a flat ``key = value`` text file (``#`` starts a
comment, lists are comma-separated)::

    model = beta, gumbel, normal_mix   # named models, or one custom name
    marginal.1 = Beta(1,6,-1,2)        # custom marginals (single model only)
    marginal.2 = Beta(3,5,-1,2)
    sizes = 200, 500, 1000
    replications = 20
    ce = 0.8
    candidates = 1, 2, 3, 4            # fixed degrees, or "auto"
    n_candidates = 4                   # N_n for the "auto" policy
    seed = 2024
    quad_panels = 64                   # one-dimensional normalization grid
    score_panels = 16                  # collapsed scoring grid (d = 2)
    estimators = aese, kernel
    score_candidates = false           # also score each candidate fit
    workers = 1
    density_grid = 41                  # points per axis of the surface CSV, 0 = off

Every replication draws from its own seed stream, derived from ``seed``,
the model name, ``n`` and the replication index, so records do not depend on
the order (or the process) in which replications run.
"""
from __future__ import annotations

import csv
import logging
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .aggregate import build_candidates, fixed_candidates, select_weights, split_sample
from .metrics import kernel_fit, score
from .mle import fit
from .quadrature import QuadratureGrid, simplex_grid
from .truncation import MODELS, TruncationModel, build_model, parse_marginal, sample

__all__ = [
    "ExperimentSpec",
    "ReplicationRecord",
    "SummaryRow",
    "parse_spec",
    "load_specs",
    "run_experiment",
    "summarize",
    "pivot_table",
    "format_table",
    "rate_diagnostic",
    "density_surface",
    "write_records",
    "read_records",
    "write_summary",
]

log = logging.getLogger(__name__)

ESTIMATORS = ("aese", "kernel")


@dataclass(frozen=True)
class ExperimentSpec:
    """One model, a list of sample sizes and the estimation settings."""

    model: str
    marginals: tuple = ()
    sizes: tuple = (200, 500, 1000)
    replications: int = 20
    ce: float = 0.8
    candidates: tuple | str = (1, 2, 3, 4)
    n_candidates: int = 4
    seed: int = 2024
    quad_panels: int = 64
    score_panels: int = 16
    estimators: tuple = ESTIMATORS
    score_candidates: bool = False
    workers: int = 1
    density_grid: int = 41

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if not self.sizes or min(self.sizes) < 4:
            raise ValueError(f"sample sizes must be >= 4, got {self.sizes}")
        if not 0 < self.ce < 1:
            raise ValueError(f"ce must lie in (0, 1), got {self.ce}")
        bad = set(self.estimators) - set(ESTIMATORS)
        if bad or not self.estimators:
            raise ValueError(f"unknown estimators {sorted(bad)}; choose from {ESTIMATORS}")
        if self.candidates != "auto" and not self.candidates:
            raise ValueError("empty candidate list")
        if not self.marginals and self.model not in MODELS:
            raise ValueError(f"unknown model {self.model!r} and no marginals given")

    def truth(self) -> TruncationModel:
        specs = self.marginals or MODELS[self.model]
        return build_model(specs, QuadratureGrid(self.quad_panels, graded=True), self.model)


@dataclass(frozen=True)
class ReplicationRecord:
    model: str
    n: int
    replication: int
    estimator: str
    kl: float
    l2: float
    fit_seconds: float
    converged: bool = True
    weights: str = ""

    @property
    def ise(self) -> float:
        """Integrated squared error, the square of ``l2``."""
        return self.l2 ** 2


_INT_KEYS = {"replications", "n_candidates", "seed", "quad_panels", "score_panels",
             "workers", "density_grid"}


def _as_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _split_list(text: str) -> list:
    # commas inside parentheses belong to a marginal, not to the list
    out, depth, cur = [], 0, ""
    for ch in text:
        depth += (ch == "(") - (ch == ")")
        if ch == "," and depth == 0:
            out.append(cur.strip())
            cur = ""
        else:
            cur += ch
    if cur.strip():
        out.append(cur.strip())
    return out


def parse_spec(text: str) -> list:
    """Parse spec-file text into one :class:`ExperimentSpec` per model."""
    raw, marg = {}, {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key.startswith("marginal."):
            marg[int(key.split(".", 1)[1])] = parse_marginal(value)
        else:
            raw[key] = value
    known = {f.name for f in fields(ExperimentSpec)} - {"marginals"}
    unknown = set(raw) - known
    if unknown:
        raise ValueError(f"unknown spec keys: {sorted(unknown)}")
    if "model" not in raw:
        raise ValueError("spec needs a 'model' entry")
    kw = {}
    for key, value in raw.items():
        if key == "model":
            continue
        if key in _INT_KEYS:
            kw[key] = int(value)
        elif key == "ce":
            kw[key] = float(value)
        elif key == "sizes":
            kw[key] = tuple(int(v) for v in _split_list(value))
        elif key == "estimators":
            kw[key] = tuple(v.lower() for v in _split_list(value))
        elif key == "score_candidates":
            kw[key] = _as_bool(value)
        elif key == "candidates":
            kw[key] = "auto" if value.strip().lower() == "auto" else tuple(
                int(v) for v in _split_list(value))
    models = _split_list(raw["model"])
    if marg:
        if len(models) != 1:
            raise ValueError("custom marginals need exactly one model name")
        if sorted(marg) != list(range(1, len(marg) + 1)):
            raise ValueError(f"marginal indices must be 1..d, got {sorted(marg)}")
        kw["marginals"] = tuple(marg[i] for i in sorted(marg))
    return [ExperimentSpec(model=m, **kw) for m in models]


def load_specs(path) -> list:
    return parse_spec(Path(path).read_text())


def _seed_for(spec: ExperimentSpec, n: int, rep: int) -> np.random.SeedSequence:
    tag = zlib.crc32(spec.model.encode())
    return np.random.SeedSequence(spec.seed, spawn_key=(tag, n, rep))


def _candidate_degrees(spec: ExperimentSpec, n: int, d: int):
    if spec.candidates == "auto":
        return build_candidates(n, d, spec.n_candidates)
    return fixed_candidates(d, spec.candidates)


def _weights_text(w) -> str:
    return ";".join(f"{v:.6g}" for v in w)


def _replicate(spec: ExperimentSpec, truth: TruncationModel, n: int, rep: int, model_dir=None):
    """All records of one replication; exceptions propagate to the caller."""
    sample_seed, split_seed = _seed_for(spec, n, rep).generate_state(2)
    data = sample(truth, n, int(sample_seed))
    line = QuadratureGrid(spec.quad_panels, graded=True)
    sgrid = simplex_grid(truth.d, spec.score_panels) if truth.d == 2 else None
    out = []
    if "aese" in spec.estimators:
        t0 = time.perf_counter()
        part1, part2 = split_sample(data, spec.ce, int(split_seed))
        grid = _candidate_degrees(spec, n, truth.d)
        fits = [fit(part1, idx, line) for idx in grid.indices]
        agg = select_weights([f.density for f in fits], part2, line)
        elapsed = time.perf_counter() - t0
        kl, l2 = score(truth, agg, sgrid, line)
        ok = agg.converged and all(f.converged for f in fits)
        out.append(ReplicationRecord(spec.model, n, rep, "aese", kl, l2, elapsed, ok,
                                     _weights_text(agg.weights)))
        if spec.score_candidates:
            for v, f in zip(grid.degrees, fits):
                kl, l2 = score(truth, f.density, sgrid, line)
                out.append(ReplicationRecord(spec.model, n, rep, f"series_m{v}", kl, l2,
                                             float("nan"), f.converged))
        if model_dir is not None:
            path = Path(model_dir) / f"{spec.model}_n{n}_r{rep}.aese"
            path.write_text(agg.to_text())
    if "kernel" in spec.estimators:
        t0 = time.perf_counter()
        ker = kernel_fit(data, grid=line)
        elapsed = time.perf_counter() - t0
        kl, l2 = score(truth, ker, sgrid, line)
        out.append(ReplicationRecord(spec.model, n, rep, "kernel", kl, l2, elapsed))
    return out


def _task(args):
    spec, n, rep, model_dir = args
    truth = spec.truth()
    try:
        return n, rep, _replicate(spec, truth, n, rep, model_dir), None
    except Exception as exc:  # one bad replication must not sink the batch
        return n, rep, [], f"{type(exc).__name__}: {exc}"


def run_experiment(spec: ExperimentSpec, failures: list | None = None,
                   model_dir=None) -> list:
    """Run every ``(n, replication)`` cell of ``spec``.

    Failed replications are logged, appended to ``failures`` as
    ``(model, n, replication, message)`` and skipped.  With ``model_dir`` the
    fitted aggregates are written there so scores can be recomputed later.
    """
    if model_dir is not None:
        Path(model_dir).mkdir(parents=True, exist_ok=True)
    tasks = [(spec, n, rep, model_dir) for n in spec.sizes for rep in range(spec.replications)]
    if spec.workers > 1:
        with ProcessPoolExecutor(spec.workers) as pool:
            results = list(pool.map(_task, tasks))
    else:
        results = [_task(t) for t in tasks]
    records = []
    for n, rep, recs, err in sorted(results, key=lambda r: (r[0], r[1])):
        if err is not None:
            log.warning("%s n=%d replication %d failed: %s", spec.model, n, rep, err)
            if failures is not None:
                failures.append((spec.model, n, rep, err))
            continue
        records.extend(recs)
    return records


@dataclass(frozen=True)
class SummaryRow:
    model: str
    n: int
    estimator: str
    count: int
    kl_mean: float
    kl_var: float
    l2_mean: float
    l2_var: float
    ise_mean: float
    ise_var: float


def _mean_var(vals) -> tuple:
    a = np.asarray(vals, dtype=float)
    return float(a.mean()), float(a.var(ddof=1)) if a.size > 1 else 0.0


def summarize(records) -> list:
    """Mean and sample variance of each metric per ``(model, n, estimator)``."""
    records = list(records)
    if not records:
        raise ValueError("nothing to summarize")
    groups = {}
    for r in records:
        groups.setdefault((r.model, r.n, r.estimator), []).append(r)
    rows = []
    for (model, n, est), rs in sorted(groups.items()):
        km, kv = _mean_var([r.kl for r in rs])
        lm, lv = _mean_var([r.l2 for r in rs])
        im, iv = _mean_var([r.ise for r in rs])
        rows.append(SummaryRow(model, n, est, len(rs), km, kv, lm, lv, im, iv))
    return rows


def pivot_table(summary, metric: str = "kl", estimators=ESTIMATORS):
    """Rows per model, columns ``(n, estimator)`` as in the published tables.

    Returns ``(columns, rows)`` where each row is ``(model, [(mean, var), ...])``.
    """
    if metric not in ("kl", "l2", "ise"):
        raise ValueError(f"unknown metric {metric!r}")
    cells = {(r.model, r.n, r.estimator): (getattr(r, f"{metric}_mean"), getattr(r, f"{metric}_var"))
             for r in summary}
    sizes = sorted({r.n for r in summary})
    models = list(dict.fromkeys(r.model for r in summary))
    columns = [(n, e) for n in sizes for e in estimators]
    rows = [(m, [cells.get((m, n, e), (float("nan"), float("nan"))) for n, e in columns])
            for m in models]
    return columns, rows


def format_table(summary, metric: str = "kl", estimators=ESTIMATORS) -> str:
    """Plain-text table, means with variances in parentheses."""
    columns, rows = pivot_table(summary, metric, estimators)
    head = ["model"] + [f"n={n} {e}" for n, e in columns]
    body = [[m] + [f"{mu:.4f} ({v:.2e})" for mu, v in cells] for m, cells in rows]
    widths = [max(len(r[i]) for r in [head] + body) for i in range(len(head))]
    fmt = lambda r: "  ".join(c.ljust(w) for c, w in zip(r, widths))
    return "\n".join([fmt(head)] + [fmt(r) for r in body])


def rate_diagnostic(records, estimator: str, model: str | None = None,
                    metric: str = "kl") -> float:
    """Least-squares slope of ``log(mean metric)`` against ``log(n)``."""
    rows = [r for r in summarize(records)
            if r.estimator == estimator and (model is None or r.model == model)]
    if model is None and len({r.model for r in rows}) > 1:
        raise ValueError("records mix several models; pass model=")
    if len({r.n for r in rows}) < 3:
        raise ValueError("need at least three distinct sample sizes")
    x = np.log([r.n for r in rows])
    y = np.log([getattr(r, f"{metric}_mean") for r in rows])
    return float(np.polyfit(x, y, 1)[0])


def density_surface(spec: ExperimentSpec, n: int | None = None, resolution: int | None = None):
    """Grid ``(x1, x2, f0, aese, kernel)`` from replication 0 at size ``n``.

    Points off the simplex carry density 0.  Only ``d = 2`` is supported.
    """
    truth = spec.truth()
    if truth.d != 2:
        raise ValueError("density surfaces are only produced for d = 2")
    n = n or max(spec.sizes)
    res = resolution or spec.density_grid
    line = QuadratureGrid(spec.quad_panels, graded=True)
    sample_seed, split_seed = _seed_for(spec, n, 0).generate_state(2)
    data = sample(truth, n, int(sample_seed))
    part1, part2 = split_sample(data, spec.ce, int(split_seed))
    grid = _candidate_degrees(spec, n, 2)
    agg = select_weights([fit(part1, idx, line).density for idx in grid.indices], part2, line)
    ker = kernel_fit(data, grid=line)
    t = np.linspace(0.0, 1.0, res)
    x1, x2 = (a.ravel() for a in np.meshgrid(t, t, indexing="ij"))
    pts = np.column_stack([x1, x2])
    return np.column_stack([x1, x2, truth.pdf(pts), agg.pdf(pts), ker.pdf(pts)])


def write_records(records, path) -> None:
    names = [f.name for f in fields(ReplicationRecord)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names + ["ise"])
        for r in records:
            row = asdict(r)
            w.writerow([_fmt(row[k]) for k in names] + [_fmt(r.ise)])


def read_records(path) -> list:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(ReplicationRecord(
                row["model"], int(row["n"]), int(row["replication"]), row["estimator"],
                float(row["kl"]), float(row["l2"]), float(row["fit_seconds"]),
                row["converged"] == "True", row["weights"]))
    return out


def write_summary(summary, path) -> None:
    names = [f.name for f in fields(SummaryRow)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        for r in summary:
            w.writerow([_fmt(getattr(r, k)) for k in names])


def _fmt(v):
    return repr(v) if isinstance(v, float) else v
