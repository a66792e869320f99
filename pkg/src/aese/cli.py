"""Command-line entry point: ``aese {simulate,fit,aggregate,bench,eval}``."""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import bench
from .aggregate import AggregateDensity, build_candidates, fixed_candidates, select_weights, split_sample
from .expmodel import ModelIndex, SeriesDensity
from .metrics import integrated_squared_error, kl_divergence, l2_distance
from .mle import SimplexSample, fit
from .truncation import named_model, sample


def _index(text: str, d: int) -> ModelIndex:
    vals = [int(v) for v in text.split(",") if v.strip()]
    if len(vals) == 1:
        vals = vals * d
    if len(vals) != d:
        raise ValueError(f"--m lists {len(vals)} degrees for d={d} data")
    return ModelIndex(vals)


def _candidate_grid(text: str, n: int, d: int):
    """``1,2,3,4`` for fixed degrees, ``auto`` or ``auto:N`` for the formula."""
    text = text.strip().lower()
    if text.startswith("auto"):
        count = int(text.split(":", 1)[1]) if ":" in text else 4
        return build_candidates(n, d, count)
    return fixed_candidates(d, [int(v) for v in text.split(",") if v.strip()])


def load_density(path):
    """Read a series record or an aggregate record (one ending in ``lambda``)."""
    text = Path(path).read_text()
    if text.strip().splitlines()[-1].startswith("lambda"):
        return AggregateDensity.from_text(text)
    return SeriesDensity.from_text(text)


def cmd_simulate(args):
    model = named_model(args.model)
    s = sample(model, args.n, args.seed)
    s.to_csv(args.out)
    print(f"wrote {s.n} draws from {model.name} (alpha={model.alpha:.6g}) to {args.out}")


def cmd_fit(args):
    data = SimplexSample.from_csv(args.inp)
    res = fit(data, _index(args.m, data.d))
    Path(args.out).write_text(res.density.to_text())
    flag = "" if res.converged else " (NOT converged)"
    print(f"m={res.density.index} residual={res.residual:.3g} iterations={res.iterations}{flag}")


def cmd_aggregate(args):
    data = SimplexSample.from_csv(args.inp)
    part1, part2 = split_sample(data, args.ce, args.seed)
    grid = _candidate_grid(args.grid, data.n, data.d)
    fits = [fit(part1, idx) for idx in grid.indices]
    agg = select_weights([f.density for f in fits], part2)
    Path(args.out).write_text(agg.to_text())
    w = ", ".join(f"m={v}: {x:.4f}" for v, x in zip(grid.degrees, agg.weights))
    print(f"weights {w}; H={agg.criterion:.6g}")


def cmd_bench(args):
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    specs = bench.load_specs(args.spec)
    if args.workers is not None:
        specs = [replace(s, workers=args.workers) for s in specs]
    records, failures = [], []
    for spec in specs:
        model_dir = out / "models" if args.keep_models else None
        records += bench.run_experiment(spec, failures, model_dir)
        if spec.density_grid > 0 and spec.truth().d == 2:
            surf = bench.density_surface(spec)
            np.savetxt(out / f"surface_{spec.model}.csv", surf, delimiter=",",
                       header="x1,x2,f0,aese,kernel", comments="")
    if not records:
        raise RuntimeError("every replication failed")
    bench.write_records(records, out / "records.csv")
    summary = bench.summarize(records)
    bench.write_summary(summary, out / "summary.csv")
    for metric in ("kl", "l2", "ise"):
        (out / f"table_{metric}.txt").write_text(bench.format_table(summary, metric) + "\n")
    if failures:
        (out / "failures.csv").write_text("model,n,replication,message\n" + "".join(
            f"{m},{n},{r},\"{msg}\"\n" for m, n, r, msg in failures))
    print(bench.format_table(summary, "kl"))
    print(f"{len(records)} records, {len(failures)} failed replications -> {out}")


def cmd_eval(args):
    est = load_density(args.model)
    truth = named_model(args.truth)
    metric = {"kl": kl_divergence, "l2": l2_distance, "ise": integrated_squared_error}[args.metric]
    print(f"{metric(truth, est):.10g}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="aese", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="draw from a named truncation model")
    s.add_argument("--model", required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("fit", help="maximum-likelihood series fit")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--m", required=True, help="degrees, e.g. 3,3 (a single value is repeated)")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_fit)

    s = sub.add_parser("aggregate", help="split, fit candidates and aggregate")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--grid", default="1,2,3,4", help="degrees like 1,2,3,4, or auto[:N]")
    s.add_argument("--ce", type=float, default=0.8)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_aggregate)

    s = sub.add_parser("bench", help="run a replicated experiment spec")
    s.add_argument("--spec", required=True)
    s.add_argument("--out-dir", required=True)
    s.add_argument("--workers", type=int, default=None)
    s.add_argument("--keep-models", action="store_true", help="save every fitted aggregate")
    s.set_defaults(func=cmd_bench)

    s = sub.add_parser("eval", help="score a saved density against a named model")
    s.add_argument("--model", required=True)
    s.add_argument("--truth", required=True)
    s.add_argument("--metric", choices=("kl", "l2", "ise"), default="kl")
    s.set_defaults(func=cmd_eval)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"aese {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
