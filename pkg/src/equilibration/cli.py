"""Command-line runner: ``equilibration run|verify <config>`` and ``equilibration cache``."""

from __future__ import annotations

import argparse
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from . import bounds as B
from .cache import DecompositionCache, cache_key, resolve_cache_dir
from .config import ConfigError, RunConfig, TimeGrid, parse_config
from .dynamics import (
    circular_variance,
    cloud_grid,
    cloud_snapshot,
    envelope_tau,
    evolve_expectation,
    fit_gaussian_tau,
    fluctuation_data,
    gaussian_envelope_prediction,
)
from .emit import BOUND_HEADER, Emitter, bound_rows
from .ensembles import run_experiment
from .model import ModelError, build_hamiltonian, build_observable, build_state
from .spectral import diagonalize, dos_diagnostics, matrix_element_decay
from .dynamics import effective_dimension
from .verification import measure, verify

log = logging.getLogger("equilibration")

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_USAGE = 2


@dataclass
class Artifact:
    kind: str  # "csv" | "json" | "figure"
    name: str
    payload: tuple
    inputs: dict = field(default_factory=dict)


@dataclass
class TaskOutput:
    artifacts: list[Artifact]
    reports: list[B.BoundReport] = field(default_factory=list)
    summary: dict = field(default_factory=dict)


@dataclass
class Context:
    config: RunConfig
    dec: object = None
    state: object = None
    A: object = None
    fd: object = None
    figures: bool = False
    threads: int = 1


# ---------------------------------------------------------------------------
# tasks


def _times(spec) -> np.ndarray:
    if isinstance(spec, TimeGrid):
        return np.linspace(spec.start, spec.stop, spec.num)
    return np.asarray(spec, dtype=float)


def task_spectrum(ctx: Context, body) -> TaskOutput:
    dec, state, fd = ctx.dec, ctx.state, ctx.fd
    p = dec.populations(state)
    d_eff, ipr = effective_dimension(state, dec)
    dos = dos_diagnostics(dec, state)
    cat = fd.catalog
    rows = [[k, dec.energies[k], dec.multiplicities[k], p[k]] for k in range(dec.d_E)]
    pos = fd.distinct_gaps > 0
    gap_rows = [[G, m, z.real, z.imag] for G, m, z in
                zip(fd.distinct_gaps[pos], cat.gap_multiplicities[pos], fd.z[pos])]
    summary = {"d_T": dec.d_T, "d_E": dec.d_E, "g": cat.g, "eps_min": cat.eps_min, "gap_count": cat.gap_count,
               "d_eff": d_eff, "ipr": ipr, "dos_mean": dos.mean, "dos_sigma": dos.sigma,
               "dos_ks_distance": dos.ks_distance, "sigma_G": fd.sigma_G, "Q": fd.Q,
               "equilibrium_value": fd.equilibrium_value, "initial_value": fd.initial_value,
               "notes": list(cat.notes)}
    arts = [Artifact("csv", "spectrum.csv", (("level", "energy", "multiplicity", "population"), rows)),
            Artifact("csv", "gaps.csv", (("gap", "multiplicity", "re_z", "im_z"), gap_rows))]
    if body.matrix_elements:
        med = matrix_element_decay(dec.to_eigenbasis(ctx.A), dec)
        summary["matrix_elements"] = {"alpha": med.alpha, "R": med.R, "violation_fraction": med.violation_fraction,
                                      "ls_violation_fraction": med.ls_violation_fraction, "trivial": med.trivial}
    arts.append(Artifact("json", "summary.json", (summary,)))
    return TaskOutput(arts, summary=summary)


def task_dynamics(ctx: Context, body) -> TaskOutput:
    t = _times(body.times)
    expect = evolve_expectation(ctx.dec, ctx.state, ctx.A, t)
    dA = ctx.fd.delta_A(t)
    tau = envelope_tau(ctx.fd)
    env = gaussian_envelope_prediction(ctx.fd.delta_A0, tau, t) if math.isfinite(tau) else np.zeros_like(t)
    try:
        tau_fit = fit_gaussian_tau(t, dA) if t.size >= 3 else float("nan")
    except ValueError:
        tau_fit = float("nan")
    summary = {"delta_A0": ctx.fd.delta_A0, "equilibrium_value": ctx.fd.equilibrium_value,
               "tau_envelope": tau, "tau_fit": tau_fit}
    arts = [Artifact("csv", "decay.csv", (("t", "expectation", "delta_A", "envelope_prediction"),
                                          list(zip(t, expect, dA, env)))),
            Artifact("json", "summary.json", (summary,))]
    if ctx.figures:
        from .plotting import decay_figure
        arts.append(Artifact("figure", "decay.png", (decay_figure(t, dA, env),)))
    return TaskOutput(arts, summary=summary)


def task_cloud(ctx: Context, body) -> TaskOutput:
    grid = cloud_grid(ctx.fd, body.T)
    snaps = [cloud_snapshot(ctx.fd, body.T, t, grid) for t in body.times]
    arts, index = [], []
    for i, s in enumerate(snaps):
        name = f"cloud_{i}.csv"
        arts.append(Artifact("csv", name, (("t", "G", "re_z", "im_z"),
                                           [[s.t, g, z.real, z.imag] for g, z in zip(s.grid, s.points)]),
                             {"t": s.t, "T": body.T}))
        index.append([i, s.t, body.T, name, s.total.real, s.total.imag, circular_variance(s.points)])
    arts.append(Artifact("csv", "cloud_index.csv",
                         (("index", "t", "T", "file", "sum_re", "sum_im", "circular_variance"), index)))
    if ctx.figures:
        from .plotting import cloud_figure
        arts.append(Artifact("figure", "clouds.png", (cloud_figure(snaps),)))
    return TaskOutput(arts)


def task_bounds(ctx: Context, body) -> TaskOutput:
    tol = ctx.config.tolerances
    m = measure(ctx.dec, ctx.state, ctx.A, tol.gap, body.infinite_T, body.infinite_samples)
    reports, _ = verify(ctx.dec, ctx.state, ctx.A, body.T, tol.gap, tol.pair_budget, body.rhs_scale,
                        measurements=m)
    return _report_artifacts(ctx, reports, {"d_eff": m.d_eff, "g": m.g, "eps_min": m.eps_min, "d_E": m.d_E})


def _report_artifacts(ctx: Context, reports, summary) -> TaskOutput:
    arts = [Artifact("csv", "bounds.csv", (BOUND_HEADER, bound_rows(reports))),
            Artifact("json", "bounds.json", ({"reports": [r.to_dict() for r in reports], "summary": summary},))]
    if ctx.figures and reports:
        from .plotting import bounds_figure
        arts.append(Artifact("figure", "bounds.png", (bounds_figure(reports),)))
    return TaskOutput(arts, reports=reports, summary=summary)


def task_ensemble(ctx: Context, body, seed: int) -> TaskOutput:
    result, reports = run_experiment(body.kind, body.params, body.trials, seed, ctx.threads)
    axis_name, axis = next(iter(result.axis.items())) if result.axis else ("index", np.arange(np.size(result.mean)))
    mean = np.atleast_1d(result.mean)
    se = np.atleast_1d(result.std_error)
    arts = [Artifact("csv", f"ensemble_{body.kind}.csv", ((axis_name, "mean", "std_error"),
                                                          list(zip(axis, mean, se))), {"seed": seed}),
            Artifact("json", "ensemble.json", ({"result": result.to_dict(),
                                                "reports": [r.to_dict() for r in reports]},), {"seed": seed})]
    out = _report_artifacts(ctx, reports, {"kind": body.kind, "trials": body.trials, "seed": seed})
    out.artifacts[:0] = arts
    return out


# ---------------------------------------------------------------------------
# orchestration


def _task_seed(master: int, index: int) -> int:
    return int(np.random.SeedSequence([master, index]).generate_state(2, np.uint32).view(np.uint64)[0])


def execute(config: RunConfig, output_dir: Path, figures: bool = False, threads: int = 1,
            seed_override: int | None = None, created: str | None = None) -> tuple[list[B.BoundReport], Path]:
    """Run every task of ``config`` and write artifacts plus a manifest."""
    if seed_override is not None:
        config = config.model_copy(update={"seed": int(seed_override)})
    ctx = Context(config, figures=figures, threads=max(1, threads))
    emitter = Emitter(output_dir)
    extra = {}
    with threadpool_limits(1):
        if config.system is not None:
            chain = config.system.build()
            key = cache_key(chain, {"degeneracy": config.tolerances.degeneracy})
            cache = DecompositionCache(resolve_cache_dir(config.cache_dir))
            dec = cache.load(key)
            hit = dec is not None
            if dec is None:
                log.info("diagonalizing d=%d", chain.dim)
                dec = diagonalize(build_hamiltonian(chain), config.tolerances.degeneracy)
                cache.store(key, dec)
            else:
                log.info("loaded decomposition %s from cache", key)
            ctx.dec = dec
            ctx.state = build_state(config.state.build(), chain)
            ctx.A = build_observable(config.observable.build(chain.N), chain)
            ctx.fd = fluctuation_data(dec, ctx.state, ctx.A, config.tolerances.gap)
            extra["cache"] = {"key": key, "hit": hit}

        def run_task(i):
            task = config.tasks[i]
            if task.kind == "ensemble":
                explicit = task.ensemble.seed if seed_override is None else None
                seed = explicit if explicit is not None else _task_seed(config.seed, i)
                return task_ensemble(ctx, task.ensemble, seed)
            return {"spectrum": task_spectrum, "dynamics": task_dynamics, "cloud": task_cloud,
                    "bounds": task_bounds}[task.kind](ctx, task.body)

        indices = range(len(config.tasks))
        if ctx.threads > 1 and len(config.tasks) > 1:
            with ThreadPoolExecutor(max_workers=ctx.threads) as pool:
                outputs = list(pool.map(run_task, indices))
        else:
            outputs = [run_task(i) for i in indices]

    all_reports = []
    for i, (task, out) in enumerate(zip(config.tasks, outputs)):
        sub = f"{i:02d}_{task.kind}"
        (emitter.root / sub).mkdir(exist_ok=True)
        for art in out.artifacts:
            name = f"{sub}/{art.name}"
            inputs = dict(art.inputs, task=task.body.model_dump())
            if art.kind == "csv":
                emitter.csv(name, *art.payload, task=task.kind, inputs=inputs)
            elif art.kind == "json":
                emitter.json(name, art.payload[0], task=task.kind, inputs=inputs)
            else:
                emitter.figure(name, art.payload[0], task=task.kind, inputs=inputs)
        all_reports.extend(out.reports)
    if config.tasks:
        emitter.column_docs()
    violations = [r for r in all_reports if r.bound_name in B.THEOREM_BOUNDS and not r.satisfied]
    extra["violations"] = len(violations)
    manifest = emitter.manifest(config.model_dump(mode="json"), __version__, extra, created)
    return all_reports, manifest


def _cmd_run(args, strict: bool) -> int:
    try:
        config = parse_config(args.config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out = Path(args.output_dir or config.output_dir)
    try:
        reports, manifest = execute(config, out, args.figures, args.threads, args.seed)
    except (ModelError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    bad = [r for r in reports if r.bound_name in B.THEOREM_BOUNDS and not r.satisfied]
    heur = [r for r in reports if r.bound_name in B.HEURISTIC_BOUNDS and not r.satisfied]
    for r in bad:
        print(f"VIOLATION {r.bound_name}: lhs={r.lhs_measured!r} rhs={r.rhs_bound!r} inputs={r.inputs!r}",
              file=sys.stderr)
    for r in heur:
        print(f"heuristic check outside slack: {r.bound_name} lhs={r.lhs_measured!r} rhs={r.rhs_bound!r}",
              file=sys.stderr)
    print(f"{len(reports)} bound reports, {len(bad)} theorem violations; manifest: {manifest}")
    if strict and (bad or heur):
        return EXIT_VIOLATION
    return EXIT_OK


def _cmd_cache(args) -> int:
    cache = DecompositionCache(resolve_cache_dir(args.cache_dir))
    if args.clear:
        print(f"removed {cache.clear()} entries from {cache.directory}")
    else:
        for key, size in cache.entries():
            print(f"{key}  {size} bytes")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="equilibration", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (("run", "run every task of a config"),
                        ("verify", "run and exit nonzero on any bound violation")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("config")
        p.add_argument("--seed", type=int, default=None, help="override the master seed (u64)")
        p.add_argument("--threads", type=int, default=1, help="worker threads for tasks and trials")
        p.add_argument("--output-dir", default=None)
        p.add_argument("--figures", action="store_true", help="also render PNG figures")
    p = sub.add_parser("cache", help="inspect or clear the decomposition cache")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--clear", action="store_true")
    g.add_argument("--list", action="store_true")
    p.add_argument("--cache-dir", default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "cache":
        return _cmd_cache(args)
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_USAGE
    if args.threads < 1:
        print("error: --threads must be positive", file=sys.stderr)
        return EXIT_USAGE
    return _cmd_run(args, strict=args.command == "verify")


if __name__ == "__main__":
    sys.exit(main())
