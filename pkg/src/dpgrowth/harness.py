"""Experiment front-end: INI config parsing, seeded sweep execution with CSV
and JSON persistence, log-log rate fitting, the end-to-end privacy audit, and
the command-line interface."""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from configparser import ConfigParser
from dataclasses import asdict, dataclass
from itertools import product
from pathlib import Path

import numpy as np

from . import epoch_growth, inv_sensitivity, localization
from .core import Dataset, InvalidInputError, PrivacyParams, RngStream, project
from .instances import ProblemInstance, build_instance
from .mechanisms import DpTestReport, empirical_dp_test

__all__ = [
    "ExperimentConfig",
    "TrialRecord",
    "CSV_COLUMNS",
    "load_config",
    "run_sweep",
    "fit_rate",
    "RateFit",
    "privacy_audit",
    "AuditRow",
    "main",
]

ALGORITHMS = ("localization", "epoch_growth", "inv_sensitivity", "erm_oracle")

# Frozen CSV schema.  Wall time is deliberately not a CSV column: the CSV is
# the byte-reproducible artifact of a run, and timings land in the JSON
# summary instead.
CSV_COLUMNS = (
    "config_hash",
    "instance",
    "algorithm",
    "n",
    "d",
    "epsilon",
    "delta",
    "kappa",
    "kappa_lower",
    "seed",
    "excess_emp",
    "excess_pop",
    "epoch_i0",
    "error",
)


@dataclass(frozen=True)
class TrialRecord:
    config_hash: str
    instance: str
    algorithm: str
    n: int
    d: int
    epsilon: float
    delta: float
    kappa: float | None
    kappa_lower: float | None
    seed: int
    excess_emp: float
    excess_pop: float
    epoch_i0: int | None
    wall_ms: float
    error: str = ""


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    algorithm: str
    instance_name: str
    instance_params: dict
    d_default: int
    seeds: int
    master_seed: int
    beta: float | None  # None means 1/(n+d) per cell
    x0_offset: float
    sweep_n: tuple
    sweep_epsilon: tuple
    sweep_delta: tuple
    sweep_d: tuple | None
    sweep_kappa_lower: tuple | None
    kappa_lower: float | None
    noise_scale: float
    gaussian_conservative: bool
    rho: float | None
    grid_spacing: float | None
    output_prefix: str

    def config_hash(self) -> str:
        payload = repr(sorted(asdict(self).items())).encode()
        return hashlib.sha256(payload).hexdigest()[:12]

    def cells(self) -> list[dict]:
        d_axis = self.sweep_d if self.sweep_d else (self.d_default,)
        kl_axis = (
            self.sweep_kappa_lower if self.sweep_kappa_lower else (self.kappa_lower,)
        )
        out = []
        for n, d, eps, delta, kl in product(
            self.sweep_n, d_axis, self.sweep_epsilon, self.sweep_delta, kl_axis
        ):
            out.append(dict(n=int(n), d=int(d), epsilon=float(eps), delta=float(delta),
                            kappa_lower=kl))
        return out


def _parse_scalar(text: str):
    text = text.strip()
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    if text.lower() in ("true", "false"):
        return text.lower() == "true"
    return text


def _parse_list(text: str) -> tuple:
    return tuple(_parse_scalar(tok) for tok in text.split(",") if tok.strip())


def load_config(path: str | Path) -> ExperimentConfig:
    """Parse the flat INI experiment format (see README for the grammar)."""
    parser = ConfigParser(inline_comment_prefixes=(";", "#"))
    parser.optionxform = str  # keep option case (instance parameters like L, R)
    read = parser.read(path)
    if not read:
        raise InvalidInputError(f"cannot read config {path}")
    exp = parser["experiment"]
    inst = parser["instance"]
    sweep = parser["sweep"] if parser.has_section("sweep") else {}
    algo = parser["algorithm"] if parser.has_section("algorithm") else {}
    out = parser["output"] if parser.has_section("output") else {}

    algorithm = exp.get("algorithm", "localization").strip()
    if algorithm not in ALGORITHMS:
        raise InvalidInputError(f"unknown algorithm {algorithm!r}; pick from {ALGORITHMS}")
    instance_params = {
        key: _parse_scalar(val) for key, val in inst.items() if key not in ("name", "d")
    }
    beta_raw = exp.get("beta", "auto").strip().lower()
    beta = None if beta_raw == "auto" else float(beta_raw)
    seeds = int(exp.get("seeds", "1"))
    if seeds < 1:
        raise InvalidInputError("seeds must be >= 1")

    def sweep_axis(key, default):
        if key in sweep:
            return _parse_list(sweep[key])
        return default

    cfg = ExperimentConfig(
        name=exp.get("name", Path(path).stem).strip(),
        algorithm=algorithm,
        instance_name=inst.get("name", "").strip(),
        instance_params=instance_params,
        d_default=int(inst.get("d", "1")),
        seeds=seeds,
        master_seed=int(exp.get("master_seed", "0")),
        beta=beta,
        x0_offset=float(exp.get("x0_offset", "0.05")),
        sweep_n=sweep_axis("n", (int(exp.get("n", "256")),)),
        sweep_epsilon=sweep_axis("epsilon", (1.0,)),
        sweep_delta=sweep_axis("delta", (0.0,)),
        sweep_d=_parse_list(sweep["d"]) if "d" in sweep else None,
        sweep_kappa_lower=(
            _parse_list(sweep["kappa_lower"]) if "kappa_lower" in sweep else None
        ),
        kappa_lower=float(algo["kappa_lower"]) if "kappa_lower" in algo else None,
        noise_scale=float(algo.get("noise_scale", "1.0")),
        gaussian_conservative=algo.get("gaussian_conservative", "false").lower() == "true",
        rho=float(algo["rho"]) if "rho" in algo else None,
        grid_spacing=float(algo["grid_spacing"]) if "grid_spacing" in algo else None,
        output_prefix=out.get("prefix", Path(path).stem).strip(),
    )
    if not cfg.instance_name:
        raise InvalidInputError("config must name an instance")
    return cfg


# ---------------------------------------------------------------------------
# Trial execution
# ---------------------------------------------------------------------------


def _build_cell_instance(cfg: ExperimentConfig, cell: dict) -> ProblemInstance:
    params = dict(cfg.instance_params)
    if cfg.instance_name != "sharp_growth":
        params["d"] = cell["d"]
    return build_instance(cfg.instance_name, **params)


def _cell_beta(cfg: ExperimentConfig, cell: dict) -> float:
    if cfg.beta is not None:
        return cfg.beta
    return 1.0 / (cell["n"] + cell["d"])


def _starting_point(instance: ProblemInstance, offset: float, rng: RngStream) -> np.ndarray:
    d = instance.domain.dim
    direction = rng.gen.standard_normal(d)
    direction /= max(float(np.linalg.norm(direction)), 1e-300)
    x0 = instance.xstar + offset * instance.domain.radius * direction
    return project(instance.domain, x0)


def _execute_trial(args) -> TrialRecord:
    cfg, cell, ordinal, seed_index, cfg_hash = args
    stream = RngStream(cfg.master_seed, ordinal)
    data_rng, algo_rng, start_rng = stream.child(0), stream.child(1), stream.child(2)
    t0 = time.perf_counter()
    instance = _build_cell_instance(cfg, cell)
    epoch_i0 = None
    error = ""
    excess_emp = math.nan
    excess_pop = math.nan
    try:
        data = instance.draw(cell["n"], data_rng)
        beta = _cell_beta(cfg, cell)
        privacy = PrivacyParams(cell["epsilon"], cell["delta"])
        loss, domain = instance.loss, instance.domain
        if cfg.algorithm == "localization":
            x0 = _starting_point(instance, cfg.x0_offset, start_rng)
            R = domain.diameter()
            if privacy.is_pure:
                eta = localization.default_eta_pure(
                    R, loss.lipschitz, cell["n"], beta, privacy.epsilon, cell["d"]
                )
            else:
                eta = localization.default_eta_approx(
                    R, loss.lipschitz, cell["n"], beta, privacy.epsilon, privacy.delta,
                    cell["d"],
                )
            run_cfg = localization.LocalizationConfig.for_data_size(
                cell["n"], eta, beta, privacy,
                noise_scale=cfg.noise_scale,
                gaussian_conservative=cfg.gaussian_conservative,
            )
            x_out = localization.run(loss, data, domain, x0, run_cfg, algo_rng)
        elif cfg.algorithm == "epoch_growth":
            if cell["kappa_lower"] is None:
                raise InvalidInputError("epoch_growth needs kappa_lower")
            x0 = _starting_point(instance, cfg.x0_offset, start_rng)
            run_cfg = epoch_growth.EpochConfig.for_run(
                cell["n"], loss, domain, float(cell["kappa_lower"]), beta, privacy,
                noise_scale=cfg.noise_scale,
                gaussian_conservative=cfg.gaussian_conservative,
            )
            trace: list = []
            x_out = epoch_growth.run(loss, data, domain, x0, run_cfg, algo_rng, trace=trace)
            epoch_i0 = epoch_growth.index_in_region(trace, instance.xstar)
        elif cfg.algorithm == "inv_sensitivity":
            density = inv_sensitivity.build_density(
                loss, data, domain, privacy.epsilon,
                rho=cfg.rho, h=cfg.grid_spacing, growth=instance.growth,
            )
            x_out = inv_sensitivity.sample(density, algo_rng)
        elif cfg.algorithm == "erm_oracle":
            x_out, _ = instance.empirical_min(data)
        else:  # pragma: no cover - guarded at parse time
            raise InvalidInputError(f"unknown algorithm {cfg.algorithm}")
        excess_emp = instance.excess_emp(x_out, data)
        excess_pop = instance.excess_pop(x_out)
        if min(excess_emp, excess_pop) < -1e-7:
            error = f"negative-excess: emp={excess_emp:.3e} pop={excess_pop:.3e}"
    except (InvalidInputError, RuntimeError) as exc:
        error = f"{type(exc).__name__}: {exc}"
    wall_ms = (time.perf_counter() - t0) * 1e3
    growth = instance.growth
    return TrialRecord(
        config_hash=cfg_hash,
        instance=instance.description,
        algorithm=cfg.algorithm,
        n=cell["n"],
        d=cell["d"],
        epsilon=cell["epsilon"],
        delta=cell["delta"],
        kappa=None if growth is None else growth.kappa,
        kappa_lower=cell["kappa_lower"],
        seed=seed_index,
        excess_emp=excess_emp,
        excess_pop=excess_pop,
        epoch_i0=epoch_i0,
        wall_ms=wall_ms,
        error=error,
    )


def _format_field(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def run_sweep(
    cfg: ExperimentConfig, out_dir: str | Path, jobs: int = 1
) -> tuple[list[TrialRecord], Path, Path]:
    """Execute the full grid x seed product; write one CSV row per trial plus
    a JSON summary of per-cell medians and (1-beta)-quantiles.

    Output is deterministic given the master seed: per-trial streams are
    indexed by the trial's position in the sorted grid enumeration, and rows
    are written in that order regardless of scheduling.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg_hash = cfg.config_hash()
    cells = cfg.cells()
    specs = []
    ordinal = 0
    for cell in cells:
        for seed_index in range(cfg.seeds):
            specs.append((cfg, cell, ordinal, seed_index, cfg_hash))
            ordinal += 1
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(
                pool.map(_execute_trial, specs, chunksize=max(1, len(specs) // (4 * jobs)))
            )
    else:
        records = [_execute_trial(spec) for spec in specs]

    csv_path = out_dir / f"{cfg.output_prefix}.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for rec in records:
            row = asdict(rec)
            writer.writerow([_format_field(row[col]) for col in CSV_COLUMNS])

    summary_path = out_dir / f"{cfg.output_prefix}_summary.json"
    summary = summarize(cfg, records)
    with open(summary_path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return records, csv_path, summary_path


def summarize(cfg: ExperimentConfig, records: list[TrialRecord]) -> dict:
    """Per-cell medians and high-confidence quantiles, recomputable from rows."""
    cells = []
    for cell in cfg.cells():
        rows = [
            r
            for r in records
            if (r.n, r.d, r.epsilon, r.delta, r.kappa_lower)
            == (cell["n"], cell["d"], cell["epsilon"], cell["delta"], cell["kappa_lower"])
        ]
        good = [r for r in rows if not r.error]
        beta = _cell_beta(cfg, cell)
        entry = dict(cell)
        entry.update(
            beta=beta,
            n_trials=len(rows),
            n_errors=len(rows) - len(good),
            median_excess_pop=None,
            quantile_excess_pop=None,
            quantile_level=1.0 - beta,
            median_excess_emp=None,
            median_wall_ms=float(np.median([r.wall_ms for r in rows])) if rows else None,
        )
        if good:
            pops = np.array([r.excess_pop for r in good])
            emps = np.array([r.excess_emp for r in good])
            entry["median_excess_pop"] = float(np.median(pops))
            entry["quantile_excess_pop"] = float(
                np.quantile(pops, 1.0 - beta, method="higher")
            )
            entry["median_excess_emp"] = float(np.median(emps))
        cells.append(entry)
    return {
        "name": cfg.name,
        "config_hash": cfg.config_hash(),
        "algorithm": cfg.algorithm,
        "instance": cfg.instance_name,
        "seeds": cfg.seeds,
        "master_seed": cfg.master_seed,
        "cells": cells,
    }


# ---------------------------------------------------------------------------
# Rate fitting
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RateFit:
    slope: float
    stderr: float
    intercept: float
    x_values: tuple
    medians: tuple


def fit_rate(
    records: list[TrialRecord] | list[dict],
    x_field: str,
    y_field: str = "excess_pop",
) -> RateFit:
    """Ordinary least squares on (log x, log median y) across grid cells.

    Requires at least three distinct values on the swept axis and positive
    medians; trials with errors are dropped.
    """
    if x_field not in ("n", "epsilon", "d"):
        raise InvalidInputError("x_field must be one of n, epsilon, d")
    rows = [r if isinstance(r, dict) else asdict(r) for r in records]
    rows = [r for r in rows if not r.get("error")]
    if not rows:
        raise InvalidInputError("no successful trials to fit")
    other_axes = [f for f in ("n", "epsilon", "d", "kappa_lower") if f != x_field]
    for axis in other_axes:
        if len({r[axis] for r in rows}) > 1:
            raise InvalidInputError(
                f"axis {axis!r} is not fixed; filter records before fitting"
            )
    groups: dict[float, list[float]] = {}
    for r in rows:
        groups.setdefault(float(r[x_field]), []).append(float(r[y_field]))
    if len(groups) < 3:
        raise InvalidInputError("need at least 3 grid cells on the swept axis")
    xs = np.array(sorted(groups))
    medians = np.array([np.median(groups[x]) for x in xs])
    if np.any(~np.isfinite(medians)) or np.any(medians <= 0):
        raise InvalidInputError("medians must be positive and finite for a log-log fit")
    lx, ly = np.log(xs), np.log(medians)
    m = len(xs)
    vx = lx - lx.mean()
    slope = float(np.dot(vx, ly) / np.dot(vx, vx))
    intercept = float(ly.mean() - slope * lx.mean())
    resid = ly - (intercept + slope * lx)
    if m > 2:
        s2 = float(np.dot(resid, resid)) / (m - 2)
        stderr = math.sqrt(s2 / float(np.dot(vx, vx)))
    else:
        stderr = math.nan
    return RateFit(
        slope=slope,
        stderr=stderr,
        intercept=intercept,
        x_values=tuple(float(x) for x in xs),
        medians=tuple(float(v) for v in medians),
    )


def read_csv(path: str | Path) -> list[dict]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            rec = dict(row)
            for key in ("n", "d", "seed"):
                rec[key] = int(rec[key])
            for key in ("epsilon", "delta", "excess_emp", "excess_pop"):
                rec[key] = float(rec[key]) if rec[key] else math.nan
            for key in ("kappa", "kappa_lower"):
                rec[key] = float(rec[key]) if rec[key] else None
            out.append(rec)
    return out


# ---------------------------------------------------------------------------
# Privacy audit (end-to-end falsifier)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AuditRow:
    pipeline: str
    epsilon: float
    mode: str  # "honest", "sabotaged", or "skipped"
    report: DpTestReport | None  # None for skipped noiseless budgets


def _audit_quadratic_instance():
    return build_instance(
        "uniform_convex", d=1, kappa=2, lam=1.0, L=4.0, R=1.0, bias_delta=0.1
    )


def _audit_abs_instance():
    return build_instance("pure_convex", d=1, L=1.0, R=1.0)


def _audit_datasets(n: int) -> tuple[Dataset, Dataset]:
    # Fixed neighboring pair: flipping one extreme sample maximizes the shift
    # of every batch statistic the pipelines consume.
    base = np.ones(n)
    base[: n // 2] = -1.0
    neighbor = base.copy()
    neighbor[0] = 1.0
    return Dataset(base[:, None]), Dataset(neighbor[:, None])


def _localization_mechanism(instance, noise_scale, epsilon):
    loss, domain = instance.loss, instance.domain
    x0 = np.zeros(1)

    def mech(dataset, rng, trials):
        beta = 1.0 / (dataset.n + 1)
        eta = localization.default_eta_pure(
            domain.diameter(), loss.lipschitz, dataset.n, beta, epsilon, 1
        )
        cfg = localization.LocalizationConfig.for_data_size(
            dataset.n, eta, beta, PrivacyParams(epsilon), noise_scale=noise_scale
        )
        out = np.empty(trials)
        for t in range(trials):
            out[t] = localization.run(loss, dataset, domain, x0, cfg, rng.child(t))[0]
        return out

    return mech


def _epoch_mechanism(instance, noise_scale, epsilon, kappa_lower=3.0):
    loss, domain = instance.loss, instance.domain
    x0 = np.zeros(1)

    def mech(dataset, rng, trials):
        beta = 1.0 / (dataset.n + 1)
        cfg = epoch_growth.EpochConfig.for_run(
            dataset.n, loss, domain, kappa_lower, beta, PrivacyParams(epsilon),
            noise_scale=noise_scale,
        )
        out = np.empty(trials)
        for t in range(trials):
            out[t] = epoch_growth.run(loss, dataset, domain, x0, cfg, rng.child(t))[0]
        return out

    return mech


def _inv_sens_mechanism(instance, epsilon_actual, rho=0.1):
    loss, domain = instance.loss, instance.domain

    def mech(dataset, rng, trials):
        density = inv_sensitivity.build_density(
            loss, dataset, domain, epsilon_actual, rho=rho
        )
        return inv_sensitivity.sample(density, rng, size=trials)[:, 0]

    return mech


def privacy_audit(
    epsilons=(0.5, 1.0, 2.0),
    n: int = 32,
    trials: int = 100_000,
    bins: int = 24,
    master_seed: int = 7,
    pipelines=("localization", "epoch_growth", "inv_sensitivity"),
    sabotage: bool = True,
    jobs: int = 1,
) -> list[AuditRow]:
    """Run the histogram falsifier on end-to-end 1-D pipelines.

    Honest runs use the calibrated noise; sabotaged runs halve every noise
    scale (for the grid sampler: double the score temperature's inverse,
    the same miscalibration expressed for an exponential weight).
    """
    data, neighbor = _audit_datasets(n)
    tasks = []
    skipped = []
    for pipeline in pipelines:
        for eps in epsilons:
            if not math.isfinite(float(eps)):
                # A non-finite budget means the noiseless mode: there is no
                # privacy claim to falsify, so the combination is skipped.
                skipped.append(AuditRow(pipeline, float(eps), "skipped", None))
                continue
            for mode in ("honest", "sabotaged") if sabotage else ("honest",):
                tasks.append((pipeline, float(eps), mode))
    args = [
        (t, idx, trials, bins, master_seed, data, neighbor)
        for idx, t in enumerate(tasks)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_audit_one, args))
    else:
        rows = [_audit_one(a) for a in args]
    return rows + skipped


def _audit_one(packed) -> AuditRow:
    (pipeline, eps, mode), task_index, trials, bins, master_seed, data, neighbor = packed
    scale = 0.5 if mode == "sabotaged" else 1.0
    if pipeline == "localization":
        mech = _localization_mechanism(_audit_quadratic_instance(), scale, eps)
    elif pipeline == "epoch_growth":
        mech = _epoch_mechanism(_audit_quadratic_instance(), scale, eps)
    elif pipeline == "inv_sensitivity":
        eps_actual = eps / scale
        mech = _inv_sens_mechanism(_audit_abs_instance(), eps_actual)
    else:
        raise InvalidInputError(f"unknown pipeline {pipeline!r}")
    stream = RngStream(master_seed, task_index)
    report = empirical_dp_test(mech, data, neighbor, eps, trials, bins, stream)
    return AuditRow(pipeline=pipeline, epsilon=eps, mode=mode, report=report)


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="dpgrowth",
        description="Growth-adaptive private optimization experiment harness.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a sweep config")
    p_run.add_argument("config")
    p_run.add_argument("--out", default="results")
    p_run.add_argument("--seed", type=int, default=None, help="override the master seed")
    p_run.add_argument("--jobs", type=int, default=1)

    p_fit = sub.add_parser("fit", help="fit a log-log rate slope from a sweep CSV")
    p_fit.add_argument("csv")
    p_fit.add_argument("--axis", required=True, choices=("n", "epsilon", "d"))
    p_fit.add_argument("--y", default="excess_pop", choices=("excess_pop", "excess_emp"))

    p_audit = sub.add_parser("audit", help="run the end-to-end privacy falsifier")
    p_audit.add_argument("config", nargs="?", default=None,
                         help="optional INI file with an [audit] section")
    p_audit.add_argument("--out", default=None)
    p_audit.add_argument("--seed", type=int, default=7)
    p_audit.add_argument("--jobs", type=int, default=1)

    p_ver = sub.add_parser("verify-instance", help="probe growth certificates")
    p_ver.add_argument("instance")
    p_ver.add_argument("--param", action="append", default=[], metavar="KEY=VALUE")
    p_ver.add_argument("--probes", type=int, default=10_000)

    args = parser.parse_args(argv)

    if args.command == "run":
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = ExperimentConfig(**{**asdict(cfg), "master_seed": args.seed})
        records, csv_path, summary_path = run_sweep(cfg, args.out, jobs=args.jobs)
        n_err = sum(1 for r in records if r.error)
        print(f"wrote {len(records)} trials ({n_err} errors) -> {csv_path}")
        print(f"summary -> {summary_path}")
        return 0

    if args.command == "fit":
        fit = fit_rate(read_csv(args.csv), args.axis, args.y)
        print(f"slope = {fit.slope:.4f} +- {fit.stderr:.4f} over {len(fit.x_values)} cells")
        for x, m in zip(fit.x_values, fit.medians):
            print(f"  {args.axis}={x:g}: median {args.y} = {m:.6g}")
        return 0

    if args.command == "audit":
        kwargs = dict(master_seed=args.seed, jobs=args.jobs)
        if args.config:
            parser_ini = ConfigParser(inline_comment_prefixes=(";", "#"))
            parser_ini.optionxform = str
            parser_ini.read(args.config)
            sec = parser_ini["audit"]
            if "epsilons" in sec:
                kwargs["epsilons"] = _parse_list(sec["epsilons"])
            for key in ("n", "trials", "bins"):
                if key in sec:
                    kwargs[key] = int(sec[key])
            if "pipelines" in sec:
                kwargs["pipelines"] = tuple(
                    str(p) for p in _parse_list(sec["pipelines"])
                )
            if "sabotage" in sec:
                kwargs["sabotage"] = sec.getboolean("sabotage")
        rows = privacy_audit(**kwargs)
        payload = []
        for row in rows:
            rep = row.report
            if rep is None:
                print(
                    f"{row.pipeline:16s} eps={row.epsilon:<4g} skipped "
                    f"(noiseless budget: nothing to falsify)"
                )
                payload.append({"pipeline": row.pipeline, "epsilon": row.epsilon,
                                "mode": row.mode})
                continue
            status = "inconclusive" if rep.inconclusive else ("pass" if rep.passed else "FAIL")
            print(
                f"{row.pipeline:16s} eps={row.epsilon:<4g} {row.mode:10s} "
                f"max_log_ratio={rep.max_log_ratio:.4f} slack={rep.slack:.3f} -> {status}"
            )
            payload.append({**asdict(row.report), "pipeline": row.pipeline,
                            "epsilon": row.epsilon, "mode": row.mode})
        if args.out:
            Path(args.out).parent.mkdir(parents=True, exist_ok=True)
            with open(args.out, "w") as fh:
                json.dump(payload, fh, indent=2, sort_keys=True)
                fh.write("\n")
            print(f"audit report -> {args.out}")
        return 0

    if args.command == "verify-instance":
        params = {}
        for item in args.param:
            key, _, val = item.partition("=")
            params[key.strip()] = _parse_scalar(val)
        instance = build_instance(args.instance, **params)
        growth_rep, kl_rep = instance.certify(probes=args.probes)
        print(f"instance: {instance.description}")
        if growth_rep is None:
            print("no growth certificate declared; nothing to verify")
            return 0
        print(f"growth max_violation = {growth_rep.max_violation:.3e} "
              f"({'pass' if growth_rep.passed else 'FAIL'})")
        print(f"gradient-domination max_violation = {kl_rep.max_violation:.3e} "
              f"({'pass' if kl_rep.passed else 'FAIL'})")
        return 0 if (growth_rep.passed and kl_rep.passed) else 1

    return 2  # pragma: no cover


if __name__ == "__main__":
    sys.exit(main())
