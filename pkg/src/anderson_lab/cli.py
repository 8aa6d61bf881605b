"""Command-line front end: JSON scenario configs in, CSV/JSON results out.

One config describes one scenario; batch studies are shell-level composition.
Every subcommand validates the config fully before any random draw, emits a
fixed documented column set, and is deterministic for a fixed seed across
worker counts.  Progress goes to stderr; stdout carries only data unless
``--out`` redirects results to files.

Exit codes: 0 ok, 1 validation error, 2 runtime/numeric error, 3 pinned
expectation failed under ``--assert``.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from enum import IntEnum
from pathlib import Path

import numpy as np

from .estimators import (
    CS_FAMILIES,
    STATISTICS,
    craig_simon_scan,
    lde_curve,
    lift_check,
    lyapunov_mc,
)
from .experiments import (
    CENSUS_COLUMNS,
    LOCALIZATION_COLUMNS,
    ResultTable,
    RunManifest,
    Scenario,
    edge_bound_census,
    gamma_grid,
    persist,
    run_localization,
    singularity_census,
)
from .measures import (
    AtomReweight,
    BaseMeasure,
    BumpSchedule,
    DensitySequence,
    ExplicitSites,
    FiniteAtoms,
    Identity,
    ParetoTail,
    PowersOfTwoSites,
    UniformInterval,
    condition_report,
    sample_window,
)
from .spectral import TridiagonalBox, eigenvalues

WORKERS_ENV = "ANDERSON_LAB_WORKERS"


class ExitStatus(IntEnum):
    OK = 0
    VALIDATION = 1
    RUNTIME = 2
    ASSERTION = 3


SUBCOMMANDS = (
    "lyapunov", "lde", "lift-check", "conditions", "localize",
    "census", "edge-census", "craig-simon", "spectrum",
)

COLUMNS = {
    "lyapunov": (
        "scenario_id", "seed", "law_tag", "energy_re", "energy_im",
        "n", "samples", "mean", "stderr",
    ),
    "lde": (
        "scenario_id", "seed", "law_tag", "statistic", "energy", "epsilon",
        "epsilon_eff", "n", "count", "tail_prob", "fitted_eta", "eta_stderr", "fit_flag",
    ),
    "lift-check": (
        "scenario_id", "seed", "statistic", "energy", "epsilon", "n",
        "count_exact", "count_approx", "tail_exact", "tail_approx",
        "log_bound", "violation",
    ),
    "conditions": ("scenario_id", "condition", "N", "value", "verdict"),
    "localize": LOCALIZATION_COLUMNS,
    "census": CENSUS_COLUMNS,
    "edge-census": (
        "scenario_id", "seed", "n", "trials", "zone_sites", "threshold",
        "site_violations", "site_freq", "site_pred",
        "event_count", "event_freq", "event_pred", "chebyshev_bound",
    ),
    "craig-simon": ("scenario_id", "seed", "family", "energy", "n", "excess"),
    "spectrum": ("scenario_id", "seed", "law_tag", "box_lo", "box_hi", "j", "eigenvalue"),
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(message)


def build_parser() -> _Parser:
    parser = _Parser(prog="anderson-lab", add_help=True)
    sub = parser.add_subparsers(dest="command")
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, add_help=True)
        p.add_argument("--config", required=True, help="scenario config (JSON)")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--workers", type=int, default=None, help="worker count")
        p.add_argument("--out", default=None, help="directory for result files")
        p.add_argument(
            "--assert", dest="assert_mode", action="store_true",
            help="turn pinned expectations into the exit code",
        )
        p.add_argument("--format", choices=("csv", "json"), default=None)
    return parser


# ---------------------------------------------------------------------------
# config validation
# ---------------------------------------------------------------------------

_TOP_KEYS = {"scenario_id", "measure", "densities", "experiment", "grids", "sampling", "output", "expected"}
_MEASURE_KEYS = {"kind", "atoms", "lo", "hi", "scale", "exponent", "symmetric", "alpha_moment", "allow_trivial"}
_DENSITY_KEYS = {"kind", "schedule", "sites", "weights"}
_SITES_KEYS = {"kind", "values"}
_EXPERIMENT_KEYS = {
    "kind", "n", "energy", "interval", "box", "epsilon", "statistic", "rate_power",
    "p", "r", "alpha", "gamma_n", "gamma_samples", "n_max", "k_max", "u", "v",
}
_GRID_KEYS = {"energy", "n"}
_SAMPLING_KEYS = {"seed", "samples", "workers"}
_OUTPUT_KEYS = {"path", "format"}
_EXPECTED_KEYS = {"metrics"}
_MEASURE_KINDS = ("finite_atoms", "uniform_interval", "pareto_tail")
_DENSITY_KINDS = ("identity", "atom_reweight", "bump")
_EXPERIMENT_KINDS = (
    "lyapunov", "lde", "lift_check", "conditions", "localize",
    "census", "edge_census", "craig_simon", "spectrum",
)


def _unknown_keys(section: dict, allowed: set, path: str, out: list[str]) -> None:
    for key in section:
        if key not in allowed:
            out.append(f"{path}.{key}: unknown key")


def _require_number(section: dict, key: str, path: str, out: list[str], *, integer=False) -> bool:
    if key not in section:
        out.append(f"{path}.{key}: required")
        return False
    value = section[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        out.append(f"{path}.{key}: must be a number")
        return False
    if integer and not isinstance(value, int):
        out.append(f"{path}.{key}: must be an integer")
        return False
    return True


def _validate_measure(measure, out: list[str]) -> None:
    if not isinstance(measure, dict):
        out.append("measure: must be an object")
        return
    _unknown_keys(measure, _MEASURE_KEYS, "measure", out)
    kind = measure.get("kind")
    if kind not in _MEASURE_KINDS:
        out.append(f"measure.kind: must be one of {_MEASURE_KINDS}")
        return
    if not _require_number(measure, "alpha_moment", "measure", out):
        return
    if measure["alpha_moment"] <= 0:
        out.append("measure.alpha_moment: must be positive")
    if kind == "finite_atoms":
        atoms = measure.get("atoms")
        if not isinstance(atoms, list) or not atoms or not all(
            isinstance(a, list) and len(a) == 2 and all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in a)
            for a in atoms
        ):
            out.append("measure.atoms: must be a non-empty list of [location, weight] pairs")
            return
        weights = [a[1] for a in atoms]
        if any(w <= 0 for w in weights):
            out.append("measure.atoms: weights must be positive")
        if abs(math.fsum(weights) - 1.0) > 1e-12:
            out.append(f"measure.atoms: weights sum to {math.fsum(weights)!r}, must be 1")
        locs = [a[0] for a in atoms]
        if len(set(locs)) != len(locs):
            out.append("measure.atoms: locations must be distinct")
        if len(atoms) < 2 and not measure.get("allow_trivial", False):
            out.append("measure: non-trivial support required (at least two atoms)")
    elif kind == "uniform_interval":
        if _require_number(measure, "lo", "measure", out) & _require_number(measure, "hi", "measure", out):
            if not measure["lo"] < measure["hi"]:
                out.append("measure.lo: must be strictly below measure.hi")
    elif kind == "pareto_tail":
        ok = _require_number(measure, "scale", "measure", out)
        ok &= _require_number(measure, "exponent", "measure", out)
        if ok:
            if measure["scale"] <= 0:
                out.append("measure.scale: must be positive")
            if measure["exponent"] <= measure.get("alpha_moment", 0):
                out.append("measure.exponent: moment condition unsatisfiable (exponent <= alpha_moment)")


def _validate_densities(densities, measure, out: list[str]) -> None:
    if densities is None:
        return
    if not isinstance(densities, dict):
        out.append("densities: must be an object")
        return
    _unknown_keys(densities, _DENSITY_KEYS, "densities", out)
    kind = densities.get("kind")
    if kind not in _DENSITY_KINDS:
        out.append(f"densities.kind: must be one of {_DENSITY_KINDS}")
        return
    atomic = isinstance(measure, dict) and measure.get("kind") == "finite_atoms"
    n_atoms = len(measure.get("atoms", [])) if atomic else 0

    def check_weights(vec, path):
        if not isinstance(vec, list) or not all(
            isinstance(x, (int, float)) and not isinstance(x, bool) for x in vec
        ):
            out.append(f"{path}: must be a list of numbers")
            return
        if atomic and len(vec) != n_atoms:
            out.append(f"{path}: length must match the atom count")
        if any(x < 0 for x in vec):
            out.append(f"{path}: entries must be nonnegative")
        if abs(math.fsum(vec) - 1.0) > 1e-12:
            out.append(f"{path}: weights must sum to 1")

    if kind == "atom_reweight":
        if not atomic:
            out.append("densities.kind: atom_reweight needs a finite_atoms measure")
        schedule = densities.get("schedule")
        if not isinstance(schedule, dict) or not schedule:
            out.append("densities.schedule: must be a non-empty object mapping site -> weights")
            return
        for site, vec in schedule.items():
            try:
                int(site)
            except (TypeError, ValueError):
                out.append(f"densities.schedule.{site}: site must be an integer")
                continue
            check_weights(vec, f"densities.schedule.{site}")
    elif kind == "bump":
        sites = densities.get("sites")
        if not isinstance(sites, dict):
            out.append("densities.sites: must be an object with a kind")
        else:
            _unknown_keys(sites, _SITES_KEYS, "densities.sites", out)
            skind = sites.get("kind")
            if skind == "explicit":
                if not isinstance(sites.get("values"), list) or not all(
                    isinstance(v, int) and not isinstance(v, bool) for v in sites.get("values", [])
                ):
                    out.append("densities.sites.values: must be a list of integers")
            elif skind != "powers_of_two":
                out.append("densities.sites.kind: must be 'powers_of_two' or 'explicit'")
        if not atomic:
            out.append("densities.kind: bump schedules are configurable only over finite_atoms measures")
        weights = densities.get("weights")
        if weights is None:
            out.append("densities.weights: required for bump schedules")
        else:
            check_weights(weights, "densities.weights")


def _validate_experiment(experiment, grids, command_kind: str | None, out: list[str]) -> None:
    if not isinstance(experiment, dict):
        out.append("experiment: must be an object")
        return
    _unknown_keys(experiment, _EXPERIMENT_KEYS, "experiment", out)
    kind = experiment.get("kind")
    if kind not in _EXPERIMENT_KINDS:
        out.append(f"experiment.kind: must be one of {_EXPERIMENT_KINDS}")
        return
    if command_kind is not None and kind != command_kind:
        out.append(f"experiment.kind: config is for {kind!r}, command expects {command_kind!r}")
    has_energy_grid = isinstance(grids, dict) and bool(grids.get("energy"))
    has_n_grid = isinstance(grids, dict) and bool(grids.get("n"))
    if kind == "lyapunov":
        _require_number(experiment, "n", "experiment", out, integer=True)
        if "energy" not in experiment and not has_energy_grid:
            out.append("experiment.energy: required (or provide grids.energy)")
    if kind in ("lde", "lift_check", "edge_census") and not has_n_grid:
        out.append("grids.n: required for this experiment")
    if kind in ("localize", "census", "craig_simon") and not (has_energy_grid and has_n_grid):
        out.append("grids: energy and n grids are required for this experiment")
    if kind in ("lde", "lift_check"):
        if _require_number(experiment, "epsilon", "experiment", out) and experiment["epsilon"] <= 0:
            out.append("experiment.epsilon: must be positive")
        _require_number(experiment, "energy", "experiment", out)
    if kind == "conditions":
        _require_number(experiment, "n_max", "experiment", out, integer=True)
        _require_number(experiment, "k_max", "experiment", out, integer=True)
    if kind in ("localize", "census"):
        interval = experiment.get("interval")
        if (
            not isinstance(interval, list) or len(interval) != 2
            or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in interval)
        ):
            out.append("experiment.interval: must be [s, t]")
        elif not interval[0] < interval[1]:
            out.append("experiment.interval: requires s < t")
    if kind in ("localize", "spectrum"):
        box = experiment.get("box")
        if not isinstance(box, list) or len(box) != 2 or not all(isinstance(x, int) and not isinstance(x, bool) for x in box):
            out.append("experiment.box: must be [lo, hi] integers")
        elif box[0] > box[1]:
            out.append("experiment.box: requires lo <= hi")
    if kind == "edge_census":
        if _require_number(experiment, "p", "experiment", out) and experiment["p"] <= 0:
            out.append("experiment.p: must be positive")
        if _require_number(experiment, "r", "experiment", out) and experiment["r"] <= 1:
            out.append("experiment.r: must exceed 1")
    stat = experiment.get("statistic")
    if stat is not None and stat not in STATISTICS:
        out.append(f"experiment.statistic: must be one of {STATISTICS}")
    rp = experiment.get("rate_power")
    if rp is not None and rp not in (1.0, 0.5, 1):
        out.append("experiment.rate_power: must be 1.0 or 0.5")


def validate(config, command_kind: str | None = None) -> list[str]:
    """Schema plus standing-hypothesis checks; empty list means valid.

    Each violation names the JSON path it refers to.  No randomness is drawn
    here or anywhere before validation passes.
    """
    out: list[str] = []
    if not isinstance(config, dict):
        return ["config: must be a JSON object"]
    _unknown_keys(config, _TOP_KEYS, "config", out)
    if "scenario_id" in config and not isinstance(config["scenario_id"], str):
        out.append("scenario_id: must be a string")
    if "measure" not in config:
        out.append("measure: required")
    else:
        _validate_measure(config["measure"], out)
    _validate_densities(config.get("densities"), config.get("measure"), out)
    if "experiment" not in config:
        out.append("experiment: required")
    else:
        _validate_experiment(config["experiment"], config.get("grids", {}), command_kind, out)
    grids = config.get("grids")
    if grids is not None:
        if not isinstance(grids, dict):
            out.append("grids: must be an object")
        else:
            _unknown_keys(grids, _GRID_KEYS, "grids", out)
            for key, integer in (("energy", False), ("n", True)):
                if key in grids:
                    seq = grids[key]
                    if not isinstance(seq, list) or not seq:
                        out.append(f"grids.{key}: must be a non-empty list")
                    elif integer and not all(isinstance(x, int) and not isinstance(x, bool) for x in seq):
                        out.append(f"grids.{key}: entries must be integers")
                    elif not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in seq):
                        out.append(f"grids.{key}: entries must be numbers")
                    elif any(b <= a for a, b in zip(seq, seq[1:])):
                        out.append(f"grids.{key}: must be strictly ascending")
    sampling = config.get("sampling")
    if not isinstance(sampling, dict):
        out.append("sampling: required")
    else:
        _unknown_keys(sampling, _SAMPLING_KEYS, "sampling", out)
        if _require_number(sampling, "seed", "sampling", out, integer=True) and sampling["seed"] < 0:
            out.append("sampling.seed: must be nonnegative")
        if "samples" in sampling:
            if not isinstance(sampling["samples"], int) or isinstance(sampling["samples"], bool) or sampling["samples"] < 1:
                out.append("sampling.samples: must be a positive integer")
        if "workers" in sampling:
            if not isinstance(sampling["workers"], int) or isinstance(sampling["workers"], bool) or sampling["workers"] < 1:
                out.append("sampling.workers: must be a positive integer")
    output = config.get("output")
    if output is not None:
        if not isinstance(output, dict):
            out.append("output: must be an object")
        else:
            _unknown_keys(output, _OUTPUT_KEYS, "output", out)
            if "format" in output and output["format"] not in ("csv", "json"):
                out.append("output.format: must be 'csv' or 'json'")
    expected = config.get("expected")
    if expected is not None:
        if not isinstance(expected, dict):
            out.append("expected: must be an object")
        else:
            _unknown_keys(expected, _EXPECTED_KEYS, "expected", out)
            metrics = expected.get("metrics")
            if not isinstance(metrics, dict):
                out.append("expected.metrics: required object")
            else:
                for name, spec in metrics.items():
                    if not isinstance(spec, dict) or not (
                        {"value", "abs_tol"} <= set(spec)
                        or {"value", "rel_tol"} <= set(spec)
                        or "min" in spec
                        or "max" in spec
                    ):
                        out.append(
                            f"expected.metrics.{name}: needs value+abs_tol, value+rel_tol, min, or max"
                        )
    return out


# ---------------------------------------------------------------------------
# config -> domain objects
# ---------------------------------------------------------------------------

def build_measure(measure: dict) -> BaseMeasure:
    kind = measure["kind"]
    if kind == "finite_atoms":
        return FiniteAtoms(
            atoms=tuple((float(a), float(w)) for a, w in measure["atoms"]),
            alpha_moment=float(measure["alpha_moment"]),
            allow_trivial=bool(measure.get("allow_trivial", False)),
        )
    if kind == "uniform_interval":
        return UniformInterval(
            lo=float(measure["lo"]), hi=float(measure["hi"]),
            alpha_moment=float(measure["alpha_moment"]),
        )
    return ParetoTail(
        scale=float(measure["scale"]), exponent=float(measure["exponent"]),
        symmetric=bool(measure.get("symmetric", True)),
        alpha_moment=float(measure["alpha_moment"]),
    )


def build_densities(densities: dict | None, base: BaseMeasure) -> DensitySequence:
    if densities is None or densities["kind"] == "identity":
        return Identity()
    if densities["kind"] == "atom_reweight":
        schedule = {int(site): tuple(vec) for site, vec in densities["schedule"].items()}
        return AtomReweight(base, schedule)  # type: ignore[arg-type]
    sites_cfg = densities["sites"]
    sites = (
        PowersOfTwoSites()
        if sites_cfg["kind"] == "powers_of_two"
        else ExplicitSites(frozenset(sites_cfg["values"]))
    )
    return BumpSchedule(sites=sites, base=base, weights=tuple(densities["weights"]))


def scenario_from_config(
    config: dict,
    *,
    seed: int | None = None,
    workers: int | None = None,
    default_id: str = "scenario",
) -> Scenario:
    base = build_measure(config["measure"])
    densities = build_densities(config.get("densities"), base)
    experiment = config["experiment"]
    grids = config.get("grids", {})
    sampling = config["sampling"]
    env_workers = os.environ.get(WORKERS_ENV)
    resolved_workers = (
        workers
        if workers is not None
        else sampling.get("workers", int(env_workers) if env_workers else 1)
    )
    n_grid = tuple(int(n) for n in grids.get("n", ()))
    if experiment["kind"] == "lyapunov" and not n_grid:
        n_grid = (int(experiment["n"]),)
    interval = experiment.get("interval")
    energy = experiment.get("energy")
    return Scenario(
        scenario_id=config.get("scenario_id", default_id),
        kind=experiment["kind"],
        base=base,
        densities=densities,
        seed=int(seed if seed is not None else sampling["seed"]),
        samples=int(sampling.get("samples", 1)),
        e_grid=tuple(float(e) for e in grids.get("energy", ())),
        n_grid=n_grid,
        interval=tuple(interval) if interval else None,
        box=tuple(experiment["box"]) if experiment.get("box") else None,
        energy=float(energy) if energy is not None else None,
        epsilon=float(experiment["epsilon"]) if experiment.get("epsilon") is not None else None,
        statistic=experiment.get("statistic", "log_norm"),
        rate_power=float(experiment.get("rate_power", 1.0)),
        edge_p=float(experiment["p"]) if experiment.get("p") is not None else None,
        edge_r=float(experiment["r"]) if experiment.get("r") is not None else None,
        gamma_n=int(experiment.get("gamma_n", 1000)),
        gamma_samples=int(experiment.get("gamma_samples", 200)),
        workers=int(resolved_workers),
        expected=config.get("expected"),
    )


# ---------------------------------------------------------------------------
# subcommand runners
# ---------------------------------------------------------------------------

def _run_lyapunov(sc: Scenario, config: dict) -> ResultTable:
    energies = sc.e_grid if sc.e_grid else (sc.energy,)
    n = sc.n_grid[-1]
    law = sc.law()
    rows = []
    for i, e in enumerate(energies):
        est = lyapunov_mc(law, e, n, sc.samples, sc.stream().child(i), workers=sc.workers)
        rows.append(
            {
                "scenario_id": sc.scenario_id, "seed": sc.seed, "law_tag": sc.law_tag,
                "energy_re": float(np.real(e)), "energy_im": float(np.imag(e)),
                "n": n, "samples": sc.samples, "mean": est.mean, "stderr": est.stderr,
            }
        )
    summary = {"min_mean": min(r["mean"] for r in rows), "max_mean": max(r["mean"] for r in rows)}
    if len(rows) == 1:
        summary["mean"] = rows[0]["mean"]
        summary["stderr"] = rows[0]["stderr"]
    return ResultTable("lyapunov", COLUMNS["lyapunov"], tuple(rows), summary)


def _run_lde(sc: Scenario, config: dict) -> ResultTable:
    curve = lde_curve(
        sc.law(), sc.energy, sc.epsilon, sc.n_grid, sc.samples, sc.stream(),
        sc.statistic, rate_power=sc.rate_power, workers=sc.workers,
    )
    rows = tuple(
        {
            "scenario_id": sc.scenario_id, "seed": sc.seed, "law_tag": curve.law_tag,
            "statistic": sc.statistic, "energy": sc.energy, "epsilon": sc.epsilon,
            "epsilon_eff": curve.epsilon_eff, "n": int(n), "count": int(c),
            "tail_prob": float(c) / sc.samples, "fitted_eta": curve.fit.eta,
            "eta_stderr": curve.fit.stderr, "fit_flag": curve.fit.flag,
        }
        for n, c in zip(curve.n_grid, curve.counts)
    )
    summary = {
        "fitted_eta": curve.fit.eta,
        "eta_stderr": curve.fit.stderr,
        "gamma_ref": curve.gamma_ref,
        "fit_flag": curve.fit.flag,
    }
    return ResultTable("lde", COLUMNS["lde"], rows, summary)


def _run_lift(sc: Scenario, config: dict) -> ResultTable:
    report = lift_check(
        sc.densities, sc.base, sc.energy, sc.epsilon, sc.n_grid, sc.samples,
        sc.stream(), sc.statistic, rate_power=sc.rate_power, workers=sc.workers,
    )
    violated = {v.n for v in report.violations}
    rows = tuple(
        {
            "scenario_id": sc.scenario_id, "seed": sc.seed, "statistic": sc.statistic,
            "energy": sc.energy, "epsilon": sc.epsilon, "n": int(n),
            "count_exact": int(report.counts_exact[i]),
            "count_approx": int(report.counts_approx[i]),
            "tail_exact": float(report.counts_exact[i]) / sc.samples,
            "tail_approx": float(report.counts_approx[i]) / sc.samples,
            "log_bound": float(report.log_bound[i]),
            "violation": int(n) in violated,
        }
        for i, n in enumerate(report.n_grid)
    )
    summary = {
        "violations": len(report.violations),
        "gamma_ref": report.gamma_ref,
        "density_rate": report.density_rate,
        "fitted_eta_exact": report.fit_exact.eta,
        "fitted_eta_approx": report.fit_approx.eta,
        "lifted_rate_prediction": report.lifted_rate_prediction,
    }
    return ResultTable("lift_check", COLUMNS["lift-check"], rows, summary)


def _run_conditions(sc: Scenario, config: dict) -> ResultTable:
    experiment = config["experiment"]
    report = condition_report(sc.densities, int(experiment["n_max"]), int(experiment["k_max"]))
    trajectories = {
        "mean_log_sup": report.mean,
        "uniform_mean_log_sup": report.uniform,
        "summable_log_sup": report.tail_increments,
    }
    rows = []
    for name, values in trajectories.items():
        verdict = report.verdicts[name].verdict
        for n, value in zip(report.n_grid, values):
            rows.append(
                {
                    "scenario_id": sc.scenario_id, "condition": name,
                    "N": int(n), "value": float(value), "verdict": verdict,
                }
            )
    summary = {
        f"{name}_verdict": v.verdict for name, v in report.verdicts.items()
    } | {f"{name}_end": v.value_end for name, v in report.verdicts.items()}
    return ResultTable("conditions", COLUMNS["conditions"], tuple(rows), summary)


def _run_localize(sc: Scenario, config: dict) -> ResultTable:
    return run_localization(sc).to_table()


def _run_census(sc: Scenario, config: dict) -> ResultTable:
    return singularity_census(sc).to_table()


def _run_edge_census(sc: Scenario, config: dict) -> ResultTable:
    alpha = config["experiment"].get("alpha")
    return edge_bound_census(sc, sc.edge_p, sc.edge_r, alpha).to_table()


def _run_craig_simon(sc: Scenario, config: dict) -> ResultTable:
    if not sc.e_grid or not sc.n_grid:
        raise ValueError("craig-simon needs energy and n grids")
    n_max = max(sc.n_grid)
    window = sample_window(sc.law(), -n_max, 3 * n_max + 1, sc.stream().child(0))
    gammas, _ = gamma_grid(sc, sc.stream().child(1))
    scan = craig_simon_scan(window, sc.e_grid, sc.n_grid, gammas)
    rows = []
    for f, family in enumerate(CS_FAMILIES):
        for i, e in enumerate(scan.e_grid):
            for j, n in enumerate(scan.n_grid):
                rows.append(
                    {
                        "scenario_id": sc.scenario_id, "seed": sc.seed, "family": family,
                        "energy": float(e), "n": int(n), "excess": float(scan.excess[f, i, j]),
                    }
                )
    summary = {"max_excess": scan.max_excess} | {
        f"max_excess_{k}": v for k, v in scan.family_max().items()
    }
    return ResultTable("craig_simon", COLUMNS["craig-simon"], tuple(rows), summary)


def _run_spectrum(sc: Scenario, config: dict) -> ResultTable:
    if sc.box is None:
        raise ValueError("spectrum needs a box")
    lo, hi = sc.box
    window = sample_window(sc.law(), lo, hi, sc.stream().child(0))
    values = eigenvalues(TridiagonalBox(window))
    rows = tuple(
        {
            "scenario_id": sc.scenario_id, "seed": sc.seed, "law_tag": sc.law_tag,
            "box_lo": lo, "box_hi": hi, "j": int(j), "eigenvalue": float(v),
        }
        for j, v in enumerate(values)
    )
    summary = {"dim": len(values), "min": float(values[0]), "max": float(values[-1])}
    return ResultTable("spectrum", COLUMNS["spectrum"], rows, summary)


_RUNNERS = {
    "lyapunov": _run_lyapunov,
    "lde": _run_lde,
    "lift-check": _run_lift,
    "conditions": _run_conditions,
    "localize": _run_localize,
    "census": _run_census,
    "edge-census": _run_edge_census,
    "craig-simon": _run_craig_simon,
    "spectrum": _run_spectrum,
}


# ---------------------------------------------------------------------------
# expectations
# ---------------------------------------------------------------------------

def check_expected(metrics: dict, expected: dict | None) -> list[str]:
    """Compare summary metrics against a pinned-expectation block."""
    if not expected:
        return []
    failures = []
    for name, spec in expected.get("metrics", {}).items():
        if name not in metrics:
            failures.append(f"expected metric {name!r} missing from results")
            continue
        got = metrics[name]
        if "value" in spec:
            tol = spec.get("abs_tol", abs(spec["value"]) * spec.get("rel_tol", 0.0))
            if not (abs(got - spec["value"]) <= tol):
                failures.append(f"{name}: got {got!r}, expected {spec['value']!r} +- {tol!r}")
        if "min" in spec and not got >= spec["min"]:
            failures.append(f"{name}: got {got!r}, expected >= {spec['min']!r}")
        if "max" in spec and not got <= spec["max"]:
            failures.append(f"{name}: got {got!r}, expected <= {spec['max']!r}")
    return failures


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

def dispatch(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as err:
        print(parser.format_usage(), file=sys.stderr, end="")
        print(f"error: {err}", file=sys.stderr)
        return ExitStatus.VALIDATION
    if args.command is None:
        print(parser.format_usage(), file=sys.stderr, end="")
        print("error: a subcommand is required", file=sys.stderr)
        return ExitStatus.VALIDATION
    config_path = Path(args.config)
    try:
        config = json.loads(config_path.read_text())
    except (OSError, json.JSONDecodeError) as err:
        print(f"error: cannot read config {config_path}: {err}", file=sys.stderr)
        return ExitStatus.VALIDATION
    violations = validate(config, command_kind=args.command.replace("-", "_"))
    if violations:
        for v in violations:
            print(f"invalid config: {v}", file=sys.stderr)
        return ExitStatus.VALIDATION
    scenario = scenario_from_config(
        config, seed=args.seed, workers=args.workers, default_id=config_path.stem
    )
    out_format = args.format or config.get("output", {}).get("format", "csv")
    print(
        f"# {args.command}: scenario={scenario.scenario_id} seed={scenario.seed} "
        f"workers={scenario.workers}",
        file=sys.stderr,
    )
    try:
        table = _RUNNERS[args.command](scenario, config)
    except (ValueError, ArithmeticError, RuntimeError, OSError, np.linalg.LinAlgError) as err:
        print(f"error: {err}", file=sys.stderr)
        return ExitStatus.RUNTIME
    manifest = RunManifest.create(config, scenario.seed, scenario.workers)
    out_dir = args.out or config.get("output", {}).get("path")
    if out_dir is not None:
        try:
            out_path = Path(out_dir)
            out_path.mkdir(parents=True, exist_ok=True)
            paths = persist(table, manifest, out_path / scenario.scenario_id)
        except OSError as err:
            print(f"error: {err}", file=sys.stderr)
            return ExitStatus.RUNTIME
        for p in paths:
            print(f"# wrote {p}", file=sys.stderr)
    elif out_format == "json":
        print(json.dumps(table.to_json_dict(manifest)))
    else:
        sys.stdout.write(table.csv_text())
    failures = check_expected(table.metrics(), scenario.expected)
    if failures:
        for f in failures:
            print(f"expectation {'failed' if args.assert_mode else 'warning'}: {f}", file=sys.stderr)
        if args.assert_mode:
            return ExitStatus.ASSERTION
    return ExitStatus.OK


def main(argv: list[str] | None = None) -> int:
    return int(dispatch(argv))


if __name__ == "__main__":
    sys.exit(main())
