"""Desk-scale end-to-end studies with reproducibility manifests.

Each experiment is a pure function of (scenario, seed): localization scans
of finite boxes, the singularity census over paired boxes, the edge-zone
potential-bound census, and the infimum of the growth rate over an energy
interval.  Results are packaged as tables whose CSV serialization is
byte-identical across re-runs and worker counts.
"""
from __future__ import annotations

import hashlib
import json
import math
import warnings
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .estimators import lyapunov_mc
from .measures import (
    BaseMeasure,
    DensitySequence,
    FiniteAtoms,
    Identity,
    PotentialWindow,
    ProductLaw,
    sample_window,
    sample_windows,
)
from .rng import RngStream
from .spectral import (
    ResonantEnergyError,
    TridiagonalBox,
    classify_regularity,
    eigenpairs,
)

#: minimum decay rate / regularity rate used in pass tests, so that the
#: free-operator negative control cannot pass on noise around zero
RATE_FLOOR = 0.02

LOCALIZATION_COLUMNS = (
    "scenario_id", "seed", "law_tag", "box_lo", "box_hi", "j", "eigenvalue",
    "gamma_hat", "gamma_stderr", "decay_rate", "center", "pass",
)
CENSUS_COLUMNS = ("scenario_id", "seed", "law_tag", "n", "site", "verdict")


# ---------------------------------------------------------------------------
# scenarios and manifests
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Scenario:
    """One fully specified experiment: law, energy window, grids, seed."""

    scenario_id: str
    kind: str
    base: BaseMeasure
    densities: DensitySequence
    seed: int
    samples: int
    e_grid: tuple[float, ...] = ()
    n_grid: tuple[int, ...] = ()
    interval: tuple[float, float] | None = None
    box: tuple[int, int] | None = None
    energy: complex | float | None = None
    epsilon: float | None = None
    statistic: str = "log_norm"
    rate_power: float = 1.0
    edge_p: float | None = None
    edge_r: float | None = None
    gamma_n: int = 1000
    gamma_samples: int = 200
    workers: int = 1
    expected: dict | None = None

    def __post_init__(self) -> None:
        if self.seed < 0:
            raise ValueError("seed must be a nonnegative integer")
        if self.samples < 1:
            raise ValueError("samples must be >= 1")
        if self.interval is not None and not self.interval[0] < self.interval[1]:
            raise ValueError("energy interval requires s < t")
        if self.n_grid and any(n < 1 for n in self.n_grid):
            raise ValueError("n grid entries must be >= 1")

    @property
    def law_tag(self) -> str:
        return "exact" if isinstance(self.densities, Identity) else "approximate"

    def law(self) -> ProductLaw:
        if isinstance(self.densities, Identity):
            return ProductLaw.exact(self.base)
        return ProductLaw.approximate(self.base, self.densities)

    def exact_law(self) -> ProductLaw:
        return ProductLaw.exact(self.base)

    def stream(self) -> RngStream:
        return RngStream(self.seed)


def config_digest(config: dict) -> str:
    """SHA-256 of the canonical JSON form; stable under key reordering."""
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


@dataclass(frozen=True)
class RunManifest:
    seed: int
    config_digest: str
    code_version: str
    worker_count: int
    created_utc: str

    @classmethod
    def create(cls, config: dict, seed: int, workers: int) -> "RunManifest":
        return cls(
            seed=seed,
            config_digest=config_digest(config),
            code_version=__version__,
            worker_count=workers,
            created_utc=datetime.now(timezone.utc).isoformat(),
        )

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "config_digest": self.config_digest,
            "code_version": self.code_version,
            "worker_count": self.worker_count,
            "created_utc": self.created_utc,
        }


# ---------------------------------------------------------------------------
# result tables and persistence
# ---------------------------------------------------------------------------

def format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


@dataclass(frozen=True)
class ResultTable:
    """A tabular experiment result: fixed columns, rows, and a summary."""

    kind: str
    columns: tuple[str, ...]
    rows: tuple[dict, ...]
    summary: dict = field(default_factory=dict)

    def csv_text(self) -> str:
        lines = [",".join(self.columns)]
        for row in self.rows:
            lines.append(",".join(format_cell(row.get(c)) for c in self.columns))
        return "\n".join(lines) + "\n"

    def to_json_dict(self, manifest: RunManifest | None = None) -> dict:
        out = {
            "kind": self.kind,
            "columns": list(self.columns),
            "rows": [
                {c: _jsonable(row.get(c)) for c in self.columns} for row in self.rows
            ],
            "summary": _jsonable(self.summary),
        }
        if manifest is not None:
            out["manifest"] = manifest.to_dict()
        return out

    def metrics(self) -> dict:
        """Flat numeric view of the summary, for pinned-expectation checks."""
        return {
            k: v
            for k, v in _jsonable(self.summary).items()
            if isinstance(v, (int, float, bool)) and not isinstance(v, str)
        }


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (bool, int, float, str)) or value is None:
        return value
    return str(value)


def persist(report, manifest: RunManifest, path) -> list[Path]:
    """Write CSV, JSON, and manifest files; returns the written paths.

    ``path`` is a directory (files named after the report kind) or a file
    stem.  Re-running with the same scenario and seed reproduces the CSV
    byte for byte; only the manifest timestamp differs.
    """
    table: ResultTable = report.to_table() if hasattr(report, "to_table") else report
    p = Path(path)
    if p.is_dir():
        stem = p / table.kind
    else:
        stem = p.with_suffix("") if p.suffix in (".csv", ".json") else p
    paths = [stem.with_suffix(".csv"), stem.with_suffix(".json"), Path(f"{stem}.manifest.json")]
    try:
        stem.parent.mkdir(parents=True, exist_ok=True)
        paths[0].write_text(table.csv_text())
        paths[1].write_text(json.dumps(table.to_json_dict(manifest), indent=1) + "\n")
        paths[2].write_text(json.dumps(manifest.to_dict(), indent=1) + "\n")
    except OSError as err:
        raise OSError(f"failed to persist results under {stem}: {err}") from err
    return paths


def load_report(path) -> dict:
    """Read back a persisted report (the JSON file of a stem)."""
    p = Path(path)
    if p.suffix != ".json":
        p = p.with_suffix(".json")
    try:
        return json.loads(p.read_text())
    except OSError as err:
        raise OSError(f"failed to load report from {p}: {err}") from err


# ---------------------------------------------------------------------------
# shared pieces
# ---------------------------------------------------------------------------

def gamma_grid(scenario: Scenario, stream: RngStream) -> tuple[np.ndarray, np.ndarray]:
    """Growth-rate estimates (and standard errors) on the scenario's energy
    grid, under the exact law of the scenario's base measure."""
    law = scenario.exact_law()
    gammas = np.empty(len(scenario.e_grid))
    errs = np.empty(len(scenario.e_grid))
    for i, e in enumerate(scenario.e_grid):
        est = lyapunov_mc(
            law, e, scenario.gamma_n, scenario.gamma_samples, stream.child(i),
            workers=scenario.workers,
        )
        gammas[i] = est.mean
        errs[i] = est.stderr
    return gammas, errs


def _require_interval_coverage(scenario: Scenario) -> None:
    if scenario.interval is None:
        raise ValueError(f"experiment {scenario.kind!r} needs an energy interval")
    if not scenario.e_grid:
        raise ValueError("energy grid must not be empty")
    s, t = scenario.interval
    grid = np.asarray(scenario.e_grid)
    if grid[0] > s or grid[-1] < t:
        raise ValueError("energy grid must cover the interval")
    if len(grid) > 1 and float(np.max(np.diff(grid))) > 0.1 + 1e-12:
        raise ValueError("energy grid spacing must be <= 0.1")


def nu_inf(scenario: Scenario) -> float:
    """Lower estimate of the infimum of the growth rate over the interval.

    Returns ``min over the grid of (gamma_hat - stderr)`` and warns when any
    grid estimate is not separated from zero by three standard errors.
    """
    _require_interval_coverage(scenario)
    gammas, errs = gamma_grid(scenario, scenario.stream().child(2))
    if np.any(gammas < 3.0 * errs):
        warnings.warn(
            "growth rate is not separated from zero on the grid; "
            "the interval may contain extended states",
            stacklevel=2,
        )
    return float(np.min(gammas - errs))


def _epsilon0(nu_hat: float) -> float:
    return min(0.1, max(nu_hat, 0.0) / 10.0)


def _decay_fit(vector: np.ndarray, center_idx: int) -> float:
    """Exponential decay rate of |vector| away from its localization center:
    least squares on the middle 60% of the decay range, at least 10 sites
    from the center and excluding the last 5 sites."""
    amp = np.abs(vector)
    dist = np.abs(np.arange(len(amp)) - center_idx).astype(float)
    reach = float(np.max(dist))
    keep = (
        (dist >= max(10.0, 0.2 * reach))
        & (dist <= min(0.8 * reach, reach - 5.0))
        & (amp > 0.0)
    )
    if np.count_nonzero(keep) < 2:
        return 0.0
    slope = np.polyfit(dist[keep], np.log(amp[keep]), 1)[0]
    return float(-slope)


# ---------------------------------------------------------------------------
# localization experiment
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LocalizationRow:
    j: int
    eigenvalue: float
    gamma_hat: float
    gamma_stderr: float
    decay_rate: float
    center: int
    passed: bool
    largest_singular_n: int | None


@dataclass(frozen=True)
class LocalizationReport:
    scenario_id: str
    seed: int
    law_tag: str
    box: tuple[int, int]
    nu_hat: float
    epsilon0: float
    rows: tuple[LocalizationRow, ...]
    skips: tuple[tuple[int, int, int], ...]  # (j, n, site) with resonant energy

    @property
    def pass_fraction(self) -> float:
        if not self.rows:
            return 0.0
        return sum(r.passed for r in self.rows) / len(self.rows)

    def to_table(self) -> ResultTable:
        rows = tuple(
            {
                "scenario_id": self.scenario_id,
                "seed": self.seed,
                "law_tag": self.law_tag,
                "box_lo": self.box[0],
                "box_hi": self.box[1],
                "j": r.j,
                "eigenvalue": r.eigenvalue,
                "gamma_hat": r.gamma_hat,
                "gamma_stderr": r.gamma_stderr,
                "decay_rate": r.decay_rate,
                "center": r.center,
                "pass": r.passed,
            }
            for r in self.rows
        )
        summary = {
            "pass_fraction": self.pass_fraction,
            "eigenfunctions": len(self.rows),
            "nu_hat": self.nu_hat,
            "epsilon0": self.epsilon0,
            "largest_singular_n": max(
                (r.largest_singular_n for r in self.rows if r.largest_singular_n is not None),
                default=None,
            ),
            "per_eigenfunction_largest_singular_n": [r.largest_singular_n for r in self.rows],
            "resonant_skips": len(self.skips),
        }
        return ResultTable("localization", LOCALIZATION_COLUMNS, rows, summary)


def run_localization(scenario: Scenario) -> LocalizationReport:
    """Diagonalize one sampled box and test eigenfunction decay in the
    energy interval.

    Each in-interval eigenfunction passes when its fitted decay rate reaches
    half the reference growth rate at its eigenvalue (with an absolute floor
    of :data:`RATE_FLOOR`).  Sites ``2n`` and ``2n+1`` are additionally
    classified for regularity at every grid radius with rate
    ``gamma_hat - 8 eps0``, and the largest radius still singular is
    reported per eigenfunction.
    """
    if scenario.box is None:
        raise ValueError("localization needs a box")
    box_lo, box_hi = scenario.box
    if box_hi - box_lo + 1 < 200:
        raise ValueError("localization box must have dimension >= 200")
    _require_interval_coverage(scenario)
    stream = scenario.stream()
    n_max = max(scenario.n_grid) if scenario.n_grid else 0
    win_lo = min(box_lo, 0)
    win_hi = max(box_hi, 3 * n_max + 1)
    window = sample_window(scenario.law(), win_lo, win_hi, stream.child(0))
    gammas, errs = gamma_grid(scenario, stream.child(1))
    nu_hat = float(np.min(gammas - errs))
    eps0 = _epsilon0(nu_hat)

    box = TridiagonalBox(window.slice(box_lo, box_hi))
    values, vectors = eigenpairs(box)
    s, t = scenario.interval  # type: ignore[misc]
    rows = []
    skips = []
    for j in np.nonzero((values >= s) & (values <= t))[0]:
        lam = float(values[j])
        g_hat = float(np.interp(lam, scenario.e_grid, gammas))
        g_err = float(np.interp(lam, scenario.e_grid, errs))
        vec = vectors[:, j]
        center_idx = int(np.argmax(np.abs(vec)))
        rate = _decay_fit(vec, center_idx)
        passed = rate >= max(0.5 * g_hat, RATE_FLOOR)
        largest_singular = None
        c_rate = max(g_hat - 8.0 * eps0, RATE_FLOOR)
        for n in scenario.n_grid:
            for site in (2 * n, 2 * n + 1):
                try:
                    report = classify_regularity(window, site, n, c_rate, lam)
                except ResonantEnergyError:
                    skips.append((int(j), int(n), site))
                    continue
                if not report.is_regular:
                    largest_singular = max(largest_singular or 0, int(n))
        rows.append(
            LocalizationRow(
                j=int(j),
                eigenvalue=lam,
                gamma_hat=g_hat,
                gamma_stderr=g_err,
                decay_rate=rate,
                center=box_lo + center_idx,
                passed=bool(passed),
                largest_singular_n=largest_singular,
            )
        )
    return LocalizationReport(
        scenario.scenario_id, scenario.seed, scenario.law_tag,
        (box_lo, box_hi), nu_hat, eps0, tuple(rows), tuple(skips),
    )


# ---------------------------------------------------------------------------
# singularity census
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CensusReport:
    scenario_id: str
    seed: int
    law_tag: str
    n_grid: tuple[int, ...]
    rows: tuple[tuple[int, int, str], ...]  # (n, site, verdict)
    counts: dict[int, int]
    zero_from: int | None
    skips: tuple[tuple[int, int, float], ...]

    def to_table(self) -> ResultTable:
        rows = tuple(
            {
                "scenario_id": self.scenario_id,
                "seed": self.seed,
                "law_tag": self.law_tag,
                "n": n,
                "site": site,
                "verdict": verdict,
            }
            for n, site, verdict in self.rows
        )
        summary = {
            "counts": {str(n): c for n, c in self.counts.items()},
            "zero_from": self.zero_from,
            "max_count": max(self.counts.values()) if self.counts else 0,
            "resonant_skips": len(self.skips),
        }
        return ResultTable("census", CENSUS_COLUMNS, rows, summary)


def singularity_census(scenario: Scenario) -> CensusReport:
    """Count singular sites among ``{+-2n, +-(2n+1)}`` for each grid radius.

    A site is reported singular when the regularity test fails at any grid
    energy, with rate ``gamma_hat(E) - 8 eps0``.  Both signs are scanned:
    site-dependent densities break the reflection symmetry of the exact law.
    """
    _require_interval_coverage(scenario)
    if not scenario.n_grid:
        raise ValueError("census needs a radius grid")
    stream = scenario.stream()
    n_max = max(scenario.n_grid)
    span = 3 * n_max + 1
    window = sample_window(scenario.law(), -span, span, stream.child(0))
    gammas, errs = gamma_grid(scenario, stream.child(1))
    nu_hat = float(np.min(gammas - errs))
    eps0 = _epsilon0(nu_hat)
    rows = []
    counts: dict[int, int] = {}
    skips = []
    for n in scenario.n_grid:
        count = 0
        for site in (2 * n, 2 * n + 1, -2 * n, -(2 * n + 1)):
            singular = False
            for e, g_hat in zip(scenario.e_grid, gammas):
                c_rate = max(g_hat - 8.0 * eps0, RATE_FLOOR)
                try:
                    report = classify_regularity(window, site, n, c_rate, e)
                except ResonantEnergyError:
                    skips.append((int(n), site, e))
                    continue
                if not report.is_regular:
                    singular = True
                    break
            rows.append((int(n), site, "singular" if singular else "regular"))
            count += singular
        counts[int(n)] = count
    zero_from = None
    for n in sorted(counts, reverse=True):
        if counts[n] == 0:
            zero_from = n
        else:
            break
    return CensusReport(
        scenario.scenario_id, scenario.seed, scenario.law_tag,
        tuple(scenario.n_grid), tuple(rows), counts, zero_from, tuple(skips),
    )


# ---------------------------------------------------------------------------
# edge-zone potential bound census
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EdgeCensusReport:
    scenario_id: str
    seed: int
    p: float
    r: float
    alpha: float
    rows: tuple[dict, ...]
    last_violation_n: int | None
    persistent: bool

    def to_table(self) -> ResultTable:
        columns = (
            "scenario_id", "seed", "n", "trials", "zone_sites", "threshold",
            "site_violations", "site_freq", "site_pred",
            "event_count", "event_freq", "event_pred", "chebyshev_bound",
        )
        summary = {
            "p": self.p,
            "r": self.r,
            "alpha": self.alpha,
            "last_violation_n": self.last_violation_n,
            "persistent_violations": self.persistent,
        }
        return ResultTable("edge_census", columns, self.rows, summary)


def _site_tail(scenario: Scenario, site: int, threshold: float) -> float:
    """Exact P[|V_site| > threshold] under the scenario law, when available."""
    densities = scenario.densities
    if densities.is_identity_at(site):
        return scenario.base.tail_probability(threshold)
    beta = densities.atom_weights_at(site)
    if beta is not None and isinstance(scenario.base, FiniteAtoms):
        locs = scenario.base.locations
        return float(np.sum(np.asarray(beta)[np.abs(locs) > threshold]))
    return math.nan


def edge_bound_census(
    scenario: Scenario, p: float, r: float, alpha: float | None = None
) -> EdgeCensusReport:
    """Count potential values beyond ``n^(r/alpha)`` near the window edges.

    For each grid radius ``n`` the two zones reach ``p log n`` sites in from
    the endpoints of ``[-n, n]``.  Violation frequencies are compared against
    the exact per-site tail probability (when computable) and against the
    moment/union upper bound ``2 C (1 + 2 p log n) / n^r``.  Passing an
    ``alpha`` larger than the true moment order makes the threshold too slow
    and the violations persist; the report flags that.
    """
    if r <= 1:
        raise ValueError("r must exceed 1")
    if p <= 0:
        raise ValueError("p must be positive")
    if not scenario.n_grid:
        raise ValueError("edge census needs a radius grid")
    alpha = scenario.base.alpha_moment if alpha is None else float(alpha)
    stream = scenario.stream()
    law = scenario.law()
    moment = scenario.base.abs_moment(alpha)
    if not isinstance(scenario.densities, Identity):
        sups = [
            scenario.densities.sup_norm(s)
            for n in scenario.n_grid
            for s in scenario.densities.perturbed_sites(-n, n)
        ]
        moment *= max(sups, default=1.0)
    rows = []
    last_violation = None
    for i, n in enumerate(scenario.n_grid):
        width = int(p * math.log(n)) if n > 1 else 0
        zone = sorted(
            set(range(-n, min(-n + width, n) + 1)) | set(range(max(n - width, -n), n + 1))
        )
        threshold = float(n) ** (r / alpha)
        wins = sample_windows(law, -n, n, scenario.samples, stream.child(i))
        cols = [s + n for s in zone]
        exceed = np.abs(wins[:, cols]) > threshold
        site_viol = int(np.count_nonzero(exceed))
        event_count = int(np.count_nonzero(np.any(exceed, axis=1)))
        tails = [_site_tail(scenario, s, threshold) for s in zone]
        if any(math.isnan(t) for t in tails):
            site_pred = event_pred = math.nan
        elif any(t >= 1.0 for t in tails):
            site_pred = math.fsum(tails) / len(zone)
            event_pred = 1.0
        else:
            site_pred = math.fsum(tails) / len(zone)
            event_pred = 1.0 - math.exp(math.fsum(math.log1p(-t) for t in tails))
        chebyshev = (
            2.0 * moment * (1.0 + 2.0 * p * math.log(n)) / float(n) ** r
            if math.isfinite(moment)
            else math.inf
        )
        if event_count > 0:
            last_violation = int(n)
        rows.append(
            {
                "scenario_id": scenario.scenario_id,
                "seed": scenario.seed,
                "n": int(n),
                "trials": scenario.samples,
                "zone_sites": len(zone),
                "threshold": threshold,
                "site_violations": site_viol,
                "site_freq": site_viol / (scenario.samples * len(zone)),
                "site_pred": site_pred,
                "event_count": event_count,
                "event_freq": event_count / scenario.samples,
                "event_pred": event_pred,
                "chebyshev_bound": chebyshev,
            }
        )
    persistent = rows[-1]["event_freq"] > 0.05
    return EdgeCensusReport(
        scenario.scenario_id, scenario.seed, float(p), float(r), float(alpha),
        tuple(rows), last_violation, persistent,
    )
