"""Single-site measures, perturbing densities, and lattice product laws.

The potential of the lattice operator is random: site ``n`` carries a real
value drawn either from a fixed single-site law ``mu`` (the *exact* product
law) or from the reweighted law ``g_n * mu`` (the *approximate* product law),
where each ``g_n`` is a nonnegative density with unit mass against ``mu``.
This module owns

* the three supported single-site measures (finite atoms, uniform interval,
  symmetric/one-sided Pareto tail),
* density sequences given by rule (identity, per-site atom reweighting,
  bump schedules on a site set),
* window sampling under either product law,
* log Radon-Nikodym products over finite windows, and
* numeric diagnostics for the three decay conditions on ``log ||g_n||_inf``
  (Cesaro-mean, center-uniform Cesaro-mean, summable).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .rng import RngStream

ATOM_WEIGHT_TOL = 1e-12
DENSITY_MASS_TOL = 1e-10
CONDITION_TOL = 0.05

VERDICT_HOLDS = "holds-empirically"
VERDICT_VIOLATED = "violated"
VERDICT_INCONCLUSIVE = "inconclusive"

CONDITION_MEAN = "mean_log_sup"
CONDITION_UNIFORM = "uniform_mean_log_sup"
CONDITION_SUMMABLE = "summable_log_sup"


class RejectionCapError(RuntimeError):
    """Raised when the accept/reject sampler for a perturbed site stalls."""


# ---------------------------------------------------------------------------
# single-site measures
# ---------------------------------------------------------------------------

class BaseMeasure:
    """Common interface of the single-site laws.

    Subclasses are immutable and carry ``alpha_moment``, the declared moment
    order ``alpha`` for which the absolute moment of the law is finite.
    """

    alpha_moment: float

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        raise NotImplementedError

    def in_support(self, values: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def tail_probability(self, threshold: float) -> float:
        """P[|X| > threshold] under the measure."""
        raise NotImplementedError

    def abs_moment(self, alpha: float) -> float:
        """E[|X|^alpha]; may be ``inf`` for heavy tails."""
        raise NotImplementedError


@dataclass(frozen=True)
class FiniteAtoms(BaseMeasure):
    """A purely atomic law: finitely many locations with positive weights.

    Weights must sum to one within ``1e-12`` and locations must be strictly
    distinct.  At least two atoms are required unless ``allow_trivial`` is
    set; the escape hatch exists only so closed-form constant-potential
    oracles can be built in tests.
    """

    atoms: tuple[tuple[float, float], ...]
    alpha_moment: float = 1.0
    allow_trivial: bool = False

    def __post_init__(self) -> None:
        if self.alpha_moment <= 0:
            raise ValueError("alpha_moment must be positive")
        if len(self.atoms) == 0:
            raise ValueError("at least one atom required")
        if len(self.atoms) < 2 and not self.allow_trivial:
            raise ValueError(
                "measure must be supported on at least two points "
                "(pass allow_trivial=True only for closed-form test oracles)"
            )
        locs = [a[0] for a in self.atoms]
        if len(set(locs)) != len(locs):
            raise ValueError("atom locations must be strictly distinct")
        weights = [a[1] for a in self.atoms]
        if any(w <= 0 for w in weights):
            raise ValueError("atom weights must be positive")
        if abs(math.fsum(weights) - 1.0) > ATOM_WEIGHT_TOL:
            raise ValueError("atom weights must sum to 1 within 1e-12")

    @property
    def locations(self) -> np.ndarray:
        return np.array([a[0] for a in self.atoms])

    @property
    def weights(self) -> np.ndarray:
        return np.array([a[1] for a in self.atoms])

    def atom_index(self, values: np.ndarray) -> np.ndarray:
        """Map values to atom indices; -1 where the value is not an atom."""
        values = np.asarray(values)
        idx = np.full(values.shape, -1, dtype=np.int64)
        for m, (loc, _) in enumerate(self.atoms):
            idx[values == loc] = m
        return idx

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        choice = rng.choice(len(self.atoms), size=size, p=self.weights)
        return self.locations[choice]

    def in_support(self, values: np.ndarray) -> np.ndarray:
        return self.atom_index(values) >= 0

    def tail_probability(self, threshold: float) -> float:
        return float(math.fsum(w for loc, w in self.atoms if abs(loc) > threshold))

    def abs_moment(self, alpha: float) -> float:
        return float(math.fsum(w * abs(loc) ** alpha for loc, w in self.atoms))


@dataclass(frozen=True)
class UniformInterval(BaseMeasure):
    """Lebesgue-uniform law on ``[lo, hi]``."""

    lo: float
    hi: float
    alpha_moment: float = 1.0

    def __post_init__(self) -> None:
        if not self.lo < self.hi:
            raise ValueError("uniform interval requires lo < hi")
        if self.alpha_moment <= 0:
            raise ValueError("alpha_moment must be positive")

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.uniform(self.lo, self.hi, size=size)

    def in_support(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values)
        return (values >= self.lo) & (values <= self.hi)

    def tail_probability(self, threshold: float) -> float:
        lo, hi = self.lo, self.hi
        width = hi - lo
        above = max(0.0, hi - max(lo, threshold))
        below = max(0.0, min(hi, -threshold) - lo)
        return (above + below) / width

    def abs_moment(self, alpha: float) -> float:
        # int |x|^a dx / width, split at 0 when the interval straddles it
        a = alpha

        def prim(x: float) -> float:
            return abs(x) ** (a + 1) / (a + 1)

        if self.lo >= 0 or self.hi <= 0:
            return abs(prim(self.hi) - prim(self.lo)) / (self.hi - self.lo)
        return (prim(self.hi) + prim(self.lo)) / (self.hi - self.lo)


@dataclass(frozen=True)
class ParetoTail(BaseMeasure):
    """Pareto law with density ~ |x|^-(exponent+1) beyond ``scale``.

    ``symmetric=True`` puts half the mass on each sign; otherwise the law is
    supported on ``[scale, inf)``.  The declared ``alpha_moment`` must be
    strictly below ``exponent`` so the alpha-th absolute moment is finite.
    """

    scale: float
    exponent: float
    symmetric: bool = True
    alpha_moment: float = 1.0

    def __post_init__(self) -> None:
        if self.scale <= 0:
            raise ValueError("scale must be positive")
        if self.exponent <= 0:
            raise ValueError("exponent must be positive")
        if self.alpha_moment <= 0:
            raise ValueError("alpha_moment must be positive")
        if not self.exponent > self.alpha_moment:
            raise ValueError(
                "Pareto exponent must exceed alpha_moment, otherwise the "
                "declared moment is infinite"
            )

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        u = rng.random(size)
        x = self.scale * u ** (-1.0 / self.exponent)
        if self.symmetric:
            signs = np.where(rng.random(size) < 0.5, -1.0, 1.0)
            x = x * signs
        return x

    def in_support(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values)
        if self.symmetric:
            return np.abs(values) >= self.scale
        return values >= self.scale

    def tail_probability(self, threshold: float) -> float:
        if threshold <= self.scale:
            return 1.0
        return (self.scale / threshold) ** self.exponent

    def abs_moment(self, alpha: float) -> float:
        if alpha >= self.exponent:
            return math.inf
        return self.exponent * self.scale**alpha / (self.exponent - alpha)


# ---------------------------------------------------------------------------
# site sets for bump schedules
# ---------------------------------------------------------------------------

class SiteSet:
    """A subset of the integer lattice given by rule."""

    def contains(self, n: int) -> bool:
        raise NotImplementedError

    def sites_in(self, lo: int, hi: int) -> list[int]:
        raise NotImplementedError


@dataclass(frozen=True)
class ExplicitSites(SiteSet):
    sites: frozenset[int]

    def contains(self, n: int) -> bool:
        return n in self.sites

    def sites_in(self, lo: int, hi: int) -> list[int]:
        return sorted(s for s in self.sites if lo <= s <= hi)


@dataclass(frozen=True)
class PowersOfTwoSites(SiteSet):
    """Sites n with |n| a power of two (both signs), i.e. +-1, +-2, +-4, ...

    The natural density of this set is zero, so a bounded bump placed on it
    keeps the Cesaro-mean conditions while breaking summability.
    """

    def contains(self, n: int) -> bool:
        m = abs(n)
        return m > 0 and (m & (m - 1)) == 0

    def sites_in(self, lo: int, hi: int) -> list[int]:
        out = []
        p = 1
        limit = max(abs(lo), abs(hi))
        while p <= limit:
            for s in (-p, p):
                if lo <= s <= hi:
                    out.append(s)
            p *= 2
        return sorted(out)


# ---------------------------------------------------------------------------
# density sequences
# ---------------------------------------------------------------------------

class DensitySequence:
    """The rule ``n -> g_n`` defining the approximate product law.

    Densities are given by rule rather than by table, so any finite window of
    the lattice is reachable; sites outside a schedule's declared support
    default to ``g_n == 1``.  Every ``g_n`` is nonnegative on the support of
    the base measure and integrates to one against it.
    """

    def eval(self, n: int, values: np.ndarray) -> np.ndarray:
        """g_n evaluated at points of the support."""
        raise NotImplementedError

    def sup_norm(self, n: int) -> float:
        raise NotImplementedError

    def log_sup_norm(self, n: int) -> float:
        s = self.sup_norm(n)
        return 0.0 if s == 1.0 else math.log(s)

    def is_identity_at(self, n: int) -> bool:
        raise NotImplementedError

    def perturbed_sites(self, lo: int, hi: int) -> list[int]:
        """Sites in [lo, hi] where g_n is not identically 1."""
        raise NotImplementedError

    def atom_weights_at(self, n: int) -> np.ndarray | None:
        """Reweighted atom weights at site n, if the base is atomic."""
        return None


@dataclass(frozen=True)
class Identity(DensitySequence):
    """g_n == 1 for every site: the approximate law equals the exact one."""

    def eval(self, n: int, values: np.ndarray) -> np.ndarray:
        return np.ones_like(np.asarray(values, dtype=float))

    def sup_norm(self, n: int) -> float:
        return 1.0

    def is_identity_at(self, n: int) -> bool:
        return True

    def perturbed_sites(self, lo: int, hi: int) -> list[int]:
        return []


def _check_atom_reweight(base: FiniteAtoms, beta: Sequence[float]) -> tuple[float, ...]:
    beta = tuple(float(b) for b in beta)
    if len(beta) != len(base.atoms):
        raise ValueError("reweight vector length must match the atom count")
    if any(b < 0 for b in beta):
        raise ValueError("reweighted atom weights must be nonnegative")
    if abs(math.fsum(beta) - 1.0) > ATOM_WEIGHT_TOL:
        raise ValueError("reweighted atom weights must sum to 1")
    return beta


@dataclass(frozen=True)
class AtomReweight(DensitySequence):
    """Per-site reweighting of an atomic base measure.

    ``schedule`` maps a site to its reweighted atom weights ``beta``; the
    density there is ``g_n(x_m) = beta_m / w_m`` against base weights ``w``,
    so the sup norm is exactly ``max_m beta_m / w_m``.  Unscheduled sites are
    identity.
    """

    base: FiniteAtoms
    schedule: Mapping[int, tuple[float, ...]]

    def __post_init__(self) -> None:
        checked = {int(n): _check_atom_reweight(self.base, b) for n, b in self.schedule.items()}
        object.__setattr__(self, "schedule", checked)

    def _beta(self, n: int) -> tuple[float, ...] | None:
        return self.schedule.get(n)

    def eval(self, n: int, values: np.ndarray) -> np.ndarray:
        beta = self._beta(n)
        values = np.asarray(values, dtype=float)
        if beta is None:
            return np.ones_like(values)
        idx = self.base.atom_index(values)
        if np.any(idx < 0):
            raise ValueError(f"value outside atomic support at site {n}")
        ratios = np.asarray(beta) / self.base.weights
        return ratios[idx]

    def sup_norm(self, n: int) -> float:
        beta = self._beta(n)
        if beta is None:
            return 1.0
        return float(np.max(np.asarray(beta) / self.base.weights))

    def is_identity_at(self, n: int) -> bool:
        return self._beta(n) is None

    def perturbed_sites(self, lo: int, hi: int) -> list[int]:
        return sorted(n for n in self.schedule if lo <= n <= hi)

    def atom_weights_at(self, n: int) -> np.ndarray | None:
        beta = self._beta(n)
        return None if beta is None else np.asarray(beta)


def _density_mass(base: BaseMeasure, fn: Callable[[np.ndarray], np.ndarray]) -> float:
    """Integral of a density against the base measure (quadrature for the
    continuous variants, exact sum for atoms)."""
    if isinstance(base, FiniteAtoms):
        return float(np.sum(fn(base.locations) * base.weights))
    nodes, weights = np.polynomial.legendre.leggauss(512)
    if isinstance(base, UniformInterval):
        x = 0.5 * (base.hi - base.lo) * nodes + 0.5 * (base.hi + base.lo)
        return float(np.sum(fn(x) * weights) * 0.5)
    if isinstance(base, ParetoTail):
        # substitute u = (scale/x)^exponent, du uniform on (0, 1]
        u = 0.5 * nodes + 0.5
        x = base.scale * u ** (-1.0 / base.exponent)
        if base.symmetric:
            return float(0.5 * (np.sum(fn(x) * weights) + np.sum(fn(-x) * weights)) * 0.5)
        return float(np.sum(fn(x) * weights) * 0.5)
    raise TypeError(f"unsupported base measure {type(base).__name__}")


@dataclass(frozen=True)
class BumpSchedule(DensitySequence):
    """One fixed bump density repeated on every site of a site set.

    For an atomic base, pass ``weights`` (a reweight vector as in
    :class:`AtomReweight`).  For a continuous base, pass a vectorized
    ``density`` callable together with its sup norm; unit mass against the
    base is then checked by quadrature at construction.
    """

    sites: SiteSet
    base: BaseMeasure
    weights: tuple[float, ...] | None = None
    density: Callable[[np.ndarray], np.ndarray] | None = None
    density_sup: float | None = None

    def __post_init__(self) -> None:
        if self.weights is not None:
            if not isinstance(self.base, FiniteAtoms):
                raise ValueError("weight bumps require an atomic base measure")
            object.__setattr__(self, "weights", _check_atom_reweight(self.base, self.weights))
        elif self.density is not None:
            if self.density_sup is None or self.density_sup <= 0:
                raise ValueError("a callable bump needs a positive density_sup")
            mass = _density_mass(self.base, self.density)
            if abs(mass - 1.0) > DENSITY_MASS_TOL:
                raise ValueError(f"bump density has mass {mass:.12g}, expected 1")
        else:
            raise ValueError("bump schedule needs either weights or a density callable")

    def eval(self, n: int, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        if not self.sites.contains(n):
            return np.ones_like(values)
        if self.weights is not None:
            idx = self.base.atom_index(values)  # type: ignore[union-attr]
            if np.any(idx < 0):
                raise ValueError(f"value outside atomic support at site {n}")
            ratios = np.asarray(self.weights) / self.base.weights  # type: ignore[union-attr]
            return ratios[idx]
        out = np.asarray(self.density(values), dtype=float)  # type: ignore[misc]
        if np.any(out < 0):
            raise ValueError(f"bump density negative at site {n}")
        return out

    def sup_norm(self, n: int) -> float:
        if not self.sites.contains(n):
            return 1.0
        if self.weights is not None:
            return float(np.max(np.asarray(self.weights) / self.base.weights))  # type: ignore[union-attr]
        return float(self.density_sup)  # type: ignore[arg-type]

    def is_identity_at(self, n: int) -> bool:
        return not self.sites.contains(n)

    def perturbed_sites(self, lo: int, hi: int) -> list[int]:
        return self.sites.sites_in(lo, hi)

    def atom_weights_at(self, n: int) -> np.ndarray | None:
        if self.weights is None or not self.sites.contains(n):
            return None
        return np.asarray(self.weights)


# ---------------------------------------------------------------------------
# product laws and sampled windows
# ---------------------------------------------------------------------------

TAG_EXACT = "exact"
TAG_APPROXIMATE = "approximate"


@dataclass(frozen=True)
class ProductLaw:
    """A product law over the lattice: every site independent.

    The exact law draws each site from the base measure; the approximate law
    draws site ``n`` from ``g_n * mu``.  The exact tag forces identity
    densities.
    """

    base: BaseMeasure
    densities: DensitySequence
    tag: str

    def __post_init__(self) -> None:
        if self.tag not in (TAG_EXACT, TAG_APPROXIMATE):
            raise ValueError(f"unknown law tag {self.tag!r}")
        if self.tag == TAG_EXACT and not isinstance(self.densities, Identity):
            raise ValueError("the exact law must carry identity densities")

    @classmethod
    def exact(cls, base: BaseMeasure) -> "ProductLaw":
        return cls(base, Identity(), TAG_EXACT)

    @classmethod
    def approximate(cls, base: BaseMeasure, densities: DensitySequence) -> "ProductLaw":
        return cls(base, densities, TAG_APPROXIMATE)


@dataclass(frozen=True)
class PotentialWindow:
    """Sampled potential values on the integer window ``[lo, hi]``."""

    lo: int
    hi: int
    values: np.ndarray
    provenance: tuple = ()

    def __post_init__(self) -> None:
        if self.lo > self.hi:
            raise ValueError("window requires lo <= hi")
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.hi - self.lo + 1,):
            raise ValueError("window length must equal hi - lo + 1")
        if not np.all(np.isfinite(values)):
            raise ValueError("window values must be finite")
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.hi - self.lo + 1

    def value_at(self, n: int) -> float:
        if not self.lo <= n <= self.hi:
            raise IndexError(f"site {n} outside window [{self.lo}, {self.hi}]")
        return float(self.values[n - self.lo])

    def slice(self, lo: int, hi: int) -> "PotentialWindow":
        if not (self.lo <= lo <= hi <= self.hi):
            raise IndexError(f"[{lo}, {hi}] not contained in [{self.lo}, {self.hi}]")
        return PotentialWindow(lo, hi, self.values[lo - self.lo : hi - self.lo + 1], self.provenance)


def _rejection_column(
    base: BaseMeasure,
    densities: DensitySequence,
    site: int,
    count: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Draw ``count`` values from g_site * mu by rejection against mu."""
    sup = densities.sup_norm(site)
    cap = 100 * math.ceil(sup)
    out = np.empty(count)
    pending = np.arange(count)
    for _ in range(cap):
        proposals = base.sample(rng, len(pending))
        u = rng.random(len(pending))
        accept = u * sup <= densities.eval(site, proposals)
        out[pending[accept]] = proposals[accept]
        pending = pending[~accept]
        if len(pending) == 0:
            return out
    raise RejectionCapError(
        f"site {site}: rejection sampler exceeded {cap} rounds "
        f"(sup norm {sup:.3g}); check the density configuration"
    )


def sample_windows(
    law: ProductLaw, lo: int, hi: int, count: int, stream: RngStream
) -> np.ndarray:
    """Draw ``count`` independent windows; returns shape ``(count, hi-lo+1)``.

    Sites are independent; perturbed sites are redrawn from their reweighted
    law (exact categorical draw for atomic bases, accept/reject otherwise).
    The draw order is fixed (base block first, then perturbed sites in
    ascending order), so output depends only on ``(stream, lo, hi, count)``.
    """
    if lo > hi:
        raise ValueError("sample_windows requires lo <= hi")
    rng = stream.generator()
    n_sites = hi - lo + 1
    base_flat = law.base.sample(rng, count * n_sites)
    values = base_flat.reshape(count, n_sites)
    for site in law.densities.perturbed_sites(lo, hi):
        beta = law.densities.atom_weights_at(site)
        if beta is not None:
            choice = rng.choice(len(beta), size=count, p=beta)
            column = law.base.locations[choice]  # type: ignore[union-attr]
        else:
            column = _rejection_column(law.base, law.densities, site, count, rng)
        values[:, site - lo] = column
    return values


def sample_window(law: ProductLaw, lo: int, hi: int, stream: RngStream) -> PotentialWindow:
    """Draw one potential window from the product law."""
    values = sample_windows(law, lo, hi, 1, stream)[0]
    return PotentialWindow(lo, hi, values, provenance=(stream.seed, stream.key))


def log_density_products(law: ProductLaw, lo: int, values: np.ndarray) -> np.ndarray:
    """Vectorized log Radon-Nikodym products for a batch of windows.

    ``values`` has one window per row starting at site ``lo``; the return is
    ``sum_n log g_n(V_n)`` per row, with ``-inf`` where some factor vanishes.
    """
    values = np.atleast_2d(np.asarray(values, dtype=float))
    count, n_sites = values.shape
    out = np.zeros(count)
    for site in law.densities.perturbed_sites(lo, lo + n_sites - 1):
        g = law.densities.eval(site, values[:, site - lo])
        with np.errstate(divide="ignore"):
            out += np.log(g)
    return out


def radon_nikodym_product(law: ProductLaw, window: PotentialWindow) -> float:
    """log of the restricted Radon-Nikodym derivative over the window.

    Returns ``sum_n log g_n(V_n)`` (exactly 0.0 for identity densities) and
    ``-inf`` when the window is impossible under the approximate law.  All
    window values must lie in the support of the base measure.
    """
    if not np.all(law.base.in_support(window.values)):
        bad = int(np.argmin(law.base.in_support(window.values)))
        raise ValueError(
            f"window value {window.values[bad]} at site {window.lo + bad} "
            "is outside the support of the base measure"
        )
    if isinstance(law.densities, Identity):
        return 0.0
    terms = []
    for site in law.densities.perturbed_sites(window.lo, window.hi):
        g = float(law.densities.eval(site, np.array([window.value_at(site)]))[0])
        if g == 0.0:
            return float("-inf")
        terms.append(math.log(g))
    return math.fsum(terms)


# ---------------------------------------------------------------------------
# decay-condition diagnostics
# ---------------------------------------------------------------------------

def sup_norm_log_partials(seq: DensitySequence, N: int, centered_at: int = 0) -> float:
    """(1/N) * sum of log sup norms over the window [center-N, center+N]."""
    if N < 1:
        raise ValueError("N must be >= 1")
    total = math.fsum(
        seq.log_sup_norm(n) for n in range(centered_at - N, centered_at + N + 1)
    )
    return total / N


@dataclass(frozen=True)
class ConditionVerdict:
    value_end: float
    slope: float
    verdict: str


@dataclass(frozen=True)
class ConditionReport:
    """Numeric trajectories and empirical verdicts for the decay conditions.

    ``mean`` is the centered Cesaro mean of log sup norms, ``uniform`` its
    worst value over centers ``|k| <= K_max``, ``partial_sums`` the symmetric
    partial sums, and ``tail_increments`` the Cauchy increments
    ``S(N) - S(N/2)`` used to judge summability.
    """

    n_grid: np.ndarray
    mean: np.ndarray
    uniform: np.ndarray
    partial_sums: np.ndarray
    tail_increments: np.ndarray
    verdicts: dict[str, ConditionVerdict]
    tolerance: float = CONDITION_TOL


def _fit_slope(n_values: np.ndarray, values: np.ndarray) -> tuple[float, float]:
    """Least-squares line of value vs log N over the last decade of N."""
    keep = n_values >= max(1, n_values[-1] / 10)
    x = np.log(n_values[keep].astype(float))
    y = values[keep]
    if len(x) < 2 or np.ptp(x) == 0:
        return 0.0, float(y[-1])
    slope, intercept = np.polyfit(x, y, 1)
    return float(slope), float(intercept)


def _raw_verdict(values: np.ndarray, n_values: np.ndarray, tol: float) -> ConditionVerdict:
    slope, intercept = _fit_slope(n_values, values)
    value_end = float(values[-1])
    predicted = intercept + slope * math.log(100.0 * n_values[-1])
    if value_end <= tol and slope <= 0:
        verdict = VERDICT_HOLDS
    elif value_end > tol and predicted > tol:
        verdict = VERDICT_VIOLATED
    else:
        verdict = VERDICT_INCONCLUSIVE
    return ConditionVerdict(value_end, slope, verdict)


_STRENGTH = {VERDICT_VIOLATED: 0, VERDICT_INCONCLUSIVE: 1, VERDICT_HOLDS: 2}
_BY_STRENGTH = {v: k for k, v in _STRENGTH.items()}


def condition_report(seq: DensitySequence, N_max: int, K_max: int) -> ConditionReport:
    """Evaluate the three decay conditions on ``log ||g_n||_inf`` numerically.

    A condition "holds-empirically" when its trajectory at ``N_max`` is below
    the fixed tolerance and the least-squares slope against ``log N`` over the
    last decade is nonpositive; it is "violated" when the end value and the
    extrapolated value both exceed the tolerance; otherwise the verdict is
    inconclusive.  Verdicts are clamped afterwards so that summable implies
    center-uniform implies plain Cesaro-mean, never the reverse.
    """
    if N_max < 1 or K_max < 0:
        raise ValueError("condition_report requires N_max >= 1 and K_max >= 0")
    span = K_max + N_max
    sites = np.arange(-span, span + 1)
    logs = np.array([seq.log_sup_norm(int(n)) for n in sites])
    prefix = np.concatenate([[0.0], np.cumsum(logs)])

    def window_sum(center: np.ndarray, N: int) -> np.ndarray:
        a = center - N + span
        b = center + N + span
        return prefix[b + 1] - prefix[a]

    n_grid = np.unique(np.geomspace(1, N_max, num=min(N_max, 96)).astype(int))
    centers = np.arange(-K_max, K_max + 1)
    mean = np.empty(len(n_grid))
    uniform = np.empty(len(n_grid))
    partial = np.empty(len(n_grid))
    tail = np.empty(len(n_grid))
    for i, N in enumerate(n_grid):
        mean[i] = window_sum(np.array([0]), int(N))[0] / N
        uniform[i] = np.max(window_sum(centers, int(N))) / N
        partial[i] = window_sum(np.array([0]), int(N))[0]
        half = max(1, int(N) // 2)
        tail[i] = partial[i] - window_sum(np.array([0]), half)[0]

    raw = {
        CONDITION_MEAN: _raw_verdict(mean, n_grid, CONDITION_TOL),
        CONDITION_UNIFORM: _raw_verdict(uniform, n_grid, CONDITION_TOL),
        CONDITION_SUMMABLE: _raw_verdict(tail, n_grid, CONDITION_TOL),
    }
    # clamp: a stronger condition can never be declared stronger-than a weaker one
    s_mean = _STRENGTH[raw[CONDITION_MEAN].verdict]
    s_unif = min(_STRENGTH[raw[CONDITION_UNIFORM].verdict], s_mean)
    s_sum = min(_STRENGTH[raw[CONDITION_SUMMABLE].verdict], s_unif)
    verdicts = {
        CONDITION_MEAN: raw[CONDITION_MEAN],
        CONDITION_UNIFORM: ConditionVerdict(
            raw[CONDITION_UNIFORM].value_end, raw[CONDITION_UNIFORM].slope, _BY_STRENGTH[s_unif]
        ),
        CONDITION_SUMMABLE: ConditionVerdict(
            raw[CONDITION_SUMMABLE].value_end, raw[CONDITION_SUMMABLE].slope, _BY_STRENGTH[s_sum]
        ),
    }
    return ConditionReport(n_grid, mean, uniform, partial, tail, verdicts)
