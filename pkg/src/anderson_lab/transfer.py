"""Transfer matrices, scaled products, and truncated-determinant recurrences.

A solution of ``psi(n+1) + psi(n-1) + V_n psi(n) = E psi(n)`` propagates via
the one-step matrix ``[[E - V_n, -1], [1, 0]]``.  The interval product over
``[a, b]`` composes the factors with the site-``b`` factor leftmost, so it
maps ``(psi(a), psi(a-1))`` to ``(psi(b+1), psi(b))``.  Entries of that
product equal (up to the sign convention of ``det(E - H)`` versus
``det(H - E)``) the four truncated determinants

    [[ P[a, b],   -P[a+1, b]   ],
     [ P[a, b-1], -P[a+1, b-1] ]]

which is what :func:`block_identity_check` verifies numerically.  Products of
length 1e5+ never overflow: matrices are stored as (normalized entries,
log scale factor) and renormalized after every multiply.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

NEG_INF = float("-inf")

#: once the recurrence terms agree to this relative level, the step is
#: recomputed in compensated double-double arithmetic
CANCELLATION_GUARD = 1e-13

_RESCALE_HI = 1e150
_RESCALE_LO = 1e-150


# ---------------------------------------------------------------------------
# signed-log scalars
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SignedLog:
    """A scalar stored as sign (unit phase for complex) and log magnitude.

    ``sign == 0`` if and only if ``log_mag == -inf``; the zero marker is a
    distinguished value, never the result of underflow.
    """

    sign: complex | float
    log_mag: float

    def __post_init__(self) -> None:
        zero_sign = self.sign == 0
        zero_mag = self.log_mag == NEG_INF
        if zero_sign != zero_mag:
            raise ValueError("sign == 0 exactly when log_mag == -inf")

    @classmethod
    def from_value(cls, x: complex | float) -> "SignedLog":
        if x == 0:
            return cls(0.0, NEG_INF)
        if isinstance(x, complex) and x.imag != 0:
            return cls(x / abs(x), math.log(abs(x)))
        x = float(x.real) if isinstance(x, complex) else float(x)
        return cls(math.copysign(1.0, x), math.log(abs(x)))

    @classmethod
    def zero(cls) -> "SignedLog":
        return cls(0.0, NEG_INF)

    @classmethod
    def one(cls) -> "SignedLog":
        return cls(1.0, 0.0)

    def is_zero(self) -> bool:
        return self.sign == 0

    def value(self) -> complex | float:
        if self.is_zero():
            return 0.0
        return self.sign * math.exp(self.log_mag)

    def __mul__(self, other: "SignedLog") -> "SignedLog":
        if self.is_zero() or other.is_zero():
            return SignedLog.zero()
        return SignedLog(self.sign * other.sign, self.log_mag + other.log_mag)

    def __truediv__(self, other: "SignedLog") -> "SignedLog":
        if other.is_zero():
            raise ZeroDivisionError("division by a zero signed-log value")
        if self.is_zero():
            return SignedLog.zero()
        return SignedLog(self.sign / other.sign, self.log_mag - other.log_mag)


def _signed_log(mantissa: complex | float, log_shift: float) -> SignedLog:
    if mantissa == 0:
        return SignedLog.zero()
    if isinstance(mantissa, complex) and mantissa.imag != 0:
        return SignedLog(mantissa / abs(mantissa), math.log(abs(mantissa)) + log_shift)
    m = float(mantissa.real) if isinstance(mantissa, complex) else float(mantissa)
    return SignedLog(math.copysign(1.0, m), math.log(abs(m)) + log_shift)


# ---------------------------------------------------------------------------
# scaled 2x2 matrices
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScaledMatrix:
    """A 2x2 matrix stored as normalized entries times ``exp(log_scale)``.

    After renormalization the largest entry magnitude is 1 (the zero matrix
    is forbidden).  Freshly built one-step factors keep their exact entries
    with ``log_scale == 0``; :func:`product` renormalizes after every
    multiply.
    """

    entries: np.ndarray
    log_scale: float

    def __post_init__(self) -> None:
        entries = np.asarray(self.entries)
        if entries.shape != (2, 2):
            raise ValueError("entries must be a 2x2 array")
        if not np.iscomplexobj(entries):
            entries = entries.astype(float)
        if np.max(np.abs(entries)) == 0:
            raise ValueError("the zero matrix has no scaled representation")
        object.__setattr__(self, "entries", entries)

    @classmethod
    def identity(cls, *, dtype=float) -> "ScaledMatrix":
        return cls(np.eye(2, dtype=dtype), 0.0)

    @classmethod
    def from_dense(cls, m: np.ndarray) -> "ScaledMatrix":
        return cls(np.asarray(m), 0.0).normalized()

    def normalized(self) -> "ScaledMatrix":
        peak = float(np.max(np.abs(self.entries)))
        return ScaledMatrix(self.entries / peak, self.log_scale + math.log(peak))

    def __matmul__(self, other: "ScaledMatrix") -> "ScaledMatrix":
        raw = ScaledMatrix(self.entries @ other.entries, self.log_scale + other.log_scale)
        return raw.normalized()

    def dense(self) -> np.ndarray:
        """The true matrix; overflows for large scales, intended for tests."""
        return self.entries * math.exp(self.log_scale)

    def det(self) -> SignedLog:
        e = self.entries
        d = e[0, 0] * e[1, 1] - e[0, 1] * e[1, 0]
        return _signed_log(complex(d) if np.iscomplexobj(e) else float(d), 2.0 * self.log_scale)

    def det_drift(self) -> float:
        """|det(entries) - exp(-2 log_scale)|: deviation from unit determinant.

        For long products ``exp(-2 log_scale)`` underflows and the normalized
        entries become numerically singular; the drift measures how far the
        computed entry determinant strays from the value a true unit-det
        matrix would have, which is the resolution floating point offers.
        """
        e = self.entries
        d = e[0, 0] * e[1, 1] - e[0, 1] * e[1, 0]
        target = math.exp(-2.0 * self.log_scale) if self.log_scale > -350 else 0.0
        return float(abs(d - target))

    def log_norm(self) -> float:
        """log of the spectral norm of the true matrix."""
        e = self.entries
        frob2 = float(np.sum(np.abs(e) ** 2))
        det2 = float(abs(e[0, 0] * e[1, 1] - e[0, 1] * e[1, 0])) ** 2
        gap = max(frob2 * frob2 - 4.0 * det2, 0.0)
        smax2 = 0.5 * (frob2 + math.sqrt(gap))
        return self.log_scale + 0.5 * math.log(smax2)

    def inverse(self) -> "ScaledMatrix":
        e = self.entries
        adj = np.array([[e[1, 1], -e[0, 1]], [-e[1, 0], e[0, 0]]], dtype=e.dtype)
        det = self.det()
        if det.is_zero():
            raise ZeroDivisionError("matrix is singular to working precision")
        scaled = ScaledMatrix(adj / det.sign, self.log_scale - det.log_mag)
        return scaled.normalized()


def one_step(energy: complex | float, v: float) -> ScaledMatrix:
    """The one-step factor [[E - v, -1], [1, 0]]; exact entries, unit det."""
    d = energy - v
    dtype = complex if isinstance(d, complex) else float
    return ScaledMatrix(np.array([[d, -1.0], [1.0, 0.0]], dtype=dtype), 0.0)


def product(
    energy: complex | float,
    window,
    order: str = "left_of_b_to_a",
) -> ScaledMatrix:
    """Scaled product of one-step factors over a potential window.

    Factors are composed with the top-site factor leftmost (the only
    supported order), renormalizing by the largest entry magnitude after
    every multiply.
    """
    if order != "left_of_b_to_a":
        raise ValueError(f"unsupported composition order {order!r}")
    values = np.asarray(window.values if hasattr(window, "values") else window, dtype=float)
    if values.size == 0:
        raise ValueError("product requires a non-empty window")
    is_complex = isinstance(energy, complex) and energy.imag != 0
    e = complex(energy) if is_complex else float(energy)
    s00, s01, s10, s11 = (1 + 0j, 0j, 0j, 1 + 0j) if is_complex else (1.0, 0.0, 0.0, 1.0)
    log_scale = 0.0
    for v in values:
        d = e - v
        t00 = d * s00 - s10
        t01 = d * s01 - s11
        s10, s11 = s00, s01
        s00, s01 = t00, t01
        peak = max(abs(s00), abs(s01), abs(s10), abs(s11))
        inv = 1.0 / peak
        s00 *= inv
        s01 *= inv
        s10 *= inv
        s11 *= inv
        log_scale += math.log(peak)
    dtype = complex if is_complex else float
    return ScaledMatrix(np.array([[s00, s01], [s10, s11]], dtype=dtype), log_scale)


# ---------------------------------------------------------------------------
# determinant recurrence
# ---------------------------------------------------------------------------

def _two_sum(a: float, b: float) -> tuple[float, float]:
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


def _split(a: float) -> tuple[float, float]:
    c = 134217729.0 * a  # 2^27 + 1, Dekker splitting
    hi = c - (c - a)
    return hi, a - hi


def _two_prod(a: float, b: float) -> tuple[float, float]:
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    err = ((ah * bh - p) + ah * bl + al * bh) + al * bl
    return p, err


def det_recurrence(energy: complex | float, window) -> list[SignedLog]:
    """Prefix determinants ``det(H_[a,k] - E)`` for every ``k`` in the window.

    Evaluates the three-term recurrence ``P_k = (V_k - E) P_{k-1} - P_{k-2}``
    (empty interval 1, negative-length interval 0) in scaled arithmetic.
    When the two recurrence terms nearly cancel, the step is recomputed in
    compensated double-double arithmetic; magnitudes are rescaled before they
    can underflow, so a ``-inf`` log only ever marks an exact zero.
    """
    values = np.asarray(window.values if hasattr(window, "values") else window, dtype=float)
    if values.size == 0:
        raise ValueError("det_recurrence requires a non-empty window")
    is_complex = isinstance(energy, complex) and energy.imag != 0
    e = complex(energy) if is_complex else float(energy)
    prev: complex | float = 1.0  # empty interval
    prev2: complex | float = 0.0  # negative length
    log_shift = 0.0
    out: list[SignedLog] = []
    for v in values:
        d = v - e
        t1 = d * prev
        p = t1 - prev2
        if not is_complex and abs(p) < CANCELLATION_GUARD * max(abs(t1), abs(prev2)):
            hi, lo = _two_prod(float(d), float(prev))
            s, err = _two_sum(hi, -float(prev2))
            p = s + (err + lo)
        prev2 = prev
        prev = p
        peak = max(abs(prev), abs(prev2))
        if peak > _RESCALE_HI or (0.0 < peak < _RESCALE_LO):
            prev /= peak
            prev2 /= peak
            log_shift += math.log(peak)
        out.append(_signed_log(prev, log_shift))
    return out


def interval_det(energy: complex | float, window) -> SignedLog:
    """det(H - E) of the full window; empty windows give 1 by convention."""
    values = np.asarray(window.values if hasattr(window, "values") else window, dtype=float)
    if values.size == 0:
        return SignedLog.one()
    return det_recurrence(energy, values)[-1]


def matrix_element(u: np.ndarray, s: ScaledMatrix, v: np.ndarray) -> SignedLog:
    """Signed log of the bilinear form <u, S v> for unit vectors u, v."""
    u = np.asarray(u)
    v = np.asarray(v)
    for name, vec in (("u", u), ("v", v)):
        if abs(np.linalg.norm(vec) - 1.0) > 1e-12:
            raise ValueError(f"{name} must be a unit vector")
    ip = np.vdot(u, s.entries @ v)
    ip = complex(ip) if np.iscomplexobj(s.entries) else float(ip.real)
    if ip == 0:
        return SignedLog.zero()
    return _signed_log(ip, s.log_scale)


def block_identity_check(energy: complex | float, window) -> float:
    """Largest log-magnitude discrepancy between the interval product and the
    four truncated determinants filling its block form.

    Entries are compared in magnitude only; the determinant convention
    ``det(H - E)`` differs from the product entries by ``(-1)^length``.
    Returns 0 when an entry and its determinant are both exactly zero, and
    ``inf`` if exactly one of them vanishes.
    """
    values = np.asarray(window.values if hasattr(window, "values") else window, dtype=float)
    if values.size < 2:
        raise ValueError("block identity needs a window of length >= 2")
    s = product(energy, values)
    full = det_recurrence(energy, values)
    inner = det_recurrence(energy, values[1:])
    dets = [
        full[-1],  # [a, b]
        inner[-1],  # [a+1, b]
        full[-2],  # [a, b-1]
        inner[-2] if len(inner) >= 2 else SignedLog.one(),  # [a+1, b-1]
    ]
    entry_logs = []
    with np.errstate(divide="ignore"):
        for val in np.abs(s.entries).ravel():
            entry_logs.append(s.log_scale + (math.log(val) if val > 0 else NEG_INF))
    worst = 0.0
    for got, want in zip(entry_logs, dets):
        if got == NEG_INF and want.log_mag == NEG_INF:
            continue
        if got == NEG_INF or want.log_mag == NEG_INF:
            return math.inf
        worst = max(worst, abs(got - want.log_mag))
    return worst


# ---------------------------------------------------------------------------
# batched drivers (vectorized across windows, sequential across sites)
# ---------------------------------------------------------------------------

def matrix_batch(
    energy: complex | float | np.ndarray, windows: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Scaled interval products for a batch of windows.

    ``windows`` has one window per row; ``energy`` is a scalar or one value
    per row.  Returns the four normalized entry arrays and the log scales,
    renormalized after every site step exactly like :func:`product`.
    """
    windows = np.atleast_2d(np.asarray(windows, dtype=float))
    count, n_sites = windows.shape
    e = np.asarray(energy)
    is_complex = np.iscomplexobj(e) and np.any(e.imag != 0)
    dtype = complex if is_complex else float
    s00 = np.ones(count, dtype=dtype)
    s01 = np.zeros(count, dtype=dtype)
    s10 = np.zeros(count, dtype=dtype)
    s11 = np.ones(count, dtype=dtype)
    log_scale = np.zeros(count)
    e = e.astype(dtype)
    for k in range(n_sites):
        d = e - windows[:, k]
        t00 = d * s00 - s10
        t01 = d * s01 - s11
        s10, s11 = s00, s01
        s00, s01 = t00, t01
        peak = np.abs(s00)
        np.maximum(peak, np.abs(s01), out=peak)
        np.maximum(peak, np.abs(s10), out=peak)
        np.maximum(peak, np.abs(s11), out=peak)
        inv = 1.0 / peak
        s00 *= inv
        s01 *= inv
        s10 *= inv
        s11 *= inv
        log_scale += np.log(peak)
    return s00, s01, s10, s11, log_scale


def log_norm_batch(
    s00: np.ndarray, s01: np.ndarray, s10: np.ndarray, s11: np.ndarray, log_scale: np.ndarray
) -> np.ndarray:
    """log spectral norms of a batch of scaled matrices."""
    frob2 = np.abs(s00) ** 2 + np.abs(s01) ** 2 + np.abs(s10) ** 2 + np.abs(s11) ** 2
    det2 = np.abs(s00 * s11 - s01 * s10) ** 2
    gap = np.maximum(frob2 * frob2 - 4.0 * det2, 0.0)
    return log_scale + 0.5 * np.log(0.5 * (frob2 + np.sqrt(gap)))


def log_det_abs_batch(
    s00: np.ndarray, s01: np.ndarray, s10: np.ndarray, s11: np.ndarray, log_scale: np.ndarray
) -> np.ndarray:
    """log |det(H - E)| of the underlying windows, read off the top-left
    product entry (equal in magnitude to the full-interval determinant)."""
    with np.errstate(divide="ignore"):
        return log_scale + np.log(np.abs(s00))


def vector_growth_logs(
    energy: complex | float, windows: np.ndarray, checkpoints: tuple[int, ...]
) -> np.ndarray:
    """log norms of the propagated solution vector at given site counts.

    Starts from ``(1, 0)`` and applies the one-step recurrence across each
    row of ``windows``, renormalizing every step.  Returns an array of shape
    ``(len(checkpoints), count)`` holding ``log || S_[1,k] (1,0) ||`` for each
    checkpoint ``k``; checkpoint 0 is the initial vector.
    """
    windows = np.atleast_2d(np.asarray(windows, dtype=float))
    count, n_sites = windows.shape
    marks = sorted(set(checkpoints))
    if marks[0] < 0 or marks[-1] > n_sites:
        raise ValueError("checkpoints must lie in [0, window length]")
    is_complex = isinstance(energy, complex) and energy.imag != 0
    dtype = complex if is_complex else float
    x = np.ones(count, dtype=dtype)
    y = np.zeros(count, dtype=dtype)
    acc = np.zeros(count)
    out = np.empty((len(checkpoints), count))
    recorded = {}
    if 0 in marks:
        recorded[0] = acc + 0.0  # log ||(1, 0)|| == 0
    for k in range(n_sites):
        d = energy - windows[:, k]
        x, y = d * x - y, x
        peak = np.maximum(np.abs(x), np.abs(y))
        inv = 1.0 / peak
        x *= inv
        y *= inv
        acc += np.log(peak)
        if (k + 1) in marks:
            recorded[k + 1] = acc + 0.5 * np.log(np.abs(x) ** 2 + np.abs(y) ** 2)
    for i, c in enumerate(checkpoints):
        out[i] = recorded[c]
    return out
