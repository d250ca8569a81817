"""Log-envelope of ``r**x * f(x)`` and its piecewise-linear chord scaffold.

Everything is computed on ``h(x) = log2 f(x)`` rather than on
``g(x) = x*log2(r) + h(x)``.  Chord gaps are invariant under adding an affine
function, so the breakpoints do not depend on ``r``; the slope of leg ``n`` is
``log2(r) + s_offset`` and its intercept is free of ``r`` altogether.  Working
with ``h`` keeps full precision at abscissae of order 1e20, where ``g`` would
lose every digit to cancellation.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import (
    DomainError,
    EnvelopeExhaustedError,
    LegCapError,
    MixforgeError,
    ParameterError,
)

FAMILIES = ("polynomial", "stretched_exponential", "shifted_log_power", "tabulated")

_LN2 = math.log(2.0)
_LOG_HALF = math.log(0.5)
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0

DEFAULT_TOL_ROOT = 1e-9
DEFAULT_TOL_SUP = 1e-8
DEFAULT_X_CAP = 1e30


@dataclass(frozen=True)
class RateFunction:
    """A positive, decreasing, log-convex rate ``f`` with ``f(0) <= 1/2``.

    Build instances through the family constructors (:meth:`polynomial`,
    :meth:`stretched_exponential`, :meth:`shifted_log_power`, :meth:`tabulated`).
    ``params`` is the family's parameter tuple; for ``shifted_log_power`` it is
    ``(q, a, b, c, T)`` with the shift already chosen.
    """

    family: str
    params: tuple

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ParameterError(f"unknown rate-function family {self.family!r}")
        check = getattr(self, f"_check_{self.family}")
        check()

    # -- family constructors -------------------------------------------------

    @classmethod
    def polynomial(cls, p: float) -> "RateFunction":
        """``f(x) = (x + 1)**(-p) / 2``."""
        return cls("polynomial", (float(p),))

    @classmethod
    def stretched_exponential(cls, q: float, a: float) -> "RateFunction":
        """``f(x) = exp(-q * x**a) / 2``."""
        return cls("stretched_exponential", (float(q), float(a)))

    @classmethod
    def shifted_log_power(cls, q, a, b, c, T=None, *, x_max=1000.0, n_points=10_000):
        """``f(x) = K * eta(T + x)`` with ``eta(x) = exp(-q x**a) x**b (log x)**c``.

        ``K = min(1, 1 / (2 eta(T)))`` so that ``f(0) <= 1/2``.  When ``T`` is
        omitted it is found by doubling from 8 until
        :func:`validate_rate_function` passes on ``[0, x_max]``.
        """
        if T is not None:
            return cls("shifted_log_power", (float(q), float(a), float(b), float(c), float(T)))
        T = 8.0
        while T <= 2.0**40:
            fn = cls("shifted_log_power", (float(q), float(a), float(b), float(c), T))
            if validate_rate_function(fn, x_max=x_max, n_points=n_points).passed:
                return fn
            T *= 2.0
        raise ParameterError(
            f"no shift T <= 2**40 makes shifted_log_power{(q, a, b, c)} valid on [0, {x_max}]"
        )

    @classmethod
    def tabulated(cls, xs: Sequence[float], fs: Sequence[float]) -> "RateFunction":
        """Knot table; ``log f`` is interpolated linearly between knots."""
        return cls("tabulated", (tuple(map(float, xs)), tuple(map(float, fs))))

    # -- parameter checks ----------------------------------------------------

    def _check_polynomial(self):
        (p,) = self.params
        if not p > 0:
            raise ParameterError(f"polynomial exponent p must be > 0, got {p}")

    def _check_stretched_exponential(self):
        q, a = self.params
        if not q > 0:
            raise ParameterError(f"q must be > 0, got {q}")
        if not 0 < a < 1:
            raise ParameterError(f"a must lie in (0, 1), got {a}")

    def _check_shifted_log_power(self):
        q, a, b, c, T = self.params
        if not q > 0:
            raise ParameterError(f"q must be > 0, got {q}")
        if not 0 < a < 1:
            raise ParameterError(f"a must lie in (0, 1), got {a}")
        if not (math.isfinite(b) and math.isfinite(c)):
            raise ParameterError("b and c must be finite")
        if not T > math.e:
            raise ParameterError(f"shift T must exceed e, got {T}")

    def _check_tabulated(self):
        xs, fs = self.params
        if len(xs) < 2 or len(xs) != len(fs):
            raise ParameterError("tabulated needs >= 2 knots with matching values")
        if xs[0] != 0.0 or any(b <= a for a, b in zip(xs, xs[1:])):
            raise ParameterError("tabulated knots must start at 0 and increase")
        if any(not (v > 0 and math.isfinite(v)) for v in fs):
            raise ParameterError("tabulated values must be positive and finite")

    # -- evaluation ----------------------------------------------------------

    def _log_eta(self, z):
        q, a, b, c, _ = self.params
        out = -q * z**a
        if b:
            out = out + b * np.log(z)
        if c:
            out = out + c * np.log(np.log(z))
        return out

    def logf(self, x):
        """Natural log of ``f``; accepts scalars or arrays."""
        xa = np.asarray(x, dtype=float)
        if np.any(xa < 0) or np.any(np.isnan(xa)):
            bad = float(xa.flat[np.argmax((xa < 0) | np.isnan(xa))])
            raise DomainError(f"rate function evaluated at x={bad!r} outside [0, inf)")
        fam = self.family
        if fam == "polynomial":
            out = _LOG_HALF - self.params[0] * np.log1p(xa)
        elif fam == "stretched_exponential":
            q, a = self.params
            out = _LOG_HALF - q * xa**a
        elif fam == "shifted_log_power":
            T = self.params[4]
            base = self._log_eta(np.float64(T))
            shift = self._log_eta(T + xa) - base
            # f(0) = 1/2 exactly when rescaled, so a_1 = g(0) stays exactly -1.
            out = (_LOG_HALF if base > _LOG_HALF else base) + shift
        else:
            xs, fs = self.params
            if np.any(xa > xs[-1]):
                bad = float(xa.flat[np.argmax(xa > xs[-1])])
                raise DomainError(f"x={bad!r} beyond last tabulated knot {xs[-1]}")
            out = np.interp(xa, xs, np.log(fs))
        if not np.all(np.isfinite(out)):
            bad = float(xa.flat[np.argmax(~np.isfinite(out))])
            raise DomainError(f"non-finite log f at x={bad!r}")
        return out if out.ndim else float(out)

    def log2f(self, x):
        out = self.logf(x)
        return out / _LN2

    def __call__(self, x):
        return np.exp(self.logf(x))

    def describe(self) -> dict:
        if self.family == "tabulated":
            return {"family": self.family, "params": [list(p) for p in self.params]}
        return {"family": self.family, "params": list(self.params)}


# -- validation ----------------------------------------------------------------


@dataclass
class HypothesisCheck:
    name: str
    passed: bool
    witness: float | None = None
    detail: str = ""
    kind: str = "grid check"


@dataclass
class RateValidation:
    checks: list[HypothesisCheck]
    x_max: float
    n_points: int

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> HypothesisCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


def validate_rate_function(f: RateFunction, x_max: float = 1000.0, n_points: int = 10_000):
    """Grid-check the hypotheses on ``f`` over ``[0, x_max]``.

    Returns a :class:`RateValidation`; each failed check carries the first
    grid point that witnesses the failure.  The sub-exponential-decay check
    is only numeric evidence and is labelled as such.
    """
    if n_points < 1000:
        raise ParameterError(f"validation grid needs >= 1000 points, got {n_points}")
    if x_max < 100:
        raise ParameterError(f"validation grid must reach x_max >= 100, got {x_max}")
    xs = np.linspace(0.0, float(x_max), int(n_points))
    lf = f.logf(xs)
    checks = []

    bad = np.flatnonzero(lf > _LOG_HALF + 1e-15)
    checks.append(HypothesisCheck(
        "range", bad.size == 0,
        float(xs[bad[0]]) if bad.size else None,
        "range within (0, 1/2]" if bad.size == 0 else f"f = {math.exp(lf[bad[0]]):.6g} > 1/2",
    ))

    d1 = np.diff(lf)
    bad = np.flatnonzero(d1 >= 0)
    checks.append(HypothesisCheck(
        "decreasing", bad.size == 0,
        float(xs[bad[0]]) if bad.size else None,
        "strictly decreasing on grid" if bad.size == 0 else "log f did not decrease",
    ))

    d2 = np.diff(lf, 2)
    slack = 64 * np.finfo(float).eps * np.maximum(1.0, np.abs(lf[1:-1]))
    bad = np.flatnonzero(d2 < -slack)
    checks.append(HypothesisCheck(
        "log_convex", bad.size == 0,
        float(xs[bad[0] + 1]) if bad.size else None,
        "second differences of log f nonnegative" if bad.size == 0
        else f"second difference {d2[bad[0]]:.3g} < 0",
    ))

    tail = xs.size // 2
    ok, witness, notes = True, None, []
    for u in (0.9, 0.5, 0.1):
        ratio = xs * math.log(u) - lf  # log of u**x / f(x)
        falls = np.all(np.diff(ratio[tail:]) < 0)
        small = ratio[-1] < math.log(1e-6)
        if not (falls and small):
            ok = False
            witness = float(xs[-1]) if falls else float(xs[tail + np.argmax(np.diff(ratio[tail:]) >= 0)])
            notes.append(f"u={u}: decreasing={bool(falls)}, u^x/f(x) at end={math.exp(ratio[-1]):.3g}")
    checks.append(HypothesisCheck(
        "subexponential", ok, witness,
        "; ".join(notes) or "u^x/f(x) decreasing and < 1e-6 at grid end for u in {0.9, 0.5, 0.1}",
        kind="numeric evidence",
    ))
    return RateValidation(checks, float(x_max), int(n_points))


# -- envelope ------------------------------------------------------------------


@dataclass(frozen=True)
class LogEnvelope:
    """``g(x) = log2(r**x f(x))`` for ``r`` in (0, 1]."""

    r: float
    f: RateFunction

    def __post_init__(self):
        if not (0.0 < self.r <= 1.0):
            raise ParameterError(f"r must lie in (0, 1], got {self.r}")

    @property
    def log2_r(self) -> float:
        return math.log2(self.r)

    def h(self, x):
        return self.f.log2f(x)

    def g(self, x):
        return np.multiply(x, self.log2_r) + self.h(x)


def eval_g(env: LogEnvelope, x: float) -> float:
    if x < 0:
        raise DomainError(f"g is defined on [0, inf); got x={x}")
    val = env.g(float(x))
    if not math.isfinite(val):
        raise DomainError(f"g({x}) is not finite")
    return val


def _offset_slope(env: LogEnvelope, v: float, y: float) -> float:
    # chord slope of h; the log2(r) part is added by callers
    return (env.h(y) - env.h(v)) / (y - v)


def chord_slope(env: LogEnvelope, v: float, y: float) -> float:
    if not (0 <= v < y):
        raise ParameterError(f"chord needs 0 <= v < y, got v={v}, y={y}")
    return env.log2_r + _offset_slope(env, v, y)


def _concave_max(F: Callable[[float], float], lo: float, hi: float, tol: float):
    """Golden-section search for the max of a concave ``F`` on ``[lo, hi]``.

    Stops once ``width * (largest outer secant slope)`` is below ``tol``, which
    bounds how far the true max can sit above the best probe.
    """
    a, b = lo, hi
    Fa, Fb = F(a), F(b)
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    Fc, Fd = F(c), F(d)
    eps = np.finfo(float).eps
    for _ in range(500):
        if (b - a) * max(abs((Fc - Fa) / (c - a)) if c > a else 0.0,
                         abs((Fb - Fd) / (b - d)) if b > d else 0.0) <= tol:
            break
        if b - a <= 4 * eps * max(abs(a), abs(b), 1e-300):
            break
        if Fc >= Fd:
            b, Fb, d, Fd = d, Fd, c, Fc
            c = b - _INVPHI * (b - a)
            Fc = F(c)
        else:
            a, Fa, c, Fc = c, Fc, d, Fd
            d = a + _INVPHI * (b - a)
            Fd = F(d)
    pts = ((a, Fa), (c, Fc), (d, Fd), (b, Fb))
    return max(pts, key=lambda t: t[1])


def _gap_fn(env: LogEnvelope, v: float, y: float):
    hv = env.h(v)
    zeta = (env.h(y) - hv) / (y - v)

    def F(x):
        val = hv + zeta * (x - v) - env.h(x)
        if not math.isfinite(val):
            raise DomainError(f"non-finite envelope value at x={x}")
        return val

    return F


def chord_gap(env: LogEnvelope, v: float, y: float, tol_sup: float = DEFAULT_TOL_SUP) -> float:
    """Largest vertical gap between the chord over ``[v, y]`` and ``g``."""
    if not (0 <= v < y):
        raise ParameterError(f"chord needs 0 <= v < y, got v={v}, y={y}")
    if not tol_sup > 0:
        raise ParameterError("tol_sup must be positive")
    _, m = _concave_max(_gap_fn(env, v, y), v, y, tol_sup)
    return max(m, 0.0)


def next_breakpoint(
    env: LogEnvelope,
    v: float,
    tol_root: float = DEFAULT_TOL_ROOT,
    *,
    x_cap: float = DEFAULT_X_CAP,
    first_step: float = 1.0,
) -> float:
    """Return ``w > v`` with chord gap ``M(v, w) = 1`` within ``tol_root``.

    Doubles ``w - v`` until the gap reaches 1, then bisects; the gap is
    nondecreasing and continuous in ``w``.
    """
    if v < 0:
        raise DomainError(f"breakpoint search needs v >= 0, got {v}")
    inner = tol_root * 1e-3
    M = lambda u: chord_gap(env, v, u, inner)  # noqa: E731

    step = max(float(first_step), v * 2.0**-40)
    lo = v
    while True:
        hi = v + step
        if hi > x_cap or not math.isfinite(hi):
            raise EnvelopeExhaustedError(
                f"chord gap from v={v:.6g} stays below 1 up to x_cap={x_cap:.3g}; "
                "f decays too slowly for this cap or violates log-convexity"
            )
        m_hi = M(hi)
        if m_hi >= 1.0:
            break
        lo = hi
        step *= 2.0

    best, best_err = hi, abs(m_hi - 1.0)
    for _ in range(400):
        if best_err <= tol_root * 1e-2:
            break
        mid = 0.5 * (lo + hi)
        if not (lo < mid < hi):
            break
        m = M(mid)
        if abs(m - 1.0) < best_err:
            best, best_err = mid, abs(m - 1.0)
        if m < 1.0:
            lo = mid
        else:
            hi = mid
    if best_err > tol_root:
        raise MixforgeError(
            f"could not pin the unit chord gap from v={v:.17g}: |M - 1| = {best_err:.3g}"
        )
    return best


@dataclass(frozen=True)
class Leg:
    """One chord of the scaffold: ``L_n(x) = a + s*x`` on ``[y_prev, y]``.

    ``s_offset`` is ``s - log2(r)``, kept separately because it can be far
    below the resolution of ``s`` itself.
    """

    n: int
    y_prev: float
    y: float
    w: float
    s: float
    a: float
    s_offset: float

    def line_minus_h(self, env: LogEnvelope, x):
        """``L_n(x) - g(x)``, computed without the ``x*log2(r)`` terms."""
        return self.a + self.s_offset * np.asarray(x, dtype=float) - env.h(x)


@dataclass(frozen=True)
class Scaffold:
    envelope: LogEnvelope
    legs: tuple
    tol_root: float = DEFAULT_TOL_ROOT
    tol_sup: float = DEFAULT_TOL_SUP
    x_cap: float = DEFAULT_X_CAP

    def __post_init__(self):
        if not self.legs:
            raise ParameterError("scaffold needs at least one leg")
        object.__setattr__(self, "legs", tuple(self.legs))

    def __len__(self):
        return len(self.legs)

    @property
    def y_last(self) -> float:
        return self.legs[-1].y

    @property
    def ys(self) -> np.ndarray:
        return np.array([leg.y for leg in self.legs])

    @property
    def intercepts(self) -> np.ndarray:
        return np.array([leg.a for leg in self.legs])

    @property
    def offsets(self) -> np.ndarray:
        return np.array([leg.s_offset for leg in self.legs])

    @property
    def slopes(self) -> np.ndarray:
        return np.array([leg.s for leg in self.legs])

    def extend_to(self, n_legs: int, max_legs: int = 500) -> "Scaffold":
        """Continue the recursion until at least ``n_legs`` legs exist."""
        legs = list(self.legs)
        while len(legs) < n_legs:
            if len(legs) >= max_legs:
                raise LegCapError(f"leg cap {max_legs} reached")
            legs.append(_make_leg(self.envelope, len(legs) + 1, legs[-1].y,
                                  self.tol_root, self.tol_sup, self.x_cap))
        return Scaffold(self.envelope, tuple(legs), self.tol_root, self.tol_sup, self.x_cap)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["n", "y_prev", "y", "w", "s", "a"])
            for leg in self.legs:
                writer.writerow([leg.n] + [_fmt(v) for v in (leg.y_prev, leg.y, leg.w, leg.s, leg.a)])

    @classmethod
    def from_csv(cls, path, envelope: LogEnvelope, **kwargs) -> "Scaffold":
        """Load legs written by :meth:`to_csv`.

        Deep legs have ``s`` equal to ``log2(r)`` in double precision, so the
        offset is recomputed from the chord of ``h`` over ``[y_prev, y]``.  A
        stored ``s`` that disagrees with that chord beyond rounding is kept
        as written, so an edited file shows up in later checks.
        """
        legs = []
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames != ["n", "y_prev", "y", "w", "s", "a"]:
                raise ParameterError(f"unexpected scaffold CSV header {reader.fieldnames}")
            for row in reader:
                y_prev, y, s = float(row["y_prev"]), float(row["y"]), float(row["s"])
                off = s - envelope.log2_r
                if 0 <= y_prev < y:
                    chord = _offset_slope(envelope, y_prev, y)
                    if abs(envelope.log2_r + chord - s) <= 1e-12 * max(1.0, abs(s)):
                        off = chord
                legs.append(Leg(int(row["n"]), y_prev, y, float(row["w"]), s,
                                float(row["a"]), off))
        return cls(envelope, tuple(legs), **kwargs)


def _fmt(v: float) -> str:
    return format(v, ".17g")


def _make_leg(env, n, y_prev, tol_root, tol_sup, x_cap) -> Leg:
    y = next_breakpoint(env, y_prev, tol_root, x_cap=x_cap)
    off = _offset_slope(env, y_prev, y)
    a = env.h(y_prev) - off * y_prev
    # unit-gap point: the argmax of the concave L_n - g, or the first crossing of 1
    F = lambda x: a + off * x - env.h(x)  # noqa: E731
    x_star, f_star = _concave_max(F, y_prev, y, tol_root * 1e-3)
    w = x_star
    if f_star > 1.0:
        lo, hi = y_prev, x_star
        for _ in range(400):
            mid = 0.5 * (lo + hi)
            if not (lo < mid < hi):
                break
            val = F(mid)
            if abs(val - 1.0) <= tol_root * 1e-2:
                lo = hi = mid
                break
            if val < 1.0:
                lo = mid
            else:
                hi = mid
        w = 0.5 * (lo + hi)
    return Leg(n, float(y_prev), float(y), float(w), env.log2_r + off, float(a), float(off))


def build_scaffold(
    env: LogEnvelope,
    x_max: float,
    tol_root: float = DEFAULT_TOL_ROOT,
    tol_sup: float = DEFAULT_TOL_SUP,
    *,
    min_legs: int = 1,
    max_legs: int = 500,
    x_cap: float = DEFAULT_X_CAP,
    validate: bool = True,
) -> Scaffold:
    """Run the chord recursion from ``y_0 = 0`` until ``y_n >= x_max``.

    Also keeps going until ``min_legs`` legs exist.  With ``validate`` the
    rate function is grid-checked first and a failing hypothesis raises
    :class:`ParameterError`.
    """
    if not x_max > 0:
        raise ParameterError(f"x_max must be positive, got {x_max}")
    if validate:
        report = validate_rate_function(env.f, x_max=max(1000.0, min(float(x_max), 1e4)))
        if not report.passed:
            failed = [c for c in report.checks if not c.passed]
            raise ParameterError(
                "rate function fails: "
                + "; ".join(f"{c.name} at x={c.witness} ({c.detail})" for c in failed)
            )
    legs: list[Leg] = []
    y = 0.0
    while y < x_max or len(legs) < min_legs:
        if len(legs) >= max_legs:
            raise LegCapError(f"more than {max_legs} legs needed to reach x_max={x_max}")
        leg = _make_leg(env, len(legs) + 1, y, tol_root, tol_sup, x_cap)
        legs.append(leg)
        y = leg.y
    return Scaffold(env, tuple(legs), tol_root, tol_sup, x_cap)


def leg_for(s: Scaffold, x: float) -> int:
    """1-based index of the leg containing ``x``; a shared endpoint goes to the lower leg."""
    if not (0 <= x <= s.y_last):
        raise DomainError(f"x={x} outside the scaffold range [0, {s.y_last}]")
    return int(np.searchsorted(s.ys, x, side="left")) + 1


def envelope_ratio(s: Scaffold, x) -> np.ndarray | float:
    """``sum_j 2**(a_j + s_j x) / (r**x f(x))`` over the computed legs."""
    xa = np.asarray(x, dtype=float)
    expo = s.intercepts[:, None] + s.offsets[:, None] * xa.reshape(1, -1) - s.envelope.h(xa.reshape(-1))
    out = np.exp2(expo).sum(axis=0)
    return out.reshape(xa.shape) if xa.ndim else float(out[0])


def envelope_sum(s: Scaffold, x) -> np.ndarray | float:
    """Partial sum ``sum_j 2**(a_j + s_j x)`` over the computed legs."""
    xa = np.asarray(x, dtype=float)
    if np.any(xa < 0):
        raise DomainError("envelope_sum needs x >= 0")
    expo = s.intercepts[:, None] + s.offsets[:, None] * xa.reshape(1, -1)
    out = np.exp2(expo).sum(axis=0) * np.exp2(s.envelope.log2_r * xa.reshape(-1))
    return out.reshape(xa.shape) if xa.ndim else float(out[0])


# -- dense scaffold checks -----------------------------------------------------


@dataclass
class ScaffoldCheck:
    results: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(ok for ok, _ in self.results.values())

    def failed(self) -> list[str]:
        return [k for k, (ok, _) in self.results.items() if not ok]


def _fp_slack(*arrays) -> np.ndarray:
    mag = np.abs(np.asarray(arrays[0], dtype=float))
    for a in arrays[1:]:
        mag = np.maximum(mag, np.abs(a))
    return 64 * np.finfo(float).eps * np.maximum(mag, 1.0)


def check_scaffold(
    s: Scaffold,
    n_legs: int | None = None,
    points_per_leg: int = 1000,
    sum_points: int = 10_000,
) -> ScaffoldCheck:
    """Dense numeric audit of the first ``n_legs`` legs (all legs by default).

    Each entry of ``results`` maps a property name to ``(passed, worst)``
    where ``worst`` is the most adverse margin seen.  Comparisons that hold
    with equality at chord endpoints get a few-ulp floating-point allowance.
    """
    env = s.envelope
    legs = s.legs[: n_legs or len(s.legs)]
    N = len(legs)
    out = ScaffoldCheck()
    res = out.results

    ordered = legs[0].y_prev == 0.0 and all(
        leg.y_prev < leg.w < leg.y for leg in legs
    ) and all(p.y == q.y_prev for p, q in zip(legs, legs[1:]))
    res["ordering"] = (ordered, None)

    worst = max(leg.a + leg.n for leg in legs)
    res["intercepts"] = (worst <= 0.0, worst)

    offs = np.array([leg.s_offset for leg in legs])
    increasing = bool(np.all(np.diff(offs) > 0)) and bool(np.all(offs < 0))
    res["slopes"] = (increasing, float(offs.max()))

    root_err = 0.0
    for leg in legs:
        root_err = max(
            root_err,
            abs(chord_gap(env, leg.y_prev, leg.y, s.tol_root * 1e-3) - 1.0),
            abs(float(leg.line_minus_h(env, leg.w)) - 1.0),
            abs(float(leg.line_minus_h(env, leg.y_prev))),
            abs(float(leg.line_minus_h(env, leg.y))),
        )
    res["unit_gap"] = (root_err <= s.tol_root, root_err)

    A = np.array([leg.a for leg in legs])
    low_worst, high_worst, cross_worst = -np.inf, -np.inf, -np.inf
    for i, leg in enumerate(legs):
        xs = np.linspace(leg.y_prev, leg.y, points_per_leg)
        hx = env.h(xs)
        lines = A[:, None] + offs[:, None] * xs[None, :]
        own = lines[i]
        slack = _fp_slack(own, hx, offs[i] * xs)
        low_worst = max(low_worst, float(np.max(hx - own - slack)))
        high_worst = max(high_worst, float(np.max(own - hx - 1.0)))
        dist = np.abs(np.arange(N) - i)[:, None]
        cross = lines - (hx[None, :] + 1.0 - dist)
        cross_worst = max(cross_worst, float(np.max(cross - _fp_slack(lines, hx))))
    res["sandwich"] = (low_worst <= 0.0 and high_worst <= s.tol_sup, max(low_worst, high_worst))
    res["cross_leg"] = (cross_worst <= s.tol_sup, cross_worst)

    per = max(2, sum_points // N)
    xs = np.concatenate([np.linspace(leg.y_prev, leg.y, per) for leg in legs])
    full = Scaffold(env, legs, s.tol_root, s.tol_sup, s.x_cap)
    ratio = envelope_ratio(full, xs)
    res["envelope_sum"] = (bool(np.all(ratio <= 6.0)), float(ratio.max()))
    return out


def grid_gap(env: LogEnvelope, v: float, y: float, n_points: int = 100_001) -> float:
    """Brute-force chord gap on a uniform grid; an oracle for :func:`chord_gap`."""
    xs = np.linspace(v, y, n_points)
    hx = env.h(xs)
    chord = hx[0] + (hx[-1] - hx[0]) / (y - v) * (xs - v)
    return float(np.max(chord - hx))
