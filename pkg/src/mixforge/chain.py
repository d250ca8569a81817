"""Truncated product chain built from scaffold legs.

Block ``j`` (1-based) is the two-state chain with
``epsilon_j = 2**a_j`` and ``theta_j = 2**s_j``; the chain state packs the
block states as bits, ``X = sum_j 2**(j-1) W_j``.  The infinite product is cut
at ``J`` blocks; the discarded blocks contribute at most ``2**(1-J)`` to beta
at every lag because ``a_j <= -j``.

Slopes are carried as ``log2(r) + s_offset`` and never exponentiated before
multiplying by the lag, so ``theta_j**n`` keeps its relative precision even
when ``theta_j`` itself rounds to ``r``.
"""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import reduce

import numpy as np

from .depcoeff import (
    JointPMF,
    alpha_exact,
    beta_exact,
    default_workers,
    product_joint,
    rho_exact,
)
from .envelope import Scaffold
from .errors import CapError, NeedsMoreLegsError, ParameterError, SampleSizeError
from .two_state import BlockParams, joint_entries, transition_entries

log = logging.getLogger(__name__)

GENERATOR_NAME = "numpy.random.Philox"
DENSE_CAP = 20
JOINT_CAP = 10
CONSISTENCY_TOL = {"alpha": 1e-12, "beta": 1e-12, "rho": 1e-10}


@dataclass(frozen=True)
class ChainSpec:
    """Blocks ``1..J`` of the product chain.

    ``intercepts[j-1] = log2(epsilon_j)`` and
    ``log2_thetas = log2_r + s_offsets``.  ``scaffold`` is ``None`` for chains
    given directly as a list of blocks.
    """

    J: int
    intercepts: np.ndarray
    s_offsets: np.ndarray
    log2_r: float
    scaffold: Scaffold | None = None
    tail_tol: float | None = None

    def __post_init__(self):
        a = np.asarray(self.intercepts, dtype=float)
        off = np.asarray(self.s_offsets, dtype=float)
        if a.shape != (self.J,) or off.shape != (self.J,) or self.J < 1:
            raise ParameterError("chain needs J >= 1 blocks with one intercept and slope each")
        if np.any(a > -1.0):
            raise ParameterError("every block needs epsilon <= 1/2")
        if self.log2_r > 0 or np.any(off >= 0):
            raise ParameterError("every block needs theta < 1")
        if self.scaffold is not None and np.any(np.diff(off) <= 0):
            raise ParameterError("scaffold block slopes must increase strictly")
        object.__setattr__(self, "intercepts", a)
        object.__setattr__(self, "s_offsets", off)

    @classmethod
    def from_blocks(cls, blocks) -> "ChainSpec":
        bps = [b if isinstance(b, BlockParams) else BlockParams(*b) for b in blocks]
        return cls(
            len(bps),
            np.log2([b.epsilon for b in bps]),
            np.log2([b.theta for b in bps]),
            0.0,
        )

    @property
    def r(self) -> float:
        return 2.0**self.log2_r

    @property
    def epsilons(self) -> np.ndarray:
        return np.exp2(self.intercepts)

    @property
    def log2_thetas(self) -> np.ndarray:
        return self.log2_r + self.s_offsets

    @property
    def thetas(self) -> np.ndarray:
        return np.exp2(self.log2_thetas)

    @property
    def blocks(self) -> list[BlockParams]:
        """Blocks as :class:`BlockParams`; raises if some ``theta`` rounds to 1."""
        return [BlockParams(e, t) for e, t in zip(self.epsilons, self.thetas)]

    def truncate(self, J: int) -> "ChainSpec":
        if not 1 <= J <= self.J:
            raise ParameterError(f"cannot truncate {self.J} blocks to {J}")
        return ChainSpec(J, self.intercepts[:J], self.s_offsets[:J], self.log2_r,
                         self.scaffold, self.tail_tol)


def truncation_level(tail_tol: float) -> int:
    """Smallest ``J`` with ``2**(1 - J) <= tail_tol``."""
    if not 0.0 < tail_tol < 1.0:
        raise ParameterError(f"tail_tol must lie in (0, 1), got {tail_tol}")
    return max(1, math.ceil(1.0 - math.log2(tail_tol)))


def build_chain(s: Scaffold, tail_tol: float = 2.0**-19, J: int | None = None) -> ChainSpec:
    """Assemble blocks ``1..J`` from the scaffold legs.

    ``J`` defaults to :func:`truncation_level` of ``tail_tol``.
    """
    need = truncation_level(tail_tol) if J is None else int(J)
    if need < 1:
        raise ParameterError("J must be >= 1")
    if len(s) < need:
        try:
            required = s.extend_to(need).legs[need - 1].y
        except Exception:  # the message is still useful without the figure
            required = None
        where = f"; rebuild with x_max >= {required:.17g}" if required is not None else ""
        raise NeedsMoreLegsError(
            f"truncation J={need} needs {need} legs, scaffold has {len(s)}{where}",
            required_x_max=required,
        )
    legs = s.legs[:need]
    return ChainSpec(
        need,
        np.array([leg.a for leg in legs]),
        np.array([leg.s_offset for leg in legs]),
        s.envelope.log2_r,
        s,
        float(tail_tol),
    )


# -- dense objects -------------------------------------------------------------


def _bit_product(vectors):
    # block 1 is the least significant bit
    return reduce(lambda acc, v: np.kron(v, acc), vectors[1:], vectors[0])


def stationary_dist(c: ChainSpec, cap: int = DENSE_CAP) -> np.ndarray:
    if c.J > cap:
        raise CapError(f"dense stationary law over 2**{c.J} states exceeds cap 2**{cap}")
    eps = c.epsilons
    return _bit_product([np.array([1.0 - e, e]) for e in eps])


def _lag_thetas(c: ChainSpec, n: int) -> np.ndarray:
    return np.exp2(n * c.log2_thetas)


def transition_matrix(c: ChainSpec, n: int = 1, cap: int = JOINT_CAP) -> np.ndarray:
    """Dense n-step transition matrix of the truncated chain."""
    if c.J > cap:
        raise CapError(f"dense transition matrix over 2**{c.J} states exceeds cap 2**{cap}")
    mats = [transition_entries(e, t) for e, t in zip(c.epsilons, _lag_thetas(c, n))]
    return _bit_product(mats)


def joint_at_lag(c: ChainSpec, n: int, cap: int = JOINT_CAP) -> JointPMF:
    """Law of ``(X_0, X_n)`` for the truncated chain."""
    if int(n) != n or n < 1:
        raise ParameterError(f"lag must be a positive integer, got {n}")
    if c.J > cap:
        raise CapError(f"joint table over 2**{c.J} states exceeds cap 2**{cap}")
    tables = [joint_entries(e, t) for e, t in zip(c.epsilons, _lag_thetas(c, int(n)))]
    return product_joint(tables, cap=1 << cap)


# -- bounds and verification -----------------------------------------------------


@dataclass
class CoeffRow:
    n: int
    rho_trunc: float
    r_pow_n: float
    alpha_lb: float
    beta_partial_ub: float
    beta_tail_ub: float
    lower_env: float
    upper_env: float
    log2_rho_gap: float
    alpha_exact: float | None = None
    beta_exact: float | None = None
    rho_exact: float | None = None

    @property
    def alpha_pass(self) -> bool:
        return self.alpha_lb >= self.lower_env

    @property
    def beta_pass(self) -> bool:
        return self.beta_partial_ub <= self.upper_env

    @property
    def passed(self) -> bool:
        return self.alpha_pass and self.beta_pass


def coeff_bounds(c: ChainSpec, n: int) -> CoeffRow:
    """Certified bracket for the truncated chain at lag ``n``.

    ``alpha_lb`` is half the largest block term ``epsilon_j theta_j**n`` (each
    block is a pair of sub-sigma-fields), ``beta_partial_ub`` sums the block
    bounds ``2 epsilon_j theta_j**n`` and ``beta_tail_ub`` covers the blocks
    beyond ``J``.
    """
    if c.scaffold is None:
        raise ParameterError("coefficient bounds need a scaffold-derived chain")
    if int(n) != n or n < 1:
        raise ParameterError(f"lag must be a positive integer, got {n}")
    n = int(n)
    terms = np.exp2(c.intercepts + n * c.log2_thetas)
    r_pow_n = 2.0 ** (n * c.log2_r)
    f_n = float(c.scaffold.envelope.f(float(n)))
    return CoeffRow(
        n=n,
        rho_trunc=float(2.0 ** (n * c.log2_thetas[-1])),
        r_pow_n=r_pow_n,
        alpha_lb=0.5 * float(terms.max()),
        beta_partial_ub=2.0 * float(terms.sum()),
        beta_tail_ub=2.0 ** (1 - c.J),
        lower_env=0.5 * r_pow_n * f_n,
        upper_env=12.0 * r_pow_n * f_n,
        log2_rho_gap=float(n * c.s_offsets[-1]),
    )


@dataclass
class CoeffReport:
    rows: list[CoeffRow]
    J: int
    r: float
    tail_tol: float | None
    rho_limit_only: bool
    consistency_failures: list[tuple[int, str]] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    @property
    def failures(self) -> list[CoeffRow]:
        return [row for row in self.rows if not row.passed]

    @property
    def all_pass(self) -> bool:
        return not self.failures and not self.consistency_failures

    def to_csv(self, path) -> None:
        header = ["n", "rho_trunc", "r_pow_n", "alpha_lb", "alpha_exact", "beta_partial_ub",
                  "beta_tail_ub", "lower_env", "upper_env", "alpha_pass", "beta_pass"]
        g = lambda v: "" if v is None else format(v, ".17g")  # noqa: E731
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in self.rows:
                w.writerow([row.n, g(row.rho_trunc), g(row.r_pow_n), g(row.alpha_lb),
                            g(row.alpha_exact), g(row.beta_partial_ub), g(row.beta_tail_ub),
                            g(row.lower_env), g(row.upper_env),
                            str(row.alpha_pass).lower(), str(row.beta_pass).lower()])


def _legs_covering(c: ChainSpec, n_max: int) -> int:
    ys = c.scaffold.ys
    return int(np.searchsorted(ys, n_max, side="left")) + 1


def verify_theorem(
    c: ChainSpec,
    n_max: int,
    exact_alpha_J: int = 4,
    workers: int | None = None,
) -> CoeffReport:
    """Rows ``n = 1..n_max`` of certified bounds against the target envelopes.

    When ``J <= exact_alpha_J`` the exact coefficients of the truncated chain
    are computed as well and checked against the bounds.
    """
    if c.scaffold is None:
        raise ParameterError("verification needs a scaffold-derived chain")
    if n_max < 1:
        raise ParameterError("n_max must be >= 1")
    if c.scaffold.legs[c.J - 1].y < n_max:
        need = _legs_covering(c, n_max) if c.scaffold.y_last >= n_max else None
        raise NeedsMoreLegsError(
            f"blocks 1..{c.J} cover lags up to {c.scaffold.legs[c.J - 1].y:.6g} < n_max={n_max}"
            + (f"; use J >= {need}" if need else f"; rebuild the scaffold with x_max >= {n_max}"),
            required_x_max=float(n_max),
        )
    exact = c.J <= exact_alpha_J

    def one(n):
        row = coeff_bounds(c, n)
        if exact:
            jt = joint_at_lag(c, n)
            row.alpha_exact = alpha_exact(jt, workers=1)
            row.beta_exact = beta_exact(jt)
            row.rho_exact = rho_exact(jt)
        return row

    workers = workers or default_workers()
    lags = range(1, int(n_max) + 1)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            rows = list(pool.map(one, lags))
    else:
        rows = [one(n) for n in lags]

    report = CoeffReport(rows, c.J, c.r, c.tail_tol, rho_limit_only=(c.log2_r == 0.0))
    if exact:
        for row in rows:
            if row.alpha_exact < row.alpha_lb - CONSISTENCY_TOL["alpha"]:
                report.consistency_failures.append((row.n, "alpha_exact < alpha_lb"))
            if row.beta_exact > row.beta_partial_ub + CONSISTENCY_TOL["beta"]:
                report.consistency_failures.append((row.n, "beta_exact > beta_partial_ub"))
            if abs(row.rho_exact - row.rho_trunc) > CONSISTENCY_TOL["rho"]:
                report.consistency_failures.append((row.n, "rho_exact != rho_trunc"))
    if report.rho_limit_only:
        msg = ("r = 1: every truncation has rho < 1; rho(n) = 1 holds only for the "
               "infinite product, so rho verdicts are limit-only")
        report.notes.append(msg)
        log.warning(msg)
    return report


# -- sampling --------------------------------------------------------------------


@dataclass
class SamplePath:
    states: np.ndarray
    J: int
    seed: int
    generator: str = GENERATOR_NAME

    def __len__(self):
        return self.states.size

    def bits(self, j: int) -> np.ndarray:
        """State of block ``j`` (1-based) along the path."""
        return (self.states >> (j - 1)) & 1

    def metadata(self) -> dict:
        return {"generator": self.generator, "seed": self.seed, "J": self.J,
                "length": int(self.states.size)}

    def write(self, path) -> None:
        np.savetxt(path, self.states, fmt="%d")


def sample_path(c: ChainSpec, length: int, seed: int) -> SamplePath:
    """Stationary path of the truncated chain.

    Each block moves independently: with probability ``theta`` it keeps its
    state, otherwise it redraws from ``(1 - eps, eps)``.  That is exactly the
    block's transition matrix, and lets the path be generated without a
    Python-level loop over time.
    """
    if length < 1:
        raise ParameterError("path length must be >= 1")
    if c.J > 62:
        raise CapError("paths pack block states into int64; J <= 62")
    rng = np.random.Generator(np.random.Philox(seed))
    states = np.zeros(length, dtype=np.int64)
    steps = np.arange(length)
    for j, (eps, theta) in enumerate(zip(c.epsilons, c.thetas)):
        stay = rng.random(length) < theta
        fresh = rng.random(length) < eps
        stay[0] = False
        last = np.maximum.accumulate(np.where(stay, 0, steps))
        states |= fresh[last].astype(np.int64) << j
    return SamplePath(states, c.J, int(seed))


def empirical_joint(states: np.ndarray, lag: int):
    """Counts of ``(X_k, X_{k+lag})`` over the observed states.

    Returns ``(labels, counts)`` with ``counts[i, j]`` indexed by
    ``labels``.
    """
    x, y = states[:-lag], states[lag:]
    labels, inv = np.unique(np.concatenate([x, y]), return_inverse=True)
    S = labels.size
    codes = inv[: x.size] * S + inv[x.size:]
    return labels, np.bincount(codes, minlength=S * S).reshape(S, S)


def _beta_from_counts(counts: np.ndarray) -> float:
    P = counts / counts.sum()
    return float(0.5 * np.abs(P - np.outer(P.sum(1), P.sum(0))).sum())


@dataclass
class BetaEstimate:
    estimate: float
    se: float
    lag: int
    n_pairs: int
    block_len: int
    n_boot: int


def estimate_beta_empirical(
    path,
    lag: int,
    n_boot: int = 200,
    block_len: int | None = None,
    seed: int = 0,
) -> BetaEstimate:
    """Plug-in beta at ``lag`` with a block-bootstrap standard error.

    The plug-in estimate is biased upward for small samples (the absolute
    values never cancel noise).  Blocks of ``10 * lag`` consecutive pairs are
    resampled with replacement ``n_boot`` times.
    """
    states = np.asarray(getattr(path, "states", path), dtype=np.int64)
    if lag < 1:
        raise SampleSizeError("lag must be >= 1")
    if states.size < 100 * lag:
        raise SampleSizeError(
            f"path of length {states.size} too short for lag {lag} (need >= {100 * lag})"
        )
    labels, counts = empirical_joint(states, lag)
    est = _beta_from_counts(counts)

    S = labels.size
    x, y = states[:-lag], states[lag:]
    inv = np.searchsorted(labels, np.concatenate([x, y]))
    codes = inv[: x.size] * S + inv[x.size:]
    L = block_len or 10 * lag
    nb = codes.size // L
    block_id = np.arange(nb * L) // L
    tables = np.bincount(block_id * S * S + codes[: nb * L], minlength=nb * S * S)
    tables = tables.reshape(nb, S * S).astype(float)
    rng = np.random.Generator(np.random.Philox(seed))
    boots = np.empty(n_boot)
    if nb * S * S <= 50_000_000:
        weights = rng.multinomial(nb, np.full(nb, 1.0 / nb), size=n_boot).astype(float)
        for b, t in enumerate(weights @ tables):
            boots[b] = _beta_from_counts(t.reshape(S, S))
    else:
        for b in range(n_boot):
            pick = rng.integers(0, nb, size=nb)
            boots[b] = _beta_from_counts(tables[pick].sum(0).reshape(S, S))
    return BetaEstimate(est, float(boots.std(ddof=1)), int(lag), int(codes.size), int(L), int(n_boot))


def bit_frequency_se(eps: float, theta: float, n: int) -> float:
    """Asymptotic standard error of a block's empirical frequency of state 1.

    A two-state block has lag-k autocorrelation ``theta**k``, so the variance of
    the mean is ``eps (1 - eps) / n * (1 + theta) / (1 - theta)``.
    """
    return math.sqrt(eps * (1.0 - eps) / n * (1.0 + theta) / (1.0 - theta))
