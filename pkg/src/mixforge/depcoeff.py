"""Exact dependence coefficients of a finite joint probability table.

For a pair of discrete variables ``(Y, Z)`` with table ``p_ij``:

* ``beta`` is half the L1 distance between the table and the product of its
  marginals (the finest partitions attain the sup over partition pairs);
* ``alpha`` is the sup of ``|P(A & B) - P(A)P(B)|`` over events, found by
  enumerating ``B`` and choosing the optimal ``A`` row by row;
* ``rho`` is the maximal correlation, the second singular value of
  ``p_ij / sqrt(p_i q_j)``.

Independent oracles (naive event-pair enumeration, partition enumeration,
alternating conditional expectations) live here too so that the self-check
command can use them.
"""

from __future__ import annotations

import csv
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import reduce
from typing import Sequence

import numpy as np

from .errors import (
    CapError,
    DegenerateSupportError,
    OracleInconclusiveError,
    ParameterError,
    ValidationError,
)

EXACT_ALPHA_CAP = 22
PRODUCT_CAP = 1024
_CHUNK = 1 << 15


def default_workers() -> int:
    """Worker cap from ``MIXFORGE_THREADS`` (1 when unset or invalid)."""
    try:
        return max(1, int(os.environ.get("MIXFORGE_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class JointPMF:
    probs: np.ndarray
    row_labels: tuple = ()
    col_labels: tuple = ()

    def __post_init__(self):
        p = np.array(self.probs, dtype=float)
        if p.ndim != 2 or p.size == 0:
            raise ValidationError(f"joint pmf must be a non-empty 2-D table, got shape {p.shape}")
        if not np.all(np.isfinite(p)) or np.any(p < 0):
            raise ValidationError("joint pmf entries must be finite and >= 0")
        if abs(p.sum() - 1.0) > 1e-12:
            raise ValidationError(f"joint pmf sums to {p.sum():.17g}, not 1")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)
        for name, size in (("row_labels", p.shape[0]), ("col_labels", p.shape[1])):
            labels = tuple(getattr(self, name)) or tuple(range(size))
            if len(labels) != size:
                raise ValidationError(f"{name} has {len(labels)} entries for {size} atoms")
            object.__setattr__(self, name, labels)

    @property
    def shape(self):
        return self.probs.shape

    @property
    def row_marginals(self) -> np.ndarray:
        return self.probs.sum(axis=1)

    @property
    def col_marginals(self) -> np.ndarray:
        return self.probs.sum(axis=0)

    def independent_part(self) -> np.ndarray:
        return np.outer(self.row_marginals, self.col_marginals)

    def transpose(self) -> "JointPMF":
        return JointPMF(self.probs.T, self.col_labels, self.row_labels)

    def drop_empty(self) -> "JointPMF":
        """Remove atoms of zero marginal probability."""
        rows = self.row_marginals > 0
        cols = self.col_marginals > 0
        return JointPMF(
            self.probs[np.ix_(rows, cols)] / self.probs[np.ix_(rows, cols)].sum(),
            tuple(l for l, k in zip(self.row_labels, rows) if k),
            tuple(l for l, k in zip(self.col_labels, cols) if k),
        )

    @classmethod
    def product(cls, p, q) -> "JointPMF":
        return cls(np.outer(p, q))


def _as_pmf(j) -> JointPMF:
    if isinstance(j, JointPMF):
        return j
    lam = getattr(j, "lam", None)
    return JointPMF(lam if lam is not None else j)


# -- beta ----------------------------------------------------------------------


def beta_exact(j) -> float:
    j = _as_pmf(j)
    return float(0.5 * np.abs(j.probs - j.independent_part()).sum())


def _set_partitions(items):
    items = list(items)
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in _set_partitions(rest):
        for k in range(len(part)):
            yield part[:k] + [[first] + part[k]] + part[k + 1:]
        yield [[first]] + part


def beta_partition_oracle(j, max_atoms: int = 7) -> float:
    """Sup over all pairs of partitions of the row and column supports."""
    j = _as_pmf(j)
    n, m = j.shape
    if max(n, m) > max_atoms:
        raise CapError(f"partition enumeration capped at {max_atoms} atoms per side")
    P, p, q = j.probs, j.row_marginals, j.col_marginals
    best = 0.0
    col_parts = list(_set_partitions(range(m)))
    for rp in _set_partitions(range(n)):
        for cp in col_parts:
            tot = 0.0
            for A in rp:
                for B in cp:
                    tot += abs(P[np.ix_(A, B)].sum() - p[A].sum() * q[B].sum())
            best = max(best, 0.5 * tot)
    return best


# -- alpha ---------------------------------------------------------------------


def _subset_bits(idx: np.ndarray, m: int) -> np.ndarray:
    return ((idx[:, None] >> np.arange(m)) & 1).astype(float)


def _alpha_chunk(P, p, q, start, stop):
    bits = _subset_bits(np.arange(start, stop, dtype=np.int64), q.size)
    d = bits @ P.T - (bits @ q)[:, None] * p[None, :]
    pos = np.where(d > 0, d, 0.0).sum(axis=1)
    neg = np.where(d < 0, d, 0.0).sum(axis=1)
    return float(max(pos.max(), -neg.min()))


def alpha_exact(j, cap: int = EXACT_ALPHA_CAP, workers: int | None = None) -> float:
    """Exact strong-mixing coefficient of the table.

    Enumerates subsets ``B`` of the smaller support (half of them, since
    ``B`` and its complement give the same value) and takes the optimal
    ``A`` as the rows where ``P(B | row) - P(B)`` has a fixed sign.
    """
    j = _as_pmf(j)
    if j.shape[1] > j.shape[0]:
        j = j.transpose()
    m = j.shape[1]
    if m > cap:
        raise CapError(
            f"exact alpha enumerates 2**{m} events (cap 2**{cap}); use alpha_lower_altmax"
        )
    if m == 1:
        return 0.0
    P, p, q = j.probs, j.row_marginals, j.col_marginals
    total = 1 << (m - 1)
    bounds = [(s, min(s + _CHUNK, total)) for s in range(0, total, _CHUNK)]
    workers = workers or default_workers()
    if workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(workers) as pool:
            vals = list(pool.map(lambda b: _alpha_chunk(P, p, q, *b), bounds))
    else:
        vals = [_alpha_chunk(P, p, q, *b) for b in bounds]
    return max(vals)


def alpha_naive(j, max_atoms: int = 10) -> float:
    """Brute force over every event pair ``(A, B)``; no shortcut."""
    j = _as_pmf(j)
    n, m = j.shape
    if max(n, m) > max_atoms:
        raise CapError(f"naive alpha enumeration capped at {max_atoms} atoms per side")
    A = _subset_bits(np.arange(1 << n), n)
    B = _subset_bits(np.arange(1 << m), m)
    joint = A @ j.probs @ B.T
    prod = np.outer(A @ j.row_marginals, B @ j.col_marginals)
    return float(np.abs(joint - prod).max())


def alpha_lower_altmax(j, starts: int = 16, seed: int = 0, max_iter: int = 200) -> float:
    """Certified lower bound on alpha by alternating maximisation.

    The first start uses ``B`` = whole space, which is a fixed point with
    value 0; further starts draw ``B`` uniformly at random.  Each half-step
    picks the optimal event on one side given the other, so the value never
    decreases, and every returned value is attained by an actual event pair.
    """
    if starts < 1:
        raise ParameterError("starts must be >= 1")
    j = _as_pmf(j)
    P, p, q = j.probs, j.row_marginals, j.col_marginals
    rng = np.random.default_rng(seed)
    best = 0.0
    for k in range(starts):
        B = np.ones(q.size, dtype=bool) if k == 0 else rng.random(q.size) < 0.5
        val = -1.0
        for _ in range(max_iter):
            d = P[:, B].sum(axis=1) - p * q[B].sum()
            pos, neg = d[d > 0].sum(), -d[d < 0].sum()
            A = d > 0 if pos >= neg else d < 0
            e = P[A, :].sum(axis=0) - p[A].sum() * q
            pos, neg = e[e > 0].sum(), -e[e < 0].sum()
            B = e > 0 if pos >= neg else e < 0
            new = max(pos, neg)
            if new <= val:
                break
            val = new
        best = max(best, val)
    return float(best)


# -- rho -----------------------------------------------------------------------


def _require_positive_marginals(j: JointPMF):
    if np.any(j.row_marginals <= 0) or np.any(j.col_marginals <= 0):
        raise DegenerateSupportError(
            "zero-probability atoms in the support; call drop_empty() first"
        )


def rho_exact(j, drop_empty: bool = False) -> float:
    """Maximal correlation via the singular values of the normalised table.

    The top singular pair of ``Q = p_ij / sqrt(p_i q_j)`` is
    ``(sqrt p, sqrt q)`` with value 1; removing it leaves ``sigma_2`` as the
    largest singular value of ``Q - sqrt(p) sqrt(q)^T``.
    """
    j = _as_pmf(j)
    if drop_empty:
        j = j.drop_empty()
    _require_positive_marginals(j)
    sp, sq = np.sqrt(j.row_marginals), np.sqrt(j.col_marginals)
    Q = j.probs / np.outer(sp, sq)
    if min(j.shape) == 1:
        return 0.0
    s_top = np.linalg.norm(Q, 2)
    if abs(s_top - 1.0) > 1e-10:
        raise ValidationError(f"normalised table has top singular value {s_top!r} != 1")
    s2 = np.linalg.norm(Q - np.outer(sp, sq), 2)
    return float(min(max(s2, 0.0), 1.0))


def rho_power_oracle(j, iters: int = 100_000, seed: int = 0, tol: float = 1e-15) -> float:
    """Maximal correlation by alternating conditional expectations.

    Starting from a random centred function of ``Y``, alternately project onto
    functions of ``Z`` and back; the ratio of norms converges to the maximal
    correlation.  Raises :class:`OracleInconclusiveError` when the estimate is
    still moving after ``iters`` sweeps (a near tie with the next singular
    value).
    """
    if iters < 1000:
        raise ParameterError("iters must be >= 1000")
    j = _as_pmf(j)
    _require_positive_marginals(j)
    P, p, q = j.probs, j.row_marginals, j.col_marginals
    if min(j.shape) == 1:
        return 0.0
    rng = np.random.default_rng(seed)
    phi = rng.standard_normal(p.size)
    est, calm = 0.0, 0
    for _ in range(iters):
        phi = phi - p @ phi
        norm_phi = np.sqrt(p @ phi**2)
        if norm_phi < 1e-150:
            return 0.0
        phi = phi / norm_phi
        psi = (phi @ P) / q
        psi = psi - q @ psi
        new = float(np.sqrt(q @ psi**2))
        if new < 1e-150:
            return 0.0
        phi = (P @ psi) / p
        if abs(new - est) <= tol * max(new, 1e-300):
            calm += 1
            if calm >= 10:
                return new
        else:
            calm = 0
        est = new
    raise OracleInconclusiveError(
        f"power oracle did not settle in {iters} sweeps (last estimate {est:.17g})"
    )


# -- products and I/O ----------------------------------------------------------


def product_joint(tables: Sequence, cap: int = PRODUCT_CAP) -> JointPMF:
    """Joint table of independent pairs, with ``tables[0]`` the fastest digit.

    Row index ``sum_k i_k * prod_{l<k} n_l``; with 2x2 blocks this is the
    binary code ``sum_k 2**k * bit_k``.
    """
    if not tables:
        raise ParameterError("product_joint needs at least one table")
    pmfs = [_as_pmf(t) for t in tables]
    rows = int(np.prod([t.shape[0] for t in pmfs]))
    cols = int(np.prod([t.shape[1] for t in pmfs]))
    if max(rows, cols) > cap:
        raise CapError(f"product support {rows}x{cols} exceeds cap {cap}")
    probs = reduce(lambda acc, t: np.kron(t.probs, acc), pmfs[1:], pmfs[0].probs)
    return JointPMF(probs / probs.sum())


def write_pmf_csv(j: JointPMF, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([""] + list(j.col_labels))
        for label, row in zip(j.row_labels, j.probs):
            w.writerow([label] + [format(v, ".17g") for v in row])


def read_pmf_csv(path) -> JointPMF:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise ValidationError(f"{path}: need a header row and at least one data row")
    cols = tuple(rows[0][1:])
    labels, data = [], []
    for r in rows[1:]:
        if len(r) != len(cols) + 1:
            raise ValidationError(f"{path}: ragged row {r[:1]}")
        labels.append(r[0])
        data.append([float(v) for v in r[1:]])
    return JointPMF(np.array(data), tuple(labels), cols)


def all_coeffs(j) -> tuple[float, float, float]:
    """``(alpha, beta, rho)`` of one table."""
    return alpha_exact(j), beta_exact(j), rho_exact(j)


__all__ = [
    "JointPMF", "alpha_exact", "alpha_lower_altmax", "alpha_naive", "all_coeffs",
    "beta_exact", "beta_partition_oracle", "product_joint", "read_pmf_csv",
    "rho_exact", "rho_power_oracle", "write_pmf_csv",
]
