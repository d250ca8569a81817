"""Built-in fixture oracles run by ``mixforge selfcheck``.

Each group returns ``(passed, detail)``.  ``perturb`` shifts the frozen
expected constants so the fault path can be exercised.
"""

from __future__ import annotations

import itertools

import numpy as np

from .depcoeff import (
    JointPMF,
    alpha_exact,
    alpha_naive,
    beta_exact,
    beta_partition_oracle,
    product_joint,
    rho_exact,
    rho_power_oracle,
)
from .envelope import LogEnvelope, RateFunction, chord_gap, next_breakpoint
from .two_state import (
    BlockParams,
    block_coeffs,
    compose,
    joint_from_transition,
    make_joint,
    make_transition,
)

# (1 + y_1) for f(x) = (x+1)**-1 / 2: root of the unit chord gap of -log2 t on [1, k],
# solved in closed form at 40 digits.
POLY1_RATIO = 11.54654244834104201248276748835939746667
# chord gap over [0, 1] for r = 1/2, p = 1: 1 - 1/ln 2 + log2(1/ln 2)
POLY1_GAP01 = 0.08607133205593420688757309877692267776059

GRID_EPS = (0.5, 0.25, 2.0**-6)
GRID_THETA = (0.9, 0.5, 0.1)


def closed_forms(perturb=0.0):
    worst = 0.0
    for eps, theta, n in itertools.product(GRID_EPS, GRID_THETA, range(1, 21)):
        a, b, r = block_coeffs(BlockParams(eps, theta), n)
        jt = make_joint(BlockParams(eps, theta**n))
        got = (alpha_exact(jt), beta_exact(jt), rho_exact(jt))
        worst = max(worst, *(abs(g - (e + perturb)) for g, e in zip(got, (a, b, r))))
    return worst <= 1e-10, f"max |engine - closed form| = {worst:.2e}"


def composition(perturb=0.0):
    P = make_transition(BlockParams(0.25, 0.5))
    sq = compose(P, P)
    want = np.array([[13, 3], [9, 7]]) / 16 + perturb
    err = float(np.abs(sq.p - want).max())
    Q = P
    for _ in range(9):
        Q = compose(Q, P)
    err = max(err, float(np.abs(Q.p - make_transition(BlockParams(0.25, 0.5**10)).p).max()))
    return err <= 1e-14, f"max entry error = {err:.2e}"


def joint_from_chain(perturb=0.0):
    got = joint_from_transition(BlockParams(0.25, 0.5)).lam
    want = np.array([[21, 3], [3, 5]]) / 32 + perturb
    err = float(np.abs(got - want).max())
    return err <= 1e-14, f"max entry error = {err:.2e}"


def product_lemmas(perturb=0.0, cases=50, seed=7):
    rng = np.random.default_rng(seed)
    worst_rho, worst_beta = 0.0, -np.inf
    for _ in range(cases):
        k = int(rng.integers(2, 4))
        bps = [BlockParams(rng.uniform(0.01, 0.5), rng.uniform(0.01, 0.99)) for _ in range(k)]
        prod = product_joint([make_joint(bp) for bp in bps])
        worst_rho = max(worst_rho, abs(rho_exact(prod) - (max(bp.theta for bp in bps) + perturb)))
        worst_beta = max(worst_beta, beta_exact(prod) - sum(beta_exact(make_joint(bp)) for bp in bps))
    ok = worst_rho <= 1e-10 and worst_beta <= 1e-12
    return ok, f"rho err {worst_rho:.2e}, beta excess {worst_beta:.2e}"


def alpha_oracles(perturb=0.0, cases=20, seed=11):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(cases):
        j = JointPMF(rng.dirichlet(np.ones(16)).reshape(4, 4))
        worst = max(worst, abs(alpha_exact(j) - alpha_naive(j) - perturb))
    j = JointPMF(np.array([[0.5, 0.0], [0.0, 0.5]]))
    worst = max(worst, abs(beta_exact(j) - beta_partition_oracle(j)))
    return worst <= 1e-15, f"max |shortcut - naive| = {worst:.2e}"


def rho_oracles(perturb=0.0, cases=20, seed=13):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(cases):
        n, m = rng.integers(2, 9, size=2)
        j = JointPMF(rng.dirichlet(np.ones(n * m)).reshape(n, m))
        worst = max(worst, abs(rho_exact(j) - rho_power_oracle(j) - perturb))
    return worst <= 1e-8, f"max |svd - power| = {worst:.2e}"


def scaffold_fixture(perturb=0.0):
    env = LogEnvelope(0.5, RateFunction.polynomial(1.0))
    gap = chord_gap(env, 0.0, 1.0, 1e-12)
    y1 = next_breakpoint(env, 0.0, 1e-12)
    err_gap = abs(gap - POLY1_GAP01 - perturb)
    err_y = abs(y1 - (POLY1_RATIO - 1.0) - perturb)
    return err_gap <= 1e-10 and err_y <= 1e-8, f"gap err {err_gap:.2e}, y1 err {err_y:.2e}"


GROUPS = {
    "two-state closed forms vs engine": closed_forms,
    "transition composition": composition,
    "joint from transition": joint_from_chain,
    "independent products (rho max, beta subadditive)": product_lemmas,
    "alpha shortcut vs naive enumeration": alpha_oracles,
    "rho singular value vs power oracle": rho_oracles,
    "polynomial scaffold closed form": scaffold_fixture,
}


def run(perturb=0.0):
    return {name: fn(perturb) for name, fn in GROUPS.items()}
