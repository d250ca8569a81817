"""Acceptance criteria 1-7, each with its runtime budget in seconds."""

import itertools

import numpy as np
import pytest

from mixforge.chain import (
    ChainSpec,
    bit_frequency_se,
    build_chain,
    coeff_bounds,
    empirical_joint,
    estimate_beta_empirical,
    joint_at_lag,
    sample_path,
    stationary_dist,
    transition_matrix,
    verify_theorem,
)
from mixforge.depcoeff import (
    JointPMF,
    alpha_exact,
    alpha_naive,
    beta_exact,
    product_joint,
    rho_exact,
    rho_power_oracle,
)
from mixforge.envelope import LogEnvelope, RateFunction, build_scaffold, check_scaffold
from mixforge.two_state import BlockParams, make_joint

POLY = RateFunction.polynomial(1.0)
STRETCHED = RateFunction.stretched_exponential(1.0, 0.5)
THEOREM_CONFIGS = list(itertools.product((1.0, 0.9), (POLY, STRETCHED)))


def _scaffold(r, f, legs=20, x_max=200.0):
    return build_scaffold(LogEnvelope(r, f), x_max, min_legs=legs)


@pytest.mark.acceptance(1, "closed-form cross-validation", 5)
def test_closed_form_grid():
    worst = 0.0
    for eps, theta, n in itertools.product((0.5, 0.25, 2.0**-6), (0.9, 0.5, 0.1), range(1, 21)):
        jt = make_joint(BlockParams(eps, theta**n))
        want = ((1 - eps) * eps * theta**n, 2 * (1 - eps) * eps * theta**n, theta**n)
        got = (alpha_exact(jt), beta_exact(jt), rho_exact(jt))
        worst = max(worst, *(abs(g - w) for g, w in zip(got, want)))
    assert worst <= 1e-10


@pytest.mark.acceptance(2, "composition lemmas on random products", 10)
def test_composition_lemmas():
    rng = np.random.default_rng(2024)
    for case in range(50):
        k = 2 + case % 2
        blocks = [BlockParams(rng.uniform(0.01, 0.5), rng.uniform(0.01, 0.99)) for _ in range(k)]
        prod = product_joint([make_joint(b) for b in blocks])
        assert rho_exact(prod) == pytest.approx(max(b.theta for b in blocks), abs=1e-10)
        assert beta_exact(prod) <= sum(beta_exact(make_joint(b)) for b in blocks) + 1e-12


SCAFFOLD_CONFIGS = [
    (1.0, POLY),
    (1.0, STRETCHED),
    (0.9, POLY),
    (0.5, RateFunction.shifted_log_power(1.0, 0.5, 1.0, 0.0)),
]


@pytest.mark.acceptance(3, "scaffolding suite on four (r, f) pairs", 60)
def test_scaffolding_suite():
    for r, f in SCAFFOLD_CONFIGS:
        s = _scaffold(r, f)
        assert len(s) >= 20
        report = check_scaffold(s, n_legs=20, points_per_leg=1000, sum_points=10_000)
        assert report.passed, (r, f.family, {k: report.results[k] for k in report.failed()})
        assert all(leg.a <= -leg.n for leg in s.legs[:20])


@pytest.mark.acceptance(4, "theorem bracket for n = 1..200", 120)
def test_theorem_bracket():
    for r, f in THEOREM_CONFIGS:
        s = _scaffold(r, f)
        chain = build_chain(s, tail_tol=2.0**-19)
        assert chain.J == 20
        report = verify_theorem(chain, 200, exact_alpha_J=4)
        for row in report.rows:
            assert row.alpha_lb >= row.lower_env, (r, f.family, row.n)
            assert row.beta_partial_ub + 2.0**-19 <= row.upper_env + 2.0**-19, (r, f.family, row.n)
        assert report.rho_limit_only == (r == 1.0)

        # theta_J**n rises toward r**n as J grows.  For the polynomial family the
        # gap log2(r) - s_J falls below double resolution of log2(theta), so the
        # strict comparison runs on the exact gaps n * (s_J - log2 r).
        for n in range(1, 201):
            rows = [coeff_bounds(chain.truncate(J), n) for J in (5, 10, 20)]
            gaps = [row.log2_rho_gap for row in rows]
            assert gaps[0] < gaps[1] < gaps[2] < 0.0, (r, f.family, n, gaps)
            rhos = [row.rho_trunc for row in rows]
            assert rhos[0] <= rhos[1] <= rhos[2] <= rows[2].r_pow_n


@pytest.mark.acceptance(5, "exact coefficients at J = 3", 30)
def test_exact_small_truncation():
    for r, f in THEOREM_CONFIGS:
        chain = build_chain(_scaffold(r, f, legs=3, x_max=10.0), J=3)
        pi = stationary_dist(chain)
        P = transition_matrix(chain, 1)
        flow = pi[:, None] * P
        assert np.abs(flow - flow.T).max() <= 1e-12
        rho1 = rho_exact(joint_at_lag(chain, 1))
        for n in (1, 2, 5, 10):
            row = coeff_bounds(chain, n)
            jt = joint_at_lag(chain, n)
            assert np.abs(jt.probs - jt.probs.T).max() <= 1e-15
            assert alpha_exact(jt) >= row.alpha_lb - 1e-12
            assert beta_exact(jt) <= row.beta_partial_ub + 1e-12
            rho_n = rho_exact(jt)
            assert rho_n == pytest.approx(row.rho_trunc, abs=1e-10)
            assert rho_n == pytest.approx(rho1**n, abs=1e-9)


@pytest.mark.acceptance(6, "Monte Carlo agreement", 120)
def test_monte_carlo():
    N = 1_000_000
    block = ChainSpec.from_blocks([(0.25, 0.5)])
    path = sample_path(block, N, seed=1)
    _, counts = empirical_joint(path.states, 1)
    want = np.array([[21, 3], [3, 5]]) / 32
    pairs = counts.sum()
    se = np.sqrt(want * (1 - want) / pairs)
    assert np.all(np.abs(counts / pairs - want) <= 3 * se)

    est = estimate_beta_empirical(path, 1, seed=1)
    assert abs(est.estimate - 3 / 16) <= 3 * est.se

    chain = build_chain(_scaffold(0.9, POLY, legs=3, x_max=10.0), J=3)
    path = sample_path(chain, N, seed=1)
    for j, (eps, theta) in enumerate(zip(chain.epsilons, chain.thetas), start=1):
        se = bit_frequency_se(eps, theta, N)
        assert abs(path.bits(j).mean() - eps) <= 3 * se, j


@pytest.mark.acceptance(7, "oracle agreement", 60)
def test_oracle_agreement():
    rng = np.random.default_rng(77)
    for _ in range(100):
        n, m = rng.integers(2, 9, size=2)
        jt = JointPMF(rng.dirichlet(np.ones(n * m)).reshape(n, m))
        assert abs(rho_exact(jt) - rho_power_oracle(jt)) <= 1e-8
    for _ in range(20):
        jt = JointPMF(rng.dirichlet(np.ones(16)).reshape(4, 4))
        # same optimum; the two sums differ only in rounding order
        assert alpha_exact(jt) == pytest.approx(alpha_naive(jt), abs=4 * np.finfo(float).eps)
