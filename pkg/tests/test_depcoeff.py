import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mixforge.depcoeff import (
    JointPMF,
    all_coeffs,
    alpha_exact,
    alpha_lower_altmax,
    alpha_naive,
    beta_exact,
    beta_partition_oracle,
    default_workers,
    product_joint,
    read_pmf_csv,
    rho_exact,
    rho_power_oracle,
    write_pmf_csv,
)
from mixforge.errors import (
    CapError,
    DegenerateSupportError,
    OracleInconclusiveError,
    ParameterError,
    ValidationError,
)
from mixforge.two_state import BlockParams, make_joint


@st.composite
def tables(draw, max_side=5):
    n = draw(st.integers(1, max_side))
    m = draw(st.integers(1, max_side))
    w = draw(arrays(float, (n, m), elements=st.floats(0.0, 1.0)))
    assume(w.sum() > 1e-3)
    return JointPMF(w / w.sum())


def positive(j):
    return np.all(j.row_marginals > 0) and np.all(j.col_marginals > 0)


def random_table(rng, n, m):
    return JointPMF(rng.dirichlet(np.ones(n * m)).reshape(n, m))


class TestJointPMF:
    @pytest.mark.parametrize("probs", [
        [[0.5, 0.5], [0.5, 0.5]],
        [[1.2, -0.2]],
        [[np.nan, 1.0]],
        [1.0],
    ])
    def test_rejects_bad_tables(self, probs):
        with pytest.raises(ValidationError):
            JointPMF(np.array(probs))

    def test_read_only(self):
        j = JointPMF(np.full((2, 2), 0.25))
        with pytest.raises(ValueError):
            j.probs[0, 0] = 1.0

    def test_labels(self):
        with pytest.raises(ValidationError):
            JointPMF(np.full((2, 2), 0.25), row_labels=("a",))
        assert JointPMF(np.full((1, 2), 0.5)).col_labels == (0, 1)

    def test_drop_empty(self):
        j = JointPMF(np.array([[0.5, 0.0], [0.0, 0.5], [0.0, 0.0]]), row_labels=("x", "y", "z"))
        assert j.drop_empty().row_labels == ("x", "y")
        with pytest.raises(DegenerateSupportError):
            rho_exact(j)
        assert rho_exact(j, drop_empty=True) == pytest.approx(1.0)

    def test_csv_round_trip(self, tmp_path):
        j = random_table(np.random.default_rng(3), 3, 4)
        write_pmf_csv(j, tmp_path / "t.csv")
        back = read_pmf_csv(tmp_path / "t.csv")
        assert np.array_equal(back.probs, j.probs)
        (tmp_path / "bad.csv").write_text(",0,1\nx,0.5\n")
        with pytest.raises(ValidationError):
            read_pmf_csv(tmp_path / "bad.csv")


class TestKnownTables:
    def test_independent_table_is_zero(self):
        j = JointPMF.product([0.2, 0.3, 0.5], [0.6, 0.4])
        a, b, r = all_coeffs(j)
        assert a == pytest.approx(0.0, abs=1e-16)
        assert b == pytest.approx(0.0, abs=1e-16)
        assert r == pytest.approx(0.0, abs=1e-15)

    def test_identical_coins(self):
        j = JointPMF(np.diag([0.5, 0.5]))
        assert all_coeffs(j) == pytest.approx((0.25, 0.5, 1.0))

    def test_single_atom(self):
        j = JointPMF(np.array([[1.0]]))
        assert all_coeffs(j) == (0.0, 0.0, 0.0)

    def test_block_closed_forms(self):
        for eps, theta in [(0.5, 0.9), (0.25, 0.5), (2.0**-6, 0.1)]:
            c = (1 - eps) * eps
            assert all_coeffs(make_joint(BlockParams(eps, theta))) == pytest.approx(
                (c * theta, 2 * c * theta, theta), abs=1e-14)

    def test_accepts_plain_arrays_and_block_objects(self):
        lam = make_joint(BlockParams(0.25, 0.5))
        assert beta_exact(lam) == beta_exact(lam.lam) == beta_exact(JointPMF(lam.lam))


class TestOracles:
    def test_beta_partition_oracle(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            j = random_table(rng, 3, 4)
            assert beta_exact(j) == pytest.approx(beta_partition_oracle(j), abs=1e-15)
        with pytest.raises(CapError):
            beta_partition_oracle(random_table(rng, 8, 2))

    def test_alpha_naive(self):
        rng = np.random.default_rng(6)
        for shape in [(2, 2), (3, 5), (6, 2), (4, 4)]:
            j = random_table(rng, *shape)
            assert alpha_exact(j) == pytest.approx(alpha_naive(j), abs=4 * np.finfo(float).eps)

    def test_alpha_cap(self):
        # the enumeration runs over the smaller side, so both sides must exceed the cap
        j = JointPMF(np.full((9, 12), 1 / 108))
        with pytest.raises(CapError):
            alpha_exact(j, cap=8)
        assert alpha_exact(JointPMF(np.full((1, 30), 1 / 30)), cap=8) == 0.0

    def test_alpha_threads_agree(self):
        j = random_table(np.random.default_rng(8), 18, 18)
        assert alpha_exact(j, workers=4) == alpha_exact(j, workers=1)

    def test_altmax_is_a_lower_bound(self):
        rng = np.random.default_rng(9)
        for _ in range(20):
            j = random_table(rng, 5, 5)
            lb = alpha_lower_altmax(j)
            assert 0.0 <= lb <= alpha_exact(j) + 1e-16
        j = make_joint(BlockParams(0.25, 0.5))
        assert alpha_lower_altmax(j) == pytest.approx(alpha_exact(j), abs=1e-16)
        with pytest.raises(ParameterError):
            alpha_lower_altmax(j, starts=0)

    def test_power_oracle(self):
        rng = np.random.default_rng(10)
        for _ in range(20):
            j = random_table(rng, 6, 7)
            assert rho_power_oracle(j) == pytest.approx(rho_exact(j), abs=1e-8)
        with pytest.raises(ParameterError):
            rho_power_oracle(j, iters=10)

    def test_power_oracle_gives_up_on_ties(self):
        # two equal non-trivial singular values: the ratio settles only slowly
        j = JointPMF(np.diag([1 / 3] * 3) * 0.9 + 0.1 / 9)
        try:
            val = rho_power_oracle(j, iters=1000)
        except OracleInconclusiveError:
            return
        assert val == pytest.approx(rho_exact(j), abs=1e-8)


class TestProperties:
    @settings(max_examples=60, deadline=None)
    @given(tables(), st.randoms(use_true_random=False))
    def test_permutation_invariance(self, j, rnd):
        rows = list(range(j.shape[0]))
        cols = list(range(j.shape[1]))
        rnd.shuffle(rows)
        rnd.shuffle(cols)
        k = JointPMF(j.probs[np.ix_(rows, cols)])
        assert alpha_exact(k) == pytest.approx(alpha_exact(j), abs=1e-15)
        assert beta_exact(k) == pytest.approx(beta_exact(j), abs=1e-15)
        if positive(j):
            assert rho_exact(k) == pytest.approx(rho_exact(j), abs=1e-12)

    @settings(max_examples=60, deadline=None)
    @given(tables())
    def test_ordering_of_coefficients(self, j):
        a, b = alpha_exact(j), beta_exact(j)
        assert 0.0 <= a <= 0.25 + 1e-16
        assert 2 * a <= b + 1e-15
        assert b <= 1.0
        if positive(j):
            assert 4 * a <= rho_exact(j) + 1e-12

    @settings(max_examples=40, deadline=None)
    @given(tables())
    def test_transpose_invariance(self, j):
        t = j.transpose()
        assert alpha_exact(t) == pytest.approx(alpha_exact(j), abs=1e-15)
        assert beta_exact(t) == pytest.approx(beta_exact(j), abs=1e-15)
        if positive(j):
            assert rho_exact(t) == pytest.approx(rho_exact(j), abs=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.tuples(st.floats(0.01, 0.5), st.floats(0.01, 0.99)), min_size=2, max_size=3))
    def test_products_of_blocks(self, params):
        blocks = [make_joint(BlockParams(e, t)) for e, t in params]
        prod = product_joint(blocks)
        assert rho_exact(prod) == pytest.approx(max(t for _, t in params), abs=1e-10)
        assert beta_exact(prod) <= sum(beta_exact(b) for b in blocks) + 1e-12
        assert alpha_exact(prod) >= max(alpha_exact(b) for b in blocks) - 1e-15


class TestProducts:
    def test_first_table_is_least_significant(self):
        a = JointPMF(np.diag([0.5, 0.5]))
        b = JointPMF.product([0.25, 0.75], [0.25, 0.75])
        prod = product_joint([a, b]).probs
        # state 1 = (a=1, b=0): row marginal 0.5 * 0.25
        assert prod.sum(axis=1)[1] == pytest.approx(0.125)
        assert prod[1, 0] == 0.0

    def test_cap(self):
        with pytest.raises(CapError):
            product_joint([np.full((2, 2), 0.25)] * 4, cap=8)
        with pytest.raises(ParameterError):
            product_joint([])


def test_default_workers(monkeypatch):
    monkeypatch.setenv("MIXFORGE_THREADS", "3")
    assert default_workers() == 3
    monkeypatch.setenv("MIXFORGE_THREADS", "lots")
    assert default_workers() == 1
    monkeypatch.delenv("MIXFORGE_THREADS")
    assert default_workers() == 1
