import itertools
import math
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from momlab import moments as mo
from momlab.arith import character_group, sieve_lambda
from momlab.explicit import psi_eta_char
from momlab.weights import beta_q, kernel, make_weight


# ---------------------------------------------------------------------------
# moments at one x


@pytest.mark.parametrize("q", [3, 5, 8, 12])
def test_first_moment_vanishes(q, small_table, expk1):
    for x in (10.0, 1e3, 5e4):
        assert abs(mo.moment_residue_side(x, q, 1, expk1, small_table).value) < 1e-12


@pytest.mark.parametrize("q,n", [(5, 2), (5, 3), (7, 4), (8, 3), (12, 4)])
def test_residue_side_equals_character_side(q, n, table, expk1):
    for x in (1e2, 1e4):
        r = mo.moment_residue_side(x, q, n, expk1, table).value
        c = mo.moment_character_side(x, q, n, expk1, table).value
        assert c == pytest.approx(r, rel=1e-9, abs=1e-300)


def test_second_moment_from_characters(table, expk1):
    q, x = 5, 1e4
    g = character_group(q)
    want = sum(abs(psi_eta_char(x, q, c.conrey, expk1, table).value) ** 2 for c in g.nonprincipal()) / g.phi**2
    assert mo.moment_residue_side(x, q, 2, expk1, table).value == pytest.approx(want, rel=1e-12)


def test_q3_cube_vanishes(table, expk1):
    r = mo.moment_character_side(100.0, 3, 3, expk1, table)
    # the only non-principal character is real and chi^3 = chi, so no tuple closes
    assert r.extra["tuples"] == 0 and r.value == 0
    assert mo.moment_residue_side(100.0, 3, 3, expk1, table).value == pytest.approx(0, abs=1e-12)


def test_tuple_budget(small_table, expk1):
    with pytest.raises(mo.BudgetError):
        mo.moment_character_side(10.0, 101, 6, expk1, small_table, budget=10**6)


def test_truncation_bound_covers_table_change(expk1):
    big = sieve_lambda(10**6)
    small = sieve_lambda(10**4)
    for x in (1e3, 1e5):
        a = mo.moment_residue_side(x, 7, 2, expk1, small)
        b = mo.moment_residue_side(x, 7, 2, expk1, big)
        assert abs(a.value - b.value) <= a.trunc_err + b.trunc_err


@settings(max_examples=25, deadline=None)
@given(st.floats(1.0, 11.0), st.sampled_from([5, 7, 8, 12]), st.integers(2, 3))
def test_jensen(small_table, t, q, m):
    eta = make_weight("expK:1")
    x = math.exp(t)
    m2 = mo.moment_residue_side(x, q, 2, eta, small_table).value
    m2m = mo.moment_residue_side(x, q, 2 * m, eta, small_table).value
    assert m2 >= 0
    assert m2m >= m2**m * (1 - 1e-12)


# ---------------------------------------------------------------------------
# Delta kernels


def indicator(sig):
    return int(sum(sig) == 0 and all(v != 0 for v in sig))


def test_delta_examples():
    assert mo.delta_s([0, 0]) == 0
    assert mo.delta_s([1, -1]) == 1
    assert mo.delta_s([0, 1, -1]) == 0
    assert mo.delta_s([Fraction(1, 3), Fraction(-1, 3)]) == 1


@pytest.mark.parametrize("s", [1, 2, 3, 4])
def test_delta_exhaustive(s):
    tri = kernel("triangle")
    for sig in itertools.product(range(-2, 3), repeat=s):
        want = indicator(sig)
        assert mo.delta_s(list(sig)) == want
        for T in (1.0, 10.0, 100.0):
            assert mo.delta_s_smoothed(list(sig), tri, T) >= want - 1e-12


def test_delta_symbolic_keys():
    a = Counter({("x", 1): 1})
    b = Counter({("x", 1): -1})
    assert mo.delta_s([a, b]) == 1
    assert mo.delta_s([a, a]) == 0
    with pytest.raises(TypeError):
        mo.delta_s([0.5, -0.5])


def test_smoothed_tends_to_exact():
    tri = kernel("triangle")
    sig = [0.3, -0.25]
    assert mo.delta_s_smoothed(sig, tri, 1e4) == pytest.approx(0, abs=1e-6)
    assert mo.delta_s_smoothed([0.3, -0.3], tri, 1e4) == pytest.approx(1, abs=1e-12)


# ---------------------------------------------------------------------------
# spectral side


def test_rows_flag_only_conjugate_pairs(stores, expk1):
    rows = mo.spectral_rows(5, 2, expk1, stores(5), 30)
    assert rows.zero.sum() > 0
    for r in np.flatnonzero(rows.zero):
        k = rows.key(r)
        assert all(v == 0 for v in k.values())
    assert np.all(np.abs(rows.sigma[rows.nonzero]) > mo.SIGMA_TOL)


@pytest.mark.parametrize("q", [3, 5, 7])
def test_second_spectral_mean_is_diagonal(q, stores, expk1):
    store = stores(q)
    g = character_group(q)
    want = 0.0
    for c in g.nonprincipal():
        gam, _, _ = store.signed(q, c.conrey, 100)
        want += math.fsum(np.real(expk1.eta_hat(gam / (2 * math.pi))) ** 2)
    want /= g.phi**2
    val, bound = mo.spectral_mean(q, 2, expk1, store, 100)
    assert val == pytest.approx(want, rel=1e-12)
    assert val >= mo.diagonal_lower_bound(q, 2, expk1, store, 100) * (1 - 1e-12)
    assert 0 < bound < val


def test_fourth_spectral_mean_above_diagonal(stores, expk1):
    val, _ = mo.spectral_mean(5, 4, expk1, stores(5), 40)
    assert val >= mo.diagonal_lower_bound(5, 4, expk1, stores(5), 40)


def test_odd_spectral_mean_vanishes(stores, expk1):
    assert mo.spectral_mean(5, 3, expk1, stores(5), 50) == (0.0, 0.0)
    rows = mo.spectral_rows(7, 3, expk1, stores(7), 40)
    # no symbolic cancellation among three heights
    assert rows.zero.sum() == 0


def test_exact_kernel_s1_is_zero(stores, expk1):
    rows = mo.spectral_rows(5, 2, expk1, stores(5), 30)
    assert mo.vsn_spectral_value(rows, 1, None, None, 4) == (0.0, 0.0)


def test_exact_pairs_against_brute_force(stores, expk1):
    rows = mo.spectral_rows(5, 2, expk1, stores(5), 16)
    live = np.flatnonzero(rows.nonzero)
    keys = [rows.key(r) for r in live]
    brute = math.fsum(
        rows.w[live[i]] * rows.w[live[j]] for i in range(len(live)) for j in range(len(live)) if mo.delta_s([keys[i], keys[j]])
    )
    got, _ = mo.vsn_spectral_value(rows, 2, None, None, 4)
    assert brute > 0
    assert got == pytest.approx(brute / 4**4, rel=1e-12)


def test_smoothed_value_tends_to_exact(stores, expk1):
    rows = mo.spectral_rows(5, 2, expk1, stores(5), 16)
    exact, _ = mo.vsn_spectral_value(rows, 2, None, None, 4)
    big, skipped = mo.vsn_spectral_value(rows, 2, kernel("triangle"), 1e8, 4)
    assert abs(big - exact) <= skipped + 1e-6 * exact


def test_pair_sum_window_matches_full():
    rng = np.random.default_rng(3)
    a_w, a_s = rng.normal(size=300), rng.normal(size=300)
    b_w, b_s = rng.normal(size=200), rng.normal(size=200)
    tri = kernel("triangle")
    f = lambda x: tri.phi_hat(5 * x)
    full = float(a_w @ f(a_s[:, None] + b_s[None, :]) @ b_w)
    got, pairs = mo._pair_sum(a_w, a_s, b_w, b_s, f, 10**9, chunk=37)
    assert got == pytest.approx(full, rel=1e-12)
    assert pairs == 300 * 200
    cut = 2.0
    part, _ = mo._pair_sum(a_w, a_s, b_w, b_s, f, 10**9, cut=cut, chunk=37)
    skipped = np.sum(np.abs(a_w)) * np.sum(np.abs(b_w)) * tri.tail_sup(5 * cut)
    assert abs(part - full) <= skipped


def test_pair_budget(stores, expk1):
    rows = mo.spectral_rows(5, 2, expk1, stores(5), 30)
    with pytest.raises(mo.BudgetError):
        mo.vsn_spectral_value(rows, 2, kernel("triangle"), 50, 4, budget=10)


# ---------------------------------------------------------------------------
# time averages


def test_empirical_s1_centering(stores, table, expk1):
    tri = kernel("triangle")
    raw = mo.vsn_empirical(10, 5, 1, 2, expk1, tri, 0.0, table, stores(5), 100, step=0.01)
    cen = mo.vsn_empirical(10, 5, 1, 2, expk1, tri, raw.value, table, stores(5), 100, step=0.01)
    assert abs(cen.value) <= 10 * (raw.quad_err + cen.quad_err) + 1e-12


def test_empirical_s2_nonnegative(stores, table, expk1):
    rep = mo.vsn_empirical(10, 3, 2, 2, expk1, kernel("indicator"), 0.0, table, stores(3), 100, step=0.01)
    assert rep.value >= -rep.budget


def test_trajectory_modes_agree(stores, table, expk1):
    t = np.linspace(0.5, 6, 23)
    a, ea = mo.moment_trajectory(t, 7, 2, expk1, table, stores(7), 400, mode="auto")
    p, ep = mo.moment_trajectory(t, 7, 2, expk1, table, None, 0, mode="prime")
    assert np.all(np.abs(a - p) <= ea + ep)


# ---------------------------------------------------------------------------
# predictions and harnesses


def test_main_term_examples():
    eta = make_weight("expK:1")
    mt = mo.main_terms(3, 2, 2, eta)
    assert mt.alpha == pytest.approx(1.0)
    assert mt.V_n == pytest.approx(2 * math.log(3) ** 2 / 8)
    assert mt.moment == pytest.approx(mt.V_n)
    assert mo.main_terms(5, 3, 3, eta).moment == 0
    assert mo.main_terms(5, 3, 2, eta).mean is None
    m5 = mo.main_terms(5, 2, 1, eta)
    assert m5.mean == pytest.approx((math.log(5) + beta_q(eta.spectral(), 5)) / 4)
    assert m5.moment == 0


def test_moments_a1(stores, table, expk1):
    tri = kernel("triangle")
    rep = mo.moments_a1(30, 5, 1, expk1, tri, table, stores(5), 400, step=0.01)
    assert rep.value > 0
    assert math.isfinite(rep.extra["ratio"])
    c = 1.7
    base = mo.moments_a1(5, 5, 2, expk1, tri, table, stores(5), 400, step=0.01)
    scaled = mo.moments_a1(5, 5, 2, expk1.scaled(c), tri, table, stores(5), 400, step=0.01)
    assert scaled.value == pytest.approx(c**4 * base.value, rel=1e-10)


def test_omega_search_thresholds(small_table, expk1):
    xs = np.geomspace(10, 5e4, 15)
    assert len(mo.omega_search(7, expk1, xs, 1.0, small_table)) == len(xs)
    assert mo.omega_search(7, expk1, xs, -1e12, small_table) == []
    hits = mo.omega_search(7, expk1, xs, 1.0, small_table, mode="m2m", m=2)
    assert len(hits) == len(xs)


def test_raw_deviations_against_direct_sum(small_table):
    q, x = 7, 2000.0
    dev = mo.raw_deviations(q, [x, 50.0], small_table)
    units = character_group(q).units
    lam = small_table.dense()
    per = np.array([sum(lam[n] for n in range(2, int(x) + 1) if n % q == a) for a in units])
    assert np.allclose(dev[0], per - per.mean(), atol=1e-9)


def test_raw_hits_extremes(small_table):
    xs = np.array([100.0, 1000.0])
    assert mo.omega_search(5, None, xs, 0, small_table, mode="raw", c=0.0)
    assert mo.omega_search(5, None, xs, 0, small_table, mode="raw", c=1e9) == []


def test_histogram(small_table):
    h = mo.distribution_histogram(5e4, 101, 10, small_table)
    assert h.counts.sum() == 100
    ref = {V: g for V, _, g in h.tails}
    assert ref[0.0] == 0.5
    assert ref[1.96] == pytest.approx(0.025, abs=5e-4)
    assert all(0 <= e <= 1 for _, e, _ in h.tails)
