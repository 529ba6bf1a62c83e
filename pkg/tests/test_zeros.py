import math
import warnings

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from momlab.arith import character_group, sieve_lambda
from momlab.weights import kernel, make_weight
from momlab.zeros import (
    CompletenessError,
    InsufficientZeros,
    ZeroFormatError,
    ZeroStore,
    b_chi,
    b_decomposition,
    cached_store,
    compute_zeros,
    count_check,
    format_rows,
    hardy_z,
    hurwitz_zeta,
    l_value,
    load_zeros,
    pair_correlation,
)

mp.mp.dps = 30


def mp_l(s, chi):
    """L(s, chi*) from mpmath's Hurwitz zeta, independent of the engine."""
    prim = chi.primitive() if not chi.is_primitive else chi
    k = prim.modulus
    tot = mp.mpf(0)
    for a in range(1, k + 1):
        v = prim(a)
        if v != 0:
            tot += mp.mpc(v.real, v.imag) * mp.zeta(s, mp.mpf(a) / k)
    return tot * mp.power(k, -s)


@pytest.mark.parametrize("s", [0.5 + 3j, 0.5 + 37.1j, 0.5 + 210.7j, 0.5 + 449.5j, 2.0 + 1j])
@pytest.mark.parametrize("a", [0.1, 0.5, 1.0])
def test_hurwitz_against_mpmath(s, a):
    got = complex(hurwitz_zeta(np.array([s]), a)[0])
    want = complex(mp.zeta(mp.mpc(s.real, s.imag), a))
    assert abs(got - want) <= 5e-13 * max(1.0, abs(want))


@pytest.mark.parametrize("q,c", [(3, 2), (5, 2), (7, 3), (12, 5), (8, 3)])
def test_l_value_against_mpmath(q, c):
    chi = character_group(q)[c]
    for t in (1.0, 14.2, 101.3):
        s = 0.5 + 1j * t
        got = complex(l_value(s, chi)[0])
        want = complex(mp_l(mp.mpc(0.5, t), chi))
        assert abs(got - want) < 1e-11 * max(1, abs(want))


def test_first_zero_q3_by_findroot():
    chi = character_group(3)[2]
    zs = compute_zeros(3, 2, 10)
    assert len(zs) == 1 and 8.0 < zs[0] < 8.1
    root = mp.findroot(lambda t: mp_l(mp.mpf(0.5) + 1j * t, chi), mp.mpc(8.04, 0))
    assert abs(root.imag) < 1e-15
    assert abs(zs[0] - float(root.real)) < 1e-7


def test_first_zero_q4():
    zs = compute_zeros(4, 3, 7)
    assert len(zs) == 1 and abs(zs[0] - 6.0209489) < 1e-6


def test_no_zeros_below_half():
    for q, c in [(3, 2), (5, 2), (7, 3), (11, 2)]:
        assert len(compute_zeros(q, c, 0.5)) == 0


def test_zeros_are_sign_changes_of_hardy():
    chi = character_group(7)[3]
    zs = compute_zeros(7, 3, 60)
    for z in zs:
        a, b = hardy_z(np.array([z - 1e-6, z + 1e-6]), chi)
        assert a * b < 0
    # L vanishes there (mpmath oracle)
    assert abs(complex(mp_l(mp.mpc(0.5, zs[0]), chi))) < 1e-7


@pytest.mark.parametrize("q", [3, 4, 5, 7, 12])
def test_count_check_passes(q, stores):
    store = stores(q)
    g = character_group(q)
    for c in g.nonprincipal():
        cc = g.conj(c).conrey
        n = len(store.heights(q, c.conrey)) + len(store.heights(q, cc))
        if cc == c.conrey:
            n = 2 * len(store.heights(q, c.conrey))
        ok, err = count_check(n, 400.0, c.conductor)
        assert ok, (q, c.conrey, err)
        assert store.t_cert(q, c.conrey) == pytest.approx(400.0)


def test_conjugate_lists_differ_for_complex_characters(stores):
    store = stores(5)
    assert not np.allclose(store.heights(5, 2)[:5], store.heights(5, 3)[:5])
    gam, own, idx = store.signed(5, 2, 50)
    assert set(own[gam > 0]) == {2} and set(own[gam < 0]) == {3}
    assert np.all(np.abs(gam) <= 50)


def test_missing_zeros_raise(stores):
    store = stores(5)
    with pytest.raises(InsufficientZeros):
        store.signed(5, 2, 1000)


def _write(tmp_path, text):
    p = tmp_path / "z.tsv"
    p.write_text(text)
    return p


def test_load_single_zero(tmp_path):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        store = load_zeros(_write(tmp_path, "q\tconrey\tgamma\n3\t2\t8.039737155681\n"))
    assert len(store.heights(3, 2)) == 1


def test_load_empty_file(tmp_path):
    assert not load_zeros(_write(tmp_path, "")).lists


@pytest.mark.parametrize(
    "body,line",
    [
        ("3\t2\t10.243770304166\n3\t2\t8.039737155681\n", 3),
        ("3\t2\t8.0397\n", 2),
        ("3\t2\t-8.039737155681\n", 2),
        ("3\t2\n", 2),
        ("3\t2\t8.039737155681\n3\t2\t8.039737155681\n", 3),
    ],
)
def test_load_format_errors(tmp_path, body, line):
    with pytest.raises(ZeroFormatError, match=f":{line}:"):
        load_zeros(_write(tmp_path, "q\tconrey\tgamma\n" + body))


def test_bad_header(tmp_path):
    with pytest.raises(ZeroFormatError, match=":1:"):
        load_zeros(_write(tmp_path, "q,conrey,gamma\n"))


def test_ingest_round_trip_certifies(tmp_path, stores):
    store = stores(3)
    text = format_rows((3, 2, g) for g in store.heights(3, 2)[store.heights(3, 2) <= 100])
    got = load_zeros(_write(tmp_path, text))
    assert np.allclose(got.heights(3, 2), store.heights(3, 2)[store.heights(3, 2) <= 100], atol=1e-12)
    assert got.t_cert(3, 2) > 95


def test_truncated_ingest_is_certified_lower(tmp_path, stores):
    hs = stores(3).heights(3, 2)
    # drop a block of zeros in the middle: certification stops before the gap
    kept = np.concatenate([hs[hs < 50], hs[(hs > 80) & (hs <= 100)]])
    with pytest.warns(UserWarning):
        got = load_zeros(_write(tmp_path, format_rows((3, 2, g) for g in kept)))
    assert got.t_cert(3, 2) < 80


def test_cache_reuses_files(tmp_path):
    a = cached_store(5, 30, tmp_path)
    b = cached_store(5, 30, tmp_path)
    assert b.lists[(5, 2)].provenance == "cached"
    # files keep 12 decimals
    assert np.allclose(a.heights(5, 2), b.heights(5, 2), rtol=0, atol=1e-12)
    assert a.lists[(5, 2)].sha256 == b.lists[(5, 2)].sha256


def test_cache_invalidated_by_content_change(tmp_path):
    cached_store(3, 20, tmp_path)
    f = tmp_path / "zeros" / "q=3" / "chi=2.tsv"
    f.write_text(f.read_text() + "3\t2\t19.9999999999990\n")
    again = cached_store(3, 20, tmp_path)
    assert again.lists[(3, 2)].provenance == "computed"


def test_b_chi_zero_weight(stores):
    h = make_weight("expK:1").scaled(0.0).spectral()
    assert b_chi(stores(3), 3, 2, h, 100) == (0.0, 0.0)


def test_b_chi_band_and_doubling(stores):
    h = make_weight("expK:1").spectral()
    v100, t100 = b_chi(stores(3), 3, 2, h, 100)
    v200, t200 = b_chi(stores(3), 3, 2, h, 200)
    assert 0 <= v200 - v100 <= t100
    assert t200 < t100


def test_b_chi_additive(stores):
    w1 = make_weight("expK:1")
    w2 = make_weight("expK:2")
    store = stores(5)
    gam, _, _ = store.signed(5, 2, 100)
    h1 = w1.spectral().h(gam / (2 * math.pi))
    h2 = w2.spectral().h(gam / (2 * math.pi))
    assert math.fsum(h1 + h2) == pytest.approx(b_chi(store, 5, 2, w1.spectral(), 100)[0] + b_chi(store, 5, 2, w2.spectral(), 100)[0], rel=1e-14)


def test_b1_odd_branch():
    h = make_weight("expK:1").spectral()
    d = b_decomposition(3, 2, h, sieve_lambda(10**4))
    assert d.b1 == pytest.approx(math.log(3 / (8 * math.pi)) - np.euler_gamma + math.pi / 2)


@pytest.mark.parametrize("q", [3, 4, 5, 7])
def test_b_decomposition_matches_zero_sum(q, stores, table):
    h = make_weight("expK:1").spectral()
    for c in character_group(q).nonprincipal():
        d = b_decomposition(q, c.conrey, h, table)
        v, t = b_chi(stores(q), q, c.conrey, h, 400)
        assert abs(d.total - v) <= d.bound + t


def test_pair_correlation_examples(stores):
    h = make_weight("expK:1").spectral()
    k = kernel("triangle")
    store = stores(5)
    assert pair_correlation(store, 5, 1, 0.0, 2.0, make_weight("expK:1").scaled(0).spectral(), k, 100) == (0.0, 0.0)
    v1, b1 = pair_correlation(store, 5, 1, 0.0, 2.0, h, k, 100)
    v2, b2 = pair_correlation(store, 5, 1, 0.0, 2.0, h, k, 200)
    assert v1 > 0 and abs(v2 - v1) <= b1


@settings(max_examples=15, deadline=None)
@given(st.floats(1.0, 400.0))
def test_count_main_monotone(T):
    from momlab.zeros import count_main

    assert count_main(T + 1, 5) > count_main(T, 5)


def test_store_add_rejects_unsorted():
    s = ZeroStore()
    with pytest.raises(ZeroFormatError):
        s.add(3, 2, [10.0, 8.0], "ingested", 10)


def test_completeness_error_class():
    assert issubclass(CompletenessError, RuntimeError)
