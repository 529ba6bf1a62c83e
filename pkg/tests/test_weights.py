import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from momlab.weights import (
    MembershipError,
    WeightSpecError,
    beta_q,
    kernel,
    make_weight,
)


def numeric_hat(eta, xi, lim=30.0):
    """Cosine transform of an even weight by adaptive quadrature."""
    return 2 * integrate.quad(lambda t: float(eta.eta(np.array([t]))[0]) * math.cos(2 * math.pi * xi * t), 0, lim, limit=400)[0]


def test_expk_hat_at_zero():
    assert make_weight("expK:1").eta_hat(0.0) == pytest.approx(2.0)


def test_parse_errors():
    with pytest.raises(MembershipError):
        make_weight("expK:0.4", delta=0.25)
    with pytest.raises(WeightSpecError):
        make_weight("expK:abc")
    with pytest.raises(WeightSpecError):
        make_weight("selfconv:nope")
    with pytest.raises(WeightSpecError):
        make_weight("triangle")


def test_classical_not_admissible():
    w = make_weight("classical")
    assert not w.admissible
    with pytest.raises(MembershipError):
        w.spectral()


@pytest.mark.parametrize("spec", ["expK:1", "expK:2", "selfconv:gauss", "selfconv:bump"])
def test_hat_against_quadrature(spec):
    w = make_weight(spec)
    for xi in (0.0, 0.1, 0.37, 1.0):
        assert float(np.real(np.atleast_1d(w.eta_hat(xi))[0])) == pytest.approx(numeric_hat(w, xi), abs=1e-8)


@pytest.mark.parametrize("K,want", [(1.0, 1.0), (2.0, 0.5)])
def test_alpha_by_convolution(K, want):
    w = make_weight(f"expK:{K}")
    conv = integrate.quad(lambda u: math.exp(-2 * K * abs(u)), -np.inf, np.inf)[0]
    assert conv == pytest.approx(want)
    assert w.spectral().alpha() == pytest.approx(want, abs=1e-12)


def test_alpha_bump_by_convolution():
    w = make_weight("selfconv:bump")
    conv = integrate.quad(lambda u: float(w.eta(np.array([u]))[0]) ** 2, -2, 2, limit=200)[0]
    assert w.spectral().alpha() == pytest.approx(conv, rel=1e-7)


def test_alpha_scales_linearly():
    w = make_weight("expK:1")
    assert w.scaled(3.0).spectral().alpha() == pytest.approx(3.0**2 * w.spectral().alpha())


def test_hhat_closed_vs_quadrature():
    w = make_weight("expK:1")
    for x in np.linspace(0, 20, 9):
        num = integrate.quad(lambda u: math.exp(-abs(u)) * math.exp(-abs(x - u)), -np.inf, np.inf, epsabs=1e-13)[0]
        assert float(np.atleast_1d(w.hhat(x))[0]) == pytest.approx(num, abs=1e-9)


def test_beta_double_depth():
    h = make_weight("expK:1").spectral()
    b1 = beta_q(h, 3)
    h2 = make_weight("expK:1").spectral()
    b2 = beta_q(h2, 3, tol=1e-12, limit=400)
    assert math.isfinite(b1)
    assert b1 == pytest.approx(b2, abs=1e-8)


def test_beta_depends_on_radical_only():
    h = make_weight("expK:1").spectral()
    assert beta_q(h, 6) == pytest.approx(beta_q(h, 36), abs=1e-14)
    assert beta_q(h, 5) == pytest.approx(beta_q(h, 125), abs=1e-14)


def test_beta_linear_in_h():
    w = make_weight("expK:1")
    # doubling h = eta^2 means scaling eta by sqrt 2
    assert beta_q(w.scaled(math.sqrt(2)).spectral(), 7) == pytest.approx(2 * beta_q(w.spectral(), 7), rel=1e-9)


def test_beta_first_term_monotone_in_prime_divisors():
    a0 = 1.0
    first = [-a0 * sum(math.log(p) / (p - 1) for p in ps) for ps in ([3], [3, 5], [3, 5, 7], [2, 3, 5, 7])]
    assert all(x >= y for x, y in zip(first, first[1:]))


def test_kernel_examples():
    tri = kernel("triangle")
    ind = kernel("indicator")
    assert tri.phi_hat(0.0) == pytest.approx(1.0)
    assert tri.phi_hat(1.0) == pytest.approx(0.0, abs=1e-15)
    assert ind.phi_hat(0.25) == pytest.approx(4 / math.pi)
    with pytest.raises(WeightSpecError):
        kernel("gauss")


@pytest.mark.parametrize("name", ["triangle", "indicator"])
def test_kernel_transform_and_mass(name):
    k = kernel(name)
    assert integrate.quad(lambda x: float(k.phi(x)), 0, 1)[0] == pytest.approx(k.int_pos)
    for xi in (0.0, 0.3, 1.7):
        num = 2 * integrate.quad(lambda x: float(k.phi(x)) * math.cos(2 * math.pi * xi * x), 0, 1)[0]
        assert float(k.phi_hat(xi)) == pytest.approx(num, abs=1e-10)


def test_triangle_transform_nonnegative_on_grid():
    xi = np.linspace(-50, 50, 10_001)
    assert np.all(kernel("triangle").phi_hat(xi) >= 0)


@pytest.mark.parametrize("name", ["triangle", "indicator"])
def test_tail_sup_dominates(name):
    k = kernel(name)
    for x in (0.1, 0.5, 2.0, 10.0):
        ys = np.linspace(x, x + 50, 20_001)
        assert np.max(np.abs(k.phi_hat(ys))) <= k.tail_sup(x) + 1e-15


@pytest.mark.parametrize("spec", ["expK:1", "expK:3", "selfconv:gauss", "selfconv:bump"])
def test_hat_nonnegative_on_grid(spec):
    w = make_weight(spec)
    assert w.certificate(grid=2000)["hat_nonnegative"]


@settings(max_examples=25, deadline=None)
@given(st.floats(0.76, 8.0), st.floats(-3, 3))
def test_expk_even_and_decaying(K, t):
    w = make_weight(f"expK:{K}")
    assert w.eta(t) == pytest.approx(w.eta(-t))
    assert abs(w.eta(t)) <= math.exp(-(0.5 + w.delta) * abs(t)) + 1e-15
