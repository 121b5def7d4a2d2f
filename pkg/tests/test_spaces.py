import math
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, strategies as st

from alphamod.frequency_partition import AlphaParams, build_bapu, dyadic_windows
from alphamod.grid import Grid, random_bandlimited, sample
from alphamod.spaces import (
    ExponentTuple,
    alpha_mod_norm,
    conj,
    embedding_threshold,
    inv,
    lp_equivalence_check,
    lp_norm,
    plancherel_norm,
    sigma_tau,
    sobolev_norm,
    window_norms,
)

exponents = st.one_of(st.fractions(min_value=1, max_value=50), st.just(math.inf))


def gaussian(N=512, L=40.0):
    g = Grid(1, N, L)
    return sample(g, lambda x: np.exp(-x * x / 2).astype(complex))


def test_inv_and_conj_are_exact():
    assert inv(4) == F(1, 4) and inv(math.inf) == 0
    assert conj(F(3, 2)) == 3 and conj(1) == math.inf and conj(math.inf) == 1


@given(exponents)
def test_conjugate_exponents_sum_to_one(p):
    assert inv(p) + inv(conj(p)) == 1


def test_sigma_tau_golden():
    # 1/q - 1/p = 1/3, 1/q + 1/p - 1 = 0
    st_ = sigma_tau(2, 3, F(3, 2))
    assert (st_.sigma, st_.tau) == (0, F(2, 3))
    st_ = sigma_tau(1, 6, math.inf)
    assert (st_.sigma, st_.tau) == (F(-5, 6), 0)


@given(st.integers(1, 3), exponents, exponents)
def test_sigma_below_tau(d, p, q):
    st_ = sigma_tau(d, p, q)
    assert st_.sigma <= 0 <= st_.tau


def test_gaussian_norms_two_routes():
    f = gaussian()
    # ||exp(-x^2/2)||_2 = pi^(1/4); ||.||_4 = (pi/2)^(1/8); ||.||_1 = sqrt(2 pi)
    assert math.isclose(lp_norm(f, 2), math.pi**0.25, rel_tol=1e-12)
    assert math.isclose(plancherel_norm(f), math.pi**0.25, rel_tol=1e-12)
    assert math.isclose(lp_norm(f, 4), (math.pi / 2) ** 0.125, rel_tol=1e-12)
    assert math.isclose(lp_norm(f, 1), math.sqrt(2 * math.pi), rel_tol=1e-12)
    assert math.isclose(lp_norm(f, math.inf), 1.0, rel_tol=1e-15)


def test_sobolev_norm_of_gaussian():
    # ||(1-Delta)^(1/2) f||_2^2 = ||f||_2^2 + ||f'||_2^2 = sqrt(pi) (1 + 1/2)
    f = gaussian()
    assert math.isclose(sobolev_norm(f, 1.0, 2), math.sqrt(1.5 * math.sqrt(math.pi)), rel_tol=1e-10)


def test_alpha_norm_at_p_q_2_is_plancherel_weighted():
    # sum_k ||box_k f||_2^2 = (2 pi)^-1 int sum_k eta_k^2 |f^|^2
    f = random_bandlimited(Grid(1, 512, 128.0), np.random.default_rng(5))
    b = build_bapu(AlphaParams(0.5), f.grid)
    t = ExponentTuple(1, 2.0, 2, 2, 0.0, 0.5)
    spec = f.spectrum()
    want = math.sqrt(np.sum((b.profiles**2).sum(axis=0) * np.abs(spec) ** 2) * f.grid.dxi / (2 * math.pi))
    assert math.isclose(alpha_mod_norm(f, t, b), want, rel_tol=1e-10)
    assert alpha_mod_norm(f, t, b) <= lp_norm(f, 2) * (1 + 1e-12)


def test_alpha_norm_ratio_golden():
    f = gaussian(N=1024, L=256.0)
    b = build_bapu(AlphaParams(0.5), f.grid)
    t = ExponentTuple(1, 2.0, 2, 2, 0.0, 0.5)
    assert abs(alpha_mod_norm(f, t, b) / lp_norm(f, 2) - 0.7126) < 5e-4


def test_weights_scale_with_s():
    f = random_bandlimited(Grid(1, 256, 128.0), np.random.default_rng(6))
    b = build_bapu(AlphaParams(0.0), f.grid)
    n = window_norms(f, 2, b)
    t = ExponentTuple(1, 2.0, 2, math.inf, 1.0, 0.0)
    assert math.isclose(alpha_mod_norm(f, t, b), float((b.index_brackets() * n).max()))


def test_alpha_mismatch_rejected():
    f = gaussian(N=128, L=20.0)
    b = build_bapu(AlphaParams(0.5), f.grid)
    with pytest.raises(ValueError, match="alpha"):
        alpha_mod_norm(f, ExponentTuple(1, 2.0, 2, 2, 0.0, 0.25), b)


def test_band_violation_detected():
    g = Grid(1, 1024, 256.0)
    f = random_bandlimited(g, np.random.default_rng(7))
    b = build_bapu(AlphaParams(0.5), g, region=(4.0, 8.0))
    with pytest.raises(ValueError, match="band violation"):
        window_norms(f, 2, b)


def test_exponent_tuple_validation():
    with pytest.raises(ValueError):
        ExponentTuple(1, 2.0, 0.5, 2, 0.0, 0.0)
    with pytest.raises(ValueError):
        ExponentTuple(1, 2.0, 2, 2, 0.0, 1.0)


def test_littlewood_paley_equivalence_is_bounded():
    g = Grid(1, 512, 128.0)
    b = build_bapu(AlphaParams(0.5), g)
    dy = dyadic_windows(g)
    rng = np.random.default_rng(8)
    ratios = []
    for _ in range(5):
        f = random_bandlimited(g, rng, fraction=0.6)
        left, right = lp_equivalence_check(f, ExponentTuple(1, 2.0, 2, 2, 1.0, 0.5), b, dy)
        ratios.append(left / right)
    assert 0.2 < min(ratios) and max(ratios) < 5


def test_embedding_goldens():
    v = embedding_threshold("into-Lp", 1, 2, 2, 0, s=0)
    assert v.holds and v.boundary == "closed"
    v = embedding_threshold("into-Lp", 1, 2, math.inf, 0, s=0)
    assert (v.threshold, v.boundary, v.holds) == (F(1, 2), "open", False)
    assert embedding_threshold("into-Lp", 1, 2, math.inf, F(1, 2)).threshold == F(1, 4)
    v = embedding_threshold("Mpqs-into-alpha", 1, math.inf, 1, -1)
    assert (v.threshold, v.boundary) == (1, "closed")
    # s > d(1 - alpha)(1/q_target - 1/q) when q > q_target, else s >= 0
    v = embedding_threshold("mod-scale", 1, 2, 2, F(1, 2), s=F(1, 4), q_target=1)
    assert (v.threshold, v.boundary, v.holds) == (F(1, 4), "open", False)
    v = embedding_threshold("mod-scale", 1, 2, 2, F(1, 2), s=0, q_target=4)
    assert (v.threshold, v.boundary, v.holds) == (0, "closed", True)
    v = embedding_threshold("mod-scale", 1, 2, 4, F(1, 2), q_target=2)
    assert v.threshold == F(1, 8) and v.boundary == "open"
    # sigma(1, inf) = -1, so alpha * sigma = 1
    v = embedding_threshold("alpha-into-Mpq", 1, 1, math.inf, -1)
    assert v.threshold == 1


def test_embedding_errors():
    with pytest.raises(ValueError):
        embedding_threshold("alpha-into-Mpq", 1, 2, 2, 0.5)
    with pytest.raises(ValueError):
        embedding_threshold("nope", 1, 2, 2, 0.5)
    with pytest.raises(ValueError):
        embedding_threshold("mod-scale", 1, 2, 2, 0.5)


@given(st.integers(1, 3), exponents, exponents, st.fractions(0, F(9, 10)))
def test_into_lp_threshold_nonnegative(d, p, q, alpha):
    assert embedding_threshold("into-Lp", d, p, q, alpha).threshold >= 0
