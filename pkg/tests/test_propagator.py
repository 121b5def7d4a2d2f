import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from alphamod.acceptance import gaussian_solution
from alphamod.grid import Grid, GridFunction, random_bandlimited, sample
from alphamod.propagator import (
    TimeQuadrature,
    cap_decomposition,
    decoupling_probe,
    dispersion,
    multiplier_bound_probe,
    propagate,
    spacetime_norm,
)
from alphamod.spaces import lp_norm

betas = st.sampled_from([0.5, 1.5, 2.0, 3.0, 4.0])


@settings(max_examples=25, deadline=None)
@given(betas, st.floats(-3, 3), st.integers(0, 2**31 - 1))
def test_propagation_is_unitary(beta, t, seed):
    f = random_bandlimited(Grid(1, 128, 16.0), np.random.default_rng(seed), fraction=0.9)
    assert math.isclose(lp_norm(propagate(f, beta, t), 2), lp_norm(f, 2), rel_tol=1e-12)


@settings(max_examples=25, deadline=None)
@given(betas, st.floats(-2, 2), st.floats(-2, 2), st.integers(0, 2**31 - 1))
def test_group_law(beta, t1, t2, seed):
    g = Grid(1, 128, 16.0)
    f = random_bandlimited(g, np.random.default_rng(seed), fraction=0.9)
    a = propagate(propagate(f, beta, t1), beta, t2).samples
    b = propagate(f, beta, t1 + t2).samples
    # phases t |xi|^beta are only known to their own rounding error
    phase = (abs(t1) + abs(t2)) * (0.9 * g.band) ** beta
    assert np.abs(a - b).max() <= (1e-12 + 1e-15 * phase) * np.abs(b).max()


def test_schroedinger_gaussian_closed_form():
    g = Grid(1, 1024, 40.0)
    f = sample(g, lambda x: np.exp(-x * x).astype(complex))
    for t in (0.2, 0.7):
        err = np.abs(propagate(f, 2.0, t).samples - gaussian_solution(g.x_axis(), t)).max()
        assert err < 1e-9


def test_two_dimensional_radial_symbol():
    g = Grid(2, 64, 16.0)
    f = random_bandlimited(g, np.random.default_rng(1))
    v = propagate(f, 2.0, 0.3)
    assert math.isclose(lp_norm(v, 2), lp_norm(f, 2), rel_tol=1e-12)


def test_comoving_frame_keeps_lp_norms():
    g = Grid(1, 256, 64.0, (40.0,))
    f = sample(g, lambda x: np.exp(-x * x / 4).astype(complex))
    for p in (1, 4, math.inf):
        a = spacetime_norm(f, 2.0, p, TimeQuadrature(0, 0.5, 16), refine=False, frame="comoving")
        # lab frame on a grid wide enough for the drift 2 * 40 * 0.5
        wide = Grid(1, 4096, 512.0, (40.0,))
        h = sample(wide, lambda x: np.exp(-x * x / 4).astype(complex))
        b = spacetime_norm(h, 2.0, p, TimeQuadrature(0, 0.5, 16), refine=False)
        assert math.isclose(a.value, b.value, rel_tol=1e-9)


def test_comoving_symbol_vanishes_to_first_order_at_carrier():
    g = Grid(1, 64, 64.0, (10.0,))
    h = dispersion(g, 4.0, "comoving")
    xi = g.xi_axis()
    i = int(np.argmin(np.abs(xi - 10.0)))
    assert abs(h[i]) < 1e-9
    with pytest.raises(ValueError):
        dispersion(g, 4.0, "moving")


def test_spacetime_l2_equals_isometry_value():
    # by unitarity ||S(t) f||_{L^2([0,T] x box)} = T^(1/2) ||f||_2 for every node count
    f = random_bandlimited(Grid(1, 128, 32.0), np.random.default_rng(2))
    res = spacetime_norm(f, 0.5, 2, TimeQuadrature(0, 2.0, 8))
    assert math.isclose(res.value, math.sqrt(2.0) * lp_norm(f, 2), rel_tol=1e-12)
    assert res.rel_change < 1e-12 and not res.flagged


def test_refinement_flags_coarse_quadrature():
    # a narrow packet disperses on a time scale far below the node spacing
    g = Grid(1, 256, 16.0)
    f = sample(g, lambda x: np.exp(-16 * x * x).astype(complex))
    res = spacetime_norm(f, 2.0, 6, TimeQuadrature(0, 1.0, 8))
    assert res.flagged and res.rel_change > 1e-3


def test_quadrature_validation():
    with pytest.raises(ValueError):
        TimeQuadrature(0, 1, 4)
    with pytest.raises(ValueError):
        TimeQuadrature(1, 1, 16)
    q = TimeQuadrature(0, 1, 8)
    assert np.allclose(q.nodes, (np.arange(8) + 0.5) / 8) and q.refined().n_t == 16


def test_spacetime_rejects_small_p():
    f = GridFunction(Grid(1, 16, 1.0), np.ones(16))
    with pytest.raises(ValueError):
        spacetime_norm(f, 2.0, 0.5)


def test_multiplier_probe_p2_is_exactly_one():
    for window in ("unit", "alpha"):
        r = multiplier_bound_probe(8, 4.0, 2, 1.0, window=window)
        assert abs(r.ratio - 1) < 1e-12


def test_focused_peak_matches_quadrature():
    # at the focusing time the packet is F^-1 chi, whose peak is (2 pi)^-1 int chi
    from scipy.integrate import quad

    r = multiplier_bound_probe(8, 4.0, math.inf, 1.0)
    integral = 0.5 * quad(lambda s: math.exp(1 - 1 / (1 - s * s)), -1, 1)[0]
    # the probe works with unnormalised inverse FFTs: peak = sum(chi) / N
    assert math.isclose(r.lhs * r.N * 2 * math.pi / r.L, integral, rel_tol=1e-10)


def test_multiplier_growth_is_linear_in_k():
    ks = [4, 8, 16, 32]
    ratios = [multiplier_bound_probe(k, 4.0, math.inf, 1.0).ratio for k in ks]
    slope = np.polyfit(np.log(ks), np.log(ratios), 1)[0]
    assert abs(slope - 1.0) < 0.05


def test_alpha_window_growth_stays_bounded():
    r = [multiplier_bound_probe(k, 4.0, math.inf, 1.0, window="alpha").ratio for k in (4, 16)]
    assert max(r) < 1.5


def test_plain_packet_disperses():
    r = multiplier_bound_probe(8, 4.0, math.inf, 1.0, data="packet")
    assert r.ratio < 1


def test_probe_argument_errors():
    with pytest.raises(ValueError):
        multiplier_bound_probe(4, 4.0, 2, 1.0, window="square")
    with pytest.raises(ValueError):
        multiplier_bound_probe(4, 4.0, 2, 1.0, data="noise")


def test_cap_decomposition_tiles_unit_cube():
    g = Grid(1, 1024, 512.0)
    masks = cap_decomposition(g, 16.0, 2.0)
    assert len(masks) == 16
    total = np.sum(masks, axis=0)
    assert total.max() == 1
    assert np.array_equal(total.astype(bool), np.abs(g.xi_axis()) <= 1)
    assert len(cap_decomposition(g, 1.0, 2.0)) == 1


def test_cap_decomposition_rejects_underresolved_caps():
    with pytest.raises(ValueError, match="samples per cap"):
        cap_decomposition(Grid(1, 64, 16.0), 64.0, 2.0)


def _annulus_function(g, seed):
    from alphamod.acceptance import annulus_random

    return annulus_random(g, np.random.default_rng(seed))


def test_decoupling_single_cap_is_identity():
    v = _annulus_function(Grid(1, 256, 256.0), 3)
    r = decoupling_probe(v, 2.0, 6, 1.0, "l2", n_t=16)
    assert r.n_caps == 1 and math.isclose(r.ratio, 1.0, rel_tol=1e-12)


def test_decoupling_p2_is_orthogonal():
    # at p = 2 the cap pieces are orthogonal, so the l2 sum is exact
    v = _annulus_function(Grid(1, 512, 512.0), 4)
    r = decoupling_probe(v, 2.0, 2, 4.0, "l2", n_t=16)
    assert math.isclose(r.ratio, 1.0, rel_tol=1e-10)


def test_decoupling_rejects_data_off_the_annulus():
    f = random_bandlimited(Grid(1, 256, 256.0), np.random.default_rng(5))
    with pytest.raises(ValueError, match="annulus"):
        decoupling_probe(f, 2.0, 6, 4.0)
    v = _annulus_function(Grid(1, 256, 256.0), 3)
    with pytest.raises(ValueError):
        decoupling_probe(v, 2.0, 6, 4.0, flavor="l3")
