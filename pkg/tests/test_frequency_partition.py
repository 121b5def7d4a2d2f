import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from alphamod.frequency_partition import (
    AlphaParams,
    apply_window,
    bracket,
    build_bapu,
    delta_map,
    dual_exponent,
    dyadic_windows,
    export_bapu,
    window_geometry,
)
from alphamod.grid import Grid, random_bandlimited


def test_bracket_values():
    assert bracket(0) == 1.0
    assert bracket([3.0, 4.0]) == math.sqrt(26.0)
    assert np.allclose(bracket(np.array([[0.0], [2.0]])), [1.0, math.sqrt(5.0)])


def test_alpha_params_validation():
    with pytest.raises(ValueError):
        AlphaParams(1.0)
    with pytest.raises(ValueError):
        AlphaParams(0.5, dim=0)
    assert AlphaParams(0.5).beta_exp == 1.0
    assert -1 < AlphaParams(-0.5).beta_exp < 0


@given(st.floats(-0.95, 0.95))
def test_beta_exponent_formula(alpha):
    p = AlphaParams(alpha)
    assert math.isclose(p.beta_exp, alpha / (1 - alpha), rel_tol=1e-15, abs_tol=1e-300)


def test_window_geometry_matches_formula():
    # alpha = 1/2: scale <k>, centre <k> k
    w = window_geometry([3], AlphaParams(0.5))
    assert math.isclose(w.scale, math.sqrt(10))
    assert math.isclose(float(w.center[0]), 3 * math.sqrt(10))
    assert w.inner_radius < w.outer_radius


def test_negative_alpha_centre_is_power_map():
    w = window_geometry([4], AlphaParams(-1.0))
    # b = -1/2: centre |k|^(-1/2) k = 2
    assert math.isclose(float(w.center[0]), 2.0)


@given(st.floats(-0.9, 2.0), st.lists(st.floats(-50, 50), min_size=1, max_size=3))
def test_delta_map_dual_inverts(b, x):
    x = np.asarray(x)
    y = delta_map(delta_map(x, b), dual_exponent(b))
    assert np.allclose(y, x, rtol=1e-9, atol=1e-9)


@pytest.mark.parametrize("alpha", [-1.0, -0.5, 0.0, 0.5, 0.75, 0.9])
def test_bapu_invariants(alpha):
    g = Grid(1, 512, 256.0)
    b = build_bapu(AlphaParams(alpha), g)
    assert b.partition_error() < 1e-12
    assert b.profiles.min() >= 0 and b.profiles.max() <= 1 + 1e-12
    xi = g.xi_axis()
    for i in range(len(b)):
        outside = np.abs(xi - b.centers[i, 0]) > b.outer[i]
        assert np.all(b.profiles[i][outside] == 0)
    assert b.overlap >= 1
    assert b.derivative_bound_constant > 0 and b.geometry_constant >= 1


@pytest.mark.parametrize("alpha", [-1.0, 0.0, 0.75])
def test_overlap_does_not_grow_with_band(alpha):
    counts = [build_bapu(AlphaParams(alpha), Grid(1, n, 1024.0)).overlap for n in (2048, 8192)]
    assert counts[0] == counts[1]


def test_bapu_two_dimensional():
    g = Grid(2, 64, 64.0)
    b = build_bapu(AlphaParams(0.25, 2), g)
    assert b.partition_error() < 1e-12
    f = random_bandlimited(g, np.random.default_rng(3))
    assert np.abs(b.project(f).sum(axis=0) - f.samples).max() < 1e-12


@settings(max_examples=20, deadline=None)
@given(st.sampled_from([-0.5, 0.0, 0.5, 0.75]), st.integers(0, 2**31 - 1))
def test_pieces_reconstruct(alpha, seed):
    g = Grid(1, 256, 128.0)
    b = build_bapu(AlphaParams(alpha), g)
    f = random_bandlimited(g, np.random.default_rng(seed), fraction=0.8)
    rec = b.project(f).sum(axis=0)
    assert np.abs(rec - f.samples).max() <= 1e-12 * np.abs(f.samples).max()


def test_bapu_on_carrier_grid_covers_band():
    g = Grid(1, 256, 256.0, (300.0,))
    b = build_bapu(AlphaParams(0.5), g)
    assert b.partition_error() < 1e-12


def test_region_restricted_partition():
    g = Grid(1, 1024, 256.0)
    b = build_bapu(AlphaParams(0.5), g, region=(4.0, 8.0))
    full = build_bapu(AlphaParams(0.5), g)
    assert len(b) < len(full)
    assert b.partition_error() < 1e-12
    assert np.all(np.abs(g.xi_axis()[b.domain]) >= 4.0)


def test_coarse_grid_rejected():
    with pytest.raises(ValueError, match="too coarse"):
        build_bapu(AlphaParams(-1.0), Grid(1, 1024, 16.0))


def test_dimension_mismatch_rejected():
    with pytest.raises(ValueError):
        build_bapu(AlphaParams(0.5, 2), Grid(1, 64, 64.0))


def test_dyadic_windows_partition_and_support():
    g = Grid(1, 512, 32.0)
    w = dyadic_windows(g)
    r = np.abs(g.xi_axis())
    assert np.abs(w.profiles.sum(axis=0) - 1).max() < 1e-12
    assert np.all(w.profiles[0][r > 2] == 0)
    for j in range(1, w.J + 1):
        off = (r < 2.0 ** (j - 1)) | (r > 2.0 ** (j + 1))
        assert np.all(np.abs(w.profiles[j][off]) < 1e-15)


def test_dyadic_windows_reject_short_ladder():
    with pytest.raises(ValueError, match="uncovered"):
        dyadic_windows(Grid(1, 512, 32.0), J=1)


def test_apply_window_identity():
    g = Grid(1, 64, 16.0)
    f = random_bandlimited(g, np.random.default_rng(2))
    out = apply_window(f, np.ones(g.shape))
    assert np.abs(out.samples - f.samples).max() < 1e-13


def test_export_layout(tmp_path):
    g = Grid(1, 128, 64.0)
    b = build_bapu(AlphaParams(0.5), g)
    export_bapu(b, tmp_path / "b.json", tmp_path / "b.bin")
    meta = json.loads((tmp_path / "b.json").read_text())
    assert meta["alpha"] == 0.5 and meta["overlap_count"] == b.overlap
    assert len(meta["indices"]) == len(b)
    data = np.frombuffer((tmp_path / "b.bin").read_bytes(), dtype="<f8").reshape(len(b), 128)
    assert np.array_equal(data, b.profiles)
