"""Frequency partitions: alpha-coverings, their smooth partitions of unity, and
dyadic Littlewood-Paley windows, all sampled on the discrete frequency grid.

Window ``k`` of an alpha-covering is a ball around ``center(k)`` with radius
proportional to ``scale(k) = <k>^b``, ``b = alpha/(1-alpha)``.  For
``alpha >= 0`` the center is ``<k>^b k``; for ``alpha < 0`` it is the
homeomorphic image ``|k|^b k`` (zero at ``k = 0``).  Each window profile is a
C-infinity bump ``exp(-1/(1-t^2))`` in ``t = |xi - center| / outer_radius``
and the family is normalised by its pointwise sum, which makes the partition
identity exact wherever the bumps cover.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .grid import Grid, GridFunction
from .io import atomic_write_bytes, atomic_write_json

# inner/outer radius factors relative to the nominal ball radius
INNER_FACTOR = 0.75
OUTER_FACTOR = 1.5
MIN_SAMPLES_ACROSS = 4


def bracket(x) -> float | np.ndarray:
    """Japanese bracket ``(1 + |x|^2)^(1/2)``.

    A scalar or 1-D sequence is treated as a single vector.  Arrays with more
    than one dimension are treated as stacks of vectors along the last axis.
    """
    a = np.asarray(x, dtype=float)
    if a.ndim <= 1:
        return float(np.sqrt(1.0 + np.sum(a * a)))
    return np.sqrt(1.0 + np.sum(a * a, axis=-1))


def delta_map(x, b: float) -> np.ndarray:
    """The radial power map ``|x|^b x`` (vectors along the last axis); 0 maps to 0."""
    a = np.asarray(x, dtype=float)
    r = np.linalg.norm(a, axis=-1, keepdims=True) if a.ndim else np.abs(a)
    with np.errstate(divide="ignore", invalid="ignore"):
        fac = np.where(r > 0, r ** b, 0.0)
    return fac * a


def dual_exponent(b: float) -> float:
    """Exponent ``b'`` with ``delta_map(., b')`` inverting ``delta_map(., b)``."""
    return -b / (1.0 + b)


def _bump(t: np.ndarray) -> np.ndarray:
    out = np.zeros_like(t, dtype=float)
    m = t < 1.0
    out[m] = np.exp(-1.0 / (1.0 - t[m] ** 2))
    return out


@dataclass(frozen=True)
class AlphaParams:
    alpha: float
    dim: int = 1

    def __post_init__(self):
        if not self.alpha < 1:
            raise ValueError(f"alpha must be < 1, got {self.alpha}")
        if self.dim < 1:
            raise ValueError("dim must be a positive integer")

    @property
    def beta_exp(self) -> float:
        return self.alpha / (1.0 - self.alpha)

    @property
    def radius_factor(self) -> float:
        # neighbouring centres sit ~(1/(1-alpha)) * scale apart, so the outer
        # balls only keep overlapping past alpha = 2/3 if the nominal radius grows
        return max(1.0, 0.5 / (1.0 - self.alpha))


@dataclass(frozen=True)
class WindowSpec:
    index: tuple
    center: np.ndarray
    scale: float
    inner_radius: float
    outer_radius: float


def _center(k: np.ndarray, params: AlphaParams) -> np.ndarray:
    b = params.beta_exp
    if params.alpha < 0:
        return delta_map(k, b)
    return bracket(k)[..., None] ** b * k if k.ndim > 1 else bracket(k) ** b * k


def window_geometry(k, params: AlphaParams) -> WindowSpec:
    ka = np.atleast_1d(np.asarray(k, dtype=float))
    if ka.size != params.dim:
        raise ValueError("lattice point dimension does not match params.dim")
    scale = bracket(ka) ** params.beta_exp
    nominal = params.radius_factor * scale
    return WindowSpec(
        index=tuple(int(v) for v in ka),
        center=_center(ka, params),
        scale=float(scale),
        inner_radius=INNER_FACTOR * nominal,
        outer_radius=OUTER_FACTOR * nominal,
    )


def _radial_extent(r: float, params: AlphaParams) -> tuple[float, float]:
    """(|center| - outer, |center| + outer) for a lattice point of norm r."""
    br = np.sqrt(1 + r * r)
    b = params.beta_exp
    c = r ** (1 + b) if params.alpha < 0 else br ** b * r
    out = OUTER_FACTOR * params.radius_factor * br ** b
    return c - out, c + out


def _max_index_radius(rmax: float, params: AlphaParams) -> int:
    """Smallest K such that every |k| > K has its ball entirely beyond rmax."""
    K = 1
    while _radial_extent(K, params)[0] <= rmax:
        K *= 2
        if K > 1 << 40:
            raise ValueError("index enumeration did not terminate")
    lo, hi = K // 2, K
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if _radial_extent(mid, params)[0] <= rmax:
            lo = mid
        else:
            hi = mid
    return hi + 1


def _center_1d(k: float, params: AlphaParams) -> float:
    b = params.beta_exp
    if params.alpha < 0:
        return float(np.sign(k) * abs(k) ** (1 + b))
    return float((1 + k * k) ** (b / 2) * k)


def _inverse_center_1d(y: float, params: AlphaParams) -> float:
    """Real k with centre(k) = y; the centre map is odd and strictly increasing."""
    s, y = np.sign(y), abs(y)
    hi = 1.0
    while _center_1d(hi, params) < y:
        hi *= 2
    lo = 0.0
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if _center_1d(mid, params) < y:
            lo = mid
        else:
            hi = mid
    return s * hi


def _candidate_indices_1d(lo: float, hi: float, params: AlphaParams) -> np.ndarray:
    """Integers whose window may meet [lo, hi]."""
    K = _max_index_radius(max(abs(lo), abs(hi)), params)
    reach = OUTER_FACTOR * params.radius_factor * max(1.0, (1 + K * K) ** (params.beta_exp / 2))
    k_lo = int(np.floor(_inverse_center_1d(lo - reach, params))) - 1
    k_hi = int(np.ceil(_inverse_center_1d(hi + reach, params))) + 1
    return np.arange(max(k_lo, -K), min(k_hi, K) + 1)


@dataclass
class BAPU:
    """Sampled partition of unity subordinate to an alpha-covering.

    Attributes
    ----------
    params : AlphaParams
    grid : Grid
        Frequency grid the windows are sampled on.
    indices : list of tuple
        Active lattice indices, in enumeration order.
    centers, scales, inner, outer : ndarray
        Window geometry, one row/entry per active index.
    profiles : ndarray
        Shape ``(n_windows, *grid.shape)``; frequency samples in FFT order.
    domain : ndarray of bool
        Grid frequencies where the partition identity is guaranteed.
    """

    params: AlphaParams
    grid: Grid
    indices: list
    centers: np.ndarray
    scales: np.ndarray
    inner: np.ndarray
    outer: np.ndarray
    profiles: np.ndarray
    domain: np.ndarray
    region: Optional[tuple] = None
    overlap: int = 0
    derivative_bound_constant: float = 0.0
    geometry_constant: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def alpha(self) -> float:
        return self.params.alpha

    def __len__(self) -> int:
        return len(self.indices)

    def position(self, k) -> int:
        key = tuple(int(v) for v in np.atleast_1d(k))
        return self.indices.index(key)

    def window(self, k) -> np.ndarray:
        return self.profiles[self.position(k)]

    def index_brackets(self) -> np.ndarray:
        return bracket(np.asarray(self.indices, dtype=float).reshape(len(self), -1))

    def partition_error(self) -> float:
        total = self.profiles.sum(axis=0)
        return float(np.max(np.abs(total[self.domain] - 1.0)))

    def project(self, f: GridFunction) -> np.ndarray:
        """All pieces ``F^-1 eta_k F f`` stacked along the first axis."""
        if not f.grid.compatible(self.grid):
            raise ValueError("grid mismatch between function and partition")
        axes = tuple(range(1, self.grid.d + 1))
        spec = np.fft.fftn(f.samples)
        return np.fft.ifftn(self.profiles * spec[None], axes=axes)


def _band_extent(grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    lo = np.array([grid.xi_axis(i).min() for i in range(grid.d)])
    hi = np.array([grid.xi_axis(i).max() for i in range(grid.d)])
    return lo, hi


def build_bapu(
    params: AlphaParams,
    grid: Grid,
    region: Optional[Sequence[float]] = None,
    check_resolution: bool = True,
) -> BAPU:
    """Construct the sampled alpha-partition of unity on ``grid``.

    Parameters
    ----------
    params : AlphaParams
    grid : Grid
        Frequency grid; its band ``carrier +- pi N / L`` is what gets covered.
    region : (r_min, r_max), optional
        Restrict to windows meeting the radial shell ``r_min <= |xi| <= r_max``.
        The partition identity is then guaranteed on that shell only.
    check_resolution : bool
        Reject grids with fewer than four samples across any inner diameter.
    """
    if params.dim != grid.d:
        raise ValueError("params.dim does not match grid dimension")
    d = grid.d
    lo, hi = _band_extent(grid)
    if d == 1:
        ks = _candidate_indices_1d(lo[0], hi[0], params)[:, None].astype(float)
    else:
        if np.any(np.asarray(grid.carrier) != 0):
            raise NotImplementedError("carrier grids are supported in one dimension only")
        rmax = float(np.linalg.norm(np.maximum(np.abs(lo), np.abs(hi))))
        K = _max_index_radius(rmax, params)
        ax = np.arange(-K, K + 1, dtype=float)
        ks = np.stack(np.meshgrid(*([ax] * d), indexing="ij"), axis=-1).reshape(-1, d)

    br = bracket(ks)
    scales = br ** params.beta_exp
    centers = _center(ks, params)
    nominal = params.radius_factor * scales
    inner = INNER_FACTOR * nominal
    outer = OUTER_FACTOR * nominal

    nearest = np.clip(centers, lo, hi)
    active = np.linalg.norm(centers - nearest, axis=1) < outer
    if region is not None:
        r_min, r_max = float(region[0]), float(region[1])
        cn = np.linalg.norm(centers, axis=1)
        active &= (cn - outer < r_max) & (cn + outer > r_min)
    if not np.any(active):
        raise ValueError("no window meets the frequency band")
    ks, scales, centers, inner, outer = (
        ks[active], scales[active], centers[active], inner[active], outer[active])

    if check_resolution:
        worst = np.min(2 * inner) / grid.dxi
        if worst < MIN_SAMPLES_ACROSS:
            raise ValueError(
                f"grid too coarse: {worst:.2f} samples across the smallest inner "
                f"diameter (need >= {MIN_SAMPLES_ACROSS})")

    mesh = grid.xi_mesh()
    rho = np.empty((len(ks),) + grid.shape)
    for i in range(len(ks)):
        dist2 = sum((mesh[a] - centers[i, a]) ** 2 for a in range(d))
        rho[i] = _bump(np.sqrt(dist2) / outer[i])
    total = rho.sum(axis=0)

    if region is None:
        domain = np.ones(grid.shape, dtype=bool)
    else:
        rr = grid.xi_norm()
        domain = (rr >= region[0]) & (rr <= region[1])
    if np.any(total[domain] <= 0):
        raise ValueError("windows do not cover the band; covering constants too small")
    with np.errstate(invalid="ignore", divide="ignore"):
        profiles = np.where(total > 0, rho / np.where(total > 0, total, 1.0), 0.0)

    bapu = BAPU(
        params=params,
        grid=grid,
        indices=[tuple(int(v) for v in k) for k in ks],
        centers=centers,
        scales=scales,
        inner=inner,
        outer=outer,
        profiles=profiles,
        domain=domain,
        region=None if region is None else (float(region[0]), float(region[1])),
    )
    bapu.overlap = overlap_count(bapu)
    bapu.derivative_bound_constant = _derivative_constant(bapu)
    bapu.geometry_constant = _geometry_constant(bapu)
    return bapu


def _derivative_constant(bapu: BAPU) -> float:
    """max_k scale_k * max |grad eta_k|, by first differences on the grid."""
    g = bapu.grid
    worst = 0.0
    for i in range(len(bapu)):
        prof = bapu.profiles[i]
        for ax in range(g.d):
            # frequencies are in FFT order; sort along the axis for differencing
            order = np.argsort(g.xi_axis(ax))
            p = np.take(prof, order, axis=ax)
            grad = np.abs(np.diff(p, axis=ax)).max() / g.dxi
            worst = max(worst, grad * bapu.scales[i])
    return float(worst)


def _geometry_constant(bapu: BAPU) -> float:
    """C_g with <xi>^(alpha d) / |supp eta_k| in [1/C_g, C_g] on the support."""
    g = bapu.grid
    d = g.d
    unit_ball = np.pi ** (d / 2) / _gamma(d / 2 + 1)
    br = np.sqrt(1 + g.xi_norm() ** 2)
    lo, hi = np.inf, 0.0
    for i in range(len(bapu)):
        m = (bapu.profiles[i] > 0) & bapu.domain
        if not np.any(m):
            continue
        vol = unit_ball * bapu.outer[i] ** d
        w = br[m] ** (bapu.alpha * d) / vol
        lo = min(lo, w.min())
        hi = max(hi, w.max())
    return float(max(hi, 1.0 / lo))


def _gamma(x: float) -> float:
    from math import gamma

    return gamma(x)


def overlap_count(bapu: BAPU) -> int:
    """Maximum number of strictly positive windows at any domain frequency."""
    count = (bapu.profiles > 0).sum(axis=0)
    return int(count[bapu.domain].max())


def apply_window(f: GridFunction, window: np.ndarray) -> GridFunction:
    """``F^-1 (window * F f)`` with ``window`` sampled in FFT order on f's grid."""
    w = np.asarray(window)
    if w.shape != f.grid.shape:
        raise ValueError(f"window shape {w.shape} does not match grid {f.grid.shape}")
    return f.with_samples(np.fft.ifftn(w * np.fft.fftn(f.samples)))


def export_bapu(bapu: BAPU, json_path, bin_path) -> None:
    meta = {
        "alpha": bapu.alpha,
        "dim": bapu.grid.d,
        "grid": {"N": bapu.grid.N, "L": bapu.grid.L, "carrier": list(bapu.grid.carrier)},
        "region": bapu.region,
        "indices": [list(k) for k in bapu.indices],
        "centers": bapu.centers.tolist(),
        "scales": bapu.scales.tolist(),
        "inner_radius": bapu.inner.tolist(),
        "outer_radius": bapu.outer.tolist(),
        "overlap_count": bapu.overlap,
        "derivative_bound_constant": bapu.derivative_bound_constant,
        "geometry_constant": bapu.geometry_constant,
        "partition_error": bapu.partition_error(),
        "layout": "float64 little-endian, row-major (window, *grid), FFT frequency order",
    }
    atomic_write_json(Path(json_path), meta)
    atomic_write_bytes(Path(bin_path), np.ascontiguousarray(bapu.profiles, dtype="<f8").tobytes())


# ---------------------------------------------------------------- dyadic


def _smooth_step(x: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", over="ignore"):
        return np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0)), 0.0)


def radial_cutoff(r: np.ndarray) -> np.ndarray:
    """Smooth radial profile equal to 1 for r <= 1 and 0 for r >= 2."""
    a = _smooth_step(2.0 - r)
    b = _smooth_step(r - 1.0)
    return a / (a + b)


@dataclass
class DyadicWindows:
    grid: Grid
    profiles: np.ndarray  # (J+1, *grid.shape)

    @property
    def J(self) -> int:
        return self.profiles.shape[0] - 1

    def project(self, f: GridFunction) -> np.ndarray:
        if not f.grid.compatible(self.grid):
            raise ValueError("grid mismatch between function and dyadic windows")
        axes = tuple(range(1, self.grid.d + 1))
        return np.fft.ifftn(self.profiles * np.fft.fftn(f.samples)[None], axes=axes)


def dyadic_windows(grid: Grid, J: Optional[int] = None) -> DyadicWindows:
    """Telescoping windows ``phi_0 = psi``, ``phi_j = psi(2^-j .) - psi(2^(1-j) .)``."""
    r = grid.xi_norm()
    rmax = float(r.max())
    need = max(0, int(np.ceil(np.log2(max(rmax, 1.0)))))
    if J is None:
        J = need
    if J < need:
        raise ValueError(f"J={J} leaves |xi| up to {rmax:.3g} uncovered (need J >= {need})")
    if J > 0 and 2.0 ** (J - 1) > rmax:
        raise ValueError(f"band too small for requested J={J}: top window vanishes on the grid")
    prof = np.empty((J + 1,) + grid.shape)
    prev = radial_cutoff(r)
    prof[0] = prev
    for j in range(1, J + 1):
        cur = radial_cutoff(r / 2.0**j)
        prof[j] = cur - prev
        prev = cur
    return DyadicWindows(grid, prof)
