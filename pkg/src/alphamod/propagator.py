"""The fractional Schroedinger group ``S_beta(t) = F^-1 exp(i t |xi|^beta) F`` on
grid functions, its space-time ``L^p`` norms, and two probes: the single-window
multiplier growth and the cap-decoupling ratio on the unit annulus.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _fft
from .frequency_partition import AlphaParams, bracket, window_geometry
from .grid import Grid, GridFunction
from .spaces import _lp_reduce

CHUNK_ELEMENTS = 1 << 22
REFINE_FLAG = 1e-3


def dispersion(grid: Grid, beta: float, frame: str = "lab") -> np.ndarray:
    """Symbol ``|xi|^beta`` on the grid.

    With ``frame="comoving"`` the constant and linear Taylor terms at the
    carrier are removed, i.e. ``h(c+eta) - h(c) - grad h(c).eta``.  This only
    multiplies the solution by a unimodular constant and translates it, so
    every ``L^p`` norm is unchanged.
    """
    mesh = grid.xi_mesh()
    r = np.sqrt(sum(m * m for m in mesh))
    h = r**beta
    if frame == "lab":
        return h
    if frame != "comoving":
        raise ValueError(f"unknown frame {frame!r}")
    c = np.asarray(grid.carrier)
    cn = float(np.linalg.norm(c))
    if cn == 0:
        return h
    grad = beta * cn ** (beta - 2) * c
    return h - cn**beta - sum(grad[a] * (mesh[a] - c[a]) for a in range(grid.d))


def multiplier(grid: Grid, beta: float, t: float, frame: str = "lab") -> np.ndarray:
    return np.exp(1j * t * dispersion(grid, beta, frame))


def propagate(f: GridFunction, beta: float, t: float, frame: str = "lab") -> GridFunction:
    """Apply ``S_beta(t)``."""
    if not beta > 0:
        raise ValueError("beta must be positive")
    spec = _fft.fftn(f.samples)
    out = _fft.ifftn(multiplier(f.grid, beta, t, frame) * spec)
    return f.with_samples(out)


@dataclass(frozen=True)
class TimeQuadrature:
    """Composite midpoint rule on ``[t0, t1]``."""

    t0: float = 0.0
    t1: float = 1.0
    n_t: int = 64

    def __post_init__(self):
        if self.n_t < 8:
            raise ValueError("n_t must be >= 8")
        if not self.t1 > self.t0:
            raise ValueError("empty time interval")

    @property
    def nodes(self) -> np.ndarray:
        h = (self.t1 - self.t0) / self.n_t
        return self.t0 + h * (np.arange(self.n_t) + 0.5)

    @property
    def weight(self) -> float:
        return (self.t1 - self.t0) / self.n_t

    def refined(self) -> "TimeQuadrature":
        return TimeQuadrature(self.t0, self.t1, 2 * self.n_t)


@dataclass
class SpaceTimeNorm:
    value: float
    p: float
    n_t: int
    N: int
    L: float
    refined_value: Optional[float] = None
    rel_change: Optional[float] = None
    flagged: bool = False


def _node_norms(
    spec: np.ndarray, grid: Grid, symbol: np.ndarray, times: np.ndarray, p
) -> np.ndarray:
    """``||S(t_i) f||_p`` (or ``||.||_p^p``) at each node, batched over nodes."""
    d = grid.d
    per = max(1, CHUNK_ELEMENTS // spec.size)
    out = np.empty(len(times))
    axes = tuple(range(1, d + 1))
    for i0 in range(0, len(times), per):
        tt = times[i0:i0 + per]
        ph = np.exp(1j * tt.reshape((-1,) + (1,) * d) * symbol[None])
        u = _fft.ifftn(ph * spec[None], axes=axes)
        a = np.abs(u)
        if p == math.inf:
            out[i0:i0 + per] = a.max(axis=axes)
        else:
            out[i0:i0 + per] = (a**p).sum(axis=axes) * grid.cell_volume
    return out


def _combine(vals: np.ndarray, p, weight: float) -> float:
    if p == math.inf:
        return float(vals.max())
    return float((math.fsum(np.sort(vals)) * weight) ** (1.0 / p))


def spacetime_norm(
    f: GridFunction,
    beta: float,
    p,
    quad: Optional[TimeQuadrature] = None,
    refine: bool = True,
    frame: str = "lab",
) -> SpaceTimeNorm:
    """``||S_beta(t) f||_{L^p(I x box)}`` by midpoint quadrature in time.

    With ``refine`` the rule is repeated with twice the nodes; the relative
    change is recorded and flagged above 1e-3.
    """
    if not p >= 1:
        raise ValueError("p must be >= 1")
    quad = quad or TimeQuadrature()
    spec = _fft.fftn(f.samples)
    sym = dispersion(f.grid, beta, frame)
    val = _combine(_node_norms(spec, f.grid, sym, quad.nodes, p), p, quad.weight)
    res = SpaceTimeNorm(val, p, quad.n_t, f.grid.N, f.grid.L)
    if refine:
        rq = quad.refined()
        rv = _combine(_node_norms(spec, f.grid, sym, rq.nodes, p), p, rq.weight)
        res.refined_value = rv
        res.rel_change = abs(rv - val) / rv if rv > 0 else 0.0
        res.flagged = res.rel_change > REFINE_FLAG
    return res


# ---------------------------------------------------------------- probes


def _bump(t: np.ndarray) -> np.ndarray:
    out = np.zeros_like(t, dtype=float)
    m = t < 1.0
    out[m] = np.exp(1.0 - 1.0 / (1.0 - t[m] ** 2))
    return out


def _pow2_at_least(x: float) -> int:
    return 1 << max(0, int(math.ceil(math.log2(max(x, 1.0)))))


@dataclass
class MultiplierProbe:
    k: float
    ratio: float
    envelope: float
    lhs: float
    rhs: float
    N: int
    L: float


def multiplier_bound_probe(
    k,
    beta: float,
    p,
    t: float,
    window: str = "unit",
    data: str = "focusing",
    width: float = 1.0,
) -> MultiplierProbe:
    """Growth of ``||S_beta(t) box_k u||_p / ||u||_p`` for one frequency window (d = 1).

    Parameters
    ----------
    k : lattice index (scalar, one dimension).
    window : ``"unit"`` for a window of radius ``width`` at frequency ``k`` or
        ``"alpha"`` for the ``alpha = 1 - beta/2`` window with index ``k``.
    data : the test packet has spectrum on the inner half of the window,
        where the window equals one, so ``box_k u = u``.  ``"packet"`` takes a
        plain bump; ``"focusing"`` pre-applies the inverse flow so the packet
        refocuses at time ``t``, the worst case for ``p > 2``.
    """
    kk = float(np.atleast_1d(k)[0])
    if window == "unit":
        c, R = kk, float(width)
        env = bracket(t * abs(kk) ** (beta - 2)) ** abs(0.5 - _inv(p))
    elif window == "alpha":
        spec = window_geometry(kk, AlphaParams(1 - beta / 2))
        c, R = float(spec.center[0]), spec.inner_radius
        env = bracket(t) ** abs(0.5 - _inv(p))
    else:
        raise ValueError(f"unknown window {window!r}")
    # spatial spread of the comoving packet after time t, plus margin
    rmin, rmax = max(abs(c) - R, 1e-12), abs(c) + R
    curv = beta * abs(beta - 1) * max(rmin ** (beta - 2), rmax ** (beta - 2))
    spread = 2 * t * curv * R + 80.0 / R
    L = float(_pow2_at_least(4 * spread))
    N = _pow2_at_least(2.5 * R * L / math.pi)
    grid = Grid(1, N, L, (c,))
    xi = grid.xi_axis()
    chi = _bump(np.abs(xi - c) / (R / 2))
    h = dispersion(grid, beta, "comoving")
    if data == "focusing":
        u_hat = chi * np.exp(-1j * t * h)
    elif data == "packet":
        u_hat = chi.astype(complex)
    else:
        raise ValueError(f"unknown data {data!r}")
    u = _fft.ifftn(u_hat)
    v = _fft.ifftn(np.exp(1j * t * h) * u_hat)
    lhs = float(_lp_reduce(v, p, grid.dx))
    rhs = float(_lp_reduce(u, p, grid.dx))
    return MultiplierProbe(kk, lhs / rhs, float(env), lhs, rhs, N, L)


def _inv(p) -> float:
    return 0.0 if p == math.inf else 1.0 / p


@dataclass
class DecouplingProbe:
    lam: float
    lhs: float
    rhs: float
    ratio: float
    n_caps: int
    flavor: str


def cap_decomposition(grid: Grid, lam: float, beta: float) -> list[np.ndarray]:
    """Masks of the cubes of side ``~2 lam^(-beta/2)`` tiling ``[-1, 1]^d``."""
    m = max(1, int(math.floor(lam ** (beta / 2) + 1e-9)))
    side = 2.0 / m
    if side / grid.dxi < 4:
        raise ValueError(
            f"lambda={lam} too large for the grid: {side / grid.dxi:.2f} samples per cap side")
    mesh = grid.xi_mesh()
    idx = [np.clip(np.floor((mm + 1.0) / side).astype(int), 0, m - 1) for mm in mesh]
    label = np.zeros(grid.shape, dtype=int)
    for a in range(grid.d):
        label = label * m + idx[a]
    inside = np.all([np.abs(mm) <= 1.0 for mm in mesh], axis=0)
    masks = []
    for lab in np.unique(label[inside]):
        masks.append(inside & (label == lab))
    return masks


def decoupling_probe(
    v: GridFunction,
    beta: float,
    p,
    lam: float,
    flavor: str = "l2",
    n_t: int = 256,
) -> DecouplingProbe:
    """Compare ``||S(t) v||_{L^p([0, lam^beta] x box)}`` with the cap sum.

    The right side is ``(sum_caps ||S(t) v_cap||^r)^(1/r)`` with ``r = 2`` for
    the ``"l2"`` flavor and ``r = p`` for ``"lp"``.
    """
    if flavor not in ("l2", "lp"):
        raise ValueError("flavor must be 'l2' or 'lp'")
    if not lam >= 1:
        raise ValueError("lambda must be >= 1")
    if any(c != 0 for c in v.grid.carrier):
        raise ValueError("decoupling probe expects a lab-frame grid")
    r_xi = v.grid.xi_norm()
    spec = _fft.fftn(v.samples)
    off = np.abs(spec[(r_xi < 0.5 - 1e-12) | (r_xi > 1 + 1e-12)])
    if off.size and off.max() > 1e-10 * np.abs(spec).max():
        raise ValueError("v must have spectrum in the unit annulus 1/2 <= |xi| <= 1")
    quad = TimeQuadrature(0.0, lam**beta, n_t)
    sym = dispersion(v.grid, beta)
    lhs = _combine(_node_norms(spec, v.grid, sym, quad.nodes, p), p, quad.weight)
    masks = cap_decomposition(v.grid, lam, beta)
    pieces = []
    for m in masks:
        sp = np.where(m, spec, 0)
        if np.any(sp != 0):
            pieces.append(_combine(_node_norms(sp, v.grid, sym, quad.nodes, p), p, quad.weight))
    pieces = np.asarray(pieces)
    r = 2.0 if flavor == "l2" else p
    if r == math.inf:
        rhs = float(pieces.max())
    else:
        rhs = float(math.fsum(np.sort(pieces) ** r) ** (1.0 / r))
    return DecouplingProbe(lam, lhs, rhs, lhs / rhs, len(pieces), flavor)
