"""Norms of grid functions and the sharp embedding thresholds between the
function spaces they define.

Threshold formulas are written so that ``fractions.Fraction`` (or int) inputs
give exact ``Fraction`` outputs; floats give floats.  ``p = inf`` is encoded by
``math.inf`` and enters every formula through ``1/p = 0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Real
from typing import Optional

import numpy as np

from .frequency_partition import BAPU, DyadicWindows, bracket
from .grid import Grid, GridFunction, load_gridfunction, save_gridfunction

BAND_TOL = 1e-8


def inv(p) -> Real:
    """``1/p`` with ``1/inf = 0``; exact for int and Fraction inputs."""
    if p == math.inf:
        return 0
    if isinstance(p, (int, Fraction)):
        return Fraction(1) / p
    return 1.0 / p


def conj(p):
    """Hoelder conjugate exponent."""
    if p == 1:
        return math.inf
    if p == math.inf:
        return 1
    if isinstance(p, (int, Fraction)):
        return Fraction(p) / (p - 1)
    return p / (p - 1.0)


def _check_exponent(p, name: str = "p") -> None:
    if not p >= 1:
        raise ValueError(f"{name} must be in [1, inf], got {p}")


@dataclass(frozen=True)
class ExponentTuple:
    d: int
    beta: float
    p: float
    q: float
    s: float
    alpha: float

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("d must be >= 1")
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        _check_exponent(self.p, "p")
        _check_exponent(self.q, "q")
        if not self.alpha < 1:
            raise ValueError("alpha must be < 1")


@dataclass(frozen=True)
class IndexPair:
    sigma: Real
    tau: Real


def sigma_tau(d: int, p, q) -> IndexPair:
    _check_exponent(p, "p")
    _check_exponent(q, "q")
    a = inv(q) - inv(p)
    b = inv(q) + inv(p) - 1
    return IndexPair(d * min(0, a, b), d * max(0, a, b))


# ---------------------------------------------------------------- norms


def _lp_reduce(samples: np.ndarray, p, cell: float, axes=None) -> np.ndarray | float:
    a = np.abs(samples)
    if p == math.inf:
        return a.max(axis=axes)
    if p == 1:
        return a.sum(axis=axes) * cell
    if p == 2:
        return np.sqrt((a * a).sum(axis=axes) * cell)
    return ((a**p).sum(axis=axes) * cell) ** (1.0 / p)


def lp_norm(f: GridFunction, p) -> float:
    """Riemann-sum ``L^p`` norm on the box (max for ``p = inf``)."""
    _check_exponent(p)
    return float(_lp_reduce(f.samples, p, f.grid.cell_volume))


def _lq_sum(values: np.ndarray, q) -> float:
    if q == math.inf:
        return float(values.max()) if values.size else 0.0
    # sort before summing so the reduction order is deterministic
    v = np.sort(values) ** q
    return float(math.fsum(v) ** (1.0 / q))


def band_energy_outside(f: GridFunction, mask: np.ndarray) -> float:
    spec = np.abs(np.fft.fftn(f.samples)) ** 2
    tot = spec.sum()
    if tot == 0:
        return 0.0
    return float(spec[~mask].sum() / tot)


def _check_band(f: GridFunction, bapu: BAPU) -> None:
    if not f.grid.compatible(bapu.grid):
        raise ValueError("grid mismatch between function and partition")
    if bapu.region is not None:
        frac = band_energy_outside(f, bapu.domain)
        if frac > BAND_TOL:
            raise ValueError(
                f"band violation: {frac:.2e} of the energy lies outside the partition domain")


def window_norms(f: GridFunction, p, bapu: BAPU) -> np.ndarray:
    """``||box_k f||_p`` for every active window, in ``bapu.indices`` order."""
    _check_exponent(p)
    _check_band(f, bapu)
    pieces = bapu.project(f)
    axes = tuple(range(1, f.d + 1))
    return np.asarray(_lp_reduce(pieces, p, f.grid.cell_volume, axes=axes))


def alpha_mod_norm(f: GridFunction, t: ExponentTuple, bapu: BAPU) -> float:
    """Alpha-modulation norm with weights ``<k>^(s/(1-alpha))``."""
    if not math.isclose(t.alpha, bapu.alpha, rel_tol=0, abs_tol=1e-14):
        raise ValueError("exponent tuple alpha does not match the partition")
    _check_exponent(t.q, "q")
    norms = window_norms(f, t.p, bapu)
    weights = bapu.index_brackets() ** (t.s / (1.0 - t.alpha))
    return _lq_sum(weights * norms, t.q)


def sobolev_norm(f: GridFunction, s: float, p) -> float:
    """``||(1 - Laplacian)^(s/2) f||_p``."""
    _check_exponent(p)
    mult = (1.0 + f.grid.xi_norm() ** 2) ** (s / 2.0)
    g = np.fft.ifftn(mult * np.fft.fftn(f.samples))
    return float(_lp_reduce(g, p, f.grid.cell_volume))


def plancherel_norm(f: GridFunction) -> float:
    """``L^2`` norm computed on the frequency side."""
    spec = f.spectrum()
    return float(np.sqrt(np.sum(np.abs(spec) ** 2) * f.grid.dxi**f.d / (2 * np.pi) ** f.d))


def lp_equivalence_check(
    f: GridFunction, t: ExponentTuple, bapu: BAPU, dyadic: DyadicWindows
) -> tuple[float, float]:
    """Both sides of the Littlewood-Paley characterisation of the alpha norm.

    Returns ``(||f||_{M^{s,alpha}_{p,q}},
    || 2^{js} ||Delta_j f||_{M^{0,alpha}_{p,q}} ||_{l^q_j})``.
    """
    if not f.grid.compatible(dyadic.grid):
        raise ValueError("grid mismatch between function and dyadic windows")
    left = alpha_mod_norm(f, t, bapu)
    t0 = ExponentTuple(t.d, t.beta, t.p, t.q, 0.0, t.alpha)
    shells = dyadic.project(f)
    vals = np.empty(shells.shape[0])
    for j in range(shells.shape[0]):
        piece = f.with_samples(shells[j])
        vals[j] = 2.0 ** (j * t.s) * alpha_mod_norm(piece, t0, bapu)
    return left, _lq_sum(vals, t.q)


# ---------------------------------------------------------------- embeddings


@dataclass(frozen=True)
class EmbeddingVerdict:
    """Sharp condition ``s > threshold`` (open) or ``s >= threshold`` (closed)."""

    threshold: Real
    closed: bool
    holds: Optional[bool] = None
    case: str = ""

    @property
    def boundary(self) -> str:
        return "closed" if self.closed else "open"


EMBEDDING_KINDS = ("mod-scale", "into-Lp", "Mpqs-into-alpha", "alpha-into-Mpq")


def _verdict(threshold, closed: bool, s, case: str) -> EmbeddingVerdict:
    holds = None
    if s is not None:
        holds = bool(s >= threshold) if closed else bool(s > threshold)
    return EmbeddingVerdict(threshold, closed, holds, case)


def embedding_threshold(
    kind: str,
    d: int,
    p,
    q,
    alpha,
    s=None,
    q_target=None,
    s_target=0,
) -> EmbeddingVerdict:
    """Sharp regularity threshold for the embedding named by ``kind``.

    Parameters
    ----------
    kind : str
        ``"mod-scale"``: ``M^{s,alpha}_{p,q} -> M^{s_target,alpha}_{p,q_target}``
        (threshold on ``s``; alpha in [0,1)).
        ``"into-Lp"``: ``M^{s,alpha}_{p,q} -> L^p`` (alpha in [0,1)).
        ``"Mpqs-into-alpha"``: ``M^s_{p,q} -> M^{0,alpha}_{p,q}``, alpha != 0 branches
        on the sign of alpha.
        ``"alpha-into-Mpq"``: ``M^{s,alpha}_{p,q} -> M_{p,q}`` for alpha < 0.
    s : optional
        When given, ``holds`` reports whether ``s`` satisfies the condition.
    """
    _check_exponent(p, "p")
    _check_exponent(q, "q")
    if not alpha < 1:
        raise ValueError("alpha must be < 1")
    st = sigma_tau(d, p, q)

    if kind == "mod-scale":
        if alpha < 0:
            raise ValueError("mod-scale embedding is stated for alpha in [0, 1)")
        if q_target is None:
            raise ValueError("mod-scale embedding needs q_target")
        _check_exponent(q_target, "q_target")
        if q > q_target:
            thr = s_target + d * (1 - alpha) * (inv(q_target) - inv(q))
            return _verdict(thr, False, s, "q > q_target")
        return _verdict(s_target, True, s, "q <= q_target")

    if kind == "into-Lp":
        if alpha < 0:
            raise ValueError("into-Lp embedding is stated for alpha in [0, 1)")
        thr = -(1 - alpha) * st.sigma
        if p == math.inf:
            if q == 1:
                return _verdict(thr, True, s, "(3) p = inf, q = 1")
            return _verdict(thr, False, s, "(4) p = inf, q > 1")
        if q <= p:
            return _verdict(thr, True, s, "(1) q <= p < inf")
        return _verdict(thr, False, s, "(2) p < q")

    if kind == "Mpqs-into-alpha":
        if alpha > 0:
            return _verdict(-alpha * st.sigma, True, s, "alpha > 0")
        if alpha < 0:
            return _verdict(-alpha * st.tau, True, s, "alpha < 0")
        return _verdict(0, True, s, "alpha = 0 (identical spaces)")

    if kind == "alpha-into-Mpq":
        if not alpha < 0:
            raise ValueError("alpha-into-Mpq embedding requires alpha < 0")
        return _verdict(alpha * st.sigma, True, s, "alpha < 0")

    raise ValueError(f"unknown embedding kind {kind!r}; expected one of {EMBEDDING_KINDS}")


__all__ = [
    "Grid",
    "GridFunction",
    "ExponentTuple",
    "IndexPair",
    "EmbeddingVerdict",
    "inv",
    "conj",
    "sigma_tau",
    "lp_norm",
    "alpha_mod_norm",
    "window_norms",
    "sobolev_norm",
    "plancherel_norm",
    "lp_equivalence_check",
    "embedding_threshold",
    "load_gridfunction",
    "save_gridfunction",
    "bracket",
]
