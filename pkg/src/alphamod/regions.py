"""Sufficient and necessary regularity thresholds for the local smoothing
estimate ``||S_beta(t)u||_{L^p(I x R^d)} <~ ||u||_{M^{s,alpha}_{p,q}}``.

Everything is written in the coordinates ``x = 1/p`` and ``y = 1/q`` where all
conditions are affine, so ``Fraction`` inputs give exact answers.  Three
regimes exist: ``0 < beta < 1``, ``1 < beta <= 2`` and ``beta > 2``; the wave
case ``beta = 1`` is rejected.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple, Optional

from .spaces import inv

LABELS = ("A", "B", "C", "D", "E", "F")


def _check(d: int, beta):
    """Validate and return ``beta`` (ints promoted to ``Fraction``)."""
    if isinstance(beta, int):
        beta = Fraction(beta)
    if d < 1:
        raise ValueError("d must be >= 1")
    if not beta > 0:
        raise ValueError("beta must be positive")
    if beta == 1:
        raise ValueError("beta=1 excluded (wave case)")
    return beta


def regime(beta) -> str:
    if beta < 1:
        return "beta<1"
    if beta <= 2:
        return "1<beta<=2"
    return "beta>2"


def sharp_labels(beta) -> frozenset:
    """Conditions on which the sufficient threshold is known to be optimal."""
    if beta < 1:
        return frozenset("ADE")
    if beta <= 2:
        return frozenset("ACDE")
    return frozenset()


def _p0_inv(d: int):
    # 1/p0 with p0 = 2 + 4/d
    return Fraction(d, 2 * d + 4)


def _sigma(d: int, x, y):
    return d * min(0, y - x, y + x - 1)


def _conditions(d: int, beta, x, y) -> list:
    """``(label, threshold, closed)`` for every condition whose (p, q) constraint holds."""
    half = Fraction(1, 2)
    x0 = _p0_inv(d)
    out = []
    if beta < 1:
        if x <= x0 and y <= 1 - Fraction(d + 4, d) * x:
            out.append(("A", beta * d / 2 * (1 - x - y) - beta * x, False))
        if x0 <= x <= half and y <= x:
            out.append(("B", beta * d / 2 * (half - y), False))
        if y >= 1 - Fraction(d + 4, d) * x and x <= y <= 1 - x:
            out.append(("C", beta * d / 4 * (1 - x - y), False))
        if y >= 1 - x and y >= x:
            out.append(("D", 0, True))
        if x > half and y <= x:
            out.append(("E", beta * d / 2 * (x - y), False))
    elif beta <= 2:
        if x <= x0 and y <= 1 - Fraction(d + 2, d) * x:
            out.append(("A", beta * d / 2 * (1 - x - y) - beta * x, False))
        if x0 <= x <= half and y <= half:
            out.append(("B", beta * d / 2 * (half - y), False))
        if y >= 1 - Fraction(d + 2, d) * x and half <= y <= 1 - x:
            out.append(("C", 0, False))
        if y >= x and y >= 1 - x:
            out.append(("D", 0, True))
        if x >= half and y < x:
            out.append(("E", beta * d / 2 * (x - y), False))
    else:
        b2 = beta - 2
        if x <= x0 and y <= 1 - Fraction(d + 2, d) * x:
            out.append(("A", d * b2 * (half - x) - d * (x + y - 1) - beta * x, False))
        if x0 <= x <= half and y <= half:
            out.append(("B", d * b2 * (half - x) - d * (x + y - 1)
                        - beta * d / 2 * (half - x), False))
        if x <= x0 and y >= 1 - Fraction(d + 2, d) * x:
            out.append(("C", b2 * (Fraction(d, 2) - (d + 1) * x), False))
        if x0 <= x <= half and y >= half:
            out.append(("D", Fraction(d, 2) * b2 * (half - x), False))
        if x >= half and y >= x:
            out.append(("E", d * b2 * (x - half), True))
        if x >= half and y < x:
            out.append(("F", d * b2 * (x - half) + d * (x - y), False))
    return out


class SufficientCondition(NamedTuple):
    label: str
    threshold: object
    boundary: str
    labels: tuple  # every condition attaining the minimum
    applicable: tuple  # every condition whose (p, q) constraint holds


def sufficient_at(d: int, beta, x, y) -> SufficientCondition:
    """Minimal sufficient threshold at ``(1/p, 1/q) = (x, y)``.

    Ties are broken alphabetically; all tied labels are reported.
    """
    beta = _check(d, beta)
    conds = _conditions(d, beta, x, y)
    if not conds:
        return SufficientCondition("none", math.inf, "open", (), ())
    best = min(c[1] for c in conds)
    tied = sorted(c for c in conds if c[1] == best)
    label, thr, closed = tied[0]
    return SufficientCondition(
        label, thr, "closed" if closed else "open",
        tuple(c[0] for c in tied), tuple(sorted(c[0] for c in conds)))


def sufficient_threshold(d: int, beta, p, q) -> SufficientCondition:
    return sufficient_at(d, beta, inv(p), inv(q))


def necessity_at(d: int, beta, x, y):
    beta = _check(d, beta)
    half = Fraction(1, 2)
    if beta <= 2:
        return max(0, beta * d / 2 * (x - y), beta * d / 2 * (1 - x - y) - beta * x)
    b2 = beta - 2
    vals = [d * (1 - x - y) - beta * x, d * b2 * (x - half) + d * (x - y)]
    if x >= half and y >= x:
        vals.append(d * b2 * (x - half))
    return max(vals)


def necessity_threshold(d: int, beta, p, q):
    return necessity_at(d, beta, inv(p), inv(q))


def fix_time_at(d: int, beta, x, y):
    beta = _check(d, beta)
    sig = _sigma(d, x, y)
    if beta <= 2:
        return -beta * sig / 2
    return d * (beta - 2) * abs(Fraction(1, 2) - x) - sig


def fix_time_threshold(d: int, beta, p, q):
    return fix_time_at(d, beta, inv(p), inv(q))


@dataclass(frozen=True)
class RegionVerdict:
    inv_p: object
    inv_q: object
    label: str
    sufficient_s: object
    sufficient_boundary: str
    necessary_s: object
    fix_time_s: object
    labels: tuple = ()
    applicable: tuple = ()

    @property
    def gap(self):
        return self.sufficient_s - self.necessary_s

    @property
    def smoothing_gain(self):
        return self.fix_time_s - self.sufficient_s

    def row(self) -> list:
        return [float(self.inv_p), float(self.inv_q), self.label, float(self.sufficient_s),
                self.sufficient_boundary, float(self.necessary_s), float(self.gap),
                float(self.fix_time_s)]


CSV_HEADER = ["inv_p", "inv_q", "label", "sufficient_s", "boundary",
              "necessary_s", "gap", "fix_time_s"]


def verdict_at(d: int, beta, x, y) -> RegionVerdict:
    suf = sufficient_at(d, beta, x, y)
    return RegionVerdict(x, y, suf.label, suf.threshold, suf.boundary,
                         necessity_at(d, beta, x, y), fix_time_at(d, beta, x, y),
                         suf.labels, suf.applicable)


def region_grid(d: int, beta, resolution: int) -> list[list[RegionVerdict]]:
    """Raster ``cells[i][j]`` at ``(1/p, 1/q) = (i, j) / (resolution - 1)``.

    Raises if any cell is left uncovered by the sufficient conditions.
    """
    if resolution < 11:
        raise ValueError("resolution must be >= 11")
    _check(d, beta)
    n = resolution - 1
    cells = [[verdict_at(d, beta, Fraction(i, n), Fraction(j, n)) for j in range(resolution)]
             for i in range(resolution)]
    holes = [(c.inv_p, c.inv_q) for row in cells for c in row if c.label == "none"]
    if holes:
        raise RuntimeError(f"sufficient conditions leave {len(holes)} cells uncovered, e.g. {holes[0]}")
    return cells


def as_exact(value) -> Fraction:
    """Parse a user-supplied exponent exactly (``"0.5"`` -> 1/2, ``"inf"`` -> inf)."""
    if isinstance(value, Fraction):
        return value
    s = str(value).strip().lower()
    if s in ("inf", "infinity", "oo"):
        return math.inf
    return Fraction(s)
