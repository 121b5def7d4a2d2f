"""The ten acceptance checks, each at its stated tolerance.

Every check returns a :class:`CheckResult`; :func:`run_checks` runs a
selection and prints one ``PASS``/``FAIL`` line per check.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from fractions import Fraction as F
from typing import Callable, Iterable, Optional

import numpy as np

from . import experiments as ex
from . import nls4, regions
from .frequency_partition import AlphaParams, build_bapu
from .grid import Grid, GridFunction, random_bandlimited, sample
from .propagator import decoupling_probe, multiplier_bound_probe, propagate
from .spaces import ExponentTuple, lp_norm

SEED = 20240601


@dataclass
class CheckResult:
    number: int
    title: str
    passed: bool
    detail: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] criterion {self.number}: {self.title} ({self.seconds:.1f}s) {self.detail}"


def _rel(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.abs(a - b).max() / np.abs(b).max())


# ---------------------------------------------------------------- 1


def partition_of_unity(n_functions: int = 50) -> CheckResult:
    rng = np.random.default_rng(SEED)
    grid = Grid(1, 1024, 1024.0)
    worst_sum, worst_rec = 0.0, 0.0
    for alpha in (-1.0, -0.5, 0.0, 0.5, 0.75):
        bapu = build_bapu(AlphaParams(alpha), grid)
        worst_sum = max(worst_sum, bapu.partition_error())
        for _ in range(n_functions):
            f = random_bandlimited(grid, rng, fraction=0.5)
            rec = bapu.project(f).sum(axis=0)
            worst_rec = max(worst_rec, _rel(rec, f.samples))
    ok = worst_sum < 1e-10 and worst_rec < 1e-10
    return CheckResult(1, "partition of unity", ok,
                       {"max |sum eta - 1|": worst_sum, "max reconstruction error": worst_rec})


# ---------------------------------------------------------------- 2


def isometry_and_group_law(n_functions: int = 20) -> CheckResult:
    rng = np.random.default_rng(SEED + 1)
    grid = Grid(1, 256, 32.0)
    iso, grp = 0.0, 0.0
    for beta in (0.5, 2.0, 4.0):
        for _ in range(n_functions):
            f = random_bandlimited(grid, rng, fraction=0.9)
            t1, t2 = rng.uniform(-1.0, 1.0, size=2)
            n0 = lp_norm(f, 2)
            iso = max(iso, abs(lp_norm(propagate(f, beta, t1), 2) - n0) / n0)
            two = propagate(propagate(f, beta, t2), beta, t1).samples
            one = propagate(f, beta, t1 + t2).samples
            grp = max(grp, _rel(two, one))
    ok = iso < 1e-10 and grp < 1e-10
    return CheckResult(2, "isometry and group law", ok,
                       {"max isometry error": iso, "max group-law error": grp})


# ---------------------------------------------------------------- 3


def gaussian_solution(x: np.ndarray, t: float, a: float = 1.0) -> np.ndarray:
    """Closed form of ``exp(i t |xi|^2)`` applied to ``exp(-a x^2)``."""
    at = a / (1.0 - 4j * a * t)
    return np.sqrt(at / a) * np.exp(-at * x * x)


def gaussian_oracle() -> CheckResult:
    grid = Grid(1, 2048, 40.0)
    f = sample(grid, lambda x: np.exp(-x * x).astype(complex))
    errs = {}
    for t in (0.1, 0.5, 1.0):
        v = propagate(f, 2.0, t).samples
        errs[t] = float(np.abs(v - gaussian_solution(grid.x_axis(), t)).max())
    return CheckResult(3, "Gaussian oracle", max(errs.values()) < 1e-6,
                       {"sup error by t": errs})


# ---------------------------------------------------------------- 4

GOLDEN_SUFFICIENT = [
    # (d, beta, p, q) -> (label, threshold, boundary)
    ((1, F(1, 2), 6, math.inf), ("A", F(1, 8), "open")),
    ((1, 2, 2, 2), ("B", 0, "open")),
    ((1, 4, 6, math.inf), ("A", F(5, 6), "open")),
]
GOLDEN_NECESSARY = [
    ((1, 2, 2, 2), 0),
    ((1, F(1, 2), 6, math.inf), F(1, 8)),
    ((1, 4, 1, 1), 1),
]
GOLDEN_FIX_TIME = [
    ((1, 2, 2, 2), 0),
    ((1, F(1, 2), 6, math.inf), F(5, 24)),
    ((1, 4, 2, 2), 0),
]


def region_consistency(resolution: int = 101) -> CheckResult:
    min_gap, sharp_gap, cells = math.inf, 0.0, 0
    for beta in (F(1, 2), F(3, 2), F(2), F(4)):
        sharp = regions.sharp_labels(beta)
        for d in (1, 2):
            for row in regions.region_grid(d, beta, resolution):
                for c in row:
                    cells += 1
                    min_gap = min(min_gap, float(c.gap))
                    if c.label in sharp:
                        sharp_gap = max(sharp_gap, abs(float(c.gap)))
    golden = []
    for args, want in GOLDEN_SUFFICIENT:
        got = regions.sufficient_threshold(*args)
        golden.append((got.label, got.threshold, got.boundary) == want)
    for args, want in GOLDEN_NECESSARY:
        golden.append(regions.necessity_threshold(*args) == want)
    for args, want in GOLDEN_FIX_TIME:
        golden.append(regions.fix_time_threshold(*args) == want)
    corner = regions.region_grid(1, F(1, 2), 11)[0][0].label
    golden.append(corner == "A")
    ok = min_gap >= -1e-12 and sharp_gap < 1e-12 and all(golden)
    return CheckResult(4, "region engine consistency", ok,
                       {"cells": cells, "min gap": min_gap, "max gap on sharp labels": sharp_gap,
                        "golden matched": f"{sum(golden)}/{len(golden)}"})


# ---------------------------------------------------------------- 5


def scaling_law() -> CheckResult:
    beta, p = 0.5, 4
    target = -(beta + 1) / p
    lams = [4, 8, 16, 32]
    t = ExponentTuple(1, beta, p, 2, 0.0, 1 - beta / 2)
    bump = ex.make_annulus_bump(ex.default_bump_grid())
    lhs = ex.scaling_sweep("scaled_bump", t, lams, bump=bump).lhs_fit.slope
    s, alpha = 0.5, 1 - beta / 2
    tm = ExponentTuple(1, beta, p, 2, s, alpha)
    sw = ex.scaling_sweep("modulated_bump", tm, lams, bump=bump)
    rhs = ex.fit_scaling_exponent([r.value for r in sw.rows], [r.rhs for r in sw.rows]).slope
    rhs_target = s / (1 - alpha)
    ok = abs(lhs - target) <= 0.05 and abs(rhs - rhs_target) <= 0.05
    return CheckResult(5, "scaling-law reproduction", ok,
                       {"scaled-bump lhs slope": lhs, "target": target,
                        "modulated-bump rhs slope": rhs, "rhs target": rhs_target})


# ---------------------------------------------------------------- 6

NECESSITY_POINTS = [(F(1, 6), 0), (0, 0), (1, 0), (F(1, 2), 0), (F(1, 2), F(1, 2)), (F(1, 3), 1)]
NECESSITY_BETAS = (F(1, 2), F(3, 2), F(5, 2))


def _exponent(x):
    return math.inf if x == 0 else 1 / F(x)


def necessity_sandwich(betas: Iterable = NECESSITY_BETAS, points=NECESSITY_POINTS) -> CheckResult:
    rows, ok = [], True
    for beta in betas:
        plan = ex.default_plan(float(beta))
        bump = ex.necessity_bump(float(beta), plan)
        for x, y in points:
            rep = ex.verify_necessity(1, beta, _exponent(x), _exponent(y), plan=plan, bump=bump)
            ok &= rep.passed
            rows.append(f"beta={beta} (1/p,1/q)=({x},{y}): nec={rep.necessary_s:.3f} "
                        f"emp={rep.empirical_max:.3f} {'ok' if rep.passed else 'FAIL'}")
    return CheckResult(6, "necessity sandwich", ok, {"points": rows})


# ---------------------------------------------------------------- 7


def annulus_random(grid: Grid, rng: np.random.Generator) -> GridFunction:
    """Random coefficients under a smooth annulus profile."""
    prof = ex._annulus_profile(grid.xi_norm())
    spec = prof * (rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape))
    return GridFunction.from_spectrum(grid, spec, "annulus_random")


def decoupling() -> CheckResult:
    rng = np.random.default_rng(SEED + 7)
    grid = Grid(1, 2048, 4096.0)
    v = annulus_random(grid, rng)
    lams = [4, 16, 64]
    d, p0 = 1, 2 + 4 / 1
    l2 = [decoupling_probe(v, 2.0, p0, lam, "l2").ratio for lam in lams]
    lp = [decoupling_probe(v, 0.5, p0, lam, "lp").ratio for lam in lams]
    s2 = ex.fit_scaling_exponent(lams, l2).slope
    sp = ex.fit_scaling_exponent(lams, lp).slope
    bound = 0.5 * (d / 2 - (d + 1) / p0) + 0.15
    ok = s2 <= 0.15 and sp <= bound
    return CheckResult(7, "decoupling probe", ok,
                       {"l2 slope (beta=2)": s2, "lp slope (beta=1/2)": sp, "lp bound": bound})


# ---------------------------------------------------------------- 8


def multiplier_growth() -> CheckResult:
    beta, ks = 4.0, [4, 8, 16, 32]
    ratios = [multiplier_bound_probe(k, beta, math.inf, 1.0).ratio for k in ks]
    slope = ex.fit_scaling_exponent(ks, ratios).slope
    bound = (beta - 2) * 0.5 + 0.1
    return CheckResult(8, "multiplier-bound probe", slope <= bound,
                       {"ratios": ratios, "slope": slope, "bound": bound})


# ---------------------------------------------------------------- 9


def nls_grid() -> Grid:
    return Grid(1, 512, 50.0)


def gaussian_data(grid: Grid, amplitude: float = 1.0) -> GridFunction:
    return sample(grid, lambda x: amplitude * np.exp(-x * x / 2).astype(complex), "gaussian")


def conservation() -> CheckResult:
    grid = nls_grid()
    u0 = gaussian_data(grid)
    rep = nls4.energy_report(nls4.splitstep_solve(u0, nls4.SolverConfig(grid, 1e-4, 0.1)))
    dts = [4e-4, 2e-4, 1e-4]
    drifts = [nls4.energy_report(nls4.splitstep_solve(u0, nls4.SolverConfig(grid, dt, 0.1)))
              .energy_drift() for dt in dts]
    order = nls4.order_of_convergence(dts, drifts)
    ok = rep.mass_drift() < 1e-8 and rep.energy_drift() < 1e-4 and abs(order - 2) <= 0.2
    return CheckResult(9, "4NLS conservation", ok,
                       {"mass drift": rep.mass_drift(), "energy drift": rep.energy_drift(),
                        "drift order": order})


# ---------------------------------------------------------------- 10


def well_posedness() -> CheckResult:
    grid = nls_grid()
    u0 = gaussian_data(grid)
    u0 = u0.scaled(0.1 / lp_norm(u0, 2))
    cfg = nls4.SolverConfig(grid, 1e-4, 0.05, scheme="picard")
    pic = nls4.picard_solve(u0, cfg)
    ratios = pic.diagnostics["ratios"]
    ss = nls4.splitstep_solve(u0, nls4.SolverConfig(grid, 1e-4, 0.05))
    agree = float(np.sqrt(np.sum(np.abs(pic.states - ss.states) ** 2, axis=1) * grid.dx).max())
    pairs = (nls4.strichartz_pair(6), nls4.strichartz_pair(F(10, 3)))
    golden = pairs[0].a == 3 and pairs[0].gamma == 12 and pairs[1].a == F(10, 3)
    traj = nls4.splitstep_solve(gaussian_data(grid), nls4.SolverConfig(grid, 1e-4, 0.1))
    on_traj = nls4.gronwall_monitor(nls4.energy_report(traj)).passed
    fixture = nls4.synthetic_report(np.linspace(0.0, 1.0, 101), lambda t: math.exp(t * t))
    on_fixture = nls4.gronwall_monitor(fixture).passed
    ok = (max(ratios) <= 0.5 and agree < 1e-4 and golden and on_traj and not on_fixture)
    return CheckResult(10, "well-posedness machinery", ok,
                       {"max Picard ratio": max(ratios), "Picard vs split-step": agree,
                        "Strichartz goldens": golden, "monitor on trajectory": on_traj,
                        "monitor on super-exponential fixture": on_fixture})


CHECKS: dict[int, Callable[[], CheckResult]] = {
    1: partition_of_unity,
    2: isometry_and_group_law,
    3: gaussian_oracle,
    4: region_consistency,
    5: scaling_law,
    6: necessity_sandwich,
    7: decoupling,
    8: multiplier_growth,
    9: conservation,
    10: well_posedness,
}


def run_check(number: int) -> CheckResult:
    t0 = time.perf_counter()
    try:
        res = CHECKS[number]()
    except (ValueError, RuntimeError, ArithmeticError) as exc:
        res = CheckResult(number, CHECKS[number].__name__.replace("_", " "), False,
                          {"error": f"{type(exc).__name__}: {exc}"})
    res.seconds = time.perf_counter() - t0
    return res


def run_checks(numbers: Optional[Iterable[int]] = None, echo=print) -> list[CheckResult]:
    out = []
    for n in numbers or sorted(CHECKS):
        res = run_check(n)
        if echo is not None:
            echo(res.line())
        out.append(res)
    return out
