"""One-dimensional cubic fourth-order Schroedinger equation

    i u_t + u_xxxx = -|u|^2 u,      u(0) = u0,

on a periodic box: Strang split-step and Picard/Duhamel solvers, the mass and
energy functionals of the full solution ``u``, of its nonlinear part
``v = u - S_4(t) u0``, and an exponential-growth (Gronwall) monitor.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional

import numpy as np

from . import _fft
from .experiments import NumericalFailure, fit_scaling_exponent
from .frequency_partition import AlphaParams, build_bapu
from .grid import Grid, GridFunction
from .io import atomic_write_bytes
from .spaces import ExponentTuple, alpha_mod_norm

BLOWUP_LIMIT = 1e6


# ---------------------------------------------------------------- exponents


@dataclass(frozen=True)
class StrichartzPair:
    p: object
    gamma: object
    a: object
    in_range: bool

    @property
    def admissible(self) -> bool:
        """``a <= p`` and ``a <= gamma``, the inequalities used for the fixed point."""
        return self.a <= self.p and self.a <= self.gamma


def strichartz_pair(p) -> StrichartzPair:
    """``1/gamma = (1/4)(1/2 - 1/p)`` and ``a = 8p/(3p - 2)``; exact for Fraction/int input."""
    if isinstance(p, int):
        p = Fraction(p)
    if not p > Fraction(2, 3):
        raise ValueError("p must exceed 2/3 (a(p) has a pole there)")
    a = 8 * p / (3 * p - 2)
    inv_gamma = (Fraction(1, 2) - 1 / p) / 4 if isinstance(p, Fraction) else (0.5 - 1.0 / p) / 4
    gamma = math.inf if inv_gamma == 0 else 1 / inv_gamma
    in_range = Fraction(10, 3) <= p <= 6
    return StrichartzPair(p, gamma, a, bool(in_range))


def contraction_time(u0_norm_D: float, M: float, C: float, cap: float = 1e6) -> float:
    """Largest ``T`` with ``C T^(1/4) (2 M n)^2 <= 1/10``, capped at ``cap``."""
    if not (u0_norm_D >= 0 and M > 0 and C > 0):
        raise ValueError("norm must be >= 0 and constants positive")
    if u0_norm_D == 0:
        return cap
    T = (1.0 / (10.0 * C * 4.0 * M**2 * u0_norm_D**2)) ** 4
    return min(T, cap)


def data_norm(u0: GridFunction, p: float, s: float) -> float:
    """``||u0||_{M^s_{p,2}}``, the data norm of the local theory."""
    if not 10 / 3 <= p <= 6:
        raise ValueError("data norm is defined for 10/3 <= p <= 6")
    if not s > 0.5 - 1.0 / p:
        raise ValueError(f"s must exceed 1/2 - 1/p = {0.5 - 1 / p:.4g}")
    bapu = build_bapu(AlphaParams(0.0), u0.grid)
    return alpha_mod_norm(u0, ExponentTuple(1, 4.0, p, 2, s, 0.0), bapu)


# ---------------------------------------------------------------- solvers


@dataclass
class SolverConfig:
    grid: Grid
    dt: float
    T: float
    scheme: str = "splitstep"
    picard_max_iters: int = 60
    picard_tol: float = 1e-12
    nonlinearity: float = 1.0  # 0 switches the equation to the free flow
    dealias: bool = True
    max_stiffness: float = 1e3  # bound on dt * xi^4 over the retained modes

    def __post_init__(self):
        if self.grid.d != 1:
            raise ValueError("the solver is one-dimensional")
        if not (self.dt > 0 and self.T > 0):
            raise ValueError("dt and T must be positive")
        if self.dt > self.T:
            raise ValueError("dt must not exceed T")
        if not self.picard_tol > 0:
            raise ValueError("picard_tol must be positive")
        if self.scheme not in ("splitstep", "picard"):
            raise ValueError("scheme must be 'splitstep' or 'picard'")
        xi_max = float(np.abs(self.grid.xi_axis()[self.mask()]).max())
        if self.dt * xi_max**4 > self.max_stiffness:
            raise ValueError(
                f"dt * xi_max^4 = {self.dt * xi_max**4:.3g} exceeds max_stiffness "
                f"{self.max_stiffness:g}")

    @property
    def n_steps(self) -> int:
        n = int(round(self.T / self.dt))
        if not math.isclose(n * self.dt, self.T, rel_tol=1e-9):
            raise ValueError("T must be an integer multiple of dt")
        return n

    def mask(self) -> np.ndarray:
        if not self.dealias:
            return np.ones(self.grid.N, dtype=bool)
        k = np.abs(np.fft.fftfreq(self.grid.N) * self.grid.N)
        return k <= self.grid.N // 3


@dataclass
class Trajectory:
    grid: Grid
    times: np.ndarray
    states: np.ndarray  # (n_times, N)
    linear: np.ndarray  # S_4(t_i) u0
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.times[0] != 0:
            raise ValueError("trajectories start at t = 0")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must increase")

    @property
    def nonlinear_part(self) -> np.ndarray:
        return self.states - self.linear

    def state(self, i: int) -> GridFunction:
        return GridFunction(self.grid, self.states[i], f"u(t={self.times[i]:g})")

    def save(self, path) -> None:
        header = {"N": self.grid.N, "L": self.grid.L, "times": [float(t) for t in self.times]}
        a = self.states.ravel()
        payload = np.empty(2 * a.size, dtype="<f8")
        payload[0::2], payload[1::2] = a.real, a.imag
        atomic_write_bytes(Path(path), json.dumps(header).encode() + b"\n" + payload.tobytes())


def _symbol(grid: Grid) -> np.ndarray:
    return grid.xi_axis() ** 4


def _linear_states(u0: GridFunction, times: np.ndarray) -> np.ndarray:
    spec = _fft.fftn(u0.samples)
    sym = _symbol(u0.grid)
    out = _fft.ifftn(np.exp(1j * times[:, None] * sym[None]) * spec[None], axes=(1,))
    out[times == 0] = u0.samples
    return out


def splitstep_solve(u0: GridFunction, cfg: SolverConfig, save_every: int = 1) -> Trajectory:
    """Strang splitting: half free step, full nonlinear phase rotation, half free step.

    The nonlinear sub-flow ``u -> u exp(i dt |u|^2)`` is exact pointwise; its
    increment is projected onto the retained (2/3-rule) modes.
    """
    if not u0.grid.compatible(cfg.grid):
        raise ValueError("initial data does not live on the configured grid")
    n = cfg.n_steps
    half = np.exp(0.5j * cfg.dt * _symbol(cfg.grid))
    mask = cfg.mask()
    g = cfg.nonlinearity
    u_hat = _fft.fftn(u0.samples)
    times, states = [0.0], [u0.samples.copy()]
    for step in range(1, n + 1):
        u_hat = half * u_hat
        if g != 0:
            u = _fft.ifftn(u_hat)
            inc = u * (np.exp(1j * g * cfg.dt * np.abs(u) ** 2) - 1.0)
            u_hat = u_hat + np.where(mask, _fft.fftn(inc), 0)
        u_hat = half * u_hat
        if step % save_every == 0 or step == n:
            u = _fft.ifftn(u_hat)
            if not np.all(np.isfinite(u)) or np.abs(u).max() > BLOWUP_LIMIT:
                raise NumericalFailure(f"blow-up guard tripped at t = {step * cfg.dt:g}")
            times.append(step * cfg.dt)
            states.append(u)
    times = np.asarray(times)
    return Trajectory(cfg.grid, times, np.asarray(states), _linear_states(u0, times),
                      {"scheme": "splitstep", "dt": cfg.dt})


def _interaction_integrals(f_hat: np.ndarray, times: np.ndarray, sym: np.ndarray) -> np.ndarray:
    """Cumulative trapezoid of ``S(-tau) f(tau)`` in Fourier space."""
    g = np.exp(-1j * times[:, None] * sym[None]) * f_hat
    dt = np.diff(times)[:, None]
    cum = np.zeros_like(g)
    cum[1:] = np.cumsum(0.5 * dt * (g[1:] + g[:-1]), axis=0)
    return cum


def duhamel(f_states: np.ndarray, times, grid: Grid) -> GridFunction:
    """``int_0^t S_4(t - tau) f(tau) dtau`` at ``t = times[-1]``.

    The integrand is rewritten as ``S_4(t) [S_4(-tau) f(tau)]`` and the bracket
    is integrated by the trapezoid rule, which is exact when ``f`` itself is a
    free solution.
    """
    times = np.asarray(times, dtype=float)
    f_states = np.asarray(f_states)
    if times.size == 0 or f_states.shape[0] != times.size:
        raise ValueError("need one state per quadrature node")
    if times.size == 1:
        return GridFunction(grid, np.zeros(grid.shape, dtype=complex), "duhamel")
    sym = _symbol(grid)
    f_hat = _fft.fftn(f_states, axes=(1,))
    cum = _interaction_integrals(f_hat, times, sym)
    out = _fft.ifftn(np.exp(1j * times[-1] * sym) * cum[-1])
    return GridFunction(grid, out, "duhamel")


def picard_solve(u0: GridFunction, cfg: SolverConfig) -> Trajectory:
    """Fixed point of ``u = S_4(t) u0 + i A(|u|^2 u)`` on the nodes ``0, dt, ..., T``."""
    if not u0.grid.compatible(cfg.grid):
        raise ValueError("initial data does not live on the configured grid")
    times = cfg.dt * np.arange(cfg.n_steps + 1)
    sym = _symbol(cfg.grid)
    mask = cfg.mask()
    lin = _linear_states(u0, times)
    prop = np.exp(1j * times[:, None] * sym[None])
    u = lin.copy()
    diffs, ratios = [], []
    bad = 0
    converged = False
    for it in range(cfg.picard_max_iters):
        nl_hat = _fft.fftn(cfg.nonlinearity * np.abs(u) ** 2 * u, axes=(1,))
        nl_hat = np.where(mask[None], nl_hat, 0)
        duh = _fft.ifftn(prop * _interaction_integrals(nl_hat, times, sym), axes=(1,))
        new = lin + 1j * duh
        diff = float(np.sqrt(np.sum(np.abs(new - u) ** 2, axis=1) * cfg.grid.dx).max())
        u = new
        if diffs:
            ratio = diff / diffs[-1] if diffs[-1] > 0 else 0.0
            ratios.append(ratio)
            bad = bad + 1 if ratio >= 1 else 0
            if bad >= 3:
                raise NumericalFailure(
                    f"Picard iteration does not contract: ratios {ratios[-3:]}")
        diffs.append(diff)
        if diff < cfg.picard_tol:
            converged = True
            break
    if not converged:
        raise NumericalFailure(f"Picard iteration did not reach tol after {len(diffs)} iterations")
    return Trajectory(cfg.grid, times, u, lin,
                      {"scheme": "picard", "iterations": len(diffs), "differences": diffs,
                       "ratios": ratios})


def solve(u0: GridFunction, cfg: SolverConfig) -> Trajectory:
    return splitstep_solve(u0, cfg) if cfg.scheme == "splitstep" else picard_solve(u0, cfg)


# ---------------------------------------------------------------- functionals


@dataclass(frozen=True)
class EnergyRow:
    M_v: float
    E_v: float
    E_tilde_v: float

    @property
    def A_v(self) -> float:
        return self.M_v + 1.0


def _l2sq(f: np.ndarray, dx: float) -> float:
    return float(np.sum(np.abs(f) ** 2) * dx)


def _l4q(f: np.ndarray, dx: float) -> float:
    return float(np.sum(np.abs(f) ** 4) * dx)


def _dxx(f: np.ndarray, grid: Grid) -> np.ndarray:
    return _fft.ifftn(-(grid.xi_axis() ** 2) * _fft.fftn(f))


def mass(u: np.ndarray, grid: Grid) -> float:
    return 0.5 * _l2sq(u, grid.dx)


def energy(u: np.ndarray, grid: Grid) -> float:
    """``(1/2)||u_xx||^2 + (1/4)||u||_4^4``, conserved by the flow."""
    return 0.5 * _l2sq(_dxx(u, grid), grid.dx) + 0.25 * _l4q(u, grid.dx)


def functionals(v: GridFunction, w: GridFunction) -> EnergyRow:
    """Mass, energy and modified energy of the nonlinear part ``v`` given ``w``."""
    if not v.grid.compatible(w.grid):
        raise ValueError("v and w must share a grid")
    g, dx = v.grid, v.grid.dx
    vxx = _l2sq(_dxx(v.samples, g), dx)
    M = 0.5 * _l2sq(v.samples, dx)
    E = 0.5 * vxx + 0.25 * _l4q(v.samples, dx)
    Et = 0.5 * vxx + 0.25 * _l4q(v.samples + w.samples, dx) - 0.25 * _l4q(w.samples, dx)
    return EnergyRow(M, E, Et)


@dataclass
class EnergyReport:
    t: np.ndarray
    M_u: np.ndarray
    E_u: np.ndarray
    M_v: np.ndarray
    E_v: np.ndarray
    E_tilde_v: np.ndarray

    @property
    def A_v(self) -> np.ndarray:
        return self.M_v + 1.0

    def monitored(self, C: float) -> np.ndarray:
        return self.E_tilde_v + 2.0 * C * self.A_v

    def mass_drift(self) -> float:
        return float(np.abs(self.M_u - self.M_u[0]).max() / self.M_u[0])

    def energy_drift(self) -> float:
        return float(np.abs(self.E_u - self.E_u[0]).max() / abs(self.E_u[0]))

    CSV_HEADER = ["t", "M_u", "E_u", "M_v", "E_v", "E_tilde_v", "monitored_quantity"]

    def csv_rows(self, C: Optional[float] = None) -> list:
        C = calibrate_gronwall_constant(self) if C is None else C
        Q = self.monitored(C)
        return [[float(a) for a in row] for row in
                zip(self.t, self.M_u, self.E_u, self.M_v, self.E_v, self.E_tilde_v, Q)]


def energy_report(traj: Trajectory) -> EnergyReport:
    g, dx = traj.grid, traj.grid.dx
    cols = {k: [] for k in ("M_u", "E_u", "M_v", "E_v", "E_tilde_v")}
    for u, w in zip(traj.states, traj.linear):
        cols["M_u"].append(mass(u, g))
        cols["E_u"].append(energy(u, g))
        row = functionals(GridFunction(g, u - w), GridFunction(g, w))
        cols["M_v"].append(row.M_v)
        cols["E_v"].append(row.E_v)
        cols["E_tilde_v"].append(row.E_tilde_v)
    return EnergyReport(traj.times.copy(), *(np.asarray(cols[k]) for k in
                                              ("M_u", "E_u", "M_v", "E_v", "E_tilde_v")))


# ---------------------------------------------------------------- Gronwall


@dataclass(frozen=True)
class GronwallVerdict:
    passed: bool
    rate: float
    max_slope: float
    C: float
    margin: float


def calibrate_gronwall_constant(report: EnergyReport) -> float:
    """Smallest-order constant ``C`` keeping ``E~_v + 2 C A_v`` positive.

    Twice the infimum needed for positivity; if that is zero but the modified
    energy touches zero, ``2C = 1`` fixes the normalisation ``Q(0) = 2C``.
    """
    need = float(np.max(-report.E_tilde_v / (2.0 * report.A_v)))
    C = 2.0 * max(0.0, need)
    if np.any(report.monitored(C) <= 0):
        C = max(C, 0.5)
    return C


def gronwall_monitor(report: EnergyReport, C: Optional[float] = None,
                     margin: float = 0.25) -> GronwallVerdict:
    """Check that ``log(E~_v + 2 C A_v)`` grows at most linearly in time.

    The fitted exponential rate is the least-squares slope of the log; the
    check fails when some discrete log-slope exceeds it by more than
    ``margin + 0.05 |rate|``.
    """
    C = calibrate_gronwall_constant(report) if C is None else C
    Q = report.monitored(C)
    if np.any(Q <= 0) or not np.all(np.isfinite(Q)):
        raise NumericalFailure("monitored quantity is not positive after calibration")
    t = report.t
    logQ = np.log(Q)
    X = np.column_stack([t, np.ones_like(t)])
    rate = float(np.linalg.lstsq(X, logQ, rcond=None)[0][0])
    slopes = np.diff(logQ) / np.diff(t)
    max_slope = float(slopes.max()) if slopes.size else 0.0
    ok = max_slope <= rate + margin + 0.05 * abs(rate)
    return GronwallVerdict(bool(ok), rate, max_slope, C, margin)


def synthetic_report(times, growth) -> EnergyReport:
    """Report with ``v`` of zero mass whose modified energy is ``growth(t)``."""
    t = np.asarray(times, dtype=float)
    z = np.zeros_like(t)
    g = np.asarray([growth(s) for s in t], dtype=float)
    return EnergyReport(t, z + 1.0, z + 1.0, z, g, g)


# ---------------------------------------------------------------- calibration


def calibrate_constants(u0: GridFunction, p: float, s: float, T: float, n_t: int = 64) -> dict:
    """Measured stand-ins for the constants of the local theory on sample data.

    ``M`` is ``||S_4(t) u0||_{L^a_t L^p_x} / ||u0||_D`` over ``[0, T]``; ``C`` is
    the ratio ``||A(|u|^2 u)||_X / (T^(1/4) ||u||_X^3)`` along the free flow.
    """
    pair = strichartz_pair(p)
    a = float(pair.a)
    nD = data_norm(u0, p, s)
    times = T * (np.arange(n_t) + 0.5) / n_t
    lin = _linear_states(u0, times)
    dx = u0.grid.dx

    def x_norm(states):
        lp = (np.sum(np.abs(states) ** p, axis=1) * dx) ** (1 / p)
        return float((np.sum(lp**a) * T / n_t) ** (1 / a))

    X_lin = x_norm(lin)
    nl = np.abs(lin) ** 2 * lin
    grid_t = np.concatenate([[0.0], times])
    f = np.concatenate([(np.abs(u0.samples) ** 2 * u0.samples)[None], nl])
    sym = _symbol(u0.grid)
    duh = _fft.ifftn(np.exp(1j * grid_t[:, None] * sym[None])
                     * _interaction_integrals(_fft.fftn(f, axes=(1,)), grid_t, sym), axes=(1,))
    X_duh = x_norm(duh[1:])
    return {"M": X_lin / nD, "C": X_duh / (T**0.25 * X_lin**3), "data_norm": nD,
            "strichartz_a": a}


def order_of_convergence(dts, errors) -> float:
    return fit_scaling_exponent(dts, errors).slope
