"""Uniform periodic grids and the complex-valued grid functions living on them.

A :class:`Grid` models the box ``[-L/2, L/2)^d`` with ``N`` points per axis.
Its discrete frequencies are ``carrier + 2*pi*fftfreq(N, L/N)`` per axis, so a
grid with a nonzero carrier describes functions of the form
``exp(i carrier.x) g(x)`` with ``g`` sampled on the box.  All norms only see
``|g|``, which is what lets the experiments work in a frame moving with a
high-frequency packet instead of on a huge lab-frame grid.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Grid:
    d: int
    N: int
    L: float
    carrier: tuple = ()

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("dimension must be positive")
        if not _is_power_of_two(self.N):
            raise ValueError(f"N={self.N} is not a power of two")
        if not self.L > 0:
            raise ValueError("box length must be positive")
        c = tuple(float(v) for v in self.carrier) if self.carrier else (0.0,) * self.d
        if len(c) != self.d:
            raise ValueError("carrier must have one entry per axis")
        object.__setattr__(self, "carrier", c)

    @property
    def shape(self) -> tuple:
        return (self.N,) * self.d

    @property
    def dx(self) -> float:
        return self.L / self.N

    @property
    def dxi(self) -> float:
        return 2 * np.pi / self.L

    @property
    def band(self) -> float:
        """Half-width of the resolved frequency band around the carrier."""
        return np.pi * self.N / self.L

    @property
    def cell_volume(self) -> float:
        return self.dx ** self.d

    def x_axis(self) -> np.ndarray:
        return -self.L / 2 + self.dx * np.arange(self.N)

    def xi_axis(self, axis: int = 0) -> np.ndarray:
        return self.carrier[axis] + 2 * np.pi * np.fft.fftfreq(self.N, self.dx)

    def xi_mesh(self) -> list[np.ndarray]:
        axes = [self.xi_axis(i) for i in range(self.d)]
        return np.meshgrid(*axes, indexing="ij")

    def x_mesh(self) -> list[np.ndarray]:
        ax = self.x_axis()
        return np.meshgrid(*([ax] * self.d), indexing="ij")

    def xi_norm(self) -> np.ndarray:
        return np.sqrt(sum(m**2 for m in self.xi_mesh()))

    def rescaled(self, lam: float) -> "Grid":
        """Grid on which the same samples represent ``f(lam x)``."""
        c = tuple(lam * v for v in self.carrier)
        return Grid(self.d, self.N, self.L / lam, c)

    def with_carrier(self, carrier: Sequence[float]) -> "Grid":
        return Grid(self.d, self.N, self.L, tuple(carrier))

    def compatible(self, other: "Grid") -> bool:
        return (
            self.d == other.d
            and self.N == other.N
            and np.isclose(self.L, other.L, rtol=1e-14, atol=0)
            and np.allclose(self.carrier, other.carrier, rtol=1e-14, atol=0)
        )


@dataclass
class GridFunction:
    grid: Grid
    samples: np.ndarray
    tag: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=complex)
        if self.samples.shape != self.grid.shape:
            raise ValueError(
                f"samples shape {self.samples.shape} does not match grid {self.grid.shape}"
            )

    @property
    def d(self) -> int:
        return self.grid.d

    def spectrum(self) -> np.ndarray:
        """Riemann sum of ``int g(x) exp(-i eta x) dx`` at the FFT frequencies.

        Phases are taken relative to ``x = 0`` (array index ``N/2``), so a
        real even spectrum gives a function centred in the box.
        """
        return np.fft.fftn(np.fft.ifftshift(self.samples)) * self.grid.cell_volume

    @classmethod
    def from_spectrum(cls, grid: Grid, spec: np.ndarray, tag: str = "") -> "GridFunction":
        return cls(grid, np.fft.fftshift(np.fft.ifftn(spec)) / grid.cell_volume, tag)

    def with_samples(self, samples: np.ndarray, tag: Optional[str] = None) -> "GridFunction":
        return GridFunction(self.grid, samples, self.tag if tag is None else tag, dict(self.meta))

    def rescaled(self, lam: float) -> "GridFunction":
        return GridFunction(self.grid.rescaled(lam), self.samples.copy(), self.tag, dict(self.meta))

    def boundary_ratio(self) -> float:
        """max |f| on the outermost layer of the box relative to max |f|."""
        a = np.abs(self.samples)
        peak = a.max()
        if peak == 0:
            return 0.0
        edge = 0.0
        for ax in range(self.d):
            edge = max(edge, np.take(a, 0, axis=ax).max(), np.take(a, -1, axis=ax).max())
        return float(edge / peak)

    def check_decay(self, tol: float = 1e-10) -> None:
        r = self.boundary_ratio()
        if r >= tol:
            raise ValueError(f"boundary decay violated: edge/peak = {r:.3e} >= {tol:g}")

    def __add__(self, other: "GridFunction") -> "GridFunction":
        if not self.grid.compatible(other.grid):
            raise ValueError("grid mismatch")
        return self.with_samples(self.samples + other.samples)

    def __sub__(self, other: "GridFunction") -> "GridFunction":
        if not self.grid.compatible(other.grid):
            raise ValueError("grid mismatch")
        return self.with_samples(self.samples - other.samples)

    def scaled(self, c: complex) -> "GridFunction":
        return self.with_samples(c * self.samples)


def sample(grid: Grid, fn, tag: str = "", check_decay: bool = False) -> GridFunction:
    """Sample a callable ``fn(*x_mesh)`` on the grid."""
    gf = GridFunction(grid, fn(*grid.x_mesh()), tag)
    if check_decay:
        gf.check_decay()
    return gf


def random_bandlimited(
    grid: Grid, rng: np.random.Generator, fraction: float = 0.5, tag: str = "random"
) -> GridFunction:
    """Random function whose spectrum fills ``|xi - carrier|_inf <= fraction * band``."""
    spec = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    mesh = grid.xi_mesh()
    mask = np.ones(grid.shape, dtype=bool)
    for ax, m in enumerate(mesh):
        mask &= np.abs(m - grid.carrier[ax]) <= fraction * grid.band
    spec = np.where(mask, spec, 0)
    return GridFunction.from_spectrum(grid, spec, tag)


# binary grid-function files: JSON header line, then interleaved re/im float64 LE

def save_gridfunction(gf: GridFunction, path) -> None:
    from .io import atomic_write_bytes

    header = {
        "d": gf.d,
        "N": gf.grid.N,
        "L": gf.grid.L,
        "carrier": list(gf.grid.carrier),
        "tag": gf.tag,
    }
    payload = np.empty(gf.samples.size * 2, dtype="<f8")
    flat = gf.samples.ravel(order="C")
    payload[0::2] = flat.real
    payload[1::2] = flat.imag
    blob = json.dumps(header, sort_keys=True).encode() + b"\n" + payload.tobytes()
    atomic_write_bytes(Path(path), blob)


def load_gridfunction(path) -> GridFunction:
    raw = Path(path).read_bytes()
    nl = raw.index(b"\n")
    header = json.loads(raw[:nl].decode())
    grid = Grid(int(header["d"]), int(header["N"]), float(header["L"]),
                tuple(header.get("carrier") or ()))
    data = np.frombuffer(raw[nl + 1:], dtype="<f8")
    if data.size != 2 * grid.N**grid.d:
        raise ValueError("payload size does not match header")
    samples = (data[0::2] + 1j * data[1::2]).reshape(grid.shape)
    return GridFunction(grid, samples, header.get("tag", ""))


__all__ = [
    "Grid",
    "GridFunction",
    "sample",
    "random_bandlimited",
    "save_gridfunction",
    "load_gridfunction",
]
