"""Periodic space-time grids and sampled fields.

Everything in this package lives on a uniform rectangular lattice over the
torus (R/l_t Z) x prod_i (R/l_x[i] Z).  Index 0 of every axis carries
coordinate 0 and coordinates wrap to the symmetric cell [-L/2, L/2), i.e.
``L * fftfreq(n)``, so centered profiles sample naturally and Fourier
multipliers act exactly.  Quadrature is the rectangle rule with cell measure
dt * prod h_i; the discrete time transform carries a 1/sqrt(2*pi) factor so
that Parseval holds with mode weight 2*pi/l_t.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field
from typing import Sequence

import numpy as np

__all__ = [
    "DEFAULT_SAMPLE_CAP",
    "Grid",
    "Field",
    "VectorField",
    "TimeSpectrum",
    "make_grid",
    "field_from_array",
    "zeros",
    "transform_time",
    "inverse_transform_time",
    "lp_norm",
    "inner",
    "time_window_lp_norm",
]

DEFAULT_SAMPLE_CAP = 2**24


def _axis_coordinates(n: int, period: float) -> np.ndarray:
    # m*dx wrapped to [-period/2, period/2); identical to period*fftfreq(n).
    return period * np.fft.fftfreq(n)


@dataclass(frozen=True)
class Grid:
    """Uniform periodic lattice: one time axis followed by d spatial axes."""

    d: int
    n_t: int
    n_x: tuple[int, ...]
    l_t: float
    l_x: tuple[float, ...]

    def __post_init__(self) -> None:
        if not 1 <= self.d <= 3:
            raise ValueError(f"d must be 1, 2 or 3, got {self.d}")
        if len(self.n_x) != self.d or len(self.l_x) != self.d:
            raise ValueError("n_x and l_x must have exactly d entries")
        for label, n in [("n_t", self.n_t)] + [
            (f"n_x[{i}]", n) for i, n in enumerate(self.n_x)
        ]:
            if n % 2 != 0:
                raise ValueError(f"{label} must be even, got {n}")
            if n < 8:
                raise ValueError(f"{label} must be at least 8, got {n}")
        for label, period in [("l_t", self.l_t)] + [
            (f"l_x[{i}]", p) for i, p in enumerate(self.l_x)
        ]:
            if not (np.isfinite(period) and period > 0):
                raise ValueError(f"{label} must be a positive finite period, got {period}")

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n_t, *self.n_x)

    @property
    def dt(self) -> float:
        return self.l_t / self.n_t

    @property
    def h(self) -> tuple[float, ...]:
        return tuple(l / n for l, n in zip(self.l_x, self.n_x))

    @property
    def cell_measure(self) -> float:
        return self.dt * float(np.prod(self.h))

    @property
    def sample_count(self) -> int:
        return int(np.prod(self.shape))

    def time_coordinates(self) -> np.ndarray:
        """Wrapped time coordinates, shape (n_t,)."""
        return _axis_coordinates(self.n_t, self.l_t)

    def space_coordinates(self, axis: int) -> np.ndarray:
        """Wrapped coordinates of spatial axis ``axis`` (0-based), shape (n_x[axis],)."""
        return _axis_coordinates(self.n_x[axis], self.l_x[axis])

    def coordinate_mesh(self) -> list[np.ndarray]:
        """Open (broadcastable) mesh [t, x1, ..., xd]."""
        axes = [self.time_coordinates()] + [
            self.space_coordinates(i) for i in range(self.d)
        ]
        mesh = []
        for pos, arr in enumerate(axes):
            view = [1] * (self.d + 1)
            view[pos] = arr.shape[0]
            mesh.append(arr.reshape(view))
        return mesh


def make_grid(
    d: int,
    n_t: int,
    n_x: int | Sequence[int],
    l_t: float,
    l_x: float | Sequence[float],
    sample_cap: int = DEFAULT_SAMPLE_CAP,
) -> Grid:
    """Build a validated Grid; scalar n_x / l_x are broadcast over the d axes.

    Sample counts must be even and at least 8 per axis (powers of two are
    recommended for FFT speed), and the total count may not exceed
    ``sample_cap`` (default 2**24).
    """
    nx = tuple([int(n_x)] * d) if np.isscalar(n_x) else tuple(int(n) for n in n_x)
    lx = tuple([float(l_x)] * d) if np.isscalar(l_x) else tuple(float(l) for l in l_x)
    grid = Grid(d=int(d), n_t=int(n_t), n_x=nx, l_t=float(l_t), l_x=lx)
    if grid.sample_count > sample_cap:
        raise ValueError(
            f"total sample count {grid.sample_count} exceeds cap {sample_cap}"
        )
    return grid


def _freeze(a: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(a)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class Field:
    """Real scalar samples over a Grid.  Immutable once constructed."""

    grid: Grid
    data: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.shape != self.grid.shape:
            raise ValueError(
                f"field shape {arr.shape} does not match grid shape {self.grid.shape}"
            )
        if not np.all(np.isfinite(arr)):
            raise ValueError("field entries must be finite")
        object.__setattr__(self, "data", _freeze(arr))


def field_from_array(grid: Grid, data: np.ndarray) -> Field:
    return Field(grid, data)


def zeros(grid: Grid) -> Field:
    return Field(grid, np.zeros(grid.shape))


@dataclass(frozen=True)
class VectorField:
    """d spatial components, each a Field on one shared grid."""

    components: tuple[Field, ...]

    def __post_init__(self) -> None:
        if not self.components:
            raise ValueError("vector field needs at least one component")
        grid = self.components[0].grid
        if any(c.grid != grid for c in self.components):
            raise ValueError("vector field components must share one grid")
        if len(self.components) != grid.d:
            raise ValueError(
                f"expected {grid.d} components, got {len(self.components)}"
            )

    @property
    def grid(self) -> Grid:
        return self.components[0].grid

    def stacked(self) -> np.ndarray:
        """Component-major array of shape (d, n_t, n_x...)."""
        return np.stack([c.data for c in self.components])


@dataclass(frozen=True)
class TimeSpectrum:
    """Complex coefficients per time mode and spatial sample.

    Modes are stored in FFT order; ``modes[j]`` is the integer k of slot j,
    covering k in {-n_t/2, ..., n_t/2 - 1}.  The forward transform carries a
    factor dt/sqrt(2*pi) so that sum_k |c_k|^2 * (2*pi/l_t) reproduces the
    squared L2 norm in time.
    """

    grid: Grid
    data: np.ndarray
    modes: np.ndarray = dataclass_field(repr=False, default=None)

    def __post_init__(self) -> None:
        arr = np.asarray(self.data, dtype=np.complex128)
        if arr.shape != self.grid.shape:
            raise ValueError(
                f"spectrum shape {arr.shape} does not match grid shape {self.grid.shape}"
            )
        object.__setattr__(self, "data", _freeze(arr))
        modes = np.rint(np.fft.fftfreq(self.grid.n_t) * self.grid.n_t).astype(int)
        object.__setattr__(self, "modes", _freeze(modes))


def transform_time(field: Field) -> TimeSpectrum:
    """Discrete time transform with the symmetric 1/sqrt(2*pi) convention."""
    grid = field.grid
    coeff = np.fft.fft(field.data, axis=0) * (grid.dt / np.sqrt(2.0 * np.pi))
    return TimeSpectrum(grid=grid, data=coeff)


def inverse_transform_time(spectrum: TimeSpectrum) -> Field:
    """Invert transform_time.  The spectrum is expected Hermitian in k; the
    reconstruction keeps the real part."""
    grid = spectrum.grid
    back = np.fft.ifft(
        spectrum.data * (np.sqrt(2.0 * np.pi) / grid.dt), axis=0
    )
    return Field(grid, back.real)


def lp_norm(field: Field, p: float) -> float:
    """Rectangle-rule L_p norm over the full space-time cell; p may be inf."""
    if p == np.inf:
        return float(np.max(np.abs(field.data)))
    if p < 1:
        raise ValueError(f"p must satisfy p >= 1, got {p}")
    total = np.sum(np.abs(field.data) ** p) * field.grid.cell_measure
    return float(total ** (1.0 / p))


def inner(a: Field, b: Field) -> float:
    """Rectangle-rule L2 pairing of two fields on the same grid."""
    if a.grid != b.grid:
        raise ValueError("inner product requires fields on the same grid")
    return float(np.sum(a.data * b.data) * a.grid.cell_measure)


def time_window_lp_norm(field: Field, half_width: float, p: float) -> float:
    """L_p norm restricted to wrapped times |t| < half_width (full window
    when half_width >= l_t/2)."""
    grid = field.grid
    if half_width <= 0:
        raise ValueError("half_width must be positive")
    if half_width >= 0.5 * grid.l_t:
        mask = np.ones(grid.n_t, dtype=bool)
    else:
        mask = np.abs(grid.time_coordinates()) < half_width
    sub = field.data[mask]
    if p == np.inf:
        return float(np.max(np.abs(sub)))
    if p < 1:
        raise ValueError(f"p must satisfy p >= 1, got {p}")
    return float((np.sum(np.abs(sub) ** p) * grid.cell_measure) ** (1.0 / p))
