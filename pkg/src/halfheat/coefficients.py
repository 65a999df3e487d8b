"""Coefficient matrices for the divergence-form operator.

A coefficient field is a d x d matrix per space-time sample.  Admissibility
means the symmetric part satisfies delta*|xi|^2 <= xi^T a xi pointwise and
every entry is bounded by 1/delta.  The generator is stricter: it keeps the
pointwise operator norm of the matrix below 1/delta (symmetric eigenvalues
budgeted against the skew part), which is what makes the coercivity
constant of the twisted pairing come out exactly delta^2/2.

All generator kinds are functions of physical coordinates, so the same seed
reproduces the same physical coefficient field on refined grids.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dataclass_field

import numpy as np
from scipy.ndimage import uniform_filter1d

from .grid import Field, Grid

__all__ = [
    "Ellipticity",
    "Coefficients",
    "AssumptionReport",
    "identity_coefficients",
    "coefficients_from_matrix",
    "generate_coefficients",
    "check_assumption_time",
    "check_assumption_x1",
    "freeze_time",
    "freeze_x1_piecewise",
]

_TAGS = ("constant", "time_measurable", "x1_measurable", "general")


@dataclass(frozen=True)
class Ellipticity:
    """Ellipticity parameter delta in (0, 1]."""

    delta: float

    def __post_init__(self) -> None:
        if not (0.0 < self.delta <= 1.0):
            raise ValueError(f"delta must lie in (0, 1], got {self.delta}")


def _min_symmetric_eig(data: np.ndarray) -> float:
    """Smallest eigenvalue of the symmetric part over all samples."""
    d = data.shape[0]
    if d == 1:
        return float(data.min())
    sym = 0.5 * (data + np.swapaxes(data, 0, 1))
    if d == 2:
        half_trace = 0.5 * (sym[0, 0] + sym[1, 1])
        radius = np.sqrt(0.25 * (sym[0, 0] - sym[1, 1]) ** 2 + sym[0, 1] ** 2)
        return float((half_trace - radius).min())
    flat = np.moveaxis(sym.reshape(d, d, -1), -1, 0)
    return float(np.linalg.eigvalsh(flat)[:, 0].min())


@dataclass(frozen=True)
class Coefficients:
    """Validated d x d coefficient matrices over a grid."""

    grid: Grid
    data: np.ndarray
    tag: str
    ellipticity: Ellipticity
    generator: dict | None = dataclass_field(default=None, compare=False)

    def __post_init__(self) -> None:
        d = self.grid.d
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.shape != (d, d, *self.grid.shape):
            raise ValueError(
                f"coefficient array must have shape (d, d, n_t, n_x...), got {arr.shape}"
            )
        if not np.all(np.isfinite(arr)):
            raise ValueError("coefficient entries must be finite")
        if self.tag not in _TAGS:
            raise ValueError(f"tag must be one of {_TAGS}, got {self.tag!r}")
        delta = self.ellipticity.delta
        bound = 1.0 / delta + 1e-10
        worst = float(np.max(np.abs(arr)))
        if worst > bound:
            raise ValueError(
                f"entry bound violated: max |a_ij| = {worst} exceeds 1/delta = {1.0 / delta}"
            )
        min_eig = _min_symmetric_eig(arr)
        if min_eig < delta - 1e-10:
            raise ValueError(
                f"ellipticity violated: min symmetric eigenvalue {min_eig} < delta = {delta}"
            )
        self._check_tag_consistency(arr)
        arr = np.ascontiguousarray(arr)
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    def _check_tag_consistency(self, arr: np.ndarray) -> None:
        # variation along axes the tag forbids must be at sampling noise level
        tol = 1e-12 * max(1.0, float(np.max(np.abs(arr))))
        sample_axes = tuple(range(2, 2 + self.grid.d + 1))
        if self.tag == "constant":
            forbidden = sample_axes
        elif self.tag == "time_measurable":
            forbidden = sample_axes[1:]
        elif self.tag == "x1_measurable":
            forbidden = (sample_axes[0],) + sample_axes[2:]
        else:
            return
        for ax in forbidden:
            spread = float(np.max(np.ptp(arr, axis=ax)))
            if spread > tol:
                raise ValueError(
                    f"tag {self.tag!r} inconsistent: variation {spread} along sample axis {ax - 2}"
                )

    def constant_matrix(self) -> np.ndarray:
        """The (d, d) matrix of a constant-tagged field."""
        if self.tag != "constant":
            raise ValueError(f"constant_matrix needs tag 'constant', got {self.tag!r}")
        idx = (slice(None), slice(None)) + (0,) * (self.grid.d + 1)
        return np.array(self.data[idx])

    def mean_matrix(self) -> np.ndarray:
        """Space-time mean per entry, shape (d, d)."""
        axes = tuple(range(2, 2 + self.grid.d + 1))
        return self.data.mean(axis=axes)


def identity_coefficients(grid: Grid, delta: float = 1.0) -> Coefficients:
    d = grid.d
    data = np.zeros((d, d, *grid.shape))
    for i in range(d):
        data[i, i] = 1.0
    return Coefficients(
        grid=grid,
        data=data,
        tag="constant",
        ellipticity=Ellipticity(delta),
        generator={"kind": "identity"},
    )


def coefficients_from_matrix(
    grid: Grid, matrix: np.ndarray, delta: float, tag: str = "constant"
) -> Coefficients:
    matrix = np.asarray(matrix, dtype=np.float64)
    d = grid.d
    if matrix.shape != (d, d):
        raise ValueError(f"matrix must be ({d}, {d}), got {matrix.shape}")
    data = np.broadcast_to(
        matrix.reshape(d, d, *([1] * (d + 1))), (d, d, *grid.shape)
    ).copy()
    return Coefficients(
        grid=grid, data=data, tag=tag, ellipticity=Ellipticity(delta)
    )


def _admissible_matrix(rng: np.random.Generator, d: int, delta: float) -> np.ndarray:
    """Random matrix with symmetric eigenvalues in [delta, 0.8/delta] and a
    skew part inside the remaining operator-norm budget up to 1/delta."""
    hi = max(delta, 0.8 / delta)
    eigs = rng.uniform(delta, hi, size=d)
    if d == 1:
        return np.array([[eigs[0]]])
    q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    sym = (q * eigs) @ q.T
    sym = 0.5 * (sym + sym.T)
    budget = 1.0 / delta - float(eigs.max())
    if budget > 0:
        scale = budget / d  # Frobenius norm then bounds the spectral norm
        s = rng.uniform(-scale, scale, size=(d, d))
        return sym + 0.5 * (s - s.T)
    return sym


def _unwrapped_axis(n: int, period: float) -> np.ndarray:
    # m*dx in [0, period): the piecewise generators cut along this chart
    return period * np.arange(n) / n


def _smooth_modulation(
    rng: np.random.Generator, grid: Grid, mode_count: int = 6, max_mode: int = 3
) -> np.ndarray:
    """Band-limited smooth scalar with sup norm <= 1, resolution independent."""
    mesh = grid.coordinate_mesh()
    periods = [grid.l_t, *grid.l_x]
    coeffs = rng.standard_normal(mode_count)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=mode_count)
    modes = rng.integers(-max_mode, max_mode + 1, size=(mode_count, grid.d + 1))
    total = np.zeros(grid.shape)
    for c, phi, k in zip(coeffs, phases, modes):
        phase = phi + sum(
            2.0 * np.pi * k[ax] * mesh[ax] / periods[ax] for ax in range(grid.d + 1)
        )
        total = total + c * np.cos(phase)
    return total / np.sum(np.abs(coeffs))


def generate_coefficients(
    kind: str,
    delta: float,
    seed: int,
    grid: Grid,
    roughness_scale: float | None = None,
    cell_size: float | None = None,
) -> Coefficients:
    """Deterministic coefficient fields of the requested structure.

    kind and the meaning of roughness_scale:

    * ``constant``: one admissible matrix (roughness_scale unused)
    * ``time_piecewise``: number of jumps in time (default 4)
    * ``x1_piecewise``: number of jumps along x1 (default 4)
    * ``checkerboard``: oscillation amplitude epsilon; the pattern is
      (1 + eps*sign) * identity with sign alternating on cells of physical
      size ``cell_size`` (default: smallest period / 8) along every axis
    * ``smooth``: modulation amplitude (default 0.5*(1-delta)) applied to a
      band-limited smooth scalar times the identity
    """
    ell = Ellipticity(delta)
    rng = np.random.default_rng(seed)
    d = grid.d
    meta: dict = {"kind": kind, "delta": delta, "seed": int(seed)}

    if kind == "constant":
        matrix = _admissible_matrix(rng, d, delta)
        out = coefficients_from_matrix(grid, matrix, delta, tag="constant")
        return Coefficients(
            grid=grid, data=out.data, tag="constant", ellipticity=ell, generator=meta
        )

    if kind in ("time_piecewise", "x1_piecewise"):
        n_jumps = int(roughness_scale) if roughness_scale is not None else 4
        if n_jumps < 1:
            raise ValueError(f"{kind} needs at least one jump, got {n_jumps}")
        meta["n_jumps"] = n_jumps
        along_time = kind == "time_piecewise"
        period = grid.l_t if along_time else grid.l_x[0]
        n_axis = grid.n_t if along_time else grid.n_x[0]
        cuts = np.sort(rng.uniform(0.0, period, size=n_jumps))
        mats = np.stack([_admissible_matrix(rng, d, delta) for _ in range(n_jumps)])
        coord = _unwrapped_axis(n_axis, period)
        region = np.searchsorted(cuts, coord, side="right") % n_jumps
        profile = mats[region]  # (n_axis, d, d)
        profile = np.moveaxis(profile, 0, -1)  # (d, d, n_axis)
        shape = [d, d] + [1] * (d + 1)
        shape[2 if along_time else 3] = n_axis
        data = np.broadcast_to(profile.reshape(shape), (d, d, *grid.shape)).copy()
        tag = "time_measurable" if along_time else "x1_measurable"
        return Coefficients(
            grid=grid, data=data, tag=tag, ellipticity=ell, generator=meta
        )

    if kind == "checkerboard":
        if roughness_scale is None:
            raise ValueError("checkerboard needs roughness_scale = epsilon")
        eps = float(roughness_scale)
        eps_max = 1.0 - delta
        if not 0.0 < eps <= eps_max:
            raise ValueError(
                f"checkerboard epsilon {eps} not admissible for delta={delta}; "
                f"maximal admissible epsilon is {eps_max}"
            )
        cell = (
            float(cell_size)
            if cell_size is not None
            else min(grid.l_t, *grid.l_x) / 8.0
        )
        if cell <= 0:
            raise ValueError("cell_size must be positive")
        meta.update(epsilon=eps, cell_size=cell)
        parity = np.zeros(grid.shape)
        axes = [(_unwrapped_axis(grid.n_t, grid.l_t), 0)] + [
            (_unwrapped_axis(grid.n_x[i], grid.l_x[i]), 1 + i) for i in range(d)
        ]
        for coord, pos in axes:
            view = [1] * (d + 1)
            view[pos] = coord.shape[0]
            parity = parity + np.floor(coord / cell).reshape(view)
        sign = np.where(np.mod(parity, 2) < 1, 1.0, -1.0)
        data = np.zeros((d, d, *grid.shape))
        for i in range(d):
            data[i, i] = 1.0 + eps * sign
        return Coefficients(
            grid=grid, data=data, tag="general", ellipticity=ell, generator=meta
        )

    if kind == "smooth":
        alpha = (
            float(roughness_scale)
            if roughness_scale is not None
            else 0.5 * (1.0 - delta)
        )
        if alpha < 0 or alpha > 1.0 - delta + 1e-12:
            raise ValueError(
                f"smooth amplitude {alpha} not admissible for delta={delta}; "
                f"maximal admissible amplitude is {1.0 - delta}"
            )
        meta["amplitude"] = alpha
        modulation = _smooth_modulation(rng, grid)
        data = np.zeros((d, d, *grid.shape))
        for i in range(d):
            data[i, i] = 1.0 + alpha * modulation
        return Coefficients(
            grid=grid, data=data, tag="general", ellipticity=ell, generator=meta
        )

    raise ValueError(
        "unknown kind {!r}; expected constant, time_piecewise, x1_piecewise, "
        "checkerboard or smooth".format(kind)
    )


# ---------------------------------------------------------------------------
# assumption checkers


@dataclass(frozen=True)
class AssumptionReport:
    """Scan summary for one mean-oscillation assumption."""

    kind: str
    r_zero: float
    gamma_estimate: float
    radii: tuple[float, ...]
    gamma_per_radius: tuple[float, ...]
    worst_radius: float
    worst_center: tuple[float, ...]
    centers_scanned: int
    scan_density: dict


def _ball_offsets(grid: Grid, radius: float) -> np.ndarray:
    """Integer index offsets (n_ball, d) of spatial samples with |y| < radius."""
    h = grid.h
    ranges = []
    for i in range(grid.d):
        m = int(math.floor(radius / h[i] + 1e-12))
        m = min(m, grid.n_x[i] // 2 - 1)
        ranges.append(np.arange(-m, m + 1))
    mesh = np.meshgrid(*ranges, indexing="ij")
    dist_sq = sum((mesh[i] * h[i]) ** 2 for i in range(grid.d))
    mask = dist_sq < radius**2
    return np.stack([m[mask] for m in mesh], axis=-1)


def _time_window_size(grid: Grid, radius: float) -> int:
    """Odd count of time samples with |s| < radius^2."""
    m = int(math.ceil(radius**2 / grid.dt - 1e-12))
    m = min(m, grid.n_t // 2)
    return max(1, 2 * m - 1)


def _scan_radii(grid: Grid, r_zero: float) -> list[float]:
    radii = []
    r = float(r_zero)
    while r >= 2.0 * max(grid.h) and r * r >= 2.0 * grid.dt:
        radii.append(r)
        r *= 0.5
    if not radii:
        raise ValueError(
            f"R0 = {r_zero} is below the grid resolution (needs >= 2 cells per axis)"
        )
    return radii


def _validate_r0(grid: Grid, r_zero: float) -> None:
    if r_zero <= 0:
        raise ValueError("R0 must be positive")
    if r_zero > min(grid.l_x) / 4.0:
        raise ValueError(
            f"R0 = {r_zero} exceeds min spatial period / 4 = {min(grid.l_x) / 4.0}"
        )
    if r_zero**2 > grid.l_t / 4.0:
        raise ValueError(
            f"R0^2 = {r_zero**2} exceeds l_t / 4 = {grid.l_t / 4.0}; cylinders must fit"
        )


def _spatial_centers(grid: Grid, radius: float) -> tuple[np.ndarray, tuple[int, ...]]:
    strides = tuple(
        max(1, int(round(radius / (2.0 * grid.h[i])))) for i in range(grid.d)
    )
    axes = [np.arange(0, grid.n_x[i], strides[i]) for i in range(grid.d)]
    mesh = np.meshgrid(*axes, indexing="ij")
    centers = np.stack([m.ravel() for m in mesh], axis=-1)
    return centers, strides


def check_assumption_time(coeffs: Coefficients, r_zero: float) -> AssumptionReport:
    """Worst mean oscillation of a_ij around its spatial ball average.

    Scans parabolic cylinders with dyadic radii {R0, R0/2, ...} down to the
    grid resolution, centered on a strided lattice; gamma_estimate is the
    maximum over entries, radii and centers of the cylinder mean of
    |a_ij(s, y) - mean_{B_r} a_ij(s, .)|.
    """
    grid = coeffs.grid
    _validate_r0(grid, r_zero)
    radii = _scan_radii(grid, r_zero)
    d = grid.d
    data = coeffs.data.reshape(d * d, grid.n_t, -1)  # flat spatial index
    n_space = data.shape[-1]
    space_shape = grid.n_x

    gamma_per_radius = []
    centers_total = 0
    density: dict = {}
    worst = (-1.0, radii[0], (0.0,) * (d + 1))
    for r in radii:
        offsets = _ball_offsets(grid, r)
        w = _time_window_size(grid, r)
        stride_t = max(1, int(round(r * r / (2.0 * grid.dt))))
        centers, strides = _spatial_centers(grid, r)
        density[f"r={r:g}"] = {
            "stride_t": stride_t,
            "stride_x": list(strides),
            "spatial_centers": int(centers.shape[0]),
        }
        level_max = -1.0
        for center in centers:
            idx = np.ravel_multi_index(
                tuple((center[i] + offsets[:, i]) % space_shape[i] for i in range(d)),
                space_shape,
            )
            ball = data[:, :, idx]  # (d*d, n_t, n_ball)
            bar = ball.mean(axis=-1, keepdims=True)
            dev = np.abs(ball - bar).mean(axis=-1)  # (d*d, n_t)
            windowed = uniform_filter1d(dev, size=w, axis=-1, mode="wrap")
            sampled = windowed[:, ::stride_t]
            flat = int(np.argmax(sampled))
            value = float(sampled.ravel()[flat])
            if value > level_max:
                level_max = value
            if value > worst[0]:
                t_idx = (flat % sampled.shape[1]) * stride_t
                phys = (float(grid.time_coordinates()[t_idx]),) + tuple(
                    float(grid.space_coordinates(i)[center[i]]) for i in range(d)
                )
                worst = (value, r, phys)
            centers_total += sampled.shape[1]
        gamma_per_radius.append(level_max)

    return AssumptionReport(
        kind="time",
        r_zero=float(r_zero),
        gamma_estimate=float(max(gamma_per_radius)),
        radii=tuple(radii),
        gamma_per_radius=tuple(gamma_per_radius),
        worst_radius=float(worst[1]),
        worst_center=worst[2],
        centers_scanned=centers_total,
        scan_density=density,
    )


def _prime_ball_offsets(grid: Grid, radius: float) -> np.ndarray:
    """Index offsets over the x' axes (axes 2..d) with |y'| < radius; for
    d = 1 the single empty offset."""
    if grid.d == 1:
        return np.zeros((1, 0), dtype=int)
    h = grid.h[1:]
    ranges = []
    for i, hi in enumerate(h):
        m = int(math.floor(radius / hi + 1e-12))
        m = min(m, grid.n_x[1 + i] // 2 - 1)
        ranges.append(np.arange(-m, m + 1))
    mesh = np.meshgrid(*ranges, indexing="ij")
    dist_sq = sum((mesh[i] * h[i]) ** 2 for i in range(len(h)))
    mask = dist_sq < radius**2
    return np.stack([m[mask] for m in mesh], axis=-1)


def check_assumption_x1(coeffs: Coefficients, r_zero: float) -> AssumptionReport:
    """Worst mean oscillation of a_ij around its x1-slice average.

    The reference profile for a cylinder centered at (t, x) depends on y1
    only: the average over (t - r^2, t + r^2) x B'_r(x') at frozen y1 (the
    time interval alone when d = 1).
    """
    grid = coeffs.grid
    _validate_r0(grid, r_zero)
    radii = _scan_radii(grid, r_zero)
    d = grid.d
    n1 = grid.n_x[0]
    dd = d * d
    # flatten x' axes to one trailing index
    data = coeffs.data.reshape(dd, grid.n_t, n1, -1)
    prime_shape = grid.n_x[1:]

    gamma_per_radius = []
    centers_total = 0
    density: dict = {}
    worst = (-1.0, radii[0], (0.0,) * (d + 1))
    for r in radii:
        offsets = _ball_offsets(grid, r)  # full d-ball
        prime_offsets = _prime_ball_offsets(grid, r)
        w = _time_window_size(grid, r)
        stride_t = max(1, int(round(r * r / (2.0 * grid.dt))))
        t_centers = np.arange(0, grid.n_t, stride_t)
        centers, strides = _spatial_centers(grid, r)
        density[f"r={r:g}"] = {
            "stride_t": stride_t,
            "stride_x": list(strides),
            "spatial_centers": int(centers.shape[0]),
        }
        half_w = (w - 1) // 2
        t_windows = (t_centers[:, None] + np.arange(-half_w, half_w + 1)) % grid.n_t
        level_max = -1.0
        for center in centers:
            if d == 1:
                slab = data[:, :, :, 0]  # (dd, n_t, n1)
            else:
                pidx = np.ravel_multi_index(
                    tuple(
                        (center[1 + i] + prime_offsets[:, i]) % prime_shape[i]
                        for i in range(d - 1)
                    ),
                    prime_shape,
                )
                slab = data[:, :, :, pidx].mean(axis=-1)  # mean over B'
            # reference profile per time center: window-mean of slab
            profile = uniform_filter1d(slab, size=w, axis=1, mode="wrap")
            ball_y1 = (center[0] + offsets[:, 0]) % n1
            if d == 1:
                cyl = data[:, :, ball_y1, 0]  # (dd, n_t, n_ball)
            else:
                ball_prime = np.ravel_multi_index(
                    tuple(
                        (center[1 + i] + offsets[:, 1 + i]) % prime_shape[i]
                        for i in range(d - 1)
                    ),
                    prime_shape,
                )
                cyl = data[:, :, ball_y1, ball_prime]  # (dd, n_t, n_ball)
            for ci, tc in enumerate(t_centers):
                rows = t_windows[ci]
                ref = profile[:, tc, :][:, ball_y1]  # (dd, n_ball)
                dev = np.abs(cyl[:, rows, :] - ref[:, None, :]).mean(axis=(1, 2))
                value = float(dev.max())
                centers_total += 1
                level_max = max(level_max, value)
                if value > worst[0]:
                    phys = (float(grid.time_coordinates()[tc]),) + tuple(
                        float(grid.space_coordinates(i)[center[i]]) for i in range(d)
                    )
                    worst = (value, r, phys)
        gamma_per_radius.append(level_max)

    return AssumptionReport(
        kind="x1",
        r_zero=float(r_zero),
        gamma_estimate=float(max(gamma_per_radius)),
        radii=tuple(radii),
        gamma_per_radius=tuple(gamma_per_radius),
        worst_radius=float(worst[1]),
        worst_center=worst[2],
        centers_scanned=centers_total,
        scan_density=density,
    )


def freeze_time(
    coeffs: Coefficients, center: tuple[float, ...], radius: float
) -> Coefficients:
    """Replace a by its spatial average over the ball B_radius(center),
    yielding a purely time-measurable field."""
    grid = coeffs.grid
    if radius <= 0 or radius > min(grid.l_x) / 2.0:
        raise ValueError(f"ball radius {radius} does not fit inside the cell")
    if len(center) != grid.d:
        raise ValueError(f"center needs {grid.d} spatial components")
    offsets = _ball_offsets(grid, radius)
    center_idx = [
        int(round(center[i] / grid.h[i])) % grid.n_x[i] for i in range(grid.d)
    ]
    idx = np.ravel_multi_index(
        tuple(
            (center_idx[i] + offsets[:, i]) % grid.n_x[i] for i in range(grid.d)
        ),
        grid.n_x,
    )
    d = grid.d
    flat = coeffs.data.reshape(d, d, grid.n_t, -1)
    profile = flat[:, :, :, idx].mean(axis=-1)  # (d, d, n_t)
    data = np.broadcast_to(
        profile.reshape(d, d, grid.n_t, *([1] * d)), (d, d, *grid.shape)
    ).copy()
    return Coefficients(
        grid=grid,
        data=data,
        tag="time_measurable",
        ellipticity=coeffs.ellipticity,
        generator={"kind": "frozen_time", "radius": radius},
    )


def freeze_x1_piecewise(
    coeffs: Coefficients,
    radius: float,
    t_zero: float = 0.0,
    x_prime_center: tuple[float, ...] | None = None,
) -> Coefficients:
    """Tile time by slabs of thickness 2*radius^2 anchored at t_zero and
    replace a on slab k by the x1 profile averaged over the slab's time
    window and the x' ball of the same radius (time window alone if d = 1)."""
    grid = coeffs.grid
    if radius <= 0:
        raise ValueError("radius must be positive")
    slab = 2.0 * radius**2
    if slab >= grid.l_t:
        raise ValueError(
            f"slab thickness 2*R^2 = {slab} must be smaller than l_t = {grid.l_t}"
        )
    d = grid.d
    if x_prime_center is None:
        x_prime_center = (0.0,) * max(0, d - 1)
    if len(x_prime_center) != max(0, d - 1):
        raise ValueError(f"x_prime_center needs {max(0, d - 1)} components")

    prime_offsets = _prime_ball_offsets(grid, radius)
    if d > 1:
        pc = [
            int(round(x_prime_center[i] / grid.h[1 + i])) % grid.n_x[1 + i]
            for i in range(d - 1)
        ]
        pidx = np.ravel_multi_index(
            tuple(
                (pc[i] + prime_offsets[:, i]) % grid.n_x[1 + i] for i in range(d - 1)
            ),
            grid.n_x[1:],
        )
    n1 = grid.n_x[0]
    flat = coeffs.data.reshape(d, d, grid.n_t, n1, -1)
    if d > 1:
        slices = flat[:, :, :, :, pidx].mean(axis=-1)  # (d, d, n_t, n1)
    else:
        slices = flat[:, :, :, :, 0]

    offset = np.mod(grid.time_coordinates() - t_zero + radius**2, grid.l_t)
    slab_index = np.floor(offset / slab + 1e-12).astype(int)
    data = np.empty((d, d, *grid.shape))
    for k in np.unique(slab_index):
        rows = slab_index == k
        profile = slices[:, :, rows, :].mean(axis=2)  # (d, d, n1)
        block = np.broadcast_to(
            profile.reshape(d, d, 1, n1, *([1] * (d - 1))),
            (d, d, int(rows.sum()), n1, *grid.n_x[1:]),
        )
        data[:, :, rows] = block
    return Coefficients(
        grid=grid,
        data=data,
        tag="general",
        ellipticity=coeffs.ellipticity,
        generator={"kind": "frozen_x1_piecewise", "radius": radius, "t_zero": t_zero},
    )
