"""Parabolic cylinders, mean-oscillation functionals, maximal functions, the
dyadic filtration, weighted tail sums, and the desk-scale estimate verifiers.

Cylinder geometry follows Q_{r,s}(X) = (t - r^2, t + r^2) x B_s(x) with
Q_r = Q_{r,r}; a grid sample belongs to a cylinder when its cell center does,
with distances measured on the torus.  The dyadic filtration lives on the
unwrapped [0, L) chart per axis: level n tiles time by intervals of length
2*4^{-n} and each spatial axis by intervals of length 2^{-n}, so the time
extent is always twice the square of the spatial extent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import maximum_filter, maximum_filter1d

from .coefficients import Coefficients
from .grid import Field, Grid, field_from_array
from .operators import (
    DataBundle,
    SolutionBundle,
    apply_operator,
    apply_rhs,
    matrix_gradient,
)

__all__ = [
    "Cylinder",
    "DyadicCell",
    "cylinder_mean",
    "mean_oscillation",
    "bundle_rms",
    "bundle_oscillation",
    "parabolic_maximal",
    "strong_maximal",
    "dyadic_layout",
    "dyadic_cell_oscillations",
    "dyadic_sharp",
    "max_tail_terms",
    "tail_sum",
    "theta_field",
    "LocalEstimateReport",
    "verify_local_estimate",
    "OscillationRow",
    "OscillationReport",
    "verify_mean_oscillation",
]


@dataclass(frozen=True)
class Cylinder:
    """Q_{r,s}: time half-length r^2 around center[0], spatial radius s
    (defaults to r) around center[1:]."""

    center: tuple[float, ...]
    r: float
    s: float | None = None

    def __post_init__(self) -> None:
        if self.r <= 0:
            raise ValueError(f"cylinder needs r > 0, got {self.r}")
        if self.s is not None and self.s <= 0:
            raise ValueError(f"cylinder needs s > 0, got {self.s}")

    @property
    def spatial_radius(self) -> float:
        return self.r if self.s is None else self.s


def _wrapped_offset(coords: np.ndarray, center: float, period: float) -> np.ndarray:
    return np.mod(coords - center + 0.5 * period, period) - 0.5 * period


def _cylinder_masks(grid: Grid, cyl: Cylinder) -> tuple[np.ndarray, np.ndarray]:
    """(time mask (n_t,), flat spatial mask (prod n_x,)) of cell centers inside."""
    if len(cyl.center) != grid.d + 1:
        raise ValueError(
            f"cylinder center needs {grid.d + 1} components, got {len(cyl.center)}"
        )
    s = cyl.spatial_radius
    slack = 1.0 + 1e-12  # sqrt/square round trips may overshoot the exact fit
    if cyl.r**2 > slack * grid.l_t / 2.0 or s > slack * min(grid.l_x) / 2.0:
        raise ValueError(
            f"cylinder (r={cyl.r}, s={s}) does not fit the fundamental cell"
        )
    dt_off = _wrapped_offset(grid.time_coordinates(), cyl.center[0], grid.l_t)
    t_mask = np.abs(dt_off) < cyl.r**2
    dist_sq = np.zeros(grid.n_x)
    for i in range(grid.d):
        off = _wrapped_offset(
            grid.space_coordinates(i), cyl.center[1 + i], grid.l_x[i]
        )
        shape = [1] * grid.d
        shape[i] = grid.n_x[i]
        dist_sq = dist_sq + off.reshape(shape) ** 2
    x_mask = (dist_sq < s**2).ravel()
    if not t_mask.any() or not x_mask.any():
        raise ValueError(
            f"cylinder (r={cyl.r}, s={s}) contains no grid cell centers"
        )
    return t_mask, x_mask


def _cylinder_samples(arr: np.ndarray, grid: Grid, cyl: Cylinder) -> np.ndarray:
    t_mask, x_mask = _cylinder_masks(grid, cyl)
    return arr.reshape(grid.n_t, -1)[t_mask][:, x_mask]


def cylinder_mean(field: Field, cyl: Cylinder) -> float:
    return float(_cylinder_samples(field.data, field.grid, cyl).mean())


def mean_oscillation(field: Field, cyl: Cylinder) -> float:
    """Mean of |field - cylinder mean| over the cylinder."""
    samples = _cylinder_samples(field.data, field.grid, cyl)
    return float(np.abs(samples - samples.mean()).mean())


def bundle_rms(arrays: list[np.ndarray], grid: Grid, cyl: Cylinder) -> float:
    """sqrt of the cylinder mean of the summed squares (the (|W|^2)^{1/2}_Q
    quantity for a several-component bundle W)."""
    total = 0.0
    count = 0
    for arr in arrays:
        samples = _cylinder_samples(arr, grid, cyl)
        total += float((samples**2).sum())
        count = samples.size
    return math.sqrt(total / count)


def bundle_oscillation(arrays: list[np.ndarray], grid: Grid, cyl: Cylinder) -> float:
    """Cylinder mean of the Euclidean magnitude of the deviation from the
    per-component cylinder means."""
    devs = []
    for arr in arrays:
        samples = _cylinder_samples(arr, grid, cyl)
        devs.append(samples - samples.mean())
    mag = np.sqrt(sum(dev**2 for dev in devs))
    return float(mag.mean())


# ---------------------------------------------------------------------------
# maximal functions


def _footprint(grid: Grid, r: float, s: float) -> np.ndarray:
    """Boolean offset window of the cylinder Q_{r,s} around a sample."""
    m_t = max(1, int(math.ceil(r**2 / grid.dt - 1e-12)))
    m_t = min(m_t, grid.n_t // 2)
    t_off = np.arange(-m_t + 1, m_t)
    spatial = []
    for i in range(grid.d):
        m = max(1, int(math.floor(s / grid.h[i] + 1e-12)))
        m = min(m, grid.n_x[i] // 2 - 1)
        spatial.append(np.arange(-m, m + 1))
    mesh = np.meshgrid(t_off, *spatial, indexing="ij")
    inside = np.abs(mesh[0] * grid.dt) < max(r**2, grid.dt)
    dist_sq = sum((mesh[1 + i] * grid.h[i]) ** 2 for i in range(grid.d))
    inside &= dist_sq < max(s, min(grid.h)) ** 2 + 1e-12
    return inside


def _window_mean(arr: np.ndarray, footprint: np.ndarray) -> np.ndarray:
    """Circular correlation with the normalized footprint: the mean of arr
    over the footprint translated to every grid point."""
    kernel = np.zeros(arr.shape)
    offsets = np.argwhere(footprint)
    half = (np.array(footprint.shape) - 1) // 2
    for off in offsets - half:
        kernel[tuple(np.mod(off, arr.shape))] += 1.0
    kernel /= kernel.sum()
    return np.fft.ifftn(np.fft.fftn(arr) * np.conj(np.fft.fftn(kernel))).real


def _scale_family(lo: float, hi: float) -> list[float]:
    scales = []
    value = lo
    while value <= hi * (1 + 1e-12):
        scales.append(value)
        value *= 2.0
    return scales or [lo]


def _maximal(field: Field, pairs: list[tuple[float, float]]) -> Field:
    grid = field.grid
    mag = np.abs(field.data)
    out = np.zeros(grid.shape)
    for r, s in pairs:
        fp = _footprint(grid, r, s)
        means = _window_mean(mag, fp)
        # max over all cylinders of this shape containing the point: dilate by
        # the (symmetric) footprint, split into time and space passes
        t_size = fp.shape[0]
        dilated = maximum_filter1d(means, size=t_size, axis=0, mode="wrap")
        if grid.d == 1:
            dilated = maximum_filter1d(
                dilated, size=fp.shape[1], axis=1, mode="wrap"
            )
        else:
            space_fp = fp[fp.shape[0] // 2]
            dilated = maximum_filter(
                dilated,
                footprint=space_fp.reshape((1, *space_fp.shape)),
                mode="wrap",
            )
        out = np.maximum(out, dilated)
    return field_from_array(grid, out)


def parabolic_maximal(field: Field) -> Field:
    """Max of cylinder means of |field| over the dyadic family Q_r containing
    each point, r from two cells up to the fundamental cell."""
    grid = field.grid
    lo = max(2.0 * max(grid.h), math.sqrt(2.0 * grid.dt))
    hi = min(min(grid.l_x) / 2.0, math.sqrt(grid.l_t / 2.0))
    return _maximal(field, [(r, r) for r in _scale_family(lo, hi)])


def strong_maximal(field: Field) -> Field:
    """Like parabolic_maximal but over Q_{r,s} with the time and space scales
    varied independently."""
    grid = field.grid
    r_list = _scale_family(math.sqrt(2.0 * grid.dt), math.sqrt(grid.l_t / 2.0))
    s_list = _scale_family(2.0 * max(grid.h), min(grid.l_x) / 2.0)
    return _maximal(field, [(r, s) for r in r_list for s in s_list])


# ---------------------------------------------------------------------------
# dyadic filtration


@dataclass(frozen=True)
class DyadicCell:
    """Cell of the level-n filtration on the unwrapped chart: time extent
    2*4^{-n} starting at index[0]*2*4^{-n}, spatial extents 2^{-n}."""

    level: int
    index: tuple[int, ...]

    def extent(self) -> tuple[tuple[float, float], ...]:
        wt = 2.0 * 4.0 ** (-self.level)
        wx = 2.0 ** (-self.level)
        spans = [(self.index[0] * wt, (self.index[0] + 1) * wt)]
        for i in self.index[1:]:
            spans.append((i * wx, (i + 1) * wx))
        return tuple(spans)


def dyadic_layout(grid: Grid, level: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """(cells per axis, samples per cell) for the level, or a ValueError when
    the level does not tile this grid with at least 2 samples per cell axis."""
    widths = [2.0 * 4.0 ** (-level)] + [2.0 ** (-level)] * grid.d
    periods = [grid.l_t, *grid.l_x]
    counts = [grid.n_t, *grid.n_x]
    cells, samples = [], []
    for width, period, n in zip(widths, periods, counts):
        n_cells = period / width
        if abs(n_cells - round(n_cells)) > 1e-9 or round(n_cells) < 1:
            raise ValueError(
                f"level {level} cells (width {width}) do not tile period {period}"
            )
        n_cells = int(round(n_cells))
        per, rem = divmod(n, n_cells)
        if rem or per < 2:
            raise ValueError(
                f"level {level} needs >= 2 samples per cell axis on this grid "
                f"(axis with {n} samples, {n_cells} cells)"
            )
        cells.append(n_cells)
        samples.append(per)
    return tuple(cells), tuple(samples)


def dyadic_cell_oscillations(field: Field, level: int) -> np.ndarray:
    """Mean of |field - cell mean| per level-n cell, indexed like the cells."""
    grid = field.grid
    cells, samples = dyadic_layout(grid, level)
    shape = []
    for c, s in zip(cells, samples):
        shape.extend((c, s))
    blocks = field.data.reshape(shape)
    sample_axes = tuple(range(1, 2 * (grid.d + 1), 2))
    means = blocks.mean(axis=sample_axes, keepdims=True)
    return np.abs(blocks - means).mean(axis=sample_axes)


def dyadic_sharp(field: Field, n_range) -> Field:
    """Max over levels of the oscillation of the cell containing each point."""
    grid = field.grid
    levels = list(n_range)
    if not levels:
        raise ValueError("dyadic_sharp needs at least one level")
    out = np.zeros(grid.shape)
    for level in levels:
        _, samples = dyadic_layout(grid, level)
        osc = dyadic_cell_oscillations(field, level)
        expanded = osc
        for axis, per in enumerate(samples):
            expanded = np.repeat(expanded, per, axis=axis)
        out = np.maximum(out, expanded)
    return field_from_array(grid, out)


# ---------------------------------------------------------------------------
# tail sums and verifiers


def max_tail_terms(grid: Grid, r: float, kappa: float) -> int:
    """Largest J with the time extent of Q_{2^{(J-1)/2} kappa r, kappa r}
    inside the fundamental cell."""
    base = (kappa * r) ** 2
    if base > grid.l_t / 2.0:
        return 0
    return 1 + int(math.floor(math.log2(grid.l_t / (2.0 * base)) + 1e-12))


def tail_sum(
    squared_field: Field, r: float, kappa: float, center: tuple[float, ...], terms: int
) -> float:
    """sum_{j<terms} 2^{-j/4} sqrt(mean of squared_field over
    Q_{2^{j/2} kappa r, kappa r}(center)); terms is clamped so the longest
    cylinder still fits (callers report the clamp via max_tail_terms)."""
    if terms < 1:
        raise ValueError("tail_sum needs at least one term")
    grid = squared_field.grid
    usable = min(terms, max_tail_terms(grid, r, kappa))
    if usable < 1:
        raise ValueError(
            f"no tail cylinder fits: (kappa*r)^2 = {(kappa * r) ** 2} exceeds l_t/2"
        )
    total = 0.0
    for j in range(usable):
        cyl = Cylinder(center=center, r=2.0 ** (j / 2.0) * kappa * r, s=kappa * r)
        total += 2.0 ** (-j / 4.0) * math.sqrt(
            max(cylinder_mean(squared_field, cyl), 0.0)
        )
    return total


def theta_field(coeffs: Coefficients, u: Field) -> Field:
    """First component of the coefficient flux, sum_j a_1j (D+ u)_j."""
    return matrix_gradient(coeffs, u).components[0]


def _data_squared(data: DataBundle) -> np.ndarray:
    total = data.h.data ** 2
    for comp in data.g.components:
        total = total + comp.data**2
    if data.lam > 0:
        total = total + data.f.data ** 2 / data.lam
    return total


def _relative_residual(coeffs: Coefficients, data: DataBundle, u: Field) -> float:
    res = apply_operator(coeffs, data.lam, u).data - apply_rhs(data).data
    scale = float(np.linalg.norm(apply_rhs(data).data))
    if scale == 0.0:
        scale = max(float(np.linalg.norm(u.data)), 1.0)
    return float(np.linalg.norm(res)) / scale


@dataclass(frozen=True)
class LocalEstimateReport:
    lhs: float
    rhs: float
    n_emp: float | None
    trivial: bool
    terms_used: int
    residual_rel: float


def verify_local_estimate(
    coeffs: Coefficients,
    data: DataBundle,
    u: Field,
    radius: float,
    terms: int = 8,
    rtol: float = 1e-7,
) -> LocalEstimateReport:
    """Check the interior estimate: root-mean-square of |U| over Q_radius(0)
    against the 2^{-j/4}-weighted tail sum of |F| root-mean-squares over the
    time-elongated cylinders Q_{2^{j/2} radius, radius}(0).

    Requires u to solve the equation (small relative residual) and to be
    supported in the spatial ball B_radius, emulating the zero lateral
    condition of the infinite-cylinder setting.
    """
    grid = u.grid
    rel = _relative_residual(coeffs, data, u)
    if rel > rtol:
        raise ValueError(
            f"u does not solve the equation: relative residual {rel} > {rtol}"
        )
    dist_sq = np.zeros(grid.n_x)
    for i in range(grid.d):
        off = _wrapped_offset(grid.space_coordinates(i), 0.0, grid.l_x[i])
        shape = [1] * grid.d
        shape[i] = grid.n_x[i]
        dist_sq = dist_sq + off.reshape(shape) ** 2
    outside = (dist_sq >= radius**2).ravel()
    u_flat = np.abs(u.data.reshape(grid.n_t, -1))
    peak = float(u_flat.max())
    if peak > 0 and outside.any():
        stray = float(u_flat[:, outside].max())
        if stray > 1e-10 * peak:
            raise ValueError(
                f"u is not supported in B_{radius}: |u| reaches {stray} outside"
            )

    bundle = SolutionBundle.from_field(u, data.lam)
    u_sq = np.zeros(grid.shape)
    for arr in bundle.components():
        u_sq = u_sq + arr * arr
    origin = (0.0,) * (grid.d + 1)
    lhs = math.sqrt(
        max(
            cylinder_mean(
                field_from_array(grid, u_sq), Cylinder(origin, r=radius)
            ),
            0.0,
        )
    )
    terms_used = min(terms, max_tail_terms(grid, radius, 1.0))
    f_sq = field_from_array(grid, _data_squared(data))
    rhs = tail_sum(f_sq, radius, 1.0, origin, terms_used) if terms_used else 0.0
    trivial = lhs == 0.0 and rhs == 0.0
    n_emp = lhs / rhs if rhs > 0 else None
    return LocalEstimateReport(
        lhs=lhs,
        rhs=rhs,
        n_emp=n_emp,
        trivial=trivial,
        terms_used=terms_used,
        residual_rel=rel,
    )


@dataclass(frozen=True)
class OscillationRow:
    kappa: float
    inner_radius: float
    lhs: float
    term_homogeneous: float
    term_tail: float
    n_emp: float | None


@dataclass(frozen=True)
class OscillationReport:
    case: str
    center: tuple[float, ...]
    outer_radius: float
    rows: tuple[OscillationRow, ...]
    fitted_decay: float | None
    truncated: bool
    residual_rel: float


_CASES = ("calU_time_coeffs", "U_heat", "calUprime_theta_x1")


def verify_mean_oscillation(
    case: str,
    coeffs: Coefficients,
    data: DataBundle,
    u: Field,
    r: float,
    center: tuple[float, ...],
    kappa_list: tuple[float, ...],
    terms: int = 6,
    rtol: float = 1e-6,
) -> OscillationReport:
    """Oscillation decay of the solution bundle on shrinking cylinders.

    r is the fixed outer scale: for each kappa the oscillation is taken over
    Q_{r/kappa}(center) and compared with kappa^{-theta} times the bundle
    root-mean-square over Q_r(center) plus kappa^{1+d/2} times the data tail
    sum (whose cylinders Q_{2^{j/2} r, r} do not depend on kappa).  theta is 1
    for the gradient bundle under time-measurable coefficients and for the
    full bundle under the heat operator, 1/2 for the x1-measurable case.  The
    fitted decay slope of log2(oscillation) against log2(kappa) is the
    homogeneous-part exponent whenever the data vanish near the center.
    """
    if case not in _CASES:
        raise ValueError(f"case must be one of {_CASES}, got {case!r}")
    grid = u.grid
    if any(k < 4 for k in kappa_list):
        raise ValueError("every kappa must be >= 4")
    rel = _relative_residual(coeffs, data, u)
    if rel > rtol and float(np.abs(u.data).max()) > 0:
        raise ValueError(
            f"u does not solve the equation: relative residual {rel} > {rtol}"
        )

    bundle = SolutionBundle.from_field(u, data.lam)
    grad_arrays = [c.data for c in bundle.grad.components]
    weighted_u = np.sqrt(data.lam) * u.data
    if case == "calU_time_coeffs":
        lhs_bundles = [grad_arrays + [weighted_u]]
        theta = 1.0
    elif case == "U_heat":
        lhs_bundles = [[bundle.half_du.data] + grad_arrays + [weighted_u]]
        theta = 1.0
    else:
        prime = grad_arrays[1:]  # D'u: spatial axes 2..d (empty when d = 1)
        lhs_bundles = [
            prime + [weighted_u],
            [theta_field(coeffs, u).data],
        ]
        theta = 0.5
    rhs_arrays = grad_arrays + [weighted_u]

    f_sq = field_from_array(grid, _data_squared(data))
    outer = Cylinder(center, r=r)
    rows = []
    truncated = False
    for kappa in kappa_list:
        inner_r = r / kappa
        try:
            lhs = sum(
                bundle_oscillation(arrays, grid, Cylinder(center, r=inner_r))
                for arrays in lhs_bundles
            )
        except ValueError:
            truncated = True  # inner cylinder fell below the grid spacing
            continue
        hom = kappa ** (-theta) * bundle_rms(rhs_arrays, grid, outer)
        usable = min(terms, max_tail_terms(grid, inner_r, kappa))
        tail = (
            kappa ** (1.0 + grid.d / 2.0)
            * tail_sum(f_sq, inner_r, kappa, center, usable)
            if usable
            else 0.0
        )
        denom = hom + tail
        rows.append(
            OscillationRow(
                kappa=float(kappa),
                inner_radius=inner_r,
                lhs=lhs,
                term_homogeneous=hom,
                term_tail=tail,
                n_emp=lhs / denom if denom > 0 else None,
            )
        )

    live = [(row.kappa, row.lhs) for row in rows if row.lhs > 0]
    fitted = None
    if len(live) >= 2:
        ks = np.log2([k for k, _ in live])
        vals = np.log2([v for _, v in live])
        fitted = float(np.polyfit(ks, vals, 1)[0])
    return OscillationReport(
        case=case,
        center=tuple(float(c) for c in center),
        outer_radius=float(r),
        rows=tuple(rows),
        fitted_decay=fitted,
        truncated=truncated,
        residual_rel=rel,
    )
