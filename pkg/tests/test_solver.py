"""Weak forms, the twisted test function, and the two solve routes.

Hand-computed anchors, all on the period-2*pi time axis:

* u = phi = sin(omega t), a = I: the time term of the weak pairing vanishes
  (skew), the gradient vanishes (no spatial dependence), so the pairing is
  lam * ||u||_2^2.
* the same u tested against u - kappa*H(u) adds kappa * omega * ||u||_2^2,
  because H(sin) = -cos and -<H(D^{1/2}u), D^{1/2}(-cos)> = omega <sin, sin>.
* for a = I the mode quotient (|tau| + |sigma|^2 + lam)/|i tau + |sigma|^2 + lam|
  is at most sqrt(2), attained as |tau| approaches |sigma|^2 + lam.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from halfheat import (
    DataBundle,
    SolverOptions,
    VectorField,
    apply_operator,
    apply_rhs,
    compute_bundles,
    duality_defect,
    field_from_array,
    generate_coefficients,
    identity_coefficients,
    inner,
    lp_norm,
    make_grid,
    manufacture_data,
    multiplier_bound,
    solve,
    solve_oracle,
    twisted_pairing,
    weak_pairing,
    zeros,
)


def _grid(d=1, n_t=32, n_x=32, l_t=2.0 * np.pi, l_x=2.0):
    return make_grid(d=d, n_t=n_t, n_x=n_x, l_t=l_t, l_x=l_x)


def _rand(grid, seed):
    rng = np.random.default_rng(seed)
    return field_from_array(grid, rng.standard_normal(grid.shape))


def _band_limited_bundle(grid, seed, lam):
    rng = np.random.default_rng(seed)

    def smooth():
        spec = np.fft.fftn(rng.standard_normal(grid.shape))
        for axis, n in enumerate(grid.shape):
            k = np.abs(np.rint(np.fft.fftfreq(n) * n).astype(int))
            keep = k <= n // 4
            view = [1] * len(grid.shape)
            view[axis] = n
            spec = spec * keep.reshape(view)
        return field_from_array(grid, np.fft.ifftn(spec).real)

    g = VectorField(tuple(smooth() for _ in range(grid.d)))
    f = smooth() if lam > 0 else zeros(grid)
    return DataBundle(h=smooth(), g=g, f=f, lam=lam)


def _sin_time_mode(grid, omega):
    t = grid.coordinate_mesh()[0]
    return field_from_array(grid, np.broadcast_to(np.sin(omega * t), grid.shape))


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_weak_pairing_equals_strong_pairing(seed):
    g = _grid(n_t=16, n_x=16)
    a = generate_coefficients(kind="x1_piecewise", delta=0.25, seed=seed, grid=g)
    u, phi = _rand(g, seed), _rand(g, seed + 1)
    weak = weak_pairing(a, 0.8, u, phi)
    strong = inner(apply_operator(a, 0.8, u), phi)
    assert weak == pytest.approx(strong, abs=1e-9)


def test_weak_pairing_frozen_value():
    g = _grid()
    u = _sin_time_mode(g, 3)
    lam = 1.7
    norm_sq = lp_norm(u, 2.0) ** 2
    assert norm_sq == pytest.approx(np.pi * 2.0, rel=1e-12)  # l_t/2 * l_x
    pairing = weak_pairing(identity_coefficients(g), lam, u, u)
    assert pairing == pytest.approx(lam * norm_sq, rel=1e-12)


def test_twisted_pairing_frozen_value():
    g = _grid()
    omega, lam, kappa = 3, 1.7, 0.4
    u = _sin_time_mode(g, omega)
    norm_sq = lp_norm(u, 2.0) ** 2
    got = twisted_pairing(identity_coefficients(g), lam, kappa, u, u)
    assert got == pytest.approx((lam + kappa * omega) * norm_sq, rel=1e-12)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([0.25, 0.5, 1.0]))
def test_coercivity_at_kappa_delta_sq_half(seed, delta):
    """B_kappa[u, u] >= (delta^2/2) ||U||_2^2 at kappa = delta^2/2, for every
    real field: the u_t and Hilbert diagonal terms vanish exactly on the
    lattice, so the continuum chain has no discretization slack."""
    g = _grid(n_t=16, n_x=16)
    a = generate_coefficients(kind="checkerboard", delta=delta, seed=seed, grid=g,
                              roughness_scale=0.5 * (1 - delta)) if delta < 1 else (
        identity_coefficients(g)
    )
    u = _rand(g, seed)
    lam = (0.0, 0.7, 3.0)[seed % 3]
    kappa = delta**2 / 2.0
    lhs = twisted_pairing(a, lam, kappa, u, u)
    from halfheat import SolutionBundle

    bundle = SolutionBundle.from_field(u, lam)
    energy = sum(float(np.sum(c * c)) for c in bundle.components())
    energy *= float(np.prod([g.dt, *g.h]))
    assert lhs >= (delta**2 / 2.0 - 1e-10) * energy


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_duality_skewness(seed):
    g = _grid(n_t=16, n_x=16)
    a = generate_coefficients(kind="time_piecewise", delta=0.25, seed=seed, grid=g)
    u, v = _rand(g, seed), _rand(g, seed + 1)
    scale = lp_norm(u, 2.0) * lp_norm(v, 2.0)
    assert duality_defect(a, 1.3, u, v) <= 1e-12 * max(scale, 1.0)


def test_oracle_inverts_the_operator():
    g = _grid(n_t=32, n_x=32)
    a = generate_coefficients(kind="constant", delta=0.5, seed=1, grid=g)
    data = _band_limited_bundle(g, 2, lam=1.0)
    result = solve_oracle(a, data)
    assert result.converged
    assert result.iterations == 0
    assert result.final_relative_residual <= 1e-11
    res = apply_operator(a, 1.0, result.u.u).data - apply_rhs(data).data
    rel = np.linalg.norm(res) / np.linalg.norm(apply_rhs(data).data)
    assert rel <= 1e-11


def test_oracle_single_mode_magnitude():
    # |u-hat / h-hat| = sqrt(omega) / sqrt(omega^2 + lam^2) for h = cos(omega t)
    g = _grid(n_t=64, n_x=8, l_x=1.0)
    omega, lam = 3.0, 2.0
    t = g.coordinate_mesh()[0]
    h = field_from_array(g, np.broadcast_to(np.cos(omega * t), g.shape))
    data = DataBundle(
        h=h, g=VectorField((zeros(g),)), f=zeros(g), lam=lam
    )
    result = solve_oracle(identity_coefficients(g), data)
    expected = np.sqrt(omega) / np.sqrt(omega**2 + lam**2)
    ratio = lp_norm(result.u.u, 2.0) / lp_norm(h, 2.0)
    assert ratio == pytest.approx(expected, rel=1e-12)


def test_oracle_handles_lambda_zero():
    g = _grid(n_t=32, n_x=32)
    data = _band_limited_bundle(g, 3, lam=0.0)
    result = solve_oracle(identity_coefficients(g), data)
    assert result.converged
    assert result.final_relative_residual <= 1e-10
    # the non-invertible slots stay empty
    u_hat = np.fft.fftn(result.u.u.data)
    assert abs(u_hat[0, 0]) <= 1e-9
    assert abs(u_hat[g.n_t // 2, 0]) <= 1e-9


def test_oracle_zero_data_short_circuits():
    g = _grid(n_t=16, n_x=16)
    data = DataBundle(
        h=zeros(g), g=VectorField((zeros(g),)), f=zeros(g), lam=1.0
    )
    result = solve_oracle(identity_coefficients(g), data)
    assert result.converged
    assert np.array_equal(result.u.u.data, np.zeros(g.shape))


def test_gmres_agrees_with_oracle_on_constant_coefficients():
    g = _grid(n_t=32, n_x=32)
    a = generate_coefficients(kind="constant", delta=0.5, seed=5, grid=g)
    data = _band_limited_bundle(g, 6, lam=1.0)
    oracle = solve_oracle(a, data)
    iterated = solve(a, data, SolverOptions(rtol=1e-10))
    assert iterated.converged
    # the mean preconditioner is the exact inverse here
    assert iterated.iterations <= 3
    diff = np.linalg.norm(iterated.u.u.data - oracle.u.u.data)
    assert diff / np.linalg.norm(oracle.u.u.data) <= 1e-8


def test_gmres_solves_rough_coefficients():
    g = _grid(n_t=16, n_x=16)
    a = generate_coefficients(kind="checkerboard", delta=0.25, seed=7, grid=g,
                              roughness_scale=0.5)
    data = _band_limited_bundle(g, 8, lam=1.0)
    result = solve(a, data, SolverOptions(rtol=1e-9))
    assert result.converged
    assert result.final_relative_residual <= 1e-9
    assert len(result.residual_history) == result.iterations


def test_solve_rejects_lambda_zero():
    g = _grid(n_t=16, n_x=16)
    data = _band_limited_bundle(g, 9, lam=0.0)
    with pytest.raises(ValueError, match="solve_oracle"):
        solve(identity_coefficients(g), data)


def test_solver_options_misuse():
    with pytest.raises(ValueError):
        SolverOptions(rtol=0.0)
    with pytest.raises(ValueError):
        SolverOptions(max_iterations=0)
    with pytest.raises(ValueError):
        SolverOptions(preconditioner="ilu")


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(1.0, 50.0))
def test_identity_multiplier_bound_stays_below_sqrt_two(seed, lam):
    g = _grid(n_t=16, n_x=16)
    assert multiplier_bound(identity_coefficients(g), lam) <= np.sqrt(2.0) + 1e-12


def test_bound_actually_bounds_the_bundle_ratio():
    g = _grid(n_t=32, n_x=32)
    a = generate_coefficients(kind="constant", delta=0.5, seed=10, grid=g)
    lam = 1.0
    bound = multiplier_bound(a, lam)
    for seed in range(5):
        data = _band_limited_bundle(g, 100 + seed, lam=lam)
        result = solve_oracle(a, data)
        _, norms = compute_bundles(result.u.u, data)
        assert norms["U"][2.0] <= (bound + 1e-8) * norms["F"][2.0]


def test_compute_bundles_norm_tables():
    g = _grid(n_t=16, n_x=16)
    data = _band_limited_bundle(g, 11, lam=4.0)
    u = _rand(g, 12)
    _, norms = compute_bundles(u, data, p_list=(1.5, 2.0))
    assert set(norms["U"]) == {1.5, 2.0}
    assert norms["F"][2.0] > 0
    # lambda = 0 omits the f/sqrt(lambda) slot instead of dividing by zero
    data0 = _band_limited_bundle(g, 13, lam=0.0)
    _, norms0 = compute_bundles(u, data0, p_list=(2.0,))
    assert np.isfinite(norms0["F"][2.0])
