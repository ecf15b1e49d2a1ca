"""Kinetic solvers: convolution routes, Picard vs RK4, bounds, horizon."""
from __future__ import annotations

import math
import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from wrk.errors import ConfigError, NumericalError
from wrk.kinetics import (
    DensityField2,
    _exp_trapezoid_weights,
    convolve,
    guaranteed_horizon,
    homogeneous_reduce,
    make_convolver,
    picard_solve,
    rhs,
    rk4_solve,
    verify_exponential_ansatz,
)
from wrk.potential import PairPotential, PeriodicKernel, periodize


def kernel_1d(n: int = 64, length: float = 10.0) -> PeriodicKernel:
    return periodize(PairPotential.top_hat(1.0, 0.5, dim=1), length, n)


def kernel_2d(n: int = 32, length: float = 10.0) -> PeriodicKernel:
    return periodize(PairPotential.top_hat(1.0, 0.8, dim=2), length, n)


def wavy_field_1d(n: int = 64, length: float = 10.0) -> DensityField2:
    x = np.arange(n) * (length / n)
    return DensityField2(
        1, n, length,
        0.9 + 0.4 * np.cos(2 * np.pi * x / length),
        0.7 + 0.2 * np.sin(2 * np.pi * x / length),
    )


def wavy_field_2d(n: int = 32, length: float = 10.0) -> DensityField2:
    g = np.arange(n) * (length / n)
    gx, gy = np.meshgrid(g, g, indexing="ij")
    return DensityField2(
        2, n, length,
        0.8 + 0.3 * np.cos(2 * np.pi * gx / length) * np.sin(2 * np.pi * gy / length),
        0.6 + 0.2 * np.sin(2 * np.pi * gx / length),
    )


# ----------------------------------------------------------------------
# convolution


def test_convolve_hand_value():
    # n=4, dx=0.5: out[i] = dx * sum_s ker[s] rho[i-s], worked by hand.
    ker = PeriodicKernel(1, 4, 2.0, np.array([1.0, 2.0, 0.0, 2.0]))
    rho = np.array([1.0, 0.0, 3.0, 0.0])
    expect = np.array([0.5, 4.0, 1.5, 4.0])
    assert np.array_equal(convolve(rho, ker, "direct"), expect)
    assert convolve(rho, ker, "fft") == pytest.approx(expect, abs=1e-12)


@pytest.mark.parametrize("ker,shape", [(kernel_1d(), (64,)), (kernel_2d(), (32, 32))])
def test_direct_vs_fft(ker, shape):
    rng = np.random.default_rng(11)
    rho = rng.random(shape)
    a = convolve(rho, ker, "direct")
    b = convolve(rho, ker, "fft")
    assert np.max(np.abs(a - b)) <= 1e-12 * max(1.0, np.max(np.abs(a)))


@pytest.mark.parametrize("ker,shape", [(kernel_1d(), (64,)), (kernel_2d(16), (16, 16))])
def test_direct_jit_and_fallback_agree_bitwise(ker, shape):
    rng = np.random.default_rng(3)
    rho = rng.random(shape)
    old = os.environ.pop("WRK_DISABLE_NUMBA", None)
    try:
        a = convolve(rho, ker, "direct")
        os.environ["WRK_DISABLE_NUMBA"] = "1"
        b = convolve(rho, ker, "direct")
    finally:
        if old is None:
            os.environ.pop("WRK_DISABLE_NUMBA", None)
        else:
            os.environ["WRK_DISABLE_NUMBA"] = old
    assert np.array_equal(a, b)


def test_direct_translation_equivariance_bitwise():
    rng = np.random.default_rng(5)
    ker = kernel_1d()
    rho = rng.random(64)
    base = convolve(rho, ker, "direct")
    for shift in (1, 11, 63):
        assert np.array_equal(convolve(np.roll(rho, shift), ker, "direct"), np.roll(base, shift))
    ker2 = kernel_2d(16)
    rho2 = rng.random((16, 16))
    base2 = convolve(rho2, ker2, "direct")
    moved = convolve(np.roll(rho2, (3, 7), axis=(0, 1)), ker2, "direct")
    assert np.array_equal(moved, np.roll(base2, (3, 7), axis=(0, 1)))


def test_convolve_constant_field_gives_kernel_mass():
    for ker in (kernel_1d(), kernel_2d(16)):
        shape = (ker.n,) if ker.dim == 1 else (ker.n, ker.n)
        out = convolve(np.full(shape, 0.75), ker, "direct")
        assert out == pytest.approx(0.75 * ker.discrete_l1, rel=1e-13)


def test_convolve_rejects_bad_input():
    ker = kernel_1d()
    with pytest.raises(ConfigError):
        convolve(np.zeros(65), ker)
    with pytest.raises(ConfigError):
        convolve(np.zeros(64), ker, method="simpson")
    with pytest.raises(ConfigError):
        make_convolver(ker, "spectral")


# ----------------------------------------------------------------------
# step weights


@pytest.mark.parametrize("m,dt", [(1.0, 1e-3), (2.5, 0.05), (0.4, 0.2)])
def test_exp_trapezoid_weights_match_quadrature(m, dt):
    eh, w0, w1 = _exp_trapezoid_weights(m, dt)
    q0, _ = integrate.quad(lambda s: math.exp(-m * (dt - s)) * (1 - s / dt), 0, dt)
    q1, _ = integrate.quad(lambda s: math.exp(-m * (dt - s)) * (s / dt), 0, dt)
    assert eh == pytest.approx(math.exp(-m * dt), rel=1e-15)
    assert w0 == pytest.approx(q0, rel=1e-12)
    assert w1 == pytest.approx(q1, rel=1e-12)
    # the pair must integrate the memory factor exactly, not just to O(dt^2):
    # this identity is what keeps the scheme inside [0, max(c0, z/m)].
    assert w0 + w1 == pytest.approx(-math.expm1(-m * dt) / m, rel=1e-15)


def test_exp_trapezoid_weights_zero_rate():
    assert _exp_trapezoid_weights(0.0, 0.02) == (1.0, 0.01, 0.01)


@given(m=st.floats(1e-3, 50.0), dt=st.floats(1e-5, 0.5))
@settings(max_examples=200, deadline=None)
def test_exp_trapezoid_weights_properties(m, dt):
    eh, w0, w1 = _exp_trapezoid_weights(m, dt)
    assert 0.0 < eh < 1.0
    assert 0.0 < w0 <= w1  # late endpoint is weighed at least as much
    assert w0 + w1 == pytest.approx(-math.expm1(-m * dt) / m, rel=1e-14)


# ----------------------------------------------------------------------
# degenerate dynamics with closed forms


@pytest.mark.parametrize("solver", [picard_solve, rk4_solve])
def test_zero_activity_pure_decay(solver):
    f0 = wavy_field_1d()
    run = solver(f0, kernel_1d(), m=1.0, z=0.0, t_end=2.0, dt=1e-3, store_every=100)
    decay = np.exp(-run.times)[:, None]
    assert np.max(np.abs(run.rho_p - f0.rho_p[None] * decay)) <= 1e-8
    assert np.max(np.abs(run.rho_m - f0.rho_m[None] * decay)) <= 1e-8


@pytest.mark.parametrize("solver", [picard_solve, rk4_solve])
def test_zero_potential_relaxes_to_z_over_m(solver):
    # With no interaction each species solves u' = -m u + z independently.
    m, z = 1.0, 2.0
    ker0 = PeriodicKernel(1, 64, 10.0, np.zeros(64))
    f0 = wavy_field_1d()
    run = solver(f0, ker0, m=m, z=z, t_end=2.0, dt=1e-3, store_every=100)
    t = run.times[:, None]
    target = (z / m) * (-np.expm1(-m * t))
    assert np.max(np.abs(run.rho_p - (f0.rho_p[None] * np.exp(-m * t) + target))) <= 1e-6
    assert np.max(np.abs(run.rho_m - (f0.rho_m[None] * np.exp(-m * t) + target))) <= 1e-6


# ----------------------------------------------------------------------
# route agreement


def test_picard_vs_rk4_1d():
    f0 = wavy_field_1d(256)
    ker = kernel_1d(256)
    a = picard_solve(f0, ker, m=1.0, z=1.5, t_end=1.0, dt=1e-3, store_every=50)
    b = rk4_solve(f0, ker, m=1.0, z=1.5, t_end=1.0, dt=1e-3, store_every=50)
    assert np.array_equal(a.times, b.times)
    assert np.max(np.abs(a.rho_p - b.rho_p)) <= 1e-6
    assert np.max(np.abs(a.rho_m - b.rho_m)) <= 1e-6


def test_picard_vs_rk4_2d():
    f0 = wavy_field_2d()
    ker = kernel_2d()
    a = picard_solve(f0, ker, m=1.0, z=1.5, t_end=0.5, dt=1e-3, store_every=50)
    b = rk4_solve(f0, ker, m=1.0, z=1.5, t_end=0.5, dt=1e-3, store_every=50)
    assert np.max(np.abs(a.rho_p - b.rho_p)) <= 1e-6
    assert np.max(np.abs(a.rho_m - b.rho_m)) <= 1e-6


def test_homogeneous_rk4_matches_scipy():
    m, z, beta = 1.0, 2.0, 0.8

    def f(t, y):
        return [-m * y[0] + z * math.exp(-beta * y[1]),
                -m * y[1] + z * math.exp(-beta * y[0])]

    ref = integrate.solve_ivp(f, (0.0, 2.0), [1.2, 0.4], rtol=1e-12, atol=1e-13).y[:, -1]
    run = homogeneous_reduce(m, z, beta, 1.2, 0.4, t_end=2.0, dt=1e-3, method="rk4")
    assert abs(float(run.rho_p[-1]) - ref[0]) <= 1e-9
    assert abs(float(run.rho_m[-1]) - ref[1]) <= 1e-9
    pic = homogeneous_reduce(m, z, beta, 1.2, 0.4, t_end=2.0, dt=1e-3, method="picard")
    assert abs(float(pic.rho_p[-1]) - ref[0]) <= 1e-6
    assert abs(float(pic.rho_m[-1]) - ref[1]) <= 1e-6


def test_homogeneous_matches_grid_on_constant_fields():
    # Identical cores, conv replaced by multiplication with the kernel mass:
    # on constant data the two solvers must agree bitwise, not just closely.
    ker = kernel_1d()
    f0 = DensityField2.constant(1, 64, 10.0, 1.2, 0.4)
    grid = picard_solve(f0, ker, m=1.0, z=2.0, t_end=1.0, dt=1e-3)
    homog = homogeneous_reduce(1.0, 2.0, ker.discrete_l1, 1.2, 0.4, t_end=1.0, dt=1e-3)
    assert np.array_equal(grid.rho_p, np.broadcast_to(homog.rho_p[:, None], grid.rho_p.shape))
    assert np.array_equal(grid.rho_m, np.broadcast_to(homog.rho_m[:, None], grid.rho_m.shape))


def test_species_swap_symmetry_bitwise():
    f0 = wavy_field_1d()
    swapped = DensityField2(1, 64, 10.0, f0.rho_m.copy(), f0.rho_p.copy())
    ker = kernel_1d()
    a = picard_solve(f0, ker, m=1.0, z=1.5, t_end=0.2, dt=1e-3)
    b = picard_solve(swapped, ker, m=1.0, z=1.5, t_end=0.2, dt=1e-3)
    assert np.array_equal(a.rho_p, b.rho_m)
    assert np.array_equal(a.rho_m, b.rho_p)


def test_store_every_subsamples_the_full_run():
    f0 = wavy_field_1d()
    ker = kernel_1d()
    full = picard_solve(f0, ker, m=1.0, z=1.5, t_end=0.25, dt=1e-3)
    thin = picard_solve(f0, ker, m=1.0, z=1.5, t_end=0.25, dt=1e-3, store_every=70)
    # 250 steps, stride 70 -> stored at 0, 70, 140, 210 and the forced final 250
    assert np.array_equal(thin.times, np.array([0.0, 0.07, 0.14, 0.21, 0.25]))
    for k, t in enumerate(thin.times):
        j = int(round(t / 1e-3))
        assert np.array_equal(thin.rho_p[k], full.rho_p[j])
        assert np.array_equal(thin.rho_m[k], full.rho_m[j])


# ----------------------------------------------------------------------
# a priori bound and contraction diagnostics


@pytest.mark.parametrize("solver", [picard_solve, rk4_solve])
def test_bound_preserved_and_nonnegative(solver):
    f0 = wavy_field_1d()
    run = solver(f0, kernel_1d(), m=1.0, z=3.0, t_end=2.0, dt=1e-3, store_every=20)
    assert run.bound == max(f0.max_value(), 3.0)
    assert run.bound_violation <= 1e-12
    assert run.min_value >= 0.0


def test_picard_bound_exact_zero_violation():
    # The exponential weights make the mild step a convex-type average, so the
    # invariant region is preserved to the last bit, not merely to 1e-12.
    run = picard_solve(wavy_field_1d(), kernel_1d(), m=1.0, z=3.0, t_end=2.0, dt=1e-3)
    assert run.bound_violation == 0.0


def test_contraction_ratio_below_advertised_factor():
    run = picard_solve(wavy_field_1d(), kernel_1d(), m=1.0, z=1.5, t_end=1.0, dt=1e-3)
    d = run.diagnostics
    assert d["z_beta_tau"] <= 0.5 + 1e-12
    assert d["max_contraction_ratio"] is not None
    assert d["max_contraction_ratio"] <= d["z_beta_tau"]
    assert all(s <= 60 for s in d["sweeps_per_subinterval"])


@given(
    m=st.floats(0.2, 3.0),
    z=st.floats(0.0, 4.0),
    c0=st.floats(0.0, 5.0),
)
@settings(max_examples=60, deadline=None)
def test_homogeneous_bound_property(m, z, c0):
    run = homogeneous_reduce(m, z, 0.9, c0, 0.3 * c0, t_end=0.5, dt=0.01)
    assert run.bound_violation == 0.0
    assert float(np.min(run.rho_p)) >= 0.0 and float(np.min(run.rho_m)) >= 0.0


def test_stationary_point_is_fixed():
    # x solving x e^x = a, scaled to density x/beta, is a fixed point.
    m, z, beta = 1.0, 2.0, 1.0
    a = z * beta / m
    x = 0.8526055020137254  # mpmath: LambertW(2), frozen in test_equilibria too
    run = homogeneous_reduce(m, z, beta, x / beta, x / beta, t_end=5.0, dt=1e-3)
    assert abs(float(run.rho_p[-1]) - x / beta) <= 1e-10
    assert abs(float(run.rho_m[-1]) - x / beta) <= 1e-10
    assert a * math.exp(-x) == pytest.approx(x, rel=1e-12)


# ----------------------------------------------------------------------
# rhs and containers


def test_rhs_matches_homogeneous_formula():
    ker = kernel_1d()
    f0 = DensityField2.constant(1, 64, 10.0, 1.2, 0.4)
    dp, dm = rhs(f0, ker, m=1.0, z=2.0)
    beta = ker.discrete_l1
    assert dp == pytest.approx(-1.2 + 2.0 * math.exp(-beta * 0.4), rel=1e-12)
    assert dm == pytest.approx(-0.4 + 2.0 * math.exp(-beta * 1.2), rel=1e-12)


def test_final_field_round_trip():
    run = picard_solve(wavy_field_1d(), kernel_1d(), m=1.0, z=1.0, t_end=0.1, dt=1e-3)
    f = run.final_field()
    assert isinstance(f, DensityField2)
    assert np.array_equal(f.rho_p, run.rho_p[-1])


def test_density_field_validation():
    with pytest.raises(ConfigError):
        DensityField2(3, 4, 1.0, np.zeros(4), np.zeros(4))
    with pytest.raises(ConfigError):
        DensityField2(1, 4, 1.0, np.zeros(5), np.zeros(4))
    with pytest.raises(ConfigError):
        DensityField2(1, 4, 1.0, np.array([0.0, -1.0, 0.0, 0.0]), np.zeros(4))
    with pytest.raises(ConfigError):
        DensityField2(1, 4, 1.0, np.array([0.0, np.nan, 0.0, 0.0]), np.zeros(4))


def test_solver_config_errors():
    f0 = wavy_field_1d()
    ker = kernel_1d()
    with pytest.raises(ConfigError):
        picard_solve(f0, kernel_1d(32), m=1.0, z=1.0, t_end=1.0)
    with pytest.raises(ConfigError):
        picard_solve(f0, ker, m=1.0, z=1.0, t_end=1.0, dt=0.3)  # dt > tau
    with pytest.raises(ConfigError):
        rk4_solve(f0, ker, m=1.0, z=1.0, t_end=1.0, dt=0.3001)  # not a multiple
    with pytest.raises(ConfigError):
        homogeneous_reduce(1.0, 1.0, -0.5, 1.0, 1.0, t_end=1.0)
    with pytest.raises(ConfigError):
        homogeneous_reduce(1.0, 1.0, 0.5, -1.0, 1.0, t_end=1.0)
    with pytest.raises(ConfigError):
        homogeneous_reduce(1.0, 1.0, 0.5, 1.0, 1.0, t_end=1.0, method="euler")


def test_picard_reports_nonconvergence():
    with pytest.raises(NumericalError):
        picard_solve(wavy_field_1d(), kernel_1d(), m=1.0, z=1.5, t_end=0.1,
                     dt=1e-3, max_sweeps=1)


# ----------------------------------------------------------------------
# guaranteed horizon


def test_guaranteed_horizon_frozen_value():
    # With alpha=0.5, alpha0=1 and unit m, z, kernel mass the formula
    # collapses to 0.5 / (2 e (1 + e)); frozen from a 40-digit evaluation.
    t = guaranteed_horizon(alpha=0.5, alpha0=1.0, m=1.0, z=1.0, l1_norm=1.0)
    assert t == pytest.approx(0.0247345049503618, rel=1e-13)
    assert t == pytest.approx(0.5 / (2 * math.e * (1 + math.e)), rel=1e-15)


def test_guaranteed_horizon_zero_activity_reduction():
    t = guaranteed_horizon(alpha=0.8, alpha0=2.0, m=1.3, z=0.0, l1_norm=5.0)
    assert t == pytest.approx((2.0 - 0.8) / (2 * math.e * 2.0 * 1.3), rel=1e-15)
    # the window closes linearly as alpha approaches alpha0
    tiny = guaranteed_horizon(2.0 - 1e-9, 2.0, 1.3, 0.0, 5.0)
    assert tiny == pytest.approx(1e-9 / (2 * math.e * 2.0 * 1.3), rel=1e-6)


def test_guaranteed_horizon_oracle_and_monotonicity():
    got = guaranteed_horizon(1.5, 3.0, 0.7, 0.4, 2.0)
    want = (3.0 - 1.5) / (2 * math.e * 3.0 * (0.7 + 0.4 * 3.0 * math.exp(2.0 / 1.5 - 1)))
    assert got == pytest.approx(want, rel=1e-15)
    # larger activity can only shorten the guaranteed window
    zs = [0.1, 0.5, 1.0, 2.0]
    ts = [guaranteed_horizon(1.5, 3.0, 0.7, z, 2.0) for z in zs]
    assert all(a > b for a, b in zip(ts, ts[1:]))


def test_guaranteed_horizon_rejects_bad_band():
    for alpha, alpha0 in ((2.0, 2.0), (3.0, 2.0), (0.0, 1.0), (-1.0, 1.0)):
        with pytest.raises(ConfigError):
            guaranteed_horizon(alpha, alpha0, 1.0, 1.0, 1.0)


# ----------------------------------------------------------------------
# factorized-state identity (quick variant; acceptance runs the big one)


def test_exponential_ansatz_residual_small():
    n, length = 64, 10.0
    ker = kernel_1d(n, length)
    x = np.arange(n) * (length / n)
    f0 = DensityField2(
        1, n, length,
        0.9 + 0.4 * np.cos(2 * np.pi * x / length),
        0.7 + 0.2 * np.sin(2 * np.pi * x / length),
    )
    theta_p = 0.5 * np.exp(-((x - 3.0) ** 2) / 0.8)
    theta_m = -0.3 * np.exp(-((x - 6.0) ** 2) / 1.2)
    out = verify_exponential_ansatz(ker, 1.0, 1.5, f0, theta_p, theta_m,
                                    t_check=0.01, dt_fd=1e-3)
    assert out["residual_rel"] <= 1e-5
    assert out["b_value"] > 0.0


def test_exponential_ansatz_rejects_mismatched_grids():
    ker = kernel_1d()
    f0 = wavy_field_1d()
    with pytest.raises(ConfigError):
        verify_exponential_ansatz(ker, 1.0, 1.0, f0, np.zeros(32), np.zeros(64), 0.01)
    with pytest.raises(ConfigError):
        verify_exponential_ansatz(ker, 1.0, 1.0, f0, np.zeros(64), np.zeros(64), 0.0105, 1e-3)
