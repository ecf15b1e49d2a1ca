"""Potential kinds: evaluation, norms, rescaling, periodization."""
from __future__ import annotations

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from wrk.potential import PairPotential, PotentialError, periodize


def l1_quadrature_oracle(phi: PairPotential) -> float:
    """Independent route to the L1 norm: adaptive quadrature of the profile."""
    if phi.dim == 1:
        v, _ = integrate.quad(lambda r: float(phi.radial(r)), 0.0, phi.cutoff, limit=400)
        return 2.0 * v
    v, _ = integrate.quad(lambda r: r * float(phi.radial(r)), 0.0, phi.cutoff, limit=400)
    return 2.0 * math.pi * v


SAMPLE_POTENTIALS = [
    PairPotential.top_hat(1.5, 0.75, dim=1),
    PairPotential.top_hat(2.0, 1.0, dim=2),
    PairPotential.truncated_exponential(1.0, 1.0, 20.0, dim=1),
    PairPotential.truncated_exponential(0.7, 2.5, 3.0, dim=2),
    PairPotential.truncated_gaussian(1.5, 0.8, 2.0, dim=1),
    PairPotential.truncated_gaussian(1.2, 0.5, 1.8, dim=2),
    PairPotential.tabulated([0.0, 0.3, 0.7, 1.1], [2.0, 1.5, 0.4, 0.0], dim=1),
    PairPotential.tabulated([0.0, 0.5, 1.0], [1.0, 1.0, 0.2], dim=2),
]

# Frozen from the quadrature oracle above (run offline, error < 3e-12).
FROZEN_L1 = {
    (0, "top-hat", 1): 2.25,
    (1, "top-hat", 2): 6.283185307179586,
    (2, "truncated-exponential", 1): 1.9999999958776928,
    (3, "truncated-exponential", 2): 0.700408429132201,
    (4, "truncated-gaussian", 1): 2.9705971551213937,
    (5, "truncated-gaussian", 2): 1.8820644271365778,
}


@pytest.mark.parametrize("idx,phi", list(enumerate(SAMPLE_POTENTIALS)))
def test_l1_norm_matches_quadrature_oracle(idx, phi):
    assert phi.l1_norm() == pytest.approx(l1_quadrature_oracle(phi), rel=1e-10)
    key = (idx, phi.kind, phi.dim)
    if key in FROZEN_L1:
        assert phi.l1_norm() == pytest.approx(FROZEN_L1[key], rel=1e-12)


@pytest.mark.parametrize("phi", SAMPLE_POTENTIALS)
def test_evaluate_symmetric_nonnegative_compact(phi):
    rng = np.random.default_rng(7)
    if phi.dim == 1:
        x = rng.uniform(-2.0 * phi.cutoff, 2.0 * phi.cutoff, size=64)
    else:
        x = rng.uniform(-2.0 * phi.cutoff, 2.0 * phi.cutoff, size=(64, 2))
    v = phi.evaluate(x)
    assert np.array_equal(v, phi.evaluate(-x))
    assert np.all(v >= 0.0)
    r = np.abs(x) if phi.dim == 1 else np.hypot(x[:, 0], x[:, 1])
    assert np.all(v[r > phi.cutoff] == 0.0)
    assert np.all(v <= phi.linf_norm() + 1e-15)


def test_top_hat_values_and_boundary():
    phi = PairPotential.top_hat(2.0, 0.5, dim=1)
    assert phi.evaluate(0.0) == 2.0
    assert phi.evaluate(0.5) == 2.0  # closed ball convention
    assert phi.evaluate(0.5000001) == 0.0
    assert phi.linf_norm() == 2.0


def test_tabulated_interpolates_linearly():
    phi = PairPotential.tabulated([0.0, 1.0, 2.0], [4.0, 2.0, 0.0], dim=1)
    assert phi.evaluate(0.5) == pytest.approx(3.0)
    assert phi.evaluate(1.5) == pytest.approx(1.0)
    assert phi.evaluate(2.5) == 0.0
    # trapezoid equals adaptive quadrature exactly for a piecewise-linear profile
    assert phi.l1_norm() == pytest.approx(l1_quadrature_oracle(phi), rel=1e-12)


@pytest.mark.parametrize("phi", SAMPLE_POTENTIALS)
@pytest.mark.parametrize("eps", [1.0, 0.5, 0.25, 2.0])
def test_scale_lp_preserves_mass_and_scales_pointwise(phi, eps):
    scaled = phi.scale_lp(eps)
    assert scaled.l1_norm() == pytest.approx(phi.l1_norm(), rel=1e-12)
    assert scaled.cutoff == pytest.approx(phi.cutoff / eps, rel=1e-12)
    assert scaled.linf_norm() == pytest.approx(eps**phi.dim * phi.linf_norm(), rel=1e-12)
    rng = np.random.default_rng(11)
    if phi.dim == 1:
        x = rng.uniform(-1.5 * scaled.cutoff, 1.5 * scaled.cutoff, size=32)
    else:
        x = rng.uniform(-1.5 * scaled.cutoff, 1.5 * scaled.cutoff, size=(32, 2))
    np.testing.assert_allclose(
        scaled.evaluate(x), eps**phi.dim * phi.evaluate(eps * x), rtol=1e-12, atol=1e-14
    )


@given(
    eps=st.floats(0.05, 4.0),
    height=st.floats(0.01, 5.0),
    radius=st.floats(0.1, 3.0),
)
@settings(max_examples=60, deadline=None)
def test_psi_eps_bounds_and_limit(eps, height, radius):
    phi = PairPotential.top_hat(height, radius, dim=1)
    x = np.linspace(-1.2 * radius, 1.2 * radius, 41)
    v = phi.evaluate(x)
    psi = phi.psi_eps(x, eps)
    assert np.all(psi <= 0.0)
    assert np.all(psi >= -v - 1e-12)
    # pointwise: 0 <= phi + psi_eps <= eps^d * linf * phi
    gap = v + psi
    assert np.all(gap >= -1e-12)
    assert np.all(gap <= eps * phi.linf_norm() * v + 1e-12)
    # smaller eps moves psi_eps closer to -phi
    psi_half = phi.psi_eps(x, eps / 2.0)
    assert np.all(psi_half <= psi + 1e-12)


@pytest.mark.parametrize("phi", SAMPLE_POTENTIALS)
def test_json_round_trip_is_exact(phi):
    clone = PairPotential.from_json(phi.to_json())
    assert clone == phi
    assert clone.to_json() == phi.to_json()
    d = json.loads(phi.to_json())
    assert set(d) == {"kind", "params", "cutoff", "dim"}


def test_validation_errors():
    with pytest.raises(PotentialError):
        PairPotential.top_hat(-1.0, 0.5)
    with pytest.raises(PotentialError):
        PairPotential.top_hat(1.0, 0.0)
    with pytest.raises(PotentialError):
        PairPotential("top-hat", {"height": 1.0, "radius": 1.0}, cutoff=2.0, dim=1)
    with pytest.raises(PotentialError):
        PairPotential.truncated_gaussian(1.0, -0.5, 1.0)
    with pytest.raises(PotentialError):
        PairPotential.tabulated([0.0, 1.0], [1.0, -0.5])
    with pytest.raises(PotentialError):
        PairPotential.tabulated([0.5, 1.0], [1.0, 0.0])
    with pytest.raises(PotentialError):
        PairPotential.truncated_exponential(1.0, 1.0, 1.0, dim=3)


# ----------------------------------------------------------------------
# periodization


def brute_force_image_sum(phi: PairPotential, length: float, point, k_max: int = 6):
    """Oracle: direct image sum at one point, wide image window."""
    total = 0.0
    if phi.dim == 1:
        for k in range(-k_max, k_max + 1):
            total += float(phi.radial(abs(point + k * length)))
    else:
        for kx in range(-k_max, k_max + 1):
            for ky in range(-k_max, k_max + 1):
                total += float(
                    phi.radial(math.hypot(point[0] + kx * length, point[1] + ky * length))
                )
    return total


@pytest.mark.parametrize(
    "phi,length,n",
    [
        (PairPotential.top_hat(1.0, 0.5, dim=1), 10.0, 64),
        (PairPotential.truncated_exponential(0.8, 1.7, 2.5, dim=1), 8.0, 50),
        (PairPotential.truncated_gaussian(1.1, 0.4, 1.5, dim=2), 6.0, 12),
    ],
)
def test_periodize_matches_image_sum_oracle(phi, length, n):
    ker = periodize(phi, length, n)
    dx = length / n
    if phi.dim == 1:
        for i in range(0, n, 7):
            assert ker.values[i] == pytest.approx(
                brute_force_image_sum(phi, length, i * dx), abs=1e-13
            )
    else:
        for i in range(0, n, 5):
            for j in range(0, n, 3):
                assert ker.values[i, j] == pytest.approx(
                    brute_force_image_sum(phi, length, (i * dx, j * dx)), abs=1e-13
                )


def test_periodize_wrap_symmetry_and_mass():
    phi = PairPotential.truncated_gaussian(1.0, 0.6, 2.0, dim=1)
    ker = periodize(phi, 12.0, 96)
    idx = np.arange(96)
    np.testing.assert_allclose(ker.values, ker.values[(96 - idx) % 96], rtol=0, atol=1e-14)
    # grid mass approximates the L1 norm at first order in dx
    assert ker.discrete_l1 == pytest.approx(phi.l1_norm(), rel=5e-3)

    phi2 = PairPotential.top_hat(1.0, 0.5, dim=2)
    ker2 = periodize(phi2, 7.0, 21)
    np.testing.assert_allclose(
        ker2.values, ker2.values[(21 - idx[:21]) % 21][:, (21 - idx[:21]) % 21], atol=1e-14
    )


def test_periodize_warns_when_torus_too_small():
    phi = PairPotential.top_hat(1.0, 3.0, dim=1)
    with pytest.warns(UserWarning, match="periodic images overlap"):
        periodize(phi, 5.0, 32)


def test_periodic_kernel_values_read_only():
    ker = periodize(PairPotential.top_hat(1.0, 0.5, dim=1), 10.0, 32)
    with pytest.raises(ValueError):
        ker.values[0] = 99.0
