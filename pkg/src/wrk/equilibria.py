"""Homogeneous equilibria: root structure, stability, portraits, bifurcation.

In rescaled variables ``x = beta * rho+`` and ``y = beta * rho-`` the
stationary conditions read ``x = a exp(-y)``, ``y = a exp(-x)`` with the
single dimensionless group ``a = z * beta / m``.  Eliminating ``y`` turns the
problem into the scalar root hunt

    f(x) = a * exp(-a * exp(-x)) - x = 0,

whose extrema are located by the auxiliary

    g(x) = x + a * exp(-x) - 2 * ln(a).

For ``a <= e`` there is exactly one symmetric equilibrium; for ``a > e`` a
symmetric saddle coexists with two asymmetric stable nodes exchanged by the
species swap.  All root finding here is plain bisection: brackets with
guaranteed sign changes exist analytically, and bisection's reliability is
worth more than iteration count at this problem size.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from . import kinetics
from .errors import ConfigError, NumericalError

E = math.e

SADDLE_NODE_TOL = 1e-9        # |D| below this (times m^2) means degenerate
BIFURCATION_ATOL = 1e-12      # |a - e| below this is treated as a = e
RELATION_TOL = 1e-10          # partner / cross-check residual budget


def f_func(a: float, x):
    """Fixed-point defect of the doubled stationary map; roots are equilibria.

    For small inner exponent the straightforward ``a e^{-a e^{-x}} - x``
    loses the sign to rounding (``exp`` of a tiny argument collapses to 1), so
    the evaluation switches to the equivalent ``a expm1(-u) + (a - x)`` there.
    """
    x = np.asarray(x, dtype=np.float64)
    u = a * np.exp(-x)
    direct = a * np.exp(-u) - x
    small = a * np.expm1(-u) + (a - x)
    out = np.where(u < 1e-8, small, direct)
    return out if out.ndim else float(out)


def g_func(a: float, x):
    """Extremum locator for f: f'(x) = 0 exactly where g(x) = 0."""
    return np.asarray(x, dtype=np.float64) + a * np.exp(-np.asarray(x, dtype=np.float64)) - 2.0 * math.log(a)


def _bisect(fn, lo: float, hi: float, *, max_iter: int = 200) -> float:
    """Bisection to floating-point interval exhaustion; assumes a bracket."""
    flo = fn(lo)
    fhi = fn(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if (flo > 0) == (fhi > 0):
        raise NumericalError(f"no sign change on [{lo}, {hi}]: f={flo}, {fhi}")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        fmid = fn(mid)
        if fmid == 0.0:
            return mid
        if (fmid > 0) == (flo > 0):
            lo, flo = mid, fmid
        else:
            hi, fhi = mid, fmid
    return 0.5 * (lo + hi)


def find_roots(a: float, *, tol: float = 1e-12) -> list[float]:
    """All x-components of stationary states, ascending.

    Returns one root for ``a <= e`` and three for ``a > e``.  Postconditions
    checked before returning: residual ``|f| <= tol``, the partner relations
    ``x1 = a exp(-x3)``, ``x2 = a exp(-x2)``, ``x3 = a exp(-x1)`` to 1e-10, an
    independent cross-check of the symmetric root via ``x e^x = a``, and the
    analytic bounds (x1 below, x3 above their closed-form envelopes, every
    root below a, x1 < 1 < x2, x1 * x3 < 1).

    Very close to the bifurcation (0 < |a - e| < ~1e-9) the three roots merge
    beyond floating-point separation; exactly-critical input is handled by
    the BIFURCATION_ATOL special case.
    """
    if not (math.isfinite(a) and a > 0):
        raise ConfigError(f"a must be positive and finite, got {a}")
    if a > 700.0:
        raise ConfigError(f"a={a}: the small root a*e^(-a) underflows double precision")

    def f(x):
        u = a * math.exp(-x)
        if u < 1e-8:
            return a * math.expm1(-u) + (a - x)
        return a * math.exp(-u) - x

    def g(x):
        return x + a * math.exp(-x) - 2.0 * math.log(a)

    def sym(x):
        # equivalent equation x e^x = a for the symmetric root; unlike f it
        # stays well conditioned through the bifurcation
        return x * math.exp(x) - a

    if abs(a - E) <= BIFURCATION_ATOL:
        return [1.0]

    if a < E:
        x0 = _bisect(f, 0.0, a)
        x0_sym = _bisect(sym, 0.0, max(1.0, a))
        if abs(x0 - x0_sym) > _merge_window(a):
            raise NumericalError(f"root routes disagree: {x0} vs {x0_sym}")
        _check_roots(a, [x0_sym], tol)
        return [x0_sym]

    ln_a = math.log(a)
    y1 = _bisect(g, 0.0, ln_a)
    hi = 2.0 * ln_a + a
    while g(hi) <= 0.0:  # analytic bracket; expansion is belt and braces
        hi = ln_a + 2.0 * (hi - ln_a)
    y2 = _bisect(g, ln_a, hi)
    if not (f(y1) < 0.0 < f(y2)):
        raise NumericalError(
            f"a={a} is too close to the bifurcation to separate three roots"
        )
    x2 = _bisect(f, y1, y2)
    x2_sym = _bisect(sym, 0.0, max(1.0, a))
    if abs(x2 - x2_sym) > _merge_window(a):
        raise NumericalError(f"symmetric-root routes disagree: {x2} vs {x2_sym}")
    roots = [_bisect(f, 0.0, y1), x2_sym, _bisect(f, y2, a)]
    if not (0.0 < y1 < roots[1] < y2):
        raise NumericalError("extrema do not interlace the roots")
    _check_roots(a, roots, tol)
    return roots


def _merge_window(a: float) -> float:
    """Root uncertainty from floating-point noise in the flat region of f.

    Near the bifurcation f is cubically flat, so sign evaluations carry a
    noise window that scales like eps / |a - e|; far from it the window is
    machine-level.
    """
    sep = abs(a - E)
    return min(1e-3, max(1e-10, 4e-15 / max(sep, 1e-15)))


def _check_roots(a: float, roots: list[float], tol: float) -> None:
    window = _merge_window(a)
    for x in roots:
        resid = abs(float(f_func(a, x)))
        if resid > max(tol, window):
            raise NumericalError(f"root residual {resid} > {tol} at x={x}")
        # upper comparison allows the half-ulp case where the large root is
        # closer to a than float spacing
        if not (0.0 < x <= a * (1.0 + 1e-15)):
            raise NumericalError(f"root x={x} outside (0, a)")
    rel_tol = max(RELATION_TOL * max(1.0, a), window)
    if len(roots) == 1:
        x0 = roots[0]
        if abs(x0 - a * math.exp(-x0)) > rel_tol:
            raise NumericalError("symmetric root does not satisfy x = a exp(-x)")
        return
    x1, x2, x3 = roots
    if abs(x1 - a * math.exp(-x3)) > rel_tol:
        raise NumericalError("partner relation x1 = a exp(-x3) violated")
    if abs(x3 - a * math.exp(-x1)) > rel_tol:
        raise NumericalError("partner relation x3 = a exp(-x1) violated")
    if abs(x2 - a * math.exp(-x2)) > rel_tol:
        raise NumericalError("partner relation x2 = a exp(-x2) violated")
    # strict inequalities mathematically; compared with 2-ulp slack because
    # x3 and its envelope can collapse to the same float at large a
    upper1 = a * math.exp(-a / E)
    lower3 = a * math.exp(-a * math.exp(-a / E))
    slack = 4e-16 * max(1.0, a)
    if not (x1 < upper1 + slack and x3 > lower3 - slack):
        raise NumericalError("analytic envelopes for x1/x3 violated")
    if not (x1 < 1.0 < x2):
        raise NumericalError("expected x1 < 1 < x2")
    if not (x1 * x3 < 1.0):
        raise NumericalError("expected x1 * x3 < 1")


# ----------------------------------------------------------------------
# linear stability


@dataclass(frozen=True)
class StationaryRoot:
    """One equilibrium (x, y) with its linearization data."""

    x: float
    y: float
    determinant: float
    trace: float
    discriminant: float
    kind: str

    def to_dict(self) -> dict:
        return {
            "x": self.x,
            "y": self.y,
            "determinant": self.determinant,
            "trace": self.trace,
            "discriminant": self.discriminant,
            "kind": self.kind,
        }


def classify(a: float, x: float, y: float, m: float = 1.0) -> StationaryRoot:
    """Linearize at (x, y) and classify the equilibrium.

    The Jacobian in rescaled variables is
    ``[[-m, -m a e^{-y}], [-m a e^{-x}, -m]]``; its determinant
    ``m^2 (1 - a^2 e^{-(x+y)})`` decides node vs saddle, and the discriminant
    ``4 m^2 a^2 e^{-(x+y)}`` is strictly positive, so spirals cannot occur.
    """
    if m <= 0:
        raise ConfigError(f"m must be > 0, got {m}")
    det = m * m * (1.0 - a * a * math.exp(-(x + y)))
    trace = -2.0 * m
    disc = trace * trace - 4.0 * det
    if disc < -1e-12 * m * m:
        raise NumericalError("negative discriminant: complex eigenvalues are impossible here")
    if abs(det) <= SADDLE_NODE_TOL * m * m:
        kind = "saddle-node"
    elif det < 0.0:
        kind = "saddle"
    else:
        kind = "stable-node"
    return StationaryRoot(float(x), float(y), det, trace, disc, kind)


@dataclass(frozen=True)
class EquilibriumReport:
    """Full stationary picture at one parameter point."""

    a: float
    m: float
    beta: float
    roots: tuple[StationaryRoot, ...]

    @property
    def count(self) -> int:
        return len(self.roots)

    def to_dict(self) -> dict:
        return {
            "a": self.a,
            "m": self.m,
            "beta": self.beta,
            "z": self.a * self.m / self.beta,
            "count": self.count,
            "roots": [
                dict(r.to_dict(), rho_plus=r.x / self.beta, rho_minus=r.y / self.beta)
                for r in self.roots
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def equilibrium_report(a: float, m: float = 1.0, beta: float = 1.0) -> EquilibriumReport:
    """Find all equilibria at parameter a and classify each."""
    if beta <= 0:
        raise ConfigError(f"beta must be > 0, got {beta}")
    xs = find_roots(a)
    if len(xs) == 1:
        pairs = [(xs[0], xs[0])]
    else:
        x1, x2, x3 = xs
        pairs = [(x1, x3), (x2, x2), (x3, x1)]
    roots = tuple(classify(a, x, y, m) for x, y in pairs)
    return EquilibriumReport(float(a), float(m), float(beta), roots)


# ----------------------------------------------------------------------
# dynamics helpers


def integrate_homog(
    m: float,
    z: float,
    beta: float,
    rho0_p,
    rho0_m,
    t_end: float,
    dt: float = 1e-3,
    *,
    method: str = "picard",
    store_every: int = 1,
) -> kinetics.HomogeneousRun:
    """Integrate the space-independent system.

    Thin delegate to :func:`wrk.kinetics.homogeneous_reduce`; there is exactly
    one implementation of the reduced dynamics in the package.
    """
    return kinetics.homogeneous_reduce(
        m, z, beta, rho0_p, rho0_m, t_end, dt, method=method, store_every=store_every
    )


@dataclass
class PhasePortrait:
    """Bundle of reduced-dynamics trajectories from a grid of initial data."""

    a: float
    m: float
    beta: float
    z: float
    ics: NDArray[np.float64]          # (n_ic, 2) initial densities
    times: NDArray[np.float64]
    rho_p: NDArray[np.float64]        # (n_times, n_ic)
    rho_m: NDArray[np.float64]
    report: EquilibriumReport
    terminal_root: NDArray[np.int64]  # index into report.roots
    terminal_distance: NDArray[np.float64]  # in rescaled (x, y) coordinates
    terminal_drift: NDArray[np.float64]


def phase_portrait(
    a: float,
    m: float = 1.0,
    beta: float = 1.0,
    ic_values: tuple[float, ...] = (0.0, 0.5, 1.0, 1.5, 2.0),
    t_end: float = 200.0,
    dt: float = 0.02,
    *,
    store_every: int = 5,
    method: str = "rk4",
) -> PhasePortrait:
    """Integrate every initial pair from ``ic_values x ic_values``.

    Activity is set by the reporting convention z = a * m / beta, so ``a`` is
    the only free knob.  Trajectories run in one vectorized batch; terminal
    points are labeled with the nearest equilibrium and with the local drift
    magnitude (sup norm of the right-hand side at the final state).
    """
    z = a * m / beta
    grid = [(p, q) for p in ic_values for q in ic_values]
    ics = np.array(grid, dtype=np.float64)
    run = integrate_homog(
        m, z, beta, ics[:, 0], ics[:, 1], t_end, dt, method=method, store_every=store_every
    )
    report = equilibrium_report(a, m, beta)
    xp = beta * run.rho_p[-1]
    xm = beta * run.rho_m[-1]
    root_xy = np.array([(r.x, r.y) for r in report.roots])
    d2 = (xp[:, None] - root_xy[None, :, 0]) ** 2 + (xm[:, None] - root_xy[None, :, 1]) ** 2
    terminal_root = np.argmin(d2, axis=1)
    terminal_distance = np.sqrt(d2[np.arange(len(ics)), terminal_root])
    drift_p = -m * run.rho_p[-1] + z * np.exp(-beta * run.rho_m[-1])
    drift_m = -m * run.rho_m[-1] + z * np.exp(-beta * run.rho_p[-1])
    terminal_drift = np.maximum(np.abs(drift_p), np.abs(drift_m))
    return PhasePortrait(
        a, m, beta, z, ics, run.times, run.rho_p, run.rho_m, report,
        terminal_root, terminal_distance, terminal_drift,
    )


@dataclass(frozen=True)
class BifurcationRow:
    a: float
    roots: tuple[StationaryRoot, ...]


def bifurcation_scan(
    a_min: float, a_max: float, steps: int, m: float = 1.0
) -> list[BifurcationRow]:
    """Equilibria and classes on a uniform grid of the control parameter."""
    if not (0 < a_min <= a_max) or steps < 1:
        raise ConfigError("need 0 < a_min <= a_max and steps >= 1")
    rows = []
    for a in np.linspace(a_min, a_max, steps):
        rows.append(BifurcationRow(float(a), equilibrium_report(float(a), m).roots))
    return rows
