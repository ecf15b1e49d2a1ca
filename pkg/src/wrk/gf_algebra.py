"""Exact calculus on finite two-type point configurations.

Everything here is small and combinatorial on purpose: configurations carry at
most a dozen points so that sums over all subsets (2^size terms) stay exact
and fast.  The module provides the additive-to-multiplicative transform of
functions on configurations together with its signed inverse, product
exponentials, the closed-form action of the evolution symbol on those
exponentials, and brute-force checks of the identities that the closed form
rests on.  It is the property-testing ground for the analytic layer; nothing
in it is used on the hot simulation path.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.typing import NDArray

from .errors import ConfigError
from .potential import PairPotential

DEFAULT_MAX_SIZE = 12

Point = NDArray[np.float64]


def _as_points(points, dim: int | None = None) -> NDArray[np.float64]:
    arr = np.asarray(points, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None] if arr.size else arr.reshape(0, dim or 1)
    if arr.ndim != 2:
        raise ConfigError(f"points must be an (n, d) array, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class FiniteConfiguration2:
    """A finite set of plus-points and a disjoint finite set of minus-points.

    Point lists are (n, d) arrays.  Duplicates within a list and shared points
    across the two lists are rejected, and the total size is capped (default
    12) because downstream transforms enumerate every subset pair.
    """

    points_plus: NDArray[np.float64]
    points_minus: NDArray[np.float64]
    max_size: int = DEFAULT_MAX_SIZE

    def __post_init__(self) -> None:
        pp = _as_points(self.points_plus)
        pm = _as_points(self.points_minus, dim=pp.shape[1] if pp.size else None)
        if pp.size == 0 and pm.size > 0:
            pp = pp.reshape(0, pm.shape[1])
        if pp.shape[1] != pm.shape[1]:
            raise ConfigError(f"point dimensions differ: {pp.shape[1]} vs {pm.shape[1]}")
        if not (np.all(np.isfinite(pp)) and np.all(np.isfinite(pm))):
            raise ConfigError("configuration points must be finite")
        if pp.shape[0] + pm.shape[0] > self.max_size:
            raise ConfigError(
                f"configuration size {pp.shape[0] + pm.shape[0]} exceeds the "
                f"subset-sum limit {self.max_size}"
            )
        for name, arr in (("plus", pp), ("minus", pm)):
            if len({tuple(row) for row in arr}) != arr.shape[0]:
                raise ConfigError(f"duplicate point in the {name} list")
        if {tuple(r) for r in pp} & {tuple(r) for r in pm}:
            raise ConfigError("plus and minus lists must be disjoint")
        pp.setflags(write=False)
        pm.setflags(write=False)
        object.__setattr__(self, "points_plus", pp)
        object.__setattr__(self, "points_minus", pm)

    @classmethod
    def empty(cls, dim: int = 1, max_size: int = DEFAULT_MAX_SIZE) -> "FiniteConfiguration2":
        z = np.zeros((0, dim))
        return cls(z, z.copy(), max_size)

    @property
    def dim(self) -> int:
        return self.points_plus.shape[1]

    @property
    def n_plus(self) -> int:
        return self.points_plus.shape[0]

    @property
    def n_minus(self) -> int:
        return self.points_minus.shape[0]

    @property
    def size(self) -> int:
        return self.n_plus + self.n_minus

    def subset(self, mask_plus: int, mask_minus: int) -> "FiniteConfiguration2":
        """Sub-configuration selected by per-species index bitmasks."""
        keep_p = [i for i in range(self.n_plus) if mask_plus >> i & 1]
        keep_m = [i for i in range(self.n_minus) if mask_minus >> i & 1]
        return FiniteConfiguration2(
            self.points_plus[keep_p], self.points_minus[keep_m], self.max_size
        )


def _eval_at(f: Callable, points: NDArray[np.float64]) -> NDArray[np.complex128]:
    """Evaluate a scalar callable at each row of an (n, d) point array."""
    out = np.empty(points.shape[0], dtype=np.complex128)
    for i, p in enumerate(points):
        out[i] = complex(f(p if p.size > 1 else float(p[0])))
    return out


def lp_exponential(f_plus: Callable, f_minus: Callable, eta: FiniteConfiguration2) -> complex:
    """Product of f+ over the plus-points times f- over the minus-points.

    The empty configuration gives 1, making this the multiplicative unit the
    transforms below are built from.
    """
    val = complex(np.prod(_eval_at(f_plus, eta.points_plus))) if eta.n_plus else 1.0 + 0j
    if eta.n_minus:
        val *= complex(np.prod(_eval_at(f_minus, eta.points_minus)))
    return complex(val)


def k_transform(
    G: Callable[[FiniteConfiguration2], complex],
    gamma: FiniteConfiguration2,
    max_size: int = DEFAULT_MAX_SIZE,
) -> complex:
    """Sum of G over every subset pair of gamma (2^size terms)."""
    if gamma.size > max_size:
        raise ConfigError(f"configuration size {gamma.size} exceeds limit {max_size}")
    total = 0.0 + 0j
    for mp in range(1 << gamma.n_plus):
        for mm in range(1 << gamma.n_minus):
            total += complex(G(gamma.subset(mp, mm)))
    return total


def k_inverse(
    F: Callable[[FiniteConfiguration2], complex],
    eta: FiniteConfiguration2,
    max_size: int = DEFAULT_MAX_SIZE,
) -> complex:
    """Signed subset sum inverting :func:`k_transform` on bounded sizes."""
    if eta.size > max_size:
        raise ConfigError(f"configuration size {eta.size} exceeds limit {max_size}")
    total = 0.0 + 0j
    for mp in range(1 << eta.n_plus):
        for mm in range(1 << eta.n_minus):
            dropped = (eta.n_plus - mp.bit_count()) + (eta.n_minus - mm.bit_count())
            term = complex(F(eta.subset(mp, mm)))
            total += -term if dropped & 1 else term
    return total


def relative_energy(x, points, phi: PairPotential) -> float:
    """Interaction energy of a point x against a finite point cloud."""
    pts = _as_points(points)
    if pts.shape[0] == 0:
        return 0.0
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.size != pts.shape[1]:
        raise ConfigError(f"point has dimension {x.size}, cloud has {pts.shape[1]}")
    diff = x[None, :] - pts
    if phi.dim == 1:
        return float(np.sum(phi.evaluate(diff[:, 0])))
    return float(np.sum(phi.evaluate(diff)))


def verify_equation8(theta: Callable, x, eta_points, phi: PairPotential,
                     max_size: int = DEFAULT_MAX_SIZE) -> float:
    """Residual of the single-species factorization identity.

    Summing theta-products over subsets xi of eta, each weighted by the Boltzmann
    factor of x against xi and the complementary product of (e^{-phi(x-.)} - 1),
    must telescope into one product over eta.  Returns |subset sum - product|.
    """
    pts = _as_points(eta_points)
    n = pts.shape[0]
    if n > max_size:
        raise ConfigError(f"configuration size {n} exceeds limit {max_size}")
    if n == 0:
        return 0.0
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    diff = x[None, :] - pts
    boltz = np.exp(-(phi.evaluate(diff[:, 0]) if phi.dim == 1 else phi.evaluate(diff)))
    tvals = _eval_at(theta, pts)

    lhs = 0.0 + 0j
    for mask in range(1 << n):
        term = 1.0 + 0j
        for i in range(n):
            term *= tvals[i] * boltz[i] if mask >> i & 1 else boltz[i] - 1.0
        lhs += term
    rhs = complex(np.prod(tvals * boltz + boltz - 1.0))
    return abs(lhs - rhs)


# ----------------------------------------------------------------------
# grid-sampled test function pairs and the symbol action


@dataclass(frozen=True)
class FunctionPair:
    """Complex test-function pair sampled on a tensor grid over a box.

    Keeps the originating callables so values at off-grid points (the
    configuration points) remain available; the node/weight arrays define the
    quadrature used for the birth integrals.
    """

    dim: int
    box_lo: NDArray[np.float64]
    box_hi: NDArray[np.float64]
    nodes: NDArray[np.float64]  # (n_nodes, dim)
    weights: NDArray[np.float64]
    values_plus: NDArray[np.complex128]
    values_minus: NDArray[np.complex128]
    func_plus: Callable | None = field(default=None, compare=False)
    func_minus: Callable | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        for name in ("box_lo", "box_hi", "nodes", "weights"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        for name in ("values_plus", "values_minus"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.complex128))
        if self.dim not in (1, 2):
            raise ConfigError(f"dim must be 1 or 2, got {self.dim}")
        if self.nodes.shape != (self.weights.size, self.dim):
            raise ConfigError("nodes must be (n_nodes, dim) matching the weights")
        if self.values_plus.shape != self.weights.shape or self.values_minus.shape != self.weights.shape:
            raise ConfigError("sampled values must be one per node")
        finite = (
            np.all(np.isfinite(self.weights))
            and np.all(np.isfinite(self.values_plus))
            and np.all(np.isfinite(self.values_minus))
        )
        if not finite:
            raise ConfigError("test functions must have a finite quadrature norm")

    @classmethod
    def from_callables(
        cls,
        f_plus: Callable,
        f_minus: Callable,
        box_lo,
        box_hi,
        n_per_axis: int,
        dim: int = 1,
    ) -> "FunctionPair":
        """Sample two callables on an n^dim trapezoid grid over [lo, hi]^dim."""
        lo = np.broadcast_to(np.asarray(box_lo, dtype=np.float64), (dim,)).copy()
        hi = np.broadcast_to(np.asarray(box_hi, dtype=np.float64), (dim,)).copy()
        if n_per_axis < 2 or np.any(hi <= lo):
            raise ConfigError("need n_per_axis >= 2 and box_hi > box_lo")
        axes = [np.linspace(lo[k], hi[k], n_per_axis) for k in range(dim)]
        w1 = [np.full(n_per_axis, (hi[k] - lo[k]) / (n_per_axis - 1)) for k in range(dim)]
        for w in w1:
            w[0] *= 0.5
            w[-1] *= 0.5
        if dim == 1:
            nodes = axes[0][:, None]
            weights = w1[0]
        else:
            gx, gy = np.meshgrid(axes[0], axes[1], indexing="ij")
            nodes = np.column_stack([gx.ravel(), gy.ravel()])
            weights = np.outer(w1[0], w1[1]).ravel()
        return cls(
            dim, lo, hi, nodes, weights,
            _eval_at(f_plus, nodes), _eval_at(f_minus, nodes),
            func_plus=f_plus, func_minus=f_minus,
        )

    @property
    def l1_norm(self) -> float:
        return float(np.sum(self.weights * (np.abs(self.values_plus) + np.abs(self.values_minus))))

    def margin_to_support(self) -> float:
        """Distance from the box boundary to the outermost node carrying a
        nonzero value of either function (per-axis minimum)."""
        live = (self.values_plus != 0) | (self.values_minus != 0)
        if not np.any(live):
            return float(np.min(self.box_hi - self.box_lo))
        pts = self.nodes[live]
        return float(min(np.min(pts - self.box_lo[None]), np.min(self.box_hi[None] - pts)))


def hat_L_on_exponential(
    theta: FunctionPair,
    eta: FiniteConfiguration2,
    m: float,
    z: float,
    phi: PairPotential,
) -> complex:
    """Closed-form action of the evolution symbol on a product exponential.

    Death contributes -m * size times the plain product; each birth term is a
    quadrature integral of theta at the new point times the product with the
    opposite-species argument shifted by the Boltzmann factor of the new point.
    The quadrature box must contain the support of theta enlarged by the
    interaction cutoff.
    """
    if m < 0 or z < 0:
        raise ConfigError(f"need m >= 0 and z >= 0, got m={m}, z={z}")
    if eta.size and eta.dim != theta.dim:
        raise ConfigError(f"configuration dim {eta.dim} != test function dim {theta.dim}")
    if phi.dim != theta.dim:
        raise ConfigError(f"potential dim {phi.dim} != test function dim {theta.dim}")
    if z > 0 and theta.margin_to_support() < phi.cutoff:
        raise ConfigError(
            "quadrature box too small: support must sit at least one cutoff "
            f"radius inside the box (margin {theta.margin_to_support():.3g} "
            f"< cutoff {phi.cutoff:.3g})"
        )
    if theta.func_plus is None or theta.func_minus is None:
        raise ConfigError("test function pair must carry callables for off-grid points")

    tp_eta = _eval_at(theta.func_plus, eta.points_plus)
    tm_eta = _eval_at(theta.func_minus, eta.points_minus)
    e_plain = complex(np.prod(tp_eta) * np.prod(tm_eta))
    out = -m * eta.size * e_plain
    if z == 0:
        return out

    def boltz_block(points: NDArray[np.float64]) -> NDArray[np.float64]:
        # e^{-phi(node - point)} for every (node, point) pair
        if points.shape[0] == 0:
            return np.ones((theta.nodes.shape[0], 0))
        diff = theta.nodes[:, None, :] - points[None, :, :]
        if phi.dim == 1:
            return np.exp(-phi.evaluate(diff[:, :, 0]))
        return np.exp(-phi.evaluate(diff.reshape(-1, 2)).reshape(diff.shape[:2]))

    kb_minus = boltz_block(eta.points_minus)
    kb_plus = boltz_block(eta.points_plus)
    # build products of (theta * b + b - 1) over the opposite species, per node
    shifted_minus = np.prod(tm_eta[None, :] * kb_minus + kb_minus - 1.0, axis=1)
    shifted_plus = np.prod(tp_eta[None, :] * kb_plus + kb_plus - 1.0, axis=1)
    birth_plus = np.sum(theta.weights * theta.values_plus * shifted_minus) * complex(np.prod(tp_eta))
    birth_minus = np.sum(theta.weights * theta.values_minus * shifted_plus) * complex(np.prod(tm_eta))
    return complex(out + z * birth_plus + z * birth_minus)


def meanlp_check(theta: FunctionPair, rho_plus: float, rho_minus: float,
                 n_trunc: int) -> float:
    """Residual between the truncated double power series of the product-state
    integral and its closed exponential form.

    The series in the two integrals factorizes, so the truncation is the
    product of two partial exponential sums; the residual is bounded by the
    tails, which drop below 1e-12 well before n_trunc = 20 for order-one
    arguments.
    """
    if not 0 <= n_trunc <= 20:
        raise ConfigError(f"truncation order must be in [0, 20], got {n_trunc}")
    i_plus = complex(rho_plus * np.sum(theta.weights * theta.values_plus))
    i_minus = complex(rho_minus * np.sum(theta.weights * theta.values_minus))
    part_p = sum(i_plus**n / math.factorial(n) for n in range(n_trunc + 1))
    part_m = sum(i_minus**k / math.factorial(k) for k in range(n_trunc + 1))
    return abs(part_p * part_m - np.exp(i_plus + i_minus))
