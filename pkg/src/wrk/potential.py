"""Finite-range pair potentials and their periodized grid kernels.

Every supported potential is radial, nonnegative, and vanishes beyond a finite
cutoff.  Those three properties are what the rest of the package relies on:
birth acceptance probabilities ``exp(-E)`` stay in ``(0, 1]``, cell-list
neighbor queries only need to look one cutoff away, and the mean-field
convolution kernel has a well-defined mass.

Supported kinds and their parameters:

* ``top-hat``: ``height`` on ``|x| <= radius``, zero outside; cutoff equals
  the radius.
* ``truncated-gaussian``: ``amplitude * exp(-|x|^2 / (2*width^2))`` inside the
  cutoff.
* ``truncated-exponential``: ``amplitude * exp(-rate*|x|)`` inside the cutoff.
* ``tabulated``: linear interpolation of a sampled radial profile starting at
  r = 0; zero beyond the last sample, which doubles as the cutoff.

Instances are immutable value objects; every transform returns a new instance.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from numpy.typing import NDArray

KINDS = ("top-hat", "truncated-gaussian", "truncated-exponential", "tabulated")

TOP_HAT = "top-hat"
TRUNCATED_GAUSSIAN = "truncated-gaussian"
TRUNCATED_EXPONENTIAL = "truncated-exponential"
TABULATED = "tabulated"

# Kernel-side integer codes, shared with the jit-compiled evaluators.
KIND_CODES = {TOP_HAT: 0, TRUNCATED_GAUSSIAN: 1, TRUNCATED_EXPONENTIAL: 2, TABULATED: 3}


class PotentialError(ValueError):
    """Invalid potential definition or argument."""


def _as_float(params: Mapping[str, object], key: str, kind: str) -> float:
    if key not in params:
        raise PotentialError(f"{kind} potential requires parameter {key!r}")
    v = float(params[key])  # type: ignore[arg-type]
    if not math.isfinite(v):
        raise PotentialError(f"{kind} parameter {key!r} must be finite, got {v}")
    return v


@dataclass(frozen=True)
class PairPotential:
    """Radial pair interaction with finite cutoff.

    Args:
        kind: one of :data:`KINDS`.
        params: kind-specific parameters (see module docstring).  For the
            tabulated kind the radii/values are stored as tuples so the
            instance stays hashable and JSON round-trips exactly.
        cutoff: interaction range; ``evaluate`` is zero beyond it.
        dim: spatial dimension, 1 or 2.
    """

    kind: str
    params: Mapping[str, object]
    cutoff: float
    dim: int
    _tab_r: NDArray[np.float64] = field(init=False, repr=False, compare=False)
    _tab_v: NDArray[np.float64] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise PotentialError(f"unknown potential kind {self.kind!r}")
        if self.dim not in (1, 2):
            raise PotentialError(f"dim must be 1 or 2, got {self.dim}")
        object.__setattr__(self, "cutoff", float(self.cutoff))
        if not (math.isfinite(self.cutoff) and self.cutoff > 0):
            raise PotentialError(f"cutoff must be positive and finite, got {self.cutoff}")

        p = dict(self.params)
        if self.kind == TOP_HAT:
            h = _as_float(p, "height", self.kind)
            r = _as_float(p, "radius", self.kind)
            if h < 0:
                raise PotentialError("top-hat height must be >= 0")
            if r <= 0:
                raise PotentialError("top-hat radius must be > 0")
            if abs(r - self.cutoff) > 1e-12 * max(1.0, r):
                raise PotentialError("top-hat cutoff must equal its radius")
            p = {"height": h, "radius": r}
        elif self.kind == TRUNCATED_GAUSSIAN:
            a = _as_float(p, "amplitude", self.kind)
            w = _as_float(p, "width", self.kind)
            if a < 0 or w <= 0:
                raise PotentialError("truncated-gaussian needs amplitude >= 0, width > 0")
            p = {"amplitude": a, "width": w}
        elif self.kind == TRUNCATED_EXPONENTIAL:
            a = _as_float(p, "amplitude", self.kind)
            rate = _as_float(p, "rate", self.kind)
            if a < 0 or rate <= 0:
                raise PotentialError("truncated-exponential needs amplitude >= 0, rate > 0")
            p = {"amplitude": a, "rate": rate}
        else:
            radii = np.asarray(p.get("radii", ()), dtype=np.float64)
            values = np.asarray(p.get("values", ()), dtype=np.float64)
            if radii.ndim != 1 or radii.shape != values.shape or radii.size < 2:
                raise PotentialError("tabulated potential needs matching radii/values, length >= 2")
            if radii[0] != 0.0 or np.any(np.diff(radii) <= 0):
                raise PotentialError("tabulated radii must start at 0 and increase strictly")
            if not np.all(np.isfinite(values)) or np.any(values < 0):
                raise PotentialError("tabulated values must be finite and >= 0")
            if abs(radii[-1] - self.cutoff) > 1e-12 * max(1.0, radii[-1]):
                raise PotentialError("tabulated cutoff must equal the last radius")
            p = {"radii": tuple(float(r) for r in radii), "values": tuple(float(v) for v in values)}

        object.__setattr__(self, "params", p)
        if self.kind == TABULATED:
            tr = np.asarray(p["radii"], dtype=np.float64)
            tv = np.asarray(p["values"], dtype=np.float64)
        else:
            tr = np.empty(0)
            tv = np.empty(0)
        tr.setflags(write=False)
        tv.setflags(write=False)
        object.__setattr__(self, "_tab_r", tr)
        object.__setattr__(self, "_tab_v", tv)

    # ------------------------------------------------------------------
    # constructors

    @classmethod
    def top_hat(cls, height: float, radius: float, dim: int = 1) -> "PairPotential":
        return cls(TOP_HAT, {"height": height, "radius": radius}, cutoff=radius, dim=dim)

    @classmethod
    def truncated_gaussian(
        cls, amplitude: float, width: float, cutoff: float, dim: int = 1
    ) -> "PairPotential":
        return cls(TRUNCATED_GAUSSIAN, {"amplitude": amplitude, "width": width}, cutoff, dim)

    @classmethod
    def truncated_exponential(
        cls, amplitude: float, rate: float, cutoff: float, dim: int = 1
    ) -> "PairPotential":
        return cls(TRUNCATED_EXPONENTIAL, {"amplitude": amplitude, "rate": rate}, cutoff, dim)

    @classmethod
    def tabulated(cls, radii, values, dim: int = 1) -> "PairPotential":
        radii = tuple(float(r) for r in radii)
        return cls(TABULATED, {"radii": radii, "values": tuple(float(v) for v in values)},
                   cutoff=radii[-1] if radii else 0.0, dim=dim)

    # ------------------------------------------------------------------
    # evaluation

    def radial(self, r) -> NDArray[np.float64]:
        """Profile value at radius ``r`` (scalar or array, >= 0 assumed)."""
        r = np.asarray(r, dtype=np.float64)
        inside = r <= self.cutoff
        if self.kind == TOP_HAT:
            out = np.where(inside, self.params["height"], 0.0)
        elif self.kind == TRUNCATED_GAUSSIAN:
            a, w = self.params["amplitude"], self.params["width"]
            out = np.where(inside, a * np.exp(-(r * r) / (2.0 * w * w)), 0.0)
        elif self.kind == TRUNCATED_EXPONENTIAL:
            a, rate = self.params["amplitude"], self.params["rate"]
            out = np.where(inside, a * np.exp(-rate * r), 0.0)
        else:
            out = np.where(inside, np.interp(r, self._tab_r, self._tab_v, right=0.0), 0.0)
        return out if out.ndim else float(out)

    def evaluate(self, x) -> NDArray[np.float64]:
        """Potential at displacement(s) ``x``.

        Accepts a scalar or ``(N,)`` array in one dimension and a ``(2,)`` or
        ``(N, 2)`` array in two.
        """
        x = np.asarray(x, dtype=np.float64)
        if self.dim == 1:
            return self.radial(np.abs(x))
        if x.shape[-1] != 2:
            raise PotentialError(f"expected trailing axis of length 2, got shape {x.shape}")
        return self.radial(np.sqrt(np.sum(x * x, axis=-1)))

    def __call__(self, x):
        return self.evaluate(x)

    # ------------------------------------------------------------------
    # norms and transforms

    def l1_norm(self) -> float:
        """Integral of the potential over all space (closed form where known)."""
        if self.kind == TOP_HAT:
            h, r = self.params["height"], self.params["radius"]
            return 2.0 * r * h if self.dim == 1 else math.pi * r * r * h
        if self.kind == TRUNCATED_GAUSSIAN:
            a, w = self.params["amplitude"], self.params["width"]
            if self.dim == 1:
                return a * w * math.sqrt(2.0 * math.pi) * math.erf(self.cutoff / (w * math.sqrt(2.0)))
            return 2.0 * math.pi * w * w * a * -math.expm1(-self.cutoff**2 / (2.0 * w * w))
        if self.kind == TRUNCATED_EXPONENTIAL:
            a, rate = self.params["amplitude"], self.params["rate"]
            if self.dim == 1:
                return 2.0 * a * -math.expm1(-rate * self.cutoff) / rate
            return (
                2.0 * math.pi * a
                * (1.0 - math.exp(-rate * self.cutoff) * (1.0 + rate * self.cutoff))
                / (rate * rate)
            )
        # exact segment integrals of the piecewise-linear profile
        r, v = self._tab_r, self._tab_v
        if self.dim == 1:
            return 2.0 * float(np.trapezoid(v, r))
        r0, r1, v0, v1 = r[:-1], r[1:], v[:-1], v[1:]
        slope = (v1 - v0) / (r1 - r0)
        seg = (v0 - slope * r0) * (r1**2 - r0**2) / 2.0 + slope * (r1**3 - r0**3) / 3.0
        return 2.0 * math.pi * float(seg.sum())

    def linf_norm(self) -> float:
        """Supremum of the potential."""
        if self.kind == TOP_HAT:
            return float(self.params["height"])
        if self.kind in (TRUNCATED_GAUSSIAN, TRUNCATED_EXPONENTIAL):
            return float(self.params["amplitude"])
        return float(self._tab_v.max())

    def scale_lp(self, eps: float) -> "PairPotential":
        """Weak long-range rescaling ``x -> eps^dim * phi(eps * x)``.

        Preserves the L1 norm exactly and stretches the cutoff to
        ``cutoff / eps``; each parametric kind maps onto itself.
        """
        if not (0 < eps and math.isfinite(eps)):
            raise PotentialError(f"eps must be positive and finite, got {eps}")
        s = eps**self.dim
        if self.kind == TOP_HAT:
            return PairPotential.top_hat(
                s * self.params["height"], self.params["radius"] / eps, self.dim
            )
        if self.kind == TRUNCATED_GAUSSIAN:
            return PairPotential.truncated_gaussian(
                s * self.params["amplitude"], self.params["width"] / eps, self.cutoff / eps, self.dim
            )
        if self.kind == TRUNCATED_EXPONENTIAL:
            return PairPotential.truncated_exponential(
                s * self.params["amplitude"], self.params["rate"] * eps, self.cutoff / eps, self.dim
            )
        return PairPotential.tabulated(
            tuple(r / eps for r in self.params["radii"]),
            tuple(s * v for v in self.params["values"]),
            self.dim,
        )

    def psi_eps(self, x, eps: float):
        """Mayer-type increment ``(exp(-eps^dim * phi(x)) - 1) / eps^dim``.

        Lies in ``[-phi(x), 0]`` and decreases to ``-phi(x)`` as eps -> 0.
        """
        if not (0 < eps and math.isfinite(eps)):
            raise PotentialError(f"eps must be positive and finite, got {eps}")
        s = eps**self.dim
        return np.expm1(-s * self.evaluate(x)) / s

    # ------------------------------------------------------------------
    # serialization

    def to_dict(self) -> dict:
        params = {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.params.items()}
        return {"kind": self.kind, "params": params, "cutoff": self.cutoff, "dim": self.dim}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: Mapping[str, object]) -> "PairPotential":
        try:
            return cls(str(d["kind"]), dict(d["params"]), float(d["cutoff"]), int(d["dim"]))  # type: ignore[index,arg-type]
        except KeyError as exc:
            raise PotentialError(f"potential descriptor missing key {exc}") from exc

    @classmethod
    def from_json(cls, s: str) -> "PairPotential":
        return cls.from_dict(json.loads(s))

    def __eq__(self, other) -> bool:
        if not isinstance(other, PairPotential):
            return NotImplemented
        return (
            self.kind == other.kind
            and self.dim == other.dim
            and self.cutoff == other.cutoff
            and self.params == other.params
        )

    def __hash__(self) -> int:
        key = tuple(sorted((k, v) for k, v in self.params.items()))
        return hash((self.kind, self.dim, self.cutoff, key))

    def kernel_args(self):
        """Flat representation consumed by the jit-compiled evaluators."""
        code = KIND_CODES[self.kind]
        if self.kind == TOP_HAT:
            p0, p1 = self.params["height"], self.params["radius"]
        elif self.kind == TRUNCATED_GAUSSIAN:
            p0, p1 = self.params["amplitude"], self.params["width"]
        elif self.kind == TRUNCATED_EXPONENTIAL:
            p0, p1 = self.params["amplitude"], self.params["rate"]
        else:
            p0 = p1 = 0.0
        return code, float(p0), float(p1), float(self.cutoff), self._tab_r, self._tab_v


@dataclass(frozen=True, eq=False)
class PeriodicKernel:
    """A potential wrapped onto a torus and sampled on a regular grid.

    ``values[i]`` (or ``values[i, j]`` in two dimensions) is the sum of the
    potential over all periodic images at grid point ``i * dx``, so circular
    convolution against it implements the torus convolution exactly.
    """

    dim: int
    n: int
    length: float
    values: NDArray[np.float64]

    def __post_init__(self) -> None:
        if self.dim not in (1, 2):
            raise PotentialError(f"dim must be 1 or 2, got {self.dim}")
        expected = (self.n,) if self.dim == 1 else (self.n, self.n)
        if self.values.shape != expected:
            raise PotentialError(f"kernel shape {self.values.shape} != {expected}")
        if np.any(self.values < 0) or not np.all(np.isfinite(self.values)):
            raise PotentialError("kernel values must be finite and >= 0")
        self.values.setflags(write=False)

    @property
    def dx(self) -> float:
        return self.length / self.n

    @property
    def discrete_l1(self) -> float:
        """Grid mass ``sum(values) * dx^dim``; the operative kernel norm."""
        return float(self.values.sum() * self.dx**self.dim)

    @property
    def linf(self) -> float:
        return float(self.values.max())


def periodize(phi: PairPotential, length: float, n: int) -> PeriodicKernel:
    """Sample ``sum_k phi(x + k*L)`` on an ``n``-point grid of a torus of side L.

    Warns when the torus is too small to separate periodic images
    (``length <= 2 * cutoff``), in which case images overlap and the wrapped
    kernel no longer agrees with the free-space potential near the cut.
    """
    if length <= 0 or n < 2:
        raise PotentialError("need length > 0 and n >= 2")
    if length <= 2.0 * phi.cutoff:
        warnings.warn(
            f"torus side {length} <= 2 * cutoff {phi.cutoff}; periodic images overlap",
            stacklevel=2,
        )
    dx = length / n
    k_max = int(math.ceil(phi.cutoff / length)) + 1
    if phi.dim == 1:
        x = np.arange(n) * dx
        vals = np.zeros(n)
        for k in range(-k_max, k_max + 1):
            vals += phi.radial(np.abs(x + k * length))
    else:
        x = np.arange(n) * dx
        gx, gy = np.meshgrid(x, x, indexing="ij")
        vals = np.zeros((n, n))
        for kx in range(-k_max, k_max + 1):
            for ky in range(-k_max, k_max + 1):
                vals += phi.radial(np.hypot(gx + kx * length, gy + ky * length))
    return PeriodicKernel(dim=phi.dim, n=n, length=float(length), values=vals)
