"""Exact stochastic simulation of the two-type birth-and-death dynamics.

A configuration of plus- and minus-particles on a periodic box evolves in
continuous time: every particle dies at rate m, and new particles of either
species appear with spatial intensity z weighted by the Boltzmann factor of
the interaction with the *opposite* species.  Simulation is by
uniformization: the constant majorant rate m N + 2 z |box| drives exponential
waiting times, a birth proposal at a uniform location is accepted with
probability e^{-E} (which is <= 1 because the potential is nonnegative), and
rejected proposals are logged rather than hidden.  No time discretization is
involved; trajectories are exact in law.

The event loop is jit-compiled, with the identical source also runnable as
plain Python (WRK_DISABLE_NUMBA=1).  Both paths consume the same
``np.random.Generator`` draw for draw, so event logs are bit-identical across
the two backends.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import IO, Sequence

import numpy as np
from numpy.typing import NDArray

from ._accel import jit_decorator, numba_enabled
from .errors import ConfigError, NumericalError
from .kinetics import DensityField2, HomogeneousRun
from .potential import PairPotential

KIND_NAMES = (
    "birth+", "birth-", "death+", "death-", "rejected-birth+", "rejected-birth-",
)
BIRTH_P, BIRTH_M, DEATH_P, DEATH_M, REJECT_P, REJECT_M = range(6)


# ----------------------------------------------------------------------
# containers


@dataclass
class Configuration2State:
    """Positions of the two species on the periodic box [0, box)^dim.

    Stored as (n, dim) arrays.  The cell grid used for O(1) neighborhood
    queries is built per run (its resolution depends on the potential range),
    not carried on the state.
    """

    dim: int
    box: float
    pos_plus: NDArray[np.float64]
    pos_minus: NDArray[np.float64]

    def __post_init__(self) -> None:
        if self.dim not in (1, 2):
            raise ConfigError(f"dim must be 1 or 2, got {self.dim}")
        if not (self.box > 0 and math.isfinite(self.box)):
            raise ConfigError(f"box side must be positive, got {self.box}")
        self.pos_plus = np.ascontiguousarray(self.pos_plus, dtype=np.float64).reshape(-1, self.dim)
        self.pos_minus = np.ascontiguousarray(self.pos_minus, dtype=np.float64).reshape(-1, self.dim)
        for arr in (self.pos_plus, self.pos_minus):
            if arr.size and (not np.all(np.isfinite(arr)) or arr.min() < 0 or arr.max() >= self.box):
                raise ConfigError("all points must lie in [0, box)")

    @classmethod
    def empty(cls, dim: int, box: float) -> "Configuration2State":
        return cls(dim, box, np.zeros((0, dim)), np.zeros((0, dim)))

    @property
    def n_plus(self) -> int:
        return self.pos_plus.shape[0]

    @property
    def n_minus(self) -> int:
        return self.pos_minus.shape[0]

    @property
    def volume(self) -> float:
        return self.box**self.dim


@dataclass
class SimParams:
    """Dynamics and bookkeeping parameters for one run."""

    m: float
    z: float
    phi: PairPotential
    t_end: float
    snapshot_dt: float
    seed: int
    eps: float = 1.0  # interaction rescale; 1 = unscaled dynamics

    def __post_init__(self) -> None:
        if not (self.m > 0 and math.isfinite(self.m)):
            raise ConfigError(f"death rate m must be > 0, got {self.m}")
        if not (self.z >= 0 and math.isfinite(self.z)):
            raise ConfigError(f"activity z must be >= 0, got {self.z}")
        if not (self.t_end > 0 and self.snapshot_dt > 0):
            raise ConfigError("t_end and snapshot_dt must be > 0")
        if not 0 < self.eps <= 1:
            raise ConfigError(f"scale eps must be in (0, 1], got {self.eps}")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed must fit in 64 bits")

    def effective_potential(self) -> PairPotential:
        return self.phi if self.eps == 1.0 else self.phi.scale_lp(self.eps)


@dataclass
class EventLog:
    """Chronological record of every uniformization event.

    ``kinds`` holds integer codes indexing :data:`KIND_NAMES`; ``locs`` is the
    birth location, the removed particle's position, or the rejected proposal.
    """

    times: NDArray[np.float64]
    kinds: NDArray[np.int64]
    locs: NDArray[np.float64]

    def __len__(self) -> int:
        return self.times.size

    def kind_counts(self) -> dict[str, int]:
        return {name: int(np.sum(self.kinds == code)) for code, name in enumerate(KIND_NAMES)}

    def to_ndjson(self, fp: IO[str]) -> None:
        for t, k, x in zip(self.times, self.kinds, self.locs):
            fp.write(json.dumps(
                {"t": float(t), "kind": KIND_NAMES[int(k)], "x": [float(c) for c in x]}
            ))
            fp.write("\n")

    @classmethod
    def from_ndjson(cls, fp: IO[str]) -> "EventLog":
        code = {name: i for i, name in enumerate(KIND_NAMES)}
        times, kinds, locs = [], [], []
        for line in fp:
            if not line.strip():
                continue
            rec = json.loads(line)
            times.append(rec["t"])
            kinds.append(code[rec["kind"]])
            locs.append(rec["x"])
        if not times:
            return cls(np.zeros(0), np.zeros(0, dtype=np.int64), np.zeros((0, 0)))
        return cls(np.asarray(times), np.asarray(kinds, dtype=np.int64),
                   np.asarray(locs, dtype=np.float64).reshape(len(times), -1))


@dataclass
class Snapshot:
    """Full state at one sampling time."""

    t: float
    dim: int
    box: float
    pos_plus: NDArray[np.float64]
    pos_minus: NDArray[np.float64]

    @property
    def n_plus(self) -> int:
        return self.pos_plus.shape[0]

    @property
    def n_minus(self) -> int:
        return self.pos_minus.shape[0]


# ----------------------------------------------------------------------
# jit kernels (same source also runs uncompiled; see _accel)


def _build_sim_kernels(use_jit: bool):
    deco = jit_decorator(use_jit)

    @deco
    def phi_value(r, code, p0, p1, cutoff, tab_r, tab_v):
        if r > cutoff:
            return 0.0
        if code == 0:
            return p0
        if code == 1:
            return p0 * np.exp(-(r * r) / (2.0 * p1 * p1))
        if code == 2:
            return p0 * np.exp(-p1 * r)
        return np.interp(r, tab_r, tab_v)

    @deco
    def pair_phi(ax0, ax1, bx0, bx1, dim, box, code, p0, p1, cutoff, tab_r, tab_v):
        # minimum-image displacement; one image is enough since box > 2 cutoff
        d0 = ax0 - bx0
        d0 -= box * np.rint(d0 / box)
        if dim == 1:
            r = abs(d0)
        else:
            d1 = ax1 - bx1
            d1 -= box * np.rint(d1 / box)
            r = np.sqrt(d0 * d0 + d1 * d1)
        return phi_value(r, code, p0, p1, cutoff, tab_r, tab_v)

    @deco
    def cell_index(x0, x1, dim, ncell, cell_size):
        c0 = int(x0 / cell_size)
        if c0 >= ncell:
            c0 = ncell - 1
        if dim == 1:
            return c0
        c1 = int(x1 / cell_size)
        if c1 >= ncell:
            c1 = ncell - 1
        return c0 * ncell + c1

    @deco
    def energy(x0, x1, pos, n, dim, box, use_cells, ncell, cell_size,
               items, blen, code, p0, p1, cutoff, tab_r, tab_v):
        # Interaction of a probe point with a stored cloud.  The cell scan
        # covers the cutoff ball because the cell edge is >= cutoff.
        e = 0.0
        if not use_cells:
            for j in range(n):
                e += pair_phi(x0, x1, pos[j, 0], pos[j, 1], dim, box,
                              code, p0, p1, cutoff, tab_r, tab_v)
            return e
        c0 = int(x0 / cell_size)
        if c0 >= ncell:
            c0 = ncell - 1
        if dim == 1:
            for d0 in range(-1, 2):
                cc = (c0 + d0) % ncell
                for k in range(blen[cc]):
                    j = items[cc, k]
                    e += pair_phi(x0, x1, pos[j, 0], pos[j, 1], dim, box,
                                  code, p0, p1, cutoff, tab_r, tab_v)
            return e
        c1 = int(x1 / cell_size)
        if c1 >= ncell:
            c1 = ncell - 1
        for d0 in range(-1, 2):
            row = ((c0 + d0) % ncell) * ncell
            for d1 in range(-1, 2):
                cc = row + (c1 + d1) % ncell
                for k in range(blen[cc]):
                    j = items[cc, k]
                    e += pair_phi(x0, x1, pos[j, 0], pos[j, 1], dim, box,
                                  code, p0, p1, cutoff, tab_r, tab_v)
        return e

    @deco
    def grow_f2(a, newcap):
        out = np.zeros((newcap, 2))
        out[: a.shape[0]] = a
        return out

    @deco
    def grow_f1(a, newcap):
        out = np.zeros(newcap)
        out[: a.shape[0]] = a
        return out

    @deco
    def grow_i1(a, newcap):
        out = np.zeros(newcap, dtype=np.int64)
        out[: a.shape[0]] = a
        return out

    @deco
    def grow_items(a, newcap):
        out = np.zeros((a.shape[0], newcap), dtype=np.int64)
        out[:, : a.shape[1]] = a
        return out

    @deco
    def run_chain(rng, dim, box, m, z, t_end, snapshot_dt, n_snaps,
                  code, p0, p1, cutoff, tab_r, tab_v,
                  pos_p_in, pos_m_in, use_cells, ncell):
        vol = box if dim == 1 else box * box
        cell_size = box / ncell
        n_cells = ncell if dim == 1 else ncell * ncell

        n_p = pos_p_in.shape[0]
        n_m = pos_m_in.shape[0]
        cap_p = max(16, 2 * n_p)
        cap_m = max(16, 2 * n_m)
        pos_p = np.zeros((cap_p, 2))
        pos_m = np.zeros((cap_m, 2))
        pos_p[:n_p] = pos_p_in
        pos_m[:n_m] = pos_m_in

        # per-cell buckets of particle indices plus reverse maps
        bcap_p = 8
        bcap_m = 8
        items_p = np.zeros((n_cells, bcap_p), dtype=np.int64)
        items_m = np.zeros((n_cells, bcap_m), dtype=np.int64)
        blen_p = np.zeros(n_cells, dtype=np.int64)
        blen_m = np.zeros(n_cells, dtype=np.int64)
        cell_of_p = np.zeros(cap_p, dtype=np.int64)
        cell_of_m = np.zeros(cap_m, dtype=np.int64)
        slot_of_p = np.zeros(cap_p, dtype=np.int64)
        slot_of_m = np.zeros(cap_m, dtype=np.int64)
        if use_cells:
            for i in range(n_p):
                c = cell_index(pos_p[i, 0], pos_p[i, 1], dim, ncell, cell_size)
                if blen_p[c] == bcap_p:
                    bcap_p *= 2
                    items_p = grow_items(items_p, bcap_p)
                items_p[c, blen_p[c]] = i
                cell_of_p[i] = c
                slot_of_p[i] = blen_p[c]
                blen_p[c] += 1
            for i in range(n_m):
                c = cell_index(pos_m[i, 0], pos_m[i, 1], dim, ncell, cell_size)
                if blen_m[c] == bcap_m:
                    bcap_m *= 2
                    items_m = grow_items(items_m, bcap_m)
                items_m[c, blen_m[c]] = i
                cell_of_m[i] = c
                slot_of_m[i] = blen_m[c]
                blen_m[c] += 1

        # event log buffers
        cap_ev = 1024
        ev_t = np.zeros(cap_ev)
        ev_k = np.zeros(cap_ev, dtype=np.int64)
        ev_x = np.zeros((cap_ev, 2))
        ne = 0

        # snapshot buffers: counts per snapshot plus flat position blocks
        snap_np = np.zeros(n_snaps, dtype=np.int64)
        snap_nm = np.zeros(n_snaps, dtype=np.int64)
        cap_sp = max(64, 4 * n_p)
        cap_sm = max(64, 4 * n_m)
        sp_buf = np.zeros((cap_sp, 2))
        sm_buf = np.zeros((cap_sm, 2))
        sp_len = 0
        sm_len = 0
        snap_i = 0

        t = 0.0
        birth_z = z * vol
        while True:
            lam = m * (n_p + n_m) + 2.0 * birth_z
            if lam <= 0.0:
                break
            dtw = rng.exponential(1.0 / lam)
            while dtw == 0.0:  # keep event times strictly increasing
                dtw = rng.exponential(1.0 / lam)
            t_next = t + dtw
            # snapshots falling inside the quiet stretch see the current state
            while snap_i < n_snaps and snap_i * snapshot_dt <= min(t_next, t_end):
                snap_np[snap_i] = n_p
                snap_nm[snap_i] = n_m
                while sp_len + n_p > cap_sp:
                    cap_sp *= 2
                    sp_buf = grow_f2(sp_buf, cap_sp)
                sp_buf[sp_len : sp_len + n_p] = pos_p[:n_p]
                sp_len += n_p
                while sm_len + n_m > cap_sm:
                    cap_sm *= 2
                    sm_buf = grow_f2(sm_buf, cap_sm)
                sm_buf[sm_len : sm_len + n_m] = pos_m[:n_m]
                sm_len += n_m
                snap_i += 1
            if t_next > t_end:
                break
            t = t_next

            u = rng.random() * lam
            kind = -1
            x0 = 0.0
            x1 = 0.0
            if u < m * n_p:
                # death of a uniformly chosen plus particle
                i = rng.integers(0, n_p)
                x0 = pos_p[i, 0]
                x1 = pos_p[i, 1]
                kind = DEATH_P
                if use_cells:
                    c = cell_of_p[i]
                    s = slot_of_p[i]
                    last = blen_p[c] - 1
                    mov = items_p[c, last]
                    items_p[c, s] = mov
                    slot_of_p[mov] = s
                    blen_p[c] = last
                tail = n_p - 1
                if i != tail:
                    pos_p[i, 0] = pos_p[tail, 0]
                    pos_p[i, 1] = pos_p[tail, 1]
                    if use_cells:
                        items_p[cell_of_p[tail], slot_of_p[tail]] = i
                        cell_of_p[i] = cell_of_p[tail]
                        slot_of_p[i] = slot_of_p[tail]
                n_p = tail
            elif u < m * (n_p + n_m):
                i = rng.integers(0, n_m)
                x0 = pos_m[i, 0]
                x1 = pos_m[i, 1]
                kind = DEATH_M
                if use_cells:
                    c = cell_of_m[i]
                    s = slot_of_m[i]
                    last = blen_m[c] - 1
                    mov = items_m[c, last]
                    items_m[c, s] = mov
                    slot_of_m[mov] = s
                    blen_m[c] = last
                tail = n_m - 1
                if i != tail:
                    pos_m[i, 0] = pos_m[tail, 0]
                    pos_m[i, 1] = pos_m[tail, 1]
                    if use_cells:
                        items_m[cell_of_m[tail], slot_of_m[tail]] = i
                        cell_of_m[i] = cell_of_m[tail]
                        slot_of_m[i] = slot_of_m[tail]
                n_m = tail
            else:
                plus_birth = u < m * (n_p + n_m) + birth_z
                x0 = rng.random() * box
                if dim == 2:
                    x1 = rng.random() * box
                if plus_birth:
                    e = energy(x0, x1, pos_m, n_m, dim, box, use_cells, ncell,
                               cell_size, items_m, blen_m, code, p0, p1, cutoff,
                               tab_r, tab_v)
                else:
                    e = energy(x0, x1, pos_p, n_p, dim, box, use_cells, ncell,
                               cell_size, items_p, blen_p, code, p0, p1, cutoff,
                               tab_r, tab_v)
                if rng.random() < np.exp(-e):
                    if plus_birth:
                        kind = BIRTH_P
                        if n_p == cap_p:
                            cap_p *= 2
                            pos_p = grow_f2(pos_p, cap_p)
                            cell_of_p = grow_i1(cell_of_p, cap_p)
                            slot_of_p = grow_i1(slot_of_p, cap_p)
                        pos_p[n_p, 0] = x0
                        pos_p[n_p, 1] = x1
                        if use_cells:
                            c = cell_index(x0, x1, dim, ncell, cell_size)
                            if blen_p[c] == bcap_p:
                                bcap_p *= 2
                                items_p = grow_items(items_p, bcap_p)
                            items_p[c, blen_p[c]] = n_p
                            cell_of_p[n_p] = c
                            slot_of_p[n_p] = blen_p[c]
                            blen_p[c] += 1
                        n_p += 1
                    else:
                        kind = BIRTH_M
                        if n_m == cap_m:
                            cap_m *= 2
                            pos_m = grow_f2(pos_m, cap_m)
                            cell_of_m = grow_i1(cell_of_m, cap_m)
                            slot_of_m = grow_i1(slot_of_m, cap_m)
                        pos_m[n_m, 0] = x0
                        pos_m[n_m, 1] = x1
                        if use_cells:
                            c = cell_index(x0, x1, dim, ncell, cell_size)
                            if blen_m[c] == bcap_m:
                                bcap_m *= 2
                                items_m = grow_items(items_m, bcap_m)
                            items_m[c, blen_m[c]] = n_m
                            cell_of_m[n_m] = c
                            slot_of_m[n_m] = blen_m[c]
                            blen_m[c] += 1
                        n_m += 1
                else:
                    kind = REJECT_P if plus_birth else REJECT_M

            if ne == cap_ev:
                cap_ev *= 2
                ev_t = grow_f1(ev_t, cap_ev)
                ev_k = grow_i1(ev_k, cap_ev)
                ev_x = grow_f2(ev_x, cap_ev)
            ev_t[ne] = t
            ev_k[ne] = kind
            ev_x[ne, 0] = x0
            ev_x[ne, 1] = x1
            ne += 1

        # no further events before t_end: remaining snapshots see the final state
        while snap_i < n_snaps:
            snap_np[snap_i] = n_p
            snap_nm[snap_i] = n_m
            while sp_len + n_p > cap_sp:
                cap_sp *= 2
                sp_buf = grow_f2(sp_buf, cap_sp)
            sp_buf[sp_len : sp_len + n_p] = pos_p[:n_p]
            sp_len += n_p
            while sm_len + n_m > cap_sm:
                cap_sm *= 2
                sm_buf = grow_f2(sm_buf, cap_sm)
            sm_buf[sm_len : sm_len + n_m] = pos_m[:n_m]
            sm_len += n_m
            snap_i += 1

        return (ev_t[:ne], ev_k[:ne], ev_x[:ne], snap_np, snap_nm,
                sp_buf[:sp_len], sm_buf[:sm_len], pos_p[:n_p], pos_m[:n_m])

    return {
        "phi_value": phi_value,
        "pair_phi": pair_phi,
        "energy": energy,
        "run_chain": run_chain,
    }


_SIM_JIT = None
_SIM_PY = None


def _sim_kernels(use_jit: bool):
    global _SIM_JIT, _SIM_PY
    if use_jit:
        if _SIM_JIT is None:
            _SIM_JIT = _build_sim_kernels(True)
        return _SIM_JIT
    if _SIM_PY is None:
        _SIM_PY = _build_sim_kernels(False)
    return _SIM_PY


def _pad2(pos: NDArray[np.float64]) -> NDArray[np.float64]:
    """(n, dim) -> (n, 2) with a zero second column in one dimension."""
    out = np.zeros((pos.shape[0], 2))
    out[:, : pos.shape[1]] = pos
    return out


def probe_energy(x, cloud: NDArray[np.float64], box: float, phi: PairPotential,
                 force_cells: bool | None = None) -> float:
    """Cross-species energy of one probe point, via the simulation kernels.

    Exposed for testing the cell-grid bookkeeping against direct summation;
    ``force_cells`` overrides the automatic grid/brute-force choice.
    """
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    dim = phi.dim
    if x.size != dim:
        raise ConfigError(f"probe point has dimension {x.size}, potential {dim}")
    cloud = np.ascontiguousarray(cloud, dtype=np.float64).reshape(-1, dim)
    ncell = int(box / phi.cutoff) if phi.cutoff > 0 else 0
    use_cells = ncell >= 4 if force_cells is None else force_cells
    if use_cells and ncell < 3:
        raise ConfigError("cell grid needs at least 3 cells per side")
    if not use_cells:
        ncell = 1
    kern = _sim_kernels(numba_enabled())
    cell_size = box / ncell
    n_cells = ncell if dim == 1 else ncell * ncell
    pos = _pad2(cloud)
    items = np.zeros((n_cells, max(8, cloud.shape[0] + 1)), dtype=np.int64)
    blen = np.zeros(n_cells, dtype=np.int64)
    if use_cells:
        for i in range(cloud.shape[0]):
            c0 = int(pos[i, 0] / cell_size)
            c0 = min(c0, ncell - 1)
            if dim == 1:
                c = c0
            else:
                c1 = min(int(pos[i, 1] / cell_size), ncell - 1)
                c = c0 * ncell + c1
            items[c, blen[c]] = i
            blen[c] += 1
    code, p0, p1, cutoff, tab_r, tab_v = phi.kernel_args()
    x1 = x[1] if dim == 2 else 0.0
    return float(kern["energy"](float(x[0]), x1, pos, cloud.shape[0], dim,
                                float(box), use_cells, ncell, cell_size, items,
                                blen, code, p0, p1, cutoff, tab_r, tab_v))


# ----------------------------------------------------------------------
# public operations


def map_replicas(fn, n: int, threads: int = 1) -> list:
    """Evaluate fn(0..n-1), optionally on a thread pool, in index order.

    Replicas draw from independent spawned streams, so results do not depend
    on the thread count; the pool only sets the parallelism budget.
    """
    if threads <= 1 or n <= 1:
        return [fn(r) for r in range(n)]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(n)))


def sample_poisson_initial(rho_plus, rho_minus, box: float, dim: int = 1,
                           rng=None, rho_max: float | None = None) -> Configuration2State:
    """Independent Poisson point samples for the two species.

    Constant intensities sample ``N ~ Poisson(rho * |box|)`` with uniform
    positions.  Callable intensities are thinned against the supplied bound
    ``rho_max``.  The plus species is drawn first; passing an integer as
    ``rng`` seeds a fresh generator.
    """
    if dim not in (1, 2):
        raise ConfigError(f"dim must be 1 or 2, got {dim}")
    if not (box > 0 and math.isfinite(box)):
        raise ConfigError(f"box side must be positive, got {box}")
    if rng is None or isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(np.random.SeedSequence(0 if rng is None else int(rng)))
    vol = box**dim

    def sample_one(rho):
        if callable(rho):
            if rho_max is None or not rho_max > 0:
                raise ConfigError("callable intensity needs a positive rho_max bound")
            n = rng.poisson(rho_max * vol)
            pts = rng.random((n, dim)) * box
            vals = np.array([float(rho(p if dim > 1 else float(p[0]))) for p in pts])
            if np.any(vals < 0) or np.any(vals > rho_max * (1 + 1e-12)):
                raise ConfigError("intensity must satisfy 0 <= rho(x) <= rho_max")
            keep = rng.random(n) * rho_max < vals
            return pts[keep]
        rho = float(rho)
        if rho < 0 or not math.isfinite(rho):
            raise ConfigError(f"intensity must be >= 0 and finite, got {rho}")
        n = rng.poisson(rho * vol)
        return rng.random((n, dim)) * box

    return Configuration2State(dim, box, sample_one(rho_plus), sample_one(rho_minus))


def run(state: Configuration2State, params: SimParams,
        rng: np.random.Generator | None = None,
        force_cells: bool | None = None) -> tuple[EventLog, list[Snapshot]]:
    """Simulate the jump process exactly from ``state`` up to ``t_end``.

    Snapshots are taken at multiples of ``snapshot_dt`` (state immediately
    before any event at the exact same instant).  ``rng`` overrides the
    seed-derived generator; the replica harness uses that to hand each replica
    its own spawned stream.  ``force_cells`` overrides the automatic cell-grid
    choice (testing hook; both paths consume random draws identically).
    """
    phi = params.effective_potential()
    if phi.dim != state.dim:
        raise ConfigError(f"potential dimension {phi.dim} != state dimension {state.dim}")
    if phi.cutoff > 0 and state.box <= 2.0 * phi.cutoff:
        raise ConfigError(
            f"box side {state.box} must exceed twice the interaction range "
            f"{phi.cutoff} for the minimum-image convention"
        )
    ncell = int(state.box / phi.cutoff) if phi.cutoff > 0 else 0
    use_cells = ncell >= 4 if force_cells is None else bool(force_cells)
    if use_cells and ncell < 3:
        raise ConfigError("cell grid needs at least 3 cells per side")
    if not use_cells:
        ncell = 1
    if rng is None:
        rng = np.random.default_rng(np.random.SeedSequence(int(params.seed)))
    n_snaps = int(math.floor(params.t_end / params.snapshot_dt + 1e-9)) + 1
    code, p0, p1, cutoff, tab_r, tab_v = phi.kernel_args()
    kern = _sim_kernels(numba_enabled())
    (ev_t, ev_k, ev_x, snap_np, snap_nm, sp_buf, sm_buf, _, _) = kern["run_chain"](
        rng, state.dim, float(state.box), float(params.m), float(params.z),
        float(params.t_end), float(params.snapshot_dt), n_snaps,
        code, p0, p1, cutoff, tab_r, tab_v,
        _pad2(state.pos_plus), _pad2(state.pos_minus), use_cells, ncell,
    )
    if ev_t.size and not np.all(np.diff(ev_t) > 0):
        raise NumericalError("event times failed to increase strictly")
    log = EventLog(ev_t.copy(), ev_k.copy(), ev_x[:, : state.dim].copy())
    snapshots = []
    op = om = 0
    for k in range(n_snaps):
        cp, cm = int(snap_np[k]), int(snap_nm[k])
        snapshots.append(Snapshot(
            k * params.snapshot_dt, state.dim, state.box,
            sp_buf[op : op + cp, : state.dim].copy(),
            sm_buf[om : om + cm, : state.dim].copy(),
        ))
        op += cp
        om += cm
    return log, snapshots


def empirical_density(snapshots: Sequence[Snapshot], bins: int) -> list[tuple[float, DensityField2]]:
    """Binned per-species number density for each snapshot."""
    if bins < 1:
        raise ConfigError(f"bins must be >= 1, got {bins}")
    out = []
    for snap in snapshots:
        box, dim = snap.box, snap.dim
        cell_vol = (box / bins) ** dim
        fields = []
        for pos in (snap.pos_plus, snap.pos_minus):
            if dim == 1:
                counts, _ = np.histogram(pos[:, 0], bins=bins, range=(0.0, box))
            else:
                counts, _, _ = np.histogram2d(
                    pos[:, 0], pos[:, 1], bins=bins, range=[[0.0, box], [0.0, box]]
                )
            fields.append(counts.astype(np.float64) / cell_vol)
        out.append((snap.t, DensityField2(dim, bins, box, fields[0], fields[1])))
    return out


def density_to_csv(series: Sequence[tuple[float, DensityField2]], fp: IO[str]) -> None:
    """Write a density time series as CSV (one row per time and bin)."""
    if not series:
        raise ConfigError("empty density series")
    dim = series[0][1].dim
    fp.write("t,i,rho_plus,rho_minus\n" if dim == 1 else "t,i,j,rho_plus,rho_minus\n")
    for t, fld in series:
        if dim == 1:
            for i in range(fld.n):
                fp.write(f"{float(t)!r},{i},{float(fld.rho_p[i])!r},{float(fld.rho_m[i])!r}\n")
        else:
            for i in range(fld.n):
                for j in range(fld.n):
                    fp.write(
                        f"{float(t)!r},{i},{j},"
                        f"{float(fld.rho_p[i, j])!r},{float(fld.rho_m[i, j])!r}\n"
                    )


# ----------------------------------------------------------------------
# scaling-limit experiment


@dataclass
class LpRow:
    """One scale's result in the interaction-rescaling experiment."""

    eps: float
    box_side: float
    replicas: int
    sup_error: float
    stderr: float
    t_at_sup: float

    def to_dict(self) -> dict:
        return {
            "eps": self.eps,
            "box_side": self.box_side,
            "replicas": self.replicas,
            "sup_error": self.sup_error,
            "stderr": self.stderr,
            "t_at_sup": self.t_at_sup,
        }


def lp_convergence_experiment(
    phi: PairPotential,
    m: float,
    z: float,
    rho0_plus: float,
    rho0_minus: float,
    box_macro: float,
    t_end: float,
    snapshot_dt: float,
    eps_values: Sequence[float],
    replicas: int,
    seed: int,
    reference: HomogeneousRun,
    dim: int = 1,
    threads: int = 1,
) -> list[LpRow]:
    """Empirical check that rescaled dynamics approach the kinetic solution.

    For each scale the potential is rescaled (amplitude down, range up, fixed
    mass) and the box is widened to keep the macroscopic volume fixed; the
    spatially averaged density N(t)/|box| over many replicas is compared
    against the homogeneous kinetic reference on the snapshot grid.  Replica
    streams come from the master seed with spawn key (scale index, replica),
    so any row is reproducible in isolation.
    """
    if replicas < 2:
        raise ConfigError("need at least 2 replicas for a standard error")
    if not (float(rho0_plus) >= 0 and float(rho0_minus) >= 0):
        raise ConfigError("homogeneous initial densities must be >= 0")
    for e in eps_values:
        if not 0 < e <= 1:
            raise ConfigError(f"scales must lie in (0, 1], got {e}")
    n_snaps = int(math.floor(t_end / snapshot_dt + 1e-9)) + 1
    snap_times = np.arange(n_snaps) * snapshot_dt

    if reference.rho_p.ndim != 1:
        raise ConfigError("reference must be a scalar homogeneous run")
    idx = []
    for st in snap_times:
        hits = np.flatnonzero(np.abs(reference.times - st) <= 1e-9 * max(1.0, st))
        if hits.size != 1:
            raise ConfigError(
                f"kinetic reference grid does not contain snapshot time {st:g}"
            )
        idx.append(int(hits[0]))
    ref = np.stack([reference.rho_p[idx], reference.rho_m[idx]], axis=1)  # (n_snaps, 2)

    rows = []
    for e_i, eps in enumerate(eps_values):
        box = box_macro / eps
        vol = box**dim
        params = SimParams(m=m, z=z, phi=phi, t_end=t_end,
                           snapshot_dt=snapshot_dt, seed=seed, eps=eps)

        def one_replica(r: int) -> NDArray[np.float64]:
            stream = np.random.default_rng(
                np.random.SeedSequence(entropy=int(seed), spawn_key=(e_i, r))
            )
            state = sample_poisson_initial(rho0_plus, rho0_minus, box, dim, rng=stream)
            _, snaps = run(state, params, rng=stream)
            return np.array([[s.n_plus / vol, s.n_minus / vol] for s in snaps])

        dens = np.stack(map_replicas(one_replica, replicas, threads))
        mean = dens.mean(axis=0)
        se = dens.std(axis=0, ddof=1) / math.sqrt(replicas)
        err = np.abs(mean - ref)
        flat = int(np.argmax(err))
        k, sp = divmod(flat, 2)
        rows.append(LpRow(
            eps=float(eps), box_side=float(box), replicas=int(replicas),
            sup_error=float(err[k, sp]), stderr=float(se[k, sp]),
            t_at_sup=float(snap_times[k]),
        ))
    return rows
