"""Run configuration, command dispatch, and manifest persistence.

A run is described by one JSON config (schema-checked, unknown keys
rejected).  ``execute`` normalizes the config, fills every default so the
echoed copy is self-describing, dispatches to the owning module, writes all
output files, and finishes with a ``manifest.json`` listing each emitted file
with its SHA-256.  Given the same config and seed the data files are
bitwise-reproducible; the manifest echoes enough to re-run itself.
"""
from __future__ import annotations

import copy
import csv
import hashlib
import io
import json
import math
import platform
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping

import jsonschema
import numpy as np

from . import __version__, equilibria, gf_algebra, kinetics, microsim, svgplot
from ._accel import HAS_NUMBA
from .errors import ConfigError, NumericalError
from .potential import KINDS, PairPotential, PotentialError, periodize

COMMANDS = (
    "simulate",
    "solve-kinetic",
    "equilibria",
    "phase-portrait",
    "bifurcation-scan",
    "lp-converge",
    "verify-identities",
)

_POSITIVE = {"type": "number", "exclusiveMinimum": 0}
_NONNEG = {"type": "number", "minimum": 0}
_EPS = {"type": "number", "exclusiveMinimum": 0, "maximum": 1}
_SEED = {"type": "integer", "minimum": 0, "maximum": 2**64 - 1}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["command"],
    "properties": {
        "command": {"enum": list(COMMANDS)},
        "out_dir": {"type": "string"},
        "model": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "m": _POSITIVE,
                "z": _NONNEG,
                "beta": _POSITIVE,
                "a": _POSITIVE,
                "phi": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["kind"],
                    "properties": {
                        "kind": {"enum": list(KINDS)},
                        "dim": {"enum": [1, 2]},
                        "cutoff": _POSITIVE,
                        "params": {"type": "object"},
                    },
                },
            },
        },
        "discretization": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "grid": {"type": "integer", "minimum": 2},
                "length": _POSITIVE,
                "dt": _POSITIVE,
                "t_end": _POSITIVE,
                "method": {"enum": ["picard", "rk4"]},
                "store_every": {"type": "integer", "minimum": 1},
            },
        },
        "simulation": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "seed": _SEED,
                "replicas": {"type": "integer", "minimum": 1},
                "eps": _EPS,
                "eps_values": {"type": "array", "items": _EPS, "minItems": 1},
                "snapshot_dt": _POSITIVE,
                "box": _POSITIVE,
                "rho0_plus": _NONNEG,
                "rho0_minus": _NONNEG,
                "bins": {"type": "integer", "minimum": 1},
            },
        },
        "scan": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "a_min": _POSITIVE,
                "a_max": _POSITIVE,
                "steps": {"type": "integer", "minimum": 2},
            },
        },
        "portrait": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "ic_values": {"type": "array", "items": _NONNEG, "minItems": 1},
            },
        },
        "identities": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "instances": {"type": "integer", "minimum": 1},
                "max_points": {"type": "integer", "minimum": 0, "maximum": 6},
                "seed": _SEED,
            },
        },
    },
}

# which config fields each command reads; anything else present is an error
_ALLOWED: dict[str, dict[str, set[str]]] = {
    "simulate": {
        "model": {"m", "z", "phi"},
        "discretization": {"t_end"},
        "simulation": {"seed", "replicas", "eps", "snapshot_dt", "box",
                       "rho0_plus", "rho0_minus", "bins"},
    },
    "solve-kinetic": {
        "model": {"m", "z", "phi"},
        "discretization": {"grid", "length", "dt", "t_end", "method", "store_every"},
        "simulation": {"rho0_plus", "rho0_minus"},
    },
    "equilibria": {
        "model": {"a", "m", "z", "beta"},
    },
    "phase-portrait": {
        "model": {"a", "m", "z", "beta"},
        "discretization": {"t_end", "dt", "store_every"},
        "portrait": {"ic_values"},
    },
    "bifurcation-scan": {
        "model": {"m"},
        "scan": {"a_min", "a_max", "steps"},
    },
    "lp-converge": {
        "model": {"m", "z", "phi", "beta"},
        "discretization": {"dt", "t_end"},
        "simulation": {"seed", "replicas", "eps_values", "snapshot_dt", "box",
                       "rho0_plus", "rho0_minus"},
    },
    "verify-identities": {
        "identities": {"instances", "max_points", "seed"},
    },
}

_DEFAULTS: dict[str, dict[str, dict[str, object]]] = {
    "simulate": {
        "simulation": {"seed": 0, "replicas": 1, "eps": 1.0,
                       "rho0_plus": 1.0, "rho0_minus": 1.0, "bins": 32},
    },
    "solve-kinetic": {
        "discretization": {"method": "picard"},
        "simulation": {"rho0_plus": 1.0, "rho0_minus": 1.0},
    },
    "equilibria": {
        "model": {"m": 1.0, "beta": 1.0},
    },
    "phase-portrait": {
        "model": {"m": 1.0, "beta": 1.0},
        "discretization": {"t_end": 200.0, "dt": 0.02, "store_every": 5},
        "portrait": {"ic_values": [0.0, 0.5, 1.0, 1.5, 2.0]},
    },
    "bifurcation-scan": {
        "model": {"m": 1.0},
    },
    "lp-converge": {
        "discretization": {"dt": 1e-3},
        "simulation": {"seed": 0, "replicas": 200,
                       "rho0_plus": 1.0, "rho0_minus": 1.0},
    },
    "verify-identities": {
        "identities": {"instances": 200, "max_points": 4, "seed": 0},
    },
}

_REQUIRED: dict[str, tuple[tuple[str, str], ...]] = {
    "simulate": (("model", "m"), ("model", "z"), ("model", "phi"),
                 ("discretization", "t_end"), ("simulation", "box")),
    "solve-kinetic": (("model", "m"), ("model", "z"), ("model", "phi"),
                      ("discretization", "grid"), ("discretization", "length"),
                      ("discretization", "dt"), ("discretization", "t_end")),
    "equilibria": (),
    "phase-portrait": (),
    "bifurcation-scan": (("scan", "a_min"), ("scan", "a_max"), ("scan", "steps")),
    "lp-converge": (("model", "m"), ("model", "z"), ("model", "phi"),
                    ("discretization", "t_end"), ("simulation", "box"),
                    ("simulation", "eps_values"), ("simulation", "snapshot_dt")),
    "verify-identities": (),
}

IDENTITY_TOL = 1e-12


# ----------------------------------------------------------------------
# config handling


def load_json(path) -> dict:
    """Read a JSON document; malformed content is a config error."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
    if not isinstance(obj, dict):
        raise ConfigError(f"top-level JSON value in {path} must be an object")
    return obj


def config_from_payload(obj: Mapping) -> dict:
    """Accept either a raw config or a manifest (re-run support)."""
    if "config" in obj and "files" in obj:
        inner = obj["config"]
        if not isinstance(inner, Mapping):
            raise ConfigError("manifest 'config' entry must be an object", path=("config",))
        return dict(inner)
    return dict(obj)


def potential_from_descriptor(desc: Mapping) -> PairPotential:
    """Build a pair potential from its JSON descriptor.

    The cutoff may be omitted where it is implied (top-hat radius, last
    tabulated radius).
    """
    kind = desc.get("kind")
    params = dict(desc.get("params", {}))
    dim = int(desc.get("dim", 1))
    cutoff = desc.get("cutoff")
    if cutoff is None:
        if kind == "top-hat" and "radius" in params:
            cutoff = params["radius"]
        elif kind == "tabulated" and params.get("radii"):
            cutoff = params["radii"][-1]
        else:
            raise ConfigError("potential descriptor needs a cutoff",
                              path=("model", "phi", "cutoff"))
    try:
        return PairPotential(kind, params, cutoff=float(cutoff), dim=dim)
    except PotentialError as exc:
        raise ConfigError(f"invalid potential: {exc}", path=("model", "phi")) from exc


def _resolve_a(model: dict) -> tuple[float, float, float, float]:
    """(a, m, z, beta) for the reduced-dynamics commands."""
    m = float(model.get("m", 1.0))
    beta = float(model.get("beta", 1.0))
    if "a" in model:
        a = float(model["a"])
        z = a * m / beta
        if "z" in model and not math.isclose(model["z"], z, rel_tol=1e-12):
            raise ConfigError(
                f"model gives both a={a} and z={model['z']}, but a*m/beta={z}",
                path=("model", "z"),
            )
    else:
        if "z" not in model:
            raise ConfigError("model needs either 'a' or 'z'", path=("model",))
        z = float(model["z"])
        a = z * beta / m
        if a <= 0:
            raise ConfigError("derived control parameter a = z*beta/m must be > 0",
                              path=("model", "z"))
    return a, m, z, beta


def normalize_config(config: Mapping) -> dict:
    """Validate against the schema, check applicability, and fill defaults."""
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    err = jsonschema.exceptions.best_match(validator.iter_errors(config))
    if err is not None:
        path = tuple(err.absolute_path)
        if err.validator == "additionalProperties":
            extras = sorted(set(err.instance) - set(err.schema.get("properties", {})))
            if extras:
                path = path + (extras[0],)
        raise ConfigError(err.message, path=path)
    cfg = copy.deepcopy(dict(config))
    command = cfg["command"]
    allowed = _ALLOWED[command]
    for section, value in cfg.items():
        if section in ("command", "out_dir"):
            continue
        if section not in allowed:
            raise ConfigError(f"section {section!r} is not used by {command!r}",
                              path=(section,))
        for key in value:
            if key not in allowed[section]:
                raise ConfigError(
                    f"field {key!r} is not used by {command!r}", path=(section, key)
                )
    for section, fields in _DEFAULTS.get(command, {}).items():
        target = cfg.setdefault(section, {})
        for key, val in fields.items():
            target.setdefault(key, copy.deepcopy(val))
    for section, key in _REQUIRED[command]:
        if key not in cfg.get(section, {}):
            raise ConfigError(f"{command!r} requires {section}.{key}",
                              path=(section, key))
    # context-dependent defaults (their inputs are required fields)
    if command == "simulate":
        cfg["simulation"].setdefault(
            "snapshot_dt", float(cfg["discretization"]["t_end"]) / 10.0)
    if command == "solve-kinetic" and "store_every" not in cfg["discretization"]:
        d = cfg["discretization"]
        steps = int(round(d["t_end"] / d["dt"]))
        d["store_every"] = max(1, int(math.ceil(steps / 200.0)))
    if command in ("equilibria", "phase-portrait"):
        a, m, z, beta = _resolve_a(cfg.setdefault("model", {}))
        cfg["model"] = {"a": a, "m": m, "z": z, "beta": beta}
    if command == "bifurcation-scan":
        scan = cfg["scan"]
        if not scan["a_min"] < scan["a_max"]:
            raise ConfigError("scan needs a_min < a_max", path=("scan", "a_max"))
    if "phi" in cfg.get("model", {}):
        potential_from_descriptor(cfg["model"]["phi"])  # fail early on bad descriptors
    return cfg


# ----------------------------------------------------------------------
# output helpers


def _csv_table(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(row)
    return buf.getvalue()


def _json_doc(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _to_jsonable(obj):
    if isinstance(obj, dict):
        return {k: _to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


def _density_series_csv(series) -> str:
    buf = io.StringIO()
    microsim.density_to_csv(series, buf)
    return buf.getvalue()


# ----------------------------------------------------------------------
# command runners: config -> {filename: text}, optional failure message


def _run_simulate(cfg: dict, threads: int) -> tuple[dict[str, str], str | None]:
    model, sim = cfg["model"], cfg["simulation"]
    phi = potential_from_descriptor(model["phi"])
    params = microsim.SimParams(
        m=model["m"], z=model["z"], phi=phi, t_end=cfg["discretization"]["t_end"],
        snapshot_dt=sim["snapshot_dt"], seed=sim["seed"], eps=sim["eps"],
    )
    replicas = sim["replicas"]
    width = max(3, len(str(replicas - 1)))

    def one(r: int):
        stream = np.random.default_rng(
            np.random.SeedSequence(entropy=int(sim["seed"]), spawn_key=(0, r))
        )
        state = microsim.sample_poisson_initial(
            sim["rho0_plus"], sim["rho0_minus"], sim["box"], phi.dim, rng=stream
        )
        return microsim.run(state, params, rng=stream)

    results = microsim.map_replicas(one, replicas, threads)
    files: dict[str, str] = {}
    count_rows = []
    vol = float(sim["box"]) ** phi.dim
    for r, (log, snaps) in enumerate(results):
        buf = io.StringIO()
        log.to_ndjson(buf)
        files[f"events_r{r:0{width}d}.ndjson"] = buf.getvalue()
        series = microsim.empirical_density(snaps, bins=sim["bins"])
        files[f"density_r{r:0{width}d}.csv"] = _density_series_csv(series)
        for s in snaps:
            count_rows.append([float(s.t), r, s.n_plus, s.n_minus])
    files["counts.csv"] = _csv_table(["t", "replica", "n_plus", "n_minus"], count_rows)
    times = np.array([s.t for s in results[0][1]])
    mean_p = np.mean([[s.n_plus / vol for s in snaps] for _, snaps in results], axis=0)
    mean_m = np.mean([[s.n_minus / vol for s in snaps] for _, snaps in results], axis=0)
    files["counts.svg"] = svgplot.line_plot(
        [("mean density +", times, mean_p), ("mean density -", times, mean_m)],
        title="replica-averaged density", xlabel="t", ylabel="N(t) / |box|",
    )
    return files, None


def _run_solve_kinetic(cfg: dict, threads: int) -> tuple[dict[str, str], str | None]:
    model, disc, sim = cfg["model"], cfg["discretization"], cfg["simulation"]
    phi = potential_from_descriptor(model["phi"])
    kernel = periodize(phi, disc["length"], disc["grid"])
    field0 = kinetics.DensityField2.constant(
        phi.dim, disc["grid"], disc["length"], sim["rho0_plus"], sim["rho0_minus"]
    )
    solver = kinetics.picard_solve if disc["method"] == "picard" else kinetics.rk4_solve
    run = solver(field0, kernel, model["m"], model["z"], disc["t_end"],
                 dt=disc["dt"], store_every=disc["store_every"])
    series = [
        (float(t), kinetics.DensityField2(phi.dim, disc["grid"], disc["length"],
                                          run.rho_p[k], run.rho_m[k]))
        for k, t in enumerate(run.times)
    ]
    files = {"solution.csv": _density_series_csv(series)}
    mean_axis = tuple(range(1, run.rho_p.ndim))
    files["means.svg"] = svgplot.line_plot(
        [("spatial mean +", run.times, run.rho_p.mean(axis=mean_axis)),
         ("spatial mean -", run.times, run.rho_m.mean(axis=mean_axis))],
        title=f"kinetic solve ({run.method})", xlabel="t", ylabel="mean density",
    )
    files["summary.json"] = _json_doc(_to_jsonable({
        "method": run.method, "dim": run.dim, "n": run.n, "length": run.length,
        "m": run.m, "z": run.z, "dt": run.dt, "bound": run.bound,
        "bound_violation": run.bound_violation, "min_value": run.min_value,
        "final_mean_plus": float(run.rho_p[-1].mean()),
        "final_mean_minus": float(run.rho_m[-1].mean()),
        "diagnostics": run.diagnostics,
    }))
    return files, None


def _run_equilibria(cfg: dict, threads: int) -> tuple[dict[str, str], str | None]:
    model = cfg["model"]
    report = equilibria.equilibrium_report(model["a"], model["m"], model["beta"])
    return {"report.json": _json_doc(_to_jsonable(report.to_dict()))}, None


def _run_phase_portrait(cfg: dict, threads: int) -> tuple[dict[str, str], str | None]:
    model, disc = cfg["model"], cfg["discretization"]
    bundle = equilibria.phase_portrait(
        model["a"], model["m"], model["beta"],
        ic_values=tuple(cfg["portrait"]["ic_values"]),
        t_end=disc["t_end"], dt=disc["dt"], store_every=disc["store_every"],
    )
    files: dict[str, str] = {}
    labels = []
    for k in range(bundle.ics.shape[0]):
        files[f"traj_{k:02d}.csv"] = _csv_table(
            ["t", "rho_plus", "rho_minus"],
            [[float(t), float(p), float(q)] for t, p, q in
             zip(bundle.times, bundle.rho_p[:, k], bundle.rho_m[:, k])],
        )
        root = bundle.report.roots[int(bundle.terminal_root[k])]
        labels.append({
            "ic": [float(bundle.ics[k, 0]), float(bundle.ics[k, 1])],
            "root_index": int(bundle.terminal_root[k]),
            "root_kind": root.kind,
            "terminal_distance": float(bundle.terminal_distance[k]),
            "terminal_drift": float(bundle.terminal_drift[k]),
        })
    files["labels.json"] = _json_doc({
        "a": bundle.a, "m": bundle.m, "beta": bundle.beta, "z": bundle.z,
        "trajectories": labels,
    })
    marks = [(r.x / bundle.beta, r.y / bundle.beta, r.kind) for r in bundle.report.roots]
    files["portrait.svg"] = svgplot.phase_plot(
        [(bundle.rho_p[:, k], bundle.rho_m[:, k]) for k in range(bundle.ics.shape[0])],
        points=marks, title=f"phase plane, a={bundle.a:g}",
        xlabel="density +", ylabel="density -",
    )
    return files, None


def _run_bifurcation_scan(cfg: dict, threads: int) -> tuple[dict[str, str], str | None]:
    scan = cfg["scan"]
    rows = equilibria.bifurcation_scan(scan["a_min"], scan["a_max"], scan["steps"],
                                       m=cfg["model"]["m"])
    table = []
    for row in rows:
        if len(row.roots) == 1:
            # the single root continues the symmetric branch (x e^x = a)
            r = row.roots[0]
            table.append([row.a, "", float(r.x), "", "", r.kind, ""])
        else:
            r1, r2, r3 = row.roots
            table.append([row.a, float(r1.x), float(r2.x), float(r3.x),
                          r1.kind, r2.kind, r3.kind])
    files = {"scan.csv": _csv_table(
        ["a", "x1", "x2", "x3", "class1", "class2", "class3"], table)}
    return files, None


def _run_lp_converge(cfg: dict, threads: int) -> tuple[dict[str, str], str | None]:
    model, disc, sim = cfg["model"], cfg["discretization"], cfg["simulation"]
    phi = potential_from_descriptor(model["phi"])
    beta = float(model.get("beta", phi.l1_norm()))
    reference = kinetics.homogeneous_reduce(
        model["m"], model["z"], beta, sim["rho0_plus"], sim["rho0_minus"],
        disc["t_end"], dt=disc["dt"], method="rk4",
    )
    rows = microsim.lp_convergence_experiment(
        phi, model["m"], model["z"], sim["rho0_plus"], sim["rho0_minus"],
        box_macro=sim["box"], t_end=disc["t_end"], snapshot_dt=sim["snapshot_dt"],
        eps_values=sim["eps_values"], replicas=sim["replicas"], seed=sim["seed"],
        reference=reference, dim=phi.dim, threads=threads,
    )
    files = {"rows.csv": _csv_table(
        ["eps", "box_side", "replicas", "sup_error", "stderr", "t_at_sup"],
        [[r.eps, r.box_side, r.replicas, r.sup_error, r.stderr, r.t_at_sup]
         for r in rows],
    )}
    stride = max(1, reference.times.size // 400)
    files["reference.csv"] = _csv_table(
        ["t", "rho_plus", "rho_minus"],
        [[float(t), float(p), float(q)] for t, p, q in
         zip(reference.times[::stride], reference.rho_p[::stride],
             reference.rho_m[::stride])],
    )
    eps_arr = np.array([r.eps for r in rows])
    files["errors.svg"] = svgplot.line_plot(
        [("sup-time error", eps_arr, np.array([r.sup_error for r in rows])),
         ("2 x stderr", eps_arr, np.array([2 * r.stderr for r in rows]))],
        title="scaling-limit convergence", xlabel="eps", ylabel="error",
    )
    return files, None


def _run_verify_identities(cfg: dict, threads: int) -> tuple[dict[str, str], str | None]:
    ids = cfg["identities"]
    rng = np.random.default_rng(np.random.SeedSequence(int(ids["seed"])))
    worst = {"equation8": 0.0, "product_formula": 0.0, "round_trip": 0.0}

    def trig(c0, c1, w):
        return lambda x: c0 * np.cos(w * x) + 1j * c1 * np.sin(w * x)

    for _ in range(int(ids["instances"])):
        n_p = int(rng.integers(0, ids["max_points"] + 1))
        n_m = int(rng.integers(0, ids["max_points"] + 1))
        eta = gf_algebra.FiniteConfiguration2(
            rng.uniform(-3, 3, (n_p, 1)), rng.uniform(-3, 3, (n_m, 1))
        )
        f_p = trig(*rng.uniform(-0.45, 0.45, 2), rng.uniform(0.3, 2.0))
        f_m = trig(*rng.uniform(-0.45, 0.45, 2), rng.uniform(0.3, 2.0))
        phi = PairPotential.top_hat(rng.uniform(0.2, 1.5), rng.uniform(0.5, 1.5))

        def as_lp(cfg2):
            return gf_algebra.lp_exponential(f_p, f_m, cfg2)

        prod = complex(np.prod([1 + f_p(float(x)) for x in eta.points_plus[:, 0]])
                       * np.prod([1 + f_m(float(x)) for x in eta.points_minus[:, 0]]))
        kval = gf_algebra.k_transform(as_lp, eta)
        worst["product_formula"] = max(
            worst["product_formula"], abs(kval - prod) / max(1.0, abs(prod)))

        back = gf_algebra.k_inverse(lambda c: gf_algebra.k_transform(as_lp, c), eta)
        direct = as_lp(eta)
        worst["round_trip"] = max(
            worst["round_trip"], abs(back - direct) / max(1.0, abs(direct)))

        if n_m:
            x = float(rng.uniform(-3, 3))
            worst["equation8"] = max(
                worst["equation8"],
                gf_algebra.verify_equation8(f_m, x, eta.points_minus, phi),
            )

    passed = {k: bool(v <= IDENTITY_TOL) for k, v in worst.items()}
    files = {"identities.json": _json_doc(_to_jsonable({
        "instances": int(ids["instances"]),
        "max_points": int(ids["max_points"]),
        "seed": int(ids["seed"]),
        "tolerance": IDENTITY_TOL,
        "max_residuals": worst,
        "passed": passed,
    }))}
    failure = None
    if not all(passed.values()):
        bad = ", ".join(k for k, ok in passed.items() if not ok)
        failure = f"identity residuals exceeded {IDENTITY_TOL}: {bad}"
    return files, failure


_RUNNERS: dict[str, Callable[[dict, int], tuple[dict[str, str], str | None]]] = {
    "simulate": _run_simulate,
    "solve-kinetic": _run_solve_kinetic,
    "equilibria": _run_equilibria,
    "phase-portrait": _run_phase_portrait,
    "bifurcation-scan": _run_bifurcation_scan,
    "lp-converge": _run_lp_converge,
    "verify-identities": _run_verify_identities,
}


# ----------------------------------------------------------------------
# execution


@dataclass
class RunOutput:
    """Where a run wrote its results and what the manifest recorded."""

    out_dir: str
    manifest: dict
    files: list[str]


def _versions() -> dict:
    out = {
        "wrk": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "numba": None,
    }
    if HAS_NUMBA:
        import numba

        out["numba"] = numba.__version__
    return out


def execute(config: Mapping, out_dir, threads: int = 1) -> RunOutput:
    """Normalize, dispatch, persist outputs, and write the manifest."""
    if threads < 1:
        raise ConfigError(f"threads must be >= 1, got {threads}")
    cfg = normalize_config(config)
    cfg.pop("out_dir", None)  # location is not part of the reproducible payload
    t0 = time.perf_counter()
    files, failure = _RUNNERS[cfg["command"]](cfg, threads)
    wall = time.perf_counter() - t0

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for name in sorted(files):
        data = files[name].encode("utf-8")
        (out / name).write_bytes(data)
        entries.append({
            "name": name,
            "bytes": len(data),
            "sha256": hashlib.sha256(data).hexdigest(),
        })
    sim_seed = cfg.get("simulation", {}).get("seed", cfg.get("identities", {}).get("seed"))
    manifest = {
        "command": cfg["command"],
        "config": cfg,
        "versions": _versions(),
        "seed": sim_seed,
        "threads": threads,
        "wall_time_s": wall,
        "files": entries,
    }
    (out / "manifest.json").write_text(_json_doc(manifest), encoding="utf-8")
    if failure is not None:
        raise NumericalError(failure)
    return RunOutput(str(out), manifest, [e["name"] for e in entries])
