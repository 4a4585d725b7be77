"""Batch front end: JSON config in, CSV/JSON artifacts out.

One config file describes one run of a single subcommand::

    mlz simulate|analytic|verify|stokes|dual|scan --config cfg.json [--out DIR]

Exit codes: 0 success (for ``verify``: all checks passed), 1 computational
failure or failed checks, 2 config/schema error.  Diagnostics go to stderr
as JSON lines.  Output files are written atomically (temp file + rename)
with full-precision decimal floats.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

import numpy as np

try:
    import jsonschema
except ImportError:  # pragma: no cover
    jsonschema = None

from . import analytic as analytic_mod
from . import constraints as constraints_mod
from . import stokes as stokes_mod
from .errors import MlzError, NotBipartite, ParseError, SchemaError
from .model import (
    MlzModel,
    build_bowtie,
    build_chain,
    build_dtcm,
    build_five_state,
    build_four_state,
    build_generic,
    build_six_state,
    detect_bipartition,
    dual_bosonic,
    eta as model_eta,
    sort_by_slope,
)
from .propagate import PropagationSettings, evolve_nonunitary, scattering_estimate
from .scanner import RefineSettings, find_simultaneous_zero, sweep

COMMANDS = ("simulate", "analytic", "verify", "stokes", "dual", "scan")

_PROPAGATION_SCHEMA = {
    "type": "object",
    "properties": {
        "t_max": {"type": "number", "exclusiveMinimum": 0},
        "dt0": {"type": "number", "exclusiveMinimum": 0},
        "rule": {"enum": ["fixed", "adaptive"]},
        "scheme": {"enum": ["midpoint", "cf4"]},
    },
    "required": ["t_max"],
    "additionalProperties": False,
}

_MODEL_SCHEMA = {
    "type": "object",
    "properties": {
        "family": {"enum": ["generic", "bowtie", "chain", "dtcm",
                            "four_state", "five_state", "six_state"]},
        "params": {"type": "object"},
    },
    "required": ["family", "params"],
    "additionalProperties": False,
}

_SCHEMA = {
    "type": "object",
    "properties": {
        "command": {"enum": list(COMMANDS)},
        "model": _MODEL_SCHEMA,
        "propagation": _PROPAGATION_SCHEMA,
        "schedule": {"type": "array", "items": {"type": "number"}, "minItems": 1},
        "family": {"enum": ["bowtie", "bowtie3", "dtcm4", "dtcm5",
                            "six_state", "five_state"]},
        "params": {"type": "object"},
        "sweep": {
            "type": "object",
            "properties": {
                "param": {"type": "string"},
                "values": {"type": "array", "items": {"type": "number"},
                           "minItems": 1},
            },
            "required": ["param", "values"],
            "additionalProperties": False,
        },
        "source": {
            "type": "object",
            "properties": {
                "kind": {"enum": ["analytic", "numeric"]},
                "t_max": {"type": "number", "exclusiveMinimum": 0},
                "dt0": {"type": "number", "exclusiveMinimum": 0},
                "rule": {"enum": ["fixed", "adaptive"]},
                "scheme": {"enum": ["midpoint", "cf4"]},
            },
            "required": ["kind"],
            "additionalProperties": False,
        },
        "checks": {"type": "array",
                   "items": {"enum": ["bipartite_symmetry", "trace",
                                      "hierarchy", "cyclic"]}},
        "tolerance": {"type": "number", "exclusiveMinimum": 0},
        "initial": {"type": "array", "items": {"type": "number", "minimum": 0}},
        "scan": {
            "type": "object",
            "properties": {
                "model": _MODEL_SCHEMA,
                "vary": {
                    "type": "object",
                    "properties": {
                        "path": {"type": "string"},
                        "index": {"type": "integer", "minimum": 1},
                    },
                    "required": ["path"],
                    "additionalProperties": False,
                },
                "range": {"type": "array", "items": {"type": "number"},
                          "minItems": 2, "maxItems": 2},
                "grid_size": {"type": "integer", "minimum": 2},
                "t_max": {"type": "number", "exclusiveMinimum": 0},
                "triple": {"type": "array", "items": {"type": "integer"},
                           "minItems": 3, "maxItems": 3},
                "quad": {"type": "array", "items": {"type": "integer"},
                         "minItems": 4, "maxItems": 4},
                "refine": {
                    "type": "object",
                    "properties": {
                        "window": {"type": "number", "exclusiveMinimum": 0},
                        "threshold": {"type": "number", "exclusiveMinimum": 0},
                        "xtol": {"type": "number", "exclusiveMinimum": 0},
                        "confirm_t_factors": {"type": "array",
                                              "items": {"type": "number"}},
                    },
                    "additionalProperties": False,
                },
            },
            "required": ["model", "vary", "range", "grid_size", "t_max"],
            "additionalProperties": False,
        },
        "output": {
            "type": "object",
            "properties": {
                "format": {"enum": ["csv", "json"]},
                "stem": {"type": "string", "minLength": 1},
            },
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}

_REQUIRED_SECTIONS = {
    "simulate": ("model", "propagation"),
    "analytic": ("family", "params"),
    "verify": ("model", "source"),
    "stokes": ("model", "source"),
    "dual": ("model", "source"),
    "scan": ("scan",),
}


# ---------------------------------------------------------------------------
# model JSON descriptor
# ---------------------------------------------------------------------------

def _coupling_list(raw) -> list:
    out = []
    for entry in raw:
        if not isinstance(entry, (list, tuple)) or len(entry) not in (3, 4):
            raise SchemaError("coupling entries must be [i, j, re] or [i, j, re, im]")
        i, j = int(entry[0]), int(entry[1])
        g = complex(entry[2], entry[3] if len(entry) == 4 else 0.0)
        out.append((i, j, g))
    return out


def _bowtie_others(raw) -> list:
    out = []
    for entry in raw:
        if not isinstance(entry, (list, tuple)) or len(entry) not in (2, 3):
            raise SchemaError(
                "bowtie 'others' entries must be [slope, re] or [slope, re, im]")
        out.append((float(entry[0]),
                    complex(entry[1], entry[2] if len(entry) == 3 else 0.0)))
    return out


_BUILDERS: dict[str, Callable[..., MlzModel]] = {
    "generic": lambda p: build_generic(p["beta"], _coupling_list(p["couplings"])),
    "bowtie": lambda p: build_bowtie(p["beta0"], _bowtie_others(p["others"])),
    "chain": lambda p: build_chain(p["beta"], p["g"]),
    "dtcm": lambda p: build_dtcm(p["n_states"], p["g"], p["n_b"],
                                 p.get("beta_scale", 1.0)),
    "four_state": lambda p: build_four_state(p["beta"], p["beta1"], p["beta2"],
                                             p["g1"], p["g2"]),
    "five_state": lambda p: build_five_state(p["b"], p["b3"], p["b4"], p["b5"],
                                             p["g13"], p["g14"],
                                             p.get("taus", (1, 1, 1))),
    "six_state": lambda p: build_six_state(p["beta1"], p["beta2"], p["beta3"],
                                           p["g12"], p["g13"], p["g23"]),
}

_PARAM_FIELD_HINTS = {
    "DegenerateSlopes": "beta",
    "DuplicateCoupling": "couplings",
    "DiagonalCoupling": "couplings",
}


def model_from_spec(spec: dict, pointer: str = "/model") -> MlzModel:
    """Build a model from its JSON descriptor, mapping failures to SchemaError."""
    family = spec["family"]
    try:
        return _BUILDERS[family](spec["params"])
    except KeyError as exc:
        raise SchemaError(f"missing parameter {exc} for family {family!r}",
                          [(f"{pointer}/params", f"missing parameter {exc}")])
    except MlzError as exc:
        hint = _PARAM_FIELD_HINTS.get(type(exc).__name__, "")
        where = f"{pointer}/params" + (f"/{hint}" if hint else "")
        raise SchemaError(f"invalid model parameters: {exc}", [(where, str(exc))])
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"malformed model parameters: {exc}",
                          [(f"{pointer}/params", str(exc))])


def _settings_from(section: dict, defaults: Optional[dict] = None) -> PropagationSettings:
    merged = dict(defaults or {})
    merged.update({k: v for k, v in section.items() if k != "kind"})
    return PropagationSettings(
        t_max=merged["t_max"],
        dt0=merged.get("dt0", 0.1),
        step_rule=merged.get("rule", "adaptive"),
        scheme=merged.get("scheme", "midpoint"),
    )


# ---------------------------------------------------------------------------
# config parsing
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RunConfig:
    """A validated run: command, raw config data, and the built model."""

    command: str
    data: dict
    model: Optional[MlzModel] = None

    @property
    def output_format(self) -> str:
        return self.data.get("output", {}).get("format", "csv")

    @property
    def output_stem(self) -> str:
        return self.data.get("output", {}).get("stem", self.command)


def parse_config(text: str, command: Optional[str] = None) -> RunConfig:
    """Validate config JSON and build referenced models.

    Collects every schema violation (with JSON-pointer paths) before
    raising.  ``command`` (from the CLI subcommand) must agree with the
    config's own ``command`` key when both are given.
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}")
    if not isinstance(data, dict):
        raise SchemaError("config root must be an object", [("", "not an object")])

    violations = []
    if jsonschema is not None:
        validator = jsonschema.Draft202012Validator(_SCHEMA)
        for err in sorted(validator.iter_errors(data), key=lambda e: list(e.path)):
            pointer = "/" + "/".join(str(p) for p in err.path)
            violations.append((pointer, err.message))
    cfg_command = data.get("command", command)
    if cfg_command is None:
        violations.append(("/command", "no command given"))
    elif cfg_command not in COMMANDS:
        violations.append(("/command", f"unknown command {cfg_command!r}"))
    elif command is not None and cfg_command != command:
        violations.append(("/command",
                           f"config says {cfg_command!r}, invoked as {command!r}"))
    if cfg_command in _REQUIRED_SECTIONS:
        for section in _REQUIRED_SECTIONS[cfg_command]:
            if section not in data:
                violations.append((f"/{section}",
                                   f"required for command {cfg_command!r}"))
    if violations:
        raise SchemaError(
            "; ".join(f"{ptr or '/'}: {msg}" for ptr, msg in violations),
            violations)

    model = None
    if "model" in data:
        model = model_from_spec(data["model"])
    if cfg_command == "scan":
        base = model_from_spec(data["scan"]["model"], pointer="/scan/model")
        lo, hi = data["scan"]["range"]
        for g in (lo, hi):  # the family must be valid across the range
            _scan_generator(data["scan"])(g)
        del base
    return RunConfig(command=cfg_command, data=data, model=model)


def _scan_generator(scan_cfg: dict) -> Callable[[float], MlzModel]:
    spec = scan_cfg["model"]
    path = scan_cfg["vary"]["path"]
    index = scan_cfg["vary"].get("index")

    def generator(g: float) -> MlzModel:
        params = json.loads(json.dumps(spec["params"]))  # deep copy
        if index is None:
            params[path] = g
        else:
            params[path][index - 1] = g
        return model_from_spec({"family": spec["family"], "params": params},
                               pointer="/scan/model")

    return generator


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


def _atomic_write(path: str, content: str) -> None:
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".mlz-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as handle:
            handle.write(content)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_csv(path: str, header: list[str], rows: list[list]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(x) for x in row])
    _atomic_write(path, buf.getvalue())


def _write_json(path: str, payload) -> None:
    _atomic_write(path, json.dumps(payload, indent=2, allow_nan=True) + "\n")


def _complex_matrix_json(m: np.ndarray) -> list:
    return [[[float(np.real(x)), float(np.imag(x))] for x in row] for row in m]


def _diagnostic(**kv) -> None:
    print(json.dumps(kv), file=sys.stderr)


# ---------------------------------------------------------------------------
# command implementations
# ---------------------------------------------------------------------------

def _run_simulate(config: RunConfig, out_dir: str) -> int:
    settings = _settings_from(config.data["propagation"])
    schedule = config.data.get("schedule", [settings.t_max])
    est = scattering_estimate(config.model, schedule, settings)
    rows = []
    for (t_k, p), (_, u) in zip(est.snapshots, est.u_snapshots):
        for i in range(config.model.n):
            for j in range(config.model.n):
                rows.append([t_k, i + 1, j + 1, u[i, j].real, u[i, j].imag, p[i, j]])
    path = os.path.join(out_dir, config.output_stem)
    if config.output_format == "json":
        _write_json(path + ".json", {
            "schedule": [t for t, _ in est.snapshots],
            "u": [_complex_matrix_json(u) for _, u in est.u_snapshots],
            "p": [p.tolist() for _, p in est.snapshots],
            "convergence": est.convergence.tolist(),
            "stochasticity_residual": est.stochasticity_residual,
        })
    else:
        _write_csv(path + ".csv", ["T", "i", "j", "re_u_ij", "im_u_ij", "p_ij"], rows)
    return 0


_ANALYTIC_FAMILIES: dict[str, Callable[[dict], analytic_mod.AnalyticSolution]] = {
    "bowtie3": lambda p: analytic_mod.bowtie3_scattering(
        p["beta1"], p["beta2"], p["g1"], p["g2"]),
    "dtcm4": lambda p: analytic_mod.dtcm4_probabilities(
        p["g"], p.get("beta_scale", 1.0)),
    "dtcm5": lambda p: analytic_mod.dtcm5_probabilities(
        p["g"], p.get("beta_scale", 1.0)),
    "six_state": lambda p: analytic_mod.six_state_probabilities(
        p["beta1"], p["beta2"], p["beta3"], p["g12"], p["g13"], p["g23"]),
    "five_state": lambda p: analytic_mod.five_state_probabilities(
        p["b"], p["b3"], p["b4"], p["b5"], p["g13"], p["g14"],
        p.get("taus", (1, 1, 1))),
    "bowtie": lambda p: analytic_mod.bowtie_alpha(
        build_bowtie(p["beta0"], _bowtie_others(p["others"]))),
}


def _run_analytic(config: RunConfig, out_dir: str) -> int:
    family = config.data["family"]
    base_params = config.data["params"]
    sweep_cfg = config.data.get("sweep")
    runs = []
    if sweep_cfg:
        for value in sweep_cfg["values"]:
            params = dict(base_params)
            params[sweep_cfg["param"]] = value
            runs.append((params, _ANALYTIC_FAMILIES[family](params)))
    else:
        runs.append((base_params, _ANALYTIC_FAMILIES[family](base_params)))

    rows = []
    payload = []
    for params, sol in runs:
        record = json.dumps(params, sort_keys=True)
        for i in range(sol.n):
            for j in range(sol.n):
                row = [family, record, i + 1, j + 1, sol.p[i, j]]
                if sol.s is not None:
                    row += [sol.s[i, j].real, sol.s[i, j].imag]
                else:
                    row += ["", ""]
                rows.append(row)
        payload.append({
            "family": family,
            "params": params,
            "p": sol.p.tolist(),
            "s": None if sol.s is None else _complex_matrix_json(sol.s),
        })
    path = os.path.join(out_dir, config.output_stem)
    if config.output_format == "json":
        _write_json(path + ".json", payload)
    else:
        _write_csv(path + ".csv",
                   ["family", "params", "i", "j", "p_ij", "re_s_ij", "im_s_ij"],
                   rows)
    return 0


def _source_matrix(config: RunConfig) -> tuple[np.ndarray, MlzModel]:
    """Scattering matrix (and the slope-sorted model) for verify/stokes/dual."""
    source = config.data["source"]
    model_sorted, _ = sort_by_slope(config.model)
    if source["kind"] == "numeric":
        settings = _settings_from(source)
        est = scattering_estimate(model_sorted, [settings.t_max], settings)
        return est.u_snapshots[-1][1], model_sorted
    family = config.data["model"]["family"]
    if family != "bowtie":
        raise SchemaError(
            "analytic amplitudes are only available for the bowtie family; "
            "use a numeric source",
            [("/source/kind", f"analytic source unsupported for {family!r}")])
    sol = analytic_mod.bowtie_alpha(model_sorted)
    return sol.s, model_sorted


def _run_verify(config: RunConfig, out_dir: str) -> int:
    s, model_sorted = _source_matrix(config)
    checks = config.data.get("checks",
                             ["bipartite_symmetry", "trace", "hierarchy"])
    tolerance = config.data.get("tolerance",
                                1e-10 if config.data["source"]["kind"] == "analytic"
                                else 1e-2)
    bip = detect_bipartition(model_sorted)
    reports = []
    if "bipartite_symmetry" in checks:
        reports.append(constraints_mod.check_bipartite_symmetry(s, bip, tolerance))
    if "trace" in checks:
        reports.append(constraints_mod.check_trace_identity(s, bip, tolerance))
    if "hierarchy" in checks:
        reports.extend(constraints_mod.check_hierarchy(s, model_sorted,
                                                       tolerance=tolerance))
    if "cyclic" in checks:
        reports.append(constraints_mod.check_cyclic_reality(
            s, threshold=max(tolerance, 1e-10)))
    payload = [{
        "name": r.name,
        "residual": r.residual,
        "tolerance": r.tolerance,
        "pass": r.passed,
        "details": {k: v for k, v in r.details.items()
                    if isinstance(v, (int, float, str, bool))},
    } for r in reports]
    _write_json(os.path.join(out_dir, config.output_stem + ".json"), payload)
    return 0 if all(r.passed for r in reports) else 1


def _run_stokes(config: RunConfig, out_dir: str) -> int:
    s, model_sorted = _source_matrix(config)
    tol = config.data.get("tolerance",
                          1e-10 if config.data["source"]["kind"] == "analytic"
                          else 1e-2)
    bip = detect_bipartition(model_sorted)
    stokes_set = stokes_mod.stokes_from_scattering(s, model_sorted, bip, tol=tol)
    monodromy = stokes_mod.check_monodromy(stokes_set, tolerance=max(tol, 1e-10))
    _write_json(os.path.join(out_dir, config.output_stem + ".json"), {
        "eta": stokes_set.eta.eta.tolist(),
        "s1": _complex_matrix_json(stokes_set.s1),
        "s2": _complex_matrix_json(stokes_set.s2),
        "s3": _complex_matrix_json(stokes_set.s3),
        "s4": _complex_matrix_json(stokes_set.s4),
        "monodromy_residual": monodromy.residual,
        "monodromy_pass": monodromy.passed,
    })
    return 0


def _run_dual(config: RunConfig, out_dir: str) -> int:
    s, model_sorted = _source_matrix(config)
    tol = config.data.get("tolerance",
                          1e-10 if config.data["source"]["kind"] == "analytic"
                          else 1e-2)
    bip = detect_bipartition(model_sorted)
    stokes_set = stokes_mod.stokes_from_scattering(s, model_sorted, bip, tol=tol)
    dual = stokes_mod.dual_scattering(stokes_set, bip)
    populations = stokes_mod.condensate_populations(
        dual, config.data.get("initial"))
    payload = {
        "s_prime": _complex_matrix_json(dual.s_prime),
        "signature": dual.signature.tolist(),
        "pseudo_unitarity_residual": dual.pseudo_unitarity_residual,
        "populations": populations.tolist(),
    }
    if "propagation" in config.data:
        # optional cross-check against direct non-Hermitian propagation
        settings = _settings_from(config.data["propagation"])
        ev = evolve_nonunitary(dual_bosonic(model_sorted, bip), settings)
        payload["numeric_abs2"] = (np.abs(ev.u) ** 2).tolist()
        payload["numeric_pseudo_unitarity_residual"] = ev.pseudo_unitarity_residual
    _write_json(os.path.join(out_dir, config.output_stem + ".json"), payload)
    return 0


def _run_scan(config: RunConfig, out_dir: str) -> int:
    scan_cfg = config.data["scan"]
    generator = _scan_generator(scan_cfg)
    settings = _settings_from(
        config.data.get("propagation", {"t_max": scan_cfg["t_max"]}),
        defaults={"t_max": scan_cfg["t_max"]})
    triple = tuple(scan_cfg.get("triple", (1, 2, 3)))
    quad = tuple(scan_cfg.get("quad", (1, 2, 3, 4)))
    result = sweep(generator, tuple(scan_cfg["range"]), scan_cfg["grid_size"],
                   scan_cfg["t_max"], settings, triple=triple, quad=quad,
                   family=scan_cfg["model"]["family"])
    refine = RefineSettings(**scan_cfg.get("refine", {}))
    root = find_simultaneous_zero(result, generator, settings, refine)
    path = os.path.join(out_dir, config.output_stem)
    rows = [[g, r3, r4, flag or ""]
            for g, r3, r4, flag in zip(result.grid, result.r3, result.r4,
                                       result.flags)]
    _write_csv(path + ".csv", ["g", "r3", "r4", "flags"], rows)
    _write_json(path + "_summary.json", {
        "family": result.family,
        "t_max": result.t_max,
        "g_star": None if root is None else root["g_star"],
        "root": root,
    })
    return 0


_RUNNERS = {
    "simulate": _run_simulate,
    "analytic": _run_analytic,
    "verify": _run_verify,
    "stokes": _run_stokes,
    "dual": _run_dual,
    "scan": _run_scan,
}


def run(config: RunConfig, out_dir: str = ".") -> int:
    """Execute a validated config; returns the process exit code."""
    os.makedirs(out_dir, exist_ok=True)
    try:
        return _RUNNERS[config.command](config, out_dir)
    except NotBipartite as exc:
        _diagnostic(level="error", error="NotBipartite", message=str(exc),
                    cycle=exc.cycle)
        return 2
    except SchemaError as exc:
        _diagnostic(level="error", error="SchemaError", message=str(exc),
                    violations=exc.violations)
        return 2
    except MlzError as exc:
        _diagnostic(level="error", error=type(exc).__name__, message=str(exc))
        return 1


def main(argv: Optional[list[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="mlz",
        description="simulate and verify single-crossing multistate "
                    "Landau-Zener models")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", required=True, help="JSON config file")
        cmd.add_argument("--out", default=".", help="output directory")
    args = parser.parse_args(argv)
    try:
        with open(args.config, "r", encoding="utf-8") as handle:
            text = handle.read()
    except OSError as exc:
        _diagnostic(level="error", error="ConfigIO", message=str(exc))
        return 2
    try:
        config = parse_config(text, command=args.command)
    except ParseError as exc:
        _diagnostic(level="error", error="ParseError", message=str(exc))
        return 2
    except SchemaError as exc:
        _diagnostic(level="error", error="SchemaError", message=str(exc),
                    violations=exc.violations)
        return 2
    return run(config, out_dir=args.out)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
