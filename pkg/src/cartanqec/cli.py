"""Command-line interface.

Subcommands ``search``, ``sweep``, ``verify`` and ``circuit``. Exit codes:
0 success, 2 bad configuration or input, 3 numerical failure, 4 internal
inconsistency.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import time
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .cartan import NONLOCAL, params_from_json
from .channels import NoiseSpec
from .circuits import (
    EQUIV_TOL,
    circuit_unitary,
    emit_qasm_like,
    nonlocal_target,
    phase_distance,
    synth_nonlocal_encoder,
)
from .errors import (
    CapacityError,
    ConsistencyError,
    DegenerateChannelError,
    InvalidArgument,
    UnsupportedString,
)
from .qec import (
    CODE_NAMES,
    Code,
    fidelity_loss,
    grid_oracle,
    named_code,
    orthonormality_residual,
    petz_recovery,
)
from .search import (
    MODES,
    SWEEP_COLUMNS,
    NonFiniteObjective,
    SearchConfig,
    SearchFailed,
    search_code,
    sweep,
)

log = logging.getLogger("cartanqec")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_INCONSISTENT = 4

VERIFY_GAP_TOL = 1e-3

_SEARCH_KEYS = {
    "noise", "n_qubits", "mode", "restarts", "seed", "tolerances",
    "init_scale", "simplex_step", "jobs", "fixed_local",
}
_SWEEP_KEYS = _SEARCH_KEYS | {"grid", "modes", "baselines", "unencoded", "svg"}
_TOL_KEYS = {"x_tol", "f_tol", "max_iters"}


class ConfigError(Exception):
    """Configuration problem; reported with exit code 2."""


# ---------------------------------------------------------------------------
# Configuration


def load_json(path: str | Path) -> Any:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read ({exc.strerror})") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None


def _unwrap_manifest(doc: Any) -> Any:
    """A run manifest can be used as a config: its snapshot is taken."""
    if isinstance(doc, dict) and "command" in doc and isinstance(doc.get("config"), dict):
        return doc["config"]
    return doc


def _number(doc: dict, key: str, kind: type, default=None, *, minimum=None):
    if key not in doc:
        return default
    v = doc[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or (kind is int and not isinstance(v, int)):
        raise ConfigError(f"field '{key}': expected {kind.__name__}, got {v!r}")
    if minimum is not None and v < minimum:
        raise ConfigError(f"field '{key}': must be >= {minimum}, got {v!r}")
    return kind(v)


def parse_noise(doc: Any, field: str = "noise") -> NoiseSpec:
    if not isinstance(doc, dict):
        raise ConfigError(f"field '{field}': expected an object")
    try:
        return NoiseSpec.from_dict(doc)
    except (InvalidArgument, TypeError, ValueError) as exc:
        raise ConfigError(f"field '{field}': {exc}") from None


def _parse_fixed_local(v: Any) -> np.ndarray | None:
    if v is None or v == "channel":
        return None
    if v == "identity":
        return np.eye(2, dtype=complex)
    if v == "hadamard":
        return np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
    try:
        u = np.array([[complex(re, im) for re, im in row] for row in v])
    except (TypeError, ValueError):
        raise ConfigError(
            "field 'fixed_local': expected 'channel', 'identity', 'hadamard' or a 2x2 [re, im] matrix"
        ) from None
    return u


def parse_search_config(doc: Any, *, allowed: set[str] = _SEARCH_KEYS) -> SearchConfig:
    doc = _unwrap_manifest(doc)
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    unknown = sorted(set(doc) - allowed)
    if unknown:
        raise ConfigError(f"unknown field(s): {', '.join(unknown)}")
    if "noise" not in doc:
        raise ConfigError("field 'noise' is required")
    noise = parse_noise(doc["noise"])
    tol = doc.get("tolerances", {})
    if not isinstance(tol, dict):
        raise ConfigError("field 'tolerances': expected an object")
    bad = sorted(set(tol) - _TOL_KEYS)
    if bad:
        raise ConfigError(f"field 'tolerances': unknown key(s) {', '.join(bad)}")
    mode = doc.get("mode", "structured_trivial")
    if mode not in MODES:
        raise ConfigError(f"field 'mode': expected one of {sorted(MODES)}, got {mode!r}")
    try:
        return SearchConfig(
            n_qubits=_number(doc, "n_qubits", int, 3),
            mode=mode,
            noise=noise,
            fixed_local=_parse_fixed_local(doc.get("fixed_local")),
            restarts=_number(doc, "restarts", int, 20, minimum=1),
            max_iters=_number(tol, "max_iters", int, None, minimum=1),
            x_tol=_number(tol, "x_tol", float, 1e-8),
            f_tol=_number(tol, "f_tol", float, 1e-10),
            init_scale=_number(doc, "init_scale", float, math.pi),
            simplex_step=_number(doc, "simplex_step", float, 0.5),
            seed=_number(doc, "seed", int, 0, minimum=0),
            jobs=_number(doc, "jobs", int, 1, minimum=1),
        )
    except InvalidArgument as exc:
        raise ConfigError(str(exc)) from None


def _parse_grid(v: Any) -> list[float]:
    if isinstance(v, dict):
        try:
            start, stop, num = float(v["start"]), float(v["stop"]), int(v["num"])
        except (KeyError, TypeError, ValueError):
            raise ConfigError("field 'grid': expected a list or {start, stop, num}") from None
        if num < 1:
            raise ConfigError("field 'grid': num must be >= 1")
        return [float(t) for t in np.linspace(start, stop, num)]
    if not isinstance(v, list) or not v:
        raise ConfigError("field 'grid': expected a non-empty list of numbers")
    try:
        return [float(t) for t in v]
    except (TypeError, ValueError):
        raise ConfigError("field 'grid': expected numbers") from None


def parse_sweep_config(doc: Any) -> tuple[SearchConfig, dict]:
    doc = _unwrap_manifest(doc)
    cfg = parse_search_config(doc, allowed=_SWEEP_KEYS)
    if "grid" not in doc:
        raise ConfigError("field 'grid' is required")
    modes = doc.get("modes", [cfg.mode])
    if not isinstance(modes, list) or any(m not in MODES for m in modes):
        raise ConfigError(f"field 'modes': expected a list drawn from {sorted(MODES)}")
    baselines = doc.get("baselines", [])
    if not isinstance(baselines, list) or any(b not in CODE_NAMES for b in baselines):
        raise ConfigError(f"field 'baselines': expected a list drawn from {sorted(CODE_NAMES)}")
    extra = {
        "grid": _parse_grid(doc["grid"]),
        "modes": [m for m in MODES if m in modes],
        "baselines": list(dict.fromkeys(baselines)),
        "unencoded": bool(doc.get("unencoded", True)),
        "svg": bool(doc.get("svg", True)),
    }
    return cfg, extra


def config_snapshot(cfg: SearchConfig) -> dict:
    tol = {"x_tol": cfg.x_tol, "f_tol": cfg.f_tol}
    if cfg.max_iters is not None:
        tol["max_iters"] = cfg.max_iters
    snap = {
        "noise": cfg.noise.to_dict(),
        "n_qubits": cfg.n_qubits,
        "mode": cfg.mode,
        "restarts": cfg.restarts,
        "seed": cfg.seed,
        "tolerances": tol,
        "init_scale": cfg.init_scale,
        "simplex_step": cfg.simplex_step,
        "jobs": cfg.jobs,
    }
    if cfg.fixed_local is not None:
        snap["fixed_local"] = [[[float(z.real), float(z.imag)] for z in row] for row in cfg.fixed_local]
    return snap


def _apply_overrides(cfg: SearchConfig, args) -> SearchConfig:
    if args.seed is not None:
        cfg.seed = args.seed
    if args.jobs is not None:
        cfg.jobs = max(1, args.jobs)
    return cfg


# ---------------------------------------------------------------------------
# Output


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _write_json(path: Path, doc: Any) -> Path:
    path.write_text(json.dumps(doc, indent=2, sort_keys=False) + "\n")
    return path


def _write_manifest(out: Path, command: str, config: dict, seed, started: str, t0: float, files) -> Path:
    doc = {
        "command": command,
        "config": config,
        "seed": seed,
        "tool_version": __version__,
        "started": started,
        "finished": _now(),
        "wall_time_s": round(time.perf_counter() - t0, 3),
        "outputs": sorted(str(Path(f).name) for f in files),
    }
    return _write_json(out / "manifest.json", doc)


def _fmt(v: float) -> str:
    if isinstance(v, float) and math.isnan(v):
        return "NaN"
    return format(v, ".12g")


def sweep_columns(extra: dict) -> list[str]:
    cols = ["param"] + [SWEEP_COLUMNS[m] for m in extra["modes"]]
    cols += [f"eta_baseline_{b}" for b in extra["baselines"]]
    if extra["unencoded"]:
        cols.append("f2_unencoded")
    return cols


def write_sweep_csv(path: Path, rows: Sequence[dict], columns: Sequence[str]) -> Path:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r.get(c, math.nan)) for c in columns])
    return path


# ---------------------------------------------------------------------------
# Commands


def cmd_search(args) -> int:
    cfg = _apply_overrides(parse_search_config(load_json(args.config)), args)
    started, t0 = _now(), time.perf_counter()
    res = search_code(cfg)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = [
        _write_json(out / "result.json", res.to_dict()),
        _write_json(out / "code.json", res.code.to_dict()),
    ]
    _write_manifest(out, "search", config_snapshot(cfg), cfg.seed, started, t0, files + [out / "manifest.json"])
    print(f"eta = {res.eta:.12g}  ({cfg.mode}, n={cfg.n_qubits}, best restart {res.best_restart})")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg, extra = parse_sweep_config(load_json(args.config))
    cfg = _apply_overrides(cfg, args)
    started, t0 = _now(), time.perf_counter()
    rows = sweep(cfg, extra["grid"], extra["modes"], extra["baselines"], extra["unencoded"])
    columns = sweep_columns(extra)
    value_cols = columns[1:]
    all_failed = all(all(math.isnan(r.get(c, math.nan)) for c in value_cols) for r in rows) if value_cols else False
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = [write_sweep_csv(out / "sweep.csv", rows, columns)]
    files.append(_write_json(out / "sweep.json", {"columns": columns, "rows": _json_rows(rows)}))
    if extra["svg"] and not args.no_svg:
        from .plotting import plot_sweep

        files.append(plot_sweep(rows, value_cols, out / "sweep.svg", xlabel=_strength_name(cfg.noise)))
    snapshot = config_snapshot(cfg)
    snapshot.update({k: extra[k] for k in ("grid", "modes", "baselines", "unencoded", "svg")})
    _write_manifest(out, "sweep", snapshot, cfg.seed, started, t0, files + [out / "manifest.json"])
    for r in rows:
        for e in r["errors"]:
            log.warning("param=%s: %s", _fmt(r["param"]), e)
    print(f"{len(rows)} rows written to {out / 'sweep.csv'}")
    if all_failed:
        log.error("every sweep row failed")
        return EXIT_NUMERIC
    return EXIT_OK


def _json_rows(rows: Sequence[dict]) -> list[dict]:
    def clean(v):
        if isinstance(v, float) and math.isnan(v):
            return None
        return v

    return [{k: clean(v) for k, v in r.items()} for r in rows]


def _strength_name(noise: NoiseSpec) -> str:
    return "alpha" if noise.family == "random_admixed" else "gamma"


def _resolve_code(spec: str) -> tuple[str, Code, dict | None]:
    """A code name or a JSON file holding a code (bare, or under a ``code`` key)."""
    if spec in CODE_NAMES:
        return spec, named_code(spec), None
    path = Path(spec)
    if not path.exists():
        raise ConfigError(f"{spec!r} is neither a known code ({', '.join(CODE_NAMES)}) nor a file")
    doc = load_json(path)
    noise = None
    if isinstance(doc, dict) and isinstance(doc.get("code"), dict):
        noise = doc.get("noise")
        doc = doc["code"]
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: expected a JSON object")
    try:
        return str(path), Code.from_dict(doc), noise
    except InvalidArgument as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _noise_arg(v: str | None) -> Any:
    if v is None:
        return None
    if Path(v).exists():
        return load_json(v)
    try:
        return json.loads(v)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"--noise: not a file and not valid JSON ({exc.msg})") from None


def cmd_verify(args) -> int:
    label, code, doc_noise = _resolve_code(args.code)
    noise_doc = _noise_arg(args.noise)
    if noise_doc is None:
        noise_doc = doc_noise
    if noise_doc is None:
        raise ConfigError("no noise given: pass --noise")
    noise = parse_noise(noise_doc)
    channel = noise.channel_on(code.n_qubits)
    eta, worst = fidelity_loss(channel, code)
    rec = petz_recovery(channel, code)
    eta_grid = grid_oracle(channel, code, rec, args.grid_points)
    gap = abs(eta - eta_grid)
    report = {
        "code": label,
        "n_qubits": code.n_qubits,
        "noise": noise.to_dict(),
        "eta_eigen": eta,
        "eta_grid": eta_grid,
        "gap": gap,
        "orthonormality_residual": orthonormality_residual(code.v1, code.v2),
        "petz_tp_residual": rec.tp_residual(),
        "petz_range_residual": rec.range_residual(code),
        "worst_state": [[float(z.real), float(z.imag)] for z in worst],
    }
    for k, v in report.items():
        print(f"{k}: {_show(v)}")
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _write_json(out / "verify.json", report)
    if gap > VERIFY_GAP_TOL:
        log.error("oracles disagree by %.3e", gap)
        return EXIT_INCONSISTENT
    return EXIT_OK


def _show(v: Any) -> str:
    if isinstance(v, float):
        return _fmt(v)
    if isinstance(v, dict):
        return json.dumps(v)
    if isinstance(v, list):
        return "[" + ", ".join(f"{re:+.6f}{im:+.6f}j" for re, im in v) + "]"
    return str(v)


def cmd_circuit(args) -> int:
    path = Path(args.params)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read ({exc.strerror})") from None
    try:
        x, n, mode = params_from_json(text)
    except InvalidArgument as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if n != 3:
        raise ConfigError(f"{path}: circuit synthesis supports 3 qubits only, got n={n}")
    if mode != NONLOCAL:
        raise ConfigError(f"{path}: circuit synthesis needs structured parameters ({NONLOCAL}), got {mode}")
    started, t0 = _now(), time.perf_counter()
    circ = synth_nonlocal_encoder(x)
    dist = phase_distance(circuit_unitary(circ), nonlocal_target(x))
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    qasm = out / "encoder.qasm"
    qasm.write_text(emit_qasm_like(circ))
    report = {
        "n_qubits": n,
        "gates": len(circ.gates),
        "cnots": sum(g.kind == "CNOT" for g in circ.gates),
        "rz": sum(g.kind == "RZ" for g in circ.gates),
        "phase_distance": dist,
        "tolerance": EQUIV_TOL,
        "passed": dist <= EQUIV_TOL,
    }
    files = [qasm, _write_json(out / "circuit_report.json", report)]
    _write_manifest(out, "circuit", {"params": str(path)}, None, started, t0, files + [out / "manifest.json"])
    for k, v in report.items():
        print(f"{k}: {_show(v)}")
    if dist > EQUIV_TOL:
        log.error("synthesised circuit is %.3e away from the target unitary", dist)
        return EXIT_INCONSISTENT
    return EXIT_OK


# ---------------------------------------------------------------------------
# Entry point


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cartanqec", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", required=True, help="JSON config (a run manifest also works)")
        sp.add_argument("--out-dir", default=".", help="output directory")
        sp.add_argument("--seed", type=int, default=None, help="override the config seed")
        sp.add_argument("--jobs", type=int, default=None, help="worker process cap")

    sp = sub.add_parser("search", help="search one code")
    common(sp)
    sp.set_defaults(func=cmd_search)

    sp = sub.add_parser("sweep", help="search across a noise-strength grid")
    common(sp)
    sp.add_argument("--no-svg", action="store_true", help="skip sweep.svg")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("verify", help="score a known or saved code with both oracles")
    sp.add_argument("code", help=f"one of {', '.join(CODE_NAMES)} or a code JSON file")
    sp.add_argument("--noise", help="noise spec as inline JSON or a file")
    sp.add_argument("--grid-points", type=int, default=10_000)
    sp.add_argument("--out-dir", default=None)
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("circuit", help="synthesise a structured 3-qubit encoder")
    sp.add_argument("params", help="parameter JSON or a search result.json")
    sp.add_argument("--out-dir", default=".")
    sp.set_defaults(func=cmd_circuit)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (ConfigError, InvalidArgument, UnsupportedString, CapacityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConsistencyError as exc:
        print(f"inconsistency: {exc}", file=sys.stderr)
        return EXIT_INCONSISTENT
    except (DegenerateChannelError, NonFiniteObjective, SearchFailed, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
