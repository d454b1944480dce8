"""Batch experiment driver and command-line entry point.

Experiment configs are YAML (or JSON) mappings. A ``preset`` key selects a
named base configuration and the remaining keys override it::

    preset: desk
    target: {kind: bas, rows: 4, cols: 4}
    topology: [balanced-tree, mps-caterpillar]
    chi: 8
    methods: [Iter_D, D_all]
    K_max: 5
    sweeps: 100
    learning_rates: [0.65]
    chi_cap: auto
    rel_tol: 1.0e-12
    convergence_tol: 1.0e-12
    seed: 0
    output: results

``target.kind`` is ``bas`` (rows, cols), ``heisenberg`` (rows, cols, j1, j2,
boundary) or ``fixture`` (path to a state-vector JSON). ``topology`` entries
are ``balanced-tree``, ``mps-caterpillar`` or a path to a topology JSON;
an optional ``order`` list relabels leaves for sensitivity checks.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import platform
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy
import yaml

from . import __version__
from .decompose import AUTO
from .exceptions import ConfigError, ConvergenceError, PreconditionError, ResourceError
from .io import circuit_to_dict, load_json, save_json
from .network import TOPOLOGY_KINDS, TreeTensorNetwork, TreeTopology, build_topology, from_statevector, infidelity
from .optimize import METHODS, SweepConfig, embed
from .states import LatticeSpec, bas_state, heisenberg_ground_state

__all__ = ["ExperimentConfig", "PRESETS", "load_config", "run_experiment", "main"]

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2
NUMERICAL_ERRORS = (ConvergenceError, PreconditionError, ResourceError, np.linalg.LinAlgError, FloatingPointError)

_R_GRID = [0.5, 0.55, 0.6, 0.65, 0.7]
_BAS = {"kind": "bas", "rows": 4, "cols": 4}
_HEIS = {"kind": "heisenberg", "rows": 4, "cols": 4, "j1": 1.0, "j2": 0.5, "boundary": "open"}
_BOTH = ["balanced-tree", "mps-caterpillar"]

PRESETS: Dict[str, Dict[str, Any]] = {
    "desk": {"target": _BAS, "topology": _BOTH, "chi": 8, "methods": ["Iter_D", "D_all"], "K_max": 5, "sweeps": 100, "learning_rates": [0.65]},
    "bas-trees": {"target": _BAS, "topology": _BOTH, "chi": 8, "methods": ["Iter_D"], "K_max": 7, "sweeps": 1000, "learning_rates": _R_GRID, "convergence_tol": 0.0},
    "heisenberg-trees": {"target": _HEIS, "topology": _BOTH, "chi": 8, "methods": ["Iter_D"], "K_max": 7, "sweeps": 1000, "learning_rates": _R_GRID, "convergence_tol": 0.0},
    "bas-methods": {"target": _BAS, "topology": ["balanced-tree"], "chi": 16, "methods": list(METHODS), "K_max": 7, "sweeps": 1000, "learning_rates": _R_GRID, "convergence_tol": 0.0},
    "heisenberg-methods": {"target": _HEIS, "topology": ["balanced-tree"], "chi": 16, "methods": list(METHODS), "K_max": 7, "sweeps": 1000, "learning_rates": _R_GRID, "convergence_tol": 0.0},
}


@dataclass(frozen=True)
class ExperimentConfig:
    target: Dict[str, Any] = field(default_factory=lambda: dict(_BAS))
    topology: Tuple[str, ...] = tuple(_BOTH)
    order: Optional[Tuple[int, ...]] = None
    chi: int = 8
    methods: Tuple[str, ...] = ("Iter_D", "D_all")
    K_max: int = 5
    sweeps: int = 100
    learning_rates: Tuple[float, ...] = (0.65,)
    chi_cap: Any = AUTO
    rel_tol: float = 1e-12
    convergence_tol: float = 1e-12
    seed: int = 0
    output: str = "results"

    @classmethod
    def from_mapping(cls, raw: Dict[str, Any]) -> "ExperimentConfig":
        """Validate a mapping (after preset expansion); errors name the field."""
        raw = dict(raw)
        preset = raw.pop("preset", "desk")
        if preset not in PRESETS:
            raise ConfigError(f"field 'preset': unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        merged = {**PRESETS[preset], **{k: v for k, v in raw.items() if v is not None}}
        known = set(cls.__dataclass_fields__)
        unknown = set(merged) - known
        if unknown:
            raise ConfigError(f"unknown config field(s): {sorted(unknown)}")

        def fail(name, msg):
            raise ConfigError(f"field {name!r}: {msg}")

        def pos_int(name, minimum=1):
            v = merged.get(name, getattr(cls, name, None))
            if isinstance(v, bool) or not isinstance(v, int) or v < minimum:
                fail(name, f"must be an integer >= {minimum}, got {v!r}")
            return v

        target = merged.get("target", dict(_BAS))
        if not isinstance(target, dict) or target.get("kind") not in ("bas", "heisenberg", "fixture"):
            fail("target", "must be a mapping with kind bas, heisenberg or fixture")
        if target["kind"] in ("bas", "heisenberg"):
            for key in ("rows", "cols"):
                if not isinstance(target.get(key), int) or target[key] < 1:
                    fail(f"target.{key}", f"must be a positive integer, got {target.get(key)!r}")
            if target["rows"] * target["cols"] < 2:
                fail("target", "needs at least two sites")
        if target["kind"] == "heisenberg" and target.get("boundary", "open") not in ("open", "periodic"):
            fail("target.boundary", "must be 'open' or 'periodic'")
        if target["kind"] == "fixture" and not target.get("path"):
            fail("target.path", "fixture targets need a path")

        topo = merged.get("topology", _BOTH)
        topo = [topo] if isinstance(topo, str) else list(topo)
        if not topo:
            fail("topology", "needs at least one entry")
        for t in topo:
            if t not in TOPOLOGY_KINDS and not str(t).endswith(".json"):
                fail("topology", f"{t!r} is neither one of {TOPOLOGY_KINDS} nor a .json topology file")

        methods = merged.get("methods", ["Iter_D"])
        methods = [methods] if isinstance(methods, str) else list(methods)
        for m in methods:
            if m not in METHODS:
                fail("methods", f"unknown method {m!r}; choose from {METHODS}")

        rates = merged.get("learning_rates", [0.65])
        rates = [rates] if isinstance(rates, (int, float)) else list(rates)
        for r in rates:
            if isinstance(r, bool) or not isinstance(r, (int, float)) or not 0.0 < r <= 1.0:
                fail("learning_rates", f"each rate must lie in (0, 1], got {r!r}")

        chi_cap = merged.get("chi_cap", AUTO)
        if chi_cap not in (AUTO, None) and (isinstance(chi_cap, bool) or not isinstance(chi_cap, int) or chi_cap < 1):
            fail("chi_cap", f"must be 'auto', null or a positive integer, got {chi_cap!r}")
        tols = {}
        for name in ("rel_tol", "convergence_tol"):
            v = merged.get(name, getattr(cls, name))
            try:
                # YAML 1.1 reads "1e-12" as a string
                tols[name] = float(v) if not isinstance(v, bool) else -1.0
            except (TypeError, ValueError):
                tols[name] = -1.0
            if not tols[name] >= 0:
                fail(name, f"must be a non-negative number, got {v!r}")
        order = merged.get("order")
        if order is not None and (not isinstance(order, (list, tuple)) or not all(isinstance(q, int) for q in order)):
            fail("order", "must be a list of qubit indices")

        return cls(
            target=dict(target),
            topology=tuple(topo),
            order=None if order is None else tuple(order),
            chi=pos_int("chi"),
            methods=tuple(methods),
            K_max=pos_int("K_max"),
            sweeps=pos_int("sweeps"),
            learning_rates=tuple(float(r) for r in rates),
            chi_cap=chi_cap,
            rel_tol=tols["rel_tol"],
            convergence_tol=tols["convergence_tol"],
            seed=pos_int("seed", minimum=0),
            output=str(merged.get("output", cls.output)),
        )


def load_config(path: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    raw: Dict[str, Any] = {}
    if path is not None:
        try:
            raw = yaml.safe_load(Path(path).read_text()) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"config {path} must be a mapping")
    raw.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return ExperimentConfig.from_mapping(raw)


# -- building blocks -----------------------------------------------------------


def build_target(target: Dict[str, Any], seed: int = 0) -> Tuple[np.ndarray, Optional[Tuple[int, int]]]:
    """State vector and lattice shape (None for fixtures)."""
    kind = target["kind"]
    if kind == "bas":
        return bas_state(target["rows"], target["cols"]), (target["rows"], target["cols"])
    if kind == "heisenberg":
        spec = LatticeSpec(
            target["rows"],
            target["cols"],
            boundary=target.get("boundary", "open"),
            j1=float(target.get("j1", 1.0)),
            j2=float(target.get("j2", 0.0)),
        )
        return heisenberg_ground_state(spec, seed=seed).psi, (spec.rows, spec.cols)
    psi = load_json(target["path"])
    if not isinstance(psi, np.ndarray):
        raise ConfigError(f"field 'target.path': {target['path']} is not a state-vector document")
    return psi, None


def _topology(entry: str, n: int, lattice, order) -> TreeTopology:
    if entry in TOPOLOGY_KINDS:
        return build_topology(entry, n, lattice=lattice, order=order)
    top = load_json(entry)
    if not isinstance(top, TreeTopology):
        raise ConfigError(f"field 'topology': {entry} is not a topology document")
    return top


def _cell_name(topology: str, method: str, r: Optional[float]) -> str:
    tag = Path(topology).stem if topology.endswith(".json") else topology
    return f"{tag}__{method}" + ("" if r is None else f"__r{r:.2f}")


_CSV_COLUMNS = ["topology", "method", "learning_rate", "K", "infidelity", "infidelity_to_state", "status"]


def run_experiment(config: ExperimentConfig, output: Optional[str] = None) -> Dict[str, Any]:
    """Run every (topology, method, learning rate) cell and write the reports.

    Writes ``results.csv`` (final infidelity per K; no timings, so equal
    configs give identical bytes), ``manifest.json`` (config echo, versions,
    wall times, learning-rate selection, failures) and one circuit JSON per
    cell under ``circuits/``. Returns the manifest.
    """
    out = Path(output or config.output)
    (out / "circuits").mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()
    psi, lattice = build_target(config.target, seed=config.seed)
    n = int(psi.size).bit_length() - 1

    rows: List[Dict[str, Any]] = []
    cells: List[Dict[str, Any]] = []
    for topo_entry in config.topology:
        top = _topology(topo_entry, n, lattice, config.order)
        psi0 = from_statevector(psi, top, chi_max=config.chi)
        tn_infidelity = infidelity(psi, psi0)
        for method in config.methods:
            rates: Sequence[Optional[float]] = [None] if method == "D_all" else config.learning_rates
            for r in rates:
                name = _cell_name(topo_entry, method, r)
                cell = {"cell": name, "topology": topo_entry, "method": method, "learning_rate": r, "tn_infidelity": tn_infidelity}
                t0 = time.perf_counter()
                try:
                    cfg = SweepConfig(config.sweeps, 1.0 if r is None else r, config.convergence_tol)
                    report = embed(psi0, method, config.K_max, cfg, chi_cap=config.chi_cap, rel_tol=config.rel_tol, reference=psi)
                except NUMERICAL_ERRORS as exc:
                    logger.error("cell %s failed: %s", name, exc)
                    cell.update(status="failed", error=f"{type(exc).__name__}: {exc}", seconds=time.perf_counter() - t0)
                    cells.append(cell)
                    for k in range(1, config.K_max + 1):
                        rows.append({"topology": topo_entry, "method": method, "learning_rate": r, "K": k, "status": "failed"})
                    continue
                finals = report.final_infidelities()
                to_state = report.final_infidelities("infidelity_to_state")
                for k in range(1, config.K_max + 1):
                    rows.append(
                        {
                            "topology": topo_entry,
                            "method": method,
                            "learning_rate": r,
                            "K": k,
                            "infidelity": finals[k],
                            "infidelity_to_state": to_state[k],
                            "status": "ok",
                        }
                    )
                path = out / "circuits" / f"{name}.json"
                path.write_text(json.dumps({**circuit_to_dict(report.circuit), "trace": report.records}))
                cell.update(status="ok", seconds=time.perf_counter() - t0, circuit=str(path.relative_to(out)), final_infidelity=finals[config.K_max])
                cells.append(cell)

    (out / "results.csv").write_text(_results_csv(rows))
    manifest = {
        "config": asdict(config),
        "versions": {
            "ttnembed": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        "seed": config.seed,
        "n_qubits": n,
        "cells": cells,
        "selection": _select_rates(cells),
        "wall_time": time.perf_counter() - started,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, default=str))
    return manifest


def _results_csv(rows: List[Dict[str, Any]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_CSV_COLUMNS)
    for row in rows:
        writer.writerow(["" if row.get(c) is None else (repr(row[c]) if isinstance(row[c], float) else row[c]) for c in _CSV_COLUMNS])
    return buf.getvalue()


def _select_rates(cells: List[Dict[str, Any]]) -> List[Dict[str, Any]]:
    """Per (topology, method): the rate with the lowest final infidelity."""
    best: Dict[Tuple[str, str], Dict[str, Any]] = {}
    for cell in cells:
        if cell["status"] != "ok":
            continue
        key = (cell["topology"], cell["method"])
        if key not in best or cell["final_infidelity"] < best[key]["final_infidelity"]:
            best[key] = cell
    return [
        {"topology": t, "method": m, "learning_rate": c["learning_rate"], "final_infidelity": c["final_infidelity"]}
        for (t, m), c in sorted(best.items())
    ]


# -- command line --------------------------------------------------------------


def _add_target_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--target", choices=["bas", "heisenberg", "fixture"], default="bas")
    p.add_argument("--rows", type=int, default=4)
    p.add_argument("--cols", type=int, default=4)
    p.add_argument("--j1", type=float, default=1.0)
    p.add_argument("--j2", type=float, default=0.5)
    p.add_argument("--boundary", choices=["open", "periodic"], default="open")
    p.add_argument("--fixture", help="state-vector JSON for --target fixture")
    p.add_argument("--seed", type=int, default=0)


def _target_from_args(args) -> Dict[str, Any]:
    if args.target == "bas":
        return {"kind": "bas", "rows": args.rows, "cols": args.cols}
    if args.target == "heisenberg":
        return {"kind": "heisenberg", "rows": args.rows, "cols": args.cols, "j1": args.j1, "j2": args.j2, "boundary": args.boundary}
    return {"kind": "fixture", "path": args.fixture}


def _parse_cap(text: str):
    if text == AUTO:
        return AUTO
    if text.lower() in ("none", "null"):
        return None
    return int(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ttnembed", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-state", help="write a target state vector as JSON")
    _add_target_args(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("build-network", help="compress a state vector into a tree tensor network")
    p.add_argument("--state", required=True, help="state-vector JSON")
    p.add_argument("--topology", default="balanced-tree", help=f"{' | '.join(TOPOLOGY_KINDS)} | topology JSON")
    p.add_argument("--lattice", type=int, nargs=2, metavar=("ROWS", "COLS"))
    p.add_argument("--order", type=int, nargs="+")
    p.add_argument("--chi", type=int, default=8)
    p.add_argument("--out", required=True)

    p = sub.add_parser("embed", help="embed a tree tensor network into a circuit")
    p.add_argument("--network", required=True, help="network JSON from build-network")
    p.add_argument("--method", choices=METHODS, default="Iter_D")
    p.add_argument("--layers", type=int, default=3)
    p.add_argument("--sweeps", type=int, default=100)
    p.add_argument("--learning-rate", type=float, default=0.65)
    p.add_argument("--convergence-tol", type=float, default=1e-12)
    p.add_argument("--chi-cap", type=_parse_cap, default=AUTO)
    p.add_argument("--rel-tol", type=float, default=1e-12)
    p.add_argument("--reference", help="optional state-vector JSON to score against")
    p.add_argument("--out", required=True, help="circuit JSON")
    p.add_argument("--report", help="optional report CSV")

    p = sub.add_parser("report", help="run an experiment grid and write CSV/JSON reports")
    p.add_argument("--config", help="YAML experiment config")
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--chi", type=int)
    p.add_argument("--methods", nargs="+")
    p.add_argument("--topology", nargs="+")
    p.add_argument("--K-max", dest="K_max", type=int)
    p.add_argument("--sweeps", type=int)
    p.add_argument("--learning-rates", dest="learning_rates", type=float, nargs="+")
    p.add_argument("--chi-cap", dest="chi_cap", type=_parse_cap)
    p.add_argument("--seed", type=int)
    p.add_argument("--output")
    return parser


def _run(args) -> int:
    if args.command == "build-state":
        psi, _ = build_target(_target_from_args(args), seed=args.seed)
        save_json(psi, args.out)
        print(f"wrote {psi.size} amplitudes to {args.out}")
    elif args.command == "build-network":
        psi = load_json(args.state)
        if not isinstance(psi, np.ndarray):
            raise ConfigError(f"{args.state} is not a state-vector document")
        n = int(psi.size).bit_length() - 1
        top = _topology(args.topology, n, tuple(args.lattice) if args.lattice else None, args.order)
        ttn = from_statevector(psi, top, chi_max=args.chi)
        save_json(ttn, args.out)
        print(f"max bond {ttn.max_bond()}, infidelity to state {infidelity(psi, ttn):.6e}")
    elif args.command == "embed":
        ttn = load_json(args.network)
        if not isinstance(ttn, TreeTensorNetwork):
            raise ConfigError(f"{args.network} is not a network document")
        ref = load_json(args.reference) if args.reference else None
        cfg = SweepConfig(args.sweeps, args.learning_rate, args.convergence_tol)
        report = embed(ttn, args.method, args.layers, cfg, chi_cap=args.chi_cap, rel_tol=args.rel_tol, reference=ref)
        save_json(report.circuit, args.out)
        if args.report:
            report.to_csv(args.report)
        for k, v in report.final_infidelities().items():
            print(f"K={k} infidelity={v:.6e}")
    else:
        overrides = {k: getattr(args, k) for k in ("preset", "chi", "methods", "topology", "K_max", "sweeps", "learning_rates", "seed", "output")}
        if args.chi_cap is not None:
            overrides["chi_cap"] = args.chi_cap
        config = load_config(args.config, overrides)
        manifest = run_experiment(config)
        failed = [c["cell"] for c in manifest["cells"] if c["status"] != "ok"]
        print(f"{len(manifest['cells'])} cells, {len(failed)} failed; results in {config.output}")
        if failed:
            return EXIT_NUMERICAL
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return _run(args)
    except (ConfigError, ValueError, TypeError, KeyError, OSError) as exc:
        if isinstance(exc, NUMERICAL_ERRORS):
            print(f"numerical failure: {exc}", file=sys.stderr)
            return EXIT_NUMERICAL
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
