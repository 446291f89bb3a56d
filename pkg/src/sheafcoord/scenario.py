"""Scenario files: JSON descriptions of coordination problems.

A scenario bundles a sheaf, per-vertex objectives, per-edge potentials,
optional initial state, and solver/flow settings into one JSON document:

    {
      "name": "consensus-line4",
      "description": "...",
      "mode": "soft",                       # or "hard"
      "graph": {"vertices": 4, "edges": [[0, 1], [1, 2], [2, 3]]},
      "sheaf": {
        "vertex_dims": [1, 1, 1, 1],
        "edge_dims": [1, 1, 1],
        "restrictions": [                   # one record per (edge, side)
          {"edge": 0, "side": "tail", "entries": [1.0]},   # row-major
          ...
        ]
      },
      "objectives": [{"type": "zero"}, ...],          # one per vertex
      "potentials": [{"type": "zero_indicator"}, ...],# one per edge
      "initial_state": [[3.0], [1.0], [4.0], [2.0]],  # optional
      "solver": {"rho": 1.0, ...},                    # AdmmConfig fields
      "flow": {"step_size": 0.0, ...}                 # FlowConfig fields
    }

Objective variants: ``zero``; ``quadratic`` (reference, weight);
``fixed`` (point); ``box`` (lower, upper).  Potential variants:
``quadratic`` (target, stiffness); ``huber`` (target, stiffness,
threshold); ``zero_indicator``.

Parsing is strict: unknown keys, missing sections, wrong lengths, and
inconsistent dimensions all raise :class:`ScenarioError` naming the exact
field.  :func:`serialize_scenario` inverts :func:`parse_scenario`, so
parse -> serialize -> parse reproduces the identical program.

This module also owns the solver/flow trace emitters: a CSV with header
``iter,primal_residual,dual_residual,objective`` and a terminal-state JSON
document, both with floats printed to 17 significant digits (round-trip
exact for 64-bit values).
"""

from __future__ import annotations

import dataclasses
import importlib.resources
import json
import math
from collections.abc import Iterable, Sequence
from pathlib import Path
from typing import Any

import numpy as np

from .convex import (
    BoxObjective,
    EdgePotential,
    FixedValueObjective,
    HuberPotential,
    NodeObjective,
    QuadraticObjective,
    QuadraticPotential,
    ZeroIndicatorPotential,
    ZeroObjective,
)
from .core import (
    CellularSheaf,
    Cochain0,
    Cochain1,
    Graph,
    LinearMap,
    validate_sheaf,
)
from .dynamics import FlowConfig
from .homprog import AdmmConfig, HomologicalProgram, Mode

__all__ = [
    "ScenarioError",
    "Scenario",
    "parse_scenario",
    "load_scenario",
    "serialize_scenario",
    "save_scenario",
    "builtin_scenario_names",
    "load_builtin_scenario",
    "format_float",
    "write_trace_csv",
    "terminal_report",
]


class ScenarioError(ValueError):
    """A scenario document failed to parse or validate; message names the field."""


@dataclasses.dataclass(frozen=True, eq=False)
class Scenario:
    """One parsed scenario: program plus run settings."""

    name: str
    description: str
    program: HomologicalProgram
    initial_state: Cochain0 | None
    solver: AdmmConfig
    flow: FlowConfig


# ---------------------------------------------------------------------------
# parsing helpers
# ---------------------------------------------------------------------------


def _fail(where: str, msg: str) -> None:
    raise ScenarioError(f"{where}: {msg}")


def _as_mapping(value: Any, where: str) -> dict:
    if not isinstance(value, dict):
        _fail(where, f"expected an object, got {type(value).__name__}")
    return value


def _as_list(value: Any, where: str) -> list:
    if not isinstance(value, list):
        _fail(where, f"expected an array, got {type(value).__name__}")
    return value


def _check_keys(obj: dict, allowed: Iterable[str], where: str) -> None:
    extra = sorted(set(obj) - set(allowed))
    if extra:
        _fail(where, f"unknown key {extra[0]!r}")


def _require(obj: dict, key: str, where: str) -> Any:
    if key not in obj:
        _fail(where, f"missing required key {key!r}")
    return obj[key]


def _as_int(value: Any, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        _fail(where, f"expected an integer, got {type(value).__name__}")
    return value


def _as_float(value: Any, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        _fail(where, f"expected a number, got {type(value).__name__}")
    return float(value)


def _as_str(value: Any, where: str) -> str:
    if not isinstance(value, str):
        _fail(where, f"expected a string, got {type(value).__name__}")
    return value


def _as_vector(value: Any, length: int, where: str) -> np.ndarray:
    items = _as_list(value, where)
    if len(items) != length:
        _fail(where, f"expected {length} numbers, got {len(items)}")
    out = np.empty(length)
    for j, v in enumerate(items):
        out[j] = _as_float(v, f"{where}[{j}]")
        if not math.isfinite(out[j]):
            _fail(f"{where}[{j}]", "entries must be finite")
    return out


_SIDES = {"tail": 0, "head": 1}
_SIDE_NAMES = ("tail", "head")


def _parse_graph(doc: dict) -> Graph:
    g = _as_mapping(_require(doc, "graph", "scenario"), "graph")
    _check_keys(g, ("vertices", "edges"), "graph")
    vertices = _as_int(_require(g, "vertices", "graph"), "graph.vertices")
    pairs = []
    for k, item in enumerate(_as_list(_require(g, "edges", "graph"), "graph.edges")):
        where = f"graph.edges[{k}]"
        pair = _as_list(item, where)
        if len(pair) != 2:
            _fail(where, f"expected [tail, head], got {len(pair)} items")
        pairs.append((_as_int(pair[0], where + "[0]"), _as_int(pair[1], where + "[1]")))
    try:
        return Graph.from_pairs(vertices, pairs)
    except ValueError as exc:
        raise ScenarioError(f"graph: {exc}") from exc


def _parse_sheaf(doc: dict, graph: Graph) -> CellularSheaf:
    s = _as_mapping(_require(doc, "sheaf", "scenario"), "sheaf")
    _check_keys(s, ("vertex_dims", "edge_dims", "restrictions"), "sheaf")

    vdims_raw = _as_list(_require(s, "vertex_dims", "sheaf"), "sheaf.vertex_dims")
    if len(vdims_raw) != graph.vertex_count:
        _fail("sheaf.vertex_dims", f"expected {graph.vertex_count} entries, got {len(vdims_raw)}")
    vertex_dims = tuple(_as_int(v, f"sheaf.vertex_dims[{i}]") for i, v in enumerate(vdims_raw))

    edims_raw = _as_list(_require(s, "edge_dims", "sheaf"), "sheaf.edge_dims")
    if len(edims_raw) != graph.edge_count:
        _fail("sheaf.edge_dims", f"expected {graph.edge_count} entries, got {len(edims_raw)}")
    edge_dims = tuple(_as_int(v, f"sheaf.edge_dims[{i}]") for i, v in enumerate(edims_raw))

    seen: dict[tuple[int, int], np.ndarray] = {}
    for k, item in enumerate(_as_list(_require(s, "restrictions", "sheaf"), "sheaf.restrictions")):
        where = f"sheaf.restrictions[{k}]"
        rec = _as_mapping(item, where)
        _check_keys(rec, ("edge", "side", "entries"), where)
        edge = _as_int(_require(rec, "edge", where), where + ".edge")
        if not 0 <= edge < graph.edge_count:
            _fail(where + ".edge", f"edge id {edge} out of range for {graph.edge_count} edges")
        side_name = _as_str(_require(rec, "side", where), where + ".side")
        if side_name not in _SIDES:
            _fail(where + ".side", f"expected 'tail' or 'head', got {side_name!r}")
        side = _SIDES[side_name]
        if (edge, side) in seen:
            _fail(where, f"duplicate restriction for edge {edge} side {side_name!r}")
        vertex = graph.edges[edge].tail if side == 0 else graph.edges[edge].head
        rows, cols = edge_dims[edge], vertex_dims[vertex]
        flat = _as_vector(_require(rec, "entries", where), rows * cols, where + ".entries")
        seen[(edge, side)] = flat.reshape(rows, cols)

    restrictions = []
    for e in range(graph.edge_count):
        for side in (0, 1):
            if (e, side) not in seen:
                _fail("sheaf.restrictions", f"missing restriction for edge {e} side {_SIDE_NAMES[side]!r}")
        restrictions.append((LinearMap.from_array(seen[(e, 0)]), LinearMap.from_array(seen[(e, 1)])))

    sheaf = CellularSheaf(graph, vertex_dims, edge_dims, tuple(restrictions))
    report = validate_sheaf(sheaf)
    if not report.ok:
        _fail("sheaf", str(report))
    return sheaf


def _parse_objective(item: Any, dim: int, where: str) -> NodeObjective:
    rec = _as_mapping(item, where)
    kind = _as_str(_require(rec, "type", where), where + ".type")
    try:
        if kind == "zero":
            _check_keys(rec, ("type",), where)
            return ZeroObjective()
        if kind == "quadratic":
            _check_keys(rec, ("type", "reference", "weight"), where)
            return QuadraticObjective(
                reference=_as_vector(_require(rec, "reference", where), dim, where + ".reference"),
                weight=_as_float(_require(rec, "weight", where), where + ".weight"),
            )
        if kind == "fixed":
            _check_keys(rec, ("type", "point"), where)
            return FixedValueObjective(point=_as_vector(_require(rec, "point", where), dim, where + ".point"))
        if kind == "box":
            _check_keys(rec, ("type", "lower", "upper"), where)
            return BoxObjective(
                lower=_as_vector(_require(rec, "lower", where), dim, where + ".lower"),
                upper=_as_vector(_require(rec, "upper", where), dim, where + ".upper"),
            )
    except ScenarioError:
        raise
    except ValueError as exc:
        raise ScenarioError(f"{where}: {exc}") from exc
    _fail(where + ".type", f"unknown objective type {kind!r}")
    raise AssertionError("unreachable")


def _parse_potential(item: Any, dim: int, where: str) -> EdgePotential:
    rec = _as_mapping(item, where)
    kind = _as_str(_require(rec, "type", where), where + ".type")
    try:
        if kind == "zero_indicator":
            _check_keys(rec, ("type",), where)
            return ZeroIndicatorPotential()
        if kind == "quadratic":
            _check_keys(rec, ("type", "target", "stiffness"), where)
            return QuadraticPotential(
                target=_as_vector(_require(rec, "target", where), dim, where + ".target"),
                stiffness=_as_float(_require(rec, "stiffness", where), where + ".stiffness"),
            )
        if kind == "huber":
            _check_keys(rec, ("type", "target", "stiffness", "threshold"), where)
            return HuberPotential(
                target=_as_vector(_require(rec, "target", where), dim, where + ".target"),
                stiffness=_as_float(_require(rec, "stiffness", where), where + ".stiffness"),
                threshold=_as_float(_require(rec, "threshold", where), where + ".threshold"),
            )
    except ScenarioError:
        raise
    except ValueError as exc:
        raise ScenarioError(f"{where}: {exc}") from exc
    _fail(where + ".type", f"unknown potential type {kind!r}")
    raise AssertionError("unreachable")


def _parse_config(doc: dict, key: str, cls: type, where: str) -> Any:
    raw = doc.get(key, {})
    rec = _as_mapping(raw, where) if raw is not None else {}
    fields = {f.name: f for f in dataclasses.fields(cls)}
    _check_keys(rec, fields, where)
    kwargs = {}
    for name, value in rec.items():
        ann = fields[name].type
        if ann == "int" or ann is int:
            kwargs[name] = _as_int(value, f"{where}.{name}")
        else:
            kwargs[name] = _as_float(value, f"{where}.{name}")
    try:
        return cls(**kwargs)
    except ValueError as exc:
        raise ScenarioError(f"{where}: {exc}") from exc


_TOP_KEYS = (
    "name",
    "description",
    "mode",
    "graph",
    "sheaf",
    "objectives",
    "potentials",
    "initial_state",
    "solver",
    "flow",
)


def parse_scenario(doc: Any, default_name: str = "scenario") -> Scenario:
    """Build a :class:`Scenario` from a decoded JSON document.

    Raises :class:`ScenarioError` naming the offending field on any problem.
    """
    top = _as_mapping(doc, "scenario")
    _check_keys(top, _TOP_KEYS, "scenario")

    name = _as_str(top.get("name", default_name), "name")
    description = _as_str(top.get("description", ""), "description")

    mode_name = _as_str(top.get("mode", "soft"), "mode")
    if mode_name not in ("soft", "hard"):
        _fail("mode", f"expected 'soft' or 'hard', got {mode_name!r}")
    mode = Mode.HARD_CONSTRAINT if mode_name == "hard" else Mode.SOFT

    graph = _parse_graph(top)
    sheaf = _parse_sheaf(top, graph)

    objs_raw = _as_list(_require(top, "objectives", "scenario"), "objectives")
    if len(objs_raw) != graph.vertex_count:
        _fail("objectives", f"expected {graph.vertex_count} entries, got {len(objs_raw)}")
    objectives = tuple(
        _parse_objective(item, sheaf.vertex_dims[i], f"objectives[{i}]") for i, item in enumerate(objs_raw)
    )

    pots_raw = _as_list(_require(top, "potentials", "scenario"), "potentials")
    if len(pots_raw) != graph.edge_count:
        _fail("potentials", f"expected {graph.edge_count} entries, got {len(pots_raw)}")
    potentials = tuple(
        _parse_potential(item, sheaf.edge_dims[e], f"potentials[{e}]") for e, item in enumerate(pots_raw)
    )

    try:
        program = HomologicalProgram(sheaf, objectives, potentials, mode)
    except ValueError as exc:
        raise ScenarioError(f"scenario: {exc}") from exc

    initial_state = None
    if top.get("initial_state") is not None:
        blocks_raw = _as_list(top["initial_state"], "initial_state")
        if len(blocks_raw) != graph.vertex_count:
            _fail("initial_state", f"expected {graph.vertex_count} blocks, got {len(blocks_raw)}")
        initial_state = Cochain0(
            tuple(
                _as_vector(b, sheaf.vertex_dims[i], f"initial_state[{i}]") for i, b in enumerate(blocks_raw)
            )
        )

    solver = _parse_config(top, "solver", AdmmConfig, "solver")
    flow = _parse_config(top, "flow", FlowConfig, "flow")
    return Scenario(name, description, program, initial_state, solver, flow)


def load_scenario(path: str | Path) -> Scenario:
    """Read and parse a scenario JSON file."""
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario file {p}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{p}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return parse_scenario(doc, default_name=p.stem)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def _serialize_objective(obj: NodeObjective) -> dict:
    if isinstance(obj, ZeroObjective):
        return {"type": "zero"}
    if isinstance(obj, QuadraticObjective):
        return {"type": "quadratic", "reference": list(map(float, obj.reference)), "weight": obj.weight}
    if isinstance(obj, FixedValueObjective):
        return {"type": "fixed", "point": list(map(float, obj.point))}
    if isinstance(obj, BoxObjective):
        return {"type": "box", "lower": list(map(float, obj.lower)), "upper": list(map(float, obj.upper))}
    raise ScenarioError(f"objective type {type(obj).__name__} has no scenario encoding")


def _serialize_potential(pot: EdgePotential) -> dict:
    if isinstance(pot, ZeroIndicatorPotential):
        return {"type": "zero_indicator"}
    if isinstance(pot, QuadraticPotential):
        return {"type": "quadratic", "target": list(map(float, pot.target)), "stiffness": pot.stiffness}
    if isinstance(pot, HuberPotential):
        return {
            "type": "huber",
            "target": list(map(float, pot.target)),
            "stiffness": pot.stiffness,
            "threshold": pot.threshold,
        }
    raise ScenarioError(f"potential type {type(pot).__name__} has no scenario encoding")


def serialize_scenario(scenario: Scenario) -> dict:
    """Encode a scenario back into its JSON document form."""
    prog = scenario.program
    sheaf = prog.sheaf
    graph = sheaf.graph
    restrictions = []
    for e in graph.edges:
        for side, name in enumerate(_SIDE_NAMES):
            arr = sheaf.restrictions[e.id][side].array
            restrictions.append({"edge": e.id, "side": name, "entries": [float(v) for v in arr.ravel()]})
    doc: dict[str, Any] = {
        "name": scenario.name,
        "description": scenario.description,
        "mode": "hard" if prog.mode is Mode.HARD_CONSTRAINT else "soft",
        "graph": {
            "vertices": graph.vertex_count,
            "edges": [[e.tail, e.head] for e in graph.edges],
        },
        "sheaf": {
            "vertex_dims": list(sheaf.vertex_dims),
            "edge_dims": list(sheaf.edge_dims),
            "restrictions": restrictions,
        },
        "objectives": [_serialize_objective(o) for o in prog.node_objectives],
        "potentials": [_serialize_potential(p) for p in prog.edge_potentials],
        "solver": dataclasses.asdict(scenario.solver),
        "flow": dataclasses.asdict(scenario.flow),
    }
    if scenario.initial_state is not None:
        doc["initial_state"] = [[float(v) for v in b] for b in scenario.initial_state.blocks]
    return doc


def save_scenario(scenario: Scenario, path: str | Path) -> None:
    Path(path).write_text(json.dumps(serialize_scenario(scenario), indent=2) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# built-in scenarios
# ---------------------------------------------------------------------------


def _builtin_root():
    return importlib.resources.files("sheafcoord") / "scenarios"


def builtin_scenario_names() -> tuple[str, ...]:
    """Names of the scenarios shipped with the package, sorted."""
    return tuple(sorted(p.name[: -len(".json")] for p in _builtin_root().iterdir() if p.name.endswith(".json")))


def load_builtin_scenario(name: str) -> Scenario:
    """Load a shipped scenario by name (see :func:`builtin_scenario_names`)."""
    res = _builtin_root() / f"{name}.json"
    if not res.is_file():
        known = ", ".join(builtin_scenario_names())
        raise ScenarioError(f"no built-in scenario named {name!r} (known: {known})")
    try:
        doc = json.loads(res.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:  # pragma: no cover - shipped files are valid
        raise ScenarioError(f"built-in scenario {name}: invalid JSON: {exc.msg}") from exc
    return parse_scenario(doc, default_name=name)


# ---------------------------------------------------------------------------
# trace emission
# ---------------------------------------------------------------------------


def format_float(value: float) -> str:
    """Serialize a float with 17 significant digits (64-bit round-trip exact)."""
    return "%.17g" % float(value)


def write_trace_csv(path: str | Path, rows: Sequence[tuple[int, float, float, float]]) -> None:
    """Write an iteration trace: header plus one row per iteration."""
    lines = ["iter,primal_residual,dual_residual,objective"]
    for it, primal, dual, objective in rows:
        lines.append(f"{it},{format_float(primal)},{format_float(dual)},{format_float(objective)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _json_vector(vec: np.ndarray) -> str:
    return "[" + ", ".join(format_float(v) for v in vec) + "]"


def terminal_report(status: str, x: Cochain0, delta_x: Cochain1) -> str:
    """The terminal-state JSON document: {status, x, delta_x}."""
    x_part = ", ".join(_json_vector(b) for b in x.blocks)
    d_part = ", ".join(_json_vector(b) for b in delta_x.blocks)
    return '{"status": %s, "x": [%s], "delta_x": [%s]}' % (json.dumps(status), x_part, d_part)
