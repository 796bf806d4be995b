"""Scenario files: a single JSON document that pins down an entire run.

A scenario fixes the layered configuration (explicitly or as seeded random
boxes), the weight models, the update schedule, solver knobs, run limits,
and the attack script. Loading resolves every default and validates every
invariant, and the resolved echo written next to the run artifacts is
enough to reproduce the run byte for byte.

Schema (defaults in parentheses):

    {
      "seed": int (0),
      "layers": {
        "layer1": {
          "count": int,
          "positions": [[x, y, z], ...]
                     | {"box": {"x": [lo, hi], "y": [lo, hi], "z": v | [lo, hi]}},
          "min_squared_distance": float (0.4),
          "altitude_locked": bool (false)
        },
        "layer2": { ... }
      },
      "weights": {
        "layer1": {"rho1": ..., "rho2": ..., "alpha": ...},
        "layer2": { ... },
        "cross":  { ... }
      },
      "schedule": {"s1": 2, "s2": 2, "o1": 0, "o2": 1},
      "solver": {"trust_radius": null, "max_backtracks": 6,
                 "backtrack_tolerance": 1e-6, "safeguard": true},
      "limits": {"max_steps": 100, "conv_tolerance": 1e-4,
                 "pos_tolerance": 1e-4, "ne_tolerance": 1e-4},
      "attacks": [{"kind": "spoof" | "jam" | "dos",
                   "target": "auto" | int | [i, j],
                   "start_step": int, "duration": int | "end",
                   "scope": "global" | "layer1" | "layer2"}]
    }

Generated positions are drawn per robot, uniformly in the box, rejecting
draws closer than the layer's minimum distance to the robots already
placed; the draw order (layer 1 first) and the seed make this
deterministic. A generated initial network must be connected.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .attacks import AttackEvent, AttackKind, AttackScope, attack_impact, resolve_target
from .engine import (
    EquilibriumReport,
    GameLimits,
    GameSchedule,
    GameSettings,
    GameTrace,
    run_until_convergence,
    trace_to_json_dict,
    write_trace_csv,
)
from .errors import (
    ConnGameError,
    ScenarioParseError,
    ScenarioValidationError,
)
from .network import LayeredConfiguration, WeightModel, true_connectivity

MAX_PLACEMENT_ATTEMPTS = 10_000


@dataclass(frozen=True)
class Scenario:
    configuration: LayeredConfiguration
    schedule: GameSchedule
    settings: GameSettings
    limits: GameLimits
    attacks: tuple[AttackEvent, ...]
    seed: int
    echo: dict  # resolved document; reloading it reproduces this scenario


def _require(obj: dict, key: str, where: str):
    if key not in obj:
        raise ScenarioValidationError(f"{where}: missing required field '{key}'")
    return obj[key]


def _check_keys(obj: dict, allowed: set[str], where: str):
    unknown = set(obj) - allowed
    if unknown:
        raise ScenarioValidationError(f"{where}: unknown field(s) {sorted(unknown)}")


def _weight_model(obj: dict, where: str) -> WeightModel:
    _check_keys(obj, {"rho1", "rho2", "alpha"}, where)
    try:
        return WeightModel(
            rho1=float(_require(obj, "rho1", where)),
            rho2=float(_require(obj, "rho2", where)),
            decay_alpha=float(_require(obj, "alpha", where)),
        )
    except ConnGameError as e:
        raise ScenarioValidationError(f"{where}: {e}") from e


def _generate_positions(box: dict, count: int, dmin: float, rng, where: str) -> np.ndarray:
    _check_keys(box, {"x", "y", "z"}, where)
    spans = []
    for axis in ("x", "y", "z"):
        v = _require(box, axis, where)
        if isinstance(v, (int, float)):
            spans.append((float(v), float(v)))
        elif isinstance(v, (list, tuple)) and len(v) == 2 and v[0] <= v[1]:
            spans.append((float(v[0]), float(v[1])))
        else:
            raise ScenarioValidationError(f"{where}: axis '{axis}' must be a number or [lo, hi]")
    placed: list[np.ndarray] = []
    attempts = 0
    while len(placed) < count:
        if attempts >= MAX_PLACEMENT_ATTEMPTS:
            raise ScenarioValidationError(
                f"{where}: could not place {count} robots at min squared distance "
                f"{dmin} within the box after {MAX_PLACEMENT_ATTEMPTS} draws"
            )
        attempts += 1
        cand = np.array([rng.uniform(lo, hi) for (lo, hi) in spans])
        if all(float(np.sum((cand - p) ** 2)) >= dmin for p in placed):
            placed.append(cand)
    return np.array(placed)


def _layer_block(obj: dict, rng, where: str) -> tuple[np.ndarray, float, bool, bool]:
    """(positions, min squared distance, altitude_locked, was_generated)."""
    _check_keys(obj, {"count", "positions", "min_squared_distance", "altitude_locked"}, where)
    count = int(_require(obj, "count", where))
    if count < 1:
        raise ScenarioValidationError(f"{where}: count must be at least 1")
    dmin = float(obj.get("min_squared_distance", 0.4))
    if dmin <= 0:
        raise ScenarioValidationError(f"{where}: min_squared_distance must be positive")
    locked = bool(obj.get("altitude_locked", False))
    spec = _require(obj, "positions", where)
    if isinstance(spec, dict):
        _check_keys(spec, {"box"}, where + ".positions")
        box = _require(spec, "box", where + ".positions")
        if locked and isinstance(box.get("z"), (list, tuple)):
            raise ScenarioValidationError(
                f"{where}: altitude_locked requires a fixed z, not a range"
            )
        pos = _generate_positions(box, count, dmin, rng, where + ".positions.box")
        generated = True
    else:
        pos = np.asarray(spec, dtype=float)
        if pos.shape != (count, 3):
            raise ScenarioValidationError(
                f"{where}: positions must have shape ({count}, 3), got {pos.shape}"
            )
        generated = False
    return pos, dmin, locked, generated


def _attack_event(obj: dict, max_steps: int, where: str) -> AttackEvent:
    _check_keys(obj, {"kind", "target", "start_step", "duration", "scope"}, where)
    kind_s = str(_require(obj, "kind", where))
    try:
        kind = AttackKind(kind_s)
    except ValueError:
        raise ScenarioValidationError(f"{where}: unknown attack kind '{kind_s}'") from None
    scope_s = str(obj.get("scope", "global"))
    try:
        scope = AttackScope(scope_s)
    except ValueError:
        raise ScenarioValidationError(f"{where}: unknown scope '{scope_s}'") from None
    start = int(_require(obj, "start_step", where))
    dur_raw = _require(obj, "duration", where)
    if dur_raw == "end":
        duration = max(1, max_steps - start)
    else:
        duration = int(dur_raw)
    target_raw = obj.get("target", "auto")
    if target_raw == "auto" or target_raw is None:
        target = None
    elif isinstance(target_raw, (list, tuple)):
        target = (int(target_raw[0]), int(target_raw[1]))
    else:
        target = int(target_raw)
    try:
        return AttackEvent(kind=kind, target=target, start_step=start, duration=duration, scope=scope)
    except ConnGameError as e:
        raise ScenarioValidationError(f"{where}: {e}") from e


def scenario_from_dict(doc: dict) -> Scenario:
    if not isinstance(doc, dict):
        raise ScenarioValidationError("scenario document must be a JSON object")
    _check_keys(
        doc, {"seed", "layers", "weights", "schedule", "solver", "limits", "attacks"}, "scenario"
    )
    seed = int(doc.get("seed", 0))
    rng = np.random.default_rng(seed)

    layers = _require(doc, "layers", "scenario")
    _check_keys(layers, {"layer1", "layer2"}, "layers")
    p1, d1, lock1, gen1 = _layer_block(_require(layers, "layer1", "layers"), rng, "layers.layer1")
    p2, d2, lock2, gen2 = _layer_block(_require(layers, "layer2", "layers"), rng, "layers.layer2")

    weights = _require(doc, "weights", "scenario")
    _check_keys(weights, {"layer1", "layer2", "cross"}, "weights")
    m1 = _weight_model(_require(weights, "layer1", "weights"), "weights.layer1")
    m2 = _weight_model(_require(weights, "layer2", "weights"), "weights.layer2")
    mc = _weight_model(_require(weights, "cross", "weights"), "weights.cross")

    try:
        cfg = LayeredConfiguration(
            layer1_positions=p1,
            layer2_positions=p2,
            model_inter1=m1,
            model_inter2=m2,
            model_intra=mc,
            d1=d1,
            d2=d2,
        )
    except ConnGameError as e:
        raise ScenarioValidationError(f"configuration: {e}") from e
    violations = cfg.min_distance_violations()
    if violations:
        raise ScenarioValidationError(
            f"initial positions violate the minimum-distance invariant on pairs {violations}"
        )
    if (gen1 or gen2) and true_connectivity(cfg).lambda2 <= 1e-9:
        raise ScenarioValidationError(
            "generated initial network is disconnected; widen the boxes, move the "
            "layers closer, or pick another seed"
        )

    sched_obj = doc.get("schedule", {})
    _check_keys(sched_obj, {"s1", "s2", "o1", "o2"}, "schedule")
    try:
        schedule = GameSchedule(
            s1=int(sched_obj.get("s1", 2)),
            s2=int(sched_obj.get("s2", 2)),
            o1=int(sched_obj.get("o1", 0)),
            o2=int(sched_obj.get("o2", 1)),
        )
    except ConnGameError as e:
        raise ScenarioValidationError(f"schedule: {e}") from e

    solver_obj = doc.get("solver", {})
    _check_keys(
        solver_obj,
        {"trust_radius", "max_backtracks", "backtrack_tolerance", "safeguard"},
        "solver",
    )
    tr = solver_obj.get("trust_radius")
    settings = GameSettings(
        trust_radius=None if tr is None else float(tr),
        max_backtracks=int(solver_obj.get("max_backtracks", 6)),
        backtrack_tolerance=float(solver_obj.get("backtrack_tolerance", 1e-6)),
        safeguard=bool(solver_obj.get("safeguard", True)),
        lock_altitude=(lock1, lock2),
    )

    limits_obj = doc.get("limits", {})
    _check_keys(
        limits_obj, {"max_steps", "conv_tolerance", "pos_tolerance", "ne_tolerance"}, "limits"
    )
    limits = GameLimits(
        max_steps=int(limits_obj.get("max_steps", 100)),
        conv_tolerance=float(limits_obj.get("conv_tolerance", 1e-4)),
        pos_tolerance=float(limits_obj.get("pos_tolerance", 1e-4)),
        ne_tolerance=float(limits_obj.get("ne_tolerance", 1e-4)),
    )
    if limits.max_steps < 1:
        raise ScenarioValidationError("limits.max_steps must be at least 1")

    attacks = tuple(
        _attack_event(a, limits.max_steps, f"attacks[{k}]")
        for k, a in enumerate(doc.get("attacks", []))
    )

    echo = {
        "seed": seed,
        "layers": {
            "layer1": {
                "count": cfg.n1,
                "positions": [[float(v) for v in row] for row in p1],
                "min_squared_distance": d1,
                "altitude_locked": lock1,
            },
            "layer2": {
                "count": cfg.n2,
                "positions": [[float(v) for v in row] for row in p2],
                "min_squared_distance": d2,
                "altitude_locked": lock2,
            },
        },
        "weights": {
            "layer1": {"rho1": m1.rho1, "rho2": m1.rho2, "alpha": m1.decay_alpha},
            "layer2": {"rho1": m2.rho1, "rho2": m2.rho2, "alpha": m2.decay_alpha},
            "cross": {"rho1": mc.rho1, "rho2": mc.rho2, "alpha": mc.decay_alpha},
        },
        "schedule": {"s1": schedule.s1, "s2": schedule.s2, "o1": schedule.o1, "o2": schedule.o2},
        "solver": {
            "trust_radius": settings.trust_radius,
            "max_backtracks": settings.max_backtracks,
            "backtrack_tolerance": settings.backtrack_tolerance,
            "safeguard": settings.safeguard,
        },
        "limits": {
            "max_steps": limits.max_steps,
            "conv_tolerance": limits.conv_tolerance,
            "pos_tolerance": limits.pos_tolerance,
            "ne_tolerance": limits.ne_tolerance,
        },
        "attacks": [
            {
                "kind": e.kind.value,
                "target": "auto" if e.target is None else (list(e.target) if isinstance(e.target, tuple) else e.target),
                "start_step": e.start_step,
                "duration": e.duration,
                "scope": e.scope.value,
            }
            for e in attacks
        ],
    }
    return Scenario(
        configuration=cfg,
        schedule=schedule,
        settings=settings,
        limits=limits,
        attacks=attacks,
        seed=seed,
        echo=echo,
    )


def load_scenario(path: str) -> Scenario:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as e:
        raise ScenarioParseError(f"cannot read scenario file {path}: {e}") from e
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioParseError(
            f"{path}: invalid JSON at line {e.lineno} column {e.colno}: {e.msg}"
        ) from e
    return scenario_from_dict(doc)


# ---------------------------------------------------------------------------
# configuration snapshots (state files)

def configuration_to_json_dict(cfg: LayeredConfiguration) -> dict:
    return {
        "layer1_positions": [[float(v) for v in row] for row in cfg.layer1_positions],
        "layer2_positions": [[float(v) for v in row] for row in cfg.layer2_positions],
        "weights": {
            "layer1": {"rho1": cfg.model_inter1.rho1, "rho2": cfg.model_inter1.rho2, "alpha": cfg.model_inter1.decay_alpha},
            "layer2": {"rho1": cfg.model_inter2.rho1, "rho2": cfg.model_inter2.rho2, "alpha": cfg.model_inter2.decay_alpha},
            "cross": {"rho1": cfg.model_intra.rho1, "rho2": cfg.model_intra.rho2, "alpha": cfg.model_intra.decay_alpha},
        },
        "min_squared_distance": {"layer1": cfg.d1, "layer2": cfg.d2},
    }


def configuration_from_json_dict(obj: dict) -> LayeredConfiguration:
    try:
        w = obj["weights"]
        dmin = obj["min_squared_distance"]
        return LayeredConfiguration(
            layer1_positions=np.asarray(obj["layer1_positions"], dtype=float),
            layer2_positions=np.asarray(obj["layer2_positions"], dtype=float),
            model_inter1=_weight_model(w["layer1"], "weights.layer1"),
            model_inter2=_weight_model(w["layer2"], "weights.layer2"),
            model_intra=_weight_model(w["cross"], "weights.cross"),
            d1=float(dmin["layer1"]),
            d2=float(dmin["layer2"]),
        )
    except KeyError as e:
        raise ScenarioValidationError(f"state snapshot: missing field {e}") from e


def load_state(path: str) -> LayeredConfiguration:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as e:
        raise ScenarioParseError(f"cannot read state file {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ScenarioParseError(
            f"{path}: invalid JSON at line {e.lineno} column {e.colno}: {e.msg}"
        ) from e
    return configuration_from_json_dict(doc)


def save_state(path: str, cfg: LayeredConfiguration):
    with open(path, "w") as fh:
        json.dump(configuration_to_json_dict(cfg), fh, indent=2)
        fh.write("\n")


# ---------------------------------------------------------------------------
# bundled scenarios

def bundled_scenario_names() -> list[str]:
    pkg = resources.files("conngame") / "scenarios"
    return sorted(p.name[: -len(".json")] for p in pkg.iterdir() if p.name.endswith(".json"))


def bundled_scenario_path(name: str) -> str:
    pkg = resources.files("conngame") / "scenarios" / f"{name}.json"
    if not pkg.is_file():
        raise ScenarioParseError(
            f"no bundled scenario '{name}'; available: {', '.join(bundled_scenario_names())}"
        )
    return str(pkg)


# ---------------------------------------------------------------------------
# running a scenario end to end

@dataclass(frozen=True)
class RunArtifacts:
    out_dir: str
    trace_csv: str
    trace_json: str
    equilibrium_json: str
    scenario_echo: str
    final_state: str
    attack_reports: str | None
    trace: GameTrace
    report: EquilibriumReport


def _attack_onset_reports(scenario: Scenario, trace: GameTrace) -> list[dict]:
    """Per-event report: the resolved target and its exact impact, measured
    on the state the attack actually hit (reconstructed from the trace)."""
    cfg0 = scenario.configuration
    out = []
    for e in scenario.attacks:
        start = e.start_step
        if start >= len(trace.rows):
            out.append({"kind": e.kind.value, "start_step": start, "note": "never started"})
            continue
        pre = cfg0 if start == 0 else cfg0.with_positions(trace.rows[start - 1].positions)
        target = e.target if e.target is not None else resolve_target(pre, e.kind, e.scope)
        impact = attack_impact(pre, AttackEvent(e.kind, target, e.start_step, e.duration, e.scope))
        out.append(
            {
                "kind": e.kind.value,
                "scope": e.scope.value,
                "start_step": e.start_step,
                "duration": e.duration,
                "target": list(target) if isinstance(target, tuple) else target,
                "lambda2_before": impact.lambda2_before,
                "lambda2_after": impact.lambda2_after,
                "drop": impact.drop,
                "largest_component_lambda2": impact.largest_component_lambda2,
            }
        )
    return out


def run_scenario(scenario: Scenario, out_dir: str) -> RunArtifacts:
    os.makedirs(out_dir, exist_ok=True)
    echo_path = os.path.join(out_dir, "scenario_echo.json")
    with open(echo_path, "w") as fh:
        json.dump(scenario.echo, fh, indent=2)
        fh.write("\n")

    trace, report = run_until_convergence(
        scenario.configuration,
        scenario.schedule,
        list(scenario.attacks),
        scenario.limits,
        scenario.settings,
    )

    csv_path = os.path.join(out_dir, "trace.csv")
    write_trace_csv(trace, csv_path)

    doc = trace_to_json_dict(trace, report)
    doc["initial_positions"] = [[float(v) for v in row] for row in scenario.configuration.positions]
    doc["attack_events"] = [
        {
            "kind": e.kind.value,
            "target": "auto" if e.target is None else (list(e.target) if isinstance(e.target, tuple) else e.target),
            "start_step": e.start_step,
            "duration": e.duration,
            "scope": e.scope.value,
        }
        for e in scenario.attacks
    ]
    json_path = os.path.join(out_dir, "trace.json")
    with open(json_path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")

    eq_path = os.path.join(out_dir, "equilibrium.json")
    with open(eq_path, "w") as fh:
        from .engine import report_to_json_dict

        json.dump(report_to_json_dict(report), fh, indent=2)
        fh.write("\n")

    final_cfg = scenario.configuration.with_positions(trace.rows[-1].positions)
    state_path = os.path.join(out_dir, "final_state.json")
    save_state(state_path, final_cfg)

    attacks_path = None
    if scenario.attacks:
        attacks_path = os.path.join(out_dir, "attack_reports.json")
        with open(attacks_path, "w") as fh:
            json.dump(_attack_onset_reports(scenario, trace), fh, indent=2)
            fh.write("\n")

    return RunArtifacts(
        out_dir=out_dir,
        trace_csv=csv_path,
        trace_json=json_path,
        equilibrium_json=eq_path,
        scenario_echo=echo_path,
        final_state=state_path,
        attack_reports=attacks_path,
        trace=trace,
        report=report,
    )
