"""Shared fixtures: deterministic random-instance factories and the heavy
bundled-scenario runs that several end-to-end tests inspect together."""

import time
from dataclasses import dataclass, replace

import numpy as np
import pytest

from conngame import (
    GameTrace,
    LayeredConfiguration,
    RunArtifacts,
    Scenario,
    WeightedGraph,
    WeightModel,
    bundled_scenario_path,
    load_scenario,
    run_scenario,
)


class SolveLog:
    """Passive solve monitor: collects (spec, outcome) for every solve."""

    def __init__(self):
        self.records = []

    def __call__(self, spec, program, outcome):
        self.records.append((spec, outcome))


@pytest.fixture
def graph_factory():
    """Connected random weighted graph: spanning tree plus extra edges,
    weights uniform in [0, 1]."""

    def make(rng, max_nodes=12, extra_edge_prob=0.35):
        n = int(rng.integers(3, max_nodes + 1))
        edges = {}
        for i in range(1, n):
            j = int(rng.integers(0, i))
            edges[(j, i)] = float(rng.uniform(0.0, 1.0))
        for i in range(n):
            for j in range(i + 1, n):
                if (i, j) not in edges and rng.uniform() < extra_edge_prob:
                    edges[(i, j)] = float(rng.uniform(0.0, 1.0))
        return WeightedGraph(
            node_count=n,
            edges=tuple((i, j, w) for (i, j), w in sorted(edges.items())),
        )

    return make


def _place(rng, count, box, dmin):
    pts = []
    while len(pts) < count:
        cand = np.array([rng.uniform(lo, hi) for (lo, hi) in box])
        if all(float(np.sum((cand - p) ** 2)) >= dmin for p in pts):
            pts.append(cand)
    return np.array(pts)


@pytest.fixture
def config_factory():
    """Random valid two-layer configuration (floors respected by rejection)."""

    def make(rng, n1=None, n2=None):
        n1 = int(rng.integers(2, 4)) if n1 is None else n1
        n2 = int(rng.integers(2, 4)) if n2 is None else n2
        box1 = [(-1.5, 1.5), (-1.5, 1.5), (1.0, 1.0)]
        box2 = [(-1.5, 1.5), (-1.5, 1.5), (0.0, 0.0)]
        return LayeredConfiguration(
            layer1_positions=_place(rng, n1, box1, 0.4),
            layer2_positions=_place(rng, n2, box2, 0.4),
            model_inter1=WeightModel(1.0, 3.0, 5.0),
            model_inter2=WeightModel(1.0, 3.0, 5.0),
            model_intra=WeightModel(1.5, 5.0, 4.0),
            d1=0.4,
            d2=0.4,
        )

    return make


@pytest.fixture
def square_config():
    # two robots per layer on a 2 x 2 square, layers at different altitudes
    m = WeightModel(1.0, 3.0, 5.0)
    return LayeredConfiguration(
        layer1_positions=np.array([[0.0, 0.0, 1.0], [2.0, 0.0, 1.0]]),
        layer2_positions=np.array([[0.0, 2.0, 0.0], [2.0, 2.0, 0.0]]),
        model_inter1=m,
        model_inter2=m,
        model_intra=WeightModel(1.5, 5.0, 4.0),
        d1=0.4,
        d2=0.4,
    )


# ---------------------------------------------------------------------------
# bundled scenario runs, shared session-wide (each takes seconds to minutes)

@dataclass
class ScenarioRun:
    scenario: Scenario
    artifacts: RunArtifacts
    log: SolveLog
    elapsed: float

    @property
    def trace(self) -> GameTrace:
        return self.artifacts.trace


def _run_bundled(name: str, out_dir) -> ScenarioRun:
    scenario = load_scenario(bundled_scenario_path(name))
    log = SolveLog()
    monitored = replace(scenario, settings=replace(scenario.settings, solve_monitor=log))
    t0 = time.perf_counter()
    artifacts = run_scenario(monitored, str(out_dir))
    return ScenarioRun(scenario, artifacts, log, time.perf_counter() - t0)


@pytest.fixture(scope="session")
def baseline_run(tmp_path_factory):
    return _run_bundled("baseline_6x6", tmp_path_factory.mktemp("baseline"))


@pytest.fixture(scope="session")
def baseline_rerun(tmp_path_factory):
    return _run_bundled("baseline_6x6", tmp_path_factory.mktemp("baseline_again"))


@pytest.fixture(scope="session")
def jam_run(tmp_path_factory):
    return _run_bundled("jam_persistent", tmp_path_factory.mktemp("jam"))


@pytest.fixture(scope="session")
def dos_run(tmp_path_factory):
    return _run_bundled("dos_persistent", tmp_path_factory.mktemp("dos"))
