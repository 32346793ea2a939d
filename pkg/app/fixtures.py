"""
Bundled example graphs with their expected phase structure.

Vertex orders follow the adjacency matrices below; expected averaging traces are the
ones satisfying G^T tau = e^beta tau for these matrices.
"""
import json
import logging
import math
from pathlib import Path as FilePath
from typing import Any, Dict, List

from app.models import Algebra, MultiGraph, Trace
from app.services.graph_service import graph_service
from app.services.spectral_service import parse_beta, spectral_service
from app.services.state_service import state_service
from app.workflows.analysis_workflow import analysis_workflow

logger = logging.getLogger(__name__)

LOG2, LOG3 = math.log(2), math.log(3)
GAMMA = 1 + math.sqrt(5)
LOG_GAMMA = f"log:{GAMMA!r}"
ROOT5 = math.sqrt(5)

FIXTURES: Dict[str, Dict[str, Any]] = {
    "ex8_1": {
        "description": "two loops at v and one exit to a sink w",
        "vertices": ["v", "w"],
        "matrix": [[2, 1], [0, 0]],
        "expected": {
            "h_min": 0.0,
            "h_strong": LOG2,
            "transitions": [0.0, LOG2],
            "allowed": [["w"], ["v", "w"]],
            "sources": [],
            "avt": {"log:2": [{"v": 2 / 3, "w": 1 / 3}]},
            "simplices": [
                ["log:2", "toeplitz", ["w"], 1],
                ["log:3", "toeplitz", ["v", "w"], 0],
                ["log:2", "cuntz_pimsner", [], 1],
            ],
        },
    },
    "ex8_2": {
        "description": "three-vertex chain ending in a 2-loop sink",
        "vertices": ["v1", "v2", "v3"],
        "matrix": [[1, 1, 0], [0, 1, 1], [0, 0, 2]],
        "expected": {
            "h_min": LOG2,
            "h_strong": LOG2,
            "transitions": [LOG2],
            "allowed": [[], ["v1", "v2", "v3"]],
            "sources": [],
            "avt": {"log:2": [{"v3": 1.0}]},
            "simplices": [
                ["log:2", "toeplitz", [], 1],
                ["log:3", "toeplitz", ["v1", "v2", "v3"], 0],
            ],
        },
    },
    "ex8_3": {
        "description": "inductive limit graph: a 1-loop sink v2 beside a 3-loop sink v3",
        "vertices": ["v1", "v2", "v3"],
        "matrix": [[2, 1, 1], [0, 1, 0], [0, 0, 3]],
        "expected": {
            "h_min": 0.0,
            "h_strong": LOG3,
            "transitions": [0.0, LOG3],
            "allowed": [["v2"], ["v1", "v2", "v3"]],
            "sources": [],
            "avt": {"log:3": [{"v3": 1.0}], "log:2": []},
            "simplices": [
                ["log:2", "toeplitz", ["v2"], 0],
                ["log:3", "toeplitz", ["v2"], 1],
            ],
            "c": [["v2", "log:2", 2.0]],
        },
    },
    "ex8_4": {
        "description": "collection graph with a = (2, 3)",
        "vertices": ["v2", "v1", "v0"],
        "matrix": [[3, 0, 1], [0, 2, 1], [0, 0, 1]],
        "expected": {
            "h_min": 0.0,
            "h_strong": LOG3,
            "transitions": [0.0, LOG2, LOG3],
            "allowed": [["v0"], ["v1", "v0"], ["v2", "v1", "v0"]],
            "sources": [],
            "avt": {
                "log:2": [{"v1": 0.5, "v0": 0.5}],
                "log:3": [{"v2": 2 / 3, "v0": 1 / 3}],
            },
            "simplices": [
                ["0.1", "toeplitz", ["v0"], 0],
                ["0.5", "toeplitz", ["v0"], 0],
                ["2", "toeplitz", ["v2", "v1", "v0"], 0],
                ["5", "toeplitz", ["v2", "v1", "v0"], 0],
            ],
            "c": [["v0", "log:2", 2.0]],
        },
    },
    "ex8_5": {
        "description": "collection graph with an added source w feeding v0",
        "vertices": ["v2", "v1", "v0", "w"],
        "matrix": [[3, 0, 1, 0], [0, 2, 1, 0], [0, 0, 1, 0], [0, 0, 1, 0]],
        "expected": {
            "h_min": 0.0,
            "h_strong": LOG3,
            "transitions": [0.0, LOG2, LOG3],
            "allowed": [["v0", "w"], ["v1", "v0", "w"], ["v2", "v1", "v0", "w"]],
            "sources": ["w"],
            "avt": {
                "log:2": [{"v1": 0.5, "v0": 0.5}],
                "log:3": [{"v2": 2 / 3, "v0": 1 / 3}],
            },
            "simplices": [
                ["0.5", "cuntz_pimsner", ["w"], 0],
                ["log:2", "cuntz_pimsner", ["w"], 1],
                ["2", "cuntz_pimsner", ["w"], 0],
            ],
        },
    },
    "ex6_1": {
        "description": "2-loop w feeding a 3-loop sink v",
        "vertices": ["w", "v"],
        "matrix": [[2, 1], [0, 3]],
        "expected": {
            "h_min": LOG3,
            "h_strong": LOG3,
            "transitions": [LOG3],
            "allowed": [[], ["w", "v"]],
            "sources": [],
            "avt": {"log:3": [{"v": 1.0}]},
            "simplices": [
                ["log:4", "toeplitz", ["w", "v"], 0],
                ["log:3", "toeplitz", [], 1],
                ["1.0", "toeplitz", [], 0],
            ],
        },
    },
    "ex6_2": {
        "description": "3-loop w feeding a 2-loop sink v",
        "vertices": ["w", "v"],
        "matrix": [[3, 1], [0, 2]],
        "expected": {
            "h_min": LOG2,
            "h_strong": LOG3,
            "transitions": [LOG2, LOG3],
            "allowed": [[], ["v"], ["w", "v"]],
            "sources": [],
            "avt": {"log:3": [{"w": 0.5, "v": 0.5}], "log:2": [{"v": 1.0}]},
            "simplices": [
                ["log:3", "toeplitz", ["v"], 1],
                ["log:2", "toeplitz", [], 1],
                ["1.0", "toeplitz", ["v"], 0],
            ],
        },
    },
    "ex6_3": {
        "description": "irreducible pair {u, w} with radius 1 + sqrt 5 feeding a 2-loop sink v",
        "vertices": ["u", "w", "v"],
        "matrix": [[2, 2, 0], [2, 0, 1], [0, 0, 2]],
        "expected": {
            "h_min": LOG2,
            "h_strong": math.log(GAMMA),
            "transitions": [LOG2, math.log(GAMMA)],
            "allowed": [[], ["v"], ["u", "w", "v"]],
            "sources": [],
            "avt": {
                LOG_GAMMA: [{"u": 2 * (ROOT5 - 2), "w": 7 - 3 * ROOT5, "v": ROOT5 - 2}],
                "log:2": [{"v": 1.0}],
            },
            "simplices": [[LOG_GAMMA, "toeplitz", ["v"], 1]],
        },
    },
    "ex6_4": {
        "description": "3-loop w, zero vertices u2 and u1 (a source), 2-loop sink v",
        "vertices": ["w", "u2", "u1", "v"],
        "matrix": [[3, 1, 0, 0], [0, 0, 0, 1], [0, 0, 0, 1], [0, 0, 0, 2]],
        "expected": {
            "h_min": LOG2,
            "h_strong": LOG3,
            "transitions": [LOG2, LOG3],
            "allowed": [[], ["u2", "u1", "v"], ["w", "u2", "u1", "v"]],
            "sources": ["u1"],
            "avt": {
                "log:3": [{"w": 0.6, "u2": 0.2, "v": 0.2}],
                "log:2": [{"v": 1.0}],
            },
            "simplices": [
                ["1.0", "cuntz_pimsner", ["u1"], 0],
                ["log:3", "cuntz_pimsner", ["u1"], 1],
                ["log:2", "cuntz_pimsner", [], 1],
                ["log:3", "toeplitz", ["u2", "u1", "v"], 1],
            ],
        },
    },
    "ex6_5": {
        "description": "3-loop w through u2 into a 2-loop v ending in a zero sink u1",
        "vertices": ["w", "u2", "v", "u1"],
        "matrix": [[3, 1, 0, 0], [0, 0, 1, 0], [0, 0, 2, 1], [0, 0, 0, 0]],
        "expected": {
            "h_min": 0.0,
            "h_strong": LOG3,
            "transitions": [0.0, LOG2, LOG3],
            "allowed": [["u1"], ["u2", "v", "u1"], ["w", "u2", "v", "u1"]],
            "sources": [],
            "avt": {
                "log:3": [{"w": 9 / 16, "u2": 3 / 16, "v": 3 / 16, "u1": 1 / 16}],
                "log:2": [{"v": 2 / 3, "u1": 1 / 3}],
            },
            "simplices": [
                ["log:3", "toeplitz", ["u2", "v", "u1"], 1],
                ["log:2", "toeplitz", ["u1"], 1],
                ["0.5", "toeplitz", ["u1"], 0],
            ],
        },
    },
    "ex6_6": {
        "description": "ex6_5 with an extra source u3 feeding the zero sink u1",
        "vertices": ["w", "u2", "v", "u1", "u3"],
        "matrix": [
            [3, 1, 0, 0, 0],
            [0, 0, 1, 0, 0],
            [0, 0, 2, 1, 0],
            [0, 0, 0, 0, 0],
            [0, 0, 0, 1, 0],
        ],
        "expected": {
            "h_min": 0.0,
            "h_strong": LOG3,
            "transitions": [0.0, LOG2, LOG3],
            "allowed": [["u1", "u3"], ["u2", "v", "u1", "u3"], ["w", "u2", "v", "u1", "u3"]],
            "sources": ["u3"],
            "avt": {
                "log:3": [{"w": 9 / 16, "u2": 3 / 16, "v": 3 / 16, "u1": 1 / 16}],
                "log:2": [{"v": 2 / 3, "u1": 1 / 3}],
            },
            "simplices": [
                ["0.5", "cuntz_pimsner", ["u3"], 0],
                ["log:2", "cuntz_pimsner", ["u3"], 1],
                ["log:3", "cuntz_pimsner", ["u3"], 1],
                ["2", "cuntz_pimsner", ["u3"], 0],
            ],
        },
    },
    "ex6_7": {
        "description": "three 2-maximal components over a 1-loop sink u",
        "vertices": ["x", "v", "w", "u"],
        "matrix": [[2, 1, 1, 0], [0, 2, 0, 1], [0, 0, 2, 1], [0, 0, 0, 1]],
        "expected": {
            "h_min": 0.0,
            "h_strong": LOG2,
            "transitions": [0.0, LOG2],
            "allowed": [["u"], ["x", "v", "w", "u"]],
            "sources": [],
            "avt": {"log:2": [{"v": 0.5, "u": 0.5}, {"w": 0.5, "u": 0.5}]},
            "simplices": [
                ["log:2", "oa", [], 2],
                ["log:2", "toeplitz", ["u"], 2],
            ],
        },
    },
}

TOLERANCE = 1e-8


def fixture_names() -> List[str]:
    return list(FIXTURES)


def fixture_document(name: str) -> Dict[str, Any]:
    fixture = FIXTURES[name]
    return {"vertices": fixture["vertices"], "matrix": fixture["matrix"]}


def fixture_graph(name: str) -> MultiGraph:
    return graph_service.parse_graph(json.dumps(fixture_document(name)))


def _close(a: float, b: float) -> bool:
    return abs(a - b) <= TOLERANCE


def check_fixture(name: str) -> List[str]:
    """Re-run the analysis on a fixture; returns the mismatches (empty when it passes)"""
    expected = FIXTURES[name]["expected"]
    g = fixture_graph(name)
    labels = g.vertex_labels
    problems: List[str] = []

    betas = sorted({parse_beta(row[0]) for row in expected["simplices"]})
    algebras = [Algebra(a) for a in sorted({row[1] for row in expected["simplices"]})]
    report = analysis_workflow.invoke(g, betas=betas, algebras=algebras)

    if not _close(report.entropy.h_min, expected["h_min"]):
        problems.append(f"h_min {report.entropy.h_min!r} != {expected['h_min']!r}")
    if not _close(report.entropy.h_strong, expected["h_strong"]):
        problems.append(f"h_strong {report.entropy.h_strong!r} != {expected['h_strong']!r}")

    transitions = [t.beta for t in report.phase.transitions]
    if len(transitions) != len(expected["transitions"]) or not all(
        _close(a, b) for a, b in zip(transitions, expected["transitions"])
    ):
        problems.append(f"transitions {transitions} != {expected['transitions']}")
    allowed = [list(i.allowed) for i in report.phase.intervals]
    if allowed != expected["allowed"]:
        problems.append(f"allowed sets {allowed} != {expected['allowed']}")
    if report.graph["sources"] != expected["sources"]:
        problems.append(f"sources {report.graph['sources']} != {expected['sources']}")

    for beta_text, traces in expected["avt"].items():
        points = spectral_service.avt_extreme_points(g, parse_beta(beta_text)).extreme_points
        wanted = [[t.get(label, 0.0) for label in labels] for t in traces]
        found = [list(p.weights) for p in points]
        if len(found) != len(wanted) or not all(
            _close(a, b) for f, w in zip(found, wanted) for a, b in zip(f, w)
        ):
            problems.append(f"averaging traces at {beta_text}: {found} != {wanted}")

    simplices = {(round(s.beta, 12), s.algebra): s for s in report.simplices}
    for beta_text, algebra, finite, infinite in expected["simplices"]:
        simplex = simplices[(round(parse_beta(beta_text), 12), Algebra(algebra))]
        got_finite = [e.vertex for e in simplex.finite_extremes]
        if got_finite != finite or len(simplex.infinite_extremes) != infinite:
            problems.append(
                f"{algebra} simplex at {beta_text}: finite {got_finite}, "
                f"{len(simplex.infinite_extremes)} infinite != {finite}, {infinite}"
            )

    for vertex, beta_text, value in expected.get("c", []):
        c = state_service.c_series(g, Trace.dirac(g.n, g.index_of(vertex)), parse_beta(beta_text)).value
        if not _close(c, value):
            problems.append(f"c at {vertex}, {beta_text}: {c!r} != {value!r}")

    if problems:
        logger.info("fixture %s: %d mismatches", name, len(problems))
    return problems


def write_fixtures(directory: str) -> List[str]:
    """Write <name>.json graphs and <name>.expected.json files; returns the written paths"""
    target = FilePath(directory)
    target.mkdir(parents=True, exist_ok=True)
    written = []
    for name, fixture in FIXTURES.items():
        graph_path = target / f"{name}.json"
        graph_path.write_text(json.dumps(fixture_document(name), indent=2) + "\n")
        expected_path = target / f"{name}.expected.json"
        expected_path.write_text(
            json.dumps({"description": fixture["description"], **fixture["expected"]}, indent=2) + "\n"
        )
        written.extend([str(graph_path), str(expected_path)])
    return written
