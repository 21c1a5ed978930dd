"""Shared helpers: fixture paths, reference activations, tiny random networks.

The reference activation implementations here are written against the math
module on purpose, independent of the package's vectorised versions, so the
tests can act as an oracle for them.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
import pytest

from tilin import Activation, Affine, MaxPool, Network

FIXTURES = Path(__file__).parent / "fixtures"

# filled by test_acceptance.py, printed as a summary block after the run
ACCEPTANCE_RESULTS: list[tuple[int, bool, str]] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num, ok, detail in sorted(ACCEPTANCE_RESULTS):
        tag = "PASS" if ok else "FAIL"
        suffix = f" ({detail})" if detail else ""
        terminalreporter.write_line(f"criterion {num}: {tag}{suffix}")


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


# --- reference activation math (independent of tilin.relaxation) ------------


def ref_value(kind: str, x: float) -> float:
    if kind == "relu":
        return max(x, 0.0)
    if kind == "sigmoid":
        if x >= 0:
            return 1.0 / (1.0 + math.exp(-x))
        e = math.exp(x)
        return e / (1.0 + e)
    if kind == "tanh":
        return math.tanh(x)
    if kind == "arctan":
        return math.atan(x)
    raise ValueError(kind)


def ref_slope(kind: str, x: float) -> float:
    if kind == "relu":
        return 1.0 if x > 0 else 0.0
    if kind == "sigmoid":
        s = ref_value("sigmoid", x)
        return s * (1.0 - s)
    if kind == "tanh":
        t = math.tanh(x)
        return 1.0 - t * t
    if kind == "arctan":
        return 1.0 / (1.0 + x * x)
    raise ValueError(kind)


def ref_values(kind: str, xs: np.ndarray) -> np.ndarray:
    return np.array([ref_value(kind, float(x)) for x in xs])


def assert_lines_sound(kind: str, rel, tol: float = 1e-9, grid: int = 1001) -> None:
    """Grid check: lower(x) <= f(x) <= upper(x) on [l, u] within tol."""
    xs = np.linspace(rel.l, rel.u, grid)
    fx = ref_values(kind, xs)
    lo = rel.lower.a * xs + rel.lower.b
    hi = rel.upper.a * xs + rel.upper.b
    worst_lo = float((lo - fx).max())
    worst_hi = float((fx - hi).max())
    assert worst_lo <= tol, f"{kind} [{rel.l},{rel.u}] m={rel.m}: lower exceeds f by {worst_lo}"
    assert worst_hi <= tol, f"{kind} [{rel.l},{rel.u}] m={rel.m}: upper undercuts f by {worst_hi}"


# --- tiny random network zoo -------------------------------------------------


def tiny_network(
    rng: np.random.Generator,
    kind: str,
    depth: int = 1,
    width: int = 4,
    in_dim: int = 3,
    classes: int = 2,
    with_pool: bool = False,
    scale: float = 0.7,
) -> Network:
    """Random feed-forward net: `depth` hidden activation blocks, widths <= 8."""
    layers: list = []
    prev = in_dim
    for _ in range(depth):
        layers.append(
            Affine(rng.normal(0, scale, (width, prev)), rng.normal(0, 0.3, width))
        )
        layers.append(Activation(kind))
        prev = width
    if with_pool:
        if prev % 2:
            raise ValueError("pooling variant needs an even width")
        wins = tuple(tuple(range(i, i + 2)) for i in range(0, prev, 2))
        layers.append(MaxPool(wins))
        prev = len(wins)
    layers.append(Affine(rng.normal(0, scale, (classes, prev)), rng.normal(0, 0.3, classes)))
    return Network(in_dim, tuple(layers))
