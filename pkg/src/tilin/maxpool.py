"""Linear relaxation of max-pooling windows over a box.

For a window y = max(x_1..x_n) with x_i in [l_i, u_i], the upper bound is a
single plane picked by sorting all interval endpoints in descending order
(uppers before lowers on ties, then lower neuron index) and looking at the
first three entries:

* the top neuron's own lower endpoint comes second: that neuron dominates the
  whole box and the exact plane is y = x_i;
* the lower endpoint of one of the top-two-upper neurons comes third: that
  neuron anchors the plane with slope 1 and the other gets a fractional slope;
* the upper endpoint of a third neuron comes third: both top neurons get
  fractional slopes pivoting on that value.

The plane is stored in plain affine form (coefficients over the window plus
an intercept). Every candidate is gated by an exact vertex soundness check;
if no candidate passes (not expected in practice), the constant plane at
max(u) is the final fallback. The lower bound is the single coordinate with
the largest interval midpoint.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

VERTEX_LIMIT = 20
VERTEX_TOL = 1e-9
_VERTEX_CHUNK = 1 << 16


class EndpointTag(NamedTuple):
    """One interval endpoint: its value, which side it is, and its neuron."""

    value: float
    is_upper: bool
    neuron: int


@dataclass(frozen=True)
class PoolRelaxation:
    """One window's upper plane, lower selector, and the case that built it.

    ``case`` is 1, 2, or 3 per the ordering rules above (0 for the constant
    fallback); ``touch`` lists the neurons whose diagonal corners the plane
    meets exactly, which the tests use to probe tightness.
    """

    upper_coeffs: np.ndarray
    upper_intercept: float
    lower_index: int
    case: int
    touch: tuple[int, ...]


def endpoint_ordering(l: np.ndarray, u: np.ndarray) -> list[EndpointTag]:
    """All 2n endpoints sorted descending; ties put uppers first, then by index."""
    tags = [EndpointTag(float(u[i]), True, i) for i in range(len(u))]
    tags += [EndpointTag(float(l[i]), False, i) for i in range(len(l))]
    return sorted(tags, key=lambda t: (-t.value, 0 if t.is_upper else 1, t.neuron))


def verify_plane_sound(coeffs: np.ndarray, intercept: float, l, u, tol: float = VERTEX_TOL) -> bool:
    """Exact soundness check: plane >= max(x) on every box vertex.

    max(x) - plane(x) is convex, so its maximum over the box sits on a
    vertex; checking all 2^n vertices is therefore exact (n <= 20).
    """
    l = np.asarray(l, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    coeffs = np.asarray(coeffs, dtype=np.float64)
    n = l.size
    if n > VERTEX_LIMIT:
        raise ValueError(f"vertex check supports windows up to {VERTEX_LIMIT}, got {n}")
    total = 1 << n
    bit = 1 << np.arange(n, dtype=np.int64)
    for start in range(0, total, _VERTEX_CHUNK):
        ids = np.arange(start, min(start + _VERTEX_CHUNK, total), dtype=np.int64)
        mask = (ids[:, None] & bit) != 0
        verts = np.where(mask, u, l)
        planes = verts @ coeffs + intercept
        if np.any(planes < verts.max(axis=1) - tol):
            return False
    return True


def _normalize(slopes: np.ndarray, anchor_value: float, l: np.ndarray) -> tuple[np.ndarray, float]:
    # corner-anchored form sum a_i (x_i - l_i) + b  ->  plain affine coeffs + intercept
    return slopes, float(anchor_value - slopes @ l)


def _safe_slope(num: float, den: float) -> float:
    # den == 0 only with num == 0 under the endpoint ordering (pinned coordinate)
    if den <= 0.0:
        return 0.0
    return min(max(num / den, 0.0), 1.0)


def _candidate_plane(
    i: int, j: int, e: EndpointTag, l: np.ndarray, u: np.ndarray
) -> tuple[np.ndarray, float, int, tuple[int, ...]]:
    """Plane for top-two-upper neurons (i, j) pivoting on endpoint e."""
    slopes = np.zeros(l.size)
    if not e.is_upper and e.neuron in (i, j):
        anchor = e.neuron
        other = j if anchor == i else i
        slopes[anchor] = 1.0
        slopes[other] = _safe_slope(u[other] - l[anchor], u[other] - l[other])
        coeffs, intercept = _normalize(slopes, l[anchor], l)
        return coeffs, intercept, 2, (anchor, other)
    pivot = e.value
    slopes[i] = _safe_slope(u[i] - pivot, u[i] - l[i])
    slopes[j] = _safe_slope(u[j] - pivot, u[j] - l[j])
    coeffs, intercept = _normalize(slopes, pivot, l)
    return coeffs, intercept, 3, (i, j, e.neuron)


def maxpool_upper(l, u) -> tuple[np.ndarray, float, int, tuple[int, ...]]:
    """Upper plane for max over the box: (coeffs, intercept, case, touch)."""
    l = np.asarray(l, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    if l.size == 0:
        raise ValueError("empty pooling window")
    if np.any(u < l):
        raise ValueError("window has an empty interval")
    q = endpoint_ordering(l, u)
    if q[1].neuron == q[0].neuron:
        # the top neuron's l beats every other u: max(x) is exactly x_i
        coeffs = np.zeros(l.size)
        coeffs[q[0].neuron] = 1.0
        return coeffs, 0.0, 1, (q[0].neuron,)
    i, j = q[0].neuron, q[1].neuron
    for e in q[2:]:
        coeffs, intercept, case, touch = _candidate_plane(i, j, e, l, u)
        if verify_plane_sound(coeffs, intercept, l, u):
            return coeffs, intercept, case, touch
    # unreachable for well-ordered endpoints; constant plane is always sound
    return np.zeros(l.size), float(u.max()), 0, ()


def maxpool_lower(l, u) -> int:
    """Index of the window coordinate with the largest midpoint (ties: lowest)."""
    l = np.asarray(l, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    if l.size == 0:
        raise ValueError("empty pooling window")
    return int(np.argmax(0.5 * (l + u)))


def relax_pool(l, u) -> PoolRelaxation:
    """Full relaxation of one pooling window over the box [l, u]."""
    coeffs, intercept, case, touch = maxpool_upper(l, u)
    return PoolRelaxation(
        upper_coeffs=coeffs,
        upper_intercept=intercept,
        lower_index=maxpool_lower(l, u),
        case=case,
        touch=touch,
    )
