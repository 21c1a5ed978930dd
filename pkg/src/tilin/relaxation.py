"""Scalar linear relaxations of the supported activations on an interval.

For each neuron with pre-activation range [l, u] we pick two lines that
sandwich the activation on that interval. S-shaped activations (sigmoid,
tanh, arctan) are convex below 0 and concave above it, so the sound choices
are chords, tangents at an interior anchor m, or tangents drawn from one
endpoint whose touch point is found by bisection. ReLU uses the standard
chord upper bound and a 0/identity lower bound chosen by the anchor's sign.

Branch predicates are evaluated in a fixed order with fixed strictness so
that ties resolve deterministically.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .model import ACTIVATION_KINDS

NEAR_LINEAR_WIDTH = 1e-9
TANGENT_RESIDUAL_TOL = 1e-10
TANGENT_MAX_ITERS = 200


class NoTangentPointError(ValueError):
    """Raised when an endpoint tangent is requested but none exists."""


class AnchorPolicy(enum.Enum):
    """How the interior anchor m of a relaxation is chosen."""

    FORWARD_VALUE = "forward"  # pre-activation at the unperturbed input, clamped to [l, u]
    MIDPOINT = "midpoint"  # (l + u) / 2

    @classmethod
    def parse(cls, name: str) -> "AnchorPolicy":
        for policy in cls:
            if policy.value == name:
                return policy
        raise ValueError(f"unknown anchor policy {name!r}, expected 'forward' or 'midpoint'")


@dataclass(frozen=True)
class ScalarLine:
    """y = a * x + b."""

    a: float
    b: float

    def __call__(self, x):
        return self.a * np.asarray(x, dtype=np.float64) + self.b


@dataclass(frozen=True)
class ScalarRelaxation:
    """Lower and upper lines sandwiching one activation on [l, u]."""

    kind: str
    l: float
    u: float
    m: float
    lower: ScalarLine
    upper: ScalarLine


# ---------------------------------------------------------------------------
# scalar activation values and slopes (math-module fast paths; the bisection
# loop calls these thousands of times per certification)


def _value(kind: str, x: float) -> float:
    if kind == "sigmoid":
        if x >= 0.0:
            return 1.0 / (1.0 + math.exp(-x))
        e = math.exp(x)
        return e / (1.0 + e)
    if kind == "tanh":
        return math.tanh(x)
    if kind == "arctan":
        return math.atan(x)
    if kind == "relu":
        return x if x > 0.0 else 0.0
    raise ValueError(f"unknown activation {kind!r}")


def _slope(kind: str, x: float) -> float:
    if kind == "sigmoid":
        s = _value("sigmoid", x)
        return s * (1.0 - s)
    if kind == "tanh":
        t = math.tanh(x)
        return 1.0 - t * t
    if kind == "arctan":
        return 1.0 / (1.0 + x * x)
    if kind == "relu":
        return 1.0 if x > 0.0 else 0.0
    raise ValueError(f"unknown activation {kind!r}")


def act_value(kind: str, x) -> np.ndarray:
    """Vectorised activation value."""
    x = np.asarray(x, dtype=np.float64)
    if kind == "relu":
        return np.maximum(x, 0.0)
    if kind == "sigmoid":
        out = np.empty_like(x)
        pos = x >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
        e = np.exp(x[~pos])
        out[~pos] = e / (1.0 + e)
        return out
    if kind == "tanh":
        return np.tanh(x)
    if kind == "arctan":
        return np.arctan(x)
    raise ValueError(f"unknown activation {kind!r}")


def act_slope(kind: str, x) -> np.ndarray:
    """Vectorised activation derivative (ReLU uses 0 at the kink)."""
    x = np.asarray(x, dtype=np.float64)
    if kind == "relu":
        return (x > 0).astype(np.float64)
    if kind == "sigmoid":
        s = act_value("sigmoid", x)
        return s * (1.0 - s)
    if kind == "tanh":
        t = np.tanh(x)
        return 1.0 - t * t
    if kind == "arctan":
        return 1.0 / (1.0 + x * x)
    raise ValueError(f"unknown activation {kind!r}")


# ---------------------------------------------------------------------------
# endpoint tangents


def _tangent_bisect(kind: str, anchor: float, lo: float, hi: float) -> float:
    """Point d in [lo, hi] where the tangent at d passes through the anchor.

    Solves f'(d) * (d - anchor) = f(d) - f(anchor) by bisection run all the
    way to float-level bracket collapse, so the slope form of the equation
    also holds well inside TANGENT_RESIDUAL_TOL even on short spans. The
    residual is monotone on the bracket; an exactly zero residual at a
    bracket endpoint means the tangent degenerates to that endpoint
    (interval entirely on one side of the inflection).
    """
    if lo >= hi:  # zero-width bracket: the tangent anchors at its only point
        return lo
    fa = _value(kind, anchor)

    def residual(d: float) -> float:
        return _slope(kind, d) * (d - anchor) - (_value(kind, d) - fa)

    r_lo = residual(lo)
    r_hi = residual(hi)
    # below the float noise floor of the residual expression the sign test is
    # meaningless: that bracket end is a root to evaluation precision
    noise = 1e-14 * max(1.0, abs(lo - anchor), abs(hi - anchor))
    if abs(r_lo) <= noise or abs(r_hi) <= noise:
        return lo if abs(r_lo) <= abs(r_hi) else hi
    if (r_lo > 0.0) == (r_hi > 0.0):
        raise NoTangentPointError(
            f"{kind}: no endpoint tangent from anchor {anchor!r} in [{lo!r}, {hi!r}] "
            f"(residuals {r_lo:.3e}, {r_hi:.3e})"
        )
    for _ in range(TANGENT_MAX_ITERS):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:  # bracket collapsed to adjacent floats
            break
        r_mid = residual(mid)
        if r_mid == 0.0:
            return mid
        if (r_mid > 0.0) == (r_lo > 0.0):
            lo, r_lo = mid, r_mid
        else:
            hi, r_hi = mid, r_mid
    return lo if abs(r_lo) <= abs(r_hi) else hi


def tangent_lower_anchor(kind: str, l: float, u: float) -> float:
    """Touch point x* of the tangent drawn from (l, f(l)) over [max(l,0), u].

    Exists when the chord slope exceeds f'(u); raises NoTangentPointError
    otherwise. When l >= 0 the tangent degenerates to the point l itself;
    when u <= 0 the search bracket is empty and it collapses to u (reached
    only when a branch predicate flips at float-noise level on a
    near-linear interval, where the tangent at u equals the chord to the
    same noise level).
    """
    if u <= 0.0:
        return u
    return _tangent_bisect(kind, l, max(l, 0.0), u)


def tangent_upper_anchor(kind: str, l: float, u: float) -> float:
    """Touch point x** of the tangent drawn from (u, f(u)) over [l, min(u,0)].

    Exists when the chord slope is at least f'(l); raises NoTangentPointError
    otherwise. When u <= 0 the tangent degenerates to the point u itself;
    when l >= 0 the search bracket is empty and it collapses to l (same
    float-noise situation as in tangent_lower_anchor, mirrored).
    """
    if l >= 0.0:
        return l
    return _tangent_bisect(kind, u, l, min(u, 0.0))


def _tangent_line(kind: str, d: float) -> ScalarLine:
    a = _slope(kind, d)
    return ScalarLine(a, _value(kind, d) - a * d)


def _chord_line(x0: float, y0: float, slope: float) -> ScalarLine:
    return ScalarLine(slope, y0 - slope * x0)


# ---------------------------------------------------------------------------
# relaxations


def sshape_bounds(kind: str, l: float, u: float, m: float) -> ScalarRelaxation:
    """Sound lower/upper lines for an s-shaped activation on [l, u].

    The anchor m (clamped into [l, u]) steers which line family is used:
    with the anchor on the concave side (m >= 0) the upper line prefers the
    tangent at m, with it on the convex side the lower line does. Endpoint
    chords vs endpoint tangents are decided by comparing the full chord slope
    k with the derivative at the endpoints.
    """
    l, u, m = float(l), float(u), float(m)
    if u < l:
        raise ValueError(f"empty interval [{l}, {u}]")
    if u - l < NEAR_LINEAR_WIDTH:
        flat = ScalarLine(0.0, _value(kind, l))
        return ScalarRelaxation(kind, l, u, m, lower=flat, upper=flat)
    m = min(max(m, l), u)
    fl = _value(kind, l)
    fu = _value(kind, u)
    k = (fu - fl) / (u - l)

    if m >= 0.0:
        if m - l > 1e-12 * max(1.0, abs(l)):
            k_ml = (_value(kind, m) - fl) / (m - l)
        else:
            k_ml = _slope(kind, m)  # chord degenerates to the tangent slope
        if k_ml > _slope(kind, m):
            upper = _tangent_line(kind, m)
        elif k > _slope(kind, u):
            upper = _tangent_line(kind, tangent_lower_anchor(kind, l, u))
        else:
            upper = _chord_line(l, fl, k)
        if k < _slope(kind, l):
            lower = _chord_line(u, fu, k)
        else:
            lower = _tangent_line(kind, tangent_upper_anchor(kind, l, u))
    else:
        if u - m > 1e-12 * max(1.0, abs(u)):
            k_mu = (_value(kind, m) - fu) / (m - u)
        else:
            k_mu = _slope(kind, m)
        if k_mu >= _slope(kind, m):
            lower = _tangent_line(kind, m)
        elif k > _slope(kind, l):
            lower = _tangent_line(kind, tangent_upper_anchor(kind, l, u))
        else:
            lower = _chord_line(l, fl, k)
        if k <= _slope(kind, u):
            upper = _chord_line(u, fu, k)
        else:
            upper = _tangent_line(kind, tangent_lower_anchor(kind, l, u))

    return ScalarRelaxation(kind, l, u, m, lower=lower, upper=upper)


def relu_bounds(l: float, u: float, m: float) -> ScalarRelaxation:
    """Chord upper bound and sign-of-anchor lower bound for ReLU on [l, u]."""
    l, u, m = float(l), float(u), float(m)
    if u < l:
        raise ValueError(f"empty interval [{l}, {u}]")
    m = min(max(m, l), u)
    if u <= 0.0:
        line = ScalarLine(0.0, 0.0)
        return ScalarRelaxation("relu", l, u, m, lower=line, upper=line)
    if l >= 0.0:
        line = ScalarLine(1.0, 0.0)
        return ScalarRelaxation("relu", l, u, m, lower=line, upper=line)
    upper = _chord_line(l, 0.0, u / (u - l))
    lower = ScalarLine(1.0, 0.0) if m > 0.0 else ScalarLine(0.0, 0.0)
    return ScalarRelaxation("relu", l, u, m, lower=lower, upper=upper)


def relax(kind: str, l: float, u: float, x0_pre: float, policy: AnchorPolicy) -> ScalarRelaxation:
    """Relax one neuron, choosing the anchor per policy (clamped into [l, u])."""
    if kind not in ACTIVATION_KINDS:
        raise ValueError(f"unknown activation {kind!r}")
    if policy is AnchorPolicy.MIDPOINT:
        m = 0.5 * (float(l) + float(u))
    else:
        m = min(max(float(x0_pre), float(l)), float(u))
    if kind == "relu":
        return relu_bounds(l, u, m)
    return sshape_bounds(kind, l, u, m)


def relax_layer(
    kind: str,
    lower: np.ndarray,
    upper: np.ndarray,
    anchors: np.ndarray,
    policy: AnchorPolicy,
) -> list[ScalarRelaxation]:
    """Per-neuron relaxations for one activation layer."""
    return [
        relax(kind, float(l), float(u), float(a), policy)
        for l, u, a in zip(lower, upper, anchors)
    ]
