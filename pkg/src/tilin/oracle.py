"""Sampling oracles: empirical checks that are independent of the certifier.

Everything here works by evaluating the exact network on concrete points, so
it can cross-examine the symbolic machinery: sampled ball points must respect
every layer's bounds, certified radii must not exceed an empirically found
attack radius, and relaxation areas have closed forms checkable by
quadrature. None of these functions consult the relaxation branch logic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import Network, forward, forward_all
from .propagate import LayerBounds, PerturbationBall
from .relaxation import ScalarRelaxation

SOUNDNESS_TOL = 1e-7


@dataclass(frozen=True)
class OracleConfig:
    samples: int = 10_000
    seed: int = 0
    tol: float = SOUNDNESS_TOL


def sample_ball(ball: PerturbationBall, count: int, seed=0) -> np.ndarray:
    """Uniform-ish points of the ball as a (count, dim) array, worst-case biased.

    l-inf samples the box uniformly; l2 and l1 draw a uniform direction on the
    sphere (Gaussian resp. signed-Dirichlet) times a radius with density
    pushed toward the surface, so bound violations near the boundary are
    well represented. ``seed`` is an integer or a live Generator;
    deterministic for a fixed integer seed.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    n = ball.center.size
    if count < 1:
        raise ValueError("count must be >= 1")
    if ball.radius == 0.0:
        return np.tile(ball.center, (count, 1))
    if ball.p == float("inf"):
        offs = rng.uniform(-ball.radius, ball.radius, size=(count, n))
    elif ball.p == 2.0:
        g = rng.standard_normal((count, n))
        norms = np.sqrt((g * g).sum(axis=1, keepdims=True))
        norms[norms == 0.0] = 1.0
        radii = ball.radius * rng.random(count) ** (1.0 / n)
        offs = g / norms * radii[:, None]
    else:  # p == 1: signed Dirichlet direction on the cross-polytope surface
        e = rng.exponential(size=(count, n))
        signs = rng.integers(0, 2, size=(count, n)) * 2 - 1
        offs = signs * e / e.sum(axis=1, keepdims=True)
        offs *= (ball.radius * rng.random(count) ** (1.0 / n))[:, None]
    return ball.center + offs


def soundness_check(
    net: Network,
    bounds: list[LayerBounds],
    ball: PerturbationBall,
    config: OracleConfig = OracleConfig(),
) -> dict:
    """Sample the ball and count layer-bound violations beyond config.tol."""
    pts = sample_ball(ball, config.samples, config.seed)
    outs = forward_all(net, pts)
    details = []
    total = 0
    worst = 0.0
    for k, b in enumerate(bounds):
        y = outs[k + 1]
        over = y - b.upper[None, :]
        under = b.lower[None, :] - y
        excess = np.maximum(over, under)
        count = int((excess > config.tol).sum())
        layer_worst = float(max(excess.max(), 0.0))
        details.append({"layer": k, "violations": count, "max_violation": layer_worst})
        total += count
        worst = max(worst, layer_worst)
    return {
        "oracle": "soundness",
        "seed": config.seed,
        "samples": config.samples,
        "violations": total,
        "max_violation": worst,
        "details": details,
    }


def prediction_check(
    net: Network,
    ball: PerturbationBall,
    target: int,
    config: OracleConfig = OracleConfig(),
) -> dict:
    """Sample the ball and count points whose predicted class is not target."""
    pts = sample_ball(ball, config.samples, config.seed)
    preds = np.argmax(forward(net, pts), axis=1)
    flips = int((preds != target).sum())
    return {
        "oracle": "prediction",
        "seed": config.seed,
        "samples": config.samples,
        "violations": flips,
        "max_violation": 0.0 if flips == 0 else 1.0,
        "details": [{"target": int(target), "flips": flips}],
    }


def _attack_points(
    x0: np.ndarray, eps: float, p: float, rng: np.random.Generator, count: int
) -> np.ndarray:
    """Candidate adversarial points: axis extremes, sign corners, ball samples."""
    n = x0.size
    axis = np.concatenate([np.eye(n), -np.eye(n)]) * eps + x0
    if p == float("inf"):
        corners = x0 + eps * (rng.integers(0, 2, size=(count, n)) * 2 - 1)
    elif p == 2.0:
        g = rng.standard_normal((count, n))
        norms = np.sqrt((g * g).sum(axis=1, keepdims=True))
        norms[norms == 0.0] = 1.0
        corners = x0 + eps * g / norms
    else:  # p == 1: extreme points are the axis points, mix in surface samples
        e = rng.exponential(size=(count, n))
        signs = rng.integers(0, 2, size=(count, n)) * 2 - 1
        corners = x0 + eps * signs * e / e.sum(axis=1, keepdims=True)
    interior = sample_ball(PerturbationBall(x0, eps, p), count, rng)
    return np.concatenate([axis, corners, interior])


def empirical_attack_radius(
    net: Network,
    x0,
    target: int,
    p: float,
    budget: int = 40_000,
    seed: int = 0,
) -> float:
    """Smallest radius at which random/corner probing finds a misclassified point.

    Coarse-to-fine: a geometric ladder of radii locates the first level with
    an adversarial example, then bisection narrows the bracket with fresh
    probes at each midpoint. Returns +inf when every probed radius is clean;
    the result is an upper bound on the true minimal adversarial radius, so a
    sound certifier must stay at or below it.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    rng = np.random.default_rng(seed)
    ladder = [1e-3 * 2.0**k for k in range(22)]  # 1e-3 .. ~4e3
    per_level = max(64, budget // (len(ladder) + 24))

    def found(eps: float) -> bool:
        pts = _attack_points(x0, eps, p, rng, per_level)
        preds = np.argmax(forward(net, pts), axis=1)
        return bool((preds != target).any())

    hit = None
    lo = 0.0
    for eps in ladder:
        if found(eps):
            hit = eps
            break
        lo = eps
    if hit is None:
        return float("inf")
    for _ in range(24):
        mid = 0.5 * (lo + hit)
        if mid <= lo or mid >= hit:
            break
        if found(mid):
            hit = mid
        else:
            lo = mid
    return hit


def relaxation_area(r: ScalarRelaxation) -> float:
    """Exact area between a relaxation's lines over [l, u] (trapezoid form)."""
    da = r.upper.a - r.lower.a
    db = r.upper.b - r.lower.b
    return (r.u - r.l) * (da * 0.5 * (r.l + r.u) + db)


def affine_box_integral(coeffs, intercept: float, l, u) -> float:
    """Integral of an affine function over a box: volume times midpoint value."""
    coeffs = np.asarray(coeffs, dtype=np.float64)
    l = np.asarray(l, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    volume = float(np.prod(u - l))
    mid = 0.5 * (l + u)
    return volume * float(coeffs @ mid + intercept)
