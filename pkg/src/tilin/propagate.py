"""Symbolic bound propagation with backsubstitution to the input layer.

Every layer output is bracketed by two affine maps of the network input,
upper and lower. Starting from identity maps at the layer of interest, each
preceding layer is substituted in turn: affine layers compose exactly, and
nonlinear layers are replaced by their per-neuron linear relaxations, picking
the upper or lower line per coefficient sign so the map stays a sound bound.
Once expressed over the input, the maps are concretised over the perturbation
ball with the dual-norm (Hölder) bound.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .maxpool import PoolRelaxation, relax_pool
from .model import Activation, Affine, MaxPool, Network, forward_all
from .relaxation import AnchorPolicy, ScalarRelaxation, relax_layer

SUPPORTED_NORMS = (1.0, 2.0, float("inf"))


@dataclass(frozen=True)
class LinearMap:
    """Affine map A @ x + B of some reference layer's values x."""

    A: np.ndarray  # (n_out, n_ref)
    B: np.ndarray  # (n_out,)

    def __post_init__(self):
        object.__setattr__(self, "A", np.asarray(self.A, dtype=np.float64))
        object.__setattr__(self, "B", np.asarray(self.B, dtype=np.float64))
        if self.A.ndim != 2 or self.B.ndim != 1 or self.A.shape[0] != self.B.shape[0]:
            raise ValueError(f"inconsistent map shapes {self.A.shape} / {self.B.shape}")

    @classmethod
    def identity(cls, n: int) -> "LinearMap":
        return cls(np.eye(n), np.zeros(n))

    def __call__(self, x) -> np.ndarray:
        return np.asarray(x, dtype=np.float64) @ self.A.T + self.B


@dataclass(frozen=True)
class LayerBounds:
    """Elementwise interval [lower, upper] on one layer's outputs."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=np.float64)
        hi = np.asarray(self.upper, dtype=np.float64)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError(f"inconsistent bound shapes {lo.shape} / {hi.shape}")
        if np.any(lo > hi):
            # allow rounding-level inversions only
            if np.any(lo > hi + 1e-9 * np.maximum(1.0, np.abs(hi))):
                raise ValueError("lower bound exceeds upper bound")
            hi = np.maximum(lo, hi)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower


@dataclass(frozen=True)
class PerturbationBall:
    """{x : ||x - center||_p <= radius} for p in {1, 2, inf}."""

    center: np.ndarray
    radius: float
    p: float

    def __post_init__(self):
        c = np.asarray(self.center, dtype=np.float64)
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "radius", float(self.radius))
        object.__setattr__(self, "p", float(self.p))
        if c.ndim != 1 or not np.all(np.isfinite(c)):
            raise ValueError("ball center must be a finite vector")
        if not (self.radius >= 0.0 and np.isfinite(self.radius)):
            raise ValueError(f"ball radius must be finite and >= 0, got {self.radius}")
        if self.p not in SUPPORTED_NORMS:
            raise ValueError(f"norm p must be one of 1, 2, inf, got {self.p}")


@dataclass
class CachedActivation:
    """Per-neuron scalar relaxations of one activation layer, plus packed lines."""

    kind: str
    scalars: list[ScalarRelaxation]
    bounds: LayerBounds  # the pre-activation interval the relaxations were built on
    al: np.ndarray = field(init=False)
    bl: np.ndarray = field(init=False)
    au: np.ndarray = field(init=False)
    bu: np.ndarray = field(init=False)

    def __post_init__(self):
        self.al = np.array([s.lower.a for s in self.scalars])
        self.bl = np.array([s.lower.b for s in self.scalars])
        self.au = np.array([s.upper.a for s in self.scalars])
        self.bu = np.array([s.upper.b for s in self.scalars])


@dataclass
class CachedPool:
    """Per-window pool relaxations of one maxpool layer."""

    relaxations: tuple[PoolRelaxation, ...]
    windows: tuple[tuple[int, ...], ...]
    in_width: int
    bounds: LayerBounds  # the pre-pool interval the planes were built on


@dataclass
class RelaxationCache:
    """Relaxations per nonlinear layer index, reused across backsubstitutions."""

    entries: dict[int, CachedActivation | CachedPool] = field(default_factory=dict)


# ---------------------------------------------------------------------------
# concretisation


def dual_norm_row(row, p: float) -> float:
    """Dual-norm value of one coefficient row: sup of row @ d over ||d||_p <= 1."""
    return float(dual_norm_rows(np.asarray(row, dtype=np.float64).reshape(1, -1), p)[0])


def dual_norm_rows(A: np.ndarray, p: float) -> np.ndarray:
    p = float(p)
    if p == 1.0:
        return np.abs(A).max(axis=1)
    if p == 2.0:
        return np.sqrt((A * A).sum(axis=1))
    if p == float("inf"):
        return np.abs(A).sum(axis=1)
    raise ValueError(f"norm p must be one of 1, 2, inf, got {p}")


def global_interval(upper: LinearMap, lower: LinearMap, ball: PerturbationBall) -> LayerBounds:
    """Concretise input-referenced bounding maps over the ball."""
    if upper.A.shape[1] != ball.center.size or lower.A.shape[1] != ball.center.size:
        raise ValueError("maps must be expressed over the input layer")
    hi = ball.radius * dual_norm_rows(upper.A, ball.p) + upper.A @ ball.center + upper.B
    lo = -ball.radius * dual_norm_rows(lower.A, ball.p) + lower.A @ ball.center + lower.B
    return LayerBounds(lo, hi)


# ---------------------------------------------------------------------------
# substitution steps


def _through_affine(m: LinearMap, layer: Affine) -> LinearMap:
    return LinearMap(m.A @ layer.weight, m.B + m.A @ layer.bias)


def _split(A: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    pos = np.where(A > 0.0, A, 0.0)
    return pos, A - pos


def _through_lines(m: LinearMap, a_pos, b_pos, a_neg, b_neg) -> LinearMap:
    # positive coefficients keep the line matching the map's own polarity,
    # negative coefficients take the opposite line
    pos, neg = _split(m.A)
    return LinearMap(pos * a_pos + neg * a_neg, m.B + pos @ b_pos + neg @ b_neg)


def _through_pool(m: LinearMap, entry: CachedPool, plane_on_positive: bool) -> LinearMap:
    pos, neg = _split(m.A)
    A = np.zeros((m.A.shape[0], entry.in_width))
    B = m.B.copy()
    for col, (win, rel) in enumerate(zip(entry.windows, entry.relaxations)):
        idx = list(win)
        plane_side, select_side = (pos, neg) if plane_on_positive else (neg, pos)
        pc = plane_side[:, col]
        if pc.any():
            A[:, idx] += np.outer(pc, rel.upper_coeffs)
            B += pc * rel.upper_intercept
        sc = select_side[:, col]
        if sc.any():
            A[:, idx[rel.lower_index]] += sc
    return LinearMap(A, B)


def substitute_affine(
    maps: tuple[LinearMap, LinearMap], layer: Affine
) -> tuple[LinearMap, LinearMap]:
    """Rewrite both maps in terms of the affine layer's input (exact)."""
    upper, lower = maps
    return _through_affine(upper, layer), _through_affine(lower, layer)


def substitute_nonlinear(
    maps: tuple[LinearMap, LinearMap], entry: CachedActivation | CachedPool
) -> tuple[LinearMap, LinearMap]:
    """Rewrite both maps through a relaxed nonlinear layer (sound, not exact)."""
    upper, lower = maps
    if isinstance(entry, CachedActivation):
        new_upper = _through_lines(upper, entry.au, entry.bu, entry.al, entry.bl)
        new_lower = _through_lines(lower, entry.al, entry.bl, entry.au, entry.bu)
        return new_upper, new_lower
    if isinstance(entry, CachedPool):
        return _through_pool(upper, entry, True), _through_pool(lower, entry, False)
    raise TypeError(f"unknown cache entry {type(entry)}")


# ---------------------------------------------------------------------------
# full pass


def backsubstitute(
    net: Network, k: int, cache: RelaxationCache, width_out: int
) -> tuple[LinearMap, LinearMap]:
    """Bounding maps of layer k's output expressed over the network input."""
    maps = (LinearMap.identity(width_out), LinearMap.identity(width_out))
    for j in range(k, -1, -1):
        layer = net.layers[j]
        if isinstance(layer, Affine):
            maps = substitute_affine(maps, layer)
        else:
            if j not in cache.entries:
                raise ValueError(f"no cached relaxation for nonlinear layer {j}")
            maps = substitute_nonlinear(maps, cache.entries[j])
    return maps


def compute_all_bounds(
    net: Network,
    ball: PerturbationBall,
    policy: AnchorPolicy = AnchorPolicy.FORWARD_VALUE,
) -> tuple[list[LayerBounds], RelaxationCache]:
    """Concrete bounds for every layer output over the ball, plus the cache.

    Layers are processed in order: each nonlinear layer is relaxed on its
    just-computed input interval (anchors taken from the unperturbed forward
    pass under the forward-value policy), then the layer's own output bounds
    come from a full backsubstitution to the input.
    """
    if not net.is_normalized():
        raise ValueError("network must be normalized() first (affine/activation/maxpool only)")
    if ball.center.size != net.input_dim:
        raise ValueError(
            f"ball center width {ball.center.size} != network input_dim {net.input_dim}"
        )
    widths = net.widths
    inters = forward_all(net, ball.center)
    input_box = LayerBounds(ball.center - ball.radius, ball.center + ball.radius)
    bounds: list[LayerBounds] = []
    cache = RelaxationCache()
    for k, layer in enumerate(net.layers):
        prev = bounds[-1] if bounds else input_box
        if isinstance(layer, Activation):
            scalars = relax_layer(layer.kind, prev.lower, prev.upper, inters[k], policy)
            cache.entries[k] = CachedActivation(layer.kind, scalars, prev)
        elif isinstance(layer, MaxPool):
            rels = tuple(
                relax_pool(prev.lower[list(w)], prev.upper[list(w)]) for w in layer.windows
            )
            cache.entries[k] = CachedPool(rels, layer.windows, widths[k], prev)
        maps = backsubstitute(net, k, cache, widths[k + 1])
        bounds.append(global_interval(maps[0], maps[1], ball))
    return bounds, cache
