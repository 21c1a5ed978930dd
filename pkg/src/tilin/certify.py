"""Certified-radius search: binary search in log space over the ball radius.

Each query radius is decided by one full bound propagation: the input is
certified robust at radius eps when the target class's lower output bound
beats every other class's upper bound. The search keeps the largest radius
proven robust (eps_cert, the sound headline number) alongside the final
query point of the schedule (eps_last), and records every probe in a trace.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .model import Network, forward
from .propagate import LayerBounds, PerturbationBall, compute_all_bounds
from .relaxation import AnchorPolicy

DEFAULT_EPS0 = 0.05
DEFAULT_ITERATIONS = 15


def norm_name(p: float) -> str:
    return "inf" if math.isinf(p) else str(int(p))


def parse_norm(name) -> float:
    text = str(name).strip().lower()
    if text in ("inf", "infty", "infinity"):
        return float("inf")
    if text in ("1", "2"):
        return float(text)
    raise ValueError(f"unsupported norm {name!r}, expected 1, 2, or inf")


@dataclass(frozen=True)
class CertificationConfig:
    p: float = float("inf")
    policy: AnchorPolicy = AnchorPolicy.FORWARD_VALUE
    iterations: int = DEFAULT_ITERATIONS
    eps0: float = DEFAULT_EPS0

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not (self.eps0 > 0.0 and math.isfinite(self.eps0)):
            raise ValueError("eps0 must be a positive finite radius")


@dataclass(frozen=True)
class TraceStep:
    """One probe of the search: the radius tried and the deciding margins."""

    eps: float
    robust: bool
    gamma_l_t: float  # lower bound of the target logit
    max_gamma_u: float | None  # largest upper bound among the other logits

    def to_dict(self) -> dict:
        return {
            "eps": self.eps,
            "robust": self.robust,
            "gamma_l_t": self.gamma_l_t,
            "max_gamma_u": self.max_gamma_u,
        }


@dataclass(frozen=True)
class CertificationReport:
    input_id: str
    label: int
    eps_cert: float  # largest radius proven robust (0 when nothing was proven)
    eps_last: float  # final query point of the search schedule
    method: str
    policy: str
    norm: str
    iterations: int
    trace: tuple[TraceStep, ...]
    flags: tuple[str, ...] = ()
    wall_time_sec: float = 0.0

    def to_dict(self) -> dict:
        """Deterministic report body; volatile values go into a sidecar."""
        return {
            "input_id": self.input_id,
            "label": self.label,
            "eps_cert": self.eps_cert,
            "eps_last": self.eps_last,
            "method": self.method,
            "policy": self.policy,
            "norm": self.norm,
            "iterations": self.iterations,
            "trace": [s.to_dict() for s in self.trace],
            "flags": list(self.flags),
        }

    def to_file_dict(self, timestamp: str | None = None) -> dict:
        out = self.to_dict()
        sidecar = {"wall_time_sec": self.wall_time_sec}
        if timestamp is not None:
            sidecar["timestamp_utc"] = timestamp
        out["sidecar"] = sidecar
        return out


def is_robust(output_bounds: LayerBounds, target: int) -> bool:
    """True when the target's lower bound is >= every other class's upper bound."""
    n = output_bounds.lower.size
    if not 0 <= target < n:
        raise ValueError(f"target class {target} out of range for {n} outputs")
    others = np.arange(n) != target
    if not others.any():
        return True
    return bool(output_bounds.lower[target] >= output_bounds.upper[others].max())


def _margins(output_bounds: LayerBounds, target: int) -> tuple[float, float | None]:
    others = np.arange(output_bounds.lower.size) != target
    worst = float(output_bounds.upper[others].max()) if others.any() else None
    return float(output_bounds.lower[target]), worst


def certified_radius(
    net: Network,
    x0,
    target: int,
    config: CertificationConfig = CertificationConfig(),
    input_id: str = "0",
) -> CertificationReport:
    """Binary search (log space) for the largest certifiable radius at x0.

    The log-radius starts at ln(eps0) with bracket (-inf, +inf); a robust
    probe raises the proven bracket end and steps up by at most 1 (a factor
    of e), a failed probe lowers the other end symmetrically. eps_cert is 0
    with an explanatory flag when x0 is already misclassified or when no
    probe succeeded within the iteration budget.
    """
    start = time.perf_counter()
    x0 = np.asarray(x0, dtype=np.float64)
    flags: list[str] = []
    trace: list[TraceStep] = []
    if net.output_dim == 1:
        flags.append("single_class")

    predicted = int(np.argmax(forward(net, x0)))
    if predicted != target:
        flags.append("misclassified")
        eps_cert = 0.0
        eps_last = 0.0
    else:
        log_eps = math.log(config.eps0)
        lo = -math.inf  # largest log-radius proven robust
        hi = math.inf  # smallest log-radius seen to fail
        for _ in range(config.iterations):
            eps = math.exp(log_eps)
            bounds, _ = compute_all_bounds(net, PerturbationBall(x0, eps, config.p), config.policy)
            robust = is_robust(bounds[-1], target)
            gamma_l, gamma_u = _margins(bounds[-1], target)
            trace.append(TraceStep(eps, robust, gamma_l, gamma_u))
            if robust:
                lo = log_eps
                log_eps = min(log_eps + 1.0, 0.5 * (lo + hi))
            else:
                hi = log_eps
                log_eps = max(log_eps - 1.0, 0.5 * (lo + hi))
        eps_last = math.exp(log_eps)
        if math.isinf(lo):
            flags.append("unproven")
            eps_cert = 0.0
        else:
            eps_cert = math.exp(lo)

    return CertificationReport(
        input_id=str(input_id),
        label=int(target),
        eps_cert=eps_cert,
        eps_last=eps_last,
        method=f"tilin/{config.policy.value}",
        policy=config.policy.value,
        norm=norm_name(config.p),
        iterations=config.iterations,
        trace=tuple(trace),
        flags=tuple(flags),
        wall_time_sec=time.perf_counter() - start,
    )
