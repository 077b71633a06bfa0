"""Speculative decoding: speedups, optimal draft length, acceptance estimation.

A cheap draft model proposes gamma tokens, the target model verifies them
in one forward pass, and rejection sampling keeps the output distribution
exact.  With i.i.d. per-token acceptance probability alpha, the tokens
committed per iteration follow a truncated geometric law with mean

    V(alpha, gamma) = (1 - alpha**gamma) / (1 - alpha)

and the mean latency per committed token is (t_target + gamma*t_draft) / V.
The acceptance probability can be estimated offline from paired token
log-probabilities of the two models: alpha = E[min(1, p/q)].
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, List, Optional, Sequence, Tuple

from .catalog import ModelArchitecture
from .perf import LatencyBreakdown

DEFAULT_ALPHA = 0.8
DEFAULT_GAMMA_MAX = 64


def _check_alpha(alpha: float) -> None:
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"alpha must be in (0, 1), got {alpha!r}")


@dataclass(frozen=True)
class SpecDecConfig:
    """Pairing of a draft model with a target, plus acceptance behavior.

    ``gamma=None`` means the draft length is optimized per operating point.
    """

    draft: ModelArchitecture
    alpha: float = DEFAULT_ALPHA
    gamma: Optional[int] = None
    gamma_max: int = DEFAULT_GAMMA_MAX
    target: Optional[ModelArchitecture] = None

    def __post_init__(self) -> None:
        _check_alpha(self.alpha)
        if self.gamma is not None and self.gamma < 1:
            raise ValueError("gamma must be >= 1 when fixed")
        if self.gamma_max < 1:
            raise ValueError("gamma_max must be >= 1")


@dataclass(frozen=True)
class LogprobPair:
    """Probabilities of one sampled token under the target (p) and draft (q)."""

    p: float
    q: float

    def __post_init__(self) -> None:
        if not (0.0 < self.q <= 1.0):
            raise ValueError(f"q must be in (0, 1], got {self.q!r}")
        if not (0.0 <= self.p <= 1.0):
            raise ValueError(f"p must be in [0, 1], got {self.p!r}")


@dataclass(frozen=True)
class AlphaEstimate:
    alpha: float
    standard_error: float
    n_records: int


def expected_tokens_per_iteration(alpha: float, gamma: int) -> float:
    """Mean committed tokens per draft/verify cycle, in [1, gamma]."""
    _check_alpha(alpha)
    if gamma < 1:
        raise ValueError("gamma must be >= 1")
    return (1.0 - alpha ** gamma) / (1.0 - alpha)


def spec_latency(t_target: float, t_draft: float, alpha: float, gamma: int) -> float:
    """Mean seconds per committed token for fixed forward-pass latencies."""
    if t_target <= 0 or t_draft <= 0:
        raise ValueError("forward-pass latencies must be positive")
    return (t_target + gamma * t_draft) / expected_tokens_per_iteration(alpha, gamma)


def optimal_gamma(
    t_target: float,
    t_draft: float,
    alpha: float,
    gamma_max: int = DEFAULT_GAMMA_MAX,
) -> Tuple[int, float]:
    """Exhaustive draft-length sweep; ties resolve to the shorter draft."""
    if gamma_max < 1:
        raise ValueError("gamma_max must be >= 1")
    best_gamma, best_latency = 1, spec_latency(t_target, t_draft, alpha, 1)
    for gamma in range(2, gamma_max + 1):
        latency = spec_latency(t_target, t_draft, alpha, gamma)
        if latency < best_latency:
            best_gamma, best_latency = gamma, latency
    return best_gamma, best_latency


def estimate_alpha(records: Sequence[LogprobPair] | Iterable[LogprobPair]) -> AlphaEstimate:
    """Acceptance probability from recorded (p, q) pairs: mean of min(1, p/q).

    Uses exact summation, so the estimate is independent of record order.
    """
    ratios = [min(1.0, rec.p / rec.q) for rec in records]
    if not ratios:
        raise ValueError("estimate_alpha requires at least one record")
    n = len(ratios)
    mean = math.fsum(ratios) / n
    if n > 1:
        var = math.fsum((r - mean) ** 2 for r in ratios) / (n - 1)
        stderr = math.sqrt(var / n)
    else:
        stderr = math.inf
    return AlphaEstimate(alpha=mean, standard_error=stderr, n_records=n)


def read_logprob_records(path) -> List[LogprobPair]:
    """Load line-delimited JSON records with fields {"p": ..., "q": ...}."""
    records = []
    text = Path(path).read_text()
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            data = json.loads(line)
            records.append(LogprobPair(p=float(data["p"]), q=float(data["q"])))
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ValueError(f"{path}:{lineno}: bad log-prob record: {exc}") from exc
    return records


def _combine(
    target: LatencyBreakdown,
    draft: LatencyBreakdown,
    gamma: int,
    tokens_per_iteration: float,
) -> LatencyBreakdown:
    """Blend per-iteration component costs into per-committed-token terms."""

    def per_token(attr: str) -> float:
        return (getattr(target, attr) + gamma * getattr(draft, attr)) / tokens_per_iteration

    memory = per_token("memory_time")
    arithmetic = per_token("arithmetic_time")
    # Preserve the additive identity: the roofline max is taken per pass
    # before averaging, so recover the blended max directly.
    roofline = (
        max(target.memory_time, target.arithmetic_time)
        + gamma * max(draft.memory_time, draft.arithmetic_time)
    ) / tokens_per_iteration
    slack = roofline - max(memory, arithmetic)
    return LatencyBreakdown(
        memory_time=memory + (slack if memory >= arithmetic else 0.0),
        arithmetic_time=arithmetic + (slack if memory < arithmetic else 0.0),
        collective_latency_time=per_token("collective_latency_time"),
        kernel_launch_time=per_token("kernel_launch_time"),
        network_bandwidth_time=per_token("network_bandwidth_time"),
        pp_boundary_time=per_token("pp_boundary_time"),
        token_latency=per_token("token_latency"),
        gpu_seconds_per_token=per_token("gpu_seconds_per_token"),
        cost_per_million_tokens=per_token("cost_per_million_tokens"),
        feasible=target.feasible and draft.feasible,
    )


def spec_frontier_point(
    target_breakdown: LatencyBreakdown,
    draft_breakdown: LatencyBreakdown,
    alpha: float,
    gamma: Optional[int] = None,
    gamma_max: int = DEFAULT_GAMMA_MAX,
    target_eval: Optional[Callable[[int], LatencyBreakdown]] = None,
) -> Tuple[LatencyBreakdown, int]:
    """Combined operating point for a (target, draft) pair at matched settings.

    ``target_eval``, when given, supplies the target's verification-pass
    breakdown as a function of gamma (the pass covers gamma positions per
    request); otherwise the plain target breakdown is used for every gamma.
    Returns the blended per-committed-token breakdown and the chosen gamma.
    The blended cost is (cost_target + gamma * cost_draft) / V.
    """
    _check_alpha(alpha)
    if not (target_breakdown.feasible and draft_breakdown.feasible):
        return _combine(target_breakdown, draft_breakdown, 1, 1.0), 1

    def verify(g: int) -> LatencyBreakdown:
        return target_eval(g) if target_eval is not None else target_breakdown

    candidates = [gamma] if gamma is not None else range(1, gamma_max + 1)
    best: Optional[Tuple[float, int, LatencyBreakdown]] = None
    for g in candidates:
        tb = verify(g)
        if not tb.feasible:
            continue
        v = expected_tokens_per_iteration(alpha, g)
        latency = (tb.token_latency + g * draft_breakdown.token_latency) / v
        if best is None or latency < best[0]:
            best = (latency, g, tb)
    if best is None:
        return _combine(target_breakdown, draft_breakdown, 1, 1.0), 1
    _, g, tb = best
    v = expected_tokens_per_iteration(alpha, g)
    return _combine(tb, draft_breakdown, g, v), g
