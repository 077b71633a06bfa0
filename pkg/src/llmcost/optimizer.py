"""Configuration-space search and Pareto frontier construction.

The sweep evaluates token latency for every (instance size, parallelism
plan, batch size) triple on a grid, optionally pairing each configuration
with a speculative-decoding draft, and keeps the feasible points.  The
frontier is the maximal set of (tokens/s per request, USD per million
tokens) points not dominated in both coordinates, and the utility-optimal
point maximizes speed**alpha / cost for a preference exponent alpha.

Everything here is deterministic: fixed iteration order, no randomness,
so identical inputs reproduce identical output byte-for-byte.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

from .catalog import AcceleratorSpec, ModelArchitecture
from .parallelism import ParallelismPlan, enumerate_plans
from .perf import LatencyBreakdown, Workload, token_latency
from .specdec import SpecDecConfig, spec_frontier_point


class NoFeasiblePointError(Exception):
    """No configuration on the grid fits in memory / satisfies constraints."""


@dataclass(frozen=True)
class SearchGrid:
    n_gpu_values: Tuple[int, ...]
    batch_values: Tuple[int, ...]

    def __post_init__(self) -> None:
        for name, values in (("n_gpu_values", self.n_gpu_values),
                             ("batch_values", self.batch_values)):
            if not values:
                raise ValueError(f"{name} must be nonempty")
            if any(v < 1 for v in values):
                raise ValueError(f"{name} must be positive")
            if list(values) != sorted(set(values)):
                raise ValueError(f"{name} must be sorted and unique")

    def to_dict(self) -> Dict[str, list]:
        return {"n_gpu_values": list(self.n_gpu_values), "batch_values": list(self.batch_values)}


def default_grid(max_gpus: int = 512, max_batch: int = 4096) -> SearchGrid:
    """Small instances exhaustively, node multiples beyond; power-of-two batches."""
    n_gpu = sorted(set(range(1, 9)) | {8 * k for k in range(1, 65) if 8 * k <= max_gpus})
    n_gpu = [n for n in n_gpu if n <= max_gpus] or [1]
    batches = []
    b = 1
    while b <= max_batch:
        batches.append(b)
        b *= 2
    return SearchGrid(n_gpu_values=tuple(n_gpu), batch_values=tuple(batches))


@dataclass(frozen=True)
class ParetoPoint:
    """One achievable operating point and the configuration achieving it."""

    tokens_per_second: float          # per request (committed tokens under speculation)
    cost_per_million_tokens: float
    plan: ParallelismPlan
    batch_size: int
    breakdown: LatencyBreakdown
    gamma: Optional[int] = None       # draft length when speculating
    draft_plan: Optional[ParallelismPlan] = None


def _plan_key(point: ParetoPoint) -> tuple:
    plan = point.plan
    return (plan.n_gpu, plan.pp_degree, plan.tp_degree, plan.ep_degree,
            point.batch_size, point.gamma or 0)


def _draft_candidates(
    draft: ModelArchitecture,
    acc: AcceleratorSpec,
    workload: Workload,
    grid: SearchGrid,
    hourly_price: Optional[float],
) -> List[Tuple[ParallelismPlan, LatencyBreakdown]]:
    """Latency/cost Pareto set of draft configurations at one batch size."""
    options = []
    for n_gpu in grid.n_gpu_values:
        for plan in enumerate_plans(draft, acc, n_gpu):
            bd = token_latency(draft, workload, plan, acc, hourly_price=hourly_price)
            if bd.feasible:
                options.append((plan, bd))
    options.sort(key=lambda pb: (pb[1].token_latency, pb[1].gpu_seconds_per_token,
                                 pb[0].n_gpu, pb[0].pp_degree, pb[0].tp_degree))
    kept: List[Tuple[ParallelismPlan, LatencyBreakdown]] = []
    best_cost = math.inf
    for plan, bd in options:
        if bd.gpu_seconds_per_token < best_cost:
            kept.append((plan, bd))
            best_cost = bd.gpu_seconds_per_token
    return kept


def sweep(
    model: ModelArchitecture,
    acc: AcceleratorSpec,
    workload: Optional[Workload] = None,
    grid: Optional[SearchGrid] = None,
    spec: Optional[SpecDecConfig] = None,
    hourly_price: Optional[float] = None,
) -> List[ParetoPoint]:
    """Evaluate the grid and return all feasible operating points.

    ``workload`` acts as a template: its context length and demand cap apply
    to every point while the batch size comes from the grid.  With ``spec``
    set, every target configuration is paired with each draft configuration
    on the draft's own latency/cost frontier, and the draft length is chosen
    to minimize latency per committed token.

    Raises :class:`NoFeasiblePointError` when nothing on the grid fits.
    """
    template = workload or Workload()
    grid = grid or default_grid()
    points: List[ParetoPoint] = []
    for batch in grid.batch_values:
        wl = Workload(context_length=template.context_length, batch_size=batch,
                      demand_cap=template.demand_cap)
        drafts = None
        if spec is not None:
            drafts = _draft_candidates(spec.draft, acc, wl, grid, hourly_price)
            if not drafts:
                continue
        for n_gpu in grid.n_gpu_values:
            for plan in enumerate_plans(model, acc, n_gpu):
                base = token_latency(model, wl, plan, acc, hourly_price=hourly_price)
                if not base.feasible:
                    continue
                if spec is None:
                    points.extend(_admit(base, plan, wl, None, None))
                else:
                    verify_cache: Dict[int, LatencyBreakdown] = {1: base}

                    def verify(g: int, _plan=plan, _wl=wl, _cache=verify_cache) -> LatencyBreakdown:
                        if g not in _cache:
                            _cache[g] = token_latency(model, _wl, _plan, acc,
                                                      hourly_price=hourly_price,
                                                      verify_expansion=g)
                        return _cache[g]

                    for draft_plan, draft_bd in drafts:
                        combined, gamma = spec_frontier_point(
                            base, draft_bd, spec.alpha,
                            gamma=spec.gamma, gamma_max=spec.gamma_max,
                            target_eval=verify,
                        )
                        if combined.feasible:
                            points.extend(_admit(combined, plan, wl, gamma, draft_plan))
    if not points:
        raise NoFeasiblePointError(
            f"no feasible configuration for {model.name} on {acc.name} over the given grid"
        )
    return points


def _admit(
    breakdown: LatencyBreakdown,
    plan: ParallelismPlan,
    wl: Workload,
    gamma: Optional[int],
    draft_plan: Optional[ParallelismPlan],
) -> List[ParetoPoint]:
    rate = 1.0 / breakdown.token_latency
    if wl.demand_cap is not None and wl.batch_size * rate > wl.demand_cap:
        return []
    return [ParetoPoint(
        tokens_per_second=rate,
        cost_per_million_tokens=breakdown.cost_per_million_tokens,
        plan=plan,
        batch_size=wl.batch_size,
        breakdown=breakdown,
        gamma=gamma,
        draft_plan=draft_plan,
    )]


def pareto_frontier(points: Sequence[ParetoPoint]) -> List[ParetoPoint]:
    """Maximal undominated set, sorted by speed ascending.

    Equal-speed points keep only the cheapest; exact duplicates collapse to
    the lexicographically first configuration.  Cost is nondecreasing in
    speed along the result.
    """
    ordered = sorted(points, key=lambda p: (-p.tokens_per_second,
                                            p.cost_per_million_tokens,
                                            _plan_key(p)))
    kept: List[ParetoPoint] = []
    best_cost = math.inf
    for point in ordered:
        if point.cost_per_million_tokens < best_cost:
            kept.append(point)
            best_cost = point.cost_per_million_tokens
    kept.reverse()
    return kept


def utility_optimal_point(frontier: Sequence[ParetoPoint], alpha_pref: float) -> ParetoPoint:
    """Point maximizing speed**alpha_pref / cost; ties go to the faster point."""
    if not frontier:
        raise NoFeasiblePointError("utility_optimal_point requires a nonempty frontier")
    if alpha_pref < 0:
        raise ValueError("alpha_pref must be >= 0")
    best = None
    best_utility = -math.inf
    for point in sorted(frontier, key=lambda p: p.tokens_per_second):
        utility = alpha_pref * math.log(point.tokens_per_second) \
            - math.log(point.cost_per_million_tokens)
        if utility >= best_utility:
            best, best_utility = point, utility
    return best


def max_tokens_per_second(
    model: ModelArchitecture,
    acc: AcceleratorSpec,
    spec: Optional[SpecDecConfig] = None,
    grid: Optional[SearchGrid] = None,
    context_length: float = 0.0,
    hourly_price: Optional[float] = None,
) -> ParetoPoint:
    """Fastest achievable point at batch size 1, cost disregarded."""
    base = grid or default_grid()
    b1 = SearchGrid(n_gpu_values=base.n_gpu_values, batch_values=(1,))
    points = sweep(model, acc, Workload(context_length=context_length),
                   grid=b1, spec=spec, hourly_price=hourly_price)
    return max(points, key=lambda p: (p.tokens_per_second, -p.cost_per_million_tokens,
                                      tuple(-v for v in _plan_key(p))))


def compare_accelerators(
    model: ModelArchitecture,
    accs: Sequence[AcceleratorSpec],
    grid: Optional[SearchGrid] = None,
    workload: Optional[Workload] = None,
    spec: Optional[SpecDecConfig] = None,
    hourly_price: Optional[float] = None,
) -> Dict[str, List[ParetoPoint]]:
    """One frontier per accelerator, keyed by accelerator name.

    Accelerators with no feasible point map to an empty frontier rather than
    raising, so one undersized GPU does not abort a comparison.
    """
    if not accs:
        raise ValueError("compare_accelerators requires at least one accelerator")
    frontiers: Dict[str, List[ParetoPoint]] = {}
    for acc in accs:
        try:
            pts = sweep(model, acc, workload=workload, grid=grid, spec=spec,
                        hourly_price=hourly_price)
            frontiers[acc.name] = pareto_frontier(pts)
        except NoFeasiblePointError:
            frontiers[acc.name] = []
    return frontiers
