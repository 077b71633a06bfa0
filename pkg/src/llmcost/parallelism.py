"""Parallelism plan enumeration and pipeline/expert-parallel adjustments.

A plan splits an instance of ``n_gpu`` devices into tensor (TP), pipeline
(PP) and expert (EP) parallel degrees with ``tp * pp * ep == n_gpu``.
For MoE models expert parallelism is maximized first (it is far cheaper
per rank than tensor parallelism: its communication volume stops growing
once the EP degree reaches the number of active experts), and the residual
degree is factored over TP and PP.  Dense models enumerate all (TP, PP)
factorizations.

Pipeline parallelism slices the batch into ``ceil(b / pp)`` micro-batches
and adds ``pp - 1`` sequential peer-to-peer hidden-state transfers per
token.  We assume ``pp`` micro-batches keep the pipeline full, so no bubble
penalty is modeled; batches smaller than ``pp`` are rejected as infeasible
by the latency model instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List

from .catalog import AcceleratorSpec, ModelArchitecture


@dataclass(frozen=True)
class ParallelismPlan:
    n_gpu: int
    n_nodes: int
    tp_degree: int
    pp_degree: int
    ep_degree: int

    def __post_init__(self) -> None:
        if self.n_gpu < 1:
            raise ValueError("n_gpu must be >= 1")
        if self.tp_degree * self.pp_degree * self.ep_degree != self.n_gpu:
            raise ValueError(
                f"tp*pp*ep = {self.tp_degree * self.pp_degree * self.ep_degree} "
                f"does not equal n_gpu = {self.n_gpu}"
            )
        if self.n_nodes < 1:
            raise ValueError("n_nodes must be >= 1")

    @property
    def stage_gpus(self) -> int:
        """Devices jointly holding one pipeline stage (tp * ep)."""
        return self.tp_degree * self.ep_degree

    def describe(self) -> str:
        return (
            f"{self.n_gpu} GPUs / {self.n_nodes} nodes "
            f"(tp={self.tp_degree}, pp={self.pp_degree}, ep={self.ep_degree})"
        )


@dataclass(frozen=True)
class PlanAdjustment:
    micro_batch: int
    pp_boundary_time: float   # seconds per token
    ep_comm_bytes: float      # dispatch+receive bytes per layer per micro-batch
    effective_tp_degree: int


def n_nodes_for(n_gpu: int, acc: AcceleratorSpec) -> int:
    return max(1, math.ceil(n_gpu / acc.node_size))


def _divisors(n: int) -> List[int]:
    out = [d for d in range(1, n + 1) if n % d == 0]
    return out


def enumerate_plans(
    model: ModelArchitecture, acc: AcceleratorSpec, n_gpu: int
) -> List[ParallelismPlan]:
    """All valid plans for an instance size, deduplicated, deterministic order."""
    if n_gpu < 1 or int(n_gpu) != n_gpu:
        raise ValueError("n_gpu must be a positive integer")
    n_gpu = int(n_gpu)
    nodes = n_nodes_for(n_gpu, acc)
    if model.n_expert > 1:
        # Maximal expert parallelism: the largest divisor of n_gpu that does
        # not exceed the expert count.
        ep = max(d for d in _divisors(n_gpu) if d <= model.n_expert)
    else:
        ep = 1
    residual = n_gpu // ep
    plans = []
    for pp in _divisors(residual):
        if pp > model.n_layers:
            continue
        tp = residual // pp
        plans.append(ParallelismPlan(n_gpu=n_gpu, n_nodes=nodes, tp_degree=tp, pp_degree=pp, ep_degree=ep))
    return sorted(plans, key=lambda p: (p.pp_degree, p.tp_degree, p.ep_degree))


def pp_adjustment(
    model: ModelArchitecture, plan: ParallelismPlan, acc: AcceleratorSpec, b: int
) -> PlanAdjustment:
    """Pipeline-boundary cost: pp-1 sequential transfers of one hidden state.

    Each transfer moves d_model * micro_batch activations, parallelized over
    the stage's devices; stage boundaries use the inter-node link once the
    instance spans more than one node.  Peer-to-peer launch latency reuses
    the collective base latency constant (no separate figure is modeled).
    """
    pp = plan.pp_degree
    if pp < 1:
        raise ValueError("pp_degree must be >= 1")
    if pp > model.n_layers:
        raise ValueError(f"pp_degree {pp} exceeds n_layers {model.n_layers}")
    micro = math.ceil(b / pp)
    if pp == 1:
        return PlanAdjustment(micro_batch=micro, pp_boundary_time=0.0,
                              ep_comm_bytes=0.0, effective_tp_degree=plan.tp_degree)
    lanes = plan.n_gpu // pp
    link = acc.inter_node_bandwidth if plan.n_nodes > 1 else acc.intra_node_bandwidth
    transfer = model.d_model * micro * model.activation_bytes / (lanes * link)
    boundary = (pp - 1) * (acc.collective_base_latency + transfer)
    return PlanAdjustment(micro_batch=micro, pp_boundary_time=boundary,
                          ep_comm_bytes=0.0, effective_tp_degree=plan.tp_degree)


def ep_adjustment(
    model: ModelArchitecture, plan: ParallelismPlan, b_micro: int
) -> PlanAdjustment:
    """All-to-all dispatch+receive volume per layer under expert parallelism.

    Worst case, each token's hidden state is transmitted to
    r = min(ep, n_active_expert) expert ranks and gathered back, so the
    volume is 2 * r * d_model * b_micro activations per layer.  It does not
    grow with the EP degree beyond r.
    """
    ep = plan.ep_degree
    if ep < 1:
        raise ValueError("ep_degree must be >= 1")
    if ep > model.n_expert:
        raise ValueError(f"ep_degree {ep} exceeds n_expert {model.n_expert}")
    if ep == 1:
        comm = 0.0
    else:
        r = min(ep, model.n_active_expert)
        comm = 2.0 * r * model.d_model * b_micro * model.activation_bytes
    return PlanAdjustment(micro_batch=b_micro, pp_boundary_time=0.0,
                          ep_comm_bytes=comm, effective_tp_degree=plan.tp_degree)
