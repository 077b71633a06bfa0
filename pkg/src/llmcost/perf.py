"""Per-configuration forward-pass cost model.

For a concrete (model, workload, plan, accelerator) tuple this module
computes the bytes read from HBM, the FLOP executed, the bytes moved over
NVLink/network for collectives, the collective and kernel launch latencies,
and assembles them into a :class:`LatencyBreakdown`:

    token latency = collective latency + kernel launches
                  + network bandwidth time + pipeline boundary time
                  + max(memory time, arithmetic time)

Memory reads and arithmetic overlap (the slower wins); communication is
conservatively not overlapped with either.  Sustained-efficiency factors
from the accelerator spec apply to compute and HBM bandwidth here (unlike
the raw-spec closed forms in :mod:`llmcost.roofline`).

Collective latency follows a tree all-reduce fit

    t_reduce = base + per_rank * (ranks/nodes - 1) + tree_step * log2(nodes)

evaluated at sqrt(G) ranks across sqrt(nodes) participating nodes for a
group of G devices, since weight matrices are sliced near-evenly along both
dimensions at scale and each all-reduce spans one slicing dimension.  The
same square-root participant counts scale the all-reduce read volume
(reducing X bytes across R ranks reads 2*X*(R-1) bytes).

Pipeline parallelism is modeled on the token's critical path: each of the
``pp`` stages holds 1/pp of the layers on n_gpu/pp devices, so per-token
weight-read time loses the factor-pp aggregation that tensor parallelism
would provide, while batch-linear terms (activations, FLOP, collective
volume) are unaffected by the micro-batch slicing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Optional

from .catalog import AcceleratorSpec, MLA_ATTENTION, ModelArchitecture
from .parallelism import ParallelismPlan, ep_adjustment, pp_adjustment
from .roofline import FLOP_PER_PARAM, default_n_reduce

ATTENTION_FLOP_FACTOR = 4.0  # QK inner products + value accumulation, fwd pass


@dataclass(frozen=True)
class Workload:
    """One serving operating point: context per request, requests per batch."""

    context_length: float = 0.0
    batch_size: int = 1
    demand_cap: Optional[float] = None   # total tokens/s across all users

    def __post_init__(self) -> None:
        if self.context_length < 0:
            raise ValueError("context_length must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.demand_cap is not None and self.demand_cap <= 0:
            raise ValueError("demand_cap must be positive when set")


@dataclass(frozen=True)
class LatencyBreakdown:
    """Per-token time split and derived cost for one configuration.

    Components sum exactly to ``token_latency`` (memory and arithmetic enter
    through their max).  Infeasible configurations carry infinite latency.
    """

    memory_time: float
    arithmetic_time: float
    collective_latency_time: float
    kernel_launch_time: float
    network_bandwidth_time: float
    pp_boundary_time: float
    token_latency: float
    gpu_seconds_per_token: float
    cost_per_million_tokens: float
    feasible: bool

    def to_record(self) -> Dict[str, float]:
        """Flat record with SI units (seconds, USD) for CSV/JSON emitters."""
        return {
            "memory_time_s": self.memory_time,
            "arithmetic_time_s": self.arithmetic_time,
            "collective_latency_time_s": self.collective_latency_time,
            "kernel_launch_time_s": self.kernel_launch_time,
            "network_bandwidth_time_s": self.network_bandwidth_time,
            "pp_boundary_time_s": self.pp_boundary_time,
            "token_latency_s": self.token_latency,
            "gpu_seconds_per_token": self.gpu_seconds_per_token,
            "cost_per_million_tokens_usd": self.cost_per_million_tokens,
            "feasible": self.feasible,
        }


def _infeasible() -> LatencyBreakdown:
    inf = math.inf
    return LatencyBreakdown(
        memory_time=inf, arithmetic_time=inf, collective_latency_time=inf,
        kernel_launch_time=inf, network_bandwidth_time=inf, pp_boundary_time=inf,
        token_latency=inf, gpu_seconds_per_token=inf, cost_per_million_tokens=inf,
        feasible=False,
    )


# ---------------------------------------------------------------------
# Parameter, FLOP and byte accounting
# ---------------------------------------------------------------------

def active_params(model: ModelArchitecture) -> float:
    """Parameters multiplied per token: feedforward scaled by 1/sparsity."""
    return (
        model.n_attention_params
        + model.n_feedforward_params / model.sparsity
        + model.n_unembedding_params
    )


def expected_params_read(model: ModelArchitecture, b: int) -> float:
    """Expected parameters read per forward pass at batch size b.

    Under uniform independent routing an expert sees no token of the batch
    with probability (1 - 1/s)^b, so the feedforward stack contributes a
    1 - (1 - 1/s)^b fraction of its weights on average.
    """
    if b < 1:
        raise ValueError("batch size must be >= 1")
    inactive = (1.0 - 1.0 / model.sparsity) ** b
    return (
        model.n_attention_params
        + (1.0 - inactive) * model.n_feedforward_params
        + model.n_unembedding_params
    )


def attention_flop(model: ModelArchitecture, l_input: float, b: float) -> float:
    """Decode-attention arithmetic against l_input cached positions.

    Latent-attention models pay the decode-time cost at the latent width
    rather than the head width (the low-rank factors are absorbed into the
    query and output projections).
    """
    width = model.d_latent if model.attention_variant == MLA_ATTENTION else model.d_head
    return ATTENTION_FLOP_FACTOR * model.n_layers * model.n_head * width * l_input * b


def kv_elements(model: ModelArchitecture, l_input: float, b: float) -> float:
    """Cached activations per decode step (keys and values both counted)."""
    if model.attention_variant == MLA_ATTENTION:
        per_position = model.d_latent
    else:
        per_position = 2 * model.n_head // model.attention_group_size * model.d_head
    return per_position * model.n_layers * l_input * b


def kv_cache_bytes(model: ModelArchitecture, l_input: float, b: float) -> float:
    return kv_elements(model, l_input, b) * model.activation_bytes


def qkv_output_elements(model: ModelArchitecture) -> float:
    """Per-token entries of the fused query/key/value projection output."""
    if model.attention_variant == MLA_ATTENTION:
        return model.n_head * model.d_head + model.d_latent
    return (1.0 + 2.0 / model.attention_group_size) * model.n_head * model.d_head


def matmul_io_elements(model: ModelArchitecture, b: float) -> float:
    """Matmul inputs and outputs touched per decode step (activations)."""
    ff_width = model.d_ff * model.n_active_expert
    per_token = (
        2 * model.d_model
        + qkv_output_elements(model)
        + model.n_head * model.d_head
        + 2 * model.d_model
        + 2 * ff_width
    )
    return model.n_layers * b * per_token


def total_flop(model: ModelArchitecture, workload: Workload) -> float:
    """Pointwise (weight) FLOP plus attention FLOP for one decode step."""
    pointwise = FLOP_PER_PARAM * active_params(model) * workload.batch_size
    return pointwise + attention_flop(model, workload.context_length, workload.batch_size)


def bytes_read(model: ModelArchitecture, workload: Workload) -> float:
    """HBM bytes per decode step: weights once, activations at their width.

    The embedding table is charged to parameter reads alongside the
    unembedding matrix; it is excluded from the multiplied-parameter count.
    """
    b, l_input = workload.batch_size, workload.context_length
    weight_term = (expected_params_read(model, b) + model.n_embedding_params) * model.weight_bytes_per_param
    activation_term = (kv_elements(model, l_input, b) + matmul_io_elements(model, b)) * model.activation_bytes
    return weight_term + activation_term


def bytes_reduced(model: ModelArchitecture, b: float) -> float:
    """All-reduce volume per decode step under pure tensor parallelism.

    One all-reduce per sequential matmul: qkv output, attention output,
    feedforward up (twice for gated activations) and feedforward down.
    """
    ff_width = model.d_ff * model.n_active_expert
    ff_terms = 2 * ff_width if model.ff_matrix_count == 3 else ff_width
    per_token = qkv_output_elements(model) + 2 * model.d_model + ff_terms
    return per_token * b * model.n_layers * model.activation_bytes


def _attention_bytes_reduced(model: ModelArchitecture, b: float) -> float:
    per_token = qkv_output_elements(model) + model.d_model
    return per_token * b * model.n_layers * model.activation_bytes


# ---------------------------------------------------------------------
# Communication model
# ---------------------------------------------------------------------

def nccl_allreduce_latency(acc: AcceleratorSpec, n_ranks: float, n_nodes: float) -> float:
    """Tree all-reduce launch-to-finish latency for explicit participant counts."""
    return (
        acc.collective_base_latency
        + acc.per_rank_latency * (n_ranks / n_nodes - 1.0)
        + acc.per_tree_step_latency * math.log2(n_nodes)
    )


def collective_latency(plan: ParallelismPlan, acc: AcceleratorSpec) -> float:
    """Latency of one all-reduce for an instance, sqrt-participant counts."""
    return nccl_allreduce_latency(acc, math.sqrt(plan.n_gpu), math.sqrt(plan.n_nodes))


def all_reduce_read_time(tensor_bytes: float, n_ranks: float, per_gpu_bandwidth: float) -> float:
    """Bandwidth time to all-reduce one tensor across explicit ranks.

    Reducing X bytes across R participants reads 2*X*(R-1) bytes in total,
    spread over the R devices' links.
    """
    if n_ranks <= 1:
        return 0.0
    return 2.0 * tensor_bytes * (n_ranks - 1.0) / (n_ranks * per_gpu_bandwidth)


def _stage_geometry(plan: ParallelismPlan, acc: AcceleratorSpec) -> tuple[int, int]:
    stage_gpus = plan.n_gpu // plan.pp_degree
    stage_nodes = max(1, math.ceil(stage_gpus / acc.node_size))
    return stage_gpus, stage_nodes


def _comm_times(
    model: ModelArchitecture,
    b: int,
    b_micro: int,
    plan: ParallelismPlan,
    acc: AcceleratorSpec,
) -> tuple[float, float]:
    """(collective latency, network bandwidth) seconds for one token.

    Within a pipeline stage, attention is tensor-parallel across the whole
    stage group; for MoE plans the feedforward all-reduces are replaced by
    two all-to-alls across r = min(ep, n_active_expert) expert groups,
    priced with the same tree-latency fit at literal rank counts.
    """
    stage_gpus, stage_nodes = _stage_geometry(plan, acc)
    if stage_gpus <= 1:
        return 0.0, 0.0

    n_red = default_n_reduce(model)
    ll_bw = acc.ll_intra_node_bandwidth
    t_reduce = nccl_allreduce_latency(acc, math.sqrt(stage_gpus), math.sqrt(stage_nodes))
    inter_factor = 2.0 * (math.sqrt(stage_nodes) - 1.0)
    intra_factor = 2.0 * (math.sqrt(stage_gpus / stage_nodes) - 1.0) * math.sqrt(stage_nodes)

    def tp_bandwidth_time(volume: float) -> float:
        inter = inter_factor * volume / (plan.n_gpu * acc.inter_node_bandwidth)
        intra = intra_factor * volume / (plan.n_gpu * ll_bw)
        return inter + intra

    if plan.ep_degree <= 1:
        latency = model.n_layers * n_red * t_reduce
        bandwidth = tp_bandwidth_time(bytes_reduced(model, b))
        return latency, bandwidth

    # Expert-parallel feedforward: half the sequential collectives stay
    # attention all-reduces over the stage group, half become all-to-alls.
    attn_colls = n_red // 2
    ff_colls = n_red - attn_colls
    r = min(plan.ep_degree, model.n_active_expert)
    group_width = plan.tp_degree  # devices per expert group
    nodes_r = max(1, min(r, math.ceil(r * group_width / acc.node_size)))
    t_a2a = nccl_allreduce_latency(acc, r, nodes_r) if r > 1 else acc.collective_base_latency
    latency = model.n_layers * (attn_colls * t_reduce + ff_colls * t_a2a)

    bandwidth = tp_bandwidth_time(_attention_bytes_reduced(model, b))
    ep_bytes = ep_adjustment(model, plan, b_micro).ep_comm_bytes * model.n_layers * plan.pp_degree
    groups_per_node = max(1, acc.node_size // group_width)
    intra_share = min(r, groups_per_node) / r
    bandwidth += ep_bytes * intra_share / (plan.n_gpu * ll_bw)
    bandwidth += ep_bytes * (1.0 - intra_share) / (plan.n_gpu * acc.inter_node_bandwidth)
    return latency, bandwidth


def network_comm_time(
    model: ModelArchitecture,
    workload: Workload,
    plan: ParallelismPlan,
    acc: AcceleratorSpec,
) -> float:
    """Total per-token communication time: collective latency + bandwidth."""
    if plan.n_gpu == 1:
        return 0.0
    b_micro = math.ceil(workload.batch_size / plan.pp_degree)
    latency, bandwidth = _comm_times(model, workload.batch_size, b_micro, plan, acc)
    return latency + bandwidth


# ---------------------------------------------------------------------
# Token latency assembly
# ---------------------------------------------------------------------

def _validate_plan(model: ModelArchitecture, plan: ParallelismPlan, acc: AcceleratorSpec) -> None:
    if plan.ep_degree > model.n_expert:
        raise ValueError(f"plan ep={plan.ep_degree} exceeds n_expert={model.n_expert}")
    if plan.pp_degree > model.n_layers:
        raise ValueError(f"plan pp={plan.pp_degree} exceeds n_layers={model.n_layers}")
    if plan.n_nodes < math.ceil(plan.n_gpu / acc.node_size):
        raise ValueError("plan n_nodes below ceil(n_gpu / node_size)")


def token_latency(
    model: ModelArchitecture,
    workload: Workload,
    plan: ParallelismPlan,
    acc: AcceleratorSpec,
    hourly_price: Optional[float] = None,
    verify_expansion: int = 1,
) -> LatencyBreakdown:
    """Assemble the full latency breakdown for one configuration.

    ``verify_expansion`` > 1 models a verification forward pass over that
    many positions per request (speculative decoding): arithmetic and
    activation traffic scale with it, weights are still read once, and the
    per-layer collective schedule is unchanged.

    Configurations whose weights plus KV cache exceed the instance's
    aggregate HBM, or whose batch cannot fill the pipeline, come back
    infeasible with infinite latency rather than raising.
    """
    _validate_plan(model, plan, acc)
    b, l_input = workload.batch_size, workload.context_length
    price = acc.hourly_price if hourly_price is None else hourly_price
    gamma = verify_expansion

    weight_store = model.total_params * model.weight_bytes_per_param
    if weight_store + kv_cache_bytes(model, l_input, b) > plan.n_gpu * acc.hbm_capacity:
        return _infeasible()
    if b < plan.pp_degree:
        return _infeasible()

    pp = plan.pp_degree
    b_micro = math.ceil(b / pp)

    # One pipeline stage reads its weight shard per micro-batch with only
    # stage_gpus devices' bandwidth behind it; activation and FLOP terms are
    # batch-linear so the micro-batch slicing cancels across stages.
    weight_read = (expected_params_read(model, b_micro) + model.n_embedding_params) \
        * model.weight_bytes_per_param
    activation_read = (kv_elements(model, l_input, b) + matmul_io_elements(model, b)) \
        * model.activation_bytes * gamma
    bandwidth = acc.memory_bandwidth()
    memory_time = (weight_read * pp + activation_read) / (plan.n_gpu * bandwidth)

    compute = acc.flops(model.weight_precision)
    arithmetic_time = gamma * total_flop(model, workload) / (plan.n_gpu * compute)

    coll_latency, net_bandwidth = _comm_times(model, b, b_micro, plan, acc)
    kernel_time = model.n_layers * default_n_reduce(model) * acc.kernel_launch_latency
    boundary = pp_adjustment(model, plan, acc, b).pp_boundary_time

    latency = (
        coll_latency + kernel_time + net_bandwidth + boundary
        + max(memory_time, arithmetic_time)
    )
    gpu_seconds = latency * plan.n_gpu / b
    return LatencyBreakdown(
        memory_time=memory_time,
        arithmetic_time=arithmetic_time,
        collective_latency_time=coll_latency,
        kernel_launch_time=kernel_time,
        network_bandwidth_time=net_bandwidth,
        pp_boundary_time=boundary,
        token_latency=latency,
        gpu_seconds_per_token=gpu_seconds,
        cost_per_million_tokens=gpu_seconds * price / 3600.0 * 1e6,
        feasible=True,
    )


# ---------------------------------------------------------------------
# Long-context bounds
# ---------------------------------------------------------------------

def long_context_arithmetic_intensity_bound(model: ModelArchitecture) -> float:
    """Upper bound on FLOP per HBM byte once cache reads dominate.

    Each cached key/value byte pair supports at most 2g FLOP of attention
    arithmetic, so the bound is 2g / bytes-per-activation.  Latent-attention
    models are rejected: their long-context decode is arithmetic-bound and
    the cached-bytes argument does not apply.
    """
    if model.attention_variant == MLA_ATTENTION:
        raise ValueError("arithmetic-intensity bound applies to standard attention only")
    return 2.0 * model.attention_group_size / model.activation_bytes


def kv_read_cost_floor(
    model: ModelArchitecture,
    acc: AcceleratorSpec,
    l_input: float,
    hourly_price: Optional[float] = None,
) -> float:
    """USD per million tokens spent just re-reading the cache each step.

    Uses raw HBM bandwidth: this is a hard floor no efficiency assumption
    can beat, and it binds regardless of batch size because the cache scales
    with the batch.
    """
    price = acc.hourly_price if hourly_price is None else hourly_price
    per_token_bytes = kv_cache_bytes(model, l_input, 1)
    return per_token_bytes * 1e6 * price / (acc.hbm_bandwidth * 3600.0)
