"""Closed-form serving-speed analysis for dense models at short context.

These are deliberately coarse models: attention, MoE and network-bandwidth
terms are ignored, the device count is treated as a real number, and raw
(efficiency 1.0) hardware rates are used throughout so the closed forms
stay exactly invertible.  They serve as an oracle layer for the full
per-configuration model in :mod:`llmcost.perf`.

With N parameters at p bytes each, batch b, device bandwidth B and compute C:

    single-device latency   max(p*N/B, 2*N*b/C)
    critical batch size     b* = p*C/(2*B)            (the two branches meet)
    multi-device latency    L*R*t_hop*2*(sqrt(G)-1) + max(p*N/(G*B), 2*N*b/(G*C))

where L is layer count, R the sequential collectives per layer, t_hop the
per-hop latency and G the instance size.  Minimizing over G gives

    G* = max(p*N / (L*R*t_hop*B), 1) ** (2/3)
    min latency = 3*(L*R*t_hop)**(2/3) * (p*N/B)**(1/3) - 2*L*R*t_hop   (G* > 1)
                = p*N/B                                                 (otherwise)

and the cost of running at G* approaches three times the arithmetic floor
2*N/C as G* grows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .catalog import AcceleratorSpec, ModelArchitecture

FLOP_PER_PARAM = 2.0  # one multiply-accumulate per weight per token

SEQUENTIAL_COLLECTIVES = 4          # qkv, attention output, ff up, ff down
PARALLEL_BLOCK_COLLECTIVES = 2      # attention and feedforward overlap


@dataclass(frozen=True)
class ToyResult:
    token_latency: float            # seconds between tokens for one request
    gpu_seconds_per_token: float    # device-time cost of one token
    optimal_instance_size: float    # real-valued latency-minimizing device count
    critical_batch_size: float


def default_n_reduce(model: ModelArchitecture) -> int:
    return PARALLEL_BLOCK_COLLECTIVES if model.parallel_attention else SEQUENTIAL_COLLECTIVES


def critical_batch_size(
    acc: AcceleratorSpec, precision: int, apply_efficiency: bool = False
) -> float:
    """Batch size at which parameter-read time equals arithmetic time."""
    p_bytes = precision / 8.0
    compute = acc.flops(precision, apply_efficiency=apply_efficiency)
    bandwidth = acc.memory_bandwidth(apply_efficiency=apply_efficiency)
    return p_bytes * compute / (bandwidth * FLOP_PER_PARAM)


def _check_dense(model: ModelArchitecture) -> None:
    if model.sparsity != 1.0:
        raise ValueError(f"{model.name}: closed-form analysis covers dense models only")


def _raw_rates(model: ModelArchitecture, acc: AcceleratorSpec) -> tuple[float, float, float]:
    """(bytes per weight, raw FLOP/s, raw bytes/s) for the model's weight width."""
    p_bytes = model.weight_precision / 8.0
    compute = acc.flops(model.weight_precision, apply_efficiency=False)
    bandwidth = acc.memory_bandwidth(apply_efficiency=False)
    return p_bytes, compute, bandwidth


def single_device(model: ModelArchitecture, acc: AcceleratorSpec, b: float) -> ToyResult:
    """Roofline for one device: reads and arithmetic overlap, the slower wins."""
    _check_dense(model)
    if b < 1:
        raise ValueError("batch size must be >= 1 on a single device")
    p_bytes, compute, bandwidth = _raw_rates(model, acc)
    n = model.total_params
    latency = max(p_bytes * n / bandwidth, FLOP_PER_PARAM * n * b / compute)
    return ToyResult(
        token_latency=latency,
        gpu_seconds_per_token=latency / b,
        optimal_instance_size=1.0,
        critical_batch_size=critical_batch_size(acc, model.weight_precision),
    )


def toy_multi_device(
    model: ModelArchitecture,
    acc: AcceleratorSpec,
    b: float,
    n_gpu: float,
    t_hop: float,
    n_reduce: int | None = None,
) -> ToyResult:
    """Tensor-parallel instance with per-hop latency and infinite bandwidth.

    The collective latency term assumes ring-style communication across the
    sqrt(n_gpu) ranks that share each matrix slice: 2*(sqrt(n_gpu)-1) hops
    per collective.  ``n_gpu`` may be any real >= 1.
    """
    _check_dense(model)
    if n_gpu < 1:
        raise ValueError("n_gpu must be >= 1")
    if b < 0:
        raise ValueError("batch size must be >= 0")
    n_red = default_n_reduce(model) if n_reduce is None else n_reduce
    p_bytes, compute, bandwidth = _raw_rates(model, acc)
    n = model.total_params
    hop_term = model.n_layers * n_red * t_hop * 2.0 * (math.sqrt(n_gpu) - 1.0)
    roofline = max(
        p_bytes * n / (n_gpu * bandwidth),
        FLOP_PER_PARAM * n * b / (n_gpu * compute),
    )
    latency = hop_term + roofline
    return ToyResult(
        token_latency=latency,
        gpu_seconds_per_token=latency * n_gpu / b if b > 0 else math.inf,
        optimal_instance_size=optimal_instance_size(model, acc, t_hop, n_red),
        critical_batch_size=critical_batch_size(acc, model.weight_precision),
    )


def optimal_instance_size(
    model: ModelArchitecture,
    acc: AcceleratorSpec,
    t_hop: float,
    n_reduce: int | None = None,
) -> float:
    """Real-valued device count minimizing toy latency, clamped at 1."""
    _check_dense(model)
    n_red = default_n_reduce(model) if n_reduce is None else n_reduce
    p_bytes, _, bandwidth = _raw_rates(model, acc)
    read_time = p_bytes * model.total_params / bandwidth
    hop_time = model.n_layers * n_red * t_hop
    return max(read_time / hop_time, 1.0) ** (2.0 / 3.0)


def minimum_token_latency(
    model: ModelArchitecture,
    acc: AcceleratorSpec,
    t_hop: float,
    n_reduce: int | None = None,
    approximate: bool = False,
) -> float:
    """Latency at the optimal instance size (small-batch limit).

    ``approximate=True`` drops the constant -2*L*R*t_hop term, which is a
    good approximation once the optimal instance size is well above 1.
    """
    _check_dense(model)
    n_red = default_n_reduce(model) if n_reduce is None else n_reduce
    p_bytes, _, bandwidth = _raw_rates(model, acc)
    read_time = p_bytes * model.total_params / bandwidth
    hop_time = model.n_layers * n_red * t_hop
    if optimal_instance_size(model, acc, t_hop, n_red) <= 1.0:
        return read_time
    latency = 3.0 * hop_time ** (2.0 / 3.0) * read_time ** (1.0 / 3.0)
    if not approximate:
        latency -= 2.0 * hop_time
    return latency


@dataclass(frozen=True)
class MinimumLatencyCost:
    """GPU-seconds per token when running at the latency-optimal instance size."""

    exact: float                      # N*/b* times the minimum latency
    asymptotic: float                 # 3 * 2N/C, the large-instance limit
    ratio_to_arithmetic_floor: float  # exact / (2N/C)


def cost_at_minimum_latency(
    model: ModelArchitecture,
    acc: AcceleratorSpec,
    t_hop: float,
    n_reduce: int | None = None,
) -> MinimumLatencyCost:
    _check_dense(model)
    n_red = default_n_reduce(model) if n_reduce is None else n_reduce
    n_star = optimal_instance_size(model, acc, t_hop, n_red)
    if n_star <= 1.0:
        raise ValueError("cost_at_minimum_latency requires an optimal instance size > 1")
    _, compute, _ = _raw_rates(model, acc)
    b_star = critical_batch_size(acc, model.weight_precision)
    exact = n_star / b_star * minimum_token_latency(model, acc, t_hop, n_red)
    floor = FLOP_PER_PARAM * model.total_params / compute
    return MinimumLatencyCost(
        exact=exact,
        asymptotic=3.0 * floor,
        ratio_to_arithmetic_floor=exact / floor,
    )


def sqrt_scaling_projection(ref_params: float, ref_speed: float, target_params: float) -> float:
    """Project serving speed to a new dense size assuming latency ~ sqrt(params)."""
    if ref_params <= 0 or target_params <= 0:
        raise ValueError("parameter counts must be positive")
    return ref_speed * math.sqrt(ref_params / target_params)
