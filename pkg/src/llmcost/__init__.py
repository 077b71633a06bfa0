"""Analytical model of LLM serving speed and cost.

Computes per-token latency and USD per million tokens for a Transformer on
a given accelerator under a chosen parallelism plan and batch size, and
searches that space for Pareto frontiers of serial speed versus cost,
with optional speculative decoding.
"""

__version__ = "0.1.0"

from .catalog import (
    AcceleratorSpec,
    CatalogError,
    ModelArchitecture,
    SpecParseError,
    SpecValidationError,
    UnknownPresetError,
    load_spec,
    preset,
    preset_names,
    save_spec,
)
from .parallelism import ParallelismPlan, PlanAdjustment, enumerate_plans
from .perf import (
    LatencyBreakdown,
    Workload,
    active_params,
    attention_flop,
    bytes_read,
    bytes_reduced,
    collective_latency,
    expected_params_read,
    kv_cache_bytes,
    kv_read_cost_floor,
    long_context_arithmetic_intensity_bound,
    network_comm_time,
    token_latency,
    total_flop,
)
from .roofline import (
    ToyResult,
    cost_at_minimum_latency,
    critical_batch_size,
    minimum_token_latency,
    optimal_instance_size,
    single_device,
    sqrt_scaling_projection,
    toy_multi_device,
)
from .specdec import (
    LogprobPair,
    SpecDecConfig,
    estimate_alpha,
    expected_tokens_per_iteration,
    optimal_gamma,
    spec_frontier_point,
    spec_latency,
)
from .optimizer import (
    NoFeasiblePointError,
    ParetoPoint,
    SearchGrid,
    compare_accelerators,
    default_grid,
    max_tokens_per_second,
    pareto_frontier,
    sweep,
    utility_optimal_point,
)

__all__ = [name for name in dir() if not name.startswith("_")]
