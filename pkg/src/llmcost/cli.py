"""Command-line front end.

Subcommands::

    analyze       latency/cost breakdown for one configuration (or --toy closed forms)
    frontier      sweep the grid, write frontier CSV + JSON + SVG + manifest
    compare-gpus  overlay one frontier per accelerator
    specdec       speculative-decoding report for a target/draft pair
    presets       list shipped spec names

Exit codes: 0 success, 2 input error, 3 empty feasible set.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Dict, List, Optional

from . import __version__
from .catalog import AcceleratorSpec, CatalogError, ModelArchitecture, resolve
from .parallelism import ParallelismPlan, enumerate_plans, n_nodes_for
from .perf import (
    LatencyBreakdown,
    Workload,
    kv_cache_bytes,
    kv_read_cost_floor,
    token_latency,
)
from .roofline import (
    critical_batch_size,
    minimum_token_latency,
    optimal_instance_size,
    single_device,
)
from .optimizer import (
    NoFeasiblePointError,
    SearchGrid,
    compare_accelerators,
    default_grid,
    max_tokens_per_second,
    pareto_frontier,
    sweep,
    utility_optimal_point,
)
from .report import (
    RunManifest,
    plot_frontiers,
    point_record,
    spec_hash,
    write_frontier_csv,
    write_frontier_json,
)
from .specdec import SpecDecConfig, estimate_alpha, read_logprob_records

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_EMPTY = 3

DEFAULT_PREF_ALPHA = 3.0


def _add_model_gpu_args(parser: argparse.ArgumentParser, gpu_multiple: bool = False) -> None:
    parser.add_argument("--model", required=True,
                        help="model preset name or spec file path")
    if gpu_multiple:
        parser.add_argument("--gpu", action="append", required=True,
                            help="accelerator preset name or spec file (repeatable)")
    else:
        parser.add_argument("--gpu", required=True,
                            help="accelerator preset name or spec file path")
    parser.add_argument("--weight-bits", type=int, default=None,
                        help="override the model's weight precision")
    parser.add_argument("--act-bits", type=int, default=None,
                        help="override the model's activation precision")
    parser.add_argument("--price", type=float, default=None,
                        help="override hourly USD price per device")


def _load_model(args) -> ModelArchitecture:
    model = resolve(args.model, "model")
    if args.weight_bits or args.act_bits:
        model = model.with_precisions(args.weight_bits, args.act_bits)
    return model


def _precision_notes(model: ModelArchitecture, accs: List[AcceleratorSpec]) -> List[str]:
    notes = []
    for acc in accs:
        resolved = acc.resolve_arithmetic_precision(model.weight_precision)
        if resolved != model.weight_precision:
            notes.append(
                f"{acc.name}: no {model.weight_precision}-bit tensor rate; arithmetic runs "
                f"at {resolved}-bit while weights are read at {model.weight_precision}-bit"
            )
    return notes


def _grid(args) -> SearchGrid:
    return default_grid(max_gpus=args.max_gpus, max_batch=args.max_batch)


def _spec_config(args, require: bool = False) -> Optional[SpecDecConfig]:
    draft_arg = getattr(args, "spec_draft", None)
    if draft_arg is None:
        if require:
            raise CatalogError("--spec-draft is required for this command")
        return None
    draft = resolve(draft_arg, "model")
    return SpecDecConfig(draft=draft, alpha=args.spec_alpha)


def _breakdown_lines(bd: LatencyBreakdown, plan: ParallelismPlan, batch: int) -> List[str]:
    rec = bd.to_record()
    lines = [f"configuration: {plan.describe()}, batch {batch}"]
    for key in ("memory_time_s", "arithmetic_time_s", "collective_latency_time_s",
                "kernel_launch_time_s", "network_bandwidth_time_s", "pp_boundary_time_s"):
        lines.append(f"  {key:<28} {rec[key]:.6e}")
    lines.append(f"  {'token_latency_s':<28} {rec['token_latency_s']:.6e}")
    lines.append(f"  {'tokens_per_second':<28} {1.0 / bd.token_latency:.2f}")
    lines.append(f"  {'gpu_seconds_per_token':<28} {rec['gpu_seconds_per_token']:.6e}")
    lines.append(f"  {'cost_per_million_tokens_usd':<28} {rec['cost_per_million_tokens_usd']:.4f}")
    return lines


def cmd_analyze(args) -> int:
    model = _load_model(args)
    acc = resolve(args.gpu, "accelerator")

    if args.toy:
        b_star = critical_batch_size(acc, model.weight_precision)
        n_star = optimal_instance_size(model, acc, args.t_hop)
        min_latency = minimum_token_latency(model, acc, args.t_hop)
        payload = {
            "model": model.name,
            "gpu": acc.name,
            "critical_batch_size": b_star,
            "optimal_instance_size": n_star,
            "minimum_token_latency_s": min_latency,
            "max_tokens_per_second": 1.0 / min_latency,
            "single_device_latency_s": single_device(model, acc, 1).token_latency,
        }
        if args.json:
            print(json.dumps(payload, indent=2, sort_keys=True))
        else:
            for key, value in payload.items():
                print(f"{key:<28} {value}")
        return EXIT_OK

    wl = Workload(context_length=args.context, batch_size=args.batch)
    if args.tp or args.pp or args.ep:
        tp, pp, ep = args.tp or 1, args.pp or 1, args.ep or 1
        if tp * pp * ep != args.n_gpu:
            raise CatalogError(f"tp*pp*ep = {tp * pp * ep} must equal --n-gpu = {args.n_gpu}")
        plans = [ParallelismPlan(n_gpu=args.n_gpu, n_nodes=n_nodes_for(args.n_gpu, acc),
                                 tp_degree=tp, pp_degree=pp, ep_degree=ep)]
    else:
        plans = enumerate_plans(model, acc, args.n_gpu)

    evaluated = [(plan, token_latency(model, wl, plan, acc, hourly_price=args.price))
                 for plan in plans]
    feasible = [(plan, bd) for plan, bd in evaluated if bd.feasible]
    if not feasible:
        weights = model.total_params * model.weight_bytes_per_param
        kv = kv_cache_bytes(model, wl.context_length, wl.batch_size)
        budget = args.n_gpu * acc.hbm_capacity
        print(
            f"infeasible: weights {weights / 1e9:.1f} GB + KV cache {kv / 1e9:.1f} GB "
            f"exceed {budget / 1e9:.1f} GB aggregate HBM on {args.n_gpu} x {acc.name} "
            f"(or batch {wl.batch_size} cannot fill the pipeline)",
            file=sys.stderr,
        )
        return EXIT_EMPTY
    plan, bd = min(feasible, key=lambda pb: pb[1].token_latency)
    if args.json:
        payload = {"model": model.name, "gpu": acc.name, "batch": wl.batch_size,
                   "context": wl.context_length,
                   "plan": {"n_gpu": plan.n_gpu, "n_nodes": plan.n_nodes,
                            "tp": plan.tp_degree, "pp": plan.pp_degree, "ep": plan.ep_degree},
                   "breakdown": bd.to_record()}
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        print(f"{model.name} on {acc.name}")
        print("\n".join(_breakdown_lines(bd, plan, wl.batch_size)))
    return EXIT_OK


def _write_outputs(out_dir: Path, stem: str, named_frontiers, marked, manifest_cmd,
                   inputs, grid, settings, notes) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{stem}.csv"
    json_path = out_dir / f"{stem}.json"
    svg_path = out_dir / f"{stem}.svg"
    manifest_path = out_dir / f"{stem}.manifest.json"

    combined = [p for pts in named_frontiers.values() for p in pts]
    write_frontier_csv(csv_path, combined)
    # Output paths are stored relative to the manifest so identical runs into
    # different directories stay byte-identical.
    manifest = RunManifest(
        command=manifest_cmd,
        inputs=inputs,
        grid=grid.to_dict(),
        outputs=[csv_path.name, json_path.name, svg_path.name, manifest_path.name],
        settings=settings,
        notes=notes,
    )
    write_frontier_json(json_path, manifest, named_frontiers)
    plot_frontiers(svg_path, named_frontiers, marked=marked)
    manifest.write(manifest_path)
    for path in (csv_path, json_path, svg_path, manifest_path):
        print(path)


def cmd_frontier(args) -> int:
    model = _load_model(args)
    acc = resolve(args.gpu, "accelerator")
    grid = _grid(args)
    spec = _spec_config(args)
    wl = Workload(context_length=args.context, batch_size=1, demand_cap=args.demand)

    points = sweep(model, acc, workload=wl, grid=grid, spec=spec, hourly_price=args.price)
    frontier = pareto_frontier(points)
    marked = {}
    settings: Dict[str, object] = {
        "context_length": args.context,
        "demand_cap": args.demand,
        "hourly_price_usd": args.price if args.price is not None else acc.hourly_price,
        "weight_precision_bits": model.weight_precision,
        "activation_precision_bits": model.activation_precision,
        "spec_draft": getattr(args, "spec_draft", None),
        "spec_alpha": args.spec_alpha if getattr(args, "spec_draft", None) else None,
    }
    if args.pref_alpha is not None:
        best = utility_optimal_point(frontier, args.pref_alpha)
        marked[model.name] = best
        settings["pref_alpha"] = args.pref_alpha
        settings["utility_optimal_point"] = point_record(best)

    inputs = {model.name: spec_hash(model), acc.name: spec_hash(acc)}
    if spec is not None:
        inputs[spec.draft.name] = spec_hash(spec.draft)
    notes = _precision_notes(model, [acc])
    if args.context > 0:
        floor = kv_read_cost_floor(model, acc, args.context, hourly_price=args.price)
        settings["kv_read_cost_floor_usd_per_million"] = floor
    _write_outputs(Path(args.out_dir), "frontier", {model.name: frontier}, marked,
                   "frontier", inputs, grid, settings, notes)
    return EXIT_OK


def cmd_compare_gpus(args) -> int:
    model = _load_model(args)
    accs = [resolve(g, "accelerator") for g in args.gpu]
    grid = _grid(args)
    spec = _spec_config(args)
    wl = Workload(context_length=args.context, batch_size=1, demand_cap=args.demand)
    frontiers = compare_accelerators(model, accs, grid=grid, workload=wl, spec=spec,
                                     hourly_price=args.price)
    if all(not pts for pts in frontiers.values()):
        print("no feasible configuration on any accelerator", file=sys.stderr)
        return EXIT_EMPTY
    inputs = {model.name: spec_hash(model)}
    inputs.update({acc.name: spec_hash(acc) for acc in accs})
    settings = {
        "context_length": args.context,
        "demand_cap": args.demand,
        "weight_precision_bits": model.weight_precision,
        "max_speeds": {name: (max((p.tokens_per_second for p in pts), default=None))
                       for name, pts in frontiers.items()},
    }
    _write_outputs(Path(args.out_dir), "compare-gpus", frontiers, {},
                   "compare-gpus", inputs, grid, settings,
                   _precision_notes(model, accs))
    return EXIT_OK


def cmd_specdec(args) -> int:
    target = resolve(args.target, "model")
    if args.weight_bits or args.act_bits:
        target = target.with_precisions(args.weight_bits, args.act_bits)
    draft = resolve(args.draft, "model")
    acc = resolve(args.gpu, "accelerator")

    if args.records:
        records = read_logprob_records(args.records)
        if not records:
            raise CatalogError(f"records file {args.records} contains no log-prob pairs")
        estimate = estimate_alpha(records)
        alpha = estimate.alpha
        alpha_source = {"records": str(args.records), "n": estimate.n_records,
                        "standard_error": estimate.standard_error}
    else:
        alpha = args.alpha
        alpha_source = {"given": alpha}
        if not (0.0 < alpha < 1.0):
            raise CatalogError(f"alpha must be in (0, 1), got {alpha}")

    grid = _grid(args)
    # Estimated acceptance can hit the endpoints (e.g. identical models give
    # exactly 1.0); report it as estimated but model with a clamped value.
    alpha_model = min(max(alpha, 1e-9), 1.0 - 1e-9)
    spec = SpecDecConfig(draft=draft, alpha=alpha_model, target=target)
    plain = max_tokens_per_second(target, acc, grid=grid,
                                  context_length=args.context, hourly_price=args.price)
    assisted = max_tokens_per_second(target, acc, spec=spec, grid=grid,
                                     context_length=args.context, hourly_price=args.price)
    payload = {
        "target": target.name,
        "draft": draft.name,
        "gpu": acc.name,
        "alpha": alpha,
        "alpha_source": alpha_source,
        "gamma": assisted.gamma,
        "without_speculation": point_record(plain),
        "with_speculation": point_record(assisted),
        "speedup": assisted.tokens_per_second / plain.tokens_per_second,
    }
    if args.json:
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        print(f"speculative decoding: {target.name} verified, {draft.name} drafting on {acc.name}")
        print(f"  acceptance probability alpha   {alpha:.4f}")
        print(f"  chosen draft length gamma      {assisted.gamma}")
        print(f"  tokens/s without speculation   {plain.tokens_per_second:.1f}"
              f"  (cost ${plain.cost_per_million_tokens:.2f}/M)")
        print(f"  tokens/s with speculation      {assisted.tokens_per_second:.1f}"
              f"  (cost ${assisted.cost_per_million_tokens:.2f}/M)")
        print(f"  speedup                        {payload['speedup']:.2f}x")
    return EXIT_OK


def cmd_presets(args) -> int:
    from .catalog import preset, preset_names

    for name in preset_names():
        spec = preset(name)
        kind = "accelerator" if isinstance(spec, AcceleratorSpec) else "model"
        print(f"{name:<18} {kind}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="llmcost",
        description="Analytical speed/cost model for serving large language models.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="breakdown for one configuration")
    _add_model_gpu_args(p)
    p.add_argument("--batch", type=int, default=1)
    p.add_argument("--context", type=float, default=0.0)
    p.add_argument("--n-gpu", type=int, default=1)
    p.add_argument("--tp", type=int, default=None)
    p.add_argument("--pp", type=int, default=None)
    p.add_argument("--ep", type=int, default=None)
    p.add_argument("--toy", action="store_true",
                   help="closed-form dense short-context analysis instead of the full model")
    p.add_argument("--t-hop", type=float, default=1e-6,
                   help="per-hop latency for --toy (seconds)")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("frontier", help="sweep and write frontier CSV/JSON/SVG")
    _add_model_gpu_args(p)
    p.add_argument("--context", type=float, default=0.0)
    p.add_argument("--demand", type=float, default=None,
                   help="total tokens/s cap across all users")
    p.add_argument("--spec-draft", default=None,
                   help="draft model preset/path enabling speculative decoding")
    p.add_argument("--spec-alpha", type=float, default=0.8)
    p.add_argument("--pref-alpha", type=float, default=None,
                   help="mark the point maximizing speed**alpha / cost")
    p.add_argument("--max-gpus", type=int, default=512)
    p.add_argument("--max-batch", type=int, default=4096)
    p.add_argument("--out-dir", default="out")
    p.set_defaults(func=cmd_frontier)

    p = sub.add_parser("compare-gpus", help="overlay frontiers for several accelerators")
    _add_model_gpu_args(p, gpu_multiple=True)
    p.add_argument("--context", type=float, default=0.0)
    p.add_argument("--demand", type=float, default=None)
    p.add_argument("--spec-draft", default=None)
    p.add_argument("--spec-alpha", type=float, default=0.8)
    p.add_argument("--max-gpus", type=int, default=512)
    p.add_argument("--max-batch", type=int, default=4096)
    p.add_argument("--out-dir", default="out")
    p.set_defaults(func=cmd_compare_gpus)

    p = sub.add_parser("specdec", help="speculative decoding report")
    p.add_argument("--target", required=True)
    p.add_argument("--draft", required=True)
    p.add_argument("--gpu", required=True)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--records", default=None,
                   help="line-delimited JSON file of {p, q} log-prob pairs")
    p.add_argument("--weight-bits", type=int, default=None)
    p.add_argument("--act-bits", type=int, default=None)
    p.add_argument("--context", type=float, default=0.0)
    p.add_argument("--price", type=float, default=None)
    p.add_argument("--max-gpus", type=int, default=64)
    p.add_argument("--max-batch", type=int, default=1)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_specdec)

    p = sub.add_parser("presets", help="list shipped model and accelerator presets")
    p.set_defaults(func=cmd_presets)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "specdec" and args.alpha is None and args.records is None:
        parser.error("specdec requires --alpha or --records")
    try:
        return args.func(args)
    except NoFeasiblePointError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_EMPTY
    except (CatalogError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
