"""Hardware and model specification catalog.

Every analysis in this package starts from two immutable specs: an
:class:`AcceleratorSpec` describing one GPU (compute rates, memory,
interconnect, collective-latency constants, rental price) and a
:class:`ModelArchitecture` describing one Transformer (dimensions,
attention variant, MoE structure, parameter decomposition, precisions).

Specs are loaded from a small JSON schema with explicit units in the
field names (bytes, seconds, FLOP/s) so files parse bit-exactly across
languages.  A set of presets ships with the package; users can point
``--model``/``--gpu`` at their own files, or override the preset
directory with the ``LLMCOST_PRESET_DIR`` environment variable.

Parameter decompositions are derived from the architecture dimensions
when possible and may be overridden per spec file (useful for
architectures whose feedforward stack is not uniform).
"""

from __future__ import annotations

import dataclasses
import json
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Optional

SCHEMA_VERSION = 1
PRESET_ENV_VAR = "LLMCOST_PRESET_DIR"
_PRESET_DIR = Path(__file__).parent / "presets"

STANDARD_ATTENTION = "standard"
MLA_ATTENTION = "mla"


class CatalogError(Exception):
    """Base class for spec loading/validation failures."""


class SpecParseError(CatalogError):
    """The file could not be read or parsed as the documented schema."""


class SpecValidationError(CatalogError):
    """A parsed spec violates one of its invariants."""


class UnknownPresetError(CatalogError):
    """The requested preset name is not in the shipped catalog."""


def _require_positive(name: str, value: float) -> None:
    if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
        raise SpecValidationError(f"{name} must be a positive finite number, got {value!r}")


def _require_fraction(name: str, value: float) -> None:
    if not (isinstance(value, (int, float)) and 0.0 < value <= 1.0):
        raise SpecValidationError(f"{name} efficiency out of range (must be in (0, 1]), got {value!r}")


@dataclass(frozen=True)
class AcceleratorSpec:
    """One accelerator's compute, memory, interconnect, latency and price.

    Bandwidths are unidirectional reads per device.  The three collective
    latency constants parameterize the tree all-reduce model:
    ``base + per_rank * (ranks/nodes - 1) + per_tree_step * log2(nodes)``.
    ``ll_protocol_bandwidth_factor`` divides the intra-node bandwidth when
    low-latency collectives are in use.
    """

    name: str
    peak_flops: Dict[int, float]          # precision bits -> FLOP/s
    flop_efficiency: float                # sustained fraction of peak compute
    hbm_capacity: float                   # bytes
    hbm_bandwidth: float                  # bytes/s
    hbm_efficiency: float                 # sustained fraction of peak bandwidth
    intra_node_bandwidth: float           # bytes/s per device (reads)
    inter_node_bandwidth: float           # bytes/s per device (reads)
    ll_protocol_bandwidth_factor: float
    node_size: int                        # devices per node
    kernel_launch_latency: float          # seconds
    collective_base_latency: float        # seconds
    per_rank_latency: float               # seconds
    per_tree_step_latency: float          # seconds
    hourly_price: float                   # USD / device-hour

    def __post_init__(self) -> None:
        if not self.name:
            raise SpecValidationError("accelerator name must be nonempty")
        if not self.peak_flops:
            raise SpecValidationError("peak_flops must contain at least one precision entry")
        for bits, rate in self.peak_flops.items():
            if not (isinstance(bits, int) and bits > 0):
                raise SpecValidationError(f"peak_flops key must be a positive bit width, got {bits!r}")
            _require_positive(f"peak_flops[{bits}]", rate)
        _require_fraction("flop_efficiency", self.flop_efficiency)
        _require_fraction("hbm_efficiency", self.hbm_efficiency)
        for fname in (
            "hbm_capacity",
            "hbm_bandwidth",
            "intra_node_bandwidth",
            "inter_node_bandwidth",
            "ll_protocol_bandwidth_factor",
            "kernel_launch_latency",
            "collective_base_latency",
            "per_rank_latency",
            "per_tree_step_latency",
            "hourly_price",
        ):
            _require_positive(fname, getattr(self, fname))
        if not (isinstance(self.node_size, int) and self.node_size >= 1):
            raise SpecValidationError(f"node_size must be an integer >= 1, got {self.node_size!r}")

    # -- derived views ------------------------------------------------

    def resolve_arithmetic_precision(self, bits: int) -> int:
        """Precision the tensor cores actually run at for ``bits`` operands.

        Exact match wins; otherwise fall back to the narrowest wider format
        (e.g. 4-bit weights run at the 8-bit rate), and finally to the widest
        available format (e.g. 8-bit weights on hardware with 16-bit-only
        tensor cores).
        """
        if bits in self.peak_flops:
            return bits
        wider = sorted(b for b in self.peak_flops if b > bits)
        if wider:
            return wider[0]
        return max(self.peak_flops)

    def flops(self, bits: int, apply_efficiency: bool = True) -> float:
        """FLOP/s available for operands of width ``bits``."""
        rate = self.peak_flops[self.resolve_arithmetic_precision(bits)]
        return rate * self.flop_efficiency if apply_efficiency else rate

    def memory_bandwidth(self, apply_efficiency: bool = True) -> float:
        return self.hbm_bandwidth * (self.hbm_efficiency if apply_efficiency else 1.0)

    @property
    def ll_intra_node_bandwidth(self) -> float:
        """Per-device intra-node read bandwidth under the low-latency protocol."""
        return self.intra_node_bandwidth / self.ll_protocol_bandwidth_factor

    # -- (de)serialization --------------------------------------------

    def to_dict(self) -> Dict[str, Any]:
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": "accelerator",
            "name": self.name,
            "peak_flops_per_s": {str(bits): rate for bits, rate in sorted(self.peak_flops.items())},
            "flop_efficiency": self.flop_efficiency,
            "hbm_capacity_bytes": self.hbm_capacity,
            "hbm_bandwidth_bytes_per_s": self.hbm_bandwidth,
            "hbm_efficiency": self.hbm_efficiency,
            "intra_node_bandwidth_bytes_per_s": self.intra_node_bandwidth,
            "inter_node_bandwidth_bytes_per_s": self.inter_node_bandwidth,
            "ll_protocol_bandwidth_factor": self.ll_protocol_bandwidth_factor,
            "node_size": self.node_size,
            "kernel_launch_latency_s": self.kernel_launch_latency,
            "collective_base_latency_s": self.collective_base_latency,
            "per_rank_latency_s": self.per_rank_latency,
            "per_tree_step_latency_s": self.per_tree_step_latency,
            "hourly_price_usd": self.hourly_price,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "AcceleratorSpec":
        try:
            peak = {int(bits): float(rate) for bits, rate in data["peak_flops_per_s"].items()}
            return cls(
                name=str(data["name"]),
                peak_flops=peak,
                flop_efficiency=float(data["flop_efficiency"]),
                hbm_capacity=float(data["hbm_capacity_bytes"]),
                hbm_bandwidth=float(data["hbm_bandwidth_bytes_per_s"]),
                hbm_efficiency=float(data["hbm_efficiency"]),
                intra_node_bandwidth=float(data["intra_node_bandwidth_bytes_per_s"]),
                inter_node_bandwidth=float(data["inter_node_bandwidth_bytes_per_s"]),
                ll_protocol_bandwidth_factor=float(data["ll_protocol_bandwidth_factor"]),
                node_size=int(data["node_size"]),
                kernel_launch_latency=float(data["kernel_launch_latency_s"]),
                collective_base_latency=float(data["collective_base_latency_s"]),
                per_rank_latency=float(data["per_rank_latency_s"]),
                per_tree_step_latency=float(data["per_tree_step_latency_s"]),
                hourly_price=float(data["hourly_price_usd"]),
            )
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            raise SpecParseError(f"malformed accelerator spec: {exc!r}") from exc

    def with_price(self, hourly_price: float) -> "AcceleratorSpec":
        return dataclasses.replace(self, hourly_price=hourly_price)


@dataclass(frozen=True)
class ModelArchitecture:
    """A Transformer's dimensions, attention variant, MoE structure, precisions.

    ``attention_group_size`` (g) is query heads per KV head; ``g == n_head``
    means multi-query attention.  The parameter decomposition splits the
    non-embedding parameters into attention / feedforward / unembedding;
    ``n_embedding_params`` carries the input embedding table separately so
    that the total parameter count matches public figures (tied-embedding
    models report the shared table under ``n_unembedding_params`` only).
    """

    name: str
    n_layers: int
    d_model: int
    n_head: int
    d_head: int
    attention_group_size: int
    d_ff: int
    n_attention_params: float
    n_feedforward_params: float
    n_unembedding_params: float
    attention_variant: str = STANDARD_ATTENTION
    d_latent: Optional[int] = None
    ff_matrix_count: int = 2
    parallel_attention: bool = False
    n_expert: int = 1
    n_active_expert: int = 1
    n_embedding_params: float = 0.0
    weight_precision: int = 16
    activation_precision: int = 16
    vocab_size: Optional[int] = None

    def __post_init__(self) -> None:
        if not self.name:
            raise SpecValidationError("model name must be nonempty")
        for fname in ("n_layers", "d_model", "n_head", "d_head", "attention_group_size", "d_ff"):
            value = getattr(self, fname)
            if not (isinstance(value, int) and value >= 1):
                raise SpecValidationError(f"{fname} must be an integer >= 1, got {value!r}")
        if self.attention_variant not in (STANDARD_ATTENTION, MLA_ATTENTION):
            raise SpecValidationError(
                f"attention_variant must be '{STANDARD_ATTENTION}' or '{MLA_ATTENTION}'"
            )
        if self.n_head % self.attention_group_size != 0:
            raise SpecValidationError(
                f"attention_group_size {self.attention_group_size} must divide n_head {self.n_head}"
            )
        if self.attention_variant == MLA_ATTENTION:
            if not (isinstance(self.d_latent, int) and self.d_latent > 0):
                raise SpecValidationError("MLA models require d_latent > 0")
        if self.ff_matrix_count not in (2, 3):
            raise SpecValidationError(
                f"ff_matrix_count must be 2 (vanilla) or 3 (gated), got {self.ff_matrix_count!r}"
            )
        for fname in ("n_expert", "n_active_expert"):
            value = getattr(self, fname)
            if not (isinstance(value, int) and value >= 1):
                raise SpecValidationError(f"{fname} must be an integer >= 1, got {value!r}")
        if self.n_active_expert > self.n_expert:
            raise SpecValidationError(
                f"n_active_expert {self.n_active_expert} exceeds n_expert {self.n_expert}"
            )
        for fname in (
            "n_attention_params",
            "n_feedforward_params",
            "n_unembedding_params",
            "n_embedding_params",
        ):
            value = getattr(self, fname)
            if not (isinstance(value, (int, float)) and value >= 0):
                raise SpecValidationError(f"{fname} must be >= 0, got {value!r}")
        for fname in ("weight_precision", "activation_precision"):
            value = getattr(self, fname)
            if not (isinstance(value, int) and value >= 1):
                raise SpecValidationError(f"{fname} must be a positive bit width, got {value!r}")

    # -- derived quantities -------------------------------------------

    @property
    def sparsity(self) -> float:
        """Total experts per active expert (1.0 for dense models)."""
        return self.n_expert / self.n_active_expert

    @property
    def n_kv_head(self) -> int:
        return self.n_head // self.attention_group_size

    @property
    def n_params(self) -> float:
        """Non-embedding parameter count (attention + feedforward + unembedding)."""
        return self.n_attention_params + self.n_feedforward_params + self.n_unembedding_params

    @property
    def total_params(self) -> float:
        """Full parameter count including the input embedding table."""
        return self.n_params + self.n_embedding_params

    @property
    def weight_bytes_per_param(self) -> float:
        return self.weight_precision / 8.0

    @property
    def activation_bytes(self) -> float:
        return self.activation_precision / 8.0

    def with_precisions(
        self,
        weight_precision: Optional[int] = None,
        activation_precision: Optional[int] = None,
    ) -> "ModelArchitecture":
        """Copy with overridden precisions (drives quantization sweeps)."""
        return dataclasses.replace(
            self,
            weight_precision=weight_precision or self.weight_precision,
            activation_precision=activation_precision or self.activation_precision,
        )

    # -- (de)serialization --------------------------------------------

    def to_dict(self) -> Dict[str, Any]:
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": "model",
            "name": self.name,
            "n_layers": self.n_layers,
            "d_model": self.d_model,
            "n_head": self.n_head,
            "d_head": self.d_head,
            "attention_group_size": self.attention_group_size,
            "attention_variant": self.attention_variant,
            "d_latent": self.d_latent,
            "d_ff": self.d_ff,
            "ff_matrix_count": self.ff_matrix_count,
            "parallel_attention": self.parallel_attention,
            "n_expert": self.n_expert,
            "n_active_expert": self.n_active_expert,
            "vocab_size": self.vocab_size,
            "n_attention_params": self.n_attention_params,
            "n_feedforward_params": self.n_feedforward_params,
            "n_unembedding_params": self.n_unembedding_params,
            "n_embedding_params": self.n_embedding_params,
            "weight_precision_bits": self.weight_precision,
            "activation_precision_bits": self.activation_precision,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ModelArchitecture":
        try:
            n_layers = int(data["n_layers"])
            d_model = int(data["d_model"])
            n_head = int(data["n_head"])
            d_head = int(data["d_head"])
            group = int(data["attention_group_size"])
            d_ff = int(data["d_ff"])
            variant = str(data.get("attention_variant", STANDARD_ATTENTION))
            ff_matrix_count = int(data.get("ff_matrix_count", 2))
            n_expert = int(data.get("n_expert", 1))
            vocab = data.get("vocab_size")
            vocab = int(vocab) if vocab is not None else None
            tied = bool(data.get("tied_embeddings", False))

            def derived(key: str, fallback) -> float:
                value = data.get(key)
                if value is None:
                    if fallback is None:
                        raise SpecParseError(
                            f"{key} must be given explicitly (not derivable for this architecture)"
                        )
                    return float(fallback())
                return float(value)

            attention_default = None
            if variant == STANDARD_ATTENTION and group >= 1 and n_head % max(group, 1) == 0:
                # Q and output projections carry n_head heads, K and V carry
                # n_head/g heads each.
                attention_default = lambda: (
                    n_layers * d_model * d_head * (2 * n_head + 2 * (n_head // group))
                )
            ff_default = lambda: ff_matrix_count * d_model * d_ff * n_expert * n_layers
            unembed_default = (lambda: vocab * d_model) if vocab else None
            embed_default = (lambda: 0.0 if tied else vocab * d_model) if vocab else (lambda: 0.0)

            return cls(
                name=str(data["name"]),
                n_layers=n_layers,
                d_model=d_model,
                n_head=n_head,
                d_head=d_head,
                attention_group_size=group,
                attention_variant=variant,
                d_latent=int(data["d_latent"]) if data.get("d_latent") is not None else None,
                d_ff=d_ff,
                ff_matrix_count=ff_matrix_count,
                parallel_attention=bool(data.get("parallel_attention", False)),
                n_expert=n_expert,
                n_active_expert=int(data.get("n_active_expert", 1)),
                n_attention_params=derived("n_attention_params", attention_default),
                n_feedforward_params=derived("n_feedforward_params", ff_default),
                n_unembedding_params=derived("n_unembedding_params", unembed_default),
                n_embedding_params=derived("n_embedding_params", embed_default),
                weight_precision=int(data.get("weight_precision_bits", 16)),
                activation_precision=int(data.get("activation_precision_bits", 16)),
                vocab_size=vocab,
            )
        except SpecParseError:
            raise
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            raise SpecParseError(f"malformed model spec: {exc!r}") from exc


# ---------------------------------------------------------------------
# Loading and presets
# ---------------------------------------------------------------------

def _parse_file(path: Path) -> Dict[str, Any]:
    try:
        text = path.read_text()
    except OSError as exc:
        raise SpecParseError(f"cannot read spec file {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecParseError(f"spec file {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise SpecParseError(f"spec file {path} must contain a JSON object")
    version = data.get("schema_version")
    if version is not None and int(version) > SCHEMA_VERSION:
        raise SpecParseError(
            f"spec file {path} uses schema_version {version}, this build understands {SCHEMA_VERSION}"
        )
    return data


def load_spec(path: os.PathLike | str, kind: Optional[str] = None):
    """Load and validate a spec file.

    ``kind`` may be "accelerator" or "model"; when omitted the file's own
    ``kind`` field decides.  Returns :class:`AcceleratorSpec` or
    :class:`ModelArchitecture`.
    """
    data = _parse_file(Path(path))
    file_kind = data.get("kind", kind)
    if kind is not None and file_kind != kind:
        raise SpecParseError(f"expected a {kind} spec, file declares kind={file_kind!r}")
    if file_kind == "accelerator":
        return AcceleratorSpec.from_dict(data)
    if file_kind == "model":
        return ModelArchitecture.from_dict(data)
    raise SpecParseError(f"spec file must declare kind 'accelerator' or 'model', got {file_kind!r}")


def save_spec(spec, path: os.PathLike | str) -> None:
    """Serialize a spec back to its file schema (round-trips exactly)."""
    Path(path).write_text(json.dumps(spec.to_dict(), indent=2, sort_keys=True) + "\n")


def preset_dir() -> Path:
    override = os.environ.get(PRESET_ENV_VAR)
    return Path(override) if override else _PRESET_DIR


def preset_path(name: str) -> Path:
    return preset_dir() / f"{name}.json"


def preset_names() -> list[str]:
    return sorted(p.stem for p in preset_dir().glob("*.json"))


def preset(name: str):
    """Return a built-in spec by name (see :func:`preset_names`)."""
    path = preset_path(name)
    if not path.is_file():
        raise UnknownPresetError(
            f"unknown preset {name!r}; available presets: {', '.join(preset_names())}"
        )
    return load_spec(path)


def resolve(name_or_path: str, kind: str):
    """Resolve a CLI argument that is either a preset name or a file path."""
    candidate = Path(name_or_path)
    if candidate.suffix == ".json" or candidate.is_file():
        return load_spec(candidate, kind=kind)
    spec = preset(name_or_path)
    expected = AcceleratorSpec if kind == "accelerator" else ModelArchitecture
    if not isinstance(spec, expected):
        raise SpecParseError(f"preset {name_or_path!r} is not a {kind}")
    return spec
