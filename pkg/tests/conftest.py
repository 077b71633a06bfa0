import sys
from pathlib import Path

SRC = Path(__file__).resolve().parents[1] / "src"
if str(SRC) not in sys.path:
    try:
        import llmcost  # noqa: F401
    except ImportError:
        sys.path.insert(0, str(SRC))

import pytest

import llmcost as lc


@pytest.fixture(scope="session")
def h100():
    return lc.preset("h100-sxm")


@pytest.fixture(scope="session")
def a100():
    return lc.preset("a100-sxm")


@pytest.fixture(scope="session")
def v100():
    return lc.preset("v100-sxm")


@pytest.fixture(scope="session")
def llama3_8b():
    return lc.preset("llama3-8b")


@pytest.fixture(scope="session")
def llama3_70b():
    return lc.preset("llama3-70b")


@pytest.fixture(scope="session")
def llama3_405b():
    return lc.preset("llama3.1-405b")


@pytest.fixture(scope="session")
def mixtral():
    return lc.preset("mixtral-8x22b")


@pytest.fixture(scope="session")
def mistral_large():
    return lc.preset("mistral-large-2")


@pytest.fixture(scope="session")
def deepseek():
    return lc.preset("deepseek-v3")


@pytest.fixture(scope="session")
def gpt3():
    return lc.preset("gpt3")


@pytest.fixture(scope="session")
def palm_540b():
    return lc.preset("palm-540b")


def tiny_model(**overrides):
    """One-layer architecture used by hand-evaluated byte-accounting checks."""
    fields = dict(
        name="tiny",
        n_layers=1,
        d_model=8,
        n_head=2,
        d_head=4,
        attention_group_size=1,
        d_ff=32,
        ff_matrix_count=2,
        n_attention_params=256.0,
        n_feedforward_params=512.0,
        n_unembedding_params=128.0,
        weight_precision=16,
        activation_precision=16,
    )
    fields.update(overrides)
    return lc.ModelArchitecture(**fields)


def single_gpu_plan(n_gpu=1, acc=None, tp=None, pp=1, ep=1):
    import math

    node_size = acc.node_size if acc is not None else 8
    tp = tp if tp is not None else n_gpu // (pp * ep)
    return lc.ParallelismPlan(
        n_gpu=n_gpu,
        n_nodes=max(1, math.ceil(n_gpu / node_size)),
        tp_degree=tp,
        pp_degree=pp,
        ep_degree=ep,
    )
