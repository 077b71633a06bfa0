import pytest

import llmcost as lc
from llmcost.parallelism import ep_adjustment, pp_adjustment

from conftest import single_gpu_plan, tiny_model


def plans_as_tuples(plans):
    return {(p.tp_degree, p.pp_degree, p.ep_degree) for p in plans}


def test_single_gpu_trivial_plan(llama3_70b, h100):
    plans = lc.enumerate_plans(llama3_70b, h100, 1)
    assert plans_as_tuples(plans) == {(1, 1, 1)}


def test_dense_six_gpus(llama3_70b, h100):
    plans = lc.enumerate_plans(llama3_70b, h100, 6)
    assert plans_as_tuples(plans) == {(6, 1, 1), (3, 2, 1), (2, 3, 1), (1, 6, 1)}


def test_mixtral_sixteen_gpus(mixtral, h100):
    plans = lc.enumerate_plans(mixtral, h100, 16)
    assert plans_as_tuples(plans) == {(2, 1, 8), (1, 2, 8)}


def test_plan_product_invariant(mixtral, llama3_70b, h100):
    for model in (mixtral, llama3_70b):
        for n_gpu in range(1, 65):
            for plan in lc.enumerate_plans(model, h100, n_gpu):
                assert plan.tp_degree * plan.pp_degree * plan.ep_degree == n_gpu
                assert plan.n_nodes == -(-n_gpu // h100.node_size)


def test_dense_never_gets_expert_parallelism(llama3_70b, h100):
    for n_gpu in (1, 8, 24, 64):
        assert all(p.ep_degree == 1 for p in lc.enumerate_plans(llama3_70b, h100, n_gpu))


def test_pp_respects_layer_count(h100):
    shallow = tiny_model(n_layers=2)
    plans = lc.enumerate_plans(shallow, h100, 8)
    assert all(p.pp_degree <= 2 for p in plans)


def test_pp_adjustment_identity_when_disabled(llama3_70b, h100):
    plan = single_gpu_plan(8, h100, tp=8)
    adj = pp_adjustment(llama3_70b, plan, h100, b=32)
    assert adj.pp_boundary_time == 0.0
    assert adj.micro_batch == 32


def test_pp_adjustment_hand_value():
    acc = lc.AcceleratorSpec(
        name="one-per-node", peak_flops={16: 1e15}, flop_efficiency=1.0,
        hbm_capacity=80e9, hbm_bandwidth=3e12, hbm_efficiency=1.0,
        intra_node_bandwidth=450e9, inter_node_bandwidth=50e9,
        ll_protocol_bandwidth_factor=2.0, node_size=1,
        kernel_launch_latency=4e-6, collective_base_latency=6.8e-6,
        per_rank_latency=1.2e-6, per_tree_step_latency=10e-6, hourly_price=2.0,
    )
    model = tiny_model(n_layers=4, d_model=8192)
    plan = lc.ParallelismPlan(n_gpu=2, n_nodes=2, tp_degree=1, pp_degree=2, ep_degree=1)
    adj = pp_adjustment(model, plan, acc, b=2)
    # One boundary, one lane over the 50 GB/s link: base latency + 8192*1*2B transfer.
    assert adj.micro_batch == 1
    assert adj.pp_boundary_time == pytest.approx(6.8e-6 + 8192 * 1 * 2 / 50e9, rel=1e-12)


def test_micro_batch_ceiling(llama3_70b, h100):
    plan = single_gpu_plan(8, h100, tp=2, pp=4)
    assert pp_adjustment(llama3_70b, plan, h100, b=1).micro_batch == 1
    assert pp_adjustment(llama3_70b, plan, h100, b=6).micro_batch == 2


def test_pp_boundary_monotone_in_depth(llama3_70b, h100):
    times = []
    for pp in (1, 2, 4, 8):
        plan = single_gpu_plan(16, h100, tp=16 // pp, pp=pp)
        times.append(pp_adjustment(llama3_70b, plan, h100, b=64).pp_boundary_time)
    assert times == sorted(times)


def test_pp_exceeding_layers_rejected(h100):
    shallow = tiny_model(n_layers=2)
    plan = lc.ParallelismPlan(n_gpu=4, n_nodes=1, tp_degree=1, pp_degree=4, ep_degree=1)
    with pytest.raises(ValueError):
        pp_adjustment(shallow, plan, h100, b=8)


def test_ep_adjustment_trivial_and_saturating(mixtral, h100):
    no_ep = single_gpu_plan(4, h100, tp=4)
    assert ep_adjustment(mixtral, no_ep, b_micro=16).ep_comm_bytes == 0.0

    # Communication volume stops growing once ep reaches the active experts.
    ep2 = lc.ParallelismPlan(n_gpu=2, n_nodes=1, tp_degree=1, pp_degree=1, ep_degree=2)
    ep8 = lc.ParallelismPlan(n_gpu=8, n_nodes=1, tp_degree=1, pp_degree=1, ep_degree=8)
    bytes_2 = ep_adjustment(mixtral, ep2, 16).ep_comm_bytes
    bytes_8 = ep_adjustment(mixtral, ep8, 16).ep_comm_bytes
    assert bytes_2 == bytes_8
    assert bytes_2 == pytest.approx(2 * 2 * mixtral.d_model * 16 * 2, rel=1e-12)


def test_ep_min_branch(deepseek):
    ep2 = lc.ParallelismPlan(n_gpu=2, n_nodes=1, tp_degree=1, pp_degree=1, ep_degree=2)
    adj = ep_adjustment(deepseek, ep2, 4)
    # r = min(2, 8 active) = 2 transmissions per vector, dispatch + receive.
    assert adj.ep_comm_bytes == pytest.approx(2 * 2 * deepseek.d_model * 4 * 2, rel=1e-12)


def test_ep_exceeding_experts_rejected(mixtral):
    plan = lc.ParallelismPlan(n_gpu=16, n_nodes=2, tp_degree=1, pp_degree=1, ep_degree=16)
    with pytest.raises(ValueError):
        ep_adjustment(mixtral, plan, 4)
