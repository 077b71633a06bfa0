import pytest

import llmcost as lc
from llmcost.roofline import MinimumLatencyCost

T_HOP = 1e-6


def test_critical_batch_size_h100(h100):
    assert lc.critical_batch_size(h100, 16) == pytest.approx(303.0, abs=0.5)
    assert lc.critical_batch_size(h100, 16, apply_efficiency=True) == pytest.approx(283.0, abs=0.5)


def test_critical_batch_size_degenerate():
    acc = lc.AcceleratorSpec(
        name="flat", peak_flops={16: 1e12}, flop_efficiency=1.0,
        hbm_capacity=1e9, hbm_bandwidth=1e12, hbm_efficiency=1.0,
        intra_node_bandwidth=1e11, inter_node_bandwidth=1e10,
        ll_protocol_bandwidth_factor=2.0, node_size=8,
        kernel_launch_latency=1e-6, collective_base_latency=1e-6,
        per_rank_latency=1e-6, per_tree_step_latency=1e-6, hourly_price=1.0,
    )
    # C == B numerically and 2-byte weights make the branches meet at exactly 1.
    assert lc.critical_batch_size(acc, 16) == 1.0


def test_single_device_memory_bound(llama3_70b, h100):
    result = lc.single_device(llama3_70b, h100, b=1)
    assert result.token_latency == pytest.approx(42.4e-3, rel=0.02)
    assert result.gpu_seconds_per_token == result.token_latency


def test_single_device_branches_meet_at_critical_batch(llama3_70b, h100):
    b_star = lc.critical_batch_size(h100, 16)
    at_star = lc.single_device(llama3_70b, h100, b_star)
    doubled = lc.single_device(llama3_70b, h100, 2 * b_star)
    p_bytes = llama3_70b.weight_precision / 8
    read_time = p_bytes * llama3_70b.total_params / h100.hbm_bandwidth
    assert at_star.token_latency == pytest.approx(read_time, rel=1e-9)
    assert doubled.token_latency == pytest.approx(2 * at_star.token_latency, rel=1e-9)
    assert doubled.gpu_seconds_per_token == pytest.approx(at_star.gpu_seconds_per_token, rel=1e-9)


def test_multi_device_reduces_to_single(llama3_70b, h100):
    multi = lc.toy_multi_device(llama3_70b, h100, b=1, n_gpu=1, t_hop=T_HOP, n_reduce=4)
    single = lc.single_device(llama3_70b, h100, b=1)
    assert multi.token_latency == pytest.approx(single.token_latency, rel=1e-12)


def test_llama70b_at_26_gpus(llama3_70b, h100):
    result = lc.toy_multi_device(llama3_70b, h100, b=0, n_gpu=26, t_hop=T_HOP, n_reduce=4)
    assert result.token_latency == pytest.approx(4.27e-3, rel=0.005)


def test_parallel_attention_lowers_latency(palm_540b, h100):
    seq = lc.toy_multi_device(palm_540b, h100, 0, 32, T_HOP, n_reduce=4)
    par = lc.toy_multi_device(palm_540b, h100, 0, 32, T_HOP)  # preset flags parallel blocks
    assert par.token_latency < seq.token_latency


def test_optimal_instance_sizes(llama3_70b, gpt3, h100):
    assert lc.optimal_instance_size(llama3_70b, h100, T_HOP, 4) == pytest.approx(26, abs=1)
    assert lc.optimal_instance_size(gpt3, h100, T_HOP, 4) == pytest.approx(42, abs=1)


def test_optimal_instance_clamp(h100):
    tiny = lc.ModelArchitecture(
        name="micro", n_layers=4, d_model=64, n_head=2, d_head=32,
        attention_group_size=1, d_ff=256,
        n_attention_params=1e5, n_feedforward_params=2e5, n_unembedding_params=1e4,
    )
    assert lc.optimal_instance_size(tiny, h100, T_HOP, 4) == 1.0
    p_bytes = tiny.weight_precision / 8
    expected = p_bytes * tiny.total_params / h100.hbm_bandwidth
    assert lc.minimum_token_latency(tiny, h100, T_HOP, 4) == expected


def test_minimum_latency_values(llama3_8b, palm_540b, h100):
    lat_8b = lc.minimum_token_latency(llama3_8b, h100, T_HOP, 4)
    assert 1.0 / lat_8b == pytest.approx(966, rel=0.02)
    lat_palm = lc.minimum_token_latency(palm_540b, h100, T_HOP, 4)
    assert 1.0 / lat_palm == pytest.approx(86, rel=0.02)


def test_minimum_latency_approximation_flag(llama3_70b, h100):
    exact = lc.minimum_token_latency(llama3_70b, h100, T_HOP, 4)
    approx = lc.minimum_token_latency(llama3_70b, h100, T_HOP, 4, approximate=True)
    hop_time = llama3_70b.n_layers * 4 * T_HOP
    assert approx - exact == pytest.approx(2 * hop_time, rel=1e-9)


def test_minimum_latency_matches_toy_at_optimum(llama3_70b, h100):
    n_star = lc.optimal_instance_size(llama3_70b, h100, T_HOP, 4)
    toy = lc.toy_multi_device(llama3_70b, h100, b=0, n_gpu=n_star, t_hop=T_HOP, n_reduce=4)
    closed = lc.minimum_token_latency(llama3_70b, h100, T_HOP, 4)
    assert closed == pytest.approx(toy.token_latency, rel=1e-9)


def test_toy_latency_minimizer_is_optimal_instance_size(llama3_70b, h100):
    def latency(n):
        return lc.toy_multi_device(llama3_70b, h100, 0, n, T_HOP, 4).token_latency

    lo, hi = 1.0, 1e4
    for _ in range(200):
        m1 = lo + (hi - lo) / 3
        m2 = hi - (hi - lo) / 3
        if latency(m1) < latency(m2):
            hi = m2
        else:
            lo = m1
    minimizer = (lo + hi) / 2
    n_star = lc.optimal_instance_size(llama3_70b, h100, T_HOP, 4)
    assert minimizer == pytest.approx(n_star, rel=1e-6)


def test_cost_at_minimum_latency(llama3_405b, gpt3, h100):
    cost = lc.cost_at_minimum_latency(llama3_405b, h100, T_HOP, 4)
    assert isinstance(cost, MinimumLatencyCost)
    assert 2.5 <= cost.ratio_to_arithmetic_floor <= 3.0
    # Identity: exact cost is instance size over batch size times latency.
    n_star = lc.optimal_instance_size(gpt3, h100, T_HOP, 4)
    b_star = lc.critical_batch_size(h100, 16)
    min_lat = lc.minimum_token_latency(gpt3, h100, T_HOP, 4)
    assert lc.cost_at_minimum_latency(gpt3, h100, T_HOP, 4).exact == pytest.approx(
        n_star / b_star * min_lat, rel=1e-12
    )


def test_cost_ratio_approaches_three(h100):
    def ratio_for(scale):
        model = lc.ModelArchitecture(
            name="huge", n_layers=100, d_model=1 << 15, n_head=256, d_head=128,
            attention_group_size=8, d_ff=1 << 17,
            n_attention_params=5e12 * scale, n_feedforward_params=2e13 * scale,
            n_unembedding_params=1e10 * scale,
        )
        return lc.cost_at_minimum_latency(model, h100, T_HOP, 4).ratio_to_arithmetic_floor

    small, big, bigger = ratio_for(1), ratio_for(100), ratio_for(10000)
    assert 2.5 <= small < big < bigger < 3.0
    assert bigger == pytest.approx(3.0, abs=0.02)


def test_cost_requires_multi_gpu_optimum(h100):
    tiny = lc.ModelArchitecture(
        name="micro", n_layers=4, d_model=64, n_head=2, d_head=32,
        attention_group_size=1, d_ff=256,
        n_attention_params=1e5, n_feedforward_params=2e5, n_unembedding_params=1e4,
    )
    with pytest.raises(ValueError):
        lc.cost_at_minimum_latency(tiny, h100, T_HOP, 4)


def test_sqrt_scaling_projection():
    assert lc.sqrt_scaling_projection(8e9, 400, 70e9) == pytest.approx(135, abs=1)
    assert lc.sqrt_scaling_projection(8e9, 400, 405e9) == pytest.approx(56, abs=1)
    assert lc.sqrt_scaling_projection(7e9, 123.0, 7e9) == 123.0
    with pytest.raises(ValueError):
        lc.sqrt_scaling_projection(0, 1, 1)


def test_gpu_seconds_never_below_arithmetic_floor(llama3_70b, h100):
    floor = 2.0 * llama3_70b.total_params / h100.peak_flops[16]
    for n_gpu in (1, 4, 26, 100):
        for b in (1, 64, 303, 1000):
            result = lc.toy_multi_device(llama3_70b, h100, b, n_gpu, T_HOP, 4)
            assert result.gpu_seconds_per_token >= floor * (1 - 1e-12)


def test_dense_only(mixtral, h100):
    with pytest.raises(ValueError):
        lc.single_device(mixtral, h100, 1)
