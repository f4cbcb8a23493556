"""Protocol execution, estimation, and threshold-search tests."""

import numpy as np
import pytest

from qwqkd.errors import StatisticalInsufficiencyError, ValidationError
from qwqkd.noise import NoiseModel
from qwqkd.protocol import (
    ProtocolConfig,
    ProtocolEngine,
    find_threshold,
    iteration_rng,
    run_iteration,
    run_protocol,
)
from qwqkd.walkgraph import WalkSpec


def test_iteration_streams_are_independent_of_order():
    a1 = iteration_rng(99, 5).random(4)
    _ = iteration_rng(99, 6).random(4)
    a2 = iteration_rng(99, 5).random(4)
    assert np.array_equal(a1, a2)


def test_noiseless_iterations():
    cfg = ProtocolConfig(walk=WalkSpec("circle", 3, 40), N=10, seed=7)
    engine = ProtocolEngine(cfg)
    seen = {(0, 0): 0, (1, 1): 0, (0, 1): 0, (1, 0): 0}
    for i in range(400):
        rec = run_iteration(cfg, i, engine)
        seen[(rec.w_a, rec.w_b)] += 1
        assert rec.sifted == (rec.w_a == rec.w_b)
        if rec.sifted:
            assert rec.j_b == rec.i_a  # exact transmission both bases
        if rec.estimation_round:
            assert rec.sifted
    assert min(seen.values()) > 0


def test_noiseless_protocol_statistics():
    cfg = ProtocolConfig(walk=WalkSpec("hypercube_tensor", 2, 6), N=10_000, seed=3)
    res = run_protocol(cfg)
    assert res.q_z == 0.0 and res.q_w == 0.0
    assert res.raw_key_a == res.raw_key_b
    sift_rate = res.sifted_count / cfg.N
    assert abs(sift_rate - 0.5) < 0.015  # 3 sigma binomial band
    assert res.keyrate.r == pytest.approx(np.log2(1 / res.keyrate.c))
    assert res.keyrate.c == pytest.approx(0.25, abs=1e-12)
    n_est = res.joint_z.counts.sum() + res.joint_w.counts.sum()
    assert len(res.raw_key_a) == res.sifted_count - n_est


def test_determinism_bit_identical():
    cfg = ProtocolConfig(walk=WalkSpec("circle", 3, 30), N=2000,
                         noise=NoiseModel.depolarizing(lam=0.3), seed=11)
    r1 = run_protocol(cfg)
    r2 = run_protocol(cfg)
    assert np.array_equal(r1.joint_z.counts, r2.joint_z.counts)
    assert np.array_equal(r1.joint_w.counts, r2.joint_w.counts)
    assert r1.raw_key_a == r2.raw_key_a and r1.raw_key_b == r2.raw_key_b
    assert r1.q_z == r2.q_z and r1.keyrate.r == r2.keyrate.r


def test_workers_do_not_change_results():
    cfg = ProtocolConfig(walk=WalkSpec("circle", 3, 10), N=4096,
                         noise=NoiseModel.depolarizing(lam=0.4), seed=5)
    seq = run_protocol(cfg, workers=1)
    par = run_protocol(cfg, workers=3)
    assert np.array_equal(seq.joint_z.counts, par.joint_z.counts)
    assert seq.raw_key_a == par.raw_key_a
    assert seq.q_w == par.q_w


def test_qer_consistency_identity():
    cfg = ProtocolConfig(walk=WalkSpec("circle", 3, 20), N=6000,
                         noise=NoiseModel.depolarizing(lam=0.5), seed=2)
    res = run_protocol(cfg)
    n = res.joint_z.normalized
    k = min(n.shape)
    assert res.q_z == pytest.approx(1.0 - np.trace(n[:k, :k]), abs=1e-15)


def test_bb84_closed_form_flip_rate():
    # one depolarizing transmission layer: P(flip) = lam / 2
    lam = 0.2
    cfg = ProtocolConfig(walk=WalkSpec("circle", 1, 1), N=20_000,
                         noise=NoiseModel.depolarizing(lam=lam), seed=13)
    res = run_protocol(cfg)
    assert res.q_z == pytest.approx(lam / 2, abs=0.01)
    assert res.q_w == pytest.approx(lam / 2, abs=0.01)


def test_statistical_insufficiency_raised():
    cfg = ProtocolConfig(walk=WalkSpec("circle", 1, 1), N=20, seed=1)
    with pytest.raises(StatisticalInsufficiencyError):
        run_protocol(cfg)


def test_per_step_placement_runs():
    nm = NoiseModel.depolarizing(lam=0.1, placement="per_step")
    cfg = ProtocolConfig(walk=WalkSpec("circle", 3, 5), N=800, noise=nm, seed=21)
    res = run_protocol(cfg)
    assert 0.0 <= res.q_z <= 1.0 and 0.0 <= res.q_w <= 1.0
    # walked rounds see 2t+1 layers vs 1 for direct rounds
    assert res.q_w > res.q_z


def test_find_threshold_requires_noise_and_rate():
    cfg = ProtocolConfig(walk=WalkSpec("circle", 1, 1), N=1000, seed=1)
    with pytest.raises(ValidationError):
        find_threshold(cfg)


def test_find_threshold_no_threshold_result():
    # a channel too weak to kill the rate even at full strength
    nm = NoiseModel.depolarizing(lam=0.02)
    cfg = ProtocolConfig(walk=WalkSpec("circle", 1, 1), N=4000, noise=nm, seed=1)
    thr = find_threshold(cfg, tolerance=0.05, final_n_factor=1)
    assert thr.no_threshold
    assert thr.strength_star == 1.0


def test_find_threshold_brackets_zero_rate():
    nm = NoiseModel.depolarizing(lam=1.0)
    cfg = ProtocolConfig(walk=WalkSpec("circle", 1, 1), N=8000, noise=nm, seed=1)
    thr = find_threshold(cfg, tolerance=0.02, final_n_factor=2)
    assert not thr.no_threshold
    r_low, r_high = thr.r_bracket
    assert r_low <= 0.0 <= r_high
    assert 0.05 < thr.q_at_threshold < 0.2
    assert thr.iterations_used >= 8000
