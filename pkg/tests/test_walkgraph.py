"""Walk construction, evolution, and inversion tests."""

import numpy as np
import pytest

from dense_reference import pipeline_unitary
from qwqkd.coinops import CoinSpec
from qwqkd.errors import ValidationError
from qwqkd.walkgraph import (
    RegisterPlan,
    WalkKernel,
    WalkSpec,
    evolve,
    invert,
    plan_registers,
    position_distribution,
    prepare_initial,
    step,
    symbol_to_index,
)


def test_plan_examples():
    assert plan_registers(WalkSpec("circle", 3, 1)) == RegisterPlan(2, 1, 6)
    assert plan_registers(WalkSpec("hypercube_tensor", 3, 1)) == RegisterPlan(3, 3, 8)
    assert plan_registers(WalkSpec("circle", 1, 1)) == RegisterPlan(0, 1, 2)
    assert plan_registers(WalkSpec("hypercube_grover", 3, 1)) == RegisterPlan(3, 2, 8)


def test_even_circle_rejected_without_override():
    with pytest.raises(ValidationError):
        WalkSpec("circle", 4, 1)
    spec = WalkSpec("circle", 4, 1, allow_even_circle=True)
    assert plan_registers(spec).alphabet_size == 8


def test_grover_requires_p_at_least_two():
    with pytest.raises(ValidationError):
        WalkSpec("hypercube_grover", 1, 1)


def test_prepare_examples():
    # hypercube_tensor P=2, symbol 3, F=I: position (11)2, coin (00)2
    spec = WalkSpec("hypercube_tensor", 2, 1)
    plan = plan_registers(spec)
    state = prepare_initial(spec, plan, 3)
    assert state.amplitudes[0b1100] == 1.0

    # circle P=3, symbol 4 -> position 2, coin 0
    spec = WalkSpec("circle", 3, 1)
    plan = plan_registers(spec)
    state = prepare_initial(spec, plan, 4)
    assert state.amplitudes[(2 << 1) | 0] == 1.0

    # hypercube_tensor P=1, symbol 0, F=Xtilde -> (|00> + |01>)/sqrt(2)
    spec = WalkSpec("hypercube_tensor", 1, 1, F="Xtilde")
    plan = plan_registers(spec)
    state = prepare_initial(spec, plan, 0)
    assert np.allclose(state.amplitudes, [1 / np.sqrt(2), 1 / np.sqrt(2), 0, 0])


def test_prepare_rejects_out_of_range_symbol():
    spec = WalkSpec("circle", 3, 1)
    plan = plan_registers(spec)
    with pytest.raises(ValidationError):
        prepare_initial(spec, plan, 6)


def test_step_examples():
    # circle theta=0: coin 1 moves right
    spec = WalkSpec("circle", 3, 1, coin=CoinSpec(theta=0.0))
    plan = plan_registers(spec)
    out = step(spec, plan, prepare_initial(spec, plan, 1))  # pos 0, coin 1
    assert abs(out.amplitudes[(1 << 1) | 1]) == pytest.approx(1.0)

    # hypercube_tensor theta=0: coin bit 1 flips position bit 1
    spec = WalkSpec("hypercube_tensor", 2, 1, coin=CoinSpec(theta=0.0))
    plan = plan_registers(spec)
    amps = np.zeros(16, dtype=complex)
    amps[(0b00 << 2) | 0b10] = 1.0
    from qwqkd.corestate import PureState

    out = step(spec, plan, PureState(amps, 2, 2))
    assert abs(out.amplitudes[(0b10 << 2) | 0b10]) == pytest.approx(1.0)

    # hypercube_grover P=2 from coin 0: Grover(2) maps 0 -> 1, flip bit 1
    spec = WalkSpec("hypercube_grover", 2, 1)
    plan = plan_registers(spec)
    out = step(spec, plan, prepare_initial(spec, plan, 0))
    assert abs(out.amplitudes[(0b10 << 1) | 1]) == pytest.approx(1.0)


def test_evolve_t0_and_theta0_cycle():
    spec = WalkSpec("circle", 3, 0)
    plan = plan_registers(spec)
    state = prepare_initial(spec, plan, 2)
    assert np.allclose(evolve(spec, plan, state).amplitudes, state.amplitudes)

    spec = WalkSpec("circle", 3, 3, coin=CoinSpec(theta=0.0))
    out = evolve(spec, plan, prepare_initial(spec, plan, 1))
    assert abs(out.amplitudes[1]) == pytest.approx(1.0)  # three right moves mod 3


def test_circle_invalid_slots_stay_empty():
    spec = WalkSpec("circle", 3, 50)
    plan = plan_registers(spec)
    out = evolve(spec, plan, prepare_initial(spec, plan, 0))
    probs = np.abs(out.amplitudes) ** 2
    assert probs[6:].max() < 1e-24


def test_norm_after_long_evolution():
    spec = WalkSpec("circle", 5, 2000)
    plan = plan_registers(spec)
    out = evolve(spec, plan, prepare_initial(spec, plan, 3))
    assert abs(out.norm() - 1.0) < 1e-9


@pytest.mark.parametrize("topology,P", [
    ("circle", 1), ("circle", 3), ("circle", 5),
    ("hypercube_tensor", 1), ("hypercube_tensor", 3),
    ("hypercube_grover", 2), ("hypercube_grover", 3),
])
@pytest.mark.parametrize("f_kind,policy", [
    ("I", "once_before_walk"),
    ("Y", "once_before_walk"),
    ("Xtilde", "before_each_step"),
])
def test_invert_recovers_symbols(topology, P, f_kind, policy):
    spec = WalkSpec(topology, P, 37, F=f_kind, f_policy=policy)
    plan = plan_registers(spec)
    for symbol in range(plan.alphabet_size):
        state = prepare_initial(spec, plan, symbol)
        back = invert(spec, plan, evolve(spec, plan, state))
        idx = symbol_to_index(spec, plan, symbol)
        assert abs(back.amplitudes[idx]) ** 2 > 1 - 1e-9


def test_tensor_dimension_flips_commute():
    # The shift is a product of per-dimension controlled flips on disjoint
    # bits: any application order gives the same permutation.
    spec = WalkSpec("hypercube_tensor", 3, 1)
    plan = plan_registers(spec)
    kernel = WalkKernel(spec, plan)
    rng = np.random.default_rng(5)
    amps = rng.normal(size=plan.dim) + 1j * rng.normal(size=plan.dim)
    amps /= np.linalg.norm(amps)

    idx = np.arange(plan.dim)
    pos, coin = idx >> 3, idx & 0b111

    def flip(a):
        # involution, so gathering by the permutation applies it
        return np.where((coin >> a) & 1 == 1, ((pos ^ (1 << a)) << 3) | coin, idx)

    f0, f1, f2 = flip(0), flip(1), flip(2)
    ordered = amps[f0][f1][f2]
    reordered = amps[f2][f0][f1]
    assert np.array_equal(ordered, reordered)
    assert np.array_equal(ordered, amps[kernel.shift_gather])


def test_dense_reference_agreement_small():
    for topology, P in [("circle", 3), ("hypercube_tensor", 2), ("hypercube_grover", 3)]:
        for policy in ("once_before_walk", "before_each_step"):
            spec = WalkSpec(topology, P, 4, coin=CoinSpec(phi=0.3, theta=0.7),
                            F="Y", f_policy=policy)
            plan = plan_registers(spec)
            dense = pipeline_unitary(topology, P, 4, 0.3, 0.7, "Y", policy,
                                     plan.n_pos, plan.n_coin)
            kernel = WalkKernel(spec, plan)
            mine = kernel.dense_pipeline()
            assert np.abs(dense - mine).max() < 1e-10


def test_position_distribution_values():
    # t=0: delta at the symbol's position
    spec = WalkSpec("circle", 3, 0)
    plan = plan_registers(spec)
    assert np.allclose(position_distribution(spec, plan, 4), [0, 0, 1])

    # tensor P=3: exactly uniform at even non-revival t, full revival at
    # t = 0 mod 8 (pair step has eigenphases {0, +-pi/4, pi})
    spec = WalkSpec("hypercube_tensor", 3, 1)
    plan = plan_registers(spec)
    d = position_distribution(spec, plan, 0, t_override=998)
    assert d.max() - d.min() < 1e-12
    d = position_distribution(spec, plan, 0, t_override=1000)
    assert d.max() - d.min() == pytest.approx(1.0)

    # grover P=4 walk stays sharply peaked at the origin
    spec = WalkSpec("hypercube_grover", 4, 1000)
    plan = plan_registers(spec)
    d = position_distribution(spec, plan, 0)
    assert d.argmax() == 0 and d.max() > 0.3
