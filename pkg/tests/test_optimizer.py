"""Grid-search tests."""

import numpy as np
import pytest

from qwqkd.errors import ValidationError
from qwqkd.optimizer import GridSpec, grid_search
from qwqkd.security import sweep_c
from qwqkd.walkgraph import WalkSpec


def test_full_enumeration_count():
    g = GridSpec(topology="circle", P=1, t_max=4)
    res = grid_search(g)
    assert len(res.table) == 3 * 11 * 11
    assert all(0 < e.c_min <= 1 for e in res.table)
    cs = [e.c_min for e in res.table]
    assert cs == sorted(cs)


def test_repeat_runs_bit_identical():
    g = GridSpec(topology="circle", P=3, ks=(0, 5), t_max=50)
    r1 = grid_search(g)
    r2 = grid_search(g)
    assert r1.table == r2.table


def test_cache_reuse():
    g = GridSpec(topology="circle", P=3, ks=(0, 5), t_max=30)
    cache = {}
    r1 = grid_search(g, cache=cache)
    assert len(cache) == len(r1.table)
    poisoned = {k: v for k, v in cache.items()}
    r2 = grid_search(g, cache=poisoned)
    assert r2.table == r1.table


def test_degenerate_grid_is_deterministic_walk():
    # theta = 0, F = I: every step permutes basis states, so one unit entry
    # stays in every row and c(t) pins at 1.
    g = GridSpec(topology="circle", P=3, F_choices=("I",), ks=(0,), t_max=60)
    res = grid_search(g)
    assert len(res.table) == 1
    assert res.table[0].c_min == pytest.approx(1.0)


def test_best_beats_fixed_angle_baseline():
    baseline = sweep_c(WalkSpec("circle", 3, 1), 200).c_min
    g = GridSpec(topology="circle", P=3, ks=(0, 3, 5), t_max=200)
    res = grid_search(g)
    assert res.best.c_min <= baseline + 1e-12


def test_grid_spec_validation():
    with pytest.raises(ValidationError):
        GridSpec(topology="circle", P=3, F_choices=())
    with pytest.raises(ValidationError):
        GridSpec(topology="circle", P=3, ks=(12,))
    with pytest.raises(ValidationError):
        GridSpec(topology="circle", P=3, t_max=0)


def test_workers_match_serial():
    g = GridSpec(topology="hypercube_tensor", P=2, ks=(0, 5, 8), t_max=40)
    assert grid_search(g, workers=2).table == grid_search(g).table
