import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flowsched.core import Instance, Order, total_weighted_tardiness
from flowsched.heuristics import (best_heuristic_baseline, descending_total_order, greedy_schedule, neh_schedule,
                                  suliman_schedule)
from flowsched.instances import DESK_DISTRIBUTION, generate_instance
from oracles import enumerate_optimum, random_instance
from test_core import small_instances

ALL = (greedy_schedule, neh_schedule, suliman_schedule)


def test_greedy_single_order():
    inst = Instance([[3.0, 1.0], [1.0, 1.0]], [Order("a", 0, 1.0, (0, 1))])
    assert list(greedy_schedule(inst).perm) == [1, 0]


def test_greedy_ties_keep_index_order():
    inst = Instance([[2.0, 2.0, 2.0]], [Order("a", 0, 1.0, (0, 1, 2))])
    assert list(greedy_schedule(inst).perm) == [0, 1, 2]


def test_greedy_priorities():
    # totals (5, 3, 4), weights (.5, .3, .2) -> priorities (.1, .1, .05)
    inst = Instance([[5.0, 3.0, 4.0]], [Order("a", 0, 0.5, (0,)), Order("b", 0, 0.3, (1,)),
                                        Order("c", 0, 0.2, (2,))])
    assert list(greedy_schedule(inst).perm) == [0, 1, 2]


def test_single_task():
    inst = Instance([[2.0], [1.0]], [Order("a", 0, 1.0, (0,))])
    for h in ALL:
        assert list(h(inst).perm) == [0]


def test_neh_two_tasks_picks_better(rng):
    for _ in range(20):
        inst = random_instance(rng, 2, 3, deadline_scale=0.3)
        vals = [total_weighted_tardiness(inst, p) for p in ([0, 1], [1, 0])]
        assert neh_schedule(inst).objective == min(vals)


@pytest.mark.parametrize("seed", range(30))
def test_heuristics_never_beat_enumeration(seed):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, int(rng.integers(1, 7)), int(rng.integers(1, 5)), deadline_scale=0.3)
    opt, _ = enumerate_optimum(inst)
    for h in ALL:
        r = h(inst)
        assert sorted(r.perm) == list(range(inst.n))
        assert r.objective == total_weighted_tardiness(inst, r.perm)
        assert r.objective >= opt - 1e-9
    assert best_heuristic_baseline(inst) >= opt - 1e-9


def test_suliman_returns_optimal_seed_unchanged():
    # seed (descending totals) is 0, 1, 2 and every order is on time
    inst = Instance([[3.0, 2.0, 1.0]], [Order(str(t), 100.0, 1 / 3, (t,)) for t in range(3)])
    assert list(descending_total_order(inst)) == [0, 1, 2]
    assert list(suliman_schedule(inst).perm) == [0, 1, 2]


def test_suliman_improves_on_seed(rng):
    for _ in range(50):
        inst = random_instance(rng, int(rng.integers(2, 12)), 3, deadline_scale=0.3)
        seed_val = total_weighted_tardiness(inst, descending_total_order(inst))
        assert suliman_schedule(inst).objective <= seed_val


def test_suliman_phase_two_by_hand():
    # one machine, three single-task orders; seed = (0, 1, 2) by total time
    inst = Instance([[3.0, 2.0, 1.0]], [Order("a", 6.0, 0.2, (0,)), Order("b", 5.0, 0.3, (1,)),
                                        Order("c", 1.0, 0.5, (2,))])
    # seed (0,1,2): C=(3,5,6) -> .5*5 = 2.5
    # (0,2): (2,1,0) C=(1,3,6) -> 0 ; first improving swap for a=0 (b=1 gives (1,0,2): C=2,5,6 -> 2.5, not better)
    # task 2 moved forward, task 0 moved back; position 0 now holds task 2 which may not move back.
    # a=1: swap with b=2 -> (2,0,1): C=1,4,6 -> .3*1 = .3 worse than 0.
    r = suliman_schedule(inst)
    assert list(r.perm) == [2, 1, 0]
    assert r.objective == 0.0


def test_baseline_is_min_of_both(rng):
    for _ in range(20):
        inst = random_instance(rng, 8, 3, deadline_scale=0.3)
        assert best_heuristic_baseline(inst) == min(neh_schedule(inst).objective, suliman_schedule(inst).objective)


def test_neh_beats_greedy_on_average():
    rng = np.random.default_rng(2024)
    insts = [generate_instance(DESK_DISTRIBUTION, rng) for _ in range(500)]
    neh = np.mean([neh_schedule(i).objective for i in insts])
    greedy = np.mean([greedy_schedule(i).objective for i in insts])
    assert neh <= greedy


@settings(max_examples=100, deadline=None)
@given(small_instances(max_n=6, integer=False))
def test_heuristic_properties(inst):
    opt = enumerate_optimum(inst)[0]
    for h in ALL:
        res = h(inst)
        assert sorted(res.perm) == list(range(inst.n))
        assert res.objective == total_weighted_tardiness(inst, res.perm)
        assert res.objective >= opt - 1e-12
    seed_value = total_weighted_tardiness(inst, descending_total_order(inst))
    assert suliman_schedule(inst).objective <= seed_value
    assert best_heuristic_baseline(inst) == min(neh_schedule(inst).objective, suliman_schedule(inst).objective)


@settings(max_examples=60, deadline=None)
@given(small_instances(max_n=7), st.sampled_from([0.125, 0.5, 2.0, 8.0, 64.0]))
def test_heuristics_scale_invariant(inst, c):
    # a power-of-two factor scales exactly, so multiplying every time and deadline by c scales tardiness and leaves every decision unchanged
    scaled = Instance(inst.proc * c, [Order(o.id, o.deadline * c, o.weight, o.tasks) for o in inst.orders])
    for h in ALL:
        assert list(h(scaled).perm) == list(h(inst).perm)
