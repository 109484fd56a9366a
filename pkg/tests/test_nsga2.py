import json
import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vitalselect import nsga2 as ga
from vitalselect.toyproblem import ToyProblem, all_masks, mask_code


def brute_fronts(objs):
    """Peel fronts with explicit pairwise comparisons."""
    objs = [tuple(o) for o in objs]
    left = set(range(len(objs)))
    fronts = []
    while left:
        front = sorted(i for i in left
                       if not any(all(objs[j][k] >= objs[i][k] for k in range(len(objs[i])))
                                  and any(objs[j][k] > objs[i][k] for k in range(len(objs[i])))
                                  for j in left))
        fronts.append(front)
        left -= set(front)
    return fronts


def test_dominates_examples():
    assert ga.dominates((2, 2, 2), (1, 1, 1))
    assert not ga.dominates((1, 1, 1), (1, 1, 1))
    assert not ga.dominates((2, 0, 0), (0, 2, 0)) and not ga.dominates((0, 2, 0), (2, 0, 0))
    with pytest.raises(ValueError):
        ga.dominates((1, 2), (1, 2, 3))


@given(st.integers(1, 50), st.integers(0, 2**32 - 1), st.booleans())
@settings(max_examples=120, deadline=None)
def test_sort_matches_brute_force(n, seed, coarse):
    rng = np.random.default_rng(seed)
    objs = rng.integers(0, 4, size=(n, 3)) if coarse else rng.random((n, 3))
    fronts = ga.fast_nondominated_sort(objs)
    assert [sorted(f) for f in fronts] == brute_fronts(objs.tolist())
    flat = [i for f in fronts for i in f]
    assert sorted(flat) == list(range(n))


def test_sort_trivial_shapes():
    assert [sorted(f) for f in ga.fast_nondominated_sort(np.ones((6, 3)))] == [list(range(6))]
    chain = np.arange(5)[:, None] * np.ones((1, 3))
    assert ga.fast_nondominated_sort(chain) == [[4], [3], [2], [1], [0]]


def test_crowding_hand_values():
    d = ga.crowding_distance(np.array([[0, 1], [0.5, 0.5], [1, 0]]))
    assert d[0] == math.inf and d[2] == math.inf and d[1] == 2.0
    assert ga.crowding_distance(np.array([[1.0, 2.0], [3.0, 4.0]])).tolist() == [math.inf] * 2
    n = ga.crowding_distance(np.array([[0, 10], [0.5, 5], [1, 0]]), normalized=True)
    assert n[1] == pytest.approx(2.0)


def test_crowding_duplicates_get_zero_increment():
    d = ga.crowding_distance(np.array([[0.0, 1.0], [0.5, 0.5], [0.5, 0.5], [1.0, 0.0]]))
    assert d[0] == d[3] == math.inf
    assert sorted(d[1:3].tolist()) == [1.0, 1.0]


def ind(rank, crowd):
    i = ga.Individual(np.ones(3, dtype=bool), (0, 0, 0))
    i.rank, i.crowding = rank, crowd
    return i


def test_tournament_prefers_rank_then_crowding():
    rng = np.random.default_rng(0)
    assert all(ga.binary_tournament([ind(1, 0.0), ind(3, 9.0)], rng).rank == 1 for _ in range(100))
    assert all(ga.binary_tournament([ind(2, math.inf), ind(2, 1.0)], rng).crowding == math.inf
               for _ in range(100))


def test_tournament_coin_flip_is_fair():
    rng = np.random.default_rng(1)
    a, b = ind(1, 1.0), ind(1, 1.0)
    wins = sum(ga.binary_tournament([a, b], rng) is a for _ in range(10_000))
    assert abs(wins / 10_000 - 0.5) < 0.03


def test_operators():
    rng = np.random.default_rng(0)
    m = rng.random(40) < 0.5
    assert np.array_equal(ga.mutate(m, rng, 0.0), m)
    assert np.array_equal(ga.mutate(m, rng, 1.0), ~m)
    c1, c2 = ga.crossover(m, m, rng)
    assert np.array_equal(c1, m) and np.array_equal(c2, m)
    other = ~m
    c1, c2 = ga.crossover(m, other, rng)
    assert np.array_equal(c1 ^ c2, np.ones(40, dtype=bool))
    with pytest.raises(ValueError):
        ga.crossover(m, m[:10], rng)


def test_config_validation():
    with pytest.raises(ValueError):
        ga.GaConfig(population_size=1)
    with pytest.raises(ValueError):
        ga.GaConfig(crossover_rate=1.5)
    with pytest.raises(ValueError):
        ga.GaConfig(objective_mode="maximize_everything")


def popcount_fitness(mask):
    f = mask.mean()
    return (f, 1 - f, 0.0)


def audit(archive):
    objs = np.array([m.objectives for m in archive])
    assert not ga.dominance_matrix(objs).any()
    keys = [m.key for m in archive]
    assert len(keys) == len(set(keys))


def test_archive_pure_every_generation_and_elitist():
    best = []

    def check(gen, archive, pop):
        audit(archive)
        best.append(np.max([m.objectives for m in archive], axis=0))

    toy = ToyProblem(3)
    ga.evolve(ga.GaConfig(20, 15, seed=2), toy, 12, on_generation=check)
    best = np.array(best)
    assert np.all(np.diff(best, axis=0) >= -1e-15)


def test_popcount_fitness_archive_spans_sizes():
    res = ga.evolve(ga.GaConfig(30, 20, seed=0), popcount_fitness, 16)
    audit(res.archive)
    assert len({int(m.mask.sum()) for m in res.archive}) > 3


def test_zero_generations_is_initial_front():
    cfg = ga.GaConfig(12, 0, seed=5)
    toy = ToyProblem(1)
    res = ga.evolve(cfg, toy, 12)
    rng = np.random.default_rng(5)
    init = [rng.random(12) < 0.5 for _ in range(12)]
    objs = np.array([toy(m) if m.any() else ga.PENALTY for m in init])
    front = {mask_code(init[i]) for i in ga.fast_nondominated_sort(objs)[0]}
    assert {mask_code(m.mask) for m in res.archive} == front


def test_toy_problem_exhaustive_recovery():
    toy = ToyProblem(0)
    res = ga.evolve(ga.GaConfig(50, 50, seed=0), toy, 12)
    got = {mask_code(m.mask) for m in res.archive}
    truth = toy.pareto_codes()
    assert got <= truth
    assert len(got) / len(truth) >= 0.9


def test_failures_and_empty_masks_are_penalized():
    calls = []

    def flaky(mask):
        calls.append(mask.copy())
        if mask[0]:
            raise RuntimeError("boom")
        return (float(mask.sum()), 0.0, 0.0)

    cache = {}
    out = ga._evaluate([np.array([True, False]), np.array([False, False]), np.array([False, True])],
                       flaky, cache, None)
    assert out == [ga.PENALTY, ga.PENALTY, (1.0, 0.0, 0.0)]
    assert len(calls) == 2  # the empty mask never reaches fitness


def test_cache_avoids_repeat_evaluations():
    n = [0]

    def counting(mask):
        n[0] += 1
        return popcount_fitness(mask)

    res = ga.evolve(ga.GaConfig(10, 10, seed=1), counting, 4)
    # the empty mask is cached as a penalty without calling fitness
    assert n[0] <= 15 and res.n_evaluations <= 16


def test_parallel_evaluation_same_archive(tmp_path):
    toy = ToyProblem(2)
    cfg = ga.GaConfig(24, 10, seed=9)
    a = ga.evolve(cfg, toy, 12, telemetry_path=tmp_path / "t.jsonl")
    with ThreadPoolExecutor(4) as ex:
        b = ga.evolve(cfg, toy, 12, executor=ex)
    assert a.archive.to_dict() == b.archive.to_dict()
    lines = [json.loads(s) for s in (tmp_path / "t.jsonl").read_text().splitlines()]
    assert [r["generation"] for r in lines] == list(range(11))
    assert {"best_o1", "best_o2", "best_o3", "archive_size", "wall_time_s"} <= set(lines[0])


def test_archive_best_rule():
    arch = ga.ParetoArchive()
    mk = lambda bits, o: ga.Individual(np.array(bits, dtype=bool), o)
    arch.update([mk([1, 0], (0.9, 0.5, 0.4)), mk([0, 1], (0.8, 0.6, 0.4)), mk([1, 1], (0.5, 0.9, 0.2))])
    assert arch.best().objectives == (0.9, 0.5, 0.4)
    arch.update([mk([1, 0], (0.0, 0.0, 0.0))])  # same mask: first evaluation kept
    assert len(arch) == 3 and arch.is_pure()


def test_toy_table_is_exhaustive():
    toy = ToyProblem(0)
    assert toy.table.shape == (4095, 3)
    assert len(all_masks()) == 4095
    assert len(toy.pareto_codes()) == 26
