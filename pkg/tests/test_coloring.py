import itertools
import math

import numpy as np
import pytest

from localcut.coloring import (BLUE, RED, UNCOLORED, ColoringAssignment, balance_repair, cut_size,
                               empirical_two_ball_distribution, run_schedule, swap_intervals, vertex_type)
from localcut.graphs import Graph, complete_bipartite, complete_graph, cycle_graph, sample_regular_graph
from localcut.rng import FixedSeeds, SeedTable
from localcut.tree import initial_measure, run_phase1
from localcut.vertex_types import StepParams, VertexType

EDGE = Graph.from_edges(2, [(0, 1)])
HALF = [StepParams(1, VertexType(0, 0), 1, 0.5, 0.0)]


@pytest.fixture(scope="module")
def coarse_schedule():
    _, sched = run_phase1(5, 0.05)
    return sched


def test_vertex_type_examples():
    g = complete_graph(4)
    col = ColoringAssignment.blank(4)
    assert vertex_type(g, col, 0) == (0, 0)
    col.color[1] = RED
    col.color[2:] = BLUE
    assert vertex_type(g, col, 0) == (1, 2)


def test_hand_trace_normal_and_colorblind():
    seeds = FixedSeeds([[0.3, 0.7]])
    normal = run_schedule(EDGE, HALF, seeds)
    assert list(normal.color) == [RED, BLUE]
    blind = run_schedule(EDGE, HALF, seeds, "colorblind")
    assert list(blind.color) == [BLUE, RED]
    assert list(normal.step) == [1, 1] and not normal.strict.any()


def test_swap_intervals_is_involution():
    s = np.random.default_rng(0).random(1000)
    for q in (0.1, 0.25, 0.5):
        assert np.allclose(swap_intervals(swap_intervals(s, q), q), s)
        assert np.array_equal(np.sort(swap_intervals(s, q) <= q), np.sort((s > q) & (s <= 2 * q)))


def test_empty_schedule_uses_coin_only():
    g = sample_regular_graph(100, 3, 0)
    col = run_schedule(g, [], SeedTable(1, g.n))
    assert col.fully_colored()
    assert (col.step == 1).all()


def test_assignment_invariants(coarse_schedule):
    g = sample_regular_graph(3000, 5, 1)
    snaps = {}
    col = run_schedule(g, coarse_schedule, SeedTable(2, g.n), snapshots=snaps)
    N = len(coarse_schedule)
    assert set(snaps) == set(range(N + 2))
    for t, s in snaps.items():
        assert np.array_equal(s.color == UNCOLORED, s.step == 0)
    strict_steps = {p.t for p in coarse_schedule if p.multiplicity == 2}
    assert all(int(t) in strict_steps for t in col.step[col.strict])
    assert not col.strict[col.step == N + 1].any()


def test_colored_counts_concentrate(coarse_schedule):
    g = sample_regular_graph(20_000, 5, 3)
    col = run_schedule(g, coarse_schedule, SeedTable(4, g.n))
    for new, cand, p in zip(col.newly_colored, col.dominant_candidates, col.color_probability):
        sd = math.sqrt(cand * p * (1 - p))
        assert abs(new - cand * p) <= 5 * sd + 1e-9


def test_deterministic(coarse_schedule):
    g = sample_regular_graph(1000, 5, 5)
    a = run_schedule(g, coarse_schedule, SeedTable(6, g.n))
    b = run_schedule(g, coarse_schedule, SeedTable(6, g.n))
    assert np.array_equal(a.color, b.color) and np.array_equal(a.step, b.step)


def _distances(g, v):
    import collections
    dist = {v: 0}
    dq = collections.deque([v])
    while dq:
        x = dq.popleft()
        for y in g.neighbors(x):
            if int(y) not in dist:
                dist[int(y)] = dist[x] + 1
                dq.append(int(y))
    return dist


@pytest.mark.parametrize("t", [1, 2, 3, 5])
def test_locality(coarse_schedule, t):
    g = sample_regular_graph(4000, 5, 7)
    v = 17
    dist = _distances(g, v)
    outside = np.array([dist.get(u, 10 ** 9) > t - 1 for u in range(g.n)])
    base = {}
    run_schedule(g, coarse_schedule[:t], SeedTable(8, g.n), snapshots=base)
    other = {}
    run_schedule(g, coarse_schedule[:t], SeedTable(8, g.n, rekey=outside, alt_seed=9), snapshots=other)
    assert base[t].color[v] == other[t].color[v]
    # and re-randomizing everything does change something somewhere
    assert not np.array_equal(base[t].color, other[t].color) or t == 1


def test_cut_size_examples():
    g = complete_graph(4)
    col = ColoringAssignment.blank(4)
    col.color[:] = [RED, RED, BLUE, BLUE]
    assert cut_size(g, col) == 4
    col.color[:] = RED
    assert cut_size(g, col) == 0
    k33 = complete_bipartite(3, 3)
    col = ColoringAssignment.blank(6)
    col.color[:] = [RED] * 3 + [BLUE] * 3
    assert cut_size(k33, col) == 9
    with pytest.raises(ValueError):
        cut_size(k33, ColoringAssignment.blank(6))


def test_balance_repair():
    g = cycle_graph(10)
    col = ColoringAssignment.blank(10)
    col.color[:] = [RED] * 5 + [BLUE] * 5
    assert balance_repair(g, col, 0).moves == 0
    col.color[:] = [RED] * 8 + [BLUE] * 2
    res = balance_repair(g, col, 0)
    assert res.moves == 3
    assert res.coloring.class_sizes() == (5, 5)
    assert (col.color[res.moved] == RED).all()
    g11 = cycle_graph(11)
    col11 = ColoringAssignment.blank(11)
    col11.color[:] = [BLUE] * 9 + [RED] * 2
    nr, nb = balance_repair(g11, col11, 1).coloring.class_sizes()
    assert abs(nr - nb) <= 1


def test_two_ball_distribution_extremes(coarse_schedule):
    g = sample_regular_graph(500, 5, 11)
    blank = empirical_two_ball_distribution(g, ColoringAssignment.blank(g.n))
    assert np.array_equal(blank.mass, initial_measure(5).mass)
    col = run_schedule(g, coarse_schedule, SeedTable(1, g.n))
    full = empirical_two_ball_distribution(g, col)
    assert full.fully_colored()
    assert full.total() == pytest.approx(1.0)


def test_colorblind_coupling_even_cycle_exact():
    # one symmetric step with 2q = 1 colors everything; integrate over the seed cells
    g = cycle_graph(6)
    total = 0
    cells = list(itertools.product((0.25, 0.75), repeat=g.n))
    for cell in cells:
        seeds = FixedSeeds([list(cell)])
        a = run_schedule(g, HALF, seeds)
        b = run_schedule(g, HALF, seeds, "colorblind")
        total += cut_size(g, a) + cut_size(g, b)
    assert total / len(cells) == g.m


@pytest.mark.slow
def test_two_ball_distribution_matches_tree_early():
    # while the class imbalance is still small the graph follows the tree; colors are
    # correlated over growing clusters, so error bars come from the spread across graphs
    from localcut.graphs import treelike_mask
    from localcut.tree import cut_per_vertex
    eps, t = 1e-2, 20
    mu_t, sched = run_phase1(5, eps, max_steps=t)
    want = mu_t.type_masses()
    keys = sorted(want, key=lambda D: -want[D])[:8]
    rows = []
    for s in range(6):
        g = sample_regular_graph(50_000, 5, 2024 + s)
        snaps = {}
        run_schedule(g, sched, SeedTable(3000 + s, g.n), snapshots=snaps)
        emp = empirical_two_ball_distribution(g, snaps[t], treelike_mask(g, 2))
        tm = emp.type_masses()
        rows.append([tm.get(D, 0.0) for D in keys] + [cut_per_vertex(emp)])
    x = np.array(rows)
    ref = np.array([want[D] for D in keys] + [cut_per_vertex(mu_t)])
    se = x.std(axis=0, ddof=1) / math.sqrt(len(x))
    assert (np.abs(x.mean(axis=0) - ref) <= 4 * se + 2e-4).all()


@pytest.mark.slow
def test_class_imbalance_amplifies():
    # majority-following steps amplify the initial sqrt(n) imbalance; the sign is random
    _, sched = run_phase1(5, 1e-2)
    signs, big = set(), 0
    for s in range(6):
        g = sample_regular_graph(20_000, 5, s)
        col = run_schedule(g, sched, SeedTable(100 + s, g.n))
        nr, nb = col.class_sizes()
        signs.add(nr > nb)
        big += abs(nr - nb) / g.n > 0.05
    assert signs == {True, False}
    assert big >= 4
