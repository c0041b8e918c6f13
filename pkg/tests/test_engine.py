import copy

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gossipnash.engine import (
    StepSizePolicy,
    advance,
    gossip_exchange,
    init,
    local_step,
    run,
    run_full_coupling,
    select_pair,
)
from gossipnash.exceptions import InfeasibleInit, NotCommNeighbors, ValidationError
from gossipnash.game import ActionInterval, GameSpec, QuadraticCost
from gossipnash.graphs import PlayerGraph, maximal_triangle_free_spanning_subgraph
from gossipnash.indexing import comm_matrix
from suite import five_player_game, five_player_x_star, quadratic_game, random_comm_graph, random_connected_graph

PATH3 = PlayerGraph.path(3)


def decoupled(n, diag=2.0, c=0.0, bounds=(0.0, 10.0), graph=None):
    g = graph or PlayerGraph.path(n)
    return GameSpec(g, [ActionInterval(*bounds)] * n, QuadraticCost(diag * np.eye(n), np.full(n, c)))


def test_midpoint_init():
    state = init(decoupled(3), PATH3)
    assert np.array_equal(state.x_tilde, np.full(7, 5.0))
    assert not state.nu.any() and state.k == 0


def test_explicit_init():
    state = init(decoupled(3), PATH3, init_rule=[1.0, 2.0, 3.0])
    assert np.array_equal(state.x, [1.0, 2.0, 3.0])
    assert np.array_equal(state.x_tilde, [1, 2, 1, 2, 3, 2, 3])
    state = init(decoupled(3), PATH3, init_rule=np.arange(1.0, 8.0))
    assert np.array_equal(state.x_tilde, np.arange(1.0, 8.0))
    with pytest.raises(InfeasibleInit):
        init(decoupled(3), PATH3, init_rule=[1.0, 2.0, 30.0])
    with pytest.raises(InfeasibleInit):
        init(decoupled(3), PATH3, init_rule=[1.0, 2.0])


def test_min_action_guard():
    with pytest.raises(InfeasibleInit):
        init(decoupled(3), PATH3, init_rule="lower", min_action=0.1)


def test_same_seed_same_state():
    spec = quadratic_game(PATH3, np.random.default_rng(0))
    a = init(spec, PATH3, "uniform", seed=4)
    b = init(spec, PATH3, "uniform", seed=4)
    assert np.array_equal(a.x_tilde, b.x_tilde)
    assert [select_pair(a) for _ in range(50)] == [select_pair(b) for _ in range(50)]


def test_select_pair_single_edge():
    state = init(decoupled(2), PlayerGraph.path(2))
    assert all(set(select_pair(state)) == {1, 2} for _ in range(100))


def test_gossip_exchange_path_example():
    state = init(decoupled(3), PATH3, init_rule=np.arange(1.0, 8.0))
    out = gossip_exchange(state, 1, 2)
    assert np.array_equal(out, [2, 3, 2, 3, 5, 6, 7])
    assert np.array_equal(state.x_tilde, np.arange(1.0, 8.0))
    with pytest.raises(NotCommNeighbors):
        gossip_exchange(state, 1, 3)


def test_gossip_exchange_consensus_fixed_point():
    state = init(decoupled(3), PATH3, init_rule=[4.0, 4.0, 4.0])
    assert np.array_equal(gossip_exchange(state, 2, 3), state.x_tilde)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_gossip_exchange_equals_matrix_product(seed):
    rng = np.random.default_rng(seed)
    g_i = random_connected_graph(rng, int(rng.integers(2, 10)))
    g_c = random_comm_graph(rng, g_i)
    spec = quadratic_game(g_i, rng)
    state = init(spec, g_c, "uniform", seed=seed)
    for _ in range(10):
        i, j = select_pair(state)
        W = comm_matrix(state.index_map, i, j)
        assert np.max(np.abs(gossip_exchange(state, i, j) - W @ state.x_tilde)) <= 1e-15


def test_local_step_gradient_example():
    spec = decoupled(2)
    state = init(spec, PlayerGraph.path(2), init_rule=[3.0, 3.0], policy=StepSizePolicy.constant(0.1))
    x, _ = local_step(state, gossip_exchange(state, 1, 2), (1, 2))
    assert x == pytest.approx([2.4, 2.4], abs=1e-15)
    assert state.k == 1 and list(state.nu[1:]) == [1, 1]


def test_local_step_clamps_to_action_set():
    spec = decoupled(2, diag=0.0, c=6.0)
    state = init(spec, PlayerGraph.path(2), init_rule=[0.2, 0.2], policy=StepSizePolicy.constant(1.0))
    x, _ = local_step(state, gossip_exchange(state, 1, 2), (1, 2))
    assert np.array_equal(x, [0.0, 0.0])


def test_zero_gradient_keeps_actions():
    spec = decoupled(3, diag=0.0)
    state = init(spec, PATH3, init_rule=[1.0, 2.0, 3.0])
    before = state.x.copy()
    for _ in range(20):
        advance(state)
    assert np.array_equal(state.x, before)


def test_diminishing_first_step_is_one():
    pol = StepSizePolicy.diminishing()
    assert pol.step(1, 1) == 1.0 and pol.step(2, 4) == 0.25
    assert StepSizePolicy.constant([0.1, 0.2]).step(2, 7) == 0.2
    with pytest.raises(ValidationError):
        StepSizePolicy.constant(0.0)


def test_advance_matches_manual_sequence():
    rng = np.random.default_rng(2)
    g_i = random_connected_graph(rng, 8)
    g_c = random_comm_graph(rng, g_i)
    spec = quadratic_game(g_i, rng)
    fused = init(spec, g_c, "uniform", seed=9)
    manual = copy.deepcopy(fused)
    for _ in range(500):
        pair = advance(fused)
        assert select_pair(manual) == pair
        local_step(manual, gossip_exchange(manual, *pair), pair)
        assert np.array_equal(fused.x_tilde, manual.x_tilde)
        assert np.array_equal(fused.nu, manual.nu)


def test_state_invariants_along_run():
    rng = np.random.default_rng(4)
    g_i = random_connected_graph(rng, 7)
    g_c = random_comm_graph(rng, g_i)
    spec = quadratic_game(g_i, rng, bounds=(-1.0, 2.0))
    state = init(spec, g_c, "uniform", seed=1)
    imap = state.index_map
    lo, hi = spec.lower[imap.column], spec.upper[imap.column]
    for _ in range(2000):
        nu_before = state.nu.copy()
        i, j = advance(state)
        changed = set(np.nonzero(state.nu != nu_before)[0])
        assert changed == {i, j}
        assert np.all(state.x_tilde >= lo - 1e-12) and np.all(state.x_tilde <= hi + 1e-12)
        assert np.array_equal(state.x, state.x_tilde[imap.own_slots])


def test_zero_iterations_trace():
    tr = run(five_player_game(), maximal_triangle_free_spanning_subgraph(five_player_game().graph), n_iters=0, x_star=five_player_x_star())
    assert len(tr) == 1 and tr.k == [0]
    assert tr.to_csv().strip() == ",".join(tr.header())


def test_trace_records_stride_and_final():
    spec = five_player_game()
    g_c = maximal_triangle_free_spanning_subgraph(spec.graph)
    tr = run(spec, g_c, n_iters=25, stride=10)
    assert tr.k == [0, 10, 20, 25]
    assert all(np.isnan(tr.res_ne))


def test_complete_graph_full_coupling_coincides():
    g = PlayerGraph.complete(4)
    spec = quadratic_game(g, np.random.default_rng(1))
    g_c = maximal_triangle_free_spanning_subgraph(g)
    a = run(spec, g_c, seed=3, n_iters=300, stride=1)
    b = run_full_coupling(spec, g_c, seed=3, n_iters=300, stride=1)
    assert np.array_equal(a.actions, b.actions)


def test_run_is_deterministic():
    spec = five_player_game()
    g_c = maximal_triangle_free_spanning_subgraph(spec.graph)
    a = run(spec, g_c, seed=5, n_iters=2000, x_star=five_player_x_star()).to_csv()
    b = run(spec, g_c, seed=5, n_iters=2000, x_star=five_player_x_star()).to_csv()
    c = run(spec, g_c, seed=6, n_iters=2000, x_star=five_player_x_star()).to_csv()
    assert a == b and a != c


def test_short_run_approaches_equilibrium():
    spec = five_player_game()
    g_c = maximal_triangle_free_spanning_subgraph(spec.graph)
    tr = run(spec, g_c, seed=0, n_iters=20_000, x_star=five_player_x_star(), stride=100)
    assert tr.res_ne[-1] < 1.0
    assert tr.res_ne[-1] < tr.res_ne[0]


def test_stop_at_ends_early():
    spec = five_player_game()
    g_c = maximal_triangle_free_spanning_subgraph(spec.graph)
    tr = run(spec, g_c, seed=0, n_iters=20_000, x_star=five_player_x_star(), stride=10, stop_at=5.0)
    assert tr.res_ne[-1] <= 5.0 and tr.k[-1] < 20_000
    assert tr.events_to_target(5.0) == tr.k[-1]


def test_diagnostics_tail_sums():
    spec = five_player_game()
    g_c = maximal_triangle_free_spanning_subgraph(spec.graph)
    tr = run(spec, g_c, seed=0, n_iters=5000, x_star=five_player_x_star(), stride=50, diagnostics=True)
    assert len(tr.interval_consensus_sq) == len(tr)
    tail_c, tail_a = tr.tail_sums(0.1)
    assert 0.0 <= tail_c <= tr.cum_consensus_sq[-1]
    assert 0.0 <= tail_a <= tr.cum_action_sq[-1]


def test_full_algorithm_needs_connected_subgraph():
    spec = five_player_game()
    with pytest.raises(ValidationError):
        init(spec, PlayerGraph.from_edges(5, [(1, 2), (3, 4)]), algorithm="full")
    with pytest.raises(ValidationError):
        init(spec, maximal_triangle_free_spanning_subgraph(spec.graph), algorithm="bogus")
