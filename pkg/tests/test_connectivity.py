import numpy as np
import pytest

from fedsim.connectivity import (
    LinkState,
    build_neighbor_graph,
    charge_upload,
    mark_all_online,
    participation,
    step_connectivity,
)
from fedsim.errors import BudgetError, ConfigError

from oracles import markov_online_fraction


def make_states(n, budget=None):
    return {cid: LinkState(budget_remaining=budget) for cid in range(n)}


def make_rngs(n, seed):
    seqs = np.random.SeedSequence(seed).spawn(n)
    return {cid: np.random.default_rng(seqs[cid]) for cid in range(n)}


class TestStepConnectivity:
    def test_no_transitions_keeps_everyone_online(self):
        states = make_states(5)
        rngs = make_rngs(5, seed=0)
        for _ in range(10):
            online, recovered, offline = step_connectivity(states, 0.0, 0.0, rngs)
            assert online == list(range(5)) and recovered == [] and offline == []

    def test_certain_dropout_without_recovery(self):
        states = make_states(4)
        rngs = make_rngs(4, seed=1)
        online, _, offline = step_connectivity(states, 1.0, 0.0, rngs)
        assert online == [] and offline == list(range(4))
        for _ in range(5):
            online, recovered, offline = step_connectivity(states, 1.0, 0.0, rngs)
            assert online == [] and recovered == [] and offline == list(range(4))

    def test_partition_and_recovered_subset(self):
        states = make_states(30)
        rngs = make_rngs(30, seed=2)
        prev_offline = set()
        for _ in range(50):
            online, recovered, offline = step_connectivity(states, 0.3, 0.2, rngs)
            assert sorted(online + offline) == list(range(30))
            assert set(recovered) <= set(online)
            assert set(recovered) <= prev_offline
            prev_offline = set(offline)

    def test_stationary_online_fraction(self):
        # Closed form for the two-state chain: 0.1 / (0.1 + 0.2) = 1/3.
        p_offline, p_recover = 0.2, 0.1
        expected = markov_online_fraction(p_offline, p_recover)
        assert expected == pytest.approx(1.0 / 3.0)
        n, rounds, burn_in = 100, 2100, 100
        states = make_states(n)
        rngs = make_rngs(n, seed=3)
        online_count = 0
        for t in range(rounds):
            online, _, _ = step_connectivity(states, p_offline, p_recover, rngs)
            if t >= burn_in:
                online_count += len(online)
        fraction = online_count / (n * (rounds - burn_in))
        assert abs(fraction - expected) < 0.01

    def test_history_appended_each_round(self):
        states = make_states(3)
        rngs = make_rngs(3, seed=4)
        mark_all_online(states)
        for _ in range(7):
            step_connectivity(states, 0.5, 0.5, rngs)
        assert all(len(s.history) == 8 for s in states.values())


class TestParticipation:
    def test_zero_uploads(self):
        assert participation(0, 10) == 0.0

    def test_full_participation(self):
        assert participation(10, 10) == 1.0

    def test_half(self):
        assert participation(5, 10) == 0.5

    def test_round_zero_rejected(self):
        with pytest.raises(ConfigError):
            participation(0, 0)

    def test_nonincreasing_when_round_advances_without_upload(self):
        for n in range(0, 8):
            for t in range(max(n, 1), 12):
                assert participation(n, t + 1) <= participation(n, t)


class TestChargeUpload:
    def test_single_charge(self):
        state = LinkState(budget_remaining=20)
        charge_upload(state)
        assert state.budget_remaining == 19 and state.n_uploads == 1

    def test_budget_exhaustion_blocks_upload(self):
        state = LinkState(budget_remaining=20)
        for _ in range(20):
            charge_upload(state)
        assert state.budget_remaining == 0 and not state.can_upload
        with pytest.raises(BudgetError):
            charge_upload(state)

    def test_conservation_after_charges(self):
        state = LinkState(budget_remaining=20)
        for _ in range(13):
            charge_upload(state)
        assert state.n_uploads + state.budget_remaining == 20

    def test_unlimited_budget_never_blocks(self):
        state = LinkState(budget_remaining=None)
        for _ in range(100):
            charge_upload(state)
        assert state.n_uploads == 100 and state.can_upload


class TestNeighborGraph:
    def test_two_clients_point_at_each_other(self):
        graph = build_neighbor_graph(
            {0: np.array([0.0, 0.0]), 1: np.array([1.0, 0.0])}, chi=3
        )
        assert [nid for nid, _ in graph[0]] == [1]
        assert [nid for nid, _ in graph[1]] == [0]

    def test_line_positions_nearest_two(self):
        positions = {
            0: np.array([0.0, 0.0]),
            1: np.array([1.0, 0.0]),
            2: np.array([2.0, 0.0]),
            3: np.array([10.0, 0.0]),
        }
        graph = build_neighbor_graph(positions, chi=2)
        assert [nid for nid, _ in graph[2]] == [1, 0]

    def test_chi_at_least_n_minus_one_gives_complete_graph(self):
        positions = {i: np.array([float(i), 0.0]) for i in range(5)}
        graph = build_neighbor_graph(positions, chi=10)
        for cid, neighbors in graph.items():
            assert len(neighbors) == 4
            assert cid not in [nid for nid, _ in neighbors]

    def test_distances_sorted_ascending(self):
        rng = np.random.default_rng(5)
        positions = {i: rng.uniform(size=2) for i in range(12)}
        graph = build_neighbor_graph(positions, chi=6)
        for neighbors in graph.values():
            dists = [d for _, d in neighbors]
            assert dists == sorted(dists)

    def test_tie_broken_by_ascending_id(self):
        positions = {
            0: np.array([0.0, 0.0]),
            1: np.array([1.0, 0.0]),
            2: np.array([-1.0, 0.0]),
            3: np.array([0.0, 5.0]),
        }
        graph = build_neighbor_graph(positions, chi=1)
        assert graph[0] == [(1, 1.0)]

    def test_single_client_rejected(self):
        with pytest.raises(ConfigError):
            build_neighbor_graph({0: np.zeros(2)}, chi=1)
