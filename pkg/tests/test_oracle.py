import itertools
import random

import pytest
from hypothesis import given, settings, strategies as st

from coverpart.geometry import BlockGrid, block_occupancy, build_graph, deploy
from coverpart.metrics import max_partitions_upper_bound
from coverpart.oracle import InstanceTooLarge, brute_force_max_partitions, verify_cover

from helpers import graph_from_edges, placements_in_blocks


class TestVerifyCover:
    grid = BlockGrid(2, 2, 1.0)

    def test_connected_but_block_missing(self):
        pl = placements_in_blocks([0, 1, 2, 3], self.grid)
        gr = graph_from_edges(4, [(0, 1), (1, 2), (2, 3)])
        check = verify_cover([0, 1, 2], self.grid, gr, pl)
        assert not check.ok and check.uncovered_blocks == [3]
        assert "uncovered blocks 3" in check.describe()

    def test_covered_but_split(self):
        pl = placements_in_blocks([0, 1, 2, 3], self.grid)
        gr = graph_from_edges(4, [(0, 1), (2, 3)])
        check = verify_cover([0, 1, 2, 3], self.grid, gr, pl)
        assert not check.ok and check.uncovered_blocks == []
        assert check.components == [[0, 1], [2, 3]]
        assert "2 components" in check.describe()

    def test_covered_and_connected(self):
        pl = placements_in_blocks([0, 1, 2, 3], self.grid)
        gr = graph_from_edges(4, [(0, 1), (1, 3), (3, 2)])
        check = verify_cover([3, 1, 0, 2], self.grid, gr, pl)
        assert check.ok and bool(check) and check.describe() == "ok"

    def test_empty(self):
        pl = placements_in_blocks([0], BlockGrid(1, 1, 1.0))
        assert not verify_cover([], BlockGrid(1, 1, 1.0), graph_from_edges(1, []), pl).ok

    def test_connectivity_only_through_members(self):
        pl = placements_in_blocks([0, 1, 2, 3, 0], self.grid)
        gr = graph_from_edges(5, [(0, 1), (2, 3), (1, 4), (4, 2)])
        assert not verify_cover([0, 1, 2, 3], self.grid, gr, pl).ok
        assert verify_cover([0, 1, 2, 3, 4], self.grid, gr, pl).ok

    @settings(max_examples=50)
    @given(st.integers(0, 2**31), st.randoms(use_true_random=False))
    def test_order_invariant(self, seed, rnd):
        g = BlockGrid.from_ranges(2, 2, 10, 10)
        pl = deploy(14, g, seed)
        gr = build_graph(pl, 10)
        members = rnd.sample(range(14), rnd.randint(1, 14))
        shuffled = list(members)
        rnd.shuffle(shuffled)
        a = verify_cover(members, g, gr, pl)
        b = verify_cover(shuffled + members[:2], g, gr, pl)
        assert (a.ok, a.uncovered_blocks, a.components) == (b.ok, b.uncovered_blocks, b.components)


class TestBruteForce:
    def test_single_block_three_nodes(self):
        g = BlockGrid(1, 1, 1.0)
        pl = placements_in_blocks([0, 0, 0], g)
        k, witness = brute_force_max_partitions(pl, g, graph_from_edges(3, [(0, 1), (1, 2), (0, 2)]))
        assert k == 3 and sorted(witness) == [[0], [1], [2]]

    def test_one_per_block_clique(self):
        g = BlockGrid(2, 2, 1.0)
        pl = placements_in_blocks([0, 1, 2, 3], g)
        k, witness = brute_force_max_partitions(pl, g, graph_from_edges(4, itertools.combinations(range(4), 2)))
        assert k == 1 and witness == [[0, 1, 2, 3]]

    def test_two_per_block_cross_connected(self):
        g = BlockGrid(2, 2, 1.0)
        pl = placements_in_blocks([0, 0, 1, 1, 2, 2, 3, 3], g)
        edges = [(i, j) for i, j in itertools.combinations(range(8), 2)
                 if pl[i].block_id != pl[j].block_id]
        k, witness = brute_force_max_partitions(pl, g, graph_from_edges(8, edges))
        assert k == 2
        assert not set(witness[0]) & set(witness[1])

    def test_connectivity_limits_count(self):
        # two nodes per block but only one cross-block path
        g = BlockGrid(1, 2, 1.0)
        pl = placements_in_blocks([0, 0, 1, 1], g)
        k, _ = brute_force_max_partitions(pl, g, graph_from_edges(4, [(0, 1), (2, 3), (0, 2)]))
        assert k == 1

    def test_empty_block(self):
        g = BlockGrid(1, 2, 1.0)
        pl = placements_in_blocks([0, 0], g)
        assert brute_force_max_partitions(pl, g, graph_from_edges(2, [(0, 1)])) == (0, [])

    def test_refuses_large(self):
        g = BlockGrid(1, 1, 1.0)
        pl = placements_in_blocks([0] * 17, g)
        with pytest.raises(InstanceTooLarge):
            brute_force_max_partitions(pl, g, graph_from_edges(17, []))
        assert brute_force_max_partitions(pl, g, graph_from_edges(17, []), max_nodes=17)[0] == 17

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**31), st.integers(1, 2), st.integers(1, 2), st.integers(1, 12))
    def test_witness_valid_and_bounded(self, seed, rows, cols, n):
        g = BlockGrid.from_ranges(rows, cols, 10, 10)
        pl = deploy(n, g, seed)
        gr = build_graph(pl, 10)
        k, witness = brute_force_max_partitions(pl, g, gr)
        assert k == len(witness)
        assert k <= max_partitions_upper_bound(block_occupancy(pl, g))
        used = set()
        for cover in witness:
            assert verify_cover(cover, g, gr, pl).ok
            assert not used & set(cover)
            used |= set(cover)


def test_brute_force_matches_naive_enumeration():
    # independent check on tiny instances: try every assignment of nodes to covers
    rnd = random.Random(3)
    g = BlockGrid(1, 2, 1.0)
    for _ in range(40):
        n = rnd.randint(2, 5)
        blocks = [rnd.randrange(2) for _ in range(n)]
        pl = placements_in_blocks(blocks, g)
        edges = [e for e in itertools.combinations(range(n), 2) if rnd.random() < 0.5]
        gr = graph_from_edges(n, edges)
        best = 0
        for labels in itertools.product(range(n + 1), repeat=n):
            groups = {}
            for v, lab in enumerate(labels):
                if lab:
                    groups.setdefault(lab, []).append(v)
            if all(verify_cover(c, g, gr, pl).ok for c in groups.values()):
                best = max(best, len(groups))
        assert brute_force_max_partitions(pl, g, gr)[0] == best
