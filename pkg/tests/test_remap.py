from math import comb

import networkx as nx
import numpy as np
import pytest

from metastab.featurize import ATOM_DIM, BOND_DIM, MolGraph, graph_from_smiles
from metastab.remap import BOND_EDGE_DIM, BOND_NODE_DIM, line_graph_oracle, remap_topology

from _oracles import corpus_smiles, random_connected_edges


def synthetic_graph(edges, n, rng):
    edges = np.array(edges, dtype=np.int64).reshape(-1, 2)
    adj = np.zeros((n, n), dtype=np.int8)
    adj[edges[:, 0], edges[:, 1]] = 1
    adj[edges[:, 1], edges[:, 0]] = 1
    return MolGraph(
        node_features=rng.normal(size=(n, ATOM_DIM)),
        edge_list=edges,
        edge_features=rng.normal(size=(len(edges), BOND_DIM)),
        adjacency=adj,
    )


def networkx_line_adjacency(edges):
    g = nx.Graph()
    g.add_edges_from(map(tuple, edges))
    lg = nx.line_graph(g)
    index = {tuple(sorted(e)): k for k, e in enumerate(map(tuple, edges))}
    m = len(edges)
    adj = np.zeros((m, m), dtype=np.int8)
    for a, b in lg.edges():
        i, j = index[tuple(sorted(a))], index[tuple(sorted(b))]
        adj[i, j] = adj[j, i] = 1
    return adj


class TestExamples:
    def test_ethanol(self):
        g = graph_from_smiles("CCO")
        r = remap_topology(g)
        assert r.num_nodes == 2 and r.num_edges == 1
        assert r.edge_origin.tolist() == [1]
        np.testing.assert_array_equal(
            r.node_inputs[0],
            np.concatenate([g.node_features[0], g.edge_features[0], g.node_features[1]]),
        )
        np.testing.assert_array_equal(
            r.edge_inputs[0],
            np.concatenate([g.edge_features[0], g.node_features[1], g.edge_features[1]]),
        )
        assert r.node_inputs.shape[1] == BOND_NODE_DIM
        assert r.edge_inputs.shape[1] == BOND_EDGE_DIM

    def test_methane(self):
        r = remap_topology(graph_from_smiles("C"))
        assert r.num_nodes == 0 and r.num_edges == 0
        assert r.node_inputs.shape == (0, BOND_NODE_DIM)

    def test_cyclopropane(self):
        r = remap_topology(graph_from_smiles("C1CC1"))
        assert r.num_nodes == 3 and r.num_edges == 3
        np.testing.assert_array_equal(r.adjacency, 1 - np.eye(3))

    def test_canonical_orientation(self):
        g = graph_from_smiles("OCC")
        r = remap_topology(g)
        assert np.all(r.node_origin[:, 0] < r.node_origin[:, 1])


class TestLineGraphOracle:
    def test_path(self, rng=np.random.default_rng(0)):
        g = synthetic_graph([(0, 1), (1, 2), (2, 3)], 4, rng)
        adj = line_graph_oracle(g)
        assert adj.sum() // 2 == 2

    def test_star(self, rng=np.random.default_rng(0)):
        g = synthetic_graph([(0, 1), (0, 2), (0, 3)], 4, rng)
        np.testing.assert_array_equal(line_graph_oracle(g), 1 - np.eye(3))

    def test_single_edge(self, rng=np.random.default_rng(0)):
        adj = line_graph_oracle(synthetic_graph([(0, 1)], 2, rng))
        np.testing.assert_array_equal(adj, [[0]])


class TestProperties:
    def test_random_graphs_match_oracles(self):
        rng = np.random.default_rng(1234)
        for _ in range(500):
            n = int(rng.integers(1, 13))
            edges = random_connected_edges(rng, n)
            g = synthetic_graph(edges, n, rng)
            r = remap_topology(g)
            oracle = line_graph_oracle(g)
            np.testing.assert_array_equal(r.adjacency, oracle)
            if edges:
                np.testing.assert_array_equal(r.adjacency, networkx_line_adjacency(edges))
            assert np.array_equal(r.adjacency, r.adjacency.T)
            assert not np.any(np.diag(r.adjacency))
            assert r.num_nodes == len(edges)

    def test_edge_count_on_corpus(self):
        for s in corpus_smiles():
            g = graph_from_smiles(s)
            r = remap_topology(g)
            degrees = g.adjacency.sum(axis=1)
            assert r.num_edges == sum(comb(int(d), 2) for d in degrees), s
            assert r.num_nodes == g.num_edges

    @pytest.mark.parametrize("smiles", ["CC(=O)Nc1ccc(O)cc1", "C1CC2CCC1C2", "CC(C)(C)O"])
    def test_relabeling_gives_isomorphic_bond_graph(self, smiles):
        g = graph_from_smiles(smiles)
        rng = np.random.default_rng(7)
        perm = rng.permutation(g.num_nodes)  # new index of old atom i is perm[i]
        inv = np.argsort(perm)
        edges = perm[g.edge_list]
        adj = np.zeros_like(g.adjacency)
        adj[edges[:, 0], edges[:, 1]] = adj[edges[:, 1], edges[:, 0]] = 1
        h = MolGraph(g.node_features[inv], edges, g.edge_features, adj)
        r1, r2 = remap_topology(g), remap_topology(h)
        g1, g2 = nx.from_numpy_array(r1.adjacency), nx.from_numpy_array(r2.adjacency)
        assert nx.is_isomorphic(g1, g2)
        # each bond keeps its features up to the i<j orientation flip
        d = ATOM_DIM
        for k in range(r1.num_nodes):
            a, b = r1.node_inputs[k], r2.node_inputs[k]
            np.testing.assert_array_equal(a[d:d + BOND_DIM], b[d:d + BOND_DIM])
            ends1 = {a[:d].tobytes(), a[-d:].tobytes()}
            ends2 = {b[:d].tobytes(), b[-d:].tobytes()}
            assert ends1 == ends2
