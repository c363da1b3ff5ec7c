"""Bond-centric remapping of a molecular graph.

Every bond ``(i, j)`` (``i < j``) becomes a node whose raw input is
``v_i ⊕ e_ij ⊕ v_j``. Two bond-nodes are joined when their bonds share an
atom ``j``; that edge's raw input is ``e_a ⊕ v_j ⊕ e_b`` with ``a < b`` in
bond-index order. The learned projections of these concatenations live in
:mod:`metastab.encoder`.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .featurize import ATOM_DIM, BOND_DIM, MolGraph

BOND_NODE_DIM = 2 * ATOM_DIM + BOND_DIM
BOND_EDGE_DIM = 2 * BOND_DIM + ATOM_DIM


@dataclass(frozen=True)
class BondGraph:
    node_inputs: np.ndarray  # (m, 2*d_v + d_e)
    edge_inputs: np.ndarray  # (num bond-pairs, 2*d_e + d_v)
    edge_list: np.ndarray  # (num bond-pairs, 2) bond indices, a < b
    adjacency: np.ndarray  # (m, m)
    node_origin: np.ndarray  # (m, 2) atom pair of each bond-node
    edge_origin: np.ndarray  # (num bond-pairs,) mediating atom

    @property
    def num_nodes(self) -> int:
        return self.node_inputs.shape[0]

    @property
    def num_edges(self) -> int:
        return self.edge_list.shape[0]


def remap_topology(g: MolGraph) -> BondGraph:
    v, e = g.node_features, g.edge_features
    bonds = np.sort(g.edge_list, axis=1) if g.num_edges else g.edge_list.reshape(0, 2)
    m = bonds.shape[0]

    if m:
        node_inputs = np.concatenate([v[bonds[:, 0]], e, v[bonds[:, 1]]], axis=1)
    else:
        node_inputs = np.zeros((0, BOND_NODE_DIM))

    incident: list[list[int]] = [[] for _ in range(g.num_nodes)]
    for k, (i, j) in enumerate(bonds):
        incident[i].append(k)
        incident[j].append(k)

    pairs, mediators = [], []
    for atom, ks in enumerate(incident):
        for a, b in combinations(ks, 2):  # ks is ascending, so a < b
            pairs.append((a, b))
            mediators.append(atom)
    edge_list = np.array(pairs, dtype=np.int64).reshape(-1, 2)
    edge_origin = np.array(mediators, dtype=np.int64)
    if pairs:
        edge_inputs = np.concatenate(
            [e[edge_list[:, 0]], v[edge_origin], e[edge_list[:, 1]]], axis=1
        )
    else:
        edge_inputs = np.zeros((0, BOND_EDGE_DIM))

    adj = np.zeros((m, m), dtype=np.int8)
    if pairs:
        adj[edge_list[:, 0], edge_list[:, 1]] = 1
        adj[edge_list[:, 1], edge_list[:, 0]] = 1

    return BondGraph(
        node_inputs=node_inputs,
        edge_inputs=edge_inputs,
        edge_list=edge_list,
        adjacency=adj,
        node_origin=bonds.astype(np.int64),
        edge_origin=edge_origin,
    )


def line_graph_oracle(g: MolGraph) -> np.ndarray:
    """Line-graph adjacency by checking every bond pair for a shared atom."""
    edges = [tuple(int(x) for x in row) for row in g.edge_list]
    m = len(edges)
    adj = np.zeros((m, m), dtype=np.int8)
    for a in range(m):
        for b in range(m):
            if a != b and len(set(edges[a]) & set(edges[b])) == 1:
                adj[a, b] = 1
    return adj
