"""Disjoint-union batching of molecular and bond-centric graphs.

All graphs of a batch are stacked into one big graph; ``graph_ids`` maps
each node to its molecule so pooling and normalization stay per molecule.
Undirected edges are expanded into both directions for message passing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .featurize import ATOM_DIM, MolGraph
from .remap import BOND_EDGE_DIM, BOND_NODE_DIM, BondGraph


@dataclass
class ViewBatch:
    x: np.ndarray  # node inputs
    src: np.ndarray  # directed message sources
    dst: np.ndarray  # directed message targets
    edge_x: np.ndarray | None  # per directed edge inputs (bond view only)
    graph_ids: np.ndarray
    num_graphs: int

    @property
    def num_nodes(self) -> int:
        return self.x.shape[0]

    def nodes_per_graph(self) -> np.ndarray:
        return np.bincount(self.graph_ids, minlength=self.num_graphs)


@dataclass
class GraphBatch:
    mol: ViewBatch
    bond: ViewBatch

    @property
    def size(self) -> int:
        return self.mol.num_graphs

    @property
    def has_bonds(self) -> np.ndarray:
        """True for molecules whose bond view is non-empty."""
        return self.bond.nodes_per_graph() > 0


def _directed(edges: np.ndarray, offset: int) -> tuple[np.ndarray, np.ndarray]:
    if edges.size == 0:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    a = edges[:, 0] + offset
    b = edges[:, 1] + offset
    return np.concatenate([a, b]), np.concatenate([b, a])


def collate(graphs: list[tuple[MolGraph, BondGraph]]) -> GraphBatch:
    mol_x, mol_src, mol_dst, mol_ids = [], [], [], []
    bond_x, bond_src, bond_dst, bond_ex, bond_ids = [], [], [], [], []
    n_off = m_off = 0
    for gi, (g, r) in enumerate(graphs):
        mol_x.append(g.node_features)
        s, d = _directed(g.edge_list, n_off)
        mol_src.append(s)
        mol_dst.append(d)
        mol_ids.append(np.full(g.num_nodes, gi, np.int64))
        n_off += g.num_nodes

        bond_x.append(r.node_inputs)
        s, d = _directed(r.edge_list, m_off)
        bond_src.append(s)
        bond_dst.append(d)
        bond_ex.append(np.concatenate([r.edge_inputs, r.edge_inputs], axis=0))
        bond_ids.append(np.full(r.num_nodes, gi, np.int64))
        m_off += r.num_nodes

    def cat(parts, width=None, dtype=np.float64):
        if parts:
            return np.concatenate(parts, axis=0)
        return np.zeros((0, width) if width else 0, dtype)

    k = len(graphs)
    mol = ViewBatch(
        x=cat(mol_x, ATOM_DIM),
        src=cat(mol_src, dtype=np.int64),
        dst=cat(mol_dst, dtype=np.int64),
        edge_x=None,
        graph_ids=cat(mol_ids, dtype=np.int64),
        num_graphs=k,
    )
    bond = ViewBatch(
        x=cat(bond_x, BOND_NODE_DIM),
        src=cat(bond_src, dtype=np.int64),
        dst=cat(bond_dst, dtype=np.int64),
        edge_x=cat(bond_ex, BOND_EDGE_DIM),
        graph_ids=cat(bond_ids, dtype=np.int64),
        num_graphs=k,
    )
    return GraphBatch(mol=mol, bond=bond)
