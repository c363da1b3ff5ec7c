"""Atom and bond featurization of a parsed molecule.

Atom rows (``ATOM_DIM`` = 36 columns), in order:

    element one-hot      12 symbols + other     13
    degree one-hot       0..6 (clamped)          7
    formal charge        -2..+2 (clamped)        5
    bonded hydrogens     0..4 (clamped)          5
    hybridization        sp, sp2, sp3, other     4
    aromatic flag                                1
    atomic mass / 100                            1

Bond rows (``BOND_DIM`` = 6): bond type one-hot (single, double, triple,
aromatic), ring flag, conjugation flag.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .smiles import BondOrder, Molecule, parse_smiles

ELEMENTS = ("B", "C", "N", "O", "F", "Si", "P", "S", "Cl", "Br", "I", "Se")
MAX_DEGREE = 6
CHARGES = (-2, -1, 0, 1, 2)
MAX_HYDROGENS = 4
HYBRIDIZATIONS = ("sp", "sp2", "sp3", "other")
BOND_TYPES = (BondOrder.SINGLE, BondOrder.DOUBLE, BondOrder.TRIPLE, BondOrder.AROMATIC)

# (name, width) of each one-hot block, used by validity checks
ATOM_BLOCKS = (
    ("element", len(ELEMENTS) + 1),
    ("degree", MAX_DEGREE + 1),
    ("charge", len(CHARGES)),
    ("hydrogens", MAX_HYDROGENS + 1),
    ("hybridization", len(HYBRIDIZATIONS)),
)
ATOM_DIM = sum(w for _, w in ATOM_BLOCKS) + 2
BOND_DIM = len(BOND_TYPES) + 2


class EmptyMolecule(ValueError):
    pass


@dataclass(frozen=True)
class MolGraph:
    """Featurized molecular graph.

    ``edge_list`` holds one ``(i, j)`` pair per bond with ``i < j``, in the
    molecule's bond order; ``edge_features`` rows follow the same order.
    """

    node_features: np.ndarray
    edge_list: np.ndarray
    edge_features: np.ndarray
    adjacency: np.ndarray

    @property
    def num_nodes(self) -> int:
        return self.node_features.shape[0]

    @property
    def num_edges(self) -> int:
        return self.edge_list.shape[0]


def hybridization(mol: Molecule, atom: int) -> str:
    orders = [mol.bonds[k].order for k in mol.incident_bonds(atom)]
    a = mol.atoms[atom]
    if BondOrder.TRIPLE in orders:
        return "sp"
    if a.aromatic or BondOrder.DOUBLE in orders:
        return "sp2"
    if not orders and a.total_h == 0:
        return "other"
    return "sp3"


def _clamp(v: int, lo: int, hi: int) -> int:
    return max(lo, min(hi, v))


def featurize_atoms(mol: Molecule) -> np.ndarray:
    x = np.zeros((mol.num_atoms, ATOM_DIM))
    for i, a in enumerate(mol.atoms):
        col = 0
        slot = ELEMENTS.index(a.element) if a.element in ELEMENTS else len(ELEMENTS)
        x[i, col + slot] = 1.0
        col += len(ELEMENTS) + 1
        x[i, col + _clamp(mol.degree(i), 0, MAX_DEGREE)] = 1.0
        col += MAX_DEGREE + 1
        x[i, col + _clamp(a.formal_charge, -2, 2) + 2] = 1.0
        col += len(CHARGES)
        x[i, col + _clamp(a.total_h, 0, MAX_HYDROGENS)] = 1.0
        col += MAX_HYDROGENS + 1
        x[i, col + HYBRIDIZATIONS.index(hybridization(mol, i))] = 1.0
        col += len(HYBRIDIZATIONS)
        x[i, col] = float(a.aromatic)
        x[i, col + 1] = a.mass / 100.0
    return x


def _conjugated(mol: Molecule) -> list[bool]:
    """Alternation heuristic for the conjugation flag.

    An atom is *unsaturated* if it carries a multiple or aromatic bond, except
    hypervalent S/P (sulfonyl, phosphoryl), whose X=O bonds are not treated as
    pi systems. A *donor* is a saturated N, O or S (lone pair). Aromatic bonds
    are conjugated; a single bond is conjugated when it joins an unsaturated
    atom to another unsaturated atom or to a donor; a multiple bond is
    conjugated when it shares an atom with a conjugated single bond or an
    aromatic bond.
    """
    aromatic = [b.order is BondOrder.AROMATIC for b in mol.bonds]
    multiple = [b.order is not BondOrder.SINGLE for b in mol.bonds]
    hypervalent = [
        a.element in ("S", "P") and not a.aromatic
        and sum(mol.bonds[k].order.valence for k in mol.incident_bonds(i)) > 3
        for i, a in enumerate(mol.atoms)
    ]
    for k, b in enumerate(mol.bonds):
        if hypervalent[b.begin] or hypervalent[b.end]:
            multiple[k] = multiple[k] and aromatic[k]
    unsat = [False] * mol.num_atoms
    for k, b in enumerate(mol.bonds):
        if multiple[k]:
            unsat[b.begin] = unsat[b.end] = True
    donor = [a.element in ("N", "O", "S") and not unsat[i] and not hypervalent[i]
             for i, a in enumerate(mol.atoms)]

    def joins(i, j):
        return unsat[i] and (unsat[j] or donor[j])

    single_conj = [
        mol.bonds[k].order is BondOrder.SINGLE and (joins(b.begin, b.end) or joins(b.end, b.begin))
        for k, b in enumerate(mol.bonds)
    ]
    out = []
    for k, b in enumerate(mol.bonds):
        if aromatic[k] or single_conj[k]:
            out.append(True)
        elif multiple[k]:
            touching = set(mol.incident_bonds(b.begin)) | set(mol.incident_bonds(b.end))
            touching.discard(k)
            out.append(any(single_conj[j] or aromatic[j] for j in touching))
        else:
            out.append(False)
    return out


def featurize_bonds(mol: Molecule) -> np.ndarray:
    e = np.zeros((mol.num_bonds, BOND_DIM))
    conj = _conjugated(mol)
    for k, b in enumerate(mol.bonds):
        e[k, BOND_TYPES.index(b.order)] = 1.0
        e[k, 4] = float(mol.bond_in_ring[k])
        e[k, 5] = float(conj[k])
    return e


def build_graph(mol: Molecule) -> MolGraph:
    n = mol.num_atoms
    if n == 0:
        raise EmptyMolecule("molecule has no atoms")
    edges = np.array([b.endpoints for b in mol.bonds], dtype=np.int64).reshape(-1, 2)
    adj = np.zeros((n, n), dtype=np.int8)
    adj[edges[:, 0], edges[:, 1]] = 1
    adj[edges[:, 1], edges[:, 0]] = 1
    return MolGraph(
        node_features=featurize_atoms(mol),
        edge_list=edges,
        edge_features=featurize_bonds(mol),
        adjacency=adj,
    )


def graph_from_smiles(smiles: str, **parse_kwargs) -> MolGraph:
    return build_graph(parse_smiles(smiles, **parse_kwargs))


def one_hot_blocks_valid(node_features: np.ndarray) -> bool:
    col = 0
    for _, width in ATOM_BLOCKS:
        if not np.all(node_features[:, col:col + width].sum(axis=1) == 1.0):
            return False
        col += width
    return True
