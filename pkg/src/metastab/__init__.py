"""Dual-view evidential graph networks for metabolic-stability prediction from SMILES."""

__version__ = "0.1.0"

from .featurize import MolGraph, build_graph, graph_from_smiles
from .remap import BondGraph, remap_topology
from .smiles import Molecule, SmilesError, parse_smiles

__all__ = [
    "__version__",
    "BondGraph",
    "MolGraph",
    "Molecule",
    "SmilesError",
    "build_graph",
    "graph_from_smiles",
    "parse_smiles",
    "remap_topology",
]
