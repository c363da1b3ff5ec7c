"""SMILES parsing into a validated :class:`Molecule`.

Supported grammar:
    - organic-subset atoms ``B C N O P S F Cl Br I`` and aromatic ``b c n o p s``
    - bracket atoms with isotope, element, chirality (discarded), H count,
      charge and atom class (discarded)
    - bond symbols ``- = # :`` plus ``/ \\`` (read as single bonds)
    - branches and ring closures ``0-9`` / ``%nn``
    - ``.`` separated components only when ``keep_largest=True``

Aromaticity is syntactic: lowercase atoms and ``:`` bonds. An unmarked bond
between two aromatic atoms is aromatic when it lies on a ring and single
otherwise (e.g. the biaryl bond in ``c1ccccc1c1ccccc1``).
"""

from __future__ import annotations

import enum
import re
import warnings
from dataclasses import dataclass, field

__all__ = [
    "Atom",
    "Bond",
    "BondOrder",
    "DanglingRingClosure",
    "DisconnectedMolecule",
    "Molecule",
    "SmilesError",
    "StereoDiscardedWarning",
    "UnbalancedBranch",
    "UnsupportedToken",
    "ValenceViolation",
    "implicit_hydrogens",
    "parse_smiles",
    "to_smiles",
]


class SmilesError(ValueError):
    """Base class for every parse failure."""


class UnsupportedToken(SmilesError):
    pass


class DanglingRingClosure(SmilesError):
    pass


class UnbalancedBranch(SmilesError):
    pass


class ValenceViolation(SmilesError):
    pass


class DisconnectedMolecule(SmilesError):
    pass


class StereoDiscardedWarning(UserWarning):
    """Stereo markers were read and dropped."""


class BondOrder(enum.Enum):
    SINGLE = "single"
    DOUBLE = "double"
    TRIPLE = "triple"
    AROMATIC = "aromatic"

    @property
    def valence(self) -> int:
        # aromatic bonds count 1 here; the shared pi bond is handled per atom
        return _BOND_VALENCE[self]


_BOND_VALENCE = {
    BondOrder.SINGLE: 1,
    BondOrder.DOUBLE: 2,
    BondOrder.TRIPLE: 3,
    BondOrder.AROMATIC: 1,
}

_BOND_SYMBOLS = {
    "-": BondOrder.SINGLE,
    "/": BondOrder.SINGLE,
    "\\": BondOrder.SINGLE,
    "=": BondOrder.DOUBLE,
    "#": BondOrder.TRIPLE,
    ":": BondOrder.AROMATIC,
}

# Standard atomic weights.
ATOMIC_MASS = {
    "H": 1.008, "Li": 6.94, "B": 10.81, "C": 12.011, "N": 14.007,
    "O": 15.999, "F": 18.998, "Na": 22.990, "Mg": 24.305, "Al": 26.982,
    "Si": 28.085, "P": 30.974, "S": 32.06, "Cl": 35.45, "K": 39.098,
    "Ca": 40.078, "Fe": 55.845, "Cu": 63.546, "Zn": 65.38, "As": 74.922,
    "Se": 78.971, "Br": 79.904, "Sn": 118.71, "I": 126.90, "Pt": 195.08,
}

ORGANIC_SUBSET = ("Cl", "Br", "B", "C", "N", "O", "P", "S", "F", "I")
AROMATIC_ELEMENTS = frozenset({"B", "C", "N", "O", "P", "S", "Se", "As"})

# Allowed valences, lowest first. Elements absent here only appear in brackets.
VALENCES = {
    "B": (3,), "C": (4,), "N": (3, 5), "O": (2,), "P": (3, 5),
    "S": (2, 4, 6), "F": (1,), "Cl": (1,), "Br": (1,), "I": (1,),
}

_BRACKET_RE = re.compile(
    r"""
    (?P<isotope>\d+)?
    (?P<element>se|as|[bcnops]|[A-Z][a-z]?)
    (?P<chiral>@@?(?:TH[12]|AL[12]|SP[1-3]|TB\d{1,2}|OH\d{1,2})?)?
    (?P<hcount>H\d?)?
    (?P<charge>\+\+?|--?|[+-]\d{1,2})?
    (?::(?P<atomclass>\d+))?
    $""",
    re.VERBOSE,
)


@dataclass(frozen=True)
class Atom:
    element: str
    formal_charge: int = 0
    explicit_h: int = 0
    aromatic: bool = False
    isotope: int | None = None
    bracket: bool = False
    implicit_h: int = 0

    @property
    def total_h(self) -> int:
        return self.explicit_h + self.implicit_h

    @property
    def mass(self) -> float:
        return ATOMIC_MASS[self.element]


@dataclass(frozen=True)
class Bond:
    begin: int
    end: int
    order: BondOrder

    @property
    def endpoints(self) -> tuple[int, int]:
        return (self.begin, self.end)


@dataclass(frozen=True)
class Molecule:
    """Heavy-atom graph with hydrogens folded into per-atom counts.

    Bonds are stored with ``begin < end`` in order of first appearance in the
    SMILES string.
    """

    atoms: tuple[Atom, ...]
    bonds: tuple[Bond, ...]
    atom_in_ring: tuple[bool, ...]
    bond_in_ring: tuple[bool, ...]
    _adjacency: tuple[tuple[int, ...], ...] = field(repr=False, compare=False, default=())

    def __post_init__(self):
        if not self._adjacency:
            incident: list[list[int]] = [[] for _ in self.atoms]
            for k, b in enumerate(self.bonds):
                incident[b.begin].append(k)
                incident[b.end].append(k)
            object.__setattr__(self, "_adjacency", tuple(tuple(x) for x in incident))

    @property
    def num_atoms(self) -> int:
        return len(self.atoms)

    @property
    def num_bonds(self) -> int:
        return len(self.bonds)

    def incident_bonds(self, atom: int) -> tuple[int, ...]:
        return self._adjacency[atom]

    def neighbors(self, atom: int) -> list[int]:
        out = []
        for k in self._adjacency[atom]:
            b = self.bonds[k]
            out.append(b.end if b.begin == atom else b.begin)
        return out

    def degree(self, atom: int) -> int:
        return len(self._adjacency[atom])


def _effective_valences(element: str, charge: int) -> tuple[int, ...]:
    base = VALENCES[element]
    if charge == 0:
        return base
    # isoelectronic shift: N+ behaves like C, O- like F, C- like N
    if element in ("B", "C"):
        shifted = tuple(v - abs(charge) for v in base)
    else:
        shifted = tuple(v + charge for v in base)
    return tuple(v for v in shifted if v >= 0)


def implicit_hydrogens(atom: Atom, incident_bond_orders) -> int:
    """Number of hydrogens implied for ``atom`` given its bonds.

    Bracket atoms return their explicit count unchanged. For organic-subset
    atoms the lowest allowed valence that fits the bond-order sum is used.
    Aromatic atoms also spend one valence unit on the ring pi system when
    their default valence leaves room for it (``c`` in benzene gets 1 H,
    ``n`` in pyridine and ``o`` in furan get none).

    Raises:
        ValenceViolation: the bonds exceed every allowed valence.
    """
    if atom.bracket:
        return atom.explicit_h
    if atom.element not in VALENCES:
        raise UnsupportedToken(f"no valence table entry for {atom.element!r}")
    orders = [o if isinstance(o, BondOrder) else BondOrder(o) for o in incident_bond_orders]
    bond_sum = sum(o.valence for o in orders)
    valences = _effective_valences(atom.element, atom.formal_charge)
    if not valences:
        raise ValenceViolation(f"{atom.element}{atom.formal_charge:+d} has no valid valence")

    if atom.aromatic:
        default = valences[0]
        if bond_sum + 1 <= default:
            return default - bond_sum - 1
        if bond_sum <= default:
            return default - bond_sum
        for v in valences[1:]:
            if v >= bond_sum + 1:
                return v - bond_sum - 1
        raise ValenceViolation(
            f"aromatic {atom.element} with bond order sum {bond_sum} exceeds valence"
        )

    for v in valences:
        if v >= bond_sum:
            return v - bond_sum
    raise ValenceViolation(
        f"{atom.element} with bond order sum {bond_sum} exceeds max valence {valences[-1]}"
    )


def _parse_charge(text: str | None) -> int:
    if not text:
        return 0
    sign = 1 if text[0] == "+" else -1
    rest = text[1:]
    if not rest:
        return sign
    if rest[0] in "+-":
        return sign * 2
    return sign * int(rest)


def _parse_bracket(body: str, pos: int) -> Atom:
    m = _BRACKET_RE.match(body)
    if m is None:
        raise UnsupportedToken(f"unsupported bracket atom [{body}] at position {pos}")
    sym = m.group("element")
    aromatic = sym[0].islower()
    element = sym.capitalize()
    if element not in ATOMIC_MASS:
        raise UnsupportedToken(f"unsupported element {element!r} at position {pos}")
    if aromatic and element not in AROMATIC_ELEMENTS:
        raise UnsupportedToken(f"element {element!r} cannot be aromatic (position {pos})")
    if m.group("chiral"):
        warnings.warn(
            "chirality marker discarded", StereoDiscardedWarning, stacklevel=4
        )
    hcount = m.group("hcount")
    explicit_h = 0
    if hcount:
        explicit_h = int(hcount[1:]) if len(hcount) > 1 else 1
    isotope = int(m.group("isotope")) if m.group("isotope") else None
    return Atom(
        element=element,
        formal_charge=_parse_charge(m.group("charge")),
        explicit_h=explicit_h,
        aromatic=aromatic,
        isotope=isotope,
        bracket=True,
    )


class _Builder:
    """Mutable parse state; turned into an immutable Molecule at the end."""

    def __init__(self, text: str):
        self.text = text
        self.atoms: list[Atom] = []
        self.bonds: list[list] = []  # [i, j, order, implicit]
        self.pairs: set[tuple[int, int]] = set()
        self.component: list[int] = []

    def add_bond(self, a: int, b: int, symbol: str | None, pos: int) -> None:
        if a == b:
            raise SmilesError(f"atom bonded to itself at position {pos}")
        key = (min(a, b), max(a, b))
        if key in self.pairs:
            raise SmilesError(f"duplicate bond between atoms {a} and {b} at position {pos}")
        self.pairs.add(key)
        both_aromatic = self.atoms[a].aromatic and self.atoms[b].aromatic
        if symbol is None:
            order = BondOrder.AROMATIC if both_aromatic else BondOrder.SINGLE
            implicit = True
        else:
            order = _BOND_SYMBOLS[symbol]
            implicit = False
            if symbol in "/\\":
                warnings.warn(
                    "directional bond read as single", StereoDiscardedWarning, stacklevel=4
                )
        if order is BondOrder.AROMATIC and not both_aromatic:
            raise SmilesError(f"aromatic bond between non-aromatic atoms at position {pos}")
        self.bonds.append([key[0], key[1], order, implicit])


def _ring_bonds(n: int, edges: list[tuple[int, int]]) -> list[bool]:
    """Flag each edge that lies on a cycle (i.e. is not a bridge)."""
    adj: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    for k, (a, b) in enumerate(edges):
        adj[a].append((b, k))
        adj[b].append((a, k))
    disc = [-1] * n
    low = [0] * n
    is_bridge = [False] * len(edges)
    timer = 0
    for root in range(n):
        if disc[root] != -1:
            continue
        disc[root] = low[root] = timer
        timer += 1
        stack = [(root, -1, iter(adj[root]))]
        while stack:
            node, via, it = stack[-1]
            advanced = False
            for nxt, k in it:
                if k == via:
                    continue
                if disc[nxt] == -1:
                    disc[nxt] = low[nxt] = timer
                    timer += 1
                    stack.append((nxt, k, iter(adj[nxt])))
                    advanced = True
                    break
                low[node] = min(low[node], disc[nxt])
            if advanced:
                continue
            stack.pop()
            if stack:
                parent = stack[-1][0]
                low[parent] = min(low[parent], low[node])
                if low[node] > disc[parent]:
                    is_bridge[via] = True
    return [not b for b in is_bridge]


def _components(n: int, edges: list[tuple[int, int]]) -> list[list[int]]:
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in edges:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return list(groups.values())


def parse_smiles(text: str, *, keep_largest: bool = False) -> Molecule:
    """Parse ``text`` into a :class:`Molecule`.

    Args:
        text: SMILES string in the supported subset.
        keep_largest: accept ``.``-separated input and keep only the
            component with the most atoms (first one wins ties).

    Raises:
        UnsupportedToken, DanglingRingClosure, UnbalancedBranch,
        ValenceViolation, DisconnectedMolecule, SmilesError
    """
    if not isinstance(text, str) or not text.strip():
        raise SmilesError("empty SMILES")
    text = text.strip()
    if not text.isascii():
        raise UnsupportedToken("non-ASCII character in SMILES")

    st = _Builder(text)
    prev: int | None = None
    pending: str | None = None
    branches: list[int | None] = []
    rings: dict[int, tuple[int, str | None, int]] = {}
    saw_dot = False
    i = 0
    n = len(text)

    def add_atom(atom: Atom, pos: int) -> int:
        nonlocal prev, pending
        idx = len(st.atoms)
        st.atoms.append(atom)
        if prev is not None:
            st.add_bond(prev, idx, pending, pos)
        elif pending is not None:
            raise SmilesError(f"bond symbol with no preceding atom at position {pos}")
        prev = idx
        pending = None
        return idx

    while i < n:
        ch = text[i]
        if ch == "[":
            close = text.find("]", i)
            if close == -1:
                raise UnsupportedToken(f"unterminated bracket atom at position {i}")
            add_atom(_parse_bracket(text[i + 1:close], i), i)
            i = close + 1
        elif ch.isalpha():
            two = text[i:i + 2]
            if two in ("Cl", "Br"):
                add_atom(Atom(element=two), i)
                i += 2
            elif ch in "BCNOPSFI":
                add_atom(Atom(element=ch), i)
                i += 1
            elif ch in "bcnops":
                add_atom(Atom(element=ch.upper(), aromatic=True), i)
                i += 1
            else:
                raise UnsupportedToken(f"unsupported atom {ch!r} at position {i}")
        elif ch in _BOND_SYMBOLS:
            if pending is not None:
                raise SmilesError(f"two consecutive bond symbols at position {i}")
            pending = ch
            i += 1
        elif ch == "(":
            if prev is None:
                raise UnbalancedBranch(f"branch opened before any atom at position {i}")
            branches.append(prev)
            i += 1
        elif ch == ")":
            if not branches:
                raise UnbalancedBranch(f"unmatched ')' at position {i}")
            if pending is not None:
                raise SmilesError(f"dangling bond symbol before ')' at position {i}")
            prev = branches.pop()
            i += 1
        elif ch.isdigit() or ch == "%":
            if ch == "%":
                label_txt = text[i + 1:i + 3]
                if len(label_txt) != 2 or not label_txt.isdigit():
                    raise UnsupportedToken(f"malformed %nn ring label at position {i}")
                label = int(label_txt)
                step = 3
            else:
                label = int(ch)
                step = 1
            if prev is None:
                raise DanglingRingClosure(f"ring label {label} before any atom at position {i}")
            if label in rings:
                other, sym, _ = rings.pop(label)
                if sym is not None and pending is not None and sym != pending:
                    raise SmilesError(f"conflicting ring-closure bonds for label {label}")
                st.add_bond(other, prev, pending if pending is not None else sym, i)
            else:
                rings[label] = (prev, pending, i)
            pending = None
            i += step
        elif ch == ".":
            if branches:
                raise UnbalancedBranch(f"'.' inside an open branch at position {i}")
            if pending is not None:
                raise SmilesError(f"dangling bond symbol before '.' at position {i}")
            saw_dot = True
            prev = None
            i += 1
        else:
            raise UnsupportedToken(f"unsupported token {ch!r} at position {i}")

    if pending is not None:
        raise SmilesError("SMILES ends with a bond symbol")
    if branches:
        raise UnbalancedBranch(f"{len(branches)} unclosed branch(es)")
    if rings:
        labels = ", ".join(str(k) for k in sorted(rings))
        raise DanglingRingClosure(f"unmatched ring closure label(s): {labels}")
    if not st.atoms:
        raise SmilesError("no atoms in SMILES")

    atoms = st.atoms
    raw_bonds = st.bonds
    if saw_dot:
        comps = _components(len(atoms), [(b[0], b[1]) for b in raw_bonds])
        if len(comps) > 1:
            if not keep_largest:
                raise DisconnectedMolecule(
                    f"SMILES has {len(comps)} disconnected components"
                )
            keep = max(comps, key=len)  # max() keeps the first of equal-sized
            remap = {old: new for new, old in enumerate(sorted(keep))}
            atoms = [atoms[o] for o in sorted(keep)]
            raw_bonds = [
                [remap[b[0]], remap[b[1]], b[2], b[3]]
                for b in raw_bonds
                if b[0] in remap
            ]

    edges = [(b[0], b[1]) for b in raw_bonds]
    in_ring = _ring_bonds(len(atoms), edges)
    for k, b in enumerate(raw_bonds):
        if b[2] is BondOrder.AROMATIC and b[3] and not in_ring[k]:
            b[2] = BondOrder.SINGLE

    bonds = tuple(Bond(b[0], b[1], b[2]) for b in raw_bonds)
    incident: list[list[BondOrder]] = [[] for _ in atoms]
    atom_ring = [False] * len(atoms)
    for k, b in enumerate(bonds):
        incident[b.begin].append(b.order)
        incident[b.end].append(b.order)
        if in_ring[k]:
            atom_ring[b.begin] = atom_ring[b.end] = True

    resolved = []
    for a, orders in zip(atoms, incident):
        if not a.bracket:
            a = Atom(
                element=a.element,
                aromatic=a.aromatic,
                implicit_h=implicit_hydrogens(a, orders),
            )
        resolved.append(a)

    return Molecule(
        atoms=tuple(resolved),
        bonds=bonds,
        atom_in_ring=tuple(atom_ring),
        bond_in_ring=tuple(in_ring),
    )


def _atom_token(atom: Atom) -> str:
    sym = atom.element.lower() if atom.aromatic else atom.element
    if not atom.bracket:
        return sym
    out = "["
    if atom.isotope is not None:
        out += str(atom.isotope)
    out += sym
    if atom.explicit_h:
        out += "H" if atom.explicit_h == 1 else f"H{atom.explicit_h}"
    q = atom.formal_charge
    if q:
        sign = "+" if q > 0 else "-"
        out += sign if abs(q) == 1 else f"{sign}{abs(q)}"
    return out + "]"


_ORDER_SYMBOL = {
    BondOrder.SINGLE: "",
    BondOrder.DOUBLE: "=",
    BondOrder.TRIPLE: "#",
    BondOrder.AROMATIC: ":",
}


def to_smiles(mol: Molecule) -> str:
    """Write ``mol`` back out as SMILES (depth-first, not canonical).

    Parsing the output reproduces a molecule isomorphic to ``mol``.
    """

    def bond_symbol(bond: Bond) -> str:
        a, b = mol.atoms[bond.begin], mol.atoms[bond.end]
        if bond.order is BondOrder.SINGLE:
            return "-" if (a.aromatic and b.aromatic) else ""
        if bond.order is BondOrder.AROMATIC:
            return ""
        return _ORDER_SYMBOL[bond.order]

    visited = [False] * mol.num_atoms
    used_bonds = [False] * mol.num_bonds
    # ring closures: atom -> list of (bond index, label); assigned on first visit
    free_labels: list[int] = []
    next_label = 1
    open_rings: dict[int, int] = {}  # bond index -> label
    parts: list[str] = []

    # pre-pass: find back edges by DFS so each atom knows its closures
    closures: dict[int, list[int]] = {i: [] for i in range(mol.num_atoms)}
    tree_children: dict[int, list[tuple[int, int]]] = {i: [] for i in range(mol.num_atoms)}
    seen = [False] * mol.num_atoms
    roots = []
    for start in range(mol.num_atoms):
        if seen[start]:
            continue
        roots.append(start)
        seen[start] = True
        stack = [(start, iter(mol.incident_bonds(start)))]
        while stack:
            node, it = stack[-1]
            for k in it:
                if used_bonds[k]:
                    continue
                used_bonds[k] = True
                b = mol.bonds[k]
                nxt = b.end if b.begin == node else b.begin
                if seen[nxt]:
                    closures[node].append(k)
                    closures[nxt].append(k)
                else:
                    seen[nxt] = True
                    tree_children[node].append((nxt, k))
                    stack.append((nxt, iter(mol.incident_bonds(nxt))))
                break
            else:
                stack.pop()

    def emit(node: int) -> None:
        nonlocal next_label
        visited[node] = True
        parts.append(_atom_token(mol.atoms[node]))
        for k in closures[node]:
            if k in open_rings:
                label = open_rings.pop(k)
                free_labels.append(label)
                free_labels.sort()
                parts.append(bond_symbol(mol.bonds[k]) + _label_text(label))
            else:
                if free_labels:
                    label = free_labels.pop(0)
                else:
                    label = next_label
                    next_label += 1
                open_rings[k] = label
                parts.append(bond_symbol(mol.bonds[k]) + _label_text(label))
        children = tree_children[node]
        for idx, (child, k) in enumerate(children):
            last = idx == len(children) - 1
            if not last:
                parts.append("(")
            parts.append(bond_symbol(mol.bonds[k]))
            emit(child)
            if not last:
                parts.append(")")

    out = []
    for r in roots:
        parts = []
        emit(r)
        out.append("".join(parts))
    return ".".join(out)


def _label_text(label: int) -> str:
    return str(label) if label < 10 else f"%{label:02d}"

