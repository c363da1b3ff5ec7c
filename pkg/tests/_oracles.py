"""Independent reference computations shared by the test modules.

Nothing here reuses the package's own math: expectations come from sampling
numpy's Beta generator, gradients from central finite differences, graph
facts from brute force.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from scipy.stats import beta as beta_dist

DATA = Path(__file__).parent / "data"
FIXTURE = DATA / "parser_fixture.json"
TOY_CSV = DATA / "toy_classification.csv"

FD_STEP = 1e-5
FD_RTOL = 1e-4
FD_ATOL = 1e-7


def fixture_molecules() -> list[dict]:
    return json.loads(FIXTURE.read_text())["molecules"]


def corpus_smiles() -> list[str]:
    """Fixture SMILES plus the toy training set."""
    smiles = [m["smiles"] for m in fixture_molecules()]
    for line in TOY_CSV.read_text().splitlines()[1:]:
        smiles.append(line.split(",")[1])
    return smiles


def finite_difference_failures(loss_fn, params, h=FD_STEP, rtol=FD_RTOL, atol=FD_ATOL):
    """Compare backward() gradients against central differences, entry by entry.

    ``loss_fn`` must rebuild the scalar loss tensor from the current parameter
    values on every call. Returns a list of (name, flat index, analytic,
    numeric) tuples for every entry outside max(rtol * scale, atol); the total
    count of checked entries is appended as the last element.
    """
    for p in params:
        p.grad = None
    loss_fn().backward()
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in params]
    failures, checked = [], 0
    for p, g in zip(params, analytic):
        flat = p.data.reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + h
            up = loss_fn().item()
            flat[i] = old - h
            down = loss_fn().item()
            flat[i] = old
            num = (up - down) / (2 * h)
            an = float(g.reshape(-1)[i])
            checked += 1
            if abs(an - num) > max(rtol * max(abs(an), abs(num)), atol):
                failures.append((getattr(p, "name", "?"), i, an, num))
    failures.append(checked)
    return failures


def beta_expectation(f, a: float, b: float, rng, n: int = 10**6, strata: int = 1000) -> float:
    """E[f(p)], p ~ Beta(a, b), by post-stratified Monte Carlo.

    ``n`` exact draws from numpy's Beta sampler are binned into ``strata``
    equal-probability cells (edges from the Beta quantile function) and the
    cell means are averaged. This is unbiased like plain Monte Carlo but
    removes the between-cell variance, which dominates for log-type
    integrands with heavy tails.
    """
    p = rng.beta(a, b, size=n)
    edges = beta_dist.ppf(np.arange(1, strata) / strata, a, b)
    cell = np.searchsorted(edges, p, side="right")
    counts = np.bincount(cell, minlength=strata)
    sums = np.bincount(cell, weights=f(p), minlength=strata)
    # Quantiles that round to the same float (tails of very skewed Betas) give
    # zero-width cells; draws landing on that float go to the right-hand cell,
    # so the empty cell's probability mass moves there too.
    weight = np.full(strata, 1.0 / strata)
    lo = np.concatenate([[-np.inf], edges])
    hi = np.concatenate([edges, [np.inf]])
    for c in range(strata - 1):
        if counts[c] == 0:
            if lo[c] != hi[c]:
                raise RuntimeError("empty stratum of positive width; raise n")
            weight[c + 1] += weight[c]
            weight[c] = 0.0
    if counts[-1] == 0:
        raise RuntimeError("empty top stratum; raise n")
    keep = counts > 0
    return float(np.sum(weight[keep] * sums[keep] / counts[keep]))


def brute_force_auc(y, s) -> float:
    """Pairwise concordance with ties counted as one half."""
    pos = [si for yi, si in zip(y, s) if yi == 1]
    neg = [si for yi, si in zip(y, s) if yi == 0]
    total = 0.0
    for a in pos:
        for b in neg:
            total += 1.0 if a > b else 0.5 if a == b else 0.0
    return total / (len(pos) * len(neg))


def random_connected_edges(rng, n: int, extra_prob: float = 0.25) -> list[tuple[int, int]]:
    """Random spanning tree plus independent extra edges, as (i<j) pairs."""
    edges = set()
    order = rng.permutation(n)
    for k in range(1, n):
        a, b = int(order[k]), int(order[rng.integers(k)])
        edges.add((min(a, b), max(a, b)))
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < extra_prob:
                edges.add((i, j))
    return sorted(edges)


def permute_mol_graph(g, perm):
    """Relabel atoms so that old atom i becomes perm[i]."""
    from metastab.featurize import MolGraph

    inv = np.argsort(perm)
    edges = perm[g.edge_list] if g.num_edges else g.edge_list
    adj = g.adjacency[np.ix_(inv, inv)]
    return MolGraph(g.node_features[inv], edges, g.edge_features, adj)


def permute_bond_graph(r, perm, edge_order):
    """Relabel bond-nodes (old k -> perm[k]) and reorder the bond-edge list."""
    from metastab.remap import BondGraph

    inv = np.argsort(perm)
    edges = perm[r.edge_list][edge_order] if r.num_edges else r.edge_list
    return BondGraph(
        node_inputs=r.node_inputs[inv],
        edge_inputs=r.edge_inputs[edge_order],
        edge_list=edges,
        adjacency=r.adjacency[np.ix_(inv, inv)],
        node_origin=r.node_origin[inv],
        edge_origin=r.edge_origin[edge_order],
    )
