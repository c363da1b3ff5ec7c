"""GIN encoders for the molecular and bond-centric views.

Per view: input projection -> K GIN layers -> anti-smoothing normalization
-> hybrid max/mean readout ``z`` -> projection head ``p``.

In the bond view, projected bond-pair features are added to every neighbor
message before summation (GINE-style); the molecular view is node-only.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np

from . import tape as T
from .batch import ViewBatch
from .tape import Parameter, Tensor

NORM_GUARD = 1e-12


@dataclass
class EncoderConfig:
    num_gin_layers: int = 3
    hidden_dim: int = 64
    mlp_layers: int = 2
    epsilon_init: float = 0.0
    scaling_factor: float = 1e-6
    projection_dim: int = 64
    normalize: bool = True

    def __post_init__(self):
        if self.num_gin_layers < 1:
            raise ValueError("num_gin_layers must be >= 1")
        if self.hidden_dim < 1 or self.projection_dim < 1:
            raise ValueError("hidden_dim and projection_dim must be >= 1")
        if self.mlp_layers < 1:
            raise ValueError("mlp_layers must be >= 1")
        if not self.scaling_factor > 0:
            raise ValueError("scaling_factor must be > 0")

    def to_dict(self) -> dict:
        return asdict(self)


class ParamStore:
    """Ordered, uniquely-named parameter registry with seeded init."""

    def __init__(self, seed: int = 0):
        self.rng = np.random.default_rng(seed)
        self.params: dict[str, Parameter] = {}

    def add(self, name: str, data: np.ndarray, trainable: bool = True) -> Parameter:
        if name in self.params:
            raise KeyError(f"duplicate parameter name {name!r}")
        p = Parameter(data, name=name, trainable=trainable)
        self.params[name] = p
        return p

    def uniform(self, name: str, shape: tuple[int, ...], fan_in: int) -> Parameter:
        bound = 1.0 / np.sqrt(fan_in)
        return self.add(name, self.rng.uniform(-bound, bound, size=shape))


class Linear:
    def __init__(self, store: ParamStore, name: str, n_in: int, n_out: int):
        self.weight = store.uniform(f"{name}.weight", (n_in, n_out), n_in)
        self.bias = store.uniform(f"{name}.bias", (n_out,), n_in)

    def __call__(self, x: Tensor) -> Tensor:
        return T.add(T.matmul(x, self.weight), self.bias)


class MLP:
    """Linear layers with ReLU between them (none after the last)."""

    def __init__(self, store: ParamStore, name: str, sizes: list[int]):
        self.layers = [
            Linear(store, f"{name}.{i}", a, b) for i, (a, b) in enumerate(zip(sizes, sizes[1:]))
        ]

    def __call__(self, x: Tensor) -> Tensor:
        for i, layer in enumerate(self.layers):
            if i:
                x = T.relu(x)
            x = layer(x)
        return x


# ------------------------------------------------------------ functional ops


def gin_layer(
    h: Tensor,
    src: np.ndarray,
    dst: np.ndarray,
    eps: Tensor | float,
    mlp: Callable[[Tensor], Tensor],
    edge_messages: Tensor | None = None,
) -> Tensor:
    """h'_i = MLP((1 + eps) h_i + sum_{j in N(i)} (h_j [+ e_ji])).

    ``src``/``dst`` list each undirected edge in both directions.
    """
    n = h.shape[0]
    self_term = T.mul(h, T.add(T.Tensor(1.0), eps if isinstance(eps, Tensor) else T.Tensor(eps)))
    if len(src):
        msgs = T.gather_rows(h, src)
        if edge_messages is not None:
            msgs = T.add(msgs, edge_messages)
        agg = T.add(self_term, T.segment_sum(msgs, dst, n))
    else:
        agg = self_term
    return mlp(agg)


def anti_smoothing_normalize(
    h: Tensor, s: float, graph_ids: np.ndarray | None = None, num_graphs: int | None = None
) -> Tensor:
    """Center each graph's node features, then rescale to Frobenius norm s*sqrt(|V|).

    Without ``graph_ids`` the whole matrix is treated as one graph. A constant
    (e.g. single-node) graph maps to zeros.
    """
    n = h.shape[0]
    if graph_ids is None:
        graph_ids = np.zeros(n, dtype=np.int64)
        num_graphs = 1
    if n == 0:
        return h
    centered = T.subtract(h, T.gather_rows(T.segment_mean(h, graph_ids, num_graphs), graph_ids))
    sq = T.segment_sum(T.row_sum(T.square(centered)), graph_ids, num_graphs)
    norm = T.add(T.sqrt(sq), T.Tensor(NORM_GUARD))
    counts = np.bincount(graph_ids, minlength=num_graphs).astype(np.float64)
    factor = T.div(T.Tensor(s * np.sqrt(counts)), norm)
    return T.scale_rows(centered, T.gather_rows(factor, graph_ids))


def readout(h: Tensor, graph_ids: np.ndarray | None = None, num_graphs: int | None = None) -> Tensor:
    """Per-graph concat of column max and column mean, shape (graphs, 2d).

    Graphs without nodes read out as zeros.
    """
    if graph_ids is None:
        graph_ids = np.zeros(h.shape[0], dtype=np.int64)
        num_graphs = 1
    return T.concat(
        [T.segment_max(h, graph_ids, num_graphs), T.segment_mean(h, graph_ids, num_graphs)],
        axis=1,
    )


# ------------------------------------------------------------------ modules


class ViewEncoder:
    """Encoder f(.) for one view.

    Args:
        node_in: width of raw node inputs.
        edge_in: width of raw bond-pair inputs, or None for a node-only view.
    """

    def __init__(self, store: ParamStore, name: str, cfg: EncoderConfig, node_in: int,
                 edge_in: int | None = None):
        self.cfg = cfg
        d = cfg.hidden_dim
        if edge_in is None:
            self.f_node = Linear(store, f"{name}.input", node_in, d)
            self.f_edge = None
        else:
            self.f_node = MLP(store, f"{name}.f_node", [node_in, d, d])
            self.f_edge = MLP(store, f"{name}.f_edge", [edge_in, d, d])
        self.eps = [
            store.add(f"{name}.gin{k}.eps", np.array(cfg.epsilon_init))
            for k in range(cfg.num_gin_layers)
        ]
        sizes = [d] * (cfg.mlp_layers + 1)
        self.mlps = [MLP(store, f"{name}.gin{k}.mlp", sizes) for k in range(cfg.num_gin_layers)]

    def input_projection(self, x: Tensor, edge_x: Tensor | None = None):
        h0 = T.relu(self.f_node(x))
        e = None
        if self.f_edge is not None and edge_x is not None and edge_x.shape[0]:
            e = self.f_edge(edge_x)
        return h0, e

    def node_embeddings(self, view: ViewBatch) -> Tensor:
        """Final-layer node features H^(K) (after normalization if enabled)."""
        d = self.cfg.hidden_dim
        if view.num_nodes == 0:
            return T.Tensor(np.zeros((0, d)))
        edge_x = T.Tensor(view.edge_x) if view.edge_x is not None else None
        h, e = self.input_projection(T.Tensor(view.x), edge_x)
        last = self.cfg.num_gin_layers - 1
        for k, (eps, mlp) in enumerate(zip(self.eps, self.mlps)):
            h = gin_layer(h, view.src, view.dst, eps, mlp, e)
            if k < last:
                h = T.relu(h)
        if self.cfg.normalize:
            h = anti_smoothing_normalize(
                h, self.cfg.scaling_factor, view.graph_ids, view.num_graphs
            )
        return h

    def __call__(self, view: ViewBatch) -> Tensor:
        d = self.cfg.hidden_dim
        h = self.node_embeddings(view)
        if view.num_nodes == 0:
            return T.Tensor(np.zeros((view.num_graphs, 2 * d)))
        return readout(h, view.graph_ids, view.num_graphs)


class ProjectionHead:
    """g(z) = W2 relu(W1 (c z) + b1) + b2.

    ``c`` is a fixed input gain: 1/s when normalization is on, so that the
    s-scaled readout reaches the head at O(1) magnitude.
    """

    def __init__(self, store: ParamStore, name: str, cfg: EncoderConfig):
        self.gain = 1.0 / cfg.scaling_factor if cfg.normalize else 1.0
        self.mlp = MLP(store, name, [2 * cfg.hidden_dim, cfg.hidden_dim, cfg.projection_dim])

    def __call__(self, z: Tensor) -> Tensor:
        if z.ndim != 2 or z.shape[1] != self.mlp.layers[0].weight.shape[0]:
            raise T.ShapeMismatch(f"projection head expects (B, 2d), got {z.shape}")
        return self.mlp(T.scale(z, self.gain))


def project(z: Tensor, head: ProjectionHead) -> Tensor:
    return head(z)
