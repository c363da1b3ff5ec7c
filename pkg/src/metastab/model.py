"""Dual-view evidential model: encoders, projection heads and task heads."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from . import tape as T
from .batch import GraphBatch
from .encoder import EncoderConfig, ParamStore, ProjectionHead, ViewEncoder
from .featurize import ATOM_DIM
from .objectives import (
    ClassificationHead,
    EvidentialClassification,
    EvidentialRegression,
    LossBreakdown,
    RegressionHead,
    classification_loss,
    combined_loss,
    contrastive_loss,
    fuse_predictions,
    regression_loss,
)
from .remap import BOND_EDGE_DIM, BOND_NODE_DIM
from .tape import Tensor

TASKS = ("classification", "regression")


@dataclass
class ModelConfig:
    task: str = "classification"
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    lam: float = 0.2
    tau: float = 0.5
    symmetric_contrastive: bool = False
    evidence_activation: str = "softplus"
    regression_bounded: bool = True
    use_bond_view: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"task must be one of {TASKS}, got {self.task!r}")
        if isinstance(self.encoder, dict):
            self.encoder = EncoderConfig(**self.encoder)
        if self.lam < 0:
            raise ValueError("lambda must be >= 0")
        if not self.tau > 0:
            raise ValueError("tau must be > 0")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)


@dataclass
class ModelOutput:
    z_mol: Tensor
    z_bond: Tensor
    alpha_G: Tensor
    beta_G: Tensor
    alpha_Gr: Tensor
    beta_Gr: Tensor
    has_bonds: np.ndarray


class DualViewModel:
    def __init__(self, config: ModelConfig):
        self.config = config
        cfg = config.encoder
        store = ParamStore(config.seed)
        self.mol_encoder = ViewEncoder(store, "mol", cfg, ATOM_DIM)
        self.bond_encoder = ViewEncoder(store, "bond", cfg, BOND_NODE_DIM, BOND_EDGE_DIM)
        self.mol_projection = ProjectionHead(store, "mol.proj", cfg)
        self.bond_projection = ProjectionHead(store, "bond.proj", cfg)
        if config.task == "classification":
            self.mol_head = ClassificationHead(
                store, "mol.head", cfg.projection_dim, config.evidence_activation
            )
            self.bond_head = ClassificationHead(
                store, "bond.head", cfg.projection_dim, config.evidence_activation
            )
        else:
            self.mol_head = RegressionHead(
                store, "mol.head", cfg.projection_dim, config.regression_bounded
            )
            self.bond_head = RegressionHead(
                store, "bond.head", cfg.projection_dim, config.regression_bounded
            )
        self.params = store.params

    def parameters(self) -> list[T.Parameter]:
        return list(self.params.values())

    def state_dict(self) -> dict[str, np.ndarray]:
        return {k: p.data.copy() for k, p in self.params.items()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        missing = set(self.params) - set(state)
        extra = set(state) - set(self.params)
        if missing or extra:
            raise KeyError(f"state mismatch: missing={sorted(missing)} extra={sorted(extra)}")
        for k, p in self.params.items():
            arr = np.asarray(state[k], dtype=np.float64)
            if arr.shape != p.shape:
                raise ValueError(f"{k}: shape {arr.shape} != {p.shape}")
            p.data = arr.copy()

    def forward(self, batch: GraphBatch) -> ModelOutput:
        z_mol = self.mol_encoder(batch.mol)
        z_bond = self.bond_encoder(batch.bond)
        a_g, b_g = self.mol_head(self.mol_projection(z_mol))
        a_r, b_r = self.bond_head(self.bond_projection(z_bond))
        return ModelOutput(z_mol, z_bond, a_g, b_g, a_r, b_r, batch.has_bonds)

    __call__ = forward

    def _view_loss(self, alpha: Tensor, beta: Tensor, y: np.ndarray) -> Tensor:
        if self.config.task == "classification":
            return classification_loss(alpha, beta, y)
        return regression_loss(alpha, beta, y)

    def loss(self, out: ModelOutput, y: np.ndarray,
             weights: np.ndarray | None = None) -> tuple[Tensor, LossBreakdown]:
        """Batch-mean view losses combined with the contrastive term.

        Molecules without bonds are left out of the bond-view term. Optional
        per-sample ``weights`` rescale the view losses (class weighting).
        """
        cfg = self.config
        y = np.asarray(y, dtype=np.float64)

        def reduce(per, idx=None):
            if weights is None:
                return T.mean(per)
            w = np.asarray(weights, dtype=np.float64)
            w = w if idx is None else w[idx]
            return T.mean(T.mul(per, T.Tensor(w)))

        loss_g = reduce(self._view_loss(out.alpha_G, out.beta_G, y))
        present = np.flatnonzero(out.has_bonds)
        if cfg.use_bond_view and present.size:
            per = self._view_loss(out.alpha_Gr[present], out.beta_Gr[present], y[present])
            loss_gr = reduce(per, present)
        else:
            loss_gr = T.Tensor(0.0)
        if cfg.use_bond_view:
            loss_cl = contrastive_loss(out.z_mol, out.z_bond, cfg.tau, cfg.symmetric_contrastive)
        else:
            loss_cl = T.Tensor(0.0)
        total = combined_loss(loss_g, loss_gr, loss_cl, cfg.lam)
        breakdown = combined_loss(loss_g.item(), loss_gr.item(), loss_cl.item(), cfg.lam)
        return total, breakdown

    def predict(self, batch: GraphBatch):
        """Fused evidential output plus the two per-view outputs."""
        out = self.forward(batch)
        has = out.has_bonds if self.config.use_bond_view else np.zeros_like(out.has_bonds)
        if self.config.task == "classification":
            ev_g = EvidentialClassification(out.alpha_G.data - 1.0, out.beta_G.data - 1.0)
            ev_r = EvidentialClassification(out.alpha_Gr.data - 1.0, out.beta_Gr.data - 1.0)
        else:
            ev_g = EvidentialRegression(out.alpha_G.data, out.beta_G.data)
            ev_r = EvidentialRegression(out.alpha_Gr.data, out.beta_Gr.data)
        return fuse_predictions(ev_g, ev_r, has), ev_g, ev_r
