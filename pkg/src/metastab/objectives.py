"""Training objectives and evidential prediction heads.

Classification uses Beta(alpha, beta) with alpha = e+ + 1, beta = e- + 1 and
subjective-logic masses b = e+/S, d = e-/S, u = 2/S (S = alpha + beta). The
loss is the expected binary cross-entropy under the Beta distribution.

Regression uses alpha, beta in (eps, 1 + eps] from sigmoids, predicts the
Beta mean and scores it with the expected squared error, i.e. squared error
of the mean plus the Beta variance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tape as T
from .encoder import Linear, ParamStore
from .tape import DomainError, Tensor

REGRESSION_EPS = 1e-6
NUM_CLASSES = 2


class BatchMismatch(ValueError):
    pass


# -------------------------------------------------------------- contrastive


def contrastive_loss(z_mol: Tensor, z_bond: Tensor, tau: float = 0.5,
                     symmetric: bool = False) -> Tensor:
    """InfoNCE between paired view embeddings, molecular rows as anchors.

    loss = -(1/B) sum_m log softmax_n(z_m . z^r_n / tau)[m]
    """
    if z_mol.shape != z_bond.shape or z_mol.ndim != 2:
        raise BatchMismatch(f"view embeddings differ: {z_mol.shape} vs {z_bond.shape}")
    if not tau > 0:
        raise ValueError("tau must be > 0")
    b = z_mol.shape[0]
    if b < 1:
        raise BatchMismatch("empty batch")
    diag = (np.arange(b), np.arange(b))
    sim = T.scale(T.matmul(z_mol, T.transpose(z_bond)), 1.0 / tau)
    loss = T.mean(T.subtract(T.logsumexp_rows(sim), sim[diag]))
    if symmetric:
        sim_t = T.transpose(sim)
        other = T.mean(T.subtract(T.logsumexp_rows(sim_t), sim_t[diag]))
        loss = T.scale(T.add(loss, other), 0.5)
    return loss


# ----------------------------------------------------------- classification


@dataclass
class EvidentialClassification:
    """Batched Beta opinions (all fields are arrays of the batch length)."""

    e_plus: np.ndarray
    e_minus: np.ndarray

    @classmethod
    def from_evidence(cls, e_plus, e_minus) -> "EvidentialClassification":
        e_plus = np.asarray(e_plus, dtype=np.float64)
        e_minus = np.asarray(e_minus, dtype=np.float64)
        if np.any(e_plus < 0) or np.any(e_minus < 0):
            raise ValueError("evidence must be non-negative")
        return cls(e_plus, e_minus)

    @property
    def alpha(self) -> np.ndarray:
        return self.e_plus + 1.0

    @property
    def beta(self) -> np.ndarray:
        return self.e_minus + 1.0

    @property
    def strength(self) -> np.ndarray:
        return self.alpha + self.beta

    @property
    def belief(self) -> np.ndarray:
        return self.e_plus / self.strength

    @property
    def disbelief(self) -> np.ndarray:
        return self.e_minus / self.strength

    @property
    def uncertainty(self) -> np.ndarray:
        return NUM_CLASSES / self.strength

    @property
    def probs(self) -> tuple[np.ndarray, np.ndarray]:
        s = self.strength
        return self.alpha / s, self.beta / s

    @property
    def p_plus(self) -> np.ndarray:
        return self.alpha / self.strength


_ACTIVATIONS = {
    "softplus": T.softplus,
    "relu": T.relu,
    "exp": T.exp,
}


class ClassificationHead:
    """Two evidence neurons: e = act(W h + b), act in {softplus, relu, exp}."""

    def __init__(self, store: ParamStore, name: str, n_in: int, activation: str = "softplus"):
        if activation not in _ACTIVATIONS:
            raise ValueError(f"unknown evidence activation {activation!r}")
        self.linear = Linear(store, name, n_in, 2)
        self.activation = activation

    def evidence(self, h: Tensor) -> Tensor:
        return _ACTIVATIONS[self.activation](self.linear(h))

    def __call__(self, h: Tensor) -> tuple[Tensor, Tensor]:
        """Returns (alpha, beta) tensors of shape (B,)."""
        e = self.evidence(h)
        return T.add(e[:, 0], T.Tensor(1.0)), T.add(e[:, 1], T.Tensor(1.0))


def classification_head(h: Tensor, head: ClassificationHead) -> EvidentialClassification:
    e = head.evidence(h).data
    return EvidentialClassification.from_evidence(e[:, 0], e[:, 1])


def classification_loss(alpha, beta, y) -> Tensor:
    """Per-sample expected BCE: y(psi(S) - psi(alpha)) + (1-y)(psi(S) - psi(beta))."""
    alpha, beta = T._wrap(alpha), T._wrap(beta)
    if np.any(~(alpha.data > 0)) or np.any(~(beta.data > 0)):
        raise DomainError("alpha and beta must be positive")
    y = np.asarray(y, dtype=np.float64)
    psi_s = T.digamma(T.add(alpha, beta))
    pos = T.subtract(psi_s, T.digamma(alpha))
    neg = T.subtract(psi_s, T.digamma(beta))
    return T.add(T.mul(pos, T.Tensor(y)), T.mul(neg, T.Tensor(1.0 - y)))


# --------------------------------------------------------------- regression


@dataclass
class EvidentialRegression:
    alpha: np.ndarray
    beta: np.ndarray

    @property
    def strength(self) -> np.ndarray:
        return self.alpha + self.beta

    @property
    def mean(self) -> np.ndarray:
        return self.alpha / self.strength

    @property
    def variance(self) -> np.ndarray:
        s = self.strength
        return self.alpha * self.beta / (s * s * (s + 1.0))


class RegressionHead:
    """alpha = act(w_a . h + b_a) + eps, beta likewise.

    ``bounded`` (default) uses a sigmoid, so alpha, beta <= 1 + eps;
    the unbounded variant uses softplus.
    """

    def __init__(self, store: ParamStore, name: str, n_in: int, bounded: bool = True):
        self.linear = Linear(store, name, n_in, 2)
        self.bounded = bounded

    def __call__(self, h: Tensor) -> tuple[Tensor, Tensor]:
        raw = self.linear(h)
        act = T.sigmoid(raw) if self.bounded else T.softplus(raw)
        out = T.add(act, T.Tensor(REGRESSION_EPS))
        return out[:, 0], out[:, 1]


def regression_head(h: Tensor, head: RegressionHead) -> EvidentialRegression:
    a, b = head(h)
    return EvidentialRegression(a.data, b.data)


def regression_loss(alpha, beta, y) -> Tensor:
    """Per-sample (alpha/S - y)^2 + alpha beta / (S^2 (S + 1))."""
    alpha, beta = T._wrap(alpha), T._wrap(beta)
    y = np.asarray(y, dtype=np.float64)
    if np.any(~((y > 0) & (y < 1))):
        raise DomainError("regression targets must lie in (0, 1)")
    if np.any(~(alpha.data > 0)) or np.any(~(beta.data > 0)):
        raise DomainError("alpha and beta must be positive")
    s = T.add(alpha, beta)
    mse = T.square(T.subtract(T.div(alpha, s), T.Tensor(y)))
    var = T.div(T.mul(alpha, beta), T.mul(T.square(s), T.add(s, T.Tensor(1.0))))
    return T.add(mse, var)


# ----------------------------------------------------------------- combined


@dataclass
class LossBreakdown:
    loss_G: float
    loss_Gr: float
    loss_CL: float
    total: float
    lam: float

    def to_dict(self) -> dict:
        return {
            "loss_G": self.loss_G,
            "loss_Gr": self.loss_Gr,
            "loss_CL": self.loss_CL,
            "total": self.total,
            "lambda": self.lam,
        }


def combined_loss(loss_G, loss_Gr, loss_CL, lam: float):
    """L = L_G + L_Gr + lam * L_CL.

    With tensors the result is a tensor; with plain numbers a
    :class:`LossBreakdown`.
    """
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    if any(isinstance(x, Tensor) for x in (loss_G, loss_Gr, loss_CL)):
        a, b, c = T._wrap(loss_G), T._wrap(loss_Gr), T._wrap(loss_CL)
        return T.add(T.add(a, b), T.scale(c, lam))
    g, gr, cl = float(loss_G), float(loss_Gr), float(loss_CL)
    return LossBreakdown(g, gr, cl, g + gr + lam * cl, lam)


# -------------------------------------------------------------------- fusion


def fuse_predictions(ev_G, ev_Gr, bond_present=None):
    """Combine the two views' outputs.

    Classification: evidence is summed, then masses are recomputed.
    Regression: alpha and beta are averaged. Where ``bond_present`` is False
    (or ``ev_Gr`` is None) the molecular view passes through.
    """
    if ev_Gr is None:
        return ev_G
    if isinstance(ev_G, EvidentialClassification):
        present = np.ones_like(ev_G.e_plus, dtype=bool) if bond_present is None else bond_present
        return EvidentialClassification(
            ev_G.e_plus + np.where(present, ev_Gr.e_plus, 0.0),
            ev_G.e_minus + np.where(present, ev_Gr.e_minus, 0.0),
        )
    present = np.ones_like(ev_G.alpha, dtype=bool) if bond_present is None else bond_present
    return EvidentialRegression(
        np.where(present, 0.5 * (ev_G.alpha + ev_Gr.alpha), ev_G.alpha),
        np.where(present, 0.5 * (ev_G.beta + ev_Gr.beta), ev_G.beta),
    )
