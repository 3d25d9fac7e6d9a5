"""Loss terms, their weighting, and plain numerical differentiation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .mesh import Mesh


@dataclass
class LossWeights:
    """Scalar weights of the total objective.

    Defaults are the animal/puppet preset; lambda_skin = 0.1 suits denser
    human scan data.
    """

    lambda_k: float = 2.0
    lambda_skin: float = 0.4
    lambda_cycle: float = 1.0
    lambda_self: float = 1.0
    lambda_edge: float = 0.0005

    @classmethod
    def from_dict(cls, data: dict) -> "LossWeights":
        known = {f for f in cls.__dataclass_fields__}
        bad = set(data) - known
        if bad:
            raise ValueError(f"unknown loss weight keys: {sorted(bad)}")
        return cls(**data)

    def to_dict(self) -> dict:
        return {
            "lambda_k": self.lambda_k,
            "lambda_skin": self.lambda_skin,
            "lambda_cycle": self.lambda_cycle,
            "lambda_self": self.lambda_self,
            "lambda_edge": self.lambda_edge,
        }


@dataclass
class LossBreakdown:
    """Unweighted loss components plus their weighted total.

    The self-reconstruction component is stored as ``self_recon`` (an
    attribute cannot be called ``self``); its JSON key is "self".
    """

    keypoint: float = 0.0
    skin: float = 0.0
    cycle: float = 0.0
    self_recon: float = 0.0
    edge: float = 0.0
    total: float = 0.0

    def to_dict(self) -> dict:
        return {
            "keypoint": self.keypoint,
            "skin": self.skin,
            "cycle": self.cycle,
            "self": self.self_recon,
            "edge": self.edge,
            "total": self.total,
        }


def total_loss(
    weights: LossWeights,
    *,
    keypoint: float = 0.0,
    skin: float = 0.0,
    cycle: float = 0.0,
    self_recon: float = 0.0,
    edge: float = 0.0,
) -> LossBreakdown:
    """Weighted sum of the loss components, in fixed term order."""
    total = (
        weights.lambda_k * keypoint
        + weights.lambda_skin * skin
        + weights.lambda_cycle * cycle
        + weights.lambda_self * self_recon
        + weights.lambda_edge * edge
    )
    return LossBreakdown(
        keypoint=float(keypoint),
        skin=float(skin),
        cycle=float(cycle),
        self_recon=float(self_recon),
        edge=float(edge),
        total=float(total),
    )


def edge_discrepancy(
    source_vertices: np.ndarray, deformed_vertices: np.ndarray, edges: np.ndarray
) -> float:
    """Mean squared edge-length difference over an explicit edge list."""
    if edges.shape[0] == 0:
        return 0.0
    s = np.asarray(source_vertices, dtype=np.float64)
    d = np.asarray(deformed_vertices, dtype=np.float64)
    ls = np.linalg.norm(s[edges[:, 0]] - s[edges[:, 1]], axis=1)
    ld = np.linalg.norm(d[edges[:, 0]] - d[edges[:, 1]], axis=1)
    diff = ld - ls
    return float(np.mean(diff * diff))


def edge_loss(source: Mesh, deformed: Mesh) -> float:
    """Edge-length preservation loss between a mesh and its deformation.

    Each undirected edge contributes once and the sum is divided by the
    edge count, so values are comparable across mesh resolutions.
    """
    if not source.same_connectivity(deformed):
        raise ValueError("edge_loss requires identical connectivity")
    return edge_discrepancy(source.vertices, deformed.vertices, source.edges)


def edge_discrepancy_gradient(
    source_vertices: np.ndarray, deformed_vertices: np.ndarray, edges: np.ndarray
) -> np.ndarray:
    """Gradient of ``edge_discrepancy`` in the deformed vertex positions."""
    d = np.asarray(deformed_vertices, dtype=np.float64)
    grad = np.zeros_like(d)
    if edges.shape[0] == 0:
        return grad
    s = np.asarray(source_vertices, dtype=np.float64)
    i, j = edges[:, 0], edges[:, 1]
    ls = np.linalg.norm(s[i] - s[j], axis=1)
    dv = d[i] - d[j]
    ld = np.linalg.norm(dv, axis=1)
    # A collapsed deformed edge has no defined direction; its subgradient 0
    # is used so the descent step stays finite.
    safe = np.where(ld > 0, ld, 1.0)
    coef = np.where(ld > 0, 2.0 * (ld - ls) / (edges.shape[0] * safe), 0.0)
    contrib = coef[:, None] * dv
    np.add.at(grad, i, contrib)
    np.add.at(grad, j, -contrib)
    return grad


def numerical_gradient(
    f: Callable[[np.ndarray], float], x: np.ndarray, step: float = 1e-5
) -> np.ndarray:
    """Central-difference gradient with per-component relative stepping.

    Component j is probed at x_j +/- h_j with h_j = step * (1 + |x_j|).
    Every probe must produce a finite value.
    """
    x = np.asarray(x, dtype=np.float64)
    grad = np.empty_like(x)
    for j in range(x.shape[0]):
        h = step * (1.0 + abs(float(x[j])))
        xp = x.copy()
        xm = x.copy()
        xp[j] += h
        xm[j] -= h
        fp = float(f(xp))
        fm = float(f(xm))
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise ValueError("non-finite objective at a probe point")
        grad[j] = (fp - fm) / (2.0 * h)
    return grad
