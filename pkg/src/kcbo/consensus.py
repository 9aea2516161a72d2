"""Weighted consensus point, mean displacement and the noise operator.

All functions broadcast over leading batch axes: positions of shape
``(..., J, d)`` give consensus points of shape ``(..., d)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import NoiseKind, ObjectiveSpec
from .errors import EmptyEnsembleError, NumericalError

__all__ = [
    "ConsensusPoint",
    "consensus_weights",
    "weighted_consensus",
    "consensus_from_values",
    "delta_alpha",
    "noise_matrix_apply",
    "tau",
]


@dataclass(frozen=True)
class ConsensusPoint:
    point: np.ndarray
    log_partition: np.ndarray | float
    """``log((1/J) sum_j exp(-alpha f(x_j)))``."""


def consensus_weights(fvals: np.ndarray, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    """Normalized Gibbs weights ``exp(-alpha f) / sum exp(-alpha f)`` over the last axis.

    Returns the weights and the log of the mean unnormalized weight. The
    exponent is shifted by its maximum before exponentiating, so the largest
    weight is exactly ``exp(0)`` before normalization.
    """
    fvals = np.asarray(fvals, dtype=float)
    J = fvals.shape[-1]
    if J == 0:
        raise EmptyEnsembleError("cannot form a consensus point of an empty ensemble")
    logits = -alpha * fvals
    shift = np.max(logits, axis=-1, keepdims=True)
    w = np.exp(logits - shift)
    total = np.sum(w, axis=-1, keepdims=True)
    if not (np.all(np.isfinite(w)) and np.all(np.isfinite(total)) and np.all(total > 0)):
        raise NumericalError("non-finite consensus weights")
    log_partition = np.squeeze(shift + np.log(total), axis=-1) - np.log(J)
    return w / total, log_partition


def consensus_from_values(positions: np.ndarray, fvals: np.ndarray, alpha: float) -> ConsensusPoint:
    """Consensus point given precomputed objective values at ``positions``."""
    positions = np.asarray(positions, dtype=float)
    if positions.shape[-2] == 0:
        raise EmptyEnsembleError("cannot form a consensus point of an empty ensemble")
    w, logz = consensus_weights(fvals, alpha)
    # anchored at the first particle so a collapsed ensemble maps exactly to its location
    anchor = positions[..., :1, :]
    point = anchor[..., 0, :] + np.sum(w[..., :, None] * (positions - anchor), axis=-2)
    if not np.all(np.isfinite(point)):
        raise NumericalError("non-finite consensus point")
    return ConsensusPoint(point, logz if np.ndim(logz) else float(logz))


def weighted_consensus(positions: np.ndarray, alpha: float, objective: ObjectiveSpec) -> ConsensusPoint:
    """Gibbs-weighted mean ``sum_j w_j x_j`` with ``w_j`` proportional to ``exp(-alpha f(x_j))``.

    With ``alpha = 0`` this is the arithmetic mean; a single particle is its
    own consensus point. Ensembles where every particle has the same objective
    value also reduce to the arithmetic mean, with no special-casing.
    """
    positions = np.asarray(positions, dtype=float)
    if positions.ndim < 2 or positions.shape[-2] == 0:
        raise EmptyEnsembleError("positions must be a non-empty (..., J, d) array")
    return consensus_from_values(positions, objective.eval(positions), alpha)


def delta_alpha(positions: np.ndarray, alpha: float, objective: ObjectiveSpec) -> np.ndarray:
    """Arithmetic mean minus consensus point."""
    positions = np.asarray(positions, dtype=float)
    point = weighted_consensus(positions, alpha, objective).point
    return np.mean(positions, axis=-2) - point


def noise_matrix_apply(x: np.ndarray, kind: NoiseKind | str, dW: np.ndarray) -> np.ndarray:
    """Matrix-free action ``S(x) dW`` of the diffusion operator.

    Isotropic: ``|x| dW``; anisotropic: ``x * dW`` componentwise.
    """
    x = np.asarray(x, dtype=float)
    if NoiseKind(kind) is NoiseKind.ISOTROPIC:
        return np.linalg.norm(x, axis=-1, keepdims=True) * dW
    return x * dW


def tau(kind: NoiseKind | str, d: int) -> int:
    return NoiseKind(kind).tau(d)
