"""Euler-Maruyama integration of kinetic and first-order CBO, and coupled pairs.

The array-level helpers (:func:`kinetic_update`, :func:`first_order_update`)
broadcast over leading replica axes and are what the experiment drivers use
for batched runs; the ensemble-level functions wrap them with validation.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .consensus import noise_matrix_apply, weighted_consensus
from .core import KineticParams, ObjectiveSpec, ParticleEnsemble, RngStream, gaussian_increments
from .errors import BlowupError, ParameterError, ShapeMismatchError

__all__ = [
    "ConsensusMode",
    "CoupledPair",
    "kinetic_update",
    "first_order_update",
    "em_step",
    "em_step_first_order",
    "coupled_step",
    "n_steps_for",
    "run_trajectory",
    "consensus_unchecked",
    "kinetic_step_batch",
]


def kinetic_update(X, V, M, dW, params: KineticParams):
    """One explicit Euler-Maruyama step of the kinetic system.

    ``X, V, dW`` have shape ``(..., J, d)`` and ``M`` shape ``(..., d)``. Drift
    and diffusion are both evaluated at the pre-step state.
    """
    dt, m = params.dt, params.m
    # overflow surfaces as non-finite output, which callers report as a blowup
    with np.errstate(over="ignore", invalid="ignore"):
        F = X - M[..., None, :]
        X_new = X + V * dt
        V_new = V - (params.gamma * dt / m) * V - (dt / m) * F
        if params.sigma != 0.0:
            V_new = V_new + (params.sigma / m) * noise_matrix_apply(F, params.noise, dW)
    return X_new, V_new


def first_order_update(X, M, dW, params: KineticParams):
    with np.errstate(over="ignore", invalid="ignore"):
        F = X - M[..., None, :]
        X_new = X - params.dt * F
        if params.sigma != 0.0:
            X_new = X_new + params.sigma * noise_matrix_apply(F, params.noise, dW)
    return X_new


def consensus_unchecked(X, alpha: float, objective: ObjectiveSpec) -> np.ndarray:
    """Batched consensus point that lets non-finite replicas through.

    Used by the experiment drivers, which exclude blown-up replicas at record
    time instead of aborting the whole batch.
    """
    fvals = objective.eval(X)
    logits = -alpha * fvals
    with np.errstate(invalid="ignore", over="ignore"):
        w = np.exp(logits - np.max(logits, axis=-1, keepdims=True))
        w = w / np.sum(w, axis=-1, keepdims=True)
        anchor = X[..., :1, :]
        return anchor[..., 0, :] + np.sum(w[..., :, None] * (X - anchor), axis=-2)


def _check_finite(*arrays, step: int, time: float):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise BlowupError(step, time)


def em_step(
    ens: ParticleEnsemble,
    params: KineticParams,
    objective: ObjectiveSpec,
    stream: RngStream,
    step_index: int = 1,
) -> ParticleEnsemble:
    """Advance the kinetic ensemble by one step of size ``params.dt``."""
    M = weighted_consensus(ens.X, params.alpha, objective).point
    dW = gaussian_increments(stream, ens.J, ens.d, params.dt)
    X, V = kinetic_update(ens.X, ens.V, M, dW, params)
    t = ens.t + params.dt
    _check_finite(X, V, step=step_index, time=t)
    return ParticleEnsemble(X, V, t)


def em_step_first_order(
    positions: np.ndarray,
    params: KineticParams,
    objective: ObjectiveSpec,
    stream: RngStream,
    step_index: int = 1,
) -> np.ndarray:
    """One Euler-Maruyama step of first-order CBO (benchmark baseline)."""
    positions = np.asarray(positions, dtype=float)
    M = weighted_consensus(positions, params.alpha, objective).point
    dW = gaussian_increments(stream, positions.shape[0], positions.shape[1], params.dt)
    X = first_order_update(positions, M, dW, params)
    _check_finite(X, step=step_index, time=step_index * params.dt)
    return X


class ConsensusMode(str, enum.Enum):
    EMPIRICAL = "empirical"
    REFERENCE_PROXY = "reference_proxy"


@dataclass
class CoupledPair:
    """Two ensembles driven by the same Brownian increments.

    In ``REFERENCE_PROXY`` mode, ``system_b`` reads its consensus point from
    ``reference``, a larger self-consistent ensemble standing in for the
    mean-field law.
    """

    system_a: ParticleEnsemble
    system_b: ParticleEnsemble
    consensus_mode_b: ConsensusMode = ConsensusMode.EMPIRICAL
    reference: Optional[ParticleEnsemble] = None

    def __post_init__(self):
        self.consensus_mode_b = ConsensusMode(self.consensus_mode_b)
        a, b = self.system_a, self.system_b
        if a.X.shape != b.X.shape:
            raise ShapeMismatchError(f"coupled systems differ in shape: {a.X.shape} vs {b.X.shape}")
        if a.t != b.t:
            raise ShapeMismatchError(f"coupled systems differ in time: {a.t} vs {b.t}")
        if self.consensus_mode_b is ConsensusMode.REFERENCE_PROXY:
            ref = self.reference
            if ref is None:
                raise ShapeMismatchError("reference-proxy mode needs a reference ensemble")
            if ref.d != a.d:
                raise ShapeMismatchError("reference ensemble dimension differs")
            if ref.J < 8 * a.J:
                raise ShapeMismatchError(f"reference size {ref.J} below 8 J = {8 * a.J}")

    @property
    def dX(self) -> np.ndarray:
        return self.system_a.X - self.system_b.X

    @property
    def dV(self) -> np.ndarray:
        return self.system_a.V - self.system_b.V


def coupled_step(
    pair: CoupledPair,
    params: KineticParams,
    objective: ObjectiveSpec,
    stream: RngStream,
    step_index: int = 1,
) -> CoupledPair:
    """Advance both systems (and the reference, if any) by one step.

    One set of increments is drawn per particle index and shared by the two
    systems; the reference then draws its own independent increments from the
    same stream.
    """
    a, b = pair.system_a, pair.system_b
    dW = gaussian_increments(stream, a.J, a.d, params.dt)
    Ma = weighted_consensus(a.X, params.alpha, objective).point
    ref = pair.reference
    if pair.consensus_mode_b is ConsensusMode.REFERENCE_PROXY:
        Mb = weighted_consensus(ref.X, params.alpha, objective).point
    else:
        Mb = weighted_consensus(b.X, params.alpha, objective).point
    Xa, Va = kinetic_update(a.X, a.V, Ma, dW, params)
    Xb, Vb = kinetic_update(b.X, b.V, Mb, dW, params)
    t = a.t + params.dt
    new_ref = None
    if ref is not None:
        dW_ref = gaussian_increments(stream, ref.J, ref.d, params.dt)
        Mr = Mb if pair.consensus_mode_b is ConsensusMode.REFERENCE_PROXY else weighted_consensus(
            ref.X, params.alpha, objective
        ).point
        Xr, Vr = kinetic_update(ref.X, ref.V, Mr, dW_ref, params)
        _check_finite(Xr, Vr, step=step_index, time=t)
        new_ref = ParticleEnsemble(Xr, Vr, t)
    _check_finite(Xa, Va, Xb, Vb, step=step_index, time=t)
    return CoupledPair(ParticleEnsemble(Xa, Va, t), ParticleEnsemble(Xb, Vb, t), pair.consensus_mode_b, new_ref)


def n_steps_for(T: float, dt: float) -> int:
    """``ceil(T / dt)``, robust to representation error in ``T / dt``."""
    if T < 0:
        raise ParameterError(f"horizon must be nonnegative, got {T}")
    ratio = T / dt
    n = math.floor(ratio)
    return n if ratio - n <= 1e-9 * max(1.0, ratio) else n + 1


def run_trajectory(
    ens: ParticleEnsemble,
    params: KineticParams,
    objective: ObjectiveSpec,
    T: float,
    stream: RngStream,
    observer: Callable | None = None,
    record_stride: int = 1,
    ps=(8,),
) -> ParticleEnsemble:
    """Repeat :func:`em_step` ``ceil(T/dt)`` times.

    ``observer`` receives a :class:`~kcbo.diagnostics.LyapunovReport` at step
    0, at every multiple of ``record_stride`` and at the final step.
    """
    from .diagnostics import lyapunov_report

    if record_stride < 1:
        raise ParameterError("record_stride must be >= 1")
    n = n_steps_for(T, params.dt)
    if observer is not None:
        observer(lyapunov_report(ens, params, objective, ps=ps))
    for k in range(1, n + 1):
        ens = em_step(ens, params, objective, stream, step_index=k)
        if observer is not None and (k % record_stride == 0 or k == n):
            observer(lyapunov_report(ens, params, objective, ps=ps))
    return ens


def kinetic_step_batch(X, V, params: KineticParams, objective: ObjectiveSpec, dW, M=None):
    """Batched kinetic step; ``M`` defaults to each replica's own consensus."""
    if M is None:
        M = consensus_unchecked(X, params.alpha, objective)
    with np.errstate(invalid="ignore", over="ignore"):
        return kinetic_update(X, V, M, dW, params)

