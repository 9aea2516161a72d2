"""Centered-shifted variables, Lyapunov functionals, coupling energies and moments.

Functions take arrays of shape ``(..., J, d)`` and reduce over the particle
axis, so a stack of replicas is evaluated in one call.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from typing import Optional

import numpy as np

from .consensus import delta_alpha
from .core import KineticParams, ObjectiveSpec, ParticleEnsemble
from .errors import AdmissibilityError, ShapeMismatchError

__all__ = [
    "ShiftedState",
    "LyapunovReport",
    "centered_shifted",
    "psi2_functional",
    "phi_functional",
    "high_moment_weight",
    "lyapunov_Lp",
    "lyapunov_L",
    "coupling_energy",
    "coupling_energy_blocks",
    "lstd_functional",
    "centered_moment",
    "raw_moment",
    "coupled_w2_bound",
    "exact_w2_1d",
    "lyapunov_report",
    "report_columns",
]


@dataclass(frozen=True)
class ShiftedState:
    """Centered positions ``Y`` and centered shifted velocities ``Z_hat``."""

    Y: np.ndarray
    Z_hat: np.ndarray


def centered_shifted(ens_or_X, V=None, gamma: float | None = None) -> ShiftedState:
    """``Y = X - mean(X)``, ``Z_hat = (V - mean(V)) - Y / gamma``.

    Accepts either ``(ensemble, gamma)`` or ``(X, V, gamma)``.
    """
    if isinstance(ens_or_X, ParticleEnsemble):
        if gamma is None:
            gamma = V
        X, V = ens_or_X.X, ens_or_X.V
    else:
        X = ens_or_X
    X = np.asarray(X, dtype=float)
    V = np.asarray(V, dtype=float)
    if gamma is None:
        raise TypeError("gamma is required")
    Y = X - np.mean(X, axis=-2, keepdims=True)
    Z = (V - np.mean(V, axis=-2, keepdims=True)) - Y / gamma
    return ShiftedState(Y, Z)


def _dot(x, v):
    return np.sum(x * v, axis=-1)


def _sq(x):
    return np.sum(x * x, axis=-1)


def psi2_functional(state: ShiftedState, params: KineticParams):
    """Quadratic centered functional ``mean_j [a2 |Y|^2 + |Z|^2 + (5/gamma) <Y, Z>]``."""
    m, g = params.m, params.gamma
    if not g * g > 7.0 * m / 6.0:
        raise AdmissibilityError(f"psi2 is not coercive: gamma^2={g * g:g} <= 7m/6={7 * m / 6:g}")
    a2 = 9.0 / (2.0 * m) + 1.0 / g**2
    Y, Z = state.Y, state.Z_hat
    return np.mean(a2 * _sq(Y) + _sq(Z) + (5.0 / g) * _dot(Y, Z), axis=-1)


def phi_functional(x_part, v_part, a: float, p: float, params: KineticParams):
    """Ensemble mean of ``a |x|^p + |v|^p + (m/gamma) |x|^(p-2) <x, v>``.

    The mixed term is taken as 0 at ``x = 0``.
    """
    if p < 2:
        raise ValueError(f"p must be >= 2, got {p}")
    x = np.asarray(x_part, dtype=float)
    v = np.asarray(v_part, dtype=float)
    nx = np.sqrt(_sq(x))
    nv = np.sqrt(_sq(v))
    if p == 2:
        mixed = _dot(x, v)
    else:
        safe = np.where(nx > 0, nx, 1.0)
        mixed = np.where(nx > 0, safe ** (p - 2) * _dot(x, v), 0.0)
    vals = a * nx**p + nv**p + (params.m / params.gamma) * mixed
    return np.mean(vals, axis=-1)


def high_moment_weight(p: float, params: KineticParams) -> float:
    """Spatial weight ``a_p = (1/p)(1 - m (p-2) / gamma^2)``."""
    return (1.0 - params.m * (p - 2) / params.gamma**2) / p


def lyapunov_Lp(state: ShiftedState, p: float, params: KineticParams):
    """High-moment centered functional: ``phi_{a_p, p}`` on ``(Y, Z_hat)``, ``p > 2``."""
    if p <= 2:
        raise ValueError("lyapunov_Lp needs p > 2; use psi2_functional for p = 2")
    a_p = high_moment_weight(p, params)
    if a_p <= 0:
        raise AdmissibilityError(f"a_{p:g} = {a_p:g} <= 0 (requires gamma^2 > m (p - 2))")
    return phi_functional(state.Y, state.Z_hat, a_p, p, params)


def lyapunov_L(state: ShiftedState, p: float, params: KineticParams):
    """``psi2_functional`` for ``p = 2``, ``lyapunov_Lp`` otherwise."""
    return psi2_functional(state, params) if p == 2 else lyapunov_Lp(state, p, params)


def _coupling_weight(params: KineticParams) -> float:
    return 0.5 + 1.0 / params.m


def coupling_energy(dX, dV, params: KineticParams):
    """Modified coupling energy ``E`` and Euclidean coupling error ``Ehat``.

    ``E = mean_j phi_{a,2}(dX_j, dV_j) - |mean dX|^2 / m`` with ``a = 1/2 + 1/m``.
    """
    m, g = params.m, params.gamma
    if not g > m / math.sqrt(2.0):
        raise AdmissibilityError(f"coupling energy needs gamma > m / sqrt(2); gamma={g:g}, m={m:g}")
    dX = np.asarray(dX, dtype=float)
    dV = np.asarray(dV, dtype=float)
    if dX.shape != dV.shape:
        raise ShapeMismatchError(f"{dX.shape} vs {dV.shape}")
    a = _coupling_weight(params)
    mean_dx = np.mean(dX, axis=-2)
    E = phi_functional(dX, dV, a, 2, params) - _sq(mean_dx) / m
    Ehat = np.mean(_sq(dX) + _sq(dV), axis=-1)
    return E, Ehat


def coupling_energy_blocks(dX, dV, params: KineticParams):
    """Fluctuation block and center-of-mass block of the coupling energy.

    Their sum equals ``coupling_energy(dX, dV)[0]`` exactly in exact arithmetic.
    """
    a = _coupling_weight(params)
    dX = np.asarray(dX, dtype=float)
    dV = np.asarray(dV, dtype=float)
    mx = np.mean(dX, axis=-2, keepdims=True)
    mv = np.mean(dV, axis=-2, keepdims=True)
    fluct = phi_functional(dX - mx, dV - mv, a, 2, params)
    com = phi_functional(mx, mv, a - 1.0 / params.m, 2, params)
    return fluct, com


def lstd_functional(X, V, params: KineticParams, p: float, a: float | None = None, b: float = 1.0, c: float = 1.0):
    """Unshifted centered functional on ``(X - mean X, V)``.

    ``mean_j [a |Y|^p + b |V|^p + c |Y|^(p-2) <Y, V>]``; ``a`` defaults to
    ``gamma c / (p m)``.
    """
    if isinstance(X, ParticleEnsemble):
        X, V = X.X, X.V
    X = np.asarray(X, dtype=float)
    V = np.asarray(V, dtype=float)
    if a is None:
        a = params.gamma * c / (p * params.m)
    Y = X - np.mean(X, axis=-2, keepdims=True)
    ny = np.sqrt(_sq(Y))
    if p == 2:
        mixed = _dot(Y, V)
    else:
        safe = np.where(ny > 0, ny, 1.0)
        mixed = np.where(ny > 0, safe ** (p - 2) * _dot(Y, V), 0.0)
    return np.mean(a * ny**p + b * np.sqrt(_sq(V)) ** p + c * mixed, axis=-1)


def centered_moment(data, p: float):
    """``mean_j |x_j - mean(x)|^p``."""
    data = np.asarray(data, dtype=float)
    dev = data - np.mean(data, axis=-2, keepdims=True)
    return np.mean(np.sqrt(_sq(dev)) ** p, axis=-1)


def raw_moment(data, p: float):
    data = np.asarray(data, dtype=float)
    return np.mean(np.sqrt(_sq(data)) ** p, axis=-1)


def coupled_w2_bound(dX):
    """Squared W2 upper bound from the index coupling: ``mean_j |dX_j|^2``."""
    dX = np.asarray(dX, dtype=float)
    if dX.ndim == 1:
        dX = dX[:, None]
    return np.mean(_sq(dX), axis=-1)


def exact_w2_1d(xs_a, xs_b):
    """Exact squared W2 between two equal-size 1-D empirical measures (sorted matching)."""
    a = np.sort(np.ravel(np.asarray(xs_a, dtype=float)))
    b = np.sort(np.ravel(np.asarray(xs_b, dtype=float)))
    if a.shape != b.shape:
        raise ShapeMismatchError("exact_w2_1d needs equal sample sizes")
    return float(np.mean((a - b) ** 2))


@dataclass
class LyapunovReport:
    """Diagnostics of one ensemble snapshot.

    Entries that are undefined for the given parameters (for example ``L2``
    when ``psi2`` is not coercive) are ``None``.
    """

    t: float
    L2: Optional[float]
    Lp: dict = field(default_factory=dict)
    Lstd_p: Optional[float] = None
    M2_X: float = 0.0
    M2_V: float = 0.0
    Mp_X: dict = field(default_factory=dict)
    Mp_V: dict = field(default_factory=dict)
    raw_V2: float = 0.0
    raw_X8: float = 0.0
    delta_alpha_norm: float = 0.0
    coupling_E: Optional[float] = None
    coupling_Ehat: Optional[float] = None

    def row(self, ps) -> list:
        """Values in the order of :func:`report_columns`."""
        ps = _high(ps)
        out = [self.t, self.L2]
        out += [self.Lp.get(p) for p in ps]
        out += [self.Lstd_p, self.M2_X, self.M2_V]
        for p in ps:
            out += [self.Mp_X.get(p), self.Mp_V.get(p)]
        out += [self.raw_V2, self.raw_X8, self.delta_alpha_norm, self.coupling_E, self.coupling_Ehat]
        return out


def _fmt_p(p) -> str:
    return f"{p:g}"


def _high(ps) -> list:
    return [p for p in ps if p != 2]


def report_columns(ps) -> list[str]:
    """Fixed CSV column order for :class:`LyapunovReport` rows.

    Order ``p = 2`` is always present through ``L2``, ``M2_X`` and ``M2_V``.
    """
    ps = _high(ps)
    cols = ["t", "L2"] + [f"L{_fmt_p(p)}" for p in ps] + ["Lstd_p", "M2_X", "M2_V"]
    for p in ps:
        cols += [f"M{_fmt_p(p)}_X", f"M{_fmt_p(p)}_V"]
    cols += ["raw_V2", "raw_X8", "delta_alpha_norm", "coupling_E", "coupling_Ehat"]
    return cols


def _maybe(fn):
    try:
        return float(fn())
    except AdmissibilityError:
        return None


def lyapunov_report(
    ens: ParticleEnsemble,
    params: KineticParams,
    objective: ObjectiveSpec,
    ps=(8,),
    lstd: tuple | None = None,
    dX=None,
    dV=None,
) -> LyapunovReport:
    """Evaluate every diagnostic on one ensemble.

    ``lstd = (p, a, b, c)`` adds the unshifted functional; ``dX, dV`` add the
    coupling energies.
    """
    state = centered_shifted(ens.X, ens.V, params.gamma)
    rep = LyapunovReport(
        t=ens.t,
        L2=_maybe(lambda: psi2_functional(state, params)),
        Lp={p: _maybe(lambda p=p: lyapunov_Lp(state, p, params)) for p in ps if p > 2},
        M2_X=float(centered_moment(ens.X, 2)),
        M2_V=float(centered_moment(ens.V, 2)),
        Mp_X={p: float(centered_moment(ens.X, p)) for p in ps},
        Mp_V={p: float(centered_moment(ens.V, p)) for p in ps},
        raw_V2=float(raw_moment(ens.V, 2)),
        raw_X8=float(raw_moment(ens.X, 8)),
        delta_alpha_norm=float(np.linalg.norm(delta_alpha(ens.X, params.alpha, objective))),
    )
    if lstd is not None:
        p, a, b, c = lstd
        rep.Lstd_p = float(lstd_functional(ens.X, ens.V, params, p, a, b, c))
    if dX is not None:
        E, Ehat = coupling_energy(dX, dV, params)
        rep.coupling_E, rep.coupling_Ehat = float(E), float(Ehat)
    return rep


# exported for callers that introspect report fields
REPORT_FIELDS = tuple(f.name for f in fields(LyapunovReport))
