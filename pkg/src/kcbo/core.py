"""Domain types, the objective zoo and seeded randomness.

Everything here is a plain value except :class:`ParticleEnsemble`, whose
arrays are advanced by :mod:`kcbo.dynamics`, and :class:`RngStream`, whose
generator state advances as increments are drawn.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import optimize
from scipy.stats import qmc

from .errors import DimensionError, ParameterError, ShapeMismatchError, UnknownObjectiveError

__all__ = [
    "NoiseKind",
    "KineticParams",
    "ParticleEnsemble",
    "ObjectiveSpec",
    "RngStream",
    "InitialLaw",
    "OBJECTIVES",
    "make_objective",
    "gaussian_increments",
]


class NoiseKind(str, enum.Enum):
    ISOTROPIC = "isotropic"
    ANISOTROPIC = "anisotropic"

    def tau(self, dim: int) -> int:
        """Trace factor of the noise: ``dim`` for |x| I, ``1`` for diag(x)."""
        return int(dim) if self is NoiseKind.ISOTROPIC else 1


@dataclass(frozen=True)
class KineticParams:
    """Complete parameterization of the second-order CBO system.

    Parameters
    ----------
    m : float
        Mass (inertia), > 0.
    gamma : float
        Friction, > 0.
    sigma : float
        Noise strength, >= 0.
    alpha : float
        Inverse temperature of the consensus weights, >= 0.
    noise : NoiseKind
        Isotropic ``|x| I`` or anisotropic ``diag(x)`` diffusion.
    dt : float
        Euler-Maruyama step. Must satisfy ``dt <= m / (2 gamma)`` so that the
        explicit friction update is a contraction with margin.
    """

    m: float
    gamma: float
    sigma: float
    alpha: float
    noise: NoiseKind = NoiseKind.ISOTROPIC
    dt: float = 1e-3

    def __post_init__(self):
        object.__setattr__(self, "noise", NoiseKind(self.noise))
        for name in ("m", "gamma", "sigma", "alpha", "dt"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ParameterError(f"{name} must be finite, got {value}")
            object.__setattr__(self, name, value)
        if self.m <= 0:
            raise ParameterError(f"mass must be positive, got {self.m}")
        if self.gamma <= 0:
            raise ParameterError(f"friction must be positive, got {self.gamma}")
        if self.sigma < 0:
            raise ParameterError(f"sigma must be nonnegative, got {self.sigma}")
        if self.alpha < 0:
            raise ParameterError(f"alpha must be nonnegative, got {self.alpha}")
        if self.dt <= 0:
            raise ParameterError(f"dt must be positive, got {self.dt}")
        if self.dt > self.max_dt * (1 + 1e-12):
            raise ParameterError(
                f"dt={self.dt:g} exceeds the stability guard m/(2 gamma)={self.max_dt:g}"
            )

    @property
    def max_dt(self) -> float:
        return self.m / (2.0 * self.gamma)

    def tau(self, dim: int) -> int:
        return self.noise.tau(dim)

    def replace(self, **changes) -> "KineticParams":
        values = {
            "m": self.m,
            "gamma": self.gamma,
            "sigma": self.sigma,
            "alpha": self.alpha,
            "noise": self.noise,
            "dt": self.dt,
        }
        values.update(changes)
        return KineticParams(**values)

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "gamma": self.gamma,
            "sigma": self.sigma,
            "alpha": self.alpha,
            "noise": self.noise.value,
            "dt": self.dt,
        }


@dataclass
class ParticleEnsemble:
    """Positions and velocities of ``J`` particles in ``d`` dimensions."""

    X: np.ndarray
    V: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.X = np.array(self.X, dtype=float, ndmin=2)
        self.V = np.array(self.V, dtype=float, ndmin=2)
        if self.X.ndim != 2:
            raise ShapeMismatchError(f"positions must be J x d, got shape {self.X.shape}")
        if self.X.shape != self.V.shape:
            raise ShapeMismatchError(f"positions {self.X.shape} and velocities {self.V.shape} differ")
        if self.X.shape[1] == 0:
            raise DimensionError("dimension must be positive")
        if not (np.all(np.isfinite(self.X)) and np.all(np.isfinite(self.V))):
            raise ParameterError("ensemble contains non-finite entries")
        self.t = float(self.t)
        if self.t < 0:
            raise ParameterError(f"time must be nonnegative, got {self.t}")

    @property
    def J(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def copy(self) -> "ParticleEnsemble":
        return ParticleEnsemble(self.X.copy(), self.V.copy(), self.t)


@dataclass(frozen=True)
class ObjectiveSpec:
    """Objective with certified bounds ``f_lower <= f <= f_upper`` and Lipschitz constant.

    ``eval`` is vectorized over leading axes: an array of shape ``(..., d)``
    maps to values of shape ``(...)``.
    """

    eval: Callable[[np.ndarray], np.ndarray]
    f_lower: float
    f_upper: float
    lipschitz: float
    name: str
    dim: int
    lipschitz_method: str = "analytic"

    def __call__(self, x):
        return self.eval(np.asarray(x, dtype=float))

    @property
    def spread(self) -> float:
        """Declared oscillation ``f_upper - f_lower``."""
        return self.f_upper - self.f_lower


class RngStream:
    """Counter-free Gaussian stream keyed by ``(seed, stream_id)``.

    Two streams with the same key produce bit-identical draws regardless of
    which process or thread consumes them.
    """

    def __init__(self, seed: int, stream_id: int = 0):
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        if not (0 <= self.seed < 2**64 and 0 <= self.stream_id < 2**64):
            raise ParameterError("seed and stream_id must be 64-bit unsigned integers")
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id,))
        self.generator = np.random.Generator(np.random.PCG64(ss))

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"

    def normal(self, shape) -> np.ndarray:
        return self.generator.standard_normal(shape)


def gaussian_increments(stream: RngStream, J: int, d: int, dt: float) -> np.ndarray:
    """Brownian increments: a ``J x d`` array of i.i.d. ``N(0, dt)`` entries."""
    if J < 1 or d < 1:
        raise DimensionError(f"need J, d >= 1, got J={J}, d={d}")
    if dt < 0:
        raise ParameterError("dt must be nonnegative")
    return math.sqrt(dt) * stream.normal((J, d))


@dataclass(frozen=True)
class InitialLaw:
    """Product law for initial positions and velocities.

    ``kind`` is ``"gaussian"`` (``loc`` mean, ``scale`` standard deviation per
    coordinate) or ``"uniform"`` (box ``[loc - scale, loc + scale]``).
    """

    x_kind: str = "gaussian"
    x_loc: float = 0.0
    x_scale: float = 1.0
    v_kind: str = "gaussian"
    v_loc: float = 0.0
    v_scale: float = 1.0

    def __post_init__(self):
        for kind in (self.x_kind, self.v_kind):
            if kind not in ("gaussian", "uniform"):
                raise ParameterError(f"unknown initial law kind {kind!r}")

    @staticmethod
    def _draw(kind, loc, scale, shape, gen):
        if kind == "gaussian":
            return loc + scale * gen.standard_normal(shape)
        return loc + scale * gen.uniform(-1.0, 1.0, shape)

    def sample(self, shape, stream: RngStream) -> tuple[np.ndarray, np.ndarray]:
        """Draw positions then velocities, each of ``shape`` (``(..., J, d)``)."""
        gen = stream.generator
        X = self._draw(self.x_kind, self.x_loc, self.x_scale, shape, gen)
        V = self._draw(self.v_kind, self.v_loc, self.v_scale, shape, gen)
        return X, V

    def sample_positions(self, shape, stream: RngStream) -> np.ndarray:
        return self._draw(self.x_kind, self.x_loc, self.x_scale, shape, stream.generator)

    def ensemble(self, J: int, d: int, stream: RngStream) -> ParticleEnsemble:
        X, V = self.sample((J, d), stream)
        return ParticleEnsemble(X, V, 0.0)


# --- objective zoo -----------------------------------------------------------


def _ackley(x):
    d = x.shape[-1]
    r = np.sqrt(np.sum(x * x, axis=-1) / d)
    c = np.sum(np.cos(2.0 * np.pi * x), axis=-1) / d
    return -20.0 * np.exp(-0.2 * r) - np.exp(c) + 20.0 + np.e


def _tanh_rastrigin(x):
    d = x.shape[-1]
    ras = 10.0 * d + np.sum(x * x - 10.0 * np.cos(2.0 * np.pi * x), axis=-1)
    return np.tanh(ras / (10.0 * d))


def _tanh_rastrigin_grad_norm(x):
    d = x.shape[-1]
    ras = 10.0 * d + np.sum(x * x - 10.0 * np.cos(2.0 * np.pi * x), axis=-1)
    inner = (2.0 * x + 20.0 * np.pi * np.sin(2.0 * np.pi * x)) / (10.0 * d)
    return np.linalg.norm(inner, axis=-1) / np.cosh(ras / (10.0 * d)) ** 2


def _tanh_quadratic(x):
    return np.tanh(np.sum(x * x, axis=-1))


def _cosine_well(x):
    d = x.shape[-1]
    return 1.0 - np.sum(np.cos(x), axis=-1) / d


def _tanh_quadratic_lipschitz() -> float:
    # |grad| = 2 r sech^2(r^2); stationary where s tanh(s) = 1/4 with s = r^2
    s = optimize.brentq(lambda s: s * math.tanh(s) - 0.25, 1e-6, 2.0, xtol=1e-15)
    return 2.0 * math.sqrt(s) / math.cosh(s) ** 2


def _numeric_lipschitz(grad_norm, dim: int, half_width: float) -> float:
    sampler = qmc.Sobol(d=dim, scramble=True, seed=0)
    pts = (2.0 * sampler.random_base2(17) - 1.0) * half_width
    return 2.0 * float(np.max(grad_norm(pts)))


OBJECTIVES = ("ackley", "tanh_rastrigin", "tanh_quadratic", "cosine_well")


def make_objective(name: str, dim: int) -> ObjectiveSpec:
    """Build one of the bounded, globally Lipschitz test objectives.

    ``ackley``
        Standard Ackley function, ``0 <= f < 20 + e``.
    ``tanh_rastrigin``
        ``tanh(R(x) / (10 d))`` with ``R`` the Rastrigin function; range [0, 1).
    ``tanh_quadratic``
        ``tanh(|x|^2)``; range [0, 1).
    ``cosine_well``
        ``1 - mean(cos x_i)``; range [0, 2], ``L_f = 1 / sqrt(d)``.

    Lipschitz constants are analytic except for ``tanh_rastrigin``, which uses
    twice the largest gradient norm over a 2^17-point Sobol grid.
    """
    if name not in OBJECTIVES:
        raise UnknownObjectiveError(f"unknown objective {name!r}; choose from {OBJECTIVES}")
    dim = int(dim)
    if dim < 1:
        raise DimensionError(f"dimension must be positive, got {dim}")
    sqd = math.sqrt(dim)
    if name == "ackley":
        return ObjectiveSpec(_ackley, 0.0, 20.0 + math.e, (4.0 + 2.0 * math.pi * math.e) / sqd, name, dim)
    if name == "tanh_quadratic":
        return ObjectiveSpec(_tanh_quadratic, 0.0, 1.0, _tanh_quadratic_lipschitz(), name, dim)
    if name == "cosine_well":
        return ObjectiveSpec(_cosine_well, 0.0, 2.0, 1.0 / sqd, name, dim)
    # sech^2(R / 10d) < 3e-5 once |x|^2 > 60 d, so the grid box covers the support of the gradient
    lip = _numeric_lipschitz(_tanh_rastrigin_grad_norm, dim, math.sqrt(60.0 * dim))
    return ObjectiveSpec(_tanh_rastrigin, 0.0, 1.0, lip, name, dim, lipschitz_method="sobol-max-x2")
