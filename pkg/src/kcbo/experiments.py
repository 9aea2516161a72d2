"""Batch experiment drivers turning decay, chaos and stability rates into verdicts.

Replicas are simulated together as ``(R, J, d)`` arrays. Each replica owns two
random streams (initial draw and Brownian increments) keyed by the experiment,
the sweep index and the replica index, so a replica's trajectory does not
depend on how many other replicas run beside it.
"""

from __future__ import annotations

import csv
import json
import math
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.stats import binomtest

from .admissibility import (
    CenteredDecay,
    PoC,
    Stability,
    check_assumptions,
    decay_rates,
    suggest_admissible,
)
from .core import InitialLaw, KineticParams, ObjectiveSpec, RngStream, make_objective
from .diagnostics import (
    centered_moment,
    centered_shifted,
    coupling_energy,
    lstd_functional,
    lyapunov_Lp,
    psi2_functional,
    raw_moment,
    report_columns,
)
from .dynamics import consensus_unchecked, first_order_update, kinetic_update, n_steps_for
from .errors import AdmissibilityError, InsufficientDataError, ParameterError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = [
    "DEFAULT_PROFILES",
    "ExperimentConfig",
    "ExperimentResult",
    "RateFit",
    "fit_exponential_rate",
    "fit_power_law",
    "replica_stream",
    "run_moment_decay",
    "run_poc_sweep",
    "run_stability_sweep",
    "run_wm_mc_rate",
    "run_appendixB_contrast",
    "run_concentration",
    "run_optimize",
    "write_outputs",
]

DEFAULT_PROFILES = (CenteredDecay(2), CenteredDecay(8), PoC(4), Stability(1))

# stream tags, one per driver
_DECAY, _POC, _STAB, _WM, _CONC, _OPT, _REF = 1, 2, 3, 4, 5, 6, 7
_INIT, _NOISE = 0, 1

DECAY_FACTOR = 0.8
ENVELOPE_FACTOR = 1.5
POC_SLOPE_WINDOW = (-1.35, -0.65)
WM_SLOPE_WINDOW = (-1.3, -0.7)
MIN_R2 = 0.9
STABILITY_MAX_SLOPE = -0.6
RAW_X8_FACTOR = 10.0
MAX_EXCLUDED_FRACTION = 0.01


# --- configuration -----------------------------------------------------------


@dataclass
class ExperimentConfig:
    """Everything an experiment needs besides the driver choice.

    ``params = None`` means "ask :func:`suggest_admissible`" with ``alpha``,
    ``noise`` and ``dt`` fixed and every profile in ``DEFAULT_PROFILES``.
    """

    objective: str = "cosine_well"
    dim: int = 2
    params: Optional[KineticParams] = None
    alpha: float = 1.0
    noise: str = "isotropic"
    dt: float = 1e-3
    J: int = 256
    J_list: tuple = (32, 64, 128, 256, 512)
    R: int = 20
    T: float = 50.0
    record_stride: int = 100
    seed: int = 0
    init: InitialLaw = field(default_factory=InitialLaw)
    ps: tuple = (2, 8)
    r: float = 4.0
    q: float = 1.0
    eps: tuple = (0.05, 0.1)
    control_J: int = 128
    N_ref: Optional[int] = None
    consensus_mode: str = "reference_proxy"
    t0_frac: float = 0.1
    contrast_p: float = 8.0
    lstd_b: float = 1.0
    lstd_c: float = 1.0
    kappa: Optional[float] = None
    A: float = 1.0
    proxy_size: int = 1_000_000
    first_order: bool = False
    success_radius: float = 0.3

    def __post_init__(self):
        if isinstance(self.params, dict):
            self.params = KineticParams(**self.params)
        if isinstance(self.init, dict):
            self.init = InitialLaw(**self.init)
        for name in ("J_list", "ps", "eps"):
            setattr(self, name, tuple(getattr(self, name)))
        if self.R < 1:
            raise ParameterError(f"R must be >= 1, got {self.R}")
        if not self.T > 0:
            raise ParameterError(f"T must be positive, got {self.T}")
        if self.J < 1 or any(j < 2 for j in self.J_list):
            raise ParameterError("J must be >= 1 and every J_list entry >= 2")
        if self.record_stride < 1:
            raise ParameterError("record_stride must be >= 1")
        if not 0 <= self.t0_frac < 1:
            raise ParameterError("t0_frac must lie in [0, 1)")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ParameterError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        """Read a TOML file: top-level keys plus optional ``[params]`` and ``[init]`` tables."""
        with open(path, "rb") as fh:
            return cls.from_dict(tomllib.load(fh))

    def to_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self)}
        out["params"] = None if self.params is None else self.params.to_dict()
        out["init"] = asdict(self.init)
        for name in ("J_list", "ps", "eps"):
            out[name] = list(out[name])
        return out

    def objective_spec(self) -> ObjectiveSpec:
        return make_objective(self.objective, self.dim)

    def resolve_params(self, objective: ObjectiveSpec | None = None) -> KineticParams:
        if self.params is not None:
            return self.params
        objective = objective or self.objective_spec()
        params, _ = suggest_admissible(
            objective, DEFAULT_PROFILES, alpha=self.alpha, noise=self.noise, dt=self.dt
        )
        return params


# --- fits --------------------------------------------------------------------


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r_squared: float
    n_points: int
    n_dropped: int = 0


def _ols(x, y) -> RateFit:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xm, ym = x.mean(), y.mean()
    sxx = np.sum((x - xm) ** 2)
    if sxx == 0:
        raise InsufficientDataError("regressor is constant")
    slope = np.sum((x - xm) * (y - ym)) / sxx
    intercept = ym - slope * xm
    ss_tot = np.sum((y - ym) ** 2)
    ss_res = np.sum((y - intercept - slope * x) ** 2)
    r2 = 1.0 if ss_tot == 0 else min(1.0, max(0.0, 1.0 - ss_res / ss_tot))
    return RateFit(float(slope), float(intercept), float(r2), len(x))


def fit_exponential_rate(series, t0: float = 0.0) -> RateFit:
    """OLS of ``log(value)`` on ``t`` over points with ``t >= t0``.

    The slope is minus the fitted decay rate. Nonpositive values are dropped
    and counted in ``n_dropped``.

    Raises
    ------
    InsufficientDataError
        Fewer than three usable points remain.
    """
    arr = np.asarray(series, dtype=float).reshape(-1, 2)
    arr = arr[arr[:, 0] >= t0]
    keep = np.isfinite(arr[:, 1]) & (arr[:, 1] > 0)
    dropped = int(np.count_nonzero(~keep))
    arr = arr[keep]
    if len(arr) < 3:
        raise InsufficientDataError(f"need >= 3 positive points after t0={t0:g}, got {len(arr)}")
    fit = _ols(arr[:, 0], np.log(arr[:, 1]))
    return RateFit(fit.slope, fit.intercept, fit.r_squared, fit.n_points, dropped)


def fit_power_law(xs, ys) -> RateFit:
    """OLS of ``log y`` on ``log x``; nonpositive ``y`` are dropped and counted."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    keep = np.isfinite(ys) & (ys > 0)
    if np.count_nonzero(keep) < 3:
        raise InsufficientDataError(f"need >= 3 positive points, got {np.count_nonzero(keep)}")
    fit = _ols(np.log(xs[keep]), np.log(ys[keep]))
    return RateFit(fit.slope, fit.intercept, fit.r_squared, fit.n_points, int(np.count_nonzero(~keep)))


# --- results -----------------------------------------------------------------


@dataclass
class ExperimentResult:
    """Output of one driver.

    ``columns``/``rows`` form ``series.csv``; ``summary`` becomes
    ``summary.json`` together with the verdicts.
    """

    name: str
    columns: list
    rows: list
    summary: dict
    verdicts: dict
    replicas: dict = field(default_factory=dict)
    blowup_dominated: bool = False

    @property
    def passed(self) -> bool:
        return all(self.verdicts.values()) and not self.blowup_dominated

    def to_json(self) -> dict:
        return _jsonable(
            {
                "experiment": self.name,
                "passed": self.passed,
                "verdicts": self.verdicts,
                "replicas": self.replicas,
                "blowup_dominated": self.blowup_dominated,
                **self.summary,
            }
        )


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, RateFit):
        return _jsonable(asdict(obj))
    if isinstance(obj, KineticParams):
        return obj.to_dict()
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return None
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return obj


def write_outputs(result: ExperimentResult, out_dir) -> Path:
    """Write ``series.csv`` and ``summary.json`` into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "series.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(result.columns)
        for row in result.rows:
            w.writerow(["" if v is None or (isinstance(v, float) and math.isnan(v)) else repr(float(v)) for v in row])
    with open(out / "summary.json", "w") as fh:
        json.dump(result.to_json(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return out


# --- batched simulation plumbing --------------------------------------------


def replica_stream(seed: int, tag: int, index: int, replica: int, kind: int) -> RngStream:
    """Stream for one replica of one sweep entry of one driver."""
    return RngStream(seed, (((tag << 12 | index) << 32 | replica) << 2) | kind)


def _initial_batch(cfg: ExperimentConfig, tag: int, index: int, J: int, R: int | None = None):
    R = cfg.R if R is None else R
    X = np.empty((R, J, cfg.dim))
    V = np.empty((R, J, cfg.dim))
    for r in range(R):
        X[r], V[r] = cfg.init.sample((J, cfg.dim), replica_stream(cfg.seed, tag, index, r, _INIT))
    return X, V


class _Increments:
    """Per-replica Brownian increments drawn into one ``(R, J, d)`` buffer."""

    def __init__(self, seed, tag, index, R, J, d, dt):
        self._gens = [replica_stream(seed, tag, index, r, _NOISE).generator for r in range(R)]
        self._buf = np.empty((R, J, d))
        self._scale = math.sqrt(dt)

    def draw(self) -> np.ndarray:
        for gen, row in zip(self._gens, self._buf):
            gen.standard_normal(out=row)
        return self._scale * self._buf


def _record_steps(n: int, stride: int) -> set:
    steps = set(range(0, n + 1, stride))
    steps.add(n)
    return steps


def _finite(*arrays) -> np.ndarray:
    ok = None
    for a in arrays:
        f = np.all(np.isfinite(a), axis=(-2, -1))
        ok = f if ok is None else ok & f
    return ok


def _alive_mean(values, alive) -> float:
    values = np.asarray(values, dtype=float)
    if not np.any(alive):
        return math.nan
    return float(np.mean(values[alive]))


def _replica_accounting(alive, R) -> tuple[dict, bool]:
    used = int(np.count_nonzero(alive))
    excluded = R - used
    return {"total": R, "used": used, "excluded": excluded}, excluded > MAX_EXCLUDED_FRACTION * R


def _batch_columns(X, V, params, objective, ps, lstd=None, dX=None, dV=None) -> dict:
    """Per-replica diagnostic columns (arrays over the replica axis)."""
    cols = {}
    with np.errstate(invalid="ignore", over="ignore"):
        state = centered_shifted(X, V, params.gamma)
        try:
            cols["L2"] = psi2_functional(state, params)
        except AdmissibilityError:
            cols["L2"] = None
        for p in ps:
            if p == 2:
                continue
            try:
                cols[f"L{p:g}"] = lyapunov_Lp(state, p, params)
            except AdmissibilityError:
                cols[f"L{p:g}"] = None
        cols["Lstd_p"] = None if lstd is None else lstd_functional(X, V, params, *lstd)
        cols["M2_X"] = centered_moment(X, 2)
        cols["M2_V"] = centered_moment(V, 2)
        for p in ps:
            if p == 2:
                continue
            cols[f"M{p:g}_X"] = centered_moment(X, p)
            cols[f"M{p:g}_V"] = centered_moment(V, p)
        cols["raw_V2"] = raw_moment(V, 2)
        cols["raw_X8"] = raw_moment(X, 8)
        M = consensus_unchecked(X, params.alpha, objective)
        cols["delta_alpha_norm"] = np.linalg.norm(np.mean(X, axis=-2) - M, axis=-1)
        if dX is not None:
            cols["coupling_E"], cols["coupling_Ehat"] = coupling_energy(dX, dV, params)
        else:
            cols["coupling_E"] = cols["coupling_Ehat"] = None
    return cols


def _moment_key(p) -> str:
    return "M2" if p == 2 else f"M{p:g}"


def _simulate_reports(cfg, params, objective, tag, J, ps, lstd=None):
    """Run ``R`` replicas and return time points, replica-mean rows and the alive mask.

    Also returns the per-replica column arrays at every record, which the
    concentration driver needs.
    """
    n = n_steps_for(cfg.T, params.dt)
    records = _record_steps(n, cfg.record_stride)
    X, V = _initial_batch(cfg, tag, 0, J)
    noise = _Increments(cfg.seed, tag, 0, cfg.R, J, cfg.dim, params.dt)
    alive = np.ones(cfg.R, dtype=bool)
    snapshots = []
    for k in range(n + 1):
        if k > 0:
            X, V = _kinetic_batch(X, V, params, objective, noise.draw())
        if k in records:
            alive &= _finite(X, V)
            snapshots.append((k * params.dt, _batch_columns(X, V, params, objective, ps, lstd)))
    return snapshots, alive


def _kinetic_batch(X, V, params, objective, dW, M=None):
    if M is None:
        M = consensus_unchecked(X, params.alpha, objective)
    with np.errstate(invalid="ignore", over="ignore"):
        return kinetic_update(X, V, M, dW, params)


def _mean_rows(snapshots, alive, columns) -> list:
    rows = []
    for t, cols in snapshots:
        row = [t]
        for name in columns[1:]:
            vals = cols.get(name)
            row.append(None if vals is None else _alive_mean(vals, alive))
        rows.append(row)
    return rows


def _require(report, what: str):
    if not report.passed:
        failing = ", ".join(f"{c.clause} (margin {c.margin:.3g})" for c in report.failing())
        raise AdmissibilityError(f"{what} assumptions fail: {failing}")


def _column(rows, columns, name) -> np.ndarray:
    i = columns.index(name)
    return np.array([np.nan if r[i] is None else r[i] for r in rows], dtype=float)


def _monotone_envelope(values) -> bool:
    running = np.minimum.accumulate(values)
    return bool(np.all(values <= ENVELOPE_FACTOR * running))


def _decay_verdict(t, values, rate, t0) -> tuple[dict, bool]:
    if np.all(values == 0):
        return {"trivial": True, "fit": None, "fitted_rate": None, "predicted_rate": rate, "envelope": True}, True
    fit = fit_exponential_rate(np.column_stack([t, values]), t0)
    fitted = -fit.slope
    envelope = _monotone_envelope(values)
    ok = fitted >= DECAY_FACTOR * rate and envelope
    return {"trivial": False, "fit": fit, "fitted_rate": fitted, "predicted_rate": rate, "envelope": envelope}, ok


# --- drivers -----------------------------------------------------------------


def _setup(cfg: ExperimentConfig, profiles):
    objective = cfg.objective_spec()
    params = cfg.resolve_params(objective)
    report = check_assumptions(params, objective, profiles)
    return objective, params, report


def run_moment_decay(cfg: ExperimentConfig) -> ExperimentResult:
    """Centered-moment decay against the predicted rates, plus raw-moment bounds.

    For each ``p`` in ``cfg.ps`` the replica-mean of ``M_p(X) + M_p(V)`` must
    decay at a fitted rate of at least ``0.8 lambda_p`` after ``t0`` and stay
    within a 1.5x running-minimum envelope. The raw-moment verdict asks the
    mean ``|X|^8`` to stay below ten times its initial value and the mean
    ``|V|^2`` to be nonincreasing after ``t0``.
    """
    objective, params, report = _setup(cfg, [CenteredDecay(p) for p in cfg.ps])
    _require(report, "centered-decay")
    rates = decay_rates(params, objective, cfg.ps)
    snapshots, alive = _simulate_reports(cfg, params, objective, _DECAY, cfg.J, cfg.ps)
    columns = report_columns(cfg.ps)
    rows = _mean_rows(snapshots, alive, columns)
    replicas, blown = _replica_accounting(alive, cfg.R)

    t = _column(rows, columns, "t")
    t0 = cfg.t0_frac * cfg.T
    verdicts, fits = {}, {}
    for p in cfg.ps:
        key = _moment_key(p)
        series = _column(rows, columns, f"{key}_X") + _column(rows, columns, f"{key}_V")
        fits[f"p={p:g}"], verdicts[f"decay_p{p:g}"] = _decay_verdict(t, series, rates[p], t0)
        fn = "L2" if p == 2 else f"L{p:g}"
        lyap = _column(rows, columns, fn)
        if np.all(np.isfinite(lyap)) and np.any(lyap > 0):
            fits[f"p={p:g}"]["lyapunov_fit"] = fit_exponential_rate(np.column_stack([t, lyap]), t0)

    x8 = _column(rows, columns, "raw_X8")
    v2 = _column(rows, columns, "raw_V2")
    late = v2[t >= t0]
    raw = {
        "max_raw_X8": float(np.max(x8)),
        "initial_raw_X8": float(x8[0]),
        "raw_X8_ratio": float(np.max(x8) / x8[0]) if x8[0] > 0 else math.nan,
        "raw_V2_nonincreasing_after_t0": bool(np.all(np.diff(late) <= 0)),
    }
    verdicts["raw_X8_bounded"] = bool(np.max(x8) <= RAW_X8_FACTOR * x8[0])
    verdicts["raw_V2_decreasing"] = raw["raw_V2_nonincreasing_after_t0"]
    verdicts["replicas"] = not blown
    summary = {
        "config": cfg.to_dict(),
        "params": params,
        "constants": report.to_dict()["constants"],
        "predicted_rates": {str(k): v for k, v in rates.items()},
        "fits": fits,
        "raw_moments": raw,
        "t0": t0,
    }
    return ExperimentResult("decay", columns, rows, summary, verdicts, replicas, blown)


def _reference_consensus(cfg, params, objective, N_ref, n) -> np.ndarray:
    """Consensus trajectory of a self-consistent reference ensemble, steps ``0..n-1``."""
    X, V = _initial_batch(cfg, _REF, 0, N_ref, R=1)
    noise = _Increments(cfg.seed, _REF, 0, 1, N_ref, cfg.dim, params.dt)
    out = np.empty((n, cfg.dim))
    for k in range(n):
        M = consensus_unchecked(X, params.alpha, objective)
        out[k] = M[0]
        X, V = _kinetic_batch(X, V, params, objective, noise.draw(), M)
    if not np.all(np.isfinite(out)):
        raise AdmissibilityError("reference ensemble blew up")
    return out


def run_poc_sweep(cfg: ExperimentConfig, reference_consensus: np.ndarray | None = None) -> ExperimentResult:
    """Uniform-in-time propagation of chaos: sup-in-time coupling error against ``J``.

    For every ``J`` the particle system and ``J`` mean-field samples start from
    the same draws and share increments; the mean-field samples read their
    consensus point from one reference ensemble of ``N_ref`` particles, whose
    consensus trajectory is computed once and shared across replicas and ``J``.
    The verdict asks a log-log slope in [-1.35, -0.65] with ``r^2 >= 0.9``.

    ``consensus_mode = "empirical"`` turns the second system into an exact copy
    of the first (a control run with zero error).
    """
    objective, params, report = _setup(cfg, [PoC(cfg.r)])
    _require(report, "propagation-of-chaos")
    Js = sorted(cfg.J_list)
    N_ref = cfg.N_ref if cfg.N_ref is not None else max(8192, 16 * Js[-1])
    if N_ref < 16 * Js[-1]:
        raise ParameterError(f"N_ref={N_ref} below 16 * max J = {16 * Js[-1]}")
    empirical = cfg.consensus_mode == "empirical"
    if not empirical and cfg.consensus_mode != "reference_proxy":
        raise ParameterError(f"unknown consensus_mode {cfg.consensus_mode!r}")
    n = n_steps_for(cfg.T, params.dt)
    records = _record_steps(n, cfg.record_stride)
    if not empirical and reference_consensus is None:
        reference_consensus = _reference_consensus(cfg, params, objective, N_ref, n)

    columns = ["t", "J", "coupling_E", "coupling_Ehat"]
    rows, sup_err, per_J = [], [], {}
    alive_all = []
    for idx, J in enumerate(Js):
        Xa, Va = _initial_batch(cfg, _POC, idx, J)
        Xb, Vb = Xa.copy(), Va.copy()
        noise = _Increments(cfg.seed, _POC, idx, cfg.R, J, cfg.dim, params.dt)
        alive = np.ones(cfg.R, dtype=bool)
        series = []
        for k in range(n + 1):
            if k > 0:
                dW = noise.draw()
                Mb = None if empirical else reference_consensus[k - 1]
                Xa, Va, Xb, Vb = (
                    *_kinetic_batch(Xa, Va, params, objective, dW),
                    *_kinetic_batch(Xb, Vb, params, objective, dW, Mb),
                )
            if k in records:
                alive &= _finite(Xa, Va, Xb, Vb)
                with np.errstate(invalid="ignore", over="ignore"):
                    E, Ehat = coupling_energy(Xa - Xb, Va - Vb, params)
                row = [k * params.dt, J, _alive_mean(E, alive), _alive_mean(Ehat, alive)]
                rows.append(row)
                series.append(row[3])
        sup = float(np.max(series))
        sup_err.append(sup)
        alive_all.append(alive)
        per_J[str(J)] = {"sup_Ehat": sup, "used": int(alive.sum())}

    alive = np.concatenate(alive_all)
    replicas, blown = _replica_accounting(alive, cfg.R * len(Js))
    verdicts = {}
    fit = None
    if empirical:
        verdicts["control_zero"] = all(s == 0 for s in sup_err)
    else:
        try:
            fit = fit_power_law(Js, sup_err)
            lo, hi = POC_SLOPE_WINDOW
            verdicts["slope"] = lo <= fit.slope <= hi
            verdicts["r_squared"] = fit.r_squared >= MIN_R2
        except InsufficientDataError:
            verdicts["slope"] = verdicts["r_squared"] = False
    verdicts["replicas"] = not blown
    summary = {
        "config": cfg.to_dict(),
        "params": params,
        "constants": report.to_dict()["constants"],
        "N_ref": N_ref,
        "per_J": per_J,
        "fit": fit,
        "slope_window": list(POC_SLOPE_WINDOW),
    }
    return ExperimentResult("poc", columns, rows, summary, verdicts, replicas, blown)


def _twin_control(cfg, params, objective, J, n) -> bool:
    X, V = _initial_batch(cfg, _STAB, 1023, J, R=1)
    Xb, Vb = X.copy(), V.copy()
    noise = _Increments(cfg.seed, _STAB, 1023, 1, J, cfg.dim, params.dt)
    zero = True
    for _ in range(n):
        dW = noise.draw()
        X, V = _kinetic_batch(X, V, params, objective, dW)
        Xb, Vb = _kinetic_batch(Xb, Vb, params, objective, dW)
        zero &= bool(np.array_equal(X, Xb) and np.array_equal(V, Vb))
    return zero


def run_stability_sweep(cfg: ExperimentConfig) -> ExperimentResult:
    """Stability of two particle systems with perturbed initial data.

    (a) Control: two identical systems at ``J = control_J`` with shared
    increments must agree bitwise for the whole horizon.

    (b) For each ``J`` and each ``eps`` the second system starts from the
    first system's draw shifted by ``eps`` along the unit diagonal, so the
    initial coupling error is ``eps^2``. Both systems use their own empirical
    consensus and share increments. The sup-in-time coupling error is
    regressed linearly on the initial error across the ``eps`` values and the
    intercept (the error left at zero initial discrepancy) is the remainder.
    The verdict asks a strictly decreasing remainder in ``J`` and a log-log
    slope of at most -0.6.
    """
    objective, params, report = _setup(cfg, [Stability(cfg.q)])
    _require(report, "stability")
    if len(cfg.eps) < 2:
        raise ParameterError("stability extrapolation needs at least two eps values")
    n = n_steps_for(cfg.T, params.dt)
    records = _record_steps(n, cfg.record_stride)
    control_ok = _twin_control(cfg, params, objective, cfg.control_J, n)

    Js = sorted(cfg.J_list)
    eps = np.asarray(cfg.eps, dtype=float)
    shift = np.full(cfg.dim, 1.0 / math.sqrt(cfg.dim))
    columns = ["t", "J", "eps", "coupling_Ehat"]
    rows, per_J, remainders, alive_all = [], {}, [], []
    for idx, J in enumerate(Js):
        Xa, Va = _initial_batch(cfg, _STAB, idx, J)
        Xb = Xa[None] + eps[:, None, None, None] * shift
        Vb = np.broadcast_to(Va, Xb.shape).copy()
        noise = _Increments(cfg.seed, _STAB, idx, cfg.R, J, cfg.dim, params.dt)
        alive = np.ones(cfg.R, dtype=bool)
        sup = np.zeros(len(eps))
        for k in range(n + 1):
            if k > 0:
                dW = noise.draw()
                Xa, Va, (Xb, Vb) = (
                    *_kinetic_batch(Xa, Va, params, objective, dW),
                    _kinetic_batch(Xb, Vb, params, objective, dW[None]),
                )
            if k in records:
                alive &= _finite(Xa, Va) & np.all(_finite(Xb, Vb), axis=0)
                dX, dV = Xb - Xa[None], Vb - Va[None]
                with np.errstate(invalid="ignore", over="ignore"):
                    Ehat = np.mean(np.sum(dX * dX + dV * dV, axis=-1), axis=-1)
                for i, e in enumerate(eps):
                    val = _alive_mean(Ehat[i], alive)
                    sup[i] = max(sup[i], val)
                    rows.append([k * params.dt, J, e, val])
        slope, intercept = np.polyfit(eps**2, sup, 1)
        remainders.append(float(intercept))
        alive_all.append(alive)
        per_J[str(J)] = {
            "sup_Ehat": dict(zip(map(str, eps.tolist()), sup.tolist())),
            "initial_error": dict(zip(map(str, eps.tolist()), (eps**2).tolist())),
            "sensitivity": float(slope),
            "remainder": float(intercept),
        }

    alive = np.concatenate(alive_all)
    replicas, blown = _replica_accounting(alive, cfg.R * len(Js))
    rem = np.asarray(remainders)
    verdicts = {
        "control_bitwise_zero": control_ok,
        "remainder_decreasing": bool(np.all(np.diff(rem) < 0)),
    }
    fit = None
    if np.all(rem > 0) and len(Js) >= 3:
        fit = fit_power_law(Js, rem)
        verdicts["remainder_slope"] = fit.slope <= STABILITY_MAX_SLOPE
    else:
        verdicts["remainder_slope"] = False
    verdicts["replicas"] = not blown
    summary = {
        "config": cfg.to_dict(),
        "params": params,
        "constants": report.to_dict()["constants"],
        "control_J": cfg.control_J,
        "per_J": per_J,
        "remainders": remainders,
        "fit": fit,
        "max_slope": STABILITY_MAX_SLOPE,
    }
    return ExperimentResult("stability", columns, rows, summary, verdicts, replicas, blown)


def run_wm_mc_rate(cfg: ExperimentConfig, J_list: Sequence[int] | None = None) -> ExperimentResult:
    """Monte Carlo rate of the empirical weighted mean.

    Each replica draws ``proxy_size`` i.i.d. positions from the initial law;
    the first ``J`` of them give the empirical weighted mean, all of them the
    proxy. The replica-mean squared error is fitted against ``J`` and must
    have slope in [-1.3, -0.7].
    """
    objective = cfg.objective_spec()
    alpha = cfg.params.alpha if cfg.params is not None else cfg.alpha
    Js = sorted(J_list if J_list is not None else cfg.J_list)
    N = cfg.proxy_size
    if Js[-1] > N:
        raise ParameterError(f"largest J={Js[-1]} exceeds proxy size {N}")
    err = np.zeros((cfg.R, len(Js)))
    for r in range(cfg.R):
        stream = replica_stream(cfg.seed, _WM, 0, r, _INIT)
        X = cfg.init.sample_positions((N, cfg.dim), stream)
        f = objective.eval(X)
        logits = -alpha * f
        w = np.exp(logits - logits.max())
        wx = w[:, None] * X
        M_proxy = wx.sum(axis=0) / w.sum()
        for i, J in enumerate(Js):
            M_J = wx[:J].sum(axis=0) / w[:J].sum()
            err[r, i] = np.sum((M_J - M_proxy) ** 2)
    mse = err.mean(axis=0)
    rows = [[J, v] for J, v in zip(Js, mse)]
    verdicts = {}
    fit = None
    try:
        fit = fit_power_law(Js, mse)
        lo, hi = WM_SLOPE_WINDOW
        verdicts["slope"] = lo <= fit.slope <= hi
    except InsufficientDataError:
        verdicts["slope"] = False
    summary = {
        "config": cfg.to_dict(),
        "alpha": alpha,
        "proxy_size": N,
        "mse": dict(zip(map(str, Js), mse.tolist())),
        "fit": fit,
        "slope_window": list(WM_SLOPE_WINDOW),
    }
    return ExperimentResult("wm-rate", ["J", "mse"], rows, summary, verdicts, {"total": cfg.R, "used": cfg.R, "excluded": 0})


def run_appendixB_contrast(cfg: ExperimentConfig, p: float | None = None, b: float | None = None, c: float | None = None) -> ExperimentResult:
    """Shifted centered functional versus the unshifted one on the same runs.

    The unshifted functional uses ``a = gamma c / (p m)`` with ``b, c`` from
    the config. The only verdict is on the shifted functional (fitted rate at
    least ``0.8 lambda_p``); the unshifted series and its fit are diagnostic.
    """
    p = cfg.contrast_p if p is None else p
    b = cfg.lstd_b if b is None else b
    c = cfg.lstd_c if c is None else c
    objective, params, report = _setup(cfg, [CenteredDecay(p)])
    _require(report, "centered-decay")
    rate = decay_rates(params, objective, [p])[p]
    ps = tuple(sorted({2, p}))
    snapshots, alive = _simulate_reports(cfg, params, objective, _DECAY, cfg.J, ps, lstd=(p, None, b, c))
    columns = report_columns(ps)
    rows = _mean_rows(snapshots, alive, columns)
    replicas, blown = _replica_accounting(alive, cfg.R)
    t = _column(rows, columns, "t")
    shifted = _column(rows, columns, "L2" if p == 2 else f"L{p:g}")
    unshifted = _column(rows, columns, "Lstd_p")
    t0 = cfg.t0_frac * cfg.T
    shifted_info, ok = _decay_verdict(t, shifted, rate, t0)
    try:
        unshifted_fit = fit_exponential_rate(np.column_stack([t, unshifted]), t0)
    except InsufficientDataError:
        unshifted_fit = None
    both = (shifted > 0) & (unshifted > 0)
    ratio = np.where(both, unshifted / np.where(both, shifted, 1.0), np.nan)
    columns = columns + ["ratio_Lstd_Lp"]
    rows = [row + [None if math.isnan(q) else float(q)] for row, q in zip(rows, ratio)]
    summary = {
        "config": cfg.to_dict(),
        "params": params,
        "p": p,
        "b": b,
        "c": c,
        "a": params.gamma * c / (p * params.m),
        "shifted": shifted_info,
        "unshifted_fit": unshifted_fit,
    }
    verdicts = {"shifted_decay": ok, "replicas": not blown}
    return ExperimentResult("contrast", columns, rows, summary, verdicts, replicas, blown)


def wilson_interval(successes: int, trials: int, confidence: float = 0.95) -> tuple[float, float]:
    ci = binomtest(successes, trials).proportion_ci(confidence_level=confidence, method="wilson")
    return float(ci.low), float(ci.high)


def run_concentration(cfg: ExperimentConfig, kappa: float | None = None, A: float | None = None, J_list=None) -> ExperimentResult:
    """Tail frequency of ``sup_t e^(kappa t) L2(t) >= L2(0) + A`` per ``J``.

    ``kappa`` defaults to ``lambda_2 / 2`` and must stay below ``lambda_2``.
    Frequencies come with 95% Wilson intervals; the diagnostic verdict asks
    them to be nonincreasing in ``J``.
    """
    objective, params, report = _setup(cfg, [CenteredDecay(2)])
    _require(report, "quadratic decay")
    lam2 = decay_rates(params, objective, [2])[2]
    kappa = (cfg.kappa if cfg.kappa is not None else 0.5 * lam2) if kappa is None else kappa
    A = cfg.A if A is None else A
    if not kappa < lam2:
        raise ParameterError(f"kappa={kappa:g} must be below lambda_2={lam2:g}")
    Js = sorted(J_list if J_list is not None else cfg.J_list)
    n = n_steps_for(cfg.T, params.dt)
    records = _record_steps(n, cfg.record_stride)
    rows, per_J, freqs, alive_all = [], {}, [], []
    for idx, J in enumerate(Js):
        X, V = _initial_batch(cfg, _CONC, idx, J)
        noise = _Increments(cfg.seed, _CONC, idx, cfg.R, J, cfg.dim, params.dt)
        alive = np.ones(cfg.R, dtype=bool)
        L0 = sup = None
        for k in range(n + 1):
            if k > 0:
                X, V = _kinetic_batch(X, V, params, objective, noise.draw())
            if k in records:
                alive &= _finite(X, V)
                with np.errstate(invalid="ignore", over="ignore"):
                    L2 = psi2_functional(centered_shifted(X, V, params.gamma), params)
                weighted = math.exp(kappa * k * params.dt) * L2
                if L0 is None:
                    L0, sup = L2.copy(), weighted.copy()
                else:
                    sup = np.maximum(sup, weighted)
        hits = int(np.count_nonzero((sup >= L0 + A) & alive))
        used = int(alive.sum())
        freq = hits / used if used else math.nan
        lo, hi = wilson_interval(hits, used) if used else (math.nan, math.nan)
        freqs.append(freq)
        alive_all.append(alive)
        per_J[str(J)] = {"hits": hits, "used": used, "frequency": freq, "wilson": [lo, hi]}
        rows.append([J, freq, lo, hi, hits, used])
    alive = np.concatenate(alive_all)
    replicas, blown = _replica_accounting(alive, cfg.R * len(Js))
    verdicts = {"nonincreasing": bool(np.all(np.diff(freqs) <= 0)), "replicas": not blown}
    summary = {"config": cfg.to_dict(), "params": params, "kappa": kappa, "lambda_2": lam2, "A": A, "per_J": per_J}
    return ExperimentResult(
        "concentration", ["J", "frequency", "wilson_low", "wilson_high", "hits", "used"], rows, summary, verdicts, replicas, blown
    )


def run_optimize(cfg: ExperimentConfig) -> ExperimentResult:
    """Minimize the objective with ``R`` independent seeds of the kinetic dynamics.

    Every shipped objective has its global minimizer at the origin; a replica
    succeeds when its final consensus point lies within ``success_radius`` of
    it, and the verdict asks at least 80% successes. With ``first_order`` the
    first-order dynamics run beside it under the same ``sigma``, ``alpha``,
    ``dt`` and increments, for comparison only.
    """
    objective = cfg.objective_spec()
    params = cfg.resolve_params(objective)
    n = n_steps_for(cfg.T, params.dt)
    records = _record_steps(n, cfg.record_stride)
    X, V = _initial_batch(cfg, _OPT, 0, cfg.J)
    X1 = X.copy()
    noise = _Increments(cfg.seed, _OPT, 0, cfg.R, cfg.J, cfg.dim, params.dt)
    alive = np.ones(cfg.R, dtype=bool)
    columns = ["t", "f_consensus"] + (["f_consensus_first_order"] if cfg.first_order else [])
    rows = []
    M = consensus_unchecked(X, params.alpha, objective)
    M1 = M.copy()
    for k in range(n + 1):
        if k > 0:
            dW = noise.draw()
            X, V = _kinetic_batch(X, V, params, objective, dW, M)
            M = consensus_unchecked(X, params.alpha, objective)
            if cfg.first_order:
                with np.errstate(invalid="ignore", over="ignore"):
                    X1 = first_order_update(X1, M1, dW, params)
                M1 = consensus_unchecked(X1, params.alpha, objective)
        if k in records:
            alive &= _finite(X, V)
            with np.errstate(invalid="ignore"):
                row = [k * params.dt, _alive_mean(objective.eval(M), alive)]
                if cfg.first_order:
                    row.append(_alive_mean(objective.eval(M1), alive))
            rows.append(row)
    replicas, blown = _replica_accounting(alive, cfg.R)
    dist = np.linalg.norm(M, axis=-1)
    success = (dist <= cfg.success_radius) & alive
    frac = float(np.count_nonzero(success) / cfg.R)
    summary = {
        "config": cfg.to_dict(),
        "params": params,
        "final_consensus": M.tolist(),
        "f_final": objective.eval(M).tolist(),
        "distance_to_minimizer": dist.tolist(),
        "success_fraction": frac,
    }
    if cfg.first_order:
        summary["first_order_final_consensus"] = M1.tolist()
        summary["first_order_f_final"] = objective.eval(M1).tolist()
    verdicts = {"success_rate": frac >= 0.8, "replicas": not blown}
    return ExperimentResult("optimize", columns, rows, summary, verdicts, replicas, blown)

