"""Structural constants, decay rates and mechanical assumption checks.

Every check is a row ``(clause, passed, margin, anchor)`` where ``margin`` is
the satisfied side minus the required side in the clause's own units. Strict
inequalities pass iff ``margin > 0``; non-strict ones iff ``margin >= 0``.
Failures are report rows, never exceptions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

import numpy as np

from .core import KineticParams, NoiseKind, ObjectiveSpec
from .errors import AdmissibilityError, NoAdmissibleParams

__all__ = [
    "Admissibility",
    "CenteredDecay",
    "PoC",
    "Stability",
    "Check",
    "AdmissibilityReport",
    "mu_gap",
    "mu_gap_threshold",
    "norm_equiv",
    "psi2_equiv",
    "lyapunov_moment_equiv",
    "coupling_equiv",
    "lambda_p_cap",
    "c_lem",
    "decay_rates",
    "structural_constants",
    "check_assumptions",
    "suggest_admissible",
]


# --- profiles ----------------------------------------------------------------


@dataclass(frozen=True)
class Admissibility:
    p: float


@dataclass(frozen=True)
class CenteredDecay:
    p: float


@dataclass(frozen=True)
class PoC:
    r: float


@dataclass(frozen=True)
class Stability:
    q: float

    @property
    def p_star(self) -> float:
        return max(8.0, 8.0 * self.q)


Profile = Union[Admissibility, CenteredDecay, PoC, Stability]


@dataclass(frozen=True)
class Check:
    clause: str
    passed: bool
    margin: float
    anchor: str


@dataclass
class AdmissibilityReport:
    constants: dict
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failing(self) -> list:
        return [c for c in self.checks if not c.passed]

    def check(self, clause: str) -> Check:
        for c in self.checks:
            if c.clause == clause:
                return c
        raise KeyError(clause)

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "constants": _jsonable(self.constants),
            "checks": [
                {"clause": c.clause, "passed": c.passed, "margin": _num(c.margin), "anchor": c.anchor}
                for c in self.checks
            ],
        }

    def format(self) -> str:
        lines = ["constants:"]
        for key, val in self.constants.items():
            if isinstance(val, dict):
                inner = ", ".join(f"{k}: {_fmt(v)}" for k, v in val.items())
                lines.append(f"  {key:<20} {{{inner}}}")
            else:
                lines.append(f"  {key:<20} {_fmt(val)}")
        lines.append("checks:")
        width = max((len(c.clause) for c in self.checks), default=10)
        for c in self.checks:
            mark = "PASS" if c.passed else "FAIL"
            lines.append(f"  {c.clause:<{width}}  {mark}  margin={_fmt(c.margin):>12}  [{c.anchor}]")
        lines.append(f"overall: {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines)


def _num(v):
    if v is None:
        return None
    v = float(v)
    if math.isnan(v):
        return None
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (float, int, np.floating, np.integer)) and not isinstance(obj, bool):
        return _num(obj)
    return obj


def _fmt(v) -> str:
    if v is None:
        return "n/a"
    if isinstance(v, (int, np.integer)):
        return str(v)
    return f"{float(v):.6g}"


# --- closed-form constants ---------------------------------------------------


def mu_gap(p: float, alpha: float, f_lower: float, f_upper: float) -> float:
    """High-moment gap ``2 - (p-1)^(-(p-2)/p) exp(((p-1)/p) alpha (f_upper - f_lower))``.

    Negative values are meaningful: they signal that ``alpha`` is too large for
    moment order ``p``.
    """
    if p < 2:
        raise ValueError("p must be >= 2")
    if f_upper < f_lower:
        raise ValueError("f_upper must be >= f_lower")
    spread = alpha * (f_upper - f_lower)
    return 2.0 - (p - 1.0) ** (-(p - 2.0) / p) * math.exp((p - 1.0) / p * spread)


def mu_gap_threshold(p: float) -> float:
    """Largest ``alpha (f_upper - f_lower)`` with positive gap at order ``p``."""
    return (p * math.log(2.0) + (p - 2.0) * math.log(p - 1.0)) / (p - 1.0)


def norm_equiv(a: float, p: float, m: float, gamma: float) -> tuple[float, float]:
    """Lower/upper constants with ``c1 (|x|^p + |v|^p) <= phi_{a,p} <= c2 (|x|^p + |v|^p)``.

    ``p = 2`` gives the eigenvalues of ``[[a, m/(2 gamma)], [m/(2 gamma), 1]]``;
    ``p > 2`` uses the Young bound on the mixed term. ``c1 <= 0`` is returned
    as is (the bound is then void).
    """
    if a <= 0:
        raise ValueError("a must be positive")
    if p < 2:
        raise ValueError("p must be >= 2")
    r = m / gamma
    if p == 2:
        root = math.sqrt((a - 1.0) ** 2 + r * r)
        return (a + 1.0 - root) / 2.0, (a + 1.0 + root) / 2.0
    young = 2.0 * (p - 1.0) * (r / p) ** (p / (p - 1.0))
    tail = 2.0 ** (-(p - 1.0))
    return min(a - young, 1.0 - tail), max(a + young, 1.0 + tail)


def psi2_equiv(m: float, gamma: float) -> tuple[float, float, float]:
    """``(a2, c1, c2)`` for the dedicated quadratic form ``psi2``."""
    a2 = 9.0 / (2.0 * m) + 1.0 / gamma**2
    root = math.sqrt((a2 - 1.0) ** 2 + (5.0 / gamma) ** 2)
    return a2, (a2 + 1.0 - root) / 2.0, (a2 + 1.0 + root) / 2.0


def lyapunov_moment_equiv(p: float, m: float, gamma: float) -> tuple[float, float]:
    """``(C_p1, C_p2)`` sandwiching ``L_p`` between centered position+velocity moments."""
    K = max(1.0 + 2.0 ** (p - 1.0) * gamma ** (-p), 2.0 ** (p - 1.0))
    if p == 2:
        _, c1, c2 = psi2_equiv(m, gamma)
    else:
        a_p = (1.0 - m * (p - 2.0) / gamma**2) / p
        c1, c2 = norm_equiv(a_p, p, m, gamma)
    return c1 / K, c2 * K


def coupling_equiv(m: float, gamma: float) -> tuple[float, float]:
    """``(c_E1, c_E2)`` with ``c_E1 Ehat <= E <= c_E2 Ehat``."""
    a = 0.5 + 1.0 / m
    f1, f2 = norm_equiv(a, 2, m, gamma)
    g1, g2 = norm_equiv(a - 1.0 / m, 2, m, gamma)
    return min(f1, g1), max(f2, g2)


def lambda_p_cap(p: float, m: float, gamma: float) -> float:
    """Raw-velocity friction rate ``p gamma / (2 m)`` capping the raw velocity decay."""
    return p * gamma / (2.0 * m)


def c_lem(alpha: float, objective: ObjectiveSpec) -> float:
    return math.exp(alpha * objective.spread)


def _chi(tau_s: int, p: float) -> float:
    return tau_s + p - 2.0


def _Lambda_p(p, m, chi, mu, clem):
    if p <= 2 or mu <= 0:
        return math.nan
    base = (mu * m * m / (64.0 * chi)) ** (-2.0 / (p - 2.0))
    return 2.0 * (p - 2.0) * chi / m**2 * base * (1.0 + (clem / 2.0) ** (2.0 / (p - 2.0)))


def _gamma_Y(p, m, mu, eta):
    if eta <= 0:
        return math.inf
    second = (2.0 * 4.0 ** (p - 1.0) * (2.0 / m + 1.0) / eta) ** (1.0 / (p - 2.0))
    return max(1.0, second, mu * m * (p - 1.0) / (2.0 * eta))


def _p2_rate_parts(params: KineticParams, objective: ObjectiveSpec):
    m, g = params.m, params.gamma
    tau_s = params.tau(objective.dim)
    clem = c_lem(params.alpha, objective)
    K_sigma = 2.0 * params.sigma**2 * tau_s * (1.0 + clem) / m**2
    v1 = 1.0 / (m * g) + 3.0 / g**3 - K_sigma
    v3 = 2.0 * g / m - 3.0 / g
    return K_sigma, v1, v3


def decay_rates(params: KineticParams, objective: ObjectiveSpec, p_list: Iterable[float]) -> dict:
    """Predicted centered-moment decay rates.

    ``lambda_2 = min(v1, v3) / c2^(2)``; ``lambda_p = p mu_gap_p / (4 gamma)``
    for ``p > 2``. The key ``"kappa"`` (``lambda_8 / 8``) is added when 8 is
    requested.
    """
    m, g = params.m, params.gamma
    out: dict = {}
    for p in p_list:
        if p == 2:
            if not g * g > 7.0 * m / 6.0:
                raise AdmissibilityError("c2^(2) is undefined as a norm-equivalence constant: gamma^2 <= 7m/6")
            _, v1, v3 = _p2_rate_parts(params, objective)
            _, _, c2 = psi2_equiv(m, g)
            out[p] = min(v1, v3) / c2
        elif p > 2:
            out[p] = p * mu_gap(p, params.alpha, objective.f_lower, objective.f_upper) / (4.0 * g)
        else:
            raise ValueError("p must be >= 2")
    if 8 in out:
        out["kappa"] = out[8] / 8.0
    return out


def _high_p_list(profiles: Sequence[Profile]) -> list[float]:
    ps = set()
    for prof in profiles:
        if isinstance(prof, (Admissibility, CenteredDecay)):
            ps.add(float(prof.p))
        elif isinstance(prof, PoC):
            ps.update({2.0, 8.0, 2.0 * prof.r})
        elif isinstance(prof, Stability):
            ps.update({2.0, 8.0, prof.p_star})
    return sorted(ps)


def _key(p):
    return int(p) if float(p).is_integer() else float(p)


def structural_constants(params: KineticParams, objective: ObjectiveSpec, p_list=(2, 8)) -> dict:
    """Every tabulated constant for the given parameters and moment orders."""
    m, g, s, alpha = params.m, params.gamma, params.sigma, params.alpha
    d = objective.dim
    tau_s = params.tau(d)
    clem = c_lem(alpha, objective)
    spread = objective.spread
    K_sigma, v1, v3 = _p2_rate_parts(params, objective)
    a2, c1_2, c2_2 = psi2_equiv(m, g)
    a_c = 0.5 + 1.0 / m
    cE1, cE2 = coupling_equiv(m, g)
    ps = sorted({float(p) for p in p_list} | {2.0})

    consts: dict = {
        "K_Z": g / m + 1.0 / g,
        "K_Y": 2.0 / m + 1.0 / g**2,
        "tau_S": tau_s,
        "C_lem": clem,
        "K_sigma": K_sigma,
        "a2": a2,
        "c1_psi2": c1_2,
        "c2_psi2": c2_2,
        "v1": v1,
        "v3": v3,
        "C_M": 2.0 * alpha * objective.lipschitz * math.exp(2.0 * alpha * spread),
        "Lambda_noise": s * s * tau_s / m**2,
        "Lambda_noise_chi": {},
        "a_coupling": a_c,
        "c_E1": cE1,
        "c_E2": cE2,
        "C_norm": math.sqrt(2.0 / cE1 * max(4.0 / m**2, 1.0 / g**2)) if cE1 > 0 else math.nan,
        "chi_S": {},
        "a_p": {},
        "c1": {},
        "c2": {},
        "mu_gap": {},
        "Lambda_p": {},
        "C_pos": {},
        "eta_p": {},
        "Gamma_Y": {},
        "lambda": {},
        "raw_velocity_rate": {},
    }
    c1p, c2p = norm_equiv(a_c, 2, m, g)
    consts["c1"][f"a={a_c:g},p=2"] = c1p
    consts["c2"][f"a={a_c:g},p=2"] = c2p
    c1c, c2c = norm_equiv(a_c - 1.0 / m, 2, m, g)
    consts["c1"][f"a={a_c - 1.0 / m:g},p=2"] = c1c
    consts["c2"][f"a={a_c - 1.0 / m:g},p=2"] = c2c

    for p in ps:
        k = _key(p)
        chi = _chi(tau_s, p)
        consts["chi_S"][k] = chi
        consts["Lambda_noise_chi"][k] = s * s * chi / m**2
        mu = mu_gap(p, alpha, objective.f_lower, objective.f_upper)
        consts["mu_gap"][k] = mu
        consts["raw_velocity_rate"][k] = lambda_p_cap(p, m, g)
        if p == 2:
            consts["lambda"][k] = min(v1, v3) / c2_2 if g * g > 7.0 * m / 6.0 else math.nan
            continue
        a_p = (1.0 - m * (p - 2.0) / g**2) / p
        consts["a_p"][k] = a_p
        if a_p > 0:
            c1, c2 = norm_equiv(a_p, p, m, g)
        else:
            c1, c2 = math.nan, math.nan
        consts["c1"][f"a=a_p,p={k}"] = c1
        consts["c2"][f"a=a_p,p={k}"] = c2
        consts["Lambda_p"][k] = _Lambda_p(p, m, chi, mu, clem)
        cpos = 1.0 - 3.0 * mu / 16.0 - m * (p - 1.0) * (p - 2.0) / p
        eta = cpos - mu / 4.0
        consts["C_pos"][k] = cpos
        consts["eta_p"][k] = eta
        consts["Gamma_Y"][k] = _gamma_Y(p, m, mu, eta)
        consts["lambda"][k] = p * mu / (4.0 * g)
    if 8 in consts["lambda"]:
        consts["kappa"] = consts["lambda"][8] / 8.0
    return consts


# --- clause evaluation -------------------------------------------------------


class _Checker:
    def __init__(self):
        self.rows: list[Check] = []
        self._seen: set[str] = set()

    def strict(self, clause, lhs, rhs, anchor):
        """``lhs > rhs``."""
        self._add(clause, lhs - rhs, True, anchor)

    def weak(self, clause, lhs, rhs, anchor):
        """``lhs >= rhs``."""
        self._add(clause, lhs - rhs, False, anchor)

    def _add(self, clause, margin, strict, anchor):
        if clause in self._seen:
            return
        self._seen.add(clause)
        margin = float(margin)
        if math.isnan(margin):
            margin = -math.inf
        passed = margin > 0 if strict else margin >= 0
        self.rows.append(Check(clause, bool(passed), margin, anchor))


def _admissibility_rows(ck: _Checker, p, params, objective, consts):
    m, g = params.m, params.gamma
    k = _key(p)
    if p == 2:
        ck.strict("adm[p=2].friction", g * g, 1.5 * m, "gamma^2 > 3m/2")
        ck.strict("adm[p=2].noise", 1.0 / (m * g), consts["K_sigma"], "K_sigma < 1/(m gamma)")
        return
    mu = consts["mu_gap"][k]
    ck.strict(f"adm[p={k}].mu_gap", mu, 0.0, "mu_gap_p > 0")
    ck.strict(f"adm[p={k}].gamma_mass", g * g, m * (p - 2.0), "gamma^2 > m (p-2)")
    ck.strict(
        f"adm[p={k}].mass_bound",
        p * (16.0 - 7.0 * mu) / (16.0 * (p - 1.0) * (p - 2.0)),
        m,
        "m < p (16 - 7 mu_gap_p) / (16 (p-1)(p-2))",
    )
    young = 2.0 * (p - 1.0) * (m / (p * g)) ** (p / (p - 1.0))
    ck.strict(f"adm[p={k}].coercivity", consts["a_p"][k], young, "a_p > 2(p-1)(m/(p gamma))^(p/(p-1))")


def _centered_decay_rows(ck: _Checker, p, params, objective, consts):
    _admissibility_rows(ck, p, params, objective, consts)
    if p == 2:
        return
    m, g, s = params.m, params.gamma, params.sigma
    k = _key(p)
    mu = consts["mu_gap"][k]
    ck.strict(f"decay[p={k}].eta", consts["eta_p"][k], 0.0, "eta_p = C_pos - mu_gap_p/4 > 0")
    ck.weak(f"decay[p={k}].gamma_Y", g, consts["Gamma_Y"][k], "gamma >= Gamma_Y,p")
    lam = consts["Lambda_p"][k]
    noise = lam * s ** (2.0 * p / (p - 2.0)) * g ** (2.0 / (p - 2.0)) if s > 0 else (0.0 if not math.isnan(lam) else math.nan)
    lhs = noise + (p - 1.0) / (4.0 * g) + 2.0 * m * (p - 1.0) / (p * g) + p * mu / (4.0 * g) * (1.0 + m / (p * g))
    ck.weak(f"decay[p={k}].Z_closure", (p + 1.0) / (2.0 * m) * g, lhs, "Lambda_p s^(2p/(p-2)) g^(2/(p-2)) + ... <= (p+1) g/(2m)")


def _compat_row(ck: _Checker, params, objective, consts):
    m, g, s = params.m, params.gamma, params.sigma
    tau_s = consts["tau_S"]
    rhs = m / (2.0 * tau_s * (1.0 + consts["C_lem"]) * s * s) if s * s > 0 else math.inf
    ck.strict("decay.p2_compat", rhs, g, "gamma < m / (2 tau (1 + C_lem) sigma^2)")


def _gap_rows(ck: _Checker, tag, p_high, params, objective, consts, anchor_high):
    m, g, s = params.m, params.gamma, params.sigma
    k8 = 8
    mu8 = consts["mu_gap"][k8]
    tau_s = consts["tau_S"]
    clem = consts["C_lem"]
    ck.strict(f"{tag}(i)", g, m / math.sqrt(2.0), "gamma > m / sqrt(2)")
    ck.strict(
        f"{tag}(ii).quadratic_gap",
        min(consts["v1"], consts["v3"]),
        consts["c2_psi2"] * mu8 / (4.0 * g),
        "min{v1, v3} > c2^(2) mu_gap_8 / (4 gamma)",
    )
    kh = _key(p_high)
    ck.strict(f"{tag}(ii).high_gap", consts["mu_gap"][kh], 0.5 * mu8, anchor_high)
    ck.weak(f"{tag}(iii)", m * m / (g * tau_s), s * s, "sigma^2 <= m^2 / (gamma tau(S))")
    lam2 = consts["lambda"][2]
    kappa = consts["lambda"][8] / 8.0
    ck.weak(
        f"{tag}(iv)",
        m * m * consts["c1_psi2"] * (lam2 - kappa) / (2.0 * tau_s * (1.0 + clem)),
        s * s,
        "sigma^2 <= m^2 c1^(2) (lambda_2 - kappa) / (2 tau (1 + C_lem))",
    )


def _as_profiles(profile) -> list:
    if isinstance(profile, (Admissibility, CenteredDecay, PoC, Stability)):
        return [profile]
    if isinstance(profile, (int, float)):
        return [CenteredDecay(float(profile))]
    out = []
    for p in profile:
        out.extend(_as_profiles(p))
    return out


def check_assumptions(params: KineticParams, objective: ObjectiveSpec, profile) -> AdmissibilityReport:
    """Evaluate every clause required by ``profile`` (one profile or a list).

    Plain numbers are read as ``CenteredDecay(p)``.
    """
    profiles = _as_profiles(profile)
    ps = _high_p_list(profiles)
    consts = structural_constants(params, objective, ps)
    ck = _Checker()
    ck.weak("obj.bounded", objective.f_upper, objective.f_lower, "f_lower <= f <= f_upper")
    ck.strict("obj.lipschitz", objective.lipschitz, 0.0, "|f(x) - f(y)| <= L_f |x - y|, L_f > 0")

    needs_p2 = False
    high = set()
    for prof in profiles:
        if isinstance(prof, Admissibility):
            _admissibility_rows(ck, float(prof.p), params, objective, consts)
        elif isinstance(prof, CenteredDecay):
            _centered_decay_rows(ck, float(prof.p), params, objective, consts)
            needs_p2 |= prof.p == 2
            if prof.p > 2:
                high.add(prof.p)
        elif isinstance(prof, PoC):
            ck.weak("poc.moment_order", 2.0 * prof.r, 8.0, "2r >= 8")
            for p in sorted({2.0, 8.0, 2.0 * prof.r}):
                _centered_decay_rows(ck, p, params, objective, consts)
            needs_p2, high = True, high | {8.0, 2.0 * prof.r}
            _gap_rows(ck, "poc", 2.0 * prof.r, params, objective, consts, "mu_gap_2r > mu_gap_8 / 2")
        elif isinstance(prof, Stability):
            ck.strict("stab.q", prof.q, 0.5, "q > 1/2")
            for p in sorted({2.0, 8.0, prof.p_star}):
                _centered_decay_rows(ck, p, params, objective, consts)
            needs_p2, high = True, high | {8.0, prof.p_star}
            _gap_rows(ck, "stab", prof.p_star, params, objective, consts, "mu_gap_p* > mu_gap_8 / 2")
    if needs_p2 and high:
        _compat_row(ck, params, objective, consts)
    return AdmissibilityReport(consts, ck.rows)


# --- search ------------------------------------------------------------------


def _rank(report: AdmissibilityReport):
    fails = report.failing()
    worst = min((c.margin for c in fails), default=math.inf)
    return (-len(fails), worst)


def suggest_admissible(
    objective: ObjectiveSpec,
    p_targets=(2, 8),
    search_budget: int = 2000,
    alpha: float = 0.0,
    noise: NoiseKind | str = NoiseKind.ISOTROPIC,
    dt: float | None = None,
    masses: Sequence[float] | None = None,
    sigma_fraction: float = 0.5,
):
    """Search ``(m, gamma, sigma)`` for a parameter set passing every clause.

    ``m`` runs over a descending grid; for each ``m``, ``gamma`` increases from
    the smallest value allowed by the closed-form lower bounds; for each
    ``gamma``, ``sigma`` halves from the quadratic small-noise ceiling. The
    first passing set is returned with its report, after shrinking ``sigma`` by
    ``sigma_fraction`` so it sits strictly inside the noise clauses.

    With ``dt`` given, only sets with ``m / (2 gamma) >= dt`` are considered;
    otherwise ``dt = min(1e-3, m / (2 gamma))``.

    Raises
    ------
    NoAdmissibleParams
        After ``search_budget`` clause evaluations without success, or at once
        when a clause independent of ``(m, gamma, sigma)`` fails.
    """
    profiles = _as_profiles(p_targets)
    noise = NoiseKind(noise)
    if search_budget < 1:
        raise NoAdmissibleParams("search budget exhausted (budget < 1)")
    ps = _high_p_list(profiles)
    for p in ps:
        if p > 2 and mu_gap(p, alpha, objective.f_lower, objective.f_upper) <= 0:
            raise NoAdmissibleParams(
                f"mu_gap at p={p:g} is nonpositive for alpha*(f_upper-f_lower)="
                f"{alpha * objective.spread:g}; no (m, gamma, sigma) can pass"
            )
    if masses is None:
        masses = np.geomspace(0.5, 1e-3, 40)
    tau_s = noise.tau(objective.dim)
    clem = math.exp(alpha * objective.spread)
    best = None
    evals = 0
    for m in masses:
        m = float(m)
        lo = math.sqrt(1.5 * m) * 1.0001
        for p in ps:
            if p > 2:
                lo = max(lo, math.sqrt(m * (p - 2.0)) * 1.0001)
                mu = mu_gap(p, alpha, objective.f_lower, objective.f_upper)
                eta = 1.0 - 7.0 * mu / 16.0 - m * (p - 1.0) * (p - 2.0) / p
                lo = max(lo, _gamma_Y(p, m, mu, eta) * 1.0001)
        if not math.isfinite(lo):
            continue
        hi = m / (2.0 * dt) if dt is not None else 1e4
        gamma = lo
        while gamma <= hi and evals < search_budget:
            sigma_max = math.sqrt(m / (2.0 * tau_s * (1.0 + clem) * gamma))
            step_dt = dt if dt is not None else min(1e-3, m / (2.0 * gamma))
            sigma = sigma_max
            for _ in range(40):
                if evals >= search_budget:
                    break
                params = KineticParams(m, gamma, sigma, alpha, noise, step_dt)
                rep = check_assumptions(params, objective, profiles)
                evals += 1
                if rep.passed:
                    final = params.replace(sigma=sigma * sigma_fraction)
                    final_rep = check_assumptions(final, objective, profiles)
                    if final_rep.passed:
                        return final, final_rep
                    return params, rep
                if best is None or _rank(rep) > _rank(best):
                    best = rep
                # only the noise clauses respond to sigma
                non_noise = [
                    c for c in rep.failing()
                    if not (c.clause.endswith("noise") or c.clause.endswith("(iii)") or c.clause.endswith("(iv)")
                            or c.clause.endswith("Z_closure") or c.clause.endswith("p2_compat")
                            or c.clause.endswith("quadratic_gap"))
                ]
                if non_noise:
                    break
                sigma *= 0.5
            gamma *= 1.15
        if evals >= search_budget:
            break
    raise NoAdmissibleParams(f"no admissible parameters within budget {search_budget}", best)
