"""Numerical certification of the oscillation hypotheses for q(alpha, beta).

Each inequality side is computed twice: from the closed-form bump moments
and series tails, and by quadrature. Margins are divided by the local
amplitude (c_m or d_m) so that a verdict at m = 6, where the amplitudes are
near 1e-166, means as much as one at m = 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .construct import BRUTE_FORCE_TERMS, Perturbation, admissible_epsilon, threshold_constants
from .core import (
    DEFAULT_TOL,
    LN_3_2,
    PI,
    CoefficientP,
    NoSuchIndex,
    OscillationError,
    PrecisionExhausted,
    ToleranceConfig,
    find_violations,
)
from .quad import improper_q_integral, integrate_finite, log_series_tail_bound

MARGIN_NAMES = ("margin_I", "margin_II", "margin_13", "margin_14", "margin_est11", "margin_est12")


@dataclass(frozen=True)
class InequalityCheck:
    """One strict inequality lhs > rhs at index m, in scaled units."""

    name: str
    m: int
    lhs: float
    rhs: float
    quad_lhs: float
    quad_rhs: float

    @property
    def margin(self) -> float:
        return self.lhs - self.rhs

    @property
    def quad_margin(self) -> float:
        return self.quad_lhs - self.quad_rhs

    @property
    def route_gap(self) -> float:
        """Relative disagreement between the closed-form and quadrature routes."""
        scale = max(abs(self.lhs), abs(self.rhs))
        if scale == 0:
            return 0.0
        return max(abs(self.lhs - self.quad_lhs), abs(self.rhs - self.quad_rhs)) / scale

    def routes_agree(self, tol: ToleranceConfig = DEFAULT_TOL) -> bool:
        return self.route_gap <= 10 * tol.quad_rel_tol


@dataclass(frozen=True)
class ExponentialEstimates:
    m: int
    margin_est11: float | None
    margin_est12: float | None
    note: str = ""


@dataclass
class MarginRecord:
    m: int
    margin_I: float | None = None
    margin_II: float | None = None
    margin_13: float | None = None
    margin_14: float | None = None
    margin_est11: float | None = None
    margin_est12: float | None = None
    status: str = "certified"
    route_gap: float = 0.0
    notes: list[str] = field(default_factory=list)
    scaled: bool = True

    def margins(self) -> dict[str, float | None]:
        return {k: getattr(self, k) for k in MARGIN_NAMES}

    def as_dict(self) -> dict:
        d = {"m": self.m, **self.margins(), "status": self.status, "route_gap": self.route_gap}
        if self.notes:
            d["notes"] = list(self.notes)
        return d


@dataclass
class CertificationReport:
    params: dict
    p_spec: str
    tolerances: dict
    m0: int
    m1: int
    epsilon_admissible: float | None
    per_m_records: list[MarginRecord]
    verdict: str
    failures: list[str]
    out_of_precision: list[int]
    warnings: list[str]
    violations: list[str]

    @property
    def certified(self) -> bool:
        return self.verdict == "certified"

    @property
    def min_margin(self) -> float | None:
        vals = [v for r in self.per_m_records for v in r.margins().values() if v is not None]
        return min(vals) if vals else None

    def as_dict(self) -> dict:
        return {
            "meta": {
                "params": self.params,
                "p_spec": self.p_spec,
                "tolerances": self.tolerances,
                "m0": self.m0,
                "m1": self.m1,
                "epsilon_admissible": self.epsilon_admissible,
                "violations": list(self.violations),
                "warnings": list(self.warnings),
            },
            "per_m": [r.as_dict() for r in self.per_m_records],
            "verdict": {
                "status": self.verdict,
                "failures": list(self.failures),
                "out_of_precision": list(self.out_of_precision),
            },
        }


# --- closed-form pieces ---------------------------------------------------------


def _scaled_pair_tail(pert: Perturbation, m: int, log_scale: float) -> float:
    """sum_{k>m} (c_k + d_k) / exp(log_scale): partial sum plus rigorous remainder."""
    if pert.null:
        return 0.0
    params = pert.params
    K = m + BRUTE_FORCE_TERMS
    terms = [math.exp(pert.log_c(k) - log_scale) + math.exp(pert.log_d(k) - log_scale)
             for k in range(m + 1, K + 1)]
    rem = math.log(params.alpha + params.beta) + log_series_tail_bound(params.epsilon, K) - log_scale
    return math.fsum(terms) + math.exp(rem)


def _check_range(pert: Perturbation, m: int):
    if m < pert.m1:
        raise ValueError(f"m={m} is below m1={pert.m1}")
    if pert.underflows(m):
        raise PrecisionExhausted(f"amplitudes at m={m} underflow double precision")


def _bump_integral(pert, j, log_scale, tol, moment=False, absolute=True):
    lo, hi = j * PI, (j + 1) * PI
    if moment:
        f = lambda s: (s - lo) * np.abs(pert.scaled(s, log_scale))  # noqa: E731
    elif absolute:
        f = lambda s: np.abs(pert.scaled(s, log_scale))  # noqa: E731
    else:
        f = lambda s: pert.scaled(s, log_scale)  # noqa: E731
    return integrate_finite(f, lo, hi, tol).value


def _abs_tail(pert, p, s, log_scale, tol):
    r = improper_q_integral(pert, p, s, weighted=False, absolute=True, tol=tol, log_scale=log_scale)
    return r.value + r.tail_bound


# --- the four hypotheses ----------------------------------------------------------


def check_lemma1_I(pert: Perturbation, m: int, tol: ToleranceConfig | None = None,
                   p: CoefficientP | None = None) -> InequalityCheck:
    """Mass of the negative bump against three times the following positive bump."""
    tol = tol or DEFAULT_TOL
    _check_range(pert, m)
    ls = pert.log_c(m)
    lhs = PI / 2
    rhs = 3 * (PI / 2) * math.exp(pert.log_d(m) - ls)
    q_lhs = _bump_integral(pert, 2 * m, ls, tol)
    q_rhs = 3 * _bump_integral(pert, 2 * m + 1, ls, tol, absolute=False)
    return InequalityCheck("margin_I", m, lhs, rhs, q_lhs, q_rhs)


def check_lemma1_II(pert: Perturbation, m: int, tol: ToleranceConfig | None = None,
                    p: CoefficientP | None = None) -> InequalityCheck:
    """Positive-bump mass against twice the total |q| beyond it."""
    tol = tol or DEFAULT_TOL
    _check_range(pert, m)
    ls = pert.log_d(m)
    lhs = PI / 2
    rhs = 2 * (PI / 2) * _scaled_pair_tail(pert, m, ls)
    q_lhs = _bump_integral(pert, 2 * m + 1, ls, tol, absolute=False)
    q_rhs = 2 * _abs_tail(pert, p, (2 * m + 2) * PI, ls, tol)
    return InequalityCheck("margin_II", m, lhs, rhs, q_lhs, q_rhs)


def check_lemma2_13(pert: Perturbation, m: int, tol: ToleranceConfig | None = None,
                    p: CoefficientP | None = None) -> InequalityCheck:
    tol = tol or DEFAULT_TOL
    _check_range(pert, m)
    ls = pert.log_c(m)
    weight = 6 * ((2 * m + 1) * PI) ** 2 / (2 * m * PI)
    lhs = PI**2 / 4
    rhs = weight * (PI / 2) * (math.exp(pert.log_d(m) - ls) + _scaled_pair_tail(pert, m, ls))
    q_lhs = _bump_integral(pert, 2 * m, ls, tol, moment=True)
    q_rhs = weight * _abs_tail(pert, p, (2 * m + 1) * PI, ls, tol)
    return InequalityCheck("margin_13", m, lhs, rhs, q_lhs, q_rhs)


def check_lemma2_14(pert: Perturbation, m: int, tol: ToleranceConfig | None = None,
                    p: CoefficientP | None = None) -> InequalityCheck:
    tol = tol or DEFAULT_TOL
    _check_range(pert, m)
    ls = pert.log_d(m)
    weight = 4 * ((2 * m + 2) * PI) ** 2 / ((2 * m + 1) * PI)
    lhs = PI**2 / 4
    rhs = weight * (PI / 2) * _scaled_pair_tail(pert, m, ls)
    q_lhs = _bump_integral(pert, 2 * m + 1, ls, tol, moment=True)
    q_rhs = weight * _abs_tail(pert, p, (2 * m + 2) * PI, ls, tol)
    return InequalityCheck("margin_14", m, lhs, rhs, q_lhs, q_rhs)


# --- the coefficient side ---------------------------------------------------------


def compute_m0(p: CoefficientP, max_index: int = 10**6) -> int:
    """Least m >= 1 with the tail of p from a(2m) below ln(3/2)."""
    if not math.isfinite(p.total):
        raise NoSuchIndex("p is not integrable on [s0, inf)")
    for m in range(1, max_index + 1):
        if p.tail(max(2 * m * PI, p.s0)) < LN_3_2:
            return m
    raise NoSuchIndex(f"tail of p stays above ln(3/2) up to m={max_index}")


def check_exponential_estimates(pert: Perturbation, p: CoefficientP, m: int) -> ExponentialEstimates:
    """Margins of 3 exp(P(a_2m)) > 2 exp(P(a_2m+2)) and
    2 exp(P(a_2m+1)) > exp(P(inf)), each divided by its left exponential."""
    m0 = compute_m0(p)
    if m < m0:
        return ExponentialEstimates(m, None, None, f"skipped: m={m} is below m0={m0}")
    lo = max(2 * m * PI, p.s0)
    est11 = 3 - 2 * math.exp(float(p.cumulative((2 * m + 2) * PI) - p.cumulative(lo)))
    est12 = 2 - math.exp(float(p.tail(max((2 * m + 1) * PI, p.s0))))
    return ExponentialEstimates(m, est11, est12)


_CHECKS = (check_lemma1_I, check_lemma1_II, check_lemma2_13, check_lemma2_14)


def certify_all(
    pert: Perturbation,
    p: CoefficientP,
    m_lo: int,
    m_hi: int,
    tol: ToleranceConfig | None = None,
) -> CertificationReport:
    """Run every hypothesis check for m in [m_lo, m_hi] and assemble a report.

    Individual failures are recorded, never raised.
    """
    tol = tol or DEFAULT_TOL
    params = pert.params
    if not (pert.m1 <= m_lo <= m_hi):
        raise ValueError(f"need m1={pert.m1} <= m_lo={m_lo} <= m_hi={m_hi}")

    violations = [str(v) for v in find_violations(params, p)]
    failures = [v.split(":")[0] for v in violations]
    warnings: list[str] = []
    try:
        eps_adm = admissible_epsilon(params.alpha, params.beta)
    except OscillationError:
        eps_adm = None
    try:
        m0 = compute_m0(p)
    except NoSuchIndex as exc:
        m0 = -1
        failures.append(f"NoSuchIndex: {exc}")

    c1, _ = threshold_constants(params.alpha, params.beta)
    if c1 <= 0:
        warnings.append("first eps-threshold constant is not positive; no eps is admissible")
    if m0 > m_lo:
        warnings.append(f"exponential estimates checked from m0={m0}; m<{m0} only certifies the q-inequalities")

    records: list[MarginRecord] = []
    out_of_precision: list[int] = []
    for m in range(m_lo, m_hi + 1):
        rec = MarginRecord(m)
        if pert.underflows(m):
            rec.status = "out-of-precision"
            rec.notes.append("amplitudes below 1e-300")
            out_of_precision.append(m)
            records.append(rec)
            continue
        failed = False
        for check in _CHECKS:
            try:
                res = check(pert, m, tol, p)
            except OscillationError as exc:
                rec.notes.append(f"{check.__name__}: {type(exc).__name__}: {exc}")
                failed = True
                continue
            setattr(rec, res.name, res.margin)
            rec.route_gap = max(rec.route_gap, res.route_gap)
            if not res.routes_agree(tol):
                failed = True
                rec.notes.append(f"{res.name}: closed-form and quadrature routes differ by {res.route_gap:.3e}")
                failures.append(f"m={m}: {res.name} route mismatch")
            if not res.margin > tol.margin_min:
                failed = True
                failures.append(f"m={m}: {res.name}={res.margin!r}")
        if m0 > 0:
            est = check_exponential_estimates(pert, p, m)
            rec.margin_est11, rec.margin_est12 = est.margin_est11, est.margin_est12
            if est.note:
                rec.notes.append(est.note)
            for name in ("margin_est11", "margin_est12"):
                v = getattr(rec, name)
                if v is not None and not v > tol.margin_min:
                    failed = True
                    failures.append(f"m={m}: {name}={v!r}")
        rec.status = "failed" if failed else "certified"
        records.append(rec)

    if out_of_precision:
        warnings.append(f"out of precision at m={out_of_precision}; numeric verification ends at "
                        f"m={min(out_of_precision) - 1}")
    if failures:
        verdict = "failed"
    elif not any(r.status == "certified" for r in records):
        verdict = "out-of-precision"
    else:
        verdict = "certified"

    return CertificationReport(
        params=params.as_dict(),
        p_spec=p.spec(),
        tolerances=tol.as_dict(),
        m0=m0,
        m1=pert.m1,
        epsilon_admissible=eps_adm,
        per_m_records=records,
        verdict=verdict,
        failures=failures,
        out_of_precision=out_of_precision,
        warnings=warnings,
        violations=violations,
    )
