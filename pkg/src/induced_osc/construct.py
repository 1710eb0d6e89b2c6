"""The sin^2-bump perturbation q(alpha, beta) and its closed-form oracles."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    LOG_UNDERFLOW_FLOOR,
    PI,
    RATIO_BOUND,
    DomainError,
    ExampleParams,
    IndexBelowM1,
    InvalidParameters,
    NonPositiveC,
    SwitchSequence,
    Violation,
)
from .quad import log_series_tail_bound

BRUTE_FORCE_TERMS = 200


@dataclass(frozen=True)
class Perturbation:
    """q(alpha, beta) on [s0, inf).

    On [a(2m), a(2m+1)] it equals -c(m) sin^2 s and on [a(2m+1), a(2m+2)]
    it equals d(m) sin^2 s, for m >= m1; it is zero on [s0, a(2 m1)).
    Amplitudes are formed in log space, so ratios stay exact long after
    the amplitudes themselves underflow.

    ``null=True`` gives the degenerate q = 0 used by regression checks.
    """

    params: ExampleParams
    null: bool = False

    @property
    def switch(self) -> SwitchSequence:
        return SwitchSequence(self.params.s0)

    @property
    def m1(self) -> int:
        return self.switch.m1

    @property
    def first_bump(self) -> int:
        return 2 * self.m1

    # amplitudes

    def log_c(self, m: int) -> float:
        if self.null:
            return -math.inf
        return math.log(self.params.alpha) + m * m * math.log(self.params.epsilon)

    def log_d(self, m: int) -> float:
        if self.null:
            return -math.inf
        return math.log(self.params.beta) + m * m * math.log(self.params.epsilon) - math.log(m)

    def c(self, m: int) -> float:
        return math.exp(self.log_c(m))

    def d(self, m: int) -> float:
        return math.exp(self.log_d(m))

    def bump_log_amp(self, j: int) -> float:
        """Log of |q| amplitude on bump [a(j), a(j+1)]; -inf where q = 0."""
        if j < self.first_bump:
            return -math.inf
        m = j // 2
        return self.log_c(m) if j % 2 == 0 else self.log_d(m)

    def bump_amp(self, j: int) -> float:
        return math.exp(self.bump_log_amp(j))

    @staticmethod
    def bump_sign(j: int) -> int:
        return -1 if j % 2 == 0 else 1

    def underflows(self, m: int) -> bool:
        return min(self.log_c(m), self.log_d(m)) < LOG_UNDERFLOW_FLOOR

    def underflow_horizon(self) -> int:
        """First pair index whose amplitudes fall below the underflow floor."""
        m = self.m1
        while not self.underflows(m):
            m += 1
        return m

    # evaluation

    def scaled(self, s, log_scale: float = 0.0):
        """q(s) / exp(log_scale), vectorised."""
        s = np.asarray(s, dtype=float)
        if np.any(s < self.params.s0):
            raise DomainError(f"q is defined on [s0, inf) with s0={self.params.s0!r}")
        j = bump_index(s)
        amps = np.array([self.bump_log_amp(int(k)) for k in np.ravel(j)]).reshape(j.shape)
        with np.errstate(under="ignore"):
            amp = np.exp(amps - log_scale)
        sign = np.where(j % 2 == 0, -1.0, 1.0)
        out = sign * amp * np.sin(s - j * PI) ** 2
        return out[()] if out.ndim == 0 else out

    def __call__(self, s):
        return self.scaled(s)


def bump_index(s):
    """Index j with j*pi <= s < (j+1)*pi in floating point, vectorised.

    floor(s / pi) alone can land one low at computed switch points such as
    11 * pi, which would leave a spurious sin^2(pi) ~ 1e-32 residue.
    """
    s = np.asarray(s, dtype=float)
    j = np.floor(s / PI).astype(np.int64)
    j = np.where(s >= (j + 1) * PI, j + 1, j)
    return np.where(s < j * PI, j - 1, j)


def eval_q(pert: Perturbation, s):
    return pert(s)


def epsilon_zero(C: float) -> float:
    """Threshold below which C eps^{m^2}/m > sum_{k>m} k eps^{k^2} for all m >= 1."""
    if not C > 0:
        raise NonPositiveC(f"C must be positive, got {C!r}")
    if C >= 1:
        return 1 / 3
    return min(1 / 3, C / (1 - C))


def threshold_constants(alpha: float, beta: float) -> tuple[float, float]:
    """The two constants fed into the eps-threshold: one for each weighted
    moment inequality of the construction."""
    c1 = (1 / 48 - 4 * beta / alpha) / 6
    c2 = (beta / alpha) / 192
    return c1, c2


def admissible_epsilon(alpha: float, beta: float) -> float:
    if not alpha > RATIO_BOUND * beta:
        raise InvalidParameters([Violation(
            "RatioViolation", f"alpha={alpha!r} must exceed 192*beta={RATIO_BOUND * beta!r}")])
    c1, c2 = threshold_constants(alpha, beta)
    return min(epsilon_zero(c1), epsilon_zero(c2), 1 / 3)


@dataclass(frozen=True)
class DominanceMargin:
    m: int
    lhs: float
    rhs: float
    margin: float
    scaled_margin: float

    @property
    def holds(self) -> bool:
        return self.scaled_margin > 0


def check_lemma3(C: float, epsilon: float, m_max: int, terms: int = BRUTE_FORCE_TERMS) -> list[DominanceMargin]:
    """Margins of C eps^{m^2}/m > sum_{k>m} k eps^{k^2} for m = 1..m_max.

    The right side is a partial sum to k = m + ``terms`` plus the rigorous
    remainder bound. ``scaled_margin`` divides through by eps^{m^2} so the
    sign survives when the absolute values underflow.
    """
    if not (0 < epsilon < 1) or m_max < 1:
        raise ValueError("need 0 < epsilon < 1 and m_max >= 1")
    le = math.log(epsilon)
    out = []
    for m in range(1, m_max + 1):
        ks = np.arange(m + 1, m + terms + 1, dtype=float)
        with np.errstate(under="ignore"):
            rel = ks * np.exp((ks**2 - m * m) * le)
        rel_sum = math.fsum(rel) + math.exp(log_series_tail_bound(epsilon, m + terms) - m * m * le)
        scaled = C / m - rel_sum
        lead = math.exp(m * m * le)
        lhs = C * lead / m
        rhs = rel_sum * lead
        out.append(DominanceMargin(m, lhs, rhs, lhs - rhs, scaled))
    return out


def moment_closed_form(pert: Perturbation, m: int, kind: str, order: str) -> float:
    """Exact bump integrals.

    ``kind`` is ``"negative"`` (c-bump on [a(2m), a(2m+1)]) or ``"positive"``
    (d-bump); ``order`` is ``"mass"`` (integral of |q|, pi/2 times the
    amplitude) or ``"first"`` (integral of (s - left end)|q|, pi^2/4 times it).
    """
    if m < pert.m1:
        raise IndexBelowM1(f"m={m} is below m1={pert.m1}")
    kind = kind.replace("-bump", "")
    if kind not in ("negative", "positive"):
        raise ValueError(f"kind must be negative or positive, got {kind!r}")
    factor = {"mass": PI / 2, "first": PI**2 / 4}[order]
    amp = pert.c(m) if kind == "negative" else pert.d(m)
    return factor * amp
