"""Domain types shared by every module: parameters, the coefficient p,
switch points, tolerances, and the error hierarchy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

PI = math.pi
LN_3_2 = math.log(1.5)
# amplitudes below this are treated as lost to underflow
UNDERFLOW_FLOOR = 1e-300
LOG_UNDERFLOW_FLOOR = math.log(UNDERFLOW_FLOOR)
RATIO_BOUND = 192.0


class OscillationError(Exception):
    """Base class for all package errors."""


class DomainError(OscillationError, ValueError):
    """Evaluation point lies left of s0."""


class NonConvergence(OscillationError):
    """An adaptive procedure exhausted its budget before meeting tolerance."""


class PrecisionExhausted(OscillationError):
    """A local amplitude underflowed double precision."""


class NonPositiveC(OscillationError, ValueError):
    pass


class IndexBelowM1(OscillationError, ValueError):
    pass


class NoSuchIndex(OscillationError):
    pass


@dataclass(frozen=True)
class Violation:
    code: str
    message: str

    def __str__(self) -> str:
        return f"{self.code}: {self.message}"


class InvalidParameters(OscillationError, ValueError):
    """Raised by :func:`validate_params`; carries every violated constraint."""

    def __init__(self, violations: list[Violation]):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))

    @property
    def codes(self) -> list[str]:
        return [v.code for v in self.violations]


@dataclass(frozen=True)
class ToleranceConfig:
    quad_rel_tol: float = 1e-10
    tail_rel_tol: float = 1e-12
    margin_min: float = 1e-6
    fd_step_scale: float = 1.0

    def __post_init__(self):
        for name in ("quad_rel_tol", "tail_rel_tol", "margin_min", "fd_step_scale"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be positive and finite, got {v!r}")
        if self.margin_min < 10 * self.quad_rel_tol:
            raise ValueError("margin_min must be at least 10 * quad_rel_tol")

    def as_dict(self) -> dict:
        return {
            "quad_rel_tol": self.quad_rel_tol,
            "tail_rel_tol": self.tail_rel_tol,
            "margin_min": self.margin_min,
            "fd_step_scale": self.fd_step_scale,
        }


DEFAULT_TOL = ToleranceConfig()


@dataclass(frozen=True)
class ExampleParams:
    """The tuple (alpha, beta, epsilon, s0) that fixes the perturbation.

    Only the basic domain is enforced here. The ratio and smallness
    constraints are checked by :func:`validate_params` so that invalid
    configurations can still be represented and reported on.
    """

    alpha: float
    beta: float
    epsilon: float
    s0: float = PI

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0 and self.s0 > 0):
            raise ValueError("alpha, beta and s0 must be positive")
        if not (0 < self.epsilon < 1):
            raise ValueError("epsilon must lie in (0, 1)")
        for v in (self.alpha, self.beta, self.epsilon, self.s0):
            if not math.isfinite(v):
                raise ValueError("parameters must be finite")

    def as_dict(self) -> dict:
        return {"alpha": self.alpha, "beta": self.beta, "epsilon": self.epsilon, "s0": self.s0}


@dataclass(frozen=True)
class SwitchSequence:
    """Switch points a(m) = m*pi and the first constructed pair index m1."""

    s0: float

    @staticmethod
    def a(m):
        return m * PI

    @property
    def m1(self) -> int:
        return max(1, math.ceil(self.s0 / (2 * PI)))

    @staticmethod
    def bump_of(s: float) -> int:
        """Index j of the interval [a(j), a(j+1)) containing s."""
        j = math.floor(s / PI)
        if s >= (j + 1) * PI:
            return j + 1
        return j - 1 if s < j * PI else j


# --- the coefficient p ------------------------------------------------------


class CoefficientP:
    """Nonnegative integrable coefficient p on [s0, inf).

    Subclasses provide ``eval``, ``cumulative`` (integral from s0) and
    ``tail`` (integral to infinity). All accept scalars or arrays.
    """

    kind = "abstract"
    s0: float

    def eval(self, s):
        raise NotImplementedError

    def cumulative(self, s):
        raise NotImplementedError

    def tail(self, s):
        raise NotImplementedError

    @property
    def total(self) -> float:
        return float(self.tail(self.s0))

    def weight(self, s):
        """Integrating factor exp(P(s))."""
        return np.exp(self.cumulative(s))

    def spec(self) -> str:
        raise NotImplementedError

    def sample_points(self) -> np.ndarray:
        return self.s0 * np.geomspace(1.0, 1e4, 257)


@dataclass(frozen=True)
class ZeroCoefficient(CoefficientP):
    s0: float = PI
    kind = "zero"

    def eval(self, s):
        return np.zeros_like(np.asarray(s, dtype=float))[()]

    def cumulative(self, s):
        return self.eval(s)

    def tail(self, s):
        return self.eval(s)

    def spec(self) -> str:
        return "zero"


@dataclass(frozen=True)
class InverseSquareCoefficient(CoefficientP):
    """p(s) = lam / s**2, with every integral in closed form."""

    lam: float
    s0: float = PI
    kind = "inverse-square"

    def eval(self, s):
        s = np.asarray(s, dtype=float)
        return (self.lam / s**2)[()]

    def cumulative(self, s):
        s = np.asarray(s, dtype=float)
        return (self.lam * (1.0 / self.s0 - 1.0 / s))[()]

    def tail(self, s):
        s = np.asarray(s, dtype=float)
        return (self.lam / s)[()]

    def spec(self) -> str:
        return f"invsq:{self.lam!r}"


def coefficient_inverse_square(lam: float, s0: float) -> InverseSquareCoefficient:
    if s0 <= 0:
        raise ValueError("s0 must be positive")
    return InverseSquareCoefficient(lam=float(lam), s0=float(s0))


@dataclass(frozen=True, eq=False)
class TableCoefficient(CoefficientP):
    """Tabulated p, linearly interpolated between nodes.

    Right of the last node p continues as p_last * (s_last / s)**2, which
    keeps the tail finite and p continuous. Integrals of the interpolant
    are exact (trapezoidal on the nodes).
    """

    s_nodes: np.ndarray
    p_nodes: np.ndarray
    s0: float = PI
    source: str = "<table>"
    _cum: np.ndarray = field(init=False, repr=False)
    kind = "user-table"

    def __post_init__(self):
        s = np.asarray(self.s_nodes, dtype=float)
        p = np.asarray(self.p_nodes, dtype=float)
        if s.ndim != 1 or s.shape != p.shape or s.size < 2:
            raise ValueError("table needs two matching columns with at least two rows")
        if np.any(np.diff(s) <= 0):
            raise ValueError("table abscissae must be strictly increasing")
        if s[0] > self.s0:
            raise ValueError("first table abscissa must be <= s0")
        object.__setattr__(self, "s_nodes", s)
        object.__setattr__(self, "p_nodes", p)
        cum = np.concatenate([[0.0], np.cumsum(0.5 * (p[1:] + p[:-1]) * np.diff(s))])
        object.__setattr__(self, "_cum", cum)

    @classmethod
    def from_file(cls, path, s0: float = PI) -> "TableCoefficient":
        data = np.loadtxt(path, ndmin=2)
        if data.shape[1] != 2:
            raise ValueError(f"{path}: expected two whitespace-separated columns")
        return cls(data[:, 0], data[:, 1], s0=s0, source=str(Path(path)))

    def eval(self, s):
        s = np.asarray(s, dtype=float)
        sl, pl = self.s_nodes[-1], self.p_nodes[-1]
        inside = np.interp(s, self.s_nodes, self.p_nodes)
        out = pl * (sl / np.maximum(s, sl)) ** 2
        return np.where(s <= sl, inside, out)[()]

    def _antiderivative(self, s):
        # integral from the first node, exact for the linear interpolant
        s = np.asarray(s, dtype=float)
        sn, pn = self.s_nodes, self.p_nodes
        sl, pl = sn[-1], pn[-1]
        sc = np.clip(s, sn[0], sl)
        i = np.clip(np.searchsorted(sn, sc, side="right") - 1, 0, sn.size - 2)
        h = sn[i + 1] - sn[i]
        t = sc - sn[i]
        inside = self._cum[i] + pn[i] * t + (pn[i + 1] - pn[i]) * t**2 / (2 * h)
        beyond = pl * sl * (1.0 - sl / np.maximum(s, sl))
        return np.where(s <= sl, inside, self._cum[-1] + beyond)

    def cumulative(self, s):
        return (self._antiderivative(s) - self._antiderivative(self.s0))[()]

    def tail(self, s):
        total = self._cum[-1] + self.p_nodes[-1] * self.s_nodes[-1]
        return (total - self._antiderivative(s))[()]

    def spec(self) -> str:
        return f"table:{self.source}"

    def sample_points(self) -> np.ndarray:
        nodes = self.s_nodes[self.s_nodes >= self.s0]
        return np.union1d(nodes, super().sample_points())


def parse_p_spec(text: str, s0: float) -> CoefficientP:
    """Parse ``zero``, ``invsq:<lam>`` or ``table:<path>``."""
    text = text.strip()
    if text == "zero":
        return ZeroCoefficient(s0=s0)
    kind, _, arg = text.partition(":")
    if kind == "invsq" and arg:
        return coefficient_inverse_square(float(arg), s0)
    if kind == "table" and arg:
        return TableCoefficient.from_file(arg, s0=s0)
    raise ValueError(f"unrecognised p specification {text!r}")


# --- validation ---------------------------------------------------------------


def find_violations(params: ExampleParams, p: CoefficientP) -> list[Violation]:
    """Every violated constraint on (params, p); an empty list means valid."""
    from .construct import admissible_epsilon

    out: list[Violation] = []
    ratio_ok = params.alpha > RATIO_BOUND * params.beta
    if not ratio_ok:
        out.append(Violation(
            "RatioViolation",
            f"alpha={params.alpha!r} must exceed 192*beta={RATIO_BOUND * params.beta!r}",
        ))
    if params.epsilon >= 1 / 3:
        out.append(Violation("EpsilonTooLarge", f"epsilon={params.epsilon!r} is not below 1/3"))
    elif ratio_ok:
        bound = admissible_epsilon(params.alpha, params.beta)
        if params.epsilon >= bound:
            out.append(Violation(
                "EpsilonTooLarge",
                f"epsilon={params.epsilon!r} is not below the admissible bound {bound!r}",
            ))

    if p.s0 != params.s0:
        out.append(Violation("DomainMismatch", f"p is defined from s0={p.s0!r}, params use {params.s0!r}"))
    with np.errstate(all="ignore"):
        pts = p.sample_points()
        vals = np.asarray(p.eval(pts), dtype=float)
        total = p.total
    bad = pts[~(vals >= 0)]
    if bad.size:
        out.append(Violation("NegativeCoefficient", f"p(s) < 0 at s={float(bad[0])!r} ({bad.size} sampled points)"))
    if not math.isfinite(total):
        out.append(Violation("DivergentTail", f"integral of p over [s0, inf) is {total!r}"))
    return out


def validate_params(params: ExampleParams, p: CoefficientP) -> ExampleParams:
    """Return ``params`` unchanged, or raise :class:`InvalidParameters`
    listing every violated constraint (never just the first)."""
    violations = find_violations(params, p)
    if violations:
        raise InvalidParameters(violations)
    return params
