"""Explicit solutions z and h, their residuals, sign certificates and decay.

z(s) = exp(-P(s)) * int_s^inf q(t) exp(P(t)) dt solves z' + p z + q = 0, and
h(s) = -s * int_s^inf z(t) / t^2 dt solves h'' + p (h' - h/s) + q/s = 0.

Inside each bump z / t^2 is represented by a Chebyshev interpolant built from
directly computed z values; h only needs antiderivatives of those.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.polynomial import Chebyshev

from .construct import Perturbation
from .core import DEFAULT_TOL, PI, CoefficientP, DomainError, NonConvergence, ToleranceConfig
from .quad import IntegralResult, improper_q_integral, integrate_finite, remainder_log_bound

_EPS = float(np.finfo(float).eps)
SWITCH_OFFSET = PI / 100
_CHEB_DEGREES = (32, 64)
_MAX_SPLIT_DEPTH = 10


@dataclass(frozen=True)
class _Panel:
    a: float
    b: float
    integ: Chebyshev  # antiderivative vanishing at a
    err: float

    @property
    def total(self) -> float:
        return float(self.integ(self.b))


def _cheb_panels(f, a: float, b: float, rel_tol: float, depth: int = 0) -> list[_Panel]:
    """Piecewise Chebyshev fit of f on [a, b], split until the trailing
    coefficients fall below rel_tol of the leading ones."""
    for deg in _CHEB_DEGREES:
        c = Chebyshev.interpolate(f, deg, domain=[a, b])
        coef = np.abs(c.coef)
        scale = coef.max() if coef.size else 0.0
        tail = coef[-3:].max()
        if scale == 0.0 or tail <= rel_tol * scale:
            # fit error is a few trailing coefficients; integrate over the width
            return [_Panel(a, b, c.integ(lbnd=a), 4 * tail * (b - a))]
    if depth >= _MAX_SPLIT_DEPTH:
        raise NonConvergence(f"Chebyshev fit of z/s^2 on [{a!r}, {b!r}] did not converge")
    mid = 0.5 * (a + b)
    return _cheb_panels(f, a, mid, rel_tol, depth + 1) + _cheb_panels(f, mid, b, rel_tol, depth + 1)


class SolutionModel:
    """Evaluates z and h for one (perturbation, p, tolerance) triple.

    Per-bump quantities are cached; once built they are only read.
    """

    def __init__(self, pert: Perturbation, p: CoefficientP, tol: ToleranceConfig | None = None):
        self.pert = pert
        self.p = p
        self.tol = tol or DEFAULT_TOL
        self.envelope_factor = math.exp(p.total)
        self._suffix: dict[int, IntegralResult] = {}
        self._panels: dict[int, list[_Panel]] = {}

    # local scales

    def ref(self, j: int) -> float:
        """Amplitude of q on bump j; the first constructed bump stands in
        for the zero extension region."""
        j = max(j, self.pert.first_bump)
        return self.pert.bump_amp(j)

    def scale_at(self, s: float) -> float:
        r = self.ref(self.pert.switch.bump_of(s))
        return r if r > 0 else 1.0

    def _check(self, s: float):
        if s < self.pert.params.s0:
            raise DomainError(f"s={s!r} is left of s0={self.pert.params.s0!r}")

    # z

    def _suffix_from(self, j: int) -> IntegralResult:
        """Weighted integral of q from a(j) to infinity."""
        if j not in self._suffix:
            self._suffix[j] = improper_q_integral(self.pert, self.p, j * PI, True, False, self.tol)
        return self._suffix[j]

    def z_with_error(self, s: float) -> tuple[float, float]:
        self._check(s)
        j = self.pert.switch.bump_of(s)
        nxt = self._suffix_from(j + 1)
        partial, perr = 0.0, 0.0
        log_amp = self.pert.bump_log_amp(j)
        if log_amp > -math.inf:
            amp = math.exp(log_amp)
            base = j * PI
            r = integrate_finite(lambda t: np.sin(t - base) ** 2 * self.p.weight(t),
                                 s, (j + 1) * PI, self.tol)
            partial, perr = self.pert.bump_sign(j) * amp * r.value, amp * r.abs_error_bound
        decay = math.exp(-float(self.p.cumulative(s)))
        value = decay * (partial + nxt.value)
        return float(value), float(decay * (perr + nxt.abs_error_bound + nxt.tail_bound))

    def z(self, s: float) -> float:
        return self.z_with_error(s)[0]

    # h

    def _bump_panels(self, j: int) -> list[_Panel]:
        if j not in self._panels:
            a, b = j * PI, (j + 1) * PI
            a = max(a, self.pert.params.s0)

            def g(t):
                return np.array([self.z(float(x)) for x in np.atleast_1d(t)]) / np.atleast_1d(t) ** 2

            self._panels[j] = _cheb_panels(g, a, b, self.tol.quad_rel_tol)
        return self._panels[j]

    def _bump_total(self, j: int) -> tuple[float, float]:
        panels = self._bump_panels(j)
        return math.fsum(pn.total for pn in panels), math.fsum(pn.err for pn in panels)

    def _z_tail_bound(self, j: int) -> float:
        """Bound on int_{a(j+1)}^inf |z| / t^2 using |z| <= E * int |q|."""
        lb = remainder_log_bound(self.pert, j)
        if lb == -math.inf:
            return 0.0
        return self.envelope_factor * math.exp(lb) / ((j + 1) * PI)

    def h_with_error(self, s: float) -> tuple[float, float]:
        self._check(s)
        j = self.pert.switch.bump_of(s)
        partial, err = 0.0, 0.0
        for pn in self._bump_panels(j):
            if pn.b <= s:
                continue
            lo = max(s, pn.a)
            partial += float(pn.integ(pn.b) - pn.integ(lo))
            err += pn.err
        pieces = [partial]
        target = self.tol.tail_rel_tol * self.ref(j) / ((j + 1) * PI) ** 2
        i = j
        while True:
            tail = self._z_tail_bound(i)
            if tail <= target:
                break
            if i - j > 400:
                raise NonConvergence(f"h({s!r}): outer tail {tail:.3e} not below {target:.3e}")
            i += 1
            v, e = self._bump_total(i)
            pieces.append(v)
            err += e
        integral = math.fsum(pieces)
        return float(-s * integral), float(s * (err + tail))

    def h(self, s: float) -> float:
        return self.h_with_error(s)[0]

    # envelopes

    def abs_q_tail(self, s: float) -> float:
        """Closed-form upper bound (exact up to the series remainder) for int_s^inf |q|."""
        j = self.pert.switch.bump_of(s)
        pert = self.pert
        part = 0.0
        if pert.bump_log_amp(j) > -math.inf:
            b = (j + 1) * PI
            part = pert.bump_amp(j) * ((b - s) / 2 + math.sin(2 * (s - j * PI)) / 4)
        last = max(j, pert.first_bump - 1) + 40
        whole = [pert.bump_amp(i) * PI / 2 for i in range(j + 1, last + 1)]
        lb = remainder_log_bound(pert, last)
        rem = math.exp(lb) if lb > -math.inf else 0.0
        return math.fsum([part, *whole]) + rem

    def z_envelope(self, s: float) -> float:
        return self.envelope_factor * self.abs_q_tail(s)

    def h_envelope(self, s: float) -> float:
        """s * int_s^inf z_envelope(t) / t^2 dt, with the decreasing envelope
        bounding the truncated part."""
        j = self.pert.switch.bump_of(s)
        pieces = []
        lo = s
        i = j
        target = self.tol.tail_rel_tol * self.ref(j) / ((j + 1) * PI) ** 2
        while True:
            hi = (i + 1) * PI
            f = np.vectorize(lambda t: self.z_envelope(float(t)) / t**2)
            pieces.append(integrate_finite(f, lo, hi, self.tol).value)
            tail = self.z_envelope(hi) / hi
            if tail <= target or tail == 0.0:
                break
            i += 1
            lo = hi
        return s * (math.fsum(pieces) + tail)

    # derivatives and residuals

    def _steps(self, s: float) -> tuple[float, float]:
        base = self.tol.fd_step_scale * max(1.0, abs(s))
        return base * _EPS ** (1 / 3), base * _EPS ** 0.25

    def residual_ode1(self, s: float) -> float:
        d1, _ = self._steps(s)
        self._check(s - d1)
        dz = (self.z(s + d1) - self.z(s - d1)) / (2 * d1)
        r = dz + float(self.p.eval(s)) * self.z(s) + float(self.pert(s))
        return r / self.scale_at(s)

    def residual_class0(self, s: float) -> float:
        d1, d2 = self._steps(s)
        self._check(s - d2)
        hm, h0, hp = self.h(s - d2), self.h(s), self.h(s + d2)
        ddh = (hp - 2 * h0 + hm) / d2**2
        dh = (self.h(s + d1) - self.h(s - d1)) / (2 * d1)
        r = ddh + float(self.p.eval(s)) * (dh - h0 / s) + float(self.pert(s)) / s
        return r / (self.scale_at(s) / s)

    def h_second_derivative(self, s: float) -> float:
        """Exact h'' = -(p z + q) / s."""
        return -(float(self.p.eval(s)) * self.z(s) + float(self.pert(s))) / s

    def h_second_derivative_defect(self, s: float) -> float:
        _, d2 = self._steps(s)
        ddh = (self.h(s + d2) - 2 * self.h(s) + self.h(s - d2)) / d2**2
        return (ddh - self.h_second_derivative(s)) / (self.scale_at(s) / s)

    def identity_defect(self, s: float) -> float:
        d1, _ = self._steps(s)
        self._check(s - d1)
        dw = (self.h(s + d1) / (s + d1) - self.h(s - d1) / (s - d1)) / (2 * d1)
        return (dw - self.z(s) / s**2) / (self.scale_at(s) / s**2)


@lru_cache(maxsize=32)
def get_model(pert: Perturbation, p: CoefficientP, tol: ToleranceConfig = DEFAULT_TOL) -> SolutionModel:
    return SolutionModel(pert, p, tol)


def eval_z(pert: Perturbation, p: CoefficientP, s: float, tol: ToleranceConfig | None = None) -> float:
    """z(s) straight from the integrating-factor formula."""
    r = improper_q_integral(pert, p, s, weighted=True, tol=tol)
    return math.exp(-float(p.cumulative(s))) * r.value


def eval_h(pert: Perturbation, p: CoefficientP, s: float, tol: ToleranceConfig | None = None) -> float:
    return get_model(pert, p, tol or DEFAULT_TOL).h(s)


def residual_ode1(pert, p, s, tol=None) -> float:
    """Scaled z' + p z + q at s (centred differences)."""
    return get_model(pert, p, tol or DEFAULT_TOL).residual_ode1(s)


def residual_class0(pert, p, s, tol=None) -> float:
    """Scaled h'' + p (h' - h/s) + q/s at s."""
    return get_model(pert, p, tol or DEFAULT_TOL).residual_class0(s)


def identity_h_over_s(pert, p, s, tol=None) -> float:
    """Scaled defect of d/ds (h/s) = z/s^2 at s."""
    return get_model(pert, p, tol or DEFAULT_TOL).identity_defect(s)


@dataclass(frozen=True)
class SignRecord:
    m: int
    z_at_a2m: float
    z_at_a2m1: float
    h_at_a2m: float
    h_at_a2m1: float
    errors: tuple[float, float, float, float]
    all_signs_ok: bool
    note: str = ""

    def as_dict(self) -> dict:
        return {
            "m": self.m,
            "z_at_a2m": self.z_at_a2m,
            "z_at_a2m1": self.z_at_a2m1,
            "h_at_a2m": self.h_at_a2m,
            "h_at_a2m1": self.h_at_a2m1,
            "errors": list(self.errors),
            "all_signs_ok": self.all_signs_ok,
            "note": self.note,
        }


def sign_certificates(pert, p, m_lo: int, m_hi: int, tol=None) -> list[SignRecord]:
    """z(a_2m) < 0 < z(a_2m+1) and h(a_2m) > 0 > h(a_2m+1), each accepted only
    when the value exceeds ten times its error bound."""
    model = get_model(pert, p, tol or DEFAULT_TOL)
    out = []
    for m in range(m_lo, m_hi + 1):
        if pert.underflows(m):
            out.append(SignRecord(m, math.nan, math.nan, math.nan, math.nan, (math.nan,) * 4, False,
                                  "PrecisionExhausted: amplitudes below 1e-300"))
            continue
        s0, s1 = 2 * m * PI, (2 * m + 1) * PI
        z0, ez0 = model.z_with_error(s0)
        z1, ez1 = model.z_with_error(s1)
        h0, eh0 = model.h_with_error(s0)
        h1, eh1 = model.h_with_error(s1)
        ok = bool(z0 < -10 * ez0) and (z1 > 10 * ez1) and (h0 > 10 * eh0) and (h1 < -10 * eh1)
        out.append(SignRecord(m, z0, z1, h0, h1, (ez0, ez1, eh0, eh1), ok))
    return out


@dataclass(frozen=True)
class DecayPoint:
    m: int
    s: float
    z_bound: float
    h_bound: float


def decay_envelope(pert, p, m_lo: int, m_hi: int, tol=None) -> list[DecayPoint]:
    """Rigorous bounds |z(s)| <= exp(int p) int_s^inf |q| and the induced
    bound on |h(s)|, at s = a_2m."""
    model = get_model(pert, p, tol or DEFAULT_TOL)
    out = []
    for m in range(m_lo, m_hi + 1):
        s = 2 * m * PI
        out.append(DecayPoint(m, s, model.z_envelope(s), model.h_envelope(s)))
    return out


@dataclass
class GridSample:
    s: float
    z: float
    h: float
    residual_ode1: float | None
    residual_class0: float | None
    identity_defect: float | None
    envelope: float
    switch_point: bool = False


CSV_COLUMNS = ("s", "z", "h", "residual_ode1", "residual_class0", "identity_defect", "envelope")


@dataclass
class SolutionGrid:
    samples: list[GridSample]
    sign_certificates: list[SignRecord]
    decay_envelope: list[DecayPoint]
    interior_sign_changes: dict[int, int] = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(x, name) for x in self.samples], dtype=float)


def grid_points(pert: Perturbation, m_lo: int, m_hi: int, points_per_bump: int = 64) -> list[tuple[float, bool]]:
    """Sample abscissae over [a(2 m_lo), a(2 m_hi + 2)]: bump midpoints of a
    uniform subdivision, every switch point, and the switch points shifted by
    +-pi/100. Returns (s, is_switch_point) pairs sorted by s."""
    pts: dict[float, bool] = {}
    s0 = pert.params.s0
    for j in range(2 * m_lo, 2 * m_hi + 2):
        base = j * PI
        for k in range(points_per_bump):
            pts[base + PI * (k + 0.5) / points_per_bump] = False
    for j in range(2 * m_lo, 2 * m_hi + 3):
        base = j * PI
        pts[base] = True
        for off in (-SWITCH_OFFSET, SWITCH_OFFSET):
            if base + off > s0 + SWITCH_OFFSET / 2 and base + off < (2 * m_hi + 2) * PI:
                pts[base + off] = False
    return sorted(pts.items())


def solve_grid(pert, p, m_lo: int, m_hi: int, tol=None, points_per_bump: int = 64) -> SolutionGrid:
    tol = tol or DEFAULT_TOL
    model = get_model(pert, p, tol)
    samples = []
    for s, is_switch in grid_points(pert, m_lo, m_hi, points_per_bump):
        z, h = model.z(s), model.h(s)
        if is_switch:
            r1 = r2 = dfct = None
        else:
            r1, r2, dfct = model.residual_ode1(s), model.residual_class0(s), model.identity_defect(s)
        samples.append(GridSample(s, z, h, r1, r2, dfct, model.z_envelope(s), is_switch))

    changes: dict[int, int] = {}
    for j in range(2 * m_lo, 2 * m_hi + 2):
        zs = [x.z for x in samples if j * PI < x.s < (j + 1) * PI and not x.switch_point]
        signs = np.sign(zs)
        changes[j] = int(np.count_nonzero(signs[1:] * signs[:-1] < 0))

    return SolutionGrid(
        samples,
        sign_certificates(pert, p, m_lo, m_hi, tol),
        decay_envelope(pert, p, m_lo, m_hi, tol),
        changes,
    )
