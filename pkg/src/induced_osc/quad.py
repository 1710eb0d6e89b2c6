"""Quadrature for the piecewise perturbation.

Finite integrals use a globally adaptive Gauss-Legendre scheme (16/32-point
pairs per panel) whose initial panels are cut at multiples of pi, so no panel
ever straddles a switch point. Improper integrals are summed bump by bump and
truncated once a rigorous series bound on the discarded bumps is small enough.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable

import numpy as np

from .core import DEFAULT_TOL, PI, CoefficientP, DomainError, NonConvergence, ToleranceConfig

if TYPE_CHECKING:
    from .construct import Perturbation

_X16, _W16 = np.polynomial.legendre.leggauss(16)
_X32, _W32 = np.polynomial.legendre.leggauss(32)
_EPS = float(np.finfo(float).eps)
MAX_PANELS = 4000
MAX_BUMPS = 400


@dataclass(frozen=True)
class IntegralResult:
    value: float
    abs_error_bound: float
    tail_bound: float = 0.0

    @property
    def total_error(self) -> float:
        return self.abs_error_bound + self.tail_bound


def _panel(f, a, b):
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    f_hi = np.asarray(f(mid + half * _X32), dtype=float)
    f_lo = np.asarray(f(mid + half * _X16), dtype=float)
    v_hi = half * float(_W32 @ f_hi)
    v_lo = half * float(_W16 @ f_lo)
    mass = half * float(_W32 @ np.abs(f_hi))
    return v_hi, abs(v_hi - v_lo), mass


def _pi_breakpoints(a: float, b: float) -> list[float]:
    k_lo = math.floor(a / PI) + 1
    k_hi = math.ceil(b / PI) - 1
    inner = [k * PI for k in range(k_lo, k_hi + 1) if a < k * PI < b]
    return [a, *inner, b]


def integrate_finite(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    tol: ToleranceConfig | None = None,
    *,
    max_panels: int = MAX_PANELS,
) -> IntegralResult:
    """Integrate a vectorised ``f`` over [a, b].

    Panels are refined (largest error first) until the summed error estimate
    falls below ``quad_rel_tol`` relative to the result, or below the
    rounding floor set by the integral of ``|f|``.
    """
    tol = tol or DEFAULT_TOL
    if b < a:
        raise ValueError("integrate_finite requires a <= b")
    if a == b:
        return IntegralResult(0.0, 0.0)

    heap = []
    knots = _pi_breakpoints(a, b)
    for lo, hi in zip(knots[:-1], knots[1:]):
        v, e, mass = _panel(f, lo, hi)
        heapq.heappush(heap, (-e, lo, hi, v, mass))

    while True:
        value = math.fsum(item[3] for item in heap)
        err = math.fsum(-item[0] for item in heap)
        mass = math.fsum(item[4] for item in heap)
        floor = 50 * _EPS * mass
        if err <= max(tol.quad_rel_tol * abs(value), floor) or mass == 0.0:
            return IntegralResult(value, max(err, floor))
        if len(heap) >= max_panels:
            raise NonConvergence(
                f"integrate_finite on [{a!r}, {b!r}]: error {err:.3e} after {len(heap)} panels"
            )
        _, lo, hi, _, _ = heapq.heappop(heap)
        mid = 0.5 * (lo + hi)
        for l2, h2 in ((lo, mid), (mid, hi)):
            v, e, m = _panel(f, l2, h2)
            heapq.heappush(heap, (-e, l2, h2, v, m))


def log_series_tail_bound(epsilon: float, K: int) -> float:
    """Natural log of :func:`series_tail_bound`; -inf when the bound is zero."""
    if not (0 < epsilon < 1) or K < 1:
        raise ValueError("need 0 < epsilon < 1 and K >= 1")
    le = math.log(epsilon)
    log_r = (2 * K + 1) * le
    r = math.exp(log_r)
    one_minus_r = -math.expm1(log_r)
    bracket = K * r / one_minus_r + r / one_minus_r**2
    if bracket == 0.0:
        # r underflowed; fall back to the log of the leading term
        return K * K * le + log_r + math.log(K + 1) - 2 * math.log1p(-r)
    return K * K * le + math.log(bracket)


def series_tail_bound(epsilon: float, K: int) -> float:
    """Upper bound for sum_{k > K} k * epsilon**(k**2).

    Uses k**2 >= K**2 + (2K + 1)(k - K), which turns the tail into an
    arithmetico-geometric series with ratio epsilon**(2K + 1).
    """
    return math.exp(log_series_tail_bound(epsilon, K))


def remainder_log_bound(pert: "Perturbation", j: int, log_scale: float = 0.0) -> float:
    """Log of an upper bound on the integral of |q| over all bumps after bump j,
    divided by exp(log_scale)."""
    params = pert.params
    if pert.null:
        return -math.inf
    K = max(j // 2, pert.m1 - 1, 0)
    terms = []
    if K >= 1:
        terms.append(math.log(params.alpha + params.beta) + log_series_tail_bound(params.epsilon, K))
    else:
        # whole series from k = 1: sum k eps^{k^2} <= eps + bound(eps, 1)
        terms.append(math.log(params.alpha + params.beta)
                     + math.log(params.epsilon + series_tail_bound(params.epsilon, 1)))
    if j % 2 == 0 and j >= pert.first_bump:
        terms.append(pert.bump_log_amp(j + 1))
    top = max(terms)
    if top == -math.inf:
        return top
    return math.log(PI / 2) + top + math.log(sum(math.exp(t - top) for t in terms)) - log_scale


def improper_q_integral(
    pert: "Perturbation",
    p: CoefficientP,
    s: float,
    weighted: bool = True,
    absolute: bool = False,
    tol: ToleranceConfig | None = None,
    *,
    log_scale: float = 0.0,
    last_bump: int | None = None,
) -> IntegralResult:
    """Integral of q (or |q|) times exp(P) (if ``weighted``) over [s, inf).

    The result is divided by ``exp(log_scale)``; pass the log of a local
    amplitude to keep tiny values at O(1). Bumps are integrated one at a time
    with the amplitude factored out. Summation stops after the first bump
    whose rigorous remainder bound drops below ``tail_rel_tol`` relative to
    max(|value|, first local amplitude), or at ``last_bump`` when given.
    """
    tol = tol or DEFAULT_TOL
    if s < pert.params.s0:
        raise DomainError(f"s={s!r} is left of s0={pert.params.s0!r}")

    log_envelope = p.total if weighted else 0.0
    j = max(pert.switch.bump_of(s), pert.first_bump - 1)
    start = s
    pieces, errs = [], []
    ref = None
    n = 0
    while True:
        lo, hi = max(start, j * PI), (j + 1) * PI
        log_amp = pert.bump_log_amp(j) - log_scale
        if log_amp > -math.inf and hi > lo:
            amp = math.exp(log_amp)
            sign = 1.0 if absolute else float(pert.bump_sign(j))
            if ref is None:
                ref = amp
            base = j * PI

            if weighted:
                def g(t, base=base):
                    return np.sin(t - base) ** 2 * p.weight(t)
            else:
                def g(t, base=base):
                    return np.sin(t - base) ** 2

            r = integrate_finite(g, lo, hi, tol)
            pieces.append(sign * amp * r.value)
            errs.append(amp * r.abs_error_bound)

        rem_log = remainder_log_bound(pert, j, log_scale) + log_envelope
        rem = math.exp(rem_log) if rem_log > -math.inf else 0.0
        value = math.fsum(pieces)
        n += 1
        if last_bump is not None:
            if j >= last_bump:
                break
        elif rem == 0.0 or rem <= tol.tail_rel_tol * max(abs(value), ref or 0.0):
            break
        if n > MAX_BUMPS:
            raise NonConvergence(f"improper integral from s={s!r}: remainder {rem:.3e} after {n} bumps")
        j += 1

    return IntegralResult(math.fsum(pieces), math.fsum(errs), rem)
