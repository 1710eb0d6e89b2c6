import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from induced_osc.construct import Perturbation
from induced_osc.core import PI, DomainError, ExampleParams, ToleranceConfig, ZeroCoefficient
from induced_osc.solve import (
    CSV_COLUMNS,
    SolutionModel,
    decay_envelope,
    eval_h,
    eval_z,
    get_model,
    grid_points,
    identity_h_over_s,
    residual_class0,
    residual_ode1,
    sign_certificates,
    solve_grid,
)

BASE = ExampleParams(200.0, 1.0, 2.5e-5, PI)
PERT = Perturbation(BASE)


def z_closed_form(s, pert=PERT):
    """int_s^inf q for p = 0: partial bump plus whole bumps, exact."""
    j = math.floor(s / PI)
    x = s - j * PI
    part = (PI - x) / 2 + math.sin(2 * x) / 4
    total = pert.bump_sign(j) * pert.bump_amp(j) * part
    total += math.fsum(pert.bump_sign(k) * pert.bump_amp(k) * PI / 2 for k in range(j + 1, j + 30))
    return total


def test_z_examples(p_zero):
    assert eval_z(PERT, p_zero, 2 * PI) == pytest.approx(-7.8147e-3, rel=1e-4)
    assert eval_z(PERT, p_zero, 3 * PI) == pytest.approx(3.927e-5, rel=1e-4)


@given(s=st.floats(PI, 11 * PI))
@settings(max_examples=60, deadline=None)
def test_z_matches_closed_form_without_p(s):
    model = get_model(PERT, ZeroCoefficient(PI))
    z, err = model.z_with_error(s)
    exact = z_closed_form(s)
    scale = model.scale_at(s)
    assert abs(z - exact) <= err + 1e-10 * scale
    assert abs(eval_z(PERT, ZeroCoefficient(PI), s) - exact) <= 1e-10 * scale


@pytest.mark.parametrize("s", [2 * PI, 2.3 * PI, 3 * PI, 3.7 * PI, 4.5 * PI, 6.1 * PI])
def test_z_matches_scipy_with_p(p_invsq, s):
    from scipy.integrate import quad

    def integrand(t):
        return float(PERT(t)) * math.exp(float(p_invsq.cumulative(t)))

    total = 0.0
    for j in range(math.floor(s / PI), 14):
        v, _ = quad(integrand, max(s, j * PI), (j + 1) * PI, epsabs=0, epsrel=1e-13)
        total += v
    ref = math.exp(-float(p_invsq.cumulative(s))) * total
    model = get_model(PERT, p_invsq)
    assert model.z(s) == pytest.approx(ref, rel=1e-10)
    assert eval_z(PERT, p_invsq, s) == pytest.approx(ref, rel=1e-10)


@pytest.mark.parametrize("s", [2 * PI, 2.5 * PI, 3 * PI, 3.5 * PI, 4 * PI, 5 * PI])
def test_h_matches_scipy_without_p(p_zero, s):
    from scipy.integrate import quad

    total = 0.0
    for j in range(math.floor(s / PI), 12):
        v, _ = quad(lambda t: z_closed_form(t) / t**2, max(s, j * PI), (j + 1) * PI,
                    epsabs=0, epsrel=1e-12, limit=200)
        total += v
    ref = -s * total
    h, err = get_model(PERT, p_zero).h_with_error(s)
    scale = get_model(PERT, p_zero).scale_at(s)
    assert abs(h - ref) <= err + 1e-9 * scale
    assert eval_h(PERT, p_zero, s) == h


def test_h_signs(p_invsq):
    assert eval_h(PERT, p_invsq, 2 * PI) > 0
    assert eval_h(PERT, p_invsq, 3 * PI) < 0


def test_degenerate_null(p_invsq):
    null = Perturbation(BASE, null=True)
    for s in (PI, 2 * PI, 2.5 * PI, 7.3 * PI):
        assert eval_z(null, p_invsq, s) == 0.0
        assert eval_h(null, p_invsq, s) == 0.0
    for s in (2.5 * PI, 5.2 * PI):
        assert residual_ode1(null, ZeroCoefficient(PI), s) == 0.0
        assert residual_class0(null, p_invsq, s) == 0.0
        assert identity_h_over_s(null, p_invsq, s) == 0.0
    assert all(d.z_bound == 0.0 and d.h_bound == 0.0 for d in decay_envelope(null, p_invsq, 1, 4))


def test_domain(p_invsq):
    with pytest.raises(DomainError):
        eval_z(PERT, p_invsq, 2.0)
    with pytest.raises(DomainError):
        eval_h(PERT, p_invsq, 2.0)


@pytest.mark.parametrize("p_name", ["p_zero", "p_invsq"])
def test_residuals_at_bump_midpoint(request, p_name):
    p = request.getfixturevalue(p_name)
    s = 2.5 * PI
    assert abs(residual_ode1(PERT, p, s)) < 1e-6
    assert abs(residual_class0(PERT, p, s)) < 1e-5
    assert abs(identity_h_over_s(PERT, p, s)) < 1e-6


def test_residual_sweep(p_invsq):
    model = get_model(PERT, p_invsq)
    for m in range(1, 5):
        for j in (2 * m, 2 * m + 1):
            for s in j * PI + PI * (np.arange(100) + 0.5) / 100:
                assert abs(model.residual_ode1(s)) < 1e-6


def test_class0_and_exact_second_derivative(p_invsq):
    model = get_model(PERT, p_invsq)
    for s in np.linspace(2.05 * PI, 5.95 * PI, 40):
        assert abs(model.residual_class0(s)) < 1e-5
        assert abs(model.h_second_derivative_defect(s)) < 1e-5


def test_identity_sweep(p_invsq):
    model = get_model(PERT, p_invsq)
    pts = np.linspace(2 * PI, 6 * PI, 52)[1:-1]
    assert max(abs(model.identity_defect(s)) for s in pts) < 1e-6


def test_sign_certificates_baseline(p_invsq):
    recs = sign_certificates(PERT, p_invsq, 1, 5)
    assert [r.m for r in recs] == [1, 2, 3, 4, 5]
    for r in recs:
        assert r.all_signs_ok
        assert r.z_at_a2m < 0 < r.z_at_a2m1
        assert r.h_at_a2m > 0 > r.h_at_a2m1
        assert abs(r.z_at_a2m) > 10 * r.errors[0]


def test_sign_certificates_underflow(p_invsq):
    (r,) = sign_certificates(PERT, p_invsq, 10, 10)
    assert not r.all_signs_ok
    assert "PrecisionExhausted" in r.note


def test_sign_certificates_uncertified_params(p_invsq):
    pert = Perturbation(ExampleParams(200.0, 1.0, 0.3, PI))
    recs = sign_certificates(pert, p_invsq, 1, 2)
    assert len(recs) == 2


def test_decay_envelope_examples(p_invsq):
    env = decay_envelope(PERT, p_invsq, 1, 6)
    c1, d1 = PERT.c(1), PERT.d(1)
    first = math.exp(0.1 / PI) * PI / 2 * (c1 + d1 + PERT.c(2) + PERT.d(2))
    assert env[0].z_bound == pytest.approx(first, rel=1e-12)
    assert env[1].z_bound / env[0].z_bound == pytest.approx(PERT.c(2) / (c1 + d1), rel=1e-3)
    zs = [e.z_bound for e in env]
    assert all(b < a for a, b in zip(zs, zs[1:]))
    hs = [e.h_bound for e in env]
    assert all(b < a for a, b in zip(hs, hs[1:]))


@given(s=st.floats(2 * PI, 12 * PI))
@settings(max_examples=40, deadline=None)
def test_z_below_envelope(s):
    from induced_osc.core import coefficient_inverse_square

    model = get_model(PERT, coefficient_inverse_square(0.1, PI))
    assert abs(model.z(s)) <= model.z_envelope(s)


def test_h_below_envelope(p_invsq):
    model = get_model(PERT, p_invsq)
    for m in range(1, 6):
        s = 2 * m * PI
        assert abs(model.h(s)) <= model.h_envelope(s)


def test_grid_layout():
    pts = grid_points(PERT, 1, 2, points_per_bump=8)
    s = [x for x, _ in pts]
    assert s == sorted(s)
    switch = [x for x, flag in pts if flag]
    assert switch == pytest.approx([j * PI for j in range(2, 7)])
    assert 2 * PI + PI / 100 in s and 3 * PI - PI / 100 in s


def test_solve_grid(p_invsq):
    grid = solve_grid(PERT, p_invsq, 1, 2, points_per_bump=16)
    assert all(x.s >= PI for x in grid.samples)
    for x in grid.samples:
        if x.switch_point:
            assert x.residual_ode1 is None
        else:
            assert abs(x.residual_ode1) < 1e-6
            assert abs(x.residual_class0) < 1e-5
            assert abs(x.identity_defect) < 1e-6
        assert abs(x.z) <= x.envelope
    assert set(CSV_COLUMNS) <= set(vars(grid.samples[0]))
    assert sorted(grid.interior_sign_changes) == [2, 3, 4, 5]
    assert all(sc.all_signs_ok for sc in grid.sign_certificates)


def test_model_tolerance_scaling(p_invsq):
    loose = SolutionModel(PERT, p_invsq, ToleranceConfig(quad_rel_tol=1e-7, tail_rel_tol=1e-9))
    tight = get_model(PERT, p_invsq)
    for s in (2.2 * PI, 3.4 * PI):
        assert loose.h(s) == pytest.approx(tight.h(s), rel=1e-6)
