"""Acceptance criteria, one test (or sub-test) per criterion at its stated tolerance.

Each test records a PASS/FAIL line that is repeated in the pytest summary.
"""

import json
import math
import time

import numpy as np
import pytest

from induced_osc.certify import check_exponential_estimates, check_lemma2_13, compute_m0
from induced_osc.cli import json_data_body, main
from induced_osc.construct import Perturbation, check_lemma3, epsilon_zero, moment_closed_form
from induced_osc.core import PI, ExampleParams, ZeroCoefficient, coefficient_inverse_square, find_violations
from induced_osc.quad import integrate_finite
from induced_osc.solve import decay_envelope, get_model, sign_certificates, solve_grid

pytestmark = pytest.mark.acceptance

GOLDEN = ExampleParams(200.0, 1.0, 2.5e-5, PI)
GOLDEN_P = coefficient_inverse_square(0.1, PI)


def test_1_golden_certify(criterion, tmp_path, capsys):
    out = tmp_path / "golden.json"
    t0 = time.perf_counter()
    code = main(["certify", "--alpha", "200", "--beta", "1", "--epsilon", "2.5e-5", "--s0", repr(PI),
                 "--p", "invsq:0.1", "--m-lo", "1", "--m-hi", "6", "--out", str(out)])
    elapsed = time.perf_counter() - t0
    capsys.readouterr()
    doc = json.loads(out.read_text())
    margins = [r[k] for r in doc["per_m"] for k in r if k.startswith("margin_")]
    ok = (code == 0 and doc["verdict"]["status"] == "certified" and len(doc["per_m"]) == 6
          and all(v is not None and v > 1e-3 for v in margins) and elapsed < 30)
    criterion("criterion 1", ok, f"verdict={doc['verdict']['status']} min_margin={min(margins):.4g} "
                                 f"runtime={elapsed:.2f}s exit={code}")


def test_2_oracle_equivalence(criterion):
    pert = Perturbation(GOLDEN)
    worst = 0.0
    for m in range(1, 7):
        for kind, j in (("negative", 2 * m), ("positive", 2 * m + 1)):
            lo, hi = j * PI, (j + 1) * PI
            ls = pert.bump_log_amp(j)
            amp = math.exp(ls)
            mass = amp * integrate_finite(lambda s: np.abs(pert.scaled(s, ls)), lo, hi).value
            first = amp * integrate_finite(lambda s: (s - lo) * np.abs(pert.scaled(s, ls)), lo, hi).value
            for val, order in ((mass, "mass"), (first, "first")):
                exact = moment_closed_form(pert, m, kind, order)
                worst = max(worst, abs(val - exact) / exact)
    criterion("criterion 2", worst < 1e-9, f"max relative error={worst:.3e}")


def test_3_dominance_brute_force(criterion):
    holds = {C: all(r.holds for r in check_lemma3(C, 0.9 * epsilon_zero(C), 10)) for C in (0.01, 0.1, 1.0)}
    fail_case = check_lemma3(0.01, 0.33, 1)[0]
    ok = all(holds.values()) and not fail_case.holds
    criterion("criterion 3", ok, f"below threshold={holds} C=0.01,eps=0.33 margin={fail_case.scaled_margin:.4g}")


def test_4_sign_alternation(criterion):
    pert = Perturbation(GOLDEN)
    m_lo = max(compute_m0(GOLDEN_P), pert.m1)
    recs = sign_certificates(pert, GOLDEN_P, m_lo, 5)
    ok = len(recs) == 5 - m_lo + 1 and all(
        r.all_signs_ok and r.z_at_a2m < 0 < r.z_at_a2m1 and r.h_at_a2m > 0 > r.h_at_a2m1
        and min(abs(v) / max(e, 1e-300) for v, e in
                zip((r.z_at_a2m, r.z_at_a2m1, r.h_at_a2m, r.h_at_a2m1), r.errors)) > 10
        for r in recs)
    criterion("criterion 4", ok, f"m={m_lo}..5 all four signs certified={ok}")


@pytest.fixture(scope="module")
def golden_grid():
    return solve_grid(Perturbation(GOLDEN), GOLDEN_P, 1, 4, points_per_bump=64)


def test_5_residuals(criterion, golden_grid):
    inner = [x for x in golden_grid.samples if not x.switch_point]
    r1 = max(abs(x.residual_ode1) for x in inner)
    r2 = max(abs(x.residual_class0) for x in inner)
    r3 = max(abs(x.identity_defect) for x in inner)
    ok = r1 < 1e-6 and r2 < 1e-5 and r3 < 1e-6 and len(inner) >= 64 * 8
    criterion("criterion 5", ok, f"max scaled ode1={r1:.2e} class0={r2:.2e} identity={r3:.2e} "
                                 f"samples={len(inner)}")


def test_6_decay(criterion, golden_grid):
    pert = Perturbation(GOLDEN)
    env = [d.z_bound for d in decay_envelope(pert, GOLDEN_P, 1, 6)]
    decreasing = all(b < a for a, b in zip(env, env[1:]))
    ratio = env[-1] / env[0]
    below = all(abs(x.z) <= x.envelope for x in golden_grid.samples)
    model = get_model(pert, GOLDEN_P)
    hs = [abs(model.h(2 * m * PI)) for m in range(1, 7)]
    h_decreasing = all(b < a for a, b in zip(hs, hs[1:]))
    h_below = all(abs(model.h(2 * m * PI)) <= model.h_envelope(2 * m * PI) for m in range(1, 7))
    ok = decreasing and ratio < 1e-10 and below and h_decreasing and h_below
    criterion("criterion 6", ok, f"envelope ratio a12/a2={ratio:.3e} strictly decreasing={decreasing} "
                                 f"|z|<=envelope={below} |h(a_2m)| decreasing={h_decreasing}")


@pytest.mark.parametrize("p", [ZeroCoefficient(PI), GOLDEN_P], ids=["zero", "invsq0.1"])
def test_7_exponential_estimates(criterion, p):
    pert = Perturbation(GOLDEN)
    m0 = compute_m0(p)
    est = [check_exponential_estimates(pert, p, m) for m in range(m0, m0 + 11)]
    lo = min(min(e.margin_est11, e.margin_est12) for e in est)
    criterion(f"criterion 7 ({p.spec()})", lo > 0, f"m={m0}..{m0 + 10} min margin={lo:.4g}")


def test_8a_ratio_violation_fails_weighted_moment(criterion):
    pert = Perturbation(ExampleParams(100.0, 1.0, 2.5e-5, PI))
    margin = check_lemma2_13(pert, 1).margin
    criterion("criterion 8a", margin < 0, f"alpha=100 check_lemma2_13(m=1) scaled margin={margin:.6g}")


def test_8b_ratio_violation_report(criterion, tmp_path, capsys):
    out = tmp_path / "ratio.json"
    code = main(["certify", "--alpha", "100", "--out", str(out)])
    capsys.readouterr()
    doc = json.loads(out.read_text())
    complete = len(doc["per_m"]) == 6 and all("margin_13" in r for r in doc["per_m"])
    named = "RatioViolation" in doc["verdict"]["failures"]
    ok = code != 0 and complete and named and doc["verdict"]["status"] == "failed"
    criterion("criterion 8b", ok, f"alpha=100 exit={code} verdict={doc['verdict']['status']} complete={complete}")


def test_8c_eps_admissibility(criterion, tmp_path, capsys):
    params = ExampleParams(200.0, 1.0, 1e-4, PI)
    codes = [v.code for v in find_violations(params, GOLDEN_P)]
    out = tmp_path / "eps.json"
    code = main(["certify", "--epsilon", "1e-4", "--out", str(out)])
    capsys.readouterr()
    doc = json.loads(out.read_text())
    ok = ("EpsilonTooLarge" in codes and code != 0 and len(doc["per_m"]) == 6
          and "EpsilonTooLarge" in doc["verdict"]["failures"])
    criterion("criterion 8c", ok, f"eps=1e-4 violations={codes} exit={code}")


def test_9_determinism(criterion, tmp_path, capsys):
    cfg = tmp_path / "golden.cfg"
    cfg.write_text("alpha = 200\nbeta = 1\nepsilon = 2.5e-5\np = invsq:0.1\nm_hi = 6\n")
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    main(["certify", "--config", str(cfg), "--out", str(a)])
    main(["certify", "--config", str(cfg), "--out", str(b)])
    same = json_data_body(a.read_text()).encode() == json_data_body(b.read_text()).encode()
    code = main(["certify", "--config", str(cfg), "--out", str(tmp_path / "c.json"), "--compare", str(a)])
    capsys.readouterr()
    criterion("criterion 9", same and code == 0, f"byte-identical data body={same} --compare exit={code}")
