import pytest

from induced_osc import ExampleParams, Perturbation
from induced_osc.core import PI, ZeroCoefficient, coefficient_inverse_square

BASELINE = dict(alpha=200.0, beta=1.0, epsilon=2.5e-5, s0=PI)


@pytest.fixture(scope="session")
def baseline_params():
    return ExampleParams(**BASELINE)


@pytest.fixture(scope="session")
def baseline_pert(baseline_params):
    return Perturbation(baseline_params)


@pytest.fixture(scope="session")
def null_pert(baseline_params):
    return Perturbation(baseline_params, null=True)


@pytest.fixture(scope="session")
def p_invsq():
    return coefficient_inverse_square(0.1, PI)


@pytest.fixture(scope="session")
def p_zero():
    return ZeroCoefficient(PI)


# --- acceptance summary ---------------------------------------------------------

ACCEPTANCE_RESULTS: dict[str, tuple[bool, str]] = {}


@pytest.fixture
def criterion(request):
    """Record a named criterion outcome; the line is printed in the summary."""

    def record(label: str, ok: bool, detail: str = ""):
        ACCEPTANCE_RESULTS[label] = (bool(ok), detail)
        print(f"{label}: {'PASS' if ok else 'FAIL'} {detail}")
        assert ok, f"{label}: {detail}"

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for label, (ok, detail) in ACCEPTANCE_RESULTS.items():
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {label}  {detail}")
