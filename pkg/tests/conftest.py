import os
import sys
import random
from fractions import Fraction

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=50,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def rng():
    return random.Random(20240611)


def random_fraction(rng, lo=1, hi=99):
    return Fraction(rng.randint(lo, hi), rng.randint(lo, hi))


@pytest.fixture
def outdir(tmp_path, monkeypatch):
    monkeypatch.setenv("FSALPAIRS_OUTPUT_DIR", str(tmp_path))
    return tmp_path


CONVERGENCE_STEPS = [2.0 ** -k for k in range(4, 10)]


def a3_slopes(pair, coefficients=None, tend=5):
    """Fitted log-log slopes of the worst global error on ``y' = y cos t``.

    Returns ``(slope_b, slope_embedded)`` over ``h = 2^-4 .. 2^-9``.
    """
    import gmpy2
    import numpy as np

    from fsalpairs.integrate import fixed_step_errors

    rhs = lambda t, x: [x[0] * gmpy2.cos(t)]  # noqa: E731
    exact = lambda t: [gmpy2.exp(gmpy2.sin(t))]  # noqa: E731
    errs = [fixed_step_errors(pair, rhs, exact, 0, tend, round(tend / h), coefficients=coefficients)
            for h in CONVERGENCE_STEPS]
    logh = np.log(CONVERGENCE_STEPS)
    return tuple(float(np.polyfit(logh, np.log([e[w] for e in errs]), 1)[0]) for w in (0, 1))


def refined_tsit5():
    """tsit5 rebuilt in exact arithmetic from its decimal nodes."""
    from fsalpairs.derive import GeneralParams, derive, params_of, solve_bprime
    from fsalpairs.library import builtin

    stored = builtin("tsit5")
    fixed = dict(c2=Fraction("0.161"), c3=Fraction("0.327"), c4=Fraction("0.9"),
                 c5=Fraction("0.9800255409045097"))
    cp3 = Fraction(float(params_of(stored).cp3))
    root = solve_bprime(fixed, "cp3", (cp3 - Fraction(1, 10**6), cp3 + Fraction(1, 10**6)))
    return derive(GeneralParams.make(*fixed.values(), 1, root.value), name="tsit5-exact")


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.report_lines():
        terminalreporter.write_line(line)
