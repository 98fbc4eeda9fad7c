import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from fsalpairs.integrate import ControllerConfig, integrate_adaptive
from fsalpairs.library import builtin
from fsalpairs.problems import (
    ENDPOINT_ON_MASK, MAX_ALONG_TRAJECTORY, PROBLEMS, ReferenceUnavailableError,
    generate_reference, kepler_anomaly, measure_error, problem, reference_solution,
    two_body_energy,
)


def scipy_solution(prob, t_eval=None):
    sol = solve_ivp(prob.system.rhs, (prob.t0, prob.tend), prob.x0, method="DOP853",
                    rtol=1e-13, atol=1e-14, t_eval=t_eval)
    assert sol.success
    return sol


@pytest.mark.parametrize("pid, dim, mask, rule", [
    ("A3", 1, (0,), MAX_ALONG_TRAJECTORY),
    ("A4", 1, (0,), MAX_ALONG_TRAJECTORY),
    ("D5", 4, (0, 1, 2, 3), MAX_ALONG_TRAJECTORY),
    ("PLEI", 28, tuple(range(14)), ENDPOINT_ON_MASK),
])
def test_problem_shapes(pid, dim, mask, rule):
    prob = problem(pid.lower())
    assert prob.id == pid and prob.dimension == dim == prob.x0.size
    assert prob.mask == mask and prob.error_rule == rule
    assert prob.system.rhs(prob.t0, prob.x0).shape == (dim,)


def test_unknown_problem():
    with pytest.raises(KeyError):
        problem("B1")
    assert PROBLEMS == ("A3", "A4", "D5", "PLEI")


@pytest.mark.parametrize("pid", ["A3", "A4", "D5"])
def test_closed_forms_match_independent_solver(pid):
    prob = problem(pid)
    ts = np.linspace(prob.t0, prob.tend, 41)
    sol = scipy_solution(prob, ts)
    exact = np.array([prob.exact(t) for t in ts]).T
    assert np.max(np.abs(sol.y - exact)) < 1e-9
    assert np.allclose(prob.exact(prob.t0), prob.x0, rtol=0, atol=1e-15)


@pytest.mark.parametrize("pid", ["A3", "A4", "D5"])
def test_closed_forms_satisfy_the_equation(pid):
    prob = problem(pid)
    for t in np.linspace(0.3, 19.7, 15):
        dt = 1e-5
        deriv = (prob.exact(t + dt) - prob.exact(t - dt)) / (2 * dt)
        assert np.allclose(deriv, prob.system.rhs(t, prob.exact(t)), rtol=1e-7, atol=1e-7)


def test_kepler_anomaly():
    e = 0.9
    for t in [0.0, 0.1, 1.0, math.pi, 5.0, 13.7, 20.0, -3.0]:
        E = kepler_anomaly(t, e)
        assert E - e * math.sin(E) == pytest.approx(t, abs=1e-13)
    assert kepler_anomaly(2 * math.pi) == pytest.approx(2 * math.pi, abs=1e-14)


def test_d5_energy_conserved():
    prob = problem("D5")
    st = integrate_adaptive(builtin("aprime"), prob.system, prob.t0, prob.tend, prob.x0,
                            ControllerConfig(atol=1e-10))
    e0 = two_body_energy(prob.x0)
    assert e0 == pytest.approx(-0.5)
    drift = max(abs(two_body_energy(x) - e0) for x in st.xs)
    assert drift < 1e-6


def test_plei_reference_matches_independent_solver():
    prob = problem("PLEI")
    sol = scipy_solution(prob)
    ref = reference_solution(prob, prob.tend)
    mask = list(prob.mask)
    assert np.max(np.abs(sol.y[:, -1][mask] - ref[mask])) < 1e-10


@pytest.mark.slow
def test_plei_reference_regenerates():
    prob = problem("PLEI")
    fresh = generate_reference(prob, "tsit5", atol=1e-12)
    ref = reference_solution(prob, prob.tend)
    mask = list(prob.mask)
    assert np.max(np.abs(fresh[mask] - ref[mask])) < 1e-9


def test_reference_disagreement_raises():
    prob = problem("PLEI")
    with pytest.raises(ReferenceUnavailableError):
        generate_reference(prob, "dopri", atol=1e-3)


def test_reference_solution_domain():
    a3, plei = problem("A3"), problem("PLEI")
    with pytest.raises(ValueError):
        reference_solution(a3, 21.0)
    with pytest.raises(ValueError):
        reference_solution(plei, 1.0)
    assert np.array_equal(reference_solution(plei, 0.0), plei.x0)
    assert reference_solution(a3, 0.5)[0] == math.exp(math.sin(0.5))


def test_measure_error_rules():
    a3 = problem("A3")
    ts = np.array([0.0, 1.0, 2.0])
    xs = np.array([a3.exact(t) for t in ts])
    assert measure_error(a3, ts, xs) == 0.0
    xs[1] += 1e-3
    assert measure_error(a3, ts, xs) == pytest.approx(1e-3)
    plei = problem("PLEI")
    end = reference_solution(plei, plei.tend).copy()
    end[20] += 1.0  # velocities are not measured
    end[3] += 3e-4
    end[10] += 4e-4
    assert measure_error(plei, [plei.tend], [end]) == pytest.approx(5e-4)
