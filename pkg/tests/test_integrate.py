import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import a3_slopes, refined_tsit5
from fsalpairs.analyze import residuals, stability
from fsalpairs.integrate import (
    PURE_PYTHON_ENV, CapabilityError, ControllerConfig, IntegrationError, compiled_available,
    dense_eval, integrate_adaptive, integrate_fixed, rk_step, write_trajectory,
)
from fsalpairs.library import available, builtin
from fsalpairs.problems import OdeSystem, problem

LINEAR = OdeSystem(1, lambda t, x: x)
ZERO = OdeSystem(3, lambda t, x: np.zeros_like(x))
CONSTANT = OdeSystem(2, lambda t, x: np.array([1.5, -2.0]))


def poly_value(pair, z):
    return sum(float(a) * z ** k for k, a in enumerate(stability(pair).coefficients))


@pytest.mark.parametrize("name", available())
def test_zero_field_leaves_state(name):
    pair = builtin(name)
    x0 = np.array([1.0, -2.0, 3.0])
    step = rk_step(pair, ZERO, 0.0, x0, 0.3)
    assert step.error == 0.0 and np.array_equal(step.x_next, x0)
    st_ = integrate_adaptive(pair, ZERO, 0.0, 10.0, x0, ControllerConfig(atol=1e-8))
    assert np.array_equal(st_.x_end, x0) and st_.n_reject == 0 and st_.t_end == 10.0


@pytest.mark.parametrize("name", available())
def test_constant_field_is_exact(name):
    pair = builtin(name)
    step = rk_step(pair, CONSTANT, 0.0, np.zeros(2), 0.5)
    assert np.allclose(step.x_next, [0.75, -1.0], rtol=0, atol=1e-15)
    # sum d = 0 exactly; only roundoff in the weighted sum survives
    roundoff = 8 * np.finfo(float).eps * 0.5 * 2.5 * sum(abs(float(v)) for v in pair.d)
    assert step.error <= roundoff


@pytest.mark.parametrize("name", available())
def test_linear_step_is_stability_polynomial(name):
    pair = builtin(name)
    for h in (0.1, 0.7, -1.3):
        step = rk_step(pair, LINEAR, 0.0, np.array([1.0]), h)
        assert step.x_next[0] == pytest.approx(poly_value(pair, h), rel=1e-14)


@given(st.floats(-2.5, 1.0), st.floats(0.01, 1.0))
def test_linear_decay_property(lam, h):
    pair = builtin("aprime")
    system = OdeSystem(1, lambda t, x: lam * x)
    step = rk_step(pair, system, 0.0, np.array([2.0]), h)
    assert step.x_next[0] == pytest.approx(2.0 * poly_value(pair, lam * h), rel=1e-12, abs=1e-14)


def test_integrate_fixed_linear():
    pair = builtin("typeB")
    x = integrate_fixed(pair, LINEAR, 0.0, 1.0, [1.0], 10)
    assert x[0] == pytest.approx(poly_value(pair, 0.1) ** 10, rel=1e-13)
    emb = integrate_fixed(pair, LINEAR, 0.0, 1.0, [1.0], 10, weights="embedded")
    assert abs(emb[0] - x[0]) > 1e-12
    with pytest.raises(ValueError):
        integrate_fixed(pair, LINEAR, 0.0, 1.0, [1.0], 10, weights="d")


@pytest.mark.parametrize("name", [n for n in available() if builtin(n).is_fsal])
def test_fsal_reuse(name):
    pair = builtin(name)
    prob = problem("D5")
    fresh = rk_step(pair, prob.system, 0.0, prob.x0, 0.05)
    assert np.array_equal(fresh.f_last, prob.system.rhs(0.05, fresh.x_next))
    nxt_cached = rk_step(pair, prob.system, 0.05, fresh.x_next, 0.05, f1=fresh.f_last)
    nxt_fresh = rk_step(pair, prob.system, 0.05, fresh.x_next, 0.05)
    assert np.array_equal(nxt_cached.x_next, nxt_fresh.x_next)
    assert nxt_cached.error == nxt_fresh.error


@pytest.mark.parametrize("name", available())
@pytest.mark.parametrize("backend", ["python", "auto"])
def test_evaluation_count(name, backend):
    pair = builtin(name)
    prob = problem("A3")
    st_ = integrate_adaptive(pair, prob.system, prob.t0, prob.tend, prob.x0,
                             ControllerConfig(atol=1e-7), backend=backend)
    assert st_.n_reject > 0
    if pair.is_fsal:
        assert st_.n_rhs == 1 + (pair.s - 1) * st_.attempts
    else:
        assert st_.n_rhs == (pair.s - 1) * st_.attempts + st_.n_accept


def test_accepted_steps_meet_tolerance():
    pair, prob, atol = builtin("aprime"), problem("A4"), 1e-8
    st_ = integrate_adaptive(pair, prob.system, prob.t0, prob.tend, prob.x0,
                             ControllerConfig(atol=atol), backend="python")
    assert st_.ts[0] == prob.t0 and st_.ts[-1] == prob.tend
    assert np.all(np.diff(st_.ts) > 0)
    for t, t1, x, x1 in zip(st_.ts, st_.ts[1:], st_.xs, st_.xs[1:]):
        step = rk_step(pair, prob.system, t, x, t1 - t)
        assert step.error <= atol * (1 + 1e-6)
        assert np.allclose(step.x_next, x1, rtol=1e-13, atol=0)


@pytest.mark.parametrize("name", available())
def test_convergence_orders(name):
    slope_b, slope_e = a3_slopes(builtin(name))
    assert abs(slope_e - 4) <= 0.15
    if name == "tsit5":
        pytest.xfail(f"stored double coefficients limit the observed order to {slope_b:.2f}")
    assert abs(slope_b - 5) <= 0.15


def test_tsit5_order_recovered_in_exact_arithmetic():
    stored = builtin("tsit5")
    rebuilt = refined_tsit5()
    assert residuals(stored).max_abs("b") > 1e-15
    assert residuals(rebuilt).max_abs("b") < 1e-18
    assert max(abs(float(u) - v) for ru, rv in zip(rebuilt.A, stored.A)
               for u, v in zip(ru, rv)) < 1e-14
    assert abs(a3_slopes(rebuilt)[0] - 5) <= 0.15


def test_dense_output():
    pair = builtin("aprime")
    prob = problem("A3")
    t, h = 0.4, 0.05
    x = prob.exact(t)
    step = rk_step(pair, prob.system, t, x, h)
    assert np.allclose(dense_eval(pair, step.stages, x, h, 0.0), x, rtol=0, atol=1e-16)
    assert np.allclose(dense_eval(pair, step.stages, x, h, 1.0), step.x_next, rtol=0, atol=1e-15)
    for theta in np.linspace(0, 1, 11):
        approx = dense_eval(pair, step.stages, x, h, theta)
        assert abs(approx[0] - prob.exact(t + theta * h)[0]) < 1e-9
    with pytest.raises(CapabilityError):
        dense_eval(builtin("typeB"), step.stages, x, h, 0.5)


@pytest.mark.skipif(not compiled_available(), reason="compiled kernel not built")
@pytest.mark.parametrize("pid", ["A3", "A4", "D5", "PLEI"])
@pytest.mark.parametrize("name", ["aprime", "fehlberg", "bs5", "sqrt4054"])
def test_backends_bitwise_equal(pid, name):
    pair, prob = builtin(name), problem(pid)
    cfg = ControllerConfig(atol=1e-7, clamp=(0.2, 5.0) if name == "bs5" else None)
    runs = [integrate_adaptive(pair, prob.system, prob.t0, prob.tend, prob.x0, cfg, backend=b)
            for b in ("compiled", "python")]
    assert [r.backend for r in runs] == ["compiled", "python"]
    a, b = runs
    assert (a.n_rhs, a.n_accept, a.n_reject) == (b.n_rhs, b.n_accept, b.n_reject)
    assert np.array_equal(a.ts, b.ts) and np.array_equal(a.xs, b.xs)


def test_pure_python_switch(monkeypatch):
    prob = problem("A3")
    monkeypatch.setenv(PURE_PYTHON_ENV, "1")
    assert not compiled_available()
    st_ = integrate_adaptive(builtin("dopri"), prob.system, 0.0, 1.0, prob.x0,
                             ControllerConfig(atol=1e-6))
    assert st_.backend == "python"


def test_compiled_backend_needs_native_rhs():
    with pytest.raises(CapabilityError):
        integrate_adaptive(builtin("dopri"), LINEAR, 0.0, 1.0, [1.0], ControllerConfig(atol=1e-6),
                           backend="compiled")


def test_clamp_limits_growth():
    prob = problem("A4")
    free = integrate_adaptive(builtin("dopri"), prob.system, 0.0, 20.0, prob.x0,
                              ControllerConfig(atol=1e-6, h0=1e-6))
    clamped = integrate_adaptive(builtin("dopri"), prob.system, 0.0, 20.0, prob.x0,
                                 ControllerConfig(atol=1e-6, h0=1e-6, clamp=(0.5, 2.0)))
    assert np.all(np.diff(clamped.ts)[:-1][1:] <= 2.0 * np.diff(clamped.ts)[:-2] * (1 + 1e-12))
    assert clamped.n_accept > free.n_accept


@pytest.mark.parametrize("kwargs", [
    dict(atol=0), dict(atol=-1e-6), dict(atol=1e-6, safety=1.0), dict(atol=1e-6, exponent=0),
    dict(atol=1e-6, h0=0), dict(atol=1e-6, clamp=(1.5, 2.0)), dict(atol=1e-6, clamp=(0.5, 0.9)),
])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        ControllerConfig(**kwargs)


def test_bad_arguments():
    cfg = ControllerConfig(atol=1e-6)
    with pytest.raises(ValueError):
        integrate_adaptive(builtin("dopri"), LINEAR, 1.0, 1.0, [1.0], cfg)
    with pytest.raises(ValueError):
        rk_step(builtin("dopri"), LINEAR, 0.0, [1.0], 0.0)


def test_stiff_problem_underflows():
    stiff = OdeSystem(1, lambda t, x: -1e20 * x)
    with pytest.raises(IntegrationError, match="underflow") as info:
        integrate_adaptive(builtin("dopri"), stiff, 0.0, 1.0, [1.0], ControllerConfig(atol=1e-6))
    assert info.value.stats.n_reject > 0 and info.value.stats.t_end < 1.0


@pytest.mark.filterwarnings("ignore:invalid value:RuntimeWarning")
def test_non_finite_and_attempt_limit():
    blowup = OdeSystem(1, lambda t, x: np.array([math.inf]))
    with pytest.raises(IntegrationError, match="non-finite"):
        integrate_adaptive(builtin("dopri"), blowup, 0.0, 1.0, [1.0], ControllerConfig(atol=1e-6))
    prob = problem("A3")
    with pytest.raises(IntegrationError, match="maximum") as info:
        integrate_adaptive(builtin("dopri"), prob.system, 0.0, 20.0, prob.x0,
                           ControllerConfig(atol=1e-10, max_attempts=5))
    assert info.value.stats.attempts == 5


def test_write_trajectory(tmp_path):
    prob = problem("D5")
    st_ = integrate_adaptive(builtin("aprime"), prob.system, 0.0, 1.0, prob.x0,
                             ControllerConfig(atol=1e-6))
    path = tmp_path / "traj.csv"
    write_trajectory(st_, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,x0,x1,x2,x3"
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    assert np.array_equal(data[:, 0], st_.ts) and np.array_equal(data[:, 1:], st_.xs)
    unrecorded = integrate_adaptive(builtin("aprime"), prob.system, 0.0, 1.0, prob.x0,
                                    ControllerConfig(atol=1e-6), record=False)
    assert unrecorded.trajectory == []
    with pytest.raises(ValueError):
        write_trajectory(unrecorded, path)
