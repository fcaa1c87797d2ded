import numpy as np
import pytest

from diraclimit.emfield import (PRESETS, FieldSample, eval_fields, eval_potentials,
                                lorentz_force, make_potential, relativistic_velocity)
from diraclimit.errors import ConfigurationError

PRESET_PARAMS = {
    "zero": {},
    "constant": {"A0": 0.3, "A": [0.1, -0.2, 0.5]},
    "uniform_E": {"E0": [0.4, -1.0, 0.2]},
    "uniform_B": {"B0": [0.3, 0.7, -1.1]},
    "gaussian_bump_A0": {"amplitude": 1.5, "width": 0.8, "center": [0.1, 0.0, -0.2]},
    "time_pulse": {"amplitude": [0.2, 0.5, -0.3], "direction": [1, 2, 0.5], "omega": 2.0},
}


def test_catalog_covered():
    assert set(PRESET_PARAMS) == set(PRESETS)


def test_zero_preset():
    rec = eval_potentials(make_potential("zero"), 0.3, np.array([1.0, 2.0, 3.0]))
    for f in ("A0", "A", "dA0_dt", "dA_dt", "grad_A0", "jac_A"):
        assert np.all(getattr(rec, f) == 0)
    fs = eval_fields(make_potential("zero"), 0.3, np.ones(3))
    assert np.all(fs.E == 0) and np.all(fs.B == 0)


def test_uniform_E():
    m = make_potential({"preset": "uniform_E", "E0": [1, 0, 0]})
    rec = eval_potentials(m, 0.0, np.array([2.0, 5.0, -1.0]))
    assert rec.A0 == pytest.approx(2.0)
    assert np.allclose(rec.grad_A0, [1, 0, 0])


def test_gaussian_bump_gradient():
    m = make_potential({"preset": "gaussian_bump_A0", "amplitude": 1, "width": 1})
    rec = eval_potentials(m, 0.0, np.array([1.0, 0, 0]))
    assert np.allclose(rec.grad_A0, [-2 * np.exp(-1), 0, 0])


def test_curl_of_linear_field():
    b = 0.7
    m = make_potential({"preset": "uniform_B", "B0": [0, 0, b]})
    rec = eval_potentials(m, 0.0, np.array([0.4, 0.1, 0.2]))
    assert np.allclose(rec.A, [0, b * 0.4, 0])
    assert np.allclose(eval_fields(m, 0.0, np.zeros(3)).B, [0, 0, b])


def test_spatially_constant_pulse():
    # A = a g(t) c with h == 1 on the sample point -> E = -g'(t) a, no B at the crest
    m = make_potential({"preset": "time_pulse", "amplitude": [0, 0, 1.0],
                        "direction": [1, 0, 0], "length": 1e6, "t0": 0.0, "duration": 1.0})
    t = 0.4
    fs = eval_fields(m, t, np.zeros(3))
    assert np.allclose(fs.E, [0, 0, 2 * t * np.exp(-t * t)])
    assert np.allclose(fs.B, 0)


def test_unknown_preset():
    with pytest.raises(ConfigurationError):
        make_potential("laser")
    with pytest.raises(ConfigurationError):
        make_potential({"preset": "uniform_E", "E0": [1, 2]})
    with pytest.raises(ConfigurationError):
        make_potential({"preset": "uniform_E", "bogus": 1})


def _fd_errors(model, t, x, h):
    rec = eval_potentials(model, t, x)
    grad = np.zeros(3)
    jac = np.zeros((3, 3))
    for k in range(3):
        e = np.zeros(3)
        e[k] = h
        rp, rm = eval_potentials(model, t, x + e), eval_potentials(model, t, x - e)
        grad[k] = (rp.A0 - rm.A0) / (2 * h)
        jac[k] = (rp.A - rm.A) / (2 * h)
    tp, tm = eval_potentials(model, t + h, x), eval_potentials(model, t - h, x)
    dA0 = (tp.A0 - tm.A0) / (2 * h)
    dA = (tp.A - tm.A) / (2 * h)
    return max(np.abs(grad - rec.grad_A0).max(), np.abs(jac - rec.jac_A).max(),
               abs(dA0 - rec.dA0_dt), np.abs(dA - rec.dA_dt).max())


@pytest.mark.parametrize("name", sorted(PRESET_PARAMS))
def test_derivatives_second_order(name, rng):
    m = make_potential({"preset": name, **PRESET_PARAMS[name]})
    for _ in range(100):
        t, x = rng.uniform(0, 1), rng.normal(size=3)
        e1 = _fd_errors(m, t, x, 1e-2)
        e2 = _fd_errors(m, t, x, 5e-3)
        assert e1 < 1e-3
        if e1 > 1e-9:
            assert 3.0 < e1 / e2 < 5.0


def test_restricted_model_ignores_inactive_coordinates():
    m = make_potential({"preset": "gaussian_bump_A0"}, active_dims=1)
    r1 = eval_potentials(m, 0.0, np.array([0.5, 0.0, 0.0]))
    r2 = eval_potentials(m, 0.0, np.array([0.5, 3.0, -2.0]))
    assert r1.A0 == r2.A0
    assert np.all(r1.grad_A0[1:] == 0)


def test_vectorised_evaluation(td_model, rng):
    x = rng.normal(size=(5, 7, 3))
    rec = eval_potentials(td_model, 0.2, x)
    assert rec.jac_A.shape == (5, 7, 3, 3)
    single = eval_potentials(td_model, 0.2, x[2, 3])
    assert np.allclose(rec.jac_A[2, 3], single.jac_A)


def test_lorentz_force_examples():
    v = np.array([1.0, 0, 0])
    assert np.allclose(lorentz_force(FieldSample(np.array([1.0, 0, 0]), np.zeros(3)), v, 1), [1, 0, 0])
    fs = FieldSample(np.zeros(3), np.array([0, 0, 1.0]))
    assert np.allclose(lorentz_force(fs, v, +1), [0, -1 / np.sqrt(2), 0])
    assert np.allclose(lorentz_force(fs, v, -1), [0, 1 / np.sqrt(2), 0])


def test_lorentz_force_linear(rng):
    v = rng.normal(size=3)
    a = FieldSample(rng.normal(size=3), rng.normal(size=3))
    b = FieldSample(rng.normal(size=3), rng.normal(size=3))
    ab = FieldSample(2 * a.E - b.E, 2 * a.B - b.B)
    assert np.allclose(lorentz_force(ab, v, 1), 2 * lorentz_force(a, v, 1) - lorentz_force(b, v, 1))


def test_speed_of_light(rng):
    v = rng.normal(size=(1000, 3)) * 10.0 ** rng.uniform(-3, 6, size=(1000, 1))
    assert np.all(np.linalg.norm(relativistic_velocity(v), axis=-1) < 1)
