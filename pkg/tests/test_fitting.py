import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from biphoton.errors import ConfigError, DataError, DegenerateFitError, UnreliableFitWarning
from biphoton.fitting import (
    PARAM_NAMES,
    FitResult,
    FringeModel,
    dip_visibility,
    finite_difference_check,
    fit_sweep,
    fit_trace,
    fringe_period,
    fringe_visibility,
)
from biphoton.scenarios import ExperimentConfig, SweepSpec, build_scenario, run_sweep

from conftest import LAMBDA0, L_COH, gauss

C = 1000.0


def dip_data(V=-0.67, sigma=L_COH, x0=0.0, n=201, span=5):
    x = np.linspace(-span * sigma, span * sigma, n)
    return x, C * (1 + V * gauss(x - x0, sigma))


def result_with(V, converged=True):
    p = np.array([C, V, 0.0, L_COH, 0.0, 0.0])
    return FitResult(p, np.zeros(6), 0.0, converged, 1, (True,) * 4 + (False,) * 2)


@pytest.mark.parametrize("scale", [0.8, 1.2])
def test_noiseless_dip_from_perturbed_init(scale):
    x, y = dip_data()
    init = [C * scale, -0.67 * scale, 0.2 * L_COH * (scale - 1) * 5, L_COH / scale, 0.0, 0.0]
    res = fit_trace(x, y, FringeModel.dip(), init=init)
    assert res.converged
    assert res["B"] == pytest.approx(C, rel=1e-6)
    assert res["V"] == pytest.approx(-0.67, rel=1e-6)
    assert res["sigma"] == pytest.approx(L_COH, rel=1e-6)
    assert abs(res["x0"]) < 1e-6 * L_COH
    assert res.fwhm == pytest.approx(2 * math.sqrt(2 * math.log(2)) * L_COH, rel=1e-6)


def test_noiseless_dip_default_init_offset_center():
    x, y = dip_data(V=-0.4, x0=37e-6)
    res = fit_trace(x, y, FringeModel.dip())
    assert res["x0"] == pytest.approx(37e-6, rel=1e-6)
    assert res["V"] == pytest.approx(-0.4, rel=1e-6)


def test_noiseless_fringe_period():
    x = np.linspace(0, 2e-6, 2001)
    k = 2 * math.pi / LAMBDA0
    y = C * (1 - 0.9 * np.cos(k * x))
    res = fit_trace(x, y, FringeModel.fringe())
    assert res.period == pytest.approx(LAMBDA0, rel=1e-4)
    assert fringe_visibility(res, x) == pytest.approx(0.9, rel=1e-6)
    assert fringe_period(x, y) == pytest.approx(LAMBDA0, rel=1e-4)


def test_hom_sweep_fit_recovers_coherence_length():
    t = run_sweep(build_scenario(ExperimentConfig("hom")), SweepSpec("delta_L_prime", -5e-4, 5e-4, 1001))
    res = fit_sweep(t)
    assert res["sigma"] == pytest.approx(L_COH, rel=1e-6)
    assert dip_visibility(res) == pytest.approx(1.0, abs=1e-9)


def test_dip_visibility_examples():
    assert dip_visibility(result_with(-0.67)) == 0.67
    assert dip_visibility(result_with(0.0)) == 0.0
    assert dip_visibility(result_with(-1.0)) == 1.0
    with pytest.warns(UnreliableFitWarning):
        dip_visibility(result_with(-0.5, converged=False))


def test_constant_trace_is_degenerate():
    x = np.linspace(-1, 1, 51)
    with pytest.raises(DegenerateFitError) as info:
        fit_trace(x, np.full_like(x, 3.0), FringeModel.dip())
    assert info.value.diagnostic


def test_input_validation():
    x, y = dip_data(n=7)
    with pytest.raises(DataError):
        fit_trace(x, y, FringeModel.dip())
    x, y = dip_data()
    with pytest.raises(DataError):
        fit_trace(x, y[:-1], FringeModel.dip())
    with pytest.raises(ConfigError):
        fit_trace(x, y, FringeModel.dip(), init=[C, -2.0, 0.0, L_COH, 0.0, 0.0])


def test_unconverged_fit_is_flagged_not_raised():
    x, y = dip_data()
    res = fit_trace(x, y, FringeModel.dip(), init=[0.5 * C, -0.2, 2 * L_COH, 0.3 * L_COH, 0, 0], max_iter=1)
    assert not res.converged and not res.errors_reliable
    assert "DID NOT CONVERGE" in res.report()


def test_objective_never_increases():
    rng = np.random.default_rng(0)
    x, y = dip_data()
    y = rng.poisson(y).astype(float)
    res = fit_trace(x, y, FringeModel.dip(), init=[0.9 * C, -0.3, 50e-6, 60e-6, 0, 0])
    assert np.all(np.diff(res.history) <= 0)


def test_scale_equivariance():
    rng = np.random.default_rng(1)
    x, y = dip_data()
    y = rng.poisson(y).astype(float)
    base = fit_trace(x, y, FringeModel.dip())
    s = 7.5
    init = base.params.copy()
    init[0] *= s
    scaled = fit_trace(x, s * y, FringeModel.dip(), init=init)
    assert scaled["B"] == pytest.approx(s * base["B"], rel=1e-8)
    for name in ("V", "x0", "sigma"):
        assert scaled[name] == pytest.approx(base[name], rel=1e-8, abs=1e-8 * L_COH)


def test_bounds_respected():
    x, y = dip_data(V=-1.0)
    rng = np.random.default_rng(3)
    res = fit_trace(x, rng.poisson(y).astype(float) + 0.0, FringeModel.dip())
    assert -1.0 <= res["V"] <= 1.0 and res["sigma"] > 0 and res["B"] > 0


def test_model_spec_parsing():
    m = FringeModel.from_spec("dip, x0=0")
    assert m.free == (True, True, False, True, False, False)
    assert m.values[2] == 0.0
    assert FringeModel.from_spec("fringe").free == (True, True, False, False, True, True)
    for bad in ("", "gauss", "dip,q=1", "dip,V"):
        with pytest.raises(ConfigError):
            FringeModel.from_spec(bad)


interior = st.tuples(
    st.floats(10.0, 5000.0),
    st.floats(-0.95, 0.95),
    st.floats(-50e-6, 50e-6),
    st.floats(20e-6, 300e-6),
    st.floats(0.0, 2e7),
    st.floats(-3.0, 3.0),
)


@settings(max_examples=100, deadline=None)
@given(interior)
def test_gradient_finite_difference(point):
    x = np.linspace(-5e-4, 5e-4, 201)
    assert finite_difference_check(FringeModel.full(), point, x) < 1e-5


def test_vanishing_gradients():
    x = np.linspace(-5e-4, 5e-4, 201)
    m = FringeModel.full()
    J = m.jacobian(x, [C, 0.0, 1e-5, L_COH, 1e6, 0.4])
    assert np.max(np.abs(J[:, PARAM_NAMES.index("x0")])) < 1e-10
    assert np.max(np.abs(J[:, PARAM_NAMES.index("phi")])) < 1e-10
    J = m.jacobian(x, [C, -0.5, 0.0, L_COH, 0.0, 0.0])
    assert np.all(J[:, PARAM_NAMES.index("k")] == 0.0)
    assert finite_difference_check(m, [C, -0.5, 0.0, L_COH, 0.0, 0.0], x) < 1e-5


def test_fringe_period_needs_crossings():
    with pytest.raises(DataError):
        fringe_period(np.linspace(0, 1, 10), np.linspace(0, 1, 10))


def test_result_row_and_report():
    x, y = dip_data()
    res = fit_trace(x, y, FringeModel.dip())
    row = res.as_row()
    assert set(PARAM_NAMES) <= set(row) and row["converged"] == 1
    assert "fwhm" in res.report()
