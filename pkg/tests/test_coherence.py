import math
import warnings

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from biphoton.coherence import (
    CoherenceModel,
    CorrelationEnvelope,
    Spectrum,
    coherence_length_from_bandwidth,
    delay_grid,
    envelope_from_spectrum,
    evaluate_envelope,
    gamma_gaussian,
    read_envelope_csv,
    read_spectrum_csv,
    write_envelope_csv,
)
from biphoton.errors import ConfigError, CoverageWarning, InputDomainError, ResolutionError

from conftest import L_COH, gauss

CENTER = 727.6e-9


def bandwidth_for(l_coh, center=CENTER):
    # inverse of l = sqrt(2 ln 2)/pi * lambda^2 / dlambda, written out independently
    return math.sqrt(2 * math.log(2)) / math.pi * center ** 2 / l_coh


def test_gamma_gaussian_values():
    assert gamma_gaussian(0.0, L_COH) == 1.0
    assert gamma_gaussian(L_COH, L_COH) == pytest.approx(0.60653066, rel=1e-8)
    assert gamma_gaussian(5 * L_COH, L_COH) == pytest.approx(math.exp(-12.5), rel=1e-12)


@pytest.mark.parametrize("l", [0.0, -1.0, math.nan])
def test_gamma_gaussian_rejects_bad_length(l):
    with pytest.raises(ConfigError):
        gamma_gaussian(0.0, l)


def test_bandwidth_conversion():
    l = coherence_length_from_bandwidth(727.6e-9, 0.85e-9)
    assert l == pytest.approx(math.sqrt(2 * math.log(2)) / math.pi * 727.6e-9 ** 2 / 0.85e-9, rel=1e-14)
    assert l == pytest.approx(233e-6, rel=5e-3)
    assert coherence_length_from_bandwidth(1e-6, 1e-9, "simple") == pytest.approx(1e-3, rel=1e-12)
    for conv in ("simple", "gaussian_rms_envelope"):
        a = coherence_length_from_bandwidth(800e-9, 1e-9, conv)
        b = coherence_length_from_bandwidth(800e-9, 2e-9, conv)
        assert a == pytest.approx(2 * b, rel=1e-14)


@pytest.mark.parametrize("args", [(0.0, 1e-9), (800e-9, 0.0), (800e-9, 900e-9), (800e-9, 1e-9, "fwhm")])
def test_bandwidth_conversion_errors(args):
    with pytest.raises(ConfigError):
        coherence_length_from_bandwidth(*args)


def test_gaussian_spectrum_matches_closed_form():
    spec = Spectrum.gaussian(CENTER, bandwidth_for(L_COH))
    grid = delay_grid(5 * L_COH, 1024)
    env = envelope_from_spectrum(spec, grid)
    err = np.max(np.abs(env.values - gauss(grid, L_COH)))
    assert err < 1e-6
    assert env.center_offset == 0.0


def test_narrow_tabulated_spectrum_is_flat():
    lam = np.linspace(CENTER - 1e-12, CENTER + 1e-12, 64)
    spec = Spectrum.tabulated(lam, np.exp(-0.5 * ((lam - CENTER) / 2e-13) ** 2))
    with pytest.warns(CoverageWarning):
        env = envelope_from_spectrum(spec, delay_grid(5 * L_COH, 1024))
    assert np.min(np.abs(env.values)) > 0.999


def test_two_line_spectrum_revival_period():
    l1, l2 = 800e-9, 801e-9
    lam = np.linspace(799.5e-9, 801.5e-9, 20001)
    width = 0.01e-9
    amp = np.exp(-0.5 * ((lam - l1) / width) ** 2) + np.exp(-0.5 * ((lam - l2) / width) ** 2)
    spec = Spectrum.tabulated(lam, amp)
    grid = delay_grid(1.5e-3, 4096)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", CoverageWarning)
        env = envelope_from_spectrum(spec, grid)
    beat = l1 * l2 / (l2 - l1)  # independent beat-length oracle
    mod = np.abs(env.values)
    window = (grid > 0.5 * beat) & (grid < 1.5 * beat)
    revival = grid[window][np.argmax(mod[window])]
    assert revival == pytest.approx(beat, rel=5e-3)
    trough = grid[(grid > 0) & (grid < beat)][np.argmin(mod[(grid > 0) & (grid < beat)])]
    assert trough == pytest.approx(beat / 2, rel=1e-2)
    assert mod[np.argmin(np.abs(grid - revival))] > 0.9


def test_sinc_spectrum_is_normalized():
    spec = Spectrum.sinc_squared(CENTER, bandwidth_for(L_COH))
    env = envelope_from_spectrum(spec, delay_grid(10 * L_COH, 2048))
    mod = np.abs(env.values)
    assert mod.max() == pytest.approx(1.0, abs=1e-12)
    assert np.all(mod <= 1 + 1e-12)


def test_resolution_checks():
    spec = Spectrum.gaussian(CENTER, bandwidth_for(L_COH))
    with pytest.raises(ResolutionError):
        envelope_from_spectrum(spec, delay_grid(5 * L_COH, 256))
    with pytest.raises(ResolutionError):
        envelope_from_spectrum(spec, delay_grid(200 * L_COH, 1024))
    with pytest.warns(CoverageWarning):
        envelope_from_spectrum(spec, delay_grid(2 * L_COH, 1024))


def test_spectrum_validation():
    lam = np.linspace(700e-9, 710e-9, 8)
    with pytest.raises(ConfigError):
        Spectrum.tabulated(lam[:7], np.ones(7))
    with pytest.raises(ConfigError):
        Spectrum.tabulated(lam[::-1], np.ones(8))
    with pytest.raises(ConfigError):
        Spectrum.tabulated(lam, -np.ones(8))
    with pytest.raises(ConfigError):
        Spectrum.gaussian(CENTER, 0.0)


@settings(max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(st.lists(st.floats(0.0, 1.0), min_size=8, max_size=40).filter(lambda a: sum(a) > 0.1))
def test_random_spectra_are_normalized(amps):
    lam = np.linspace(CENTER - 1e-9, CENTER + 1e-9, len(amps))
    spec = Spectrum.tabulated(lam, amps)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", CoverageWarning)
        env = envelope_from_spectrum(spec, delay_grid(1e-3, 1024))
    mod = np.abs(env.values)
    assert np.all(mod <= 1 + 1e-12)
    assert mod.max() == pytest.approx(1.0, abs=1e-12)
    value, in_range = evaluate_envelope(env, env.center_offset)
    assert abs(value) == pytest.approx(1.0, abs=1e-12) and in_range


@settings(max_examples=10, deadline=None)
@given(st.floats(0.3e-9, 2e-9), st.floats(1.1, 3.0))
def test_width_monotonicity(bw, ratio):
    grid = delay_grid(1e-3, 1024)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", CoverageWarning)
        narrow = envelope_from_spectrum(Spectrum.gaussian(CENTER, bw), grid)
        broad = envelope_from_spectrum(Spectrum.gaussian(CENTER, bw * ratio), grid)
    assert np.all(np.abs(broad.values) <= np.abs(narrow.values) + 1e-9)


def test_evaluate_envelope_table_semantics():
    grid = np.linspace(-1.0, 1.0, 11)
    values = np.exp(-grid ** 2) * np.exp(0.3j * grid)
    env = CorrelationEnvelope.from_table(grid, values)
    v, ok = evaluate_envelope(env, grid[3])
    assert v == values[3] and ok
    v, ok = evaluate_envelope(env, 0.5 * (grid[3] + grid[4]))
    assert v == pytest.approx(0.5 * (values[3] + values[4]), abs=1e-15)
    v, ok = evaluate_envelope(env, 2.0)
    assert v == 0 and not ok
    assert evaluate_envelope(CorrelationEnvelope.gaussian(L_COH), 0.0)[0] == 1.0


def test_table_invariants():
    with pytest.raises(ResolutionError):
        CorrelationEnvelope.from_table(np.array([0.0, 1.0, 3.0]), np.ones(3))
    with pytest.raises(InputDomainError):
        CorrelationEnvelope.from_table(np.linspace(0, 1, 3), np.array([1.0, 1.5, 1.0]))


def test_offset_envelope_center():
    env = CorrelationEnvelope.gaussian(L_COH, center_offset=30e-6)
    assert env(30e-6) == 1.0
    assert abs(env(0.0)) < 1.0


def test_degenerate_flag_forces_kd_zero():
    m = CoherenceModel(CorrelationEnvelope.gaussian(5e-2), CorrelationEnvelope.gaussian(L_COH), 1e7, kd=123.0, degenerate=True)
    assert m.kd == 0.0
    m = CoherenceModel(CorrelationEnvelope.gaussian(5e-2), CorrelationEnvelope.gaussian(L_COH), 1e7, kd=123.0, degenerate=False)
    assert m.kd == 123.0
    with pytest.raises(ConfigError):
        CoherenceModel(CorrelationEnvelope.gaussian(5e-2), CorrelationEnvelope.gaussian(L_COH), -1.0)


def test_csv_round_trips(tmp_path):
    grid = delay_grid(5 * L_COH, 512)
    path = tmp_path / "env.csv"
    write_envelope_csv(CorrelationEnvelope.gaussian(L_COH), path, grid)
    env = read_envelope_csv(path)
    np.testing.assert_allclose(env.grid, grid, rtol=1e-12, atol=1e-18)
    np.testing.assert_allclose(env.values.real, gauss(grid, L_COH), atol=1e-15)

    spath = tmp_path / "spec.csv"
    lam_nm = np.linspace(726.0, 729.0, 301)
    rows = "\n".join(f"{float(l)!r},{math.exp(-0.5 * ((l - 727.6) / 0.3) ** 2)!r}" for l in lam_nm)
    spath.write_text("wavelength_nm,amplitude\n" + rows + "\n")
    spec = read_spectrum_csv(spath)
    assert spec.center_wavelength == pytest.approx(727.6e-9, rel=1e-5)
    assert spec.samples.shape == (301, 2)


def test_spectrum_csv_rejects_bad_rows(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("wavelength_nm,amplitude\n700,1\nseven hundred,1\n")
    with pytest.raises(ConfigError) as info:
        read_spectrum_csv(path)
    assert info.value.line == 3
