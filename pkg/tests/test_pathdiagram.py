import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from biphoton.coherence import CoherenceModel
from biphoton.errors import ConfigError, InputDomainError
from biphoton.pathdiagram import (
    BiphotonParams,
    Distinguishability,
    PathAlternative,
    TwoPhotonPathDiagram,
    classify_distinguishability,
    derive_biphoton_params,
    double_pass_diagram,
    double_pass_params,
)

from conftest import LAMBDA0, L_COH


def diagram(la, lb, pa=(0, 0, 0), pb=(0, 0, 0)):
    return TwoPhotonPathDiagram(PathAlternative(*la, *pa), PathAlternative(*lb, *pb))


def test_zero_diagram():
    p = derive_biphoton_params(diagram((0, 0, 0), (0, 0, 0)))
    assert p.as_tuple() == (0, 0, 0)


def test_signal_idler_swap_example():
    # (l_p, l_s, l_i)
    p = derive_biphoton_params(diagram((0, 2, 1), (0, 1, 2)))
    assert p.as_tuple() == (0, 2, 0)


def test_hand_evaluated_example():
    p = derive_biphoton_params(diagram((1.0, 1.5, 0.5), (0.8, 1.0, 1.0), pa=(math.pi, 0, 0)))
    assert p.delta_L == pytest.approx(0.2, abs=1e-15)
    assert p.delta_L_prime == pytest.approx(1.0, abs=1e-15)
    assert p.delta_phi == math.pi


@pytest.mark.parametrize("bad", [math.nan, math.inf])
def test_non_finite_lengths_rejected(bad):
    with pytest.raises(InputDomainError):
        PathAlternative(bad, 1, 1)
    with pytest.raises(InputDomainError):
        BiphotonParams(bad, 0.0)


def test_negative_length_rejected():
    with pytest.raises(InputDomainError):
        PathAlternative(-1e-3, 1, 1)


@pytest.mark.parametrize(
    "xs, xi, expected",
    [(0.0, 0.0, (0.0, 0.0)), (50e-6, -50e-6, (0.0, 200e-6)), (100e-6, 100e-6, (200e-6, 0.0))],
)
def test_double_pass_params_examples(xs, xi, expected):
    p = double_pass_params(xs, xi)
    assert p.delta_L == pytest.approx(expected[0], abs=1e-18)
    assert p.delta_L_prime == pytest.approx(expected[1], abs=1e-18)
    assert p.delta_phi == math.pi


def test_double_pass_params_broadcast():
    x = np.linspace(-1e-6, 1e-6, 5)
    p = double_pass_params(0.0, x)
    assert np.shape(p.delta_phi) == x.shape
    np.testing.assert_allclose(p.delta_L_prime, -2 * x)


lengths = st.floats(0.0, 10.0, allow_nan=False)
phases = st.floats(-10.0, 10.0, allow_nan=False)
alternative = st.builds(PathAlternative, lengths, lengths, lengths, phases, phases, phases)
diagrams = st.builds(TwoPhotonPathDiagram, alternative, alternative)


def _close(p, q, scale):
    for u, v in zip(p.as_tuple(), q.as_tuple()):
        assert abs(u - v) <= 1e-12 * scale


@settings(max_examples=1000, deadline=None)
@given(diagrams, st.sampled_from(["l_p", "l_s", "l_i", "phi_p", "phi_s", "phi_i"]), st.floats(0.0, 5.0))
def test_offset_invariance(d, role, delta):
    import dataclasses

    shifted = TwoPhotonPathDiagram(
        dataclasses.replace(d.alt_a, **{role: getattr(d.alt_a, role) + delta}),
        dataclasses.replace(d.alt_b, **{role: getattr(d.alt_b, role) + delta}),
    )
    _close(derive_biphoton_params(d), derive_biphoton_params(shifted), 30.0)


@settings(max_examples=1000, deadline=None)
@given(diagrams)
def test_relabeling_antisymmetry(d):
    p = derive_biphoton_params(d)
    q = derive_biphoton_params(d.swapped())
    _close(-p, q, 30.0)


@settings(max_examples=200, deadline=None)
@given(st.floats(-1e-3, 1e-3), st.floats(-1e-3, 1e-3))
def test_double_pass_matches_explicit_diagram(xs, xi):
    p = double_pass_params(xs, xi)
    q = derive_biphoton_params(double_pass_diagram(xs, xi))
    # lengths in the explicit diagram are ~1 m, so floating tolerance is relative to that scale
    assert abs(p.delta_L - q.delta_L) <= 1e-12 * 3
    assert abs(p.delta_L_prime - q.delta_L_prime) <= 1e-12 * 3
    assert q.delta_phi == p.delta_phi


def test_classification(model):
    assert classify_distinguishability(BiphotonParams(0, 0), model) is Distinguishability.COHERENT
    assert classify_distinguishability(BiphotonParams(0, 10 * L_COH), model) is Distinguishability.DISTINGUISHABLE
    assert classify_distinguishability(BiphotonParams(0, L_COH), model) is Distinguishability.PARTIAL


@pytest.mark.parametrize("threshold", [0.0, 1.0, -0.1, 2.0])
def test_classification_threshold_domain(model, threshold):
    with pytest.raises(ConfigError):
        classify_distinguishability(BiphotonParams(0, 0), model, threshold)
