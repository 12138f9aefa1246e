"""Coincidence and one-photon count rates.

The coincidence rate of the two detectors is

    R_AB = C [1 + |g| cos(k0 dL + kd dL' + dphi + arg g)]

with ``g`` the degree of two-photon coherence of the model. One-photon
rates follow from the partial trace over the twin photon: the singles rate
at a detector is the sum of its coincidence rates with every position the
twin can reach (:class:`CoincidenceMap`, :func:`singles_rate`).
"""

from dataclasses import dataclass, field
import math
import warnings

import numpy as np

from .errors import ConfigError, DataError, ModelingError, PumpCoherenceWarning
from .pathdiagram import BiphotonParams, double_pass_params

# |gamma(dL)| below this counts as "not much smaller than the pump coherence length".
PUMP_COHERENCE_TOLERANCE = 1e-3


def _check_scale(C):
    if not (C > 0 and math.isfinite(C)):
        raise ConfigError(f"rate scale C must be positive, got {C!r}", key="C")


def coincidence_rate(params, model, C):
    """Coincidence count rate (counts/s) for biphoton parameters ``params``."""
    _check_scale(C)
    dL = np.asarray(params.delta_L, dtype=float)
    dLp = np.asarray(params.delta_L_prime, dtype=float)
    g = model.degree_of_coherence(dL, dLp)
    phase = model.k0 * dL + model.kd * dLp + np.asarray(params.delta_phi, dtype=float)
    modulus = np.minimum(np.abs(g), 1.0)
    return (C * (1.0 + modulus * np.cos(phase + np.angle(g))))[()]


def case1_rate(delta_L, model, C):
    """Rate at ``delta_L' = 0`` and ``delta_phi = 0``: fringes in ``delta_L`` under the pump envelope."""
    return coincidence_rate(BiphotonParams(delta_L, 0.0, 0.0), model, C)


def contrast_factor(fixed_delta_L, delta_phi, model):
    """``K = gamma(dL) cos(k0 dL + dphi)``, the dip (K < 0) or hump (K > 0) depth."""
    g = model.mode_overlap * model.gamma_pump(fixed_delta_L)
    return np.real(g * np.exp(1j * (model.k0 * np.asarray(fixed_delta_L, float) + delta_phi)))[()]


def case2_rate(delta_L_prime, fixed_delta_L, delta_phi, model, C):
    """Rate ``C [1 + K gamma'(dL')]`` as ``delta_L'`` is swept at fixed ``delta_L`` and ``delta_phi``.

    For non-degenerate models or complex signal-idler envelopes the phase
    no longer factors out, and the full coincidence rate is used.
    """
    _check_scale(C)
    dLp = np.asarray(delta_L_prime, dtype=float)
    if model.kd == 0.0 and model.gamma_si.is_real:
        K = contrast_factor(fixed_delta_L, delta_phi, model)
        return (C * (1.0 + K * np.real(model.gamma_si(dLp))))[()]
    dL = np.broadcast_to(np.asarray(fixed_delta_L, float), dLp.shape)
    dphi = np.broadcast_to(np.asarray(delta_phi, float), dLp.shape)
    return coincidence_rate(BiphotonParams(dL, dLp, dphi), model, C)


def _warn_pump_coherence(delta_L, model):
    if np.any(np.abs(model.gamma_pump(delta_L)) < 1.0 - PUMP_COHERENCE_TOLERANCE):
        warnings.warn(
            "double-pass rate assumes |x_s + x_i| much smaller than the pump coherence length",
            PumpCoherenceWarning,
            stacklevel=3,
        )


def double_pass_rate(x_s, x_i, model, C):
    """Frustrated-creation coincidence rate ``C {1 - gamma'(2x_s - 2x_i) cos[k0 (x_s + x_i)]}``.

    The pump envelope is taken as 1; a :class:`PumpCoherenceWarning` is
    issued where that approximation is poor.
    """
    _check_scale(C)
    p = double_pass_params(x_s, x_i)
    _warn_pump_coherence(p.delta_L, model)
    dL = np.asarray(p.delta_L, dtype=float)
    dLp = np.asarray(p.delta_L_prime, dtype=float)
    g = model.mode_overlap * model.gamma_si(dLp)
    if model.kd == 0.0 and model.gamma_si.is_real:
        return (C * (1.0 - np.real(g) * np.cos(model.k0 * dL)))[()]
    modulus = np.minimum(np.abs(g), 1.0)
    return (C * (1.0 - modulus * np.cos(model.k0 * dL + model.kd * dLp + np.angle(g))))[()]


@dataclass
class CoincidenceMap:
    """For every detector position, the partner positions its twin can reach.

    ``partners[X]`` maps each partner ``Y`` to a callable returning
    ``R_XY`` at a scan point.
    """

    partners: dict = field(default_factory=dict)

    def add(self, x, y, rate_fn, symmetric=True):
        self.partners.setdefault(x, {})[y] = rate_fn
        if symmetric:
            self.partners.setdefault(y, {})[x] = rate_fn
        return self

    def positions(self):
        return list(self.partners)

    def rate(self, x, y, at):
        return self.partners[x][y](at)


def singles_rate(position, cmap, at):
    """One-photon rate at ``position``: the sum of its coincidence rates with all partner positions."""
    partners = cmap.partners.get(position)
    if not partners:
        raise ModelingError(f"detector position {position!r} has no partner positions in the coincidence map")
    total = None
    for fn in partners.values():
        r = np.asarray(fn(at), dtype=float)
        total = r if total is None else total + r
    return total[()]


@dataclass(frozen=True)
class DetectionModel:
    """Detector efficiencies and non-interfering singles background.

    ``background_A``/``background_B`` are expressed as fractions of the
    mean interfering singles rate of that arm; ``coincidence_window`` is in
    seconds.
    """

    eta_A: float = 1.0
    eta_B: float = 1.0
    background_A: float = 0.0
    background_B: float = 0.0
    coincidence_window: float = 1e-9

    def __post_init__(self):
        for name in ("eta_A", "eta_B"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {v!r}", key=name)
        for name in ("background_A", "background_B"):
            v = getattr(self, name)
            if not (v >= 0.0 and math.isfinite(v)):
                raise ConfigError(f"{name} must be non-negative, got {v!r}", key=name)
        if not self.coincidence_window > 0:
            raise ConfigError("coincidence_window must be positive", key="coincidence_window")

    @staticmethod
    def background_for_visibility(ideal_visibility, observed_visibility):
        """Background fraction diluting ``ideal_visibility`` down to ``observed_visibility``."""
        return ideal_visibility / observed_visibility - 1.0


@dataclass(frozen=True)
class RateParams:
    C: float
    detection: DetectionModel = DetectionModel()

    def __post_init__(self):
        _check_scale(self.C)


def apply_detection(ideal_coinc, ideal_singles_A, ideal_singles_B, det, reference_A=None, reference_B=None):
    """Observed (coincidence, singles A, singles B) rates.

    Coincidences scale by ``eta_A * eta_B``. Each singles arm scales by its
    efficiency after adding ``background * reference``, where ``reference``
    is the mean interfering singles level of that arm (defaults to the
    mean of the supplied ideal trace). With the reference at the
    interference-free level, a singles visibility ``V`` becomes
    ``V / (1 + background)``; coincidence visibility is unchanged.
    """
    coinc = np.asarray(ideal_coinc, dtype=float)
    sa = np.asarray(ideal_singles_A, dtype=float)
    sb = np.asarray(ideal_singles_B, dtype=float)
    ref_a = float(np.mean(sa)) if reference_A is None else reference_A
    ref_b = float(np.mean(sb)) if reference_B is None else reference_B
    obs_c = det.eta_A * det.eta_B * coinc
    obs_a = det.eta_A * (sa + det.background_A * ref_a)
    obs_b = det.eta_B * (sb + det.background_B * ref_b)
    return obs_c[()], obs_a[()], obs_b[()]


def visibility(trace, channel="R_AB"):
    """Fringe visibility ``(max - min) / (max + min)``; 0 for an all-zero trace.

    ``trace`` is an array of rates or a :class:`~biphoton.scenarios.SweepTrace`,
    in which case ``channel`` picks the column.
    """
    values = getattr(trace, "column", None)
    values = np.asarray(values(channel) if values else trace, dtype=float)
    if values.size == 0:
        raise DataError("visibility of an empty trace")
    if np.any(values < 0):
        raise DataError("rates must be non-negative", offset=int(np.argmax(values < 0)))
    hi, lo = float(values.max()), float(values.min())
    if hi + lo == 0.0:
        return 0.0
    return (hi - lo) / (hi + lo)
