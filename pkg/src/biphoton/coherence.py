"""Normalized correlation envelopes of the pump and signal-idler fields.

The pump envelope ``gamma(delta_L)`` and the signal-idler envelope
``gamma'(delta_L_prime)`` are represented by :class:`CorrelationEnvelope`,
either in closed Gaussian form or as a complex table computed from a power
spectrum. For a power spectral density ``S(k)`` in vacuum wave number the
envelope at delay length ``x`` is

    gamma(x) = int S(k) exp(i (k - k_c) x) dk / int S(k) dk

with ``k_c`` the carrier wave number, so a Gaussian ``S`` of rms width
``sigma_k`` gives ``exp(-x**2 / (2 * l_coh**2))`` with ``l_coh = 1/sigma_k``.
"""

from dataclasses import dataclass, field
import csv
import enum
import math
from pathlib import Path
import warnings

import numpy as np

from .errors import ConfigError, CoverageWarning, InputDomainError, ResolutionError

FWHM_PER_SIGMA = 2.0 * math.sqrt(2.0 * math.log(2.0))
# sinc(u)**2 == 1/2 at u = SINC2_HALF_MAX (numpy's normalized sinc).
SINC2_HALF_MAX = 0.44294647
SINC2_SIDE_LOBES = 20

MIN_TABLE_POINTS = 512
MIN_POINTS_PER_COHERENCE_LENGTH = 8
MIN_SPAN_COHERENCE_LENGTHS = 5.0


def gamma_gaussian(delta, l_coh):
    """Gaussian envelope ``exp(-(delta/l_coh)**2 / 2)``."""
    if not l_coh > 0 or not math.isfinite(l_coh):
        raise ConfigError(f"coherence length must be positive, got {l_coh!r}", key="l_coh")
    delta = np.asarray(delta, dtype=float)
    return np.exp(-0.5 * (delta / l_coh) ** 2)[()]


class Convention(str, enum.Enum):
    """Bandwidth to coherence-length conversion rules."""

    GAUSSIAN_RMS_ENVELOPE = "gaussian_rms_envelope"
    SIMPLE = "simple"


def coherence_length_from_bandwidth(lambda0, dlambda_fwhm, convention=Convention.GAUSSIAN_RMS_ENVELOPE):
    """Coherence length for a spectrum of FWHM ``dlambda_fwhm`` centred at ``lambda0``.

    ``gaussian_rms_envelope`` returns ``sqrt(2 ln 2)/pi * lambda0**2 / dlambda``,
    the ``l_coh`` of the Gaussian envelope belonging to a Gaussian power
    spectrum with that FWHM. ``simple`` returns ``lambda0**2 / dlambda``.
    """
    if not (lambda0 > 0 and math.isfinite(lambda0)):
        raise ConfigError(f"lambda0 must be positive, got {lambda0!r}", key="lambda0")
    if not (0 < dlambda_fwhm < lambda0):
        raise ConfigError(f"bandwidth must lie in (0, lambda0), got {dlambda_fwhm!r}", key="bandwidth")
    try:
        convention = Convention(convention)
    except ValueError:
        raise ConfigError(f"unknown coherence-length convention {convention!r}", key="convention") from None
    simple = lambda0 ** 2 / dlambda_fwhm
    if convention is Convention.SIMPLE:
        return simple
    return math.sqrt(2.0 * math.log(2.0)) / math.pi * simple


class SpectrumShape(str, enum.Enum):
    GAUSSIAN = "gaussian"
    SINC_SQUARED_AMPLITUDE = "sinc_squared_amplitude"
    TABULATED = "tabulated"


@dataclass(frozen=True)
class Spectrum:
    """Power spectrum of a field.

    Parametric shapes use ``center_wavelength`` and ``bandwidth_fwhm``
    (meters). Tabulated spectra carry ``samples`` as ``(wavelength_m,
    spectral_density)`` rows, the density taken per unit wavelength.
    """

    shape: SpectrumShape
    center_wavelength: float
    bandwidth_fwhm: float = None
    samples: np.ndarray = None

    def __post_init__(self):
        object.__setattr__(self, "shape", SpectrumShape(self.shape))
        if not (self.center_wavelength > 0 and math.isfinite(self.center_wavelength)):
            raise ConfigError("center_wavelength must be positive", key="center_wavelength")
        if self.shape is SpectrumShape.TABULATED:
            if self.samples is None:
                raise ConfigError("tabulated spectrum needs samples", key="samples")
            samples = np.asarray(self.samples, dtype=float)
            if samples.ndim != 2 or samples.shape[1] != 2 or samples.shape[0] < 8:
                raise ConfigError("tabulated spectrum needs at least 8 (wavelength, amplitude) rows", key="samples")
            if not np.all(np.isfinite(samples)):
                raise InputDomainError("tabulated spectrum contains non-finite values")
            if np.any(np.diff(samples[:, 0]) <= 0):
                raise ConfigError("tabulated wavelengths must be strictly increasing", key="samples")
            if np.any(samples[:, 0] <= 0):
                raise ConfigError("tabulated wavelengths must be positive", key="samples")
            if np.any(samples[:, 1] < 0) or not np.any(samples[:, 1] > 0):
                raise ConfigError("tabulated amplitudes must be non-negative and not all zero", key="samples")
            samples.setflags(write=False)
            object.__setattr__(self, "samples", samples)
        else:
            bw = self.bandwidth_fwhm
            if bw is None or not (bw > 0 and math.isfinite(bw)):
                raise ConfigError("bandwidth_fwhm must be positive for parametric spectra", key="bandwidth_fwhm")

    @classmethod
    def gaussian(cls, center_wavelength, bandwidth_fwhm):
        return cls(SpectrumShape.GAUSSIAN, center_wavelength, bandwidth_fwhm)

    @classmethod
    def sinc_squared(cls, center_wavelength, bandwidth_fwhm):
        return cls(SpectrumShape.SINC_SQUARED_AMPLITUDE, center_wavelength, bandwidth_fwhm)

    @classmethod
    def tabulated(cls, wavelengths, amplitudes, center_wavelength=None):
        samples = np.column_stack([np.asarray(wavelengths, float), np.asarray(amplitudes, float)])
        if center_wavelength is None:
            weights = samples[:, 1]
            center_wavelength = float(np.sum(samples[:, 0] * weights) / np.sum(weights))
        return cls(SpectrumShape.TABULATED, center_wavelength, samples=samples)

    @property
    def carrier_wavenumber(self):
        return 2.0 * math.pi / self.center_wavelength

    def _fwhm_wavenumber(self):
        # Linearized at the center; exact enough for bandwidth << center.
        return 2.0 * math.pi * self.bandwidth_fwhm / self.center_wavelength ** 2

    def support(self):
        """Wave-number interval ``(k_lo, k_hi)`` carrying the spectrum, and its native sample step."""
        kc = self.carrier_wavenumber
        if self.shape is SpectrumShape.GAUSSIAN:
            sigma_k = self._fwhm_wavenumber() / FWHM_PER_SIGMA
            return kc - 12.0 * sigma_k, kc + 12.0 * sigma_k, 24.0 * sigma_k / 4096
        if self.shape is SpectrumShape.SINC_SQUARED_AMPLITUDE:
            width = self._sinc_width()
            lobes = SINC2_SIDE_LOBES + 1
            return kc - lobes * width, kc + lobes * width, width / 64
        k = 2.0 * math.pi / self.samples[::-1, 0]
        return float(k[0]), float(k[-1]), float(np.min(np.diff(k)))

    def _sinc_width(self):
        return self._fwhm_wavenumber() / (2.0 * SINC2_HALF_MAX)

    def density(self, k=None):
        """Spectral density per unit wave number, ``(k, S(k))`` with k ascending.

        Without ``k`` the spectrum's own support is sampled. Tabulated
        spectra are linearly interpolated (zero outside the table).
        """
        if k is None:
            k_lo, k_hi, dk = self.support()
            k = np.linspace(k_lo, k_hi, int(round((k_hi - k_lo) / dk)) + 1)
        k = np.asarray(k, dtype=float)
        kc = self.carrier_wavenumber
        if self.shape is SpectrumShape.GAUSSIAN:
            sigma_k = self._fwhm_wavenumber() / FWHM_PER_SIGMA
            return k, np.exp(-0.5 * ((k - kc) / sigma_k) ** 2)
        if self.shape is SpectrumShape.SINC_SQUARED_AMPLITUDE:
            s = np.sinc((k - kc) / self._sinc_width()) ** 2
            s[np.abs(k - kc) > (SINC2_SIDE_LOBES + 1) * self._sinc_width()] = 0.0
            return k, s
        lam, amp = self.samples[::-1, 0], self.samples[::-1, 1]
        k_tab = 2.0 * math.pi / lam
        dens = amp * lam ** 2 / (2.0 * math.pi)
        return k, np.interp(k, k_tab, dens, left=0.0, right=0.0)

    def rms_coherence_length(self):
        """``1/sigma_k`` with ``sigma_k`` the rms wave-number width of the spectrum."""
        k, s = self.density()
        w = np.trapezoid(s, k)
        mean = np.trapezoid(k * s, k) / w
        var = np.trapezoid((k - mean) ** 2 * s, k) / w
        if var <= 0:
            return math.inf
        return 1.0 / math.sqrt(var)


class EnvelopeKind(str, enum.Enum):
    CLOSED_FORM_GAUSSIAN = "closed_form_gaussian"
    NUMERIC_TABLE = "numeric_table"


@dataclass(frozen=True)
class CorrelationEnvelope:
    """A normalized correlation function of delay length (meters).

    Closed-form envelopes are ``exp(-((x - center_offset)/coherence_length)**2 / 2)``.
    Numeric tables hold complex samples on a uniform grid and interpolate
    linearly; outside the grid they evaluate to 0.
    """

    kind: EnvelopeKind
    coherence_length: float = None
    center_offset: float = 0.0
    grid: np.ndarray = field(default=None, repr=False)
    values: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "kind", EnvelopeKind(self.kind))
        if not math.isfinite(self.center_offset):
            raise InputDomainError("center_offset must be finite")
        if self.kind is EnvelopeKind.CLOSED_FORM_GAUSSIAN:
            if self.coherence_length is None or not (self.coherence_length > 0):
                raise ConfigError("closed-form envelope needs a positive coherence_length", key="l_coh")
            return
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=complex)
        if grid.ndim != 1 or grid.shape != values.shape or grid.size < 2:
            raise ConfigError("envelope table needs matching 1-d grid and values", key="table")
        steps = np.diff(grid)
        if np.any(steps <= 0) or not np.allclose(steps, steps[0], rtol=1e-9, atol=0):
            raise ResolutionError("envelope table grid must be uniform and increasing")
        modulus = np.abs(values)
        if np.any(modulus > 1.0 + 1e-12):
            raise InputDomainError("envelope table values exceed unit modulus")
        grid.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    @classmethod
    def gaussian(cls, coherence_length, center_offset=0.0):
        return cls(EnvelopeKind.CLOSED_FORM_GAUSSIAN, coherence_length, center_offset)

    @classmethod
    def from_table(cls, grid, values, coherence_length=None):
        """Build a table envelope; ``center_offset`` is the grid point of peak modulus."""
        grid = np.asarray(grid, dtype=float)
        values = np.asarray(values, dtype=complex)
        center = float(grid[np.argmax(np.abs(values))]) if grid.size else 0.0
        return cls(EnvelopeKind.NUMERIC_TABLE, coherence_length, center, grid, values)

    @property
    def is_real(self):
        return self.kind is EnvelopeKind.CLOSED_FORM_GAUSSIAN or not np.any(self.values.imag)

    @property
    def span(self):
        if self.kind is EnvelopeKind.CLOSED_FORM_GAUSSIAN:
            return (-math.inf, math.inf)
        return (float(self.grid[0]), float(self.grid[-1]))

    def __call__(self, delta):
        return evaluate_envelope(self, delta)[0]


def evaluate_envelope(env, delta):
    """Evaluate ``env`` at ``delta``; returns ``(value, in_range)``.

    ``value`` is complex. For tables, points outside the tabulated range
    evaluate to 0 and have ``in_range`` False.
    """
    delta = np.asarray(delta, dtype=float)
    if env.kind is EnvelopeKind.CLOSED_FORM_GAUSSIAN:
        value = np.exp(-0.5 * ((delta - env.center_offset) / env.coherence_length) ** 2).astype(complex)
        return value[()], np.ones(delta.shape, dtype=bool)[()]
    grid = env.grid
    in_range = (delta >= grid[0]) & (delta <= grid[-1])
    re = np.interp(delta, grid, env.values.real, left=0.0, right=0.0)
    im = np.interp(delta, grid, env.values.imag, left=0.0, right=0.0)
    value = re + 1j * im
    value = np.where(in_range, value, 0.0)
    return value[()], in_range[()]


def delay_grid(half_span, points=1024):
    """Uniform symmetric delay grid with a node at 0 and ``points`` nodes.

    The positive end sits exactly at ``half_span``.
    """
    if points < 4 or points % 2:
        raise ResolutionError("delay grid needs an even number of at least 4 points")
    step = half_span / (points // 2 - 1)
    return (np.arange(points) - points // 2) * step


def _uniform_wavenumber_grid(spec, max_delay, min_points=4097):
    """Uniform wave-number grid over the spectrum, fine enough to avoid aliasing out to ``max_delay``."""
    k_lo, k_hi, dk_native = spec.support()
    # The trapezoid sum over uniform k is periodic in delay with period 2*pi/dk.
    dk_alias = 2.0 * math.pi / (4.0 * max_delay) if max_delay > 0 else math.inf
    dk = min(dk_alias, dk_native / 2.0, (k_hi - k_lo) / (min_points - 1))
    n = int(math.ceil((k_hi - k_lo) / dk)) + 1
    return np.linspace(k_lo, k_hi, n)


def envelope_from_spectrum(spec, grid, chunk=256):
    """Numeric correlation envelope of the power spectrum ``spec`` on ``grid``.

    Integrates ``S(k) exp(i (k - k_c) x)`` by the trapezoid rule on a
    uniform wave-number grid and normalizes to unit peak modulus.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < MIN_TABLE_POINTS:
        raise ResolutionError(f"delay grid needs at least {MIN_TABLE_POINTS} points, got {grid.size}")
    dx = float(grid[1] - grid[0])
    l_est = spec.rms_coherence_length()
    if math.isfinite(l_est) and l_est / dx < MIN_POINTS_PER_COHERENCE_LENGTH:
        raise ResolutionError(
            f"delay grid step {dx:.3e} m gives {l_est / dx:.2f} points per coherence length "
            f"(need {MIN_POINTS_PER_COHERENCE_LENGTH}; estimated l_coh {l_est:.3e} m)"
        )
    if math.isfinite(l_est) and min(-grid[0], grid[-1]) < MIN_SPAN_COHERENCE_LENGTHS * l_est * (1 - 1e-9):
        warnings.warn(
            f"delay grid spans less than +/-{MIN_SPAN_COHERENCE_LENGTHS:g} estimated coherence lengths",
            CoverageWarning,
            stacklevel=2,
        )
    max_delay = float(np.max(np.abs(grid)))
    ku, su = spec.density(_uniform_wavenumber_grid(spec, max_delay))
    weights = np.full(ku.size, ku[1] - ku[0])
    weights[0] *= 0.5
    weights[-1] *= 0.5
    ws = weights * su
    norm = ws.sum()
    dk = ku - spec.carrier_wavenumber
    values = np.empty(grid.size, dtype=complex)
    for start in range(0, grid.size, chunk):
        x = grid[start:start + chunk]
        values[start:start + chunk] = np.exp(1j * np.outer(x, dk)) @ ws
    values /= norm
    peak = np.max(np.abs(values))
    values /= peak
    return CorrelationEnvelope.from_table(grid, values, coherence_length=l_est)


@dataclass(frozen=True)
class CoherenceModel:
    """Pump and signal-idler envelopes plus the mean vacuum wave numbers.

    ``k0`` is the pump wave number, ``kd = (k_s0 - k_i0)/2``; a degenerate
    model has ``kd`` forced to exactly 0. ``mode_overlap`` in [0, 1]
    multiplies the interference term to account for imperfect mode
    matching of the two alternatives.
    """

    gamma_pump: CorrelationEnvelope
    gamma_si: CorrelationEnvelope
    k0: float
    kd: float = 0.0
    degenerate: bool = True
    mode_overlap: float = 1.0

    def __post_init__(self):
        if not (self.k0 > 0 and math.isfinite(self.k0)):
            raise ConfigError(f"k0 must be positive, got {self.k0!r}", key="k0")
        if not math.isfinite(self.kd):
            raise ConfigError("kd must be finite", key="kd")
        if self.degenerate:
            object.__setattr__(self, "kd", 0.0)
        if not 0.0 <= self.mode_overlap <= 1.0:
            raise ConfigError(f"mode_overlap must lie in [0, 1], got {self.mode_overlap!r}", key="mode_overlap")

    @classmethod
    def gaussian(cls, lambda0=363.8e-9, l_coh=100e-6, l_coh_pump=5e-2, kd=0.0,
                 si_offset=0.0, mode_overlap=1.0):
        """Gaussian pump and signal-idler envelopes; ``lambda0`` is the pump vacuum wavelength."""
        return cls(
            gamma_pump=CorrelationEnvelope.gaussian(l_coh_pump),
            gamma_si=CorrelationEnvelope.gaussian(l_coh, si_offset),
            k0=2.0 * math.pi / lambda0,
            kd=kd,
            degenerate=(kd == 0.0),
            mode_overlap=mode_overlap,
        )

    @property
    def lambda0(self):
        return 2.0 * math.pi / self.k0

    def degree_of_coherence(self, delta_L, delta_L_prime):
        """Complex ``mode_overlap * gamma(delta_L) * gamma'(delta_L_prime)``."""
        return self.mode_overlap * self.gamma_pump(delta_L) * self.gamma_si(delta_L_prime)


def read_spectrum_csv(path, center_wavelength=None):
    """Read a two-column ``wavelength_nm, amplitude`` CSV into a tabulated :class:`Spectrum`.

    A non-numeric first row is treated as a header; ``#`` lines are skipped.
    """
    rows, header_seen = [], False
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or row[0].lstrip().startswith("#"):
                continue
            try:
                rows.append((float(row[0]), float(row[1])))
            except (ValueError, IndexError):
                if rows or header_seen:
                    raise ConfigError(f"{path}: unparseable spectrum row", line=lineno) from None
                header_seen = True
    data = np.array(rows, dtype=float).reshape(-1, 2)
    return Spectrum.tabulated(data[:, 0] * 1e-9, data[:, 1], center_wavelength)


def write_envelope_csv(env, path, grid=None):
    """Write ``delay_um, re, im`` rows; closed-form envelopes need an explicit ``grid``."""
    if grid is None:
        if env.kind is not EnvelopeKind.NUMERIC_TABLE:
            raise ConfigError("closed-form envelope export needs a delay grid", key="grid")
        grid = env.grid
    grid = np.asarray(grid, dtype=float)
    values = env(grid)
    with open(Path(path), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["delay_um", "re", "im"])
        for x, v in zip(grid, np.atleast_1d(values)):
            writer.writerow([repr(float(x) * 1e6), repr(float(v.real)), repr(float(v.imag))])


def read_envelope_csv(path):
    """Inverse of :func:`write_envelope_csv`; a missing ``im`` column means a real envelope."""
    data = np.genfromtxt(path, delimiter=",", names=True, comments="#")
    grid = np.atleast_1d(data["delay_um"]) * 1e-6
    values = np.atleast_1d(data["re"]).astype(complex)
    if "im" in data.dtype.names:
        values = values + 1j * np.atleast_1d(data["im"])
    return CorrelationEnvelope.from_table(grid, values)
