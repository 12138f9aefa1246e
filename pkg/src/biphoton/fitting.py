"""Fringe, dip and hump fitting.

All traces are fitted with one model,

    R(x) = B {1 + V exp[-((x - x0)/sigma)**2 / 2] cos[k (x - x0) + phi]},

with per-parameter fix/free flags. A dip or hump is the ``k = 0, phi = 0``
special case with ``V`` the signed depth; a pure fringe has
``sigma = inf``.

The minimizer is a damped (Levenberg-Marquardt) least-squares iteration
with Marquardt diagonal scaling and the analytic Jacobian; bounds are
enforced by projecting every trial point.
"""

from dataclasses import dataclass, field
import math
import warnings

import numpy as np

from .errors import ConfigError, DataError, DegenerateFitError, UnreliableFitWarning

PARAM_NAMES = ("B", "V", "x0", "sigma", "k", "phi")
FWHM_PER_SIGMA = 2.0 * math.sqrt(2.0 * math.log(2.0))
HWHM_PER_SIGMA = math.sqrt(2.0 * math.log(2.0))

MAX_ITER = 500
RTOL = 1e-10
MAX_CONDITION = 1e14


def _evaluate(x, p):
    B, V, x0, sigma, k, phi = p
    dx = x - x0
    g = np.exp(-0.5 * (dx / sigma) ** 2)
    return B * (1.0 + V * g * np.cos(k * dx + phi))


def _jacobian(x, p):
    B, V, x0, sigma, k, phi = p
    dx = x - x0
    u = dx / sigma
    g = np.exp(-0.5 * u ** 2)
    arg = k * dx + phi
    c, s = np.cos(arg), np.sin(arg)
    bvg = B * V * g
    return np.column_stack((
        1.0 + V * g * c,
        B * g * c,
        bvg * (c * u / sigma + k * s),
        bvg * c * u ** 2 / sigma,
        -bvg * s * dx,
        -bvg * s,
    ))


@dataclass(frozen=True)
class FringeModel:
    """Fix/free flags plus the values held by fixed parameters.

    ``values`` are used for every fixed parameter and as the fallback
    initial point for free ones.
    """

    free: tuple = (True, True, True, True, True, True)
    values: tuple = (1.0, 0.0, 0.0, 1.0, 0.0, 0.0)

    def __post_init__(self):
        if len(self.free) != 6 or len(self.values) != 6:
            raise ConfigError("fringe model needs six free flags and six values")
        object.__setattr__(self, "free", tuple(bool(f) for f in self.free))
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))

    @classmethod
    def dip(cls, k=0.0, phi=0.0):
        """Dip/hump profile: B, V, x0, sigma free; k and phi fixed."""
        return cls((True, True, True, True, False, False), (1.0, 0.0, 0.0, 1.0, k, phi))

    @classmethod
    def fringe(cls, sigma=math.inf, x0=0.0):
        """Envelope-free fringe: B, V, k, phi free; x0 and sigma fixed."""
        return cls((True, True, False, False, True, True), (1.0, 0.0, x0, sigma, 0.0, 0.0))

    @classmethod
    def full(cls):
        return cls()

    @classmethod
    def from_spec(cls, spec):
        """Parse ``dip``, ``fringe``, ``full``, optionally followed by ``,name=value`` pins."""
        parts = [p.strip() for p in spec.split(",") if p.strip()]
        base = {"dip": cls.dip, "fringe": cls.fringe, "full": cls.full}
        if not parts or parts[0] not in base:
            raise ConfigError(f"model spec must start with one of {sorted(base)}, got {spec!r}", key="model")
        model = base[parts[0]]()
        free, values = list(model.free), list(model.values)
        for pin in parts[1:]:
            name, _, value = pin.partition("=")
            name = name.strip()
            if name not in PARAM_NAMES or not value:
                raise ConfigError(f"bad parameter pin {pin!r}", key="model")
            i = PARAM_NAMES.index(name)
            free[i] = False
            values[i] = float(value)
        return cls(tuple(free), tuple(values))

    @property
    def free_mask(self):
        return np.array(self.free)

    def evaluate(self, x, p):
        return _evaluate(np.asarray(x, dtype=float), np.asarray(p, dtype=float))

    def jacobian(self, x, p):
        """Analytic partial derivatives, one column per parameter in ``PARAM_NAMES`` order."""
        return _jacobian(np.asarray(x, dtype=float), np.asarray(p, dtype=float))


def in_bounds(p):
    B, V, x0, sigma, k, phi = p
    return B > 0 and -1.0 <= V <= 1.0 and sigma > 0 and k >= 0 and all(
        math.isfinite(v) for v in (B, V, x0, phi, k)
    )


def _project(p, floor):
    q = p.copy()
    q[0] = max(q[0], floor[0])
    q[1] = min(max(q[1], -1.0), 1.0)
    q[3] = max(q[3], floor[3])
    q[4] = max(q[4], 0.0)
    return q


def dominant_wavenumber(x, y, pad=16):
    """Angular wave number of the strongest non-DC component of the mean-subtracted trace."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float) - np.mean(y)
    n = y.size
    dx = (x[-1] - x[0]) / (n - 1)
    spec = np.abs(np.fft.rfft(y * np.hanning(n), n=pad * n))
    freqs = np.fft.rfftfreq(pad * n, d=dx)
    i = int(np.argmax(spec))
    if i == 0:
        return 0.0
    if 0 < i < spec.size - 1:
        a, b, c = spec[i - 1], spec[i], spec[i + 1]
        denom = a - 2 * b + c
        shift = 0.5 * (a - c) / denom if denom != 0 else 0.0
        return 2.0 * math.pi * (freqs[i] + shift * (freqs[1] - freqs[0]))
    return 2.0 * math.pi * freqs[i]


def _half_depth_width(x, dev, idx):
    """Full width of the contiguous region around ``idx`` where |dev| exceeds half its extremum."""
    half = 0.5 * abs(dev[idx])
    above = np.abs(dev) >= half
    lo = idx
    while lo > 0 and above[lo - 1]:
        lo -= 1
    hi = idx
    while hi < dev.size - 1 and above[hi + 1]:
        hi += 1
    return max(x[hi] - x[lo], x[1] - x[0])


def initial_guess(x, y, model):
    """Deterministic starting point for the free parameters of ``model``.

    B from the trace mean, V from the largest excursion off the mean, x0 at
    that excursion, sigma from the half-depth width, k from the dominant
    spectral peak. For fringes (k free and non-zero) V and phi come from a
    linear cosine/sine projection at that k.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    p = np.array(model.values, dtype=float)
    free = model.free_mask
    B = float(np.mean(y))
    if B <= 0:
        raise DegenerateFitError("trace mean is not positive; baseline cannot be initialized",
                                 {"mean": B})
    dev = y - B
    idx = int(np.argmax(np.abs(dev)))
    guess = {
        "B": B,
        "V": float(np.clip(dev[idx] / B, -1.0, 1.0)),
        "x0": float(x[idx]),
        "sigma": _half_depth_width(x, dev, idx) / 2.0 / HWHM_PER_SIGMA,
    }
    if free[4]:
        guess["k"] = dominant_wavenumber(x, y)
    for i, name in enumerate(PARAM_NAMES):
        if free[i] and name in guess:
            p[i] = guess[name]
    if free[4] and p[4] > 0:
        env = np.exp(-0.5 * ((x - p[2]) / p[3]) ** 2)
        basis = np.column_stack((env * np.cos(p[4] * (x - p[2])), env * np.sin(p[4] * (x - p[2]))))
        (a, b), *_ = np.linalg.lstsq(basis, dev, rcond=None)
        if free[1]:
            p[1] = float(np.clip(math.hypot(a, b) / B, 0.0, 1.0))
        if free[5]:
            p[5] = math.atan2(-b, a)
    return p


@dataclass
class FitResult:
    params: np.ndarray
    errors: np.ndarray
    rss: float
    converged: bool
    iterations: int
    free: tuple
    history: list = field(default_factory=list, repr=False)

    def __getitem__(self, name):
        return float(self.params[PARAM_NAMES.index(name)])

    def error(self, name):
        return float(self.errors[PARAM_NAMES.index(name)])

    @property
    def errors_reliable(self):
        return self.converged

    @property
    def fwhm(self):
        """Envelope full width at half maximum, ``2 sqrt(2 ln 2) sigma``."""
        return FWHM_PER_SIGMA * self["sigma"]

    @property
    def period(self):
        k = self["k"]
        return 2.0 * math.pi / k if k > 0 else math.inf

    def as_row(self):
        row = {}
        for i, name in enumerate(PARAM_NAMES):
            row[name] = float(self.params[i])
            row[f"{name}_err"] = float(self.errors[i])
            row[f"{name}_free"] = int(self.free[i])
        row.update(fwhm=self.fwhm, rss=self.rss, converged=int(self.converged), iterations=self.iterations)
        return row

    def report(self):
        lines = [f"fit {'converged' if self.converged else 'DID NOT CONVERGE (errors unreliable)'} "
                 f"after {self.iterations} iterations, rss = {self.rss:.6g}"]
        for i, name in enumerate(PARAM_NAMES):
            tag = "" if self.free[i] else "  (fixed)"
            lines.append(f"  {name:>5} = {self.params[i]: .10g} +/- {self.errors[i]:.3g}{tag}")
        lines.append(f"  fwhm  = {self.fwhm:.10g}")
        return "\n".join(lines)


def _condition_check(A, p, free):
    d = np.sqrt(np.diag(A))
    names = [n for n, f in zip(PARAM_NAMES, free) if f]
    if not np.all(np.isfinite(A)) or np.any(d == 0):
        dead = [n for n, di in zip(names, d) if not di > 0]
        raise DegenerateFitError(
            f"normal equations are singular: no sensitivity to {', '.join(dead) or 'some parameters'}",
            {"params": p.tolist(), "insensitive": dead},
        )
    cond = np.linalg.cond(A / np.outer(d, d))
    if not cond < MAX_CONDITION:
        raise DegenerateFitError(
            f"normal equations are ill-conditioned (scaled condition number {cond:.3g})",
            {"params": p.tolist(), "condition": float(cond), "free": names},
        )


def fit_trace(x, y, model, init=None, max_iter=MAX_ITER, rtol=RTOL):
    """Least-squares fit of ``model`` to the samples ``(x, y)``.

    ``init`` is a full six-parameter starting vector (fixed entries are
    taken from ``model.values``); omitted, :func:`initial_guess` is used.
    Raises :class:`DegenerateFitError` when the normal equations are
    singular; non-convergence is reported in the result, not raised.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    free = model.free_mask
    n_free = int(free.sum())
    if x.shape != y.shape or x.ndim != 1:
        raise DataError("fit needs matching 1-d x and y")
    if n_free == 0:
        raise ConfigError("fit needs at least one free parameter", key="model")
    if x.size < 2 * n_free:
        raise DataError(f"{x.size} points are too few for {n_free} free parameters (need {2 * n_free})")
    if not np.all(np.isfinite(y)):
        raise DataError("trace contains non-finite values")
    p = initial_guess(x, y, model) if init is None else np.asarray(init, dtype=float).copy()
    p[~free] = np.asarray(model.values)[~free]
    if not in_bounds(p):
        raise ConfigError(f"initial parameters out of bounds: {dict(zip(PARAM_NAMES, p))}", key="init")
    floor = np.array([abs(p[0]) * 1e-12, 0.0, 0.0, abs(p[3]) * 1e-12 if math.isfinite(p[3]) else 0.0, 0.0, 0.0])

    r = y - _evaluate(x, p)
    S = float(r @ r)
    J = _jacobian(x, p)[:, free]
    A = J.T @ J
    _condition_check(A, p, free)
    history = [S]
    lam = 1e-3
    converged = False
    it = 0
    while it < max_iter and not converged:
        it += 1
        if S == 0.0:
            converged = True
            break
        g = J.T @ r
        D = np.diag(np.diag(A))
        while True:
            try:
                step = np.linalg.solve(A + lam * D, g)
            except np.linalg.LinAlgError:
                step = None
            if step is not None and np.all(np.isfinite(step)):
                trial = p.copy()
                trial[free] += step
                trial = _project(trial, floor)
                r_new = y - _evaluate(x, trial)
                S_new = float(r_new @ r_new)
                if S_new < S:
                    break
            lam *= 10.0
            if lam > 1e16:
                # No damped step improves the objective: at a minimum to machine precision.
                converged = True
                break
        if converged:
            break
        decrease = (S - S_new) / S
        p, r, S = trial, r_new, S_new
        history.append(S)
        lam = max(lam / 10.0, 1e-12)
        J = _jacobian(x, p)[:, free]
        A = J.T @ J
        if decrease < rtol:
            converged = True

    _condition_check(A, p, free)
    dof = x.size - n_free
    cov = np.linalg.inv(A) * (S / dof)
    errors = np.zeros(6)
    errors[free] = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    return FitResult(p, errors, S, converged, it, tuple(bool(f) for f in free), history)


def fit_sweep(trace, channel="R_AB", model=None, init=None):
    """Fit one rate column of a :class:`~biphoton.scenarios.SweepTrace` against its scan coordinate."""
    model = FringeModel.dip() if model is None else model
    return fit_trace(trace.coordinate, trace.column(channel), model, init)


def dip_visibility(result):
    """Baseline-referenced dip/hump visibility ``|V|`` (the profile reaches ``B (1 + V)`` at x0)."""
    if not result.converged:
        warnings.warn("dip visibility taken from an unconverged fit", UnreliableFitWarning, stacklevel=2)
    return abs(result["V"])


def fringe_visibility(result, x):
    """``(max - min) / (max + min)`` of the fitted curve over the points ``x``."""
    if not result.converged:
        warnings.warn("fringe visibility taken from an unconverged fit", UnreliableFitWarning, stacklevel=2)
    curve = _evaluate(np.asarray(x, dtype=float), result.params)
    hi, lo = curve.max(), curve.min()
    return float((hi - lo) / (hi + lo)) if hi + lo > 0 else 0.0


def _fd_steps(x, p, rel):
    B, V, x0, sigma, k, phi = p
    span = float(np.max(np.abs(x - x0))) or 1.0
    length = 1.0 / k if k * sigma > 1.0 else sigma
    if not math.isfinite(length):
        length = span
    return np.array([
        rel * max(abs(B), 1e-300),
        rel,
        rel * length,
        rel * sigma,
        rel / span,
        rel,
    ])


def finite_difference_check(model, point, x, rel=1e-6):
    """Max relative discrepancy between the analytic Jacobian and central differences.

    Steps are ``rel`` times each parameter's natural scale. Per parameter
    the discrepancy is normalized by the larger of the analytic gradient
    norm and a floor of ``1e-3`` model-output per natural scale, so exactly
    vanishing gradients do not divide by zero.
    """
    x = np.asarray(x, dtype=float)
    p = np.asarray(point, dtype=float)
    if not in_bounds(p):
        raise ConfigError("finite-difference point must lie inside the model bounds", key="point")
    J = model.jacobian(x, p)
    h = _fd_steps(x, p, rel)
    out_scale = float(np.max(np.abs(model.evaluate(x, p))))
    worst = 0.0
    for i in range(6):
        if not model.free[i]:
            continue
        hi, lo = p.copy(), p.copy()
        hi[i] += h[i]
        lo[i] -= h[i]
        fd = (model.evaluate(x, hi) - model.evaluate(x, lo)) / (2.0 * h[i])
        denom = max(float(np.max(np.abs(J[:, i]))), 1e-3 * out_scale * rel / h[i])
        worst = max(worst, float(np.max(np.abs(J[:, i] - fd))) / denom)
    return worst


def fringe_period(x, y):
    """Fringe period from the rising zero crossings of the mean-subtracted trace.

    Crossings are located by linear interpolation and the period is the
    least-squares slope of crossing position against crossing index.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float) - np.mean(y)
    rising = np.flatnonzero((y[:-1] < 0) & (y[1:] >= 0))
    if rising.size < 2:
        raise DataError("fewer than two rising zero crossings; no fringe period")
    t = -y[rising] / (y[rising + 1] - y[rising])
    xc = x[rising] + t * (x[rising + 1] - x[rising])
    slope, _ = np.polyfit(np.arange(xc.size), xc, 1)
    return float(slope)
