"""Synthetic detector time tags and the windowed coincidence correlator.

Timestamps are integer picoseconds. Pairs are emitted by a homogeneous
Poisson process; each member is kept with its arm's efficiency and gets
independent Gaussian jitter, and every arm adds an uncorrelated Poisson
background. Streams are serialized either as binary (16-byte header, then
little-endian int64 timestamps) or as single-column CSV.

Binary header layout (little-endian)::

    offset  size  field
    0       4     magic  b"BPTT"
    4       2     format version (1)
    6       2     detector id (0 = A, 1 = B, other ids allowed)
    8       8     tag count
"""

from dataclasses import dataclass, field
import math
import os
from pathlib import Path
import struct
import tempfile

import numpy as np

from ._kernels import count_coincidences
from .errors import ConfigError, DataError

PS_PER_S = 1_000_000_000_000
MAGIC = b"BPTT"
FORMAT_VERSION = 1
HEADER = struct.Struct("<4sHHQ")
DETECTOR_IDS = {"A": 0, "B": 1}
DETECTOR_NAMES = {v: k for k, v in DETECTOR_IDS.items()}


def seconds_to_ps(t):
    return int(round(t * PS_PER_S))


@dataclass
class TagStream:
    """Sorted detection timestamps (int64 ps) of one detector arm."""

    detector: str
    timestamps: np.ndarray
    duration_ps: int = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        ts = np.ascontiguousarray(self.timestamps, dtype=np.int64)
        bad = first_unsorted(ts)
        if bad is not None:
            raise DataError(f"timestamps of detector {self.detector} not sorted at index {bad}", offset=bad)
        if ts.size and ts[0] < 0:
            raise DataError("negative timestamp", offset=0)
        if self.duration_ps is not None and ts.size and ts[-1] > self.duration_ps:
            raise DataError("timestamp beyond stream duration", offset=int(np.argmax(ts > self.duration_ps)))
        self.timestamps = ts

    def __len__(self):
        return self.timestamps.size

    @property
    def duration(self):
        """Duration in seconds, or None when unknown."""
        return None if self.duration_ps is None else self.duration_ps / PS_PER_S


def first_unsorted(ts):
    """Index of the first timestamp smaller than its predecessor, or None."""
    if ts.size < 2:
        return None
    dec = np.flatnonzero(ts[1:] < ts[:-1])
    return int(dec[0]) + 1 if dec.size else None


@dataclass(frozen=True)
class GenSpec:
    """Tag-generation parameters. Rates in 1/s, times in seconds."""

    pair_rate: float
    duration: float
    seed: int = 0
    eta_A: float = 1.0
    eta_B: float = 1.0
    background_rate_A: float = 0.0
    background_rate_B: float = 0.0
    jitter: float = 0.0

    def __post_init__(self):
        for name in ("pair_rate", "background_rate_A", "background_rate_B", "jitter"):
            v = getattr(self, name)
            if not (v >= 0 and math.isfinite(v)):
                raise ConfigError(f"{name} must be non-negative, got {v!r}", key=name)
        for name in ("eta_A", "eta_B"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {v!r}", key=name)
        if not (self.duration >= 0 and math.isfinite(self.duration)):
            raise ConfigError("duration must be non-negative", key="duration")

    def singles_rate(self, arm):
        """Expected detected singles rate of ``arm`` ('A' or 'B')."""
        eta = self.eta_A if arm == "A" else self.eta_B
        bg = self.background_rate_A if arm == "A" else self.background_rate_B
        return self.pair_rate * eta + bg


def _arm(rng, pair_times, eta, background_rate, jitter_ps, duration_ps, duration):
    kept = pair_times[rng.random(pair_times.size) < eta]
    if jitter_ps > 0:
        kept = kept + np.rint(rng.normal(0.0, jitter_ps, kept.size)).astype(np.int64)
        kept = kept[(kept >= 0) & (kept <= duration_ps)]
    n_bg = rng.poisson(background_rate * duration)
    bg = rng.integers(0, duration_ps, size=n_bg, endpoint=True)
    ts = np.concatenate((kept, bg))
    ts.sort(kind="stable")
    return ts


def generate_tags(spec):
    """Generate the (A, B) tag streams for ``spec``; fully determined by ``spec.seed``."""
    duration_ps = seconds_to_ps(spec.duration)
    pair_seq, seq_a, seq_b = np.random.SeedSequence(spec.seed).spawn(3)
    rng = np.random.default_rng(pair_seq)
    n_pairs = rng.poisson(spec.pair_rate * spec.duration)
    pairs = np.sort(rng.integers(0, duration_ps, size=n_pairs, endpoint=True))
    jitter_ps = spec.jitter * PS_PER_S
    meta = {
        "pair_rate": spec.pair_rate,
        "seed": spec.seed,
        "duration": spec.duration,
        "pairs_emitted": int(n_pairs),
    }
    streams = []
    for name, seq, eta, bg in (
        ("A", seq_a, spec.eta_A, spec.background_rate_A),
        ("B", seq_b, spec.eta_B, spec.background_rate_B),
    ):
        ts = _arm(np.random.default_rng(seq), pairs, eta, bg, jitter_ps, duration_ps, spec.duration)
        streams.append(TagStream(name, ts, duration_ps, dict(meta, true_singles_rate=spec.singles_rate(name))))
    return tuple(streams)


def accidental_estimate(r_a, r_b, window):
    """Accidental coincidence rate ``r_a * r_b * 2 * window`` for a symmetric +-window."""
    if r_a < 0 or r_b < 0 or window < 0:
        raise ConfigError("accidental estimate needs non-negative rates and window")
    return r_a * r_b * 2.0 * window


@dataclass(frozen=True)
class CoincidenceResult:
    coincidences: int
    singles_A: int
    singles_B: int
    window: float
    accidentals: float
    duration: float

    def as_row(self):
        return {
            "coincidences": self.coincidences,
            "singles_A": self.singles_A,
            "singles_B": self.singles_B,
            "window_s": self.window,
            "accidentals_estimated": self.accidentals,
            "duration_s": self.duration,
        }


def correlate(a, b, window, duration=None, use_numba=None):
    """Count coincidences ``|t_a - t_b| <= window`` (seconds) with greedy one-to-one pairing.

    ``duration`` (seconds) defaults to the longer stream duration, or the
    span up to the last tag when neither stream knows its duration.
    """
    if not window > 0:
        raise ConfigError("coincidence window must be positive", key="window")
    for s in (a, b):
        bad = first_unsorted(s.timestamps)
        if bad is not None:
            raise DataError(f"stream {s.detector} not sorted at index {bad}", offset=bad)
    n = count_coincidences(a.timestamps, b.timestamps, seconds_to_ps(window), use_numba=use_numba)
    if duration is None:
        known = [s.duration for s in (a, b) if s.duration is not None]
        if known:
            duration = max(known)
        else:
            last = max([int(s.timestamps[-1]) for s in (a, b) if len(s)] or [0])
            duration = (last + 1) / PS_PER_S
    acc = accidental_estimate(len(a) / duration, len(b) / duration, window) * duration if duration > 0 else 0.0
    return CoincidenceResult(n, len(a), len(b), window, acc, duration)


@dataclass(frozen=True)
class RateCheckReport:
    """Empirical counts against analytic expectations, with Poisson z-scores."""

    empirical: dict
    analytic: dict
    z: dict

    def passed(self, limit=4.0):
        return all(abs(v) <= limit for v in self.z.values())


def _z(observed, expected):
    if expected > 0:
        return (observed - expected) / math.sqrt(expected)
    return 0.0 if observed == 0 else math.inf


def empirical_rate_check(spec, window, use_numba=None):
    """Generate streams for ``spec``, correlate them and compare against the analytic counts.

    Expected true coincidences ``pair_rate T eta_A eta_B`` are reduced by
    the probability ``erf(window / (2 jitter))`` that a jittered pair stays
    inside the window; accidentals use the expected singles rates.
    """
    a, b = generate_tags(spec)
    result = correlate(a, b, window, duration=spec.duration, use_numba=use_numba)
    T = spec.duration
    inside = 1.0 if spec.jitter == 0 else math.erf(window / (2.0 * spec.jitter))
    true = spec.pair_rate * T * spec.eta_A * spec.eta_B * inside
    acc = accidental_estimate(spec.singles_rate("A"), spec.singles_rate("B"), window) * T
    analytic = {
        "coincidences": true + acc,
        "true_coincidences": true,
        "accidentals": acc,
        "singles_A": spec.singles_rate("A") * T,
        "singles_B": spec.singles_rate("B") * T,
    }
    empirical = {
        "coincidences": result.coincidences,
        "singles_A": result.singles_A,
        "singles_B": result.singles_B,
    }
    z = {k: _z(empirical[k], analytic[k]) for k in empirical}
    return RateCheckReport(empirical, analytic, z)


def _atomic_write_bytes(path, data):
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _detector_id(name):
    if name in DETECTOR_IDS:
        return DETECTOR_IDS[name]
    try:
        return int(name)
    except ValueError:
        raise ConfigError(f"detector id {name!r} is not A, B or an integer") from None


def tags_to_bytes(stream):
    ts = stream.timestamps.astype("<i8", copy=False)
    return HEADER.pack(MAGIC, FORMAT_VERSION, _detector_id(stream.detector), ts.size) + ts.tobytes()


def tags_from_bytes(data, duration_ps=None):
    if len(data) < HEADER.size:
        raise DataError(f"tag file shorter than its {HEADER.size}-byte header", offset=len(data))
    magic, version, det, count = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise DataError(f"bad magic {magic!r}", offset=0)
    if version != FORMAT_VERSION:
        raise DataError(f"unsupported tag format version {version}", offset=4)
    expected = HEADER.size + 8 * count
    if len(data) != expected:
        raise DataError(f"header announces {count} tags ({expected} bytes) but file has {len(data)} bytes",
                        offset=min(len(data), expected))
    ts = np.frombuffer(data, dtype="<i8", offset=HEADER.size, count=count).astype(np.int64)
    bad = first_unsorted(ts)
    if bad is not None:
        raise DataError(f"timestamps not sorted at tag {bad} (byte offset {HEADER.size + 8 * bad})",
                        offset=HEADER.size + 8 * bad)
    return TagStream(DETECTOR_NAMES.get(det, str(det)), ts, duration_ps)


def write_tags_binary(stream, path):
    _atomic_write_bytes(path, tags_to_bytes(stream))


def read_tags_binary(path, duration_ps=None):
    return tags_from_bytes(Path(path).read_bytes(), duration_ps)


def write_tags_csv(stream, path):
    lines = [f"# detector = {stream.detector}"]
    if stream.duration_ps is not None:
        lines.append(f"# duration_ps = {stream.duration_ps}")
    lines.append("timestamp_ps")
    lines.extend(str(int(t)) for t in stream.timestamps)
    _atomic_write_bytes(path, ("\n".join(lines) + "\n").encode())


def read_tags_csv(path):
    detector, duration_ps, values = "A", None, []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line[1:].partition("=")
                if key.strip() == "detector":
                    detector = value.strip()
                elif key.strip() == "duration_ps":
                    duration_ps = int(value)
                continue
            if line == "timestamp_ps":
                continue
            try:
                values.append(int(line))
            except ValueError:
                raise DataError(f"{path}: bad timestamp on line {lineno}", offset=lineno) from None
    ts = np.array(values, dtype=np.int64)
    bad = first_unsorted(ts)
    if bad is not None:
        raise DataError(f"timestamps not sorted at tag {bad}", offset=bad)
    return TagStream(detector, ts, duration_ps)
