"""Named experiment scenarios and the sweep engine.

Each scenario maps a scan coordinate to biphoton parameters and to a
:class:`~biphoton.rates.CoincidenceMap` from which the coincidence column
and both singles columns of a :class:`SweepTrace` are evaluated.

=======================  ===========================  ==========================
scenario                 scan coordinates             fixed parameters
=======================  ===========================  ==========================
hom                      delta_L_prime                dL = 0, dphi = pi
franson_fringe           delta_L                      dL' = 0, dphi (default 0)
double_pass              idler_mirror, antidiagonal,  dphi = pi
                         delta_L, delta_L_prime
postponed_compensation   delta_L_prime                5 l_coh < dL < l_coh_p / 5
partial_trace_demo       delta_L                      dL' = 0, dphi (default 0)
custom_diagram           custom                       one diagram length scanned
=======================  ===========================  ==========================

Beam-splitter style scenarios (hom, franson_fringe, postponed_compensation)
give each detector two partner ports with complementary coincidence
fringes, so their singles are flat; partial_trace_demo keeps only the
A-B, A-B' and A'-B channels, which is still enough for flat singles at A
and B. In double_pass and custom_diagram the
twin of a photon at A can only reach B, so both singles equal R_AB.
"""

from dataclasses import dataclass, field, replace
import csv
import dataclasses
import enum
import io
import json
import math

import numpy as np

from .coherence import CoherenceModel
from .errors import ConfigError, DataError
from .pathdiagram import (
    BiphotonParams,
    PathAlternative,
    TwoPhotonPathDiagram,
    derive_biphoton_params,
    double_pass_params,
)
from .rates import (
    CoincidenceMap,
    DetectionModel,
    apply_detection,
    coincidence_rate,
    double_pass_rate,
    singles_rate,
)


class ScenarioKind(str, enum.Enum):
    HOM = "hom"
    FRANSON_FRINGE = "franson_fringe"
    DOUBLE_PASS = "double_pass"
    POSTPONED_COMPENSATION = "postponed_compensation"
    PARTIAL_TRACE_DEMO = "partial_trace_demo"
    CUSTOM_DIAGRAM = "custom_diagram"


class Coordinate(str, enum.Enum):
    DELTA_L = "delta_L"
    DELTA_L_PRIME = "delta_L_prime"
    IDLER_MIRROR = "idler_mirror"
    ANTIDIAGONAL = "antidiagonal_joint_displacement"
    CUSTOM = "custom"


ALLOWED_COORDINATES = {
    ScenarioKind.HOM: (Coordinate.DELTA_L_PRIME,),
    ScenarioKind.FRANSON_FRINGE: (Coordinate.DELTA_L,),
    ScenarioKind.DOUBLE_PASS: (
        Coordinate.IDLER_MIRROR,
        Coordinate.ANTIDIAGONAL,
        Coordinate.DELTA_L,
        Coordinate.DELTA_L_PRIME,
    ),
    ScenarioKind.POSTPONED_COMPENSATION: (Coordinate.DELTA_L_PRIME,),
    ScenarioKind.PARTIAL_TRACE_DEMO: (Coordinate.DELTA_L,),
    ScenarioKind.CUSTOM_DIAGRAM: (Coordinate.CUSTOM,),
}

DEFAULT_DELTA_PHI = {
    ScenarioKind.HOM: math.pi,
    ScenarioKind.FRANSON_FRINGE: 0.0,
    ScenarioKind.DOUBLE_PASS: math.pi,
    ScenarioKind.POSTPONED_COMPENSATION: math.pi,
    ScenarioKind.PARTIAL_TRACE_DEMO: 0.0,
    ScenarioKind.CUSTOM_DIAGRAM: 0.0,
}

DIAGRAM_FIELDS = ("l_pa", "l_sa", "l_ia", "l_pb", "l_sb", "l_ib")


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to build a scenario. Lengths in meters, rates in counts/s."""

    scenario: ScenarioKind
    lambda0: float = 363.8e-9
    l_coh: float = 100e-6
    l_coh_pump: float = 5e-2
    kd: float = 0.0
    si_offset: float = 0.0
    mode_overlap: float = 1.0
    delta_phi: float = None
    fixed_delta_L: float = 0.0
    signal_mirror: float = 0.0
    C: float = 1000.0
    detection: DetectionModel = DetectionModel()
    diagram: TwoPhotonPathDiagram = None
    scan_field: str = None

    def __post_init__(self):
        try:
            kind = ScenarioKind(self.scenario)
        except ValueError:
            raise ConfigError(f"unknown scenario {self.scenario!r}", key="scenario") from None
        object.__setattr__(self, "scenario", kind)
        for name in ("lambda0", "l_coh", "l_coh_pump", "C"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ConfigError(f"{name} must be positive, got {value!r}", key=name)
        if not 0.0 <= self.mode_overlap <= 1.0:
            raise ConfigError(f"mode_overlap must lie in [0, 1], got {self.mode_overlap!r}", key="mode_overlap")
        for name in ("kd", "si_offset", "fixed_delta_L", "signal_mirror"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigError(f"{name} must be finite", key=name)
        if self.delta_phi is None:
            object.__setattr__(self, "delta_phi", DEFAULT_DELTA_PHI[kind])
        if kind is ScenarioKind.CUSTOM_DIAGRAM:
            if self.diagram is None:
                raise ConfigError("custom_diagram needs a path diagram", key="diagram")
            if self.scan_field not in DIAGRAM_FIELDS:
                raise ConfigError(f"scan_field must be one of {DIAGRAM_FIELDS}", key="scan_field")

    def coherence_model(self):
        return CoherenceModel.gaussian(
            lambda0=self.lambda0,
            l_coh=self.l_coh,
            l_coh_pump=self.l_coh_pump,
            kd=self.kd,
            si_offset=self.si_offset,
            mode_overlap=self.mode_overlap,
        )

    def to_dict(self):
        d = {}
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if isinstance(value, enum.Enum):
                value = value.value
            elif isinstance(value, DetectionModel):
                value = dataclasses.asdict(value)
            elif isinstance(value, TwoPhotonPathDiagram):
                value = {"a": dataclasses.asdict(value.alt_a), "b": dataclasses.asdict(value.alt_b)}
            d[f.name] = value
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if d.get("detection") is not None:
            d["detection"] = DetectionModel(**d["detection"])
        else:
            d.pop("detection", None)
        if d.get("diagram") is not None:
            d["diagram"] = TwoPhotonPathDiagram(PathAlternative(**d["diagram"]["a"]), PathAlternative(**d["diagram"]["b"]))
        return cls(**d)


@dataclass(frozen=True)
class SweepSpec:
    """Uniform scan grid, endpoints inclusive; ``start``/``stop`` in meters."""

    coordinate: Coordinate
    start: float
    stop: float
    points: int

    def __post_init__(self):
        try:
            object.__setattr__(self, "coordinate", Coordinate(self.coordinate))
        except ValueError:
            raise ConfigError(f"unknown sweep coordinate {self.coordinate!r}", key="coordinate") from None
        if not (math.isfinite(self.start) and math.isfinite(self.stop) and self.start < self.stop):
            raise ConfigError("sweep needs finite start < stop", key="start")
        if int(self.points) != self.points or self.points < 2:
            raise ConfigError("sweep needs at least 2 points", key="points")
        object.__setattr__(self, "points", int(self.points))

    def grid(self):
        return np.linspace(self.start, self.stop, self.points)


class Scenario:
    """An executable scenario: scan coordinate -> biphoton parameters and coincidence map."""

    def __init__(self, config):
        self.config = config
        self.kind = config.scenario
        self.model = config.coherence_model()
        if self.kind is ScenarioKind.HOM and config.fixed_delta_L != 0.0:
            raise ConfigError("hom fixes delta_L = 0; use postponed_compensation for delta_L != 0",
                              key="fixed_delta_L")
        if self.kind is ScenarioKind.POSTPONED_COMPENSATION:
            lo, hi = 5.0 * config.l_coh, config.l_coh_pump / 5.0
            if not lo < abs(config.fixed_delta_L) < hi:
                raise ConfigError(
                    f"postponed_compensation needs l_coh << |delta_L| << l_coh_pump, "
                    f"i.e. {lo:.3e} m < |delta_L| < {hi:.3e} m; got {config.fixed_delta_L!r}",
                    key="fixed_delta_L",
                )

    @property
    def coordinates(self):
        return ALLOWED_COORDINATES[self.kind]

    @property
    def default_coordinate(self):
        return self.coordinates[0]

    def _coordinate(self, coordinate):
        coordinate = self.default_coordinate if coordinate is None else Coordinate(coordinate)
        if coordinate not in self.coordinates:
            raise ConfigError(
                f"scenario {self.kind.value} cannot scan {coordinate.value}; "
                f"allowed: {', '.join(c.value for c in self.coordinates)}",
                key="coordinate",
            )
        return coordinate

    def mirror_positions(self, x, coordinate=None):
        """Signal and idler mirror displacements of a double-pass scan."""
        coordinate = self._coordinate(coordinate)
        x = np.asarray(x, dtype=float)
        cfg = self.config
        if coordinate is Coordinate.IDLER_MIRROR:
            return np.full_like(x, cfg.signal_mirror), x
        if coordinate in (Coordinate.ANTIDIAGONAL, Coordinate.DELTA_L_PRIME):
            # Reported coordinate is dL' = 4 d for opposite displacements d.
            d = x / 4.0
            return cfg.fixed_delta_L / 2.0 + d, cfg.fixed_delta_L / 2.0 - d
        return x / 2.0, x / 2.0

    def params(self, x, coordinate=None):
        coordinate = self._coordinate(coordinate)
        x = np.asarray(x, dtype=float)
        cfg = self.config
        zeros = np.zeros_like(x)
        if self.kind is ScenarioKind.DOUBLE_PASS:
            return double_pass_params(*self.mirror_positions(x, coordinate))
        if self.kind is ScenarioKind.HOM:
            return BiphotonParams(zeros, x, zeros + cfg.delta_phi)
        if self.kind is ScenarioKind.POSTPONED_COMPENSATION:
            return BiphotonParams(zeros + cfg.fixed_delta_L, x, zeros + cfg.delta_phi)
        if self.kind in (ScenarioKind.FRANSON_FRINGE, ScenarioKind.PARTIAL_TRACE_DEMO):
            return BiphotonParams(x, zeros, zeros + cfg.delta_phi)
        field_name, alt_name = "l_" + cfg.scan_field[2], "alt_" + cfg.scan_field[3]
        alt = getattr(cfg.diagram, alt_name)
        scanned = replace(alt, **{field_name: getattr(alt, field_name) + x})
        diagram = replace(cfg.diagram, **{alt_name: scanned})
        p = derive_biphoton_params(diagram)
        return BiphotonParams(p.delta_L + zeros, p.delta_L_prime + zeros, p.delta_phi + zeros)

    def coincidence_map(self, coordinate=None):
        coordinate = self._coordinate(coordinate)
        model, C = self.model, self.config.C

        def main(x):
            if self.kind is ScenarioKind.DOUBLE_PASS:
                return double_pass_rate(*self.mirror_positions(x, coordinate), model, C)
            return coincidence_rate(self.params(x, coordinate), model, C)

        def complementary(x):
            p = self.params(x, coordinate)
            return coincidence_rate(BiphotonParams(p.delta_L, p.delta_L_prime, p.delta_phi + math.pi), model, C)

        cmap = CoincidenceMap()
        cmap.add("A", "B", main)
        if self.kind in (ScenarioKind.HOM, ScenarioKind.FRANSON_FRINGE, ScenarioKind.POSTPONED_COMPENSATION):
            cmap.add("A", "B'", complementary)
            cmap.add("A'", "B", complementary)
            cmap.add("A'", "B'", main)
        elif self.kind is ScenarioKind.PARTIAL_TRACE_DEMO:
            # each detector sees its twin at the other detector or at one extra
            # complementary port; no A'-B' channel is recorded
            cmap.add("A", "B'", complementary)
            cmap.add("A'", "B", complementary)
        return cmap

    def singles_reference(self, position, coordinate=None):
        """Interference-free singles level at ``position``: C times its number of partners."""
        return self.config.C * len(self.coincidence_map(coordinate).partners[position])

    def ideal_rates(self, x, coordinate=None):
        cmap = self.coincidence_map(coordinate)
        return cmap.rate("A", "B", x), singles_rate("A", cmap, x), singles_rate("B", cmap, x)


def build_scenario(config):
    return Scenario(config)


CORE_COLUMNS = ("coordinate", "delta_L", "delta_L_prime", "R_AB", "R_A", "R_B")
RATE_COLUMNS = ("R_AB", "R_A", "R_B")
LENGTH_COLUMNS_EXTRA = ("mirror_displacement", "x_s", "x_i")


@dataclass
class SweepTrace:
    """Sampled rates along a scan. ``columns`` holds equal-length float arrays."""

    columns: dict
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        lengths = {len(v) for v in self.columns.values()}
        if len(lengths) > 1:
            raise DataError("trace columns differ in length")
        for name in RATE_COLUMNS:
            if name in self.columns and np.any(np.asarray(self.columns[name]) < 0):
                raise DataError(f"negative rate in column {name}")
        self.columns = {k: np.asarray(v, dtype=float) for k, v in self.columns.items()}

    def __len__(self):
        return len(next(iter(self.columns.values()))) if self.columns else 0

    def column(self, name):
        try:
            return self.columns[name]
        except KeyError:
            raise DataError(f"trace has no column {name!r}; have {list(self.columns)}") from None

    @property
    def coordinate(self):
        return self.columns["coordinate"]

    def with_columns(self, metadata=None, **updates):
        cols = dict(self.columns)
        cols.update(updates)
        meta = dict(self.metadata)
        meta.update(metadata or {})
        return SweepTrace(cols, meta)

    def to_csv_text(self):
        out = io.StringIO()
        for key, value in self.metadata.items():
            out.write(f"# {key} = {json.dumps(value, sort_keys=True)}\n")
        names = list(CORE_COLUMNS) + [c for c in self.columns if c not in CORE_COLUMNS]
        header = [f"{n}_um" if n in ("coordinate", "delta_L", "delta_L_prime") or n in LENGTH_COLUMNS_EXTRA
                  else n for n in names]
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(header)
        scaled = [self.columns[n] * 1e6 if h.endswith("_um") else self.columns[n] for n, h in zip(names, header)]
        for row in zip(*scaled):
            writer.writerow([repr(float(v)) for v in row])
        return out.getvalue()

    @classmethod
    def from_csv_text(cls, text):
        metadata, lines = {}, []
        for line in text.splitlines():
            if line.startswith("#"):
                key, _, value = line[1:].partition("=")
                try:
                    metadata[key.strip()] = json.loads(value)
                except json.JSONDecodeError:
                    metadata[key.strip()] = value.strip()
            elif line.strip():
                lines.append(line)
        if not lines:
            raise DataError("trace CSV has no header row")
        rows = list(csv.reader(lines))
        header, body = rows[0], rows[1:]
        try:
            data = np.array([[float(v) for v in r] for r in body], dtype=float).reshape(len(body), len(header))
        except ValueError as exc:
            raise DataError(f"trace CSV has a malformed row: {exc}") from None
        columns = {}
        for j, h in enumerate(header):
            name, scale = (h[:-3], 1e-6) if h.endswith("_um") else (h, 1.0)
            columns[name] = data[:, j] * scale
        return cls(columns, metadata)


def run_sweep(scenario, sweep):
    """Evaluate the scenario on the sweep grid and apply the detection model."""
    coordinate = scenario._coordinate(sweep.coordinate)
    x = sweep.grid()
    p = scenario.params(x, coordinate)
    r_ab, r_a, r_b = scenario.ideal_rates(x, coordinate)
    det = scenario.config.detection
    r_ab, r_a, r_b = apply_detection(
        r_ab, r_a, r_b, det,
        reference_A=scenario.singles_reference("A", coordinate),
        reference_B=scenario.singles_reference("B", coordinate),
    )
    columns = {
        "coordinate": x,
        "delta_L": np.broadcast_to(p.delta_L, x.shape),
        "delta_L_prime": np.broadcast_to(p.delta_L_prime, x.shape),
        "R_AB": r_ab,
        "R_A": r_a,
        "R_B": r_b,
    }
    if scenario.kind is ScenarioKind.DOUBLE_PASS:
        x_s, x_i = scenario.mirror_positions(x, coordinate)
        if coordinate in (Coordinate.ANTIDIAGONAL, Coordinate.DELTA_L_PRIME):
            columns["mirror_displacement"] = x / 4.0
        columns["x_s"], columns["x_i"] = x_s, x_i
    metadata = {
        "scenario": scenario.kind.value,
        "coordinate": coordinate.value,
        "config": scenario.config.to_dict(),
    }
    return SweepTrace(columns, metadata)


def add_noise(trace, dwell_time, seed):
    """Replace each rate ``r`` by ``Poisson(r * dwell_time) / dwell_time``.

    Point ``i`` draws from its own substream seeded by ``(seed, i)``, so
    the result is independent of evaluation order.
    """
    if not dwell_time > 0:
        raise ConfigError("dwell_time must be positive", key="dwell_time")
    rates = np.stack([trace.column(c) for c in RATE_COLUMNS], axis=1)
    noisy = np.empty_like(rates)
    root = np.random.SeedSequence(seed)
    for i in range(rates.shape[0]):
        rng = np.random.default_rng(np.random.SeedSequence(root.entropy, spawn_key=(i,)))
        noisy[i] = rng.poisson(rates[i] * dwell_time) / dwell_time
    return trace.with_columns(
        metadata={"seed": seed, "dwell_time": dwell_time},
        **{c: noisy[:, j] for j, c in enumerate(RATE_COLUMNS)},
    )
