"""Experiment config files.

INI-style text with sections ``[scenario]``, ``[coherence]``,
``[detection]``, ``[sweep]`` and ``[tags]``. Lengths are micrometers
unless suffixed (``nm``, ``um``, ``mm``, ``cm``, ``m``); times are seconds
unless suffixed (``ps``, ``ns``, ``us``, ``ms``, ``s``); phases are radians
and may be written with ``pi`` (``pi``, ``-pi/2``, ``0.5 pi``) or in ``deg``.

Parsing produces a *resolved* config: a nested dict of plain numbers in
SI units with every default filled in. Resolved configs are what run
manifests store and what :func:`experiment_from_resolved` and friends
consume.
"""

from dataclasses import dataclass
import configparser
import math
import re

from .coherence import coherence_length_from_bandwidth
from .errors import BiphotonError, ConfigError
from .pathdiagram import PathAlternative, TwoPhotonPathDiagram
from .rates import DetectionModel
from .scenarios import ALLOWED_COORDINATES, DEFAULT_DELTA_PHI, ExperimentConfig, ScenarioKind, SweepSpec
from .tagstream import GenSpec

LENGTH_UNITS = {"nm": 1e-9, "um": 1e-6, "µm": 1e-6, "mm": 1e-3, "cm": 1e-2, "m": 1.0}
TIME_UNITS = {"ps": 1e-12, "ns": 1e-9, "us": 1e-6, "µs": 1e-6, "ms": 1e-3, "s": 1.0}
REQUIRED = object()


@dataclass(frozen=True)
class Key:
    kind: str
    default: object
    doc: str


def _diagram_keys():
    keys = {}
    for alt in "ab":
        for role, name in (("p", "pump"), ("s", "signal"), ("i", "idler")):
            keys[f"l_{role}{alt}"] = Key("length", 0.0, f"{name} optical path length in alternative {alt} (custom_diagram)")
            keys[f"phi_{role}{alt}"] = Key("phase", 0.0, f"extra {name} phase in alternative {alt} (custom_diagram)")
    return keys


SCHEMA = {
    "scenario": {
        "name": Key("str", REQUIRED, "one of " + ", ".join(k.value for k in ScenarioKind)),
        "C": Key("float", 1000.0, "overall rate scale C, counts/s"),
        "delta_phi": Key("phase", None, "net extra phase, rad (default: pi for hom/double_pass/postponed, else 0)"),
        "fixed_delta_L": Key("length", 0.0, "fixed biphoton path-length difference (postponed_compensation, "
                             "double_pass antidiagonal sweeps), um"),
        "signal_mirror": Key("length", 0.0, "signal mirror displacement held during idler_mirror sweeps, um"),
        "scan_field": Key("str", None, "diagram length scanned by custom_diagram: l_pa, l_sa, l_ia, l_pb, l_sb or l_ib"),
        **_diagram_keys(),
    },
    "coherence": {
        "lambda0": Key("length", 363.8e-9, "pump vacuum wavelength (default 363.8 nm)"),
        "l_coh": Key("length", REQUIRED, "signal-idler coherence length, um (100 um reproduces the "
                     "reference experiment); may be replaced by 'bandwidth'"),
        "bandwidth": Key("length", None, "signal-idler FWHM bandwidth; converts to l_coh when l_coh is absent"),
        "center_wavelength": Key("length", None, "signal-idler center wavelength for 'bandwidth' (default 2*lambda0)"),
        "convention": Key("str", "gaussian_rms_envelope", "bandwidth->l_coh rule: gaussian_rms_envelope or simple"),
        "l_coh_pump": Key("length", 5e-2, "pump coherence length (default 5 cm)"),
        "kd": Key("float", 0.0, "(k_s0 - k_i0)/2, rad/m; 0 means degenerate"),
        "si_offset": Key("length", 0.0, "center offset of the signal-idler envelope, um"),
        "mode_overlap": Key("float", 1.0, "mode-matching factor in [0, 1] multiplying the interference term"),
    },
    "detection": {
        "eta_A": Key("float", 1.0, "detector A efficiency in [0, 1]"),
        "eta_B": Key("float", 1.0, "detector B efficiency in [0, 1]"),
        "background_A": Key("float", 0.0, "non-interfering singles background at A, fraction of the mean singles rate"),
        "background_B": Key("float", 0.0, "non-interfering singles background at B, fraction of the mean singles rate"),
        "coincidence_window": Key("time", 1e-9, "coincidence half-window tau (|dt| <= tau), s (default 1 ns)"),
    },
    "sweep": {
        "coordinate": Key("str", None, "scan coordinate: delta_L, delta_L_prime, idler_mirror, "
                          "antidiagonal_joint_displacement or custom (default: scenario's first)"),
        "start": Key("length", None, "first scan value, um (antidiagonal: in delta_L')"),
        "stop": Key("length", None, "last scan value, um"),
        "points": Key("int", 1001, "number of scan points, endpoints included"),
    },
    "tags": {
        "at": Key("length", 0.0, "scan-coordinate value whose ideal R_AB is used as the pair rate, um"),
        "pair_rate": Key("float", None, "pair rate override, pairs/s"),
        "background_rate_A": Key("float", 0.0, "uncorrelated background count rate at A, counts/s"),
        "background_rate_B": Key("float", 0.0, "uncorrelated background count rate at B, counts/s"),
        "jitter": Key("time", 0.0, "Gaussian timing jitter sigma per detection, s"),
        "duration": Key("time", 1.0, "acquisition time, s"),
    },
}


def schema_help():
    """Human-readable list of every config key with its unit and default."""
    lines = []
    for section, keys in SCHEMA.items():
        lines.append(f"[{section}]")
        for name, key in keys.items():
            if name.startswith(("l_p", "l_s", "l_i", "phi_")) and section == "scenario":
                continue
            if key.default is REQUIRED:
                default = "required"
            elif key.default is None:
                default = "optional"
            else:
                default = f"default {key.default!r}"
            lines.append(f"  {name:<19} {key.doc} [{default}]")
        if section == "scenario":
            lines.append("  l_pa .. l_ib, phi_pa .. phi_ib: custom_diagram path lengths (um) and phases (rad)")
    return "\n".join(lines)


_NUMBER = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"


def _parse_suffixed(text, units, default_scale):
    m = re.fullmatch(rf"\s*({_NUMBER})\s*([a-zµ]*)\s*", text)
    if not m:
        raise ValueError(f"not a number with optional unit: {text!r}")
    value, unit = float(m.group(1)), m.group(2)
    if not unit:
        return value * default_scale
    if unit not in units:
        raise ValueError(f"unknown unit {unit!r} (allowed: {', '.join(units)})")
    return value * units[unit]


def parse_length(text):
    return _parse_suffixed(text, LENGTH_UNITS, 1e-6)


def parse_time(text):
    return _parse_suffixed(text, TIME_UNITS, 1.0)


def parse_phase(text):
    t = text.strip().replace(" ", "")
    m = re.fullmatch(rf"({_NUMBER})deg", t)
    if m:
        return math.radians(float(m.group(1)))
    m = re.fullmatch(rf"({_NUMBER}|[-+])?\*?pi(?:/({_NUMBER}))?", t)
    if m:
        coef = m.group(1)
        coef = -1.0 if coef == "-" else 1.0 if coef in (None, "+") else float(coef)
        return coef * math.pi / (float(m.group(2)) if m.group(2) else 1.0)
    return float(t)


PARSERS = {
    "length": parse_length,
    "time": parse_time,
    "phase": parse_phase,
    "float": float,
    "int": lambda s: int(float(s)) if float(s) == int(float(s)) else _fail_int(s),
    "str": str.strip,
}


def _fail_int(s):
    raise ValueError(f"not an integer: {s!r}")


def _line_index(text):
    """Map ``(section, key)`` to its 1-based line number in the config text."""
    index, section = {}, None
    for lineno, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        m = re.fullmatch(r"\[([^\]]+)\]", s)
        if m:
            section = m.group(1).strip()
            index[(section, None)] = lineno
            continue
        m = re.match(r"([^=:#;\s][^=:]*?)\s*[=:]", s)
        if m and section is not None:
            index[(section, m.group(1))] = lineno
    return index


def read_raw(text, source="<config>"):
    """Parse config text into ``({section: {key: raw_string}}, line_index)``."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}", line=getattr(exc, "lineno", None)) from None
    raw = {s: dict(parser.items(s)) for s in parser.sections()}
    return raw, _line_index(text)


def apply_overrides(raw, overrides):
    """Apply ``section.key=value`` strings on top of a raw config."""
    raw = {s: dict(v) for s, v in raw.items()}
    for item in overrides or ():
        target, sep, value = item.partition("=")
        section, dot, key = target.strip().partition(".")
        if not sep or not dot or not key:
            raise ConfigError(f"override must look like section.key=value, got {item!r}", key=item)
        raw.setdefault(section, {})[key] = value.strip()
    return raw


def resolve(raw, lines=None, source="<config>"):
    """Validate a raw config and return it resolved to SI numbers with defaults filled in."""
    lines = lines or {}
    for section, keys in raw.items():
        if section not in SCHEMA:
            raise ConfigError(f"{source}: unknown section [{section}]", line=lines.get((section, None)))
        for key in keys:
            if key not in SCHEMA[section]:
                raise ConfigError(f"{source}: unknown key in [{section}]", key=f"{section}.{key}",
                                  line=lines.get((section, key)))
    out = {}
    for section, keys in SCHEMA.items():
        given = raw.get(section, {})
        out[section] = {}
        for name, key in keys.items():
            if name in given:
                try:
                    out[section][name] = PARSERS[key.kind](given[name])
                except ValueError as exc:
                    raise ConfigError(f"{source}: {exc}", key=f"{section}.{name}",
                                      line=lines.get((section, name))) from None
            elif key.default is REQUIRED:
                if (section, name) == ("coherence", "l_coh") and "bandwidth" in raw.get("coherence", {}):
                    out[section][name] = None
                    continue
                raise ConfigError(f"{source}: missing required key", key=f"{section}.{name}",
                                  line=lines.get((section, None)))
            else:
                out[section][name] = key.default
    _materialize(out, lines, source)
    return out


def _materialize(cfg, lines, source):
    sc, coh, sw = cfg["scenario"], cfg["coherence"], cfg["sweep"]
    try:
        kind = ScenarioKind(sc["name"])
    except ValueError:
        raise ConfigError(f"{source}: unknown scenario {sc['name']!r}", key="scenario.name",
                          line=lines.get(("scenario", "name"))) from None
    if sc["delta_phi"] is None:
        sc["delta_phi"] = DEFAULT_DELTA_PHI[kind]
    if coh["l_coh"] is None:
        center = coh["center_wavelength"] or 2.0 * coh["lambda0"]
        coh["center_wavelength"] = center
        coh["l_coh"] = coherence_length_from_bandwidth(center, coh["bandwidth"], coh["convention"])
    if sw["coordinate"] is None:
        sw["coordinate"] = ALLOWED_COORDINATES[kind][0].value


def load_config(path, overrides=None):
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    raw, lines = read_raw(text, source=str(path))
    return resolve(apply_overrides(raw, overrides), lines, source=str(path))


def _wrap(fn):
    def inner(resolved, *args, **kwargs):
        try:
            return fn(resolved, *args, **kwargs)
        except ConfigError:
            raise
        except (BiphotonError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
    inner.__name__ = fn.__name__
    inner.__doc__ = fn.__doc__
    return inner


@_wrap
def experiment_from_resolved(resolved):
    sc, coh, det = resolved["scenario"], resolved["coherence"], resolved["detection"]
    diagram = None
    if sc["name"] == ScenarioKind.CUSTOM_DIAGRAM.value:
        alts = [
            PathAlternative(sc[f"l_p{a}"], sc[f"l_s{a}"], sc[f"l_i{a}"], sc[f"phi_p{a}"], sc[f"phi_s{a}"], sc[f"phi_i{a}"])
            for a in "ab"
        ]
        diagram = TwoPhotonPathDiagram(*alts)
    return ExperimentConfig(
        scenario=sc["name"],
        lambda0=coh["lambda0"],
        l_coh=coh["l_coh"],
        l_coh_pump=coh["l_coh_pump"],
        kd=coh["kd"],
        si_offset=coh["si_offset"],
        mode_overlap=coh["mode_overlap"],
        delta_phi=sc["delta_phi"],
        fixed_delta_L=sc["fixed_delta_L"],
        signal_mirror=sc["signal_mirror"],
        C=sc["C"],
        detection=DetectionModel(**det),
        diagram=diagram,
        scan_field=sc["scan_field"],
    )


@_wrap
def sweep_from_resolved(resolved):
    sw = resolved["sweep"]
    for name in ("start", "stop"):
        if sw[name] is None:
            raise ConfigError("sweep needs start and stop", key=f"sweep.{name}")
    return SweepSpec(sw["coordinate"], sw["start"], sw["stop"], sw["points"])


@_wrap
def genspec_from_resolved(resolved, pair_rate, duration=None, seed=0):
    tags, det = resolved["tags"], resolved["detection"]
    return GenSpec(
        pair_rate=pair_rate,
        duration=tags["duration"] if duration is None else duration,
        seed=seed,
        eta_A=det["eta_A"],
        eta_B=det["eta_B"],
        background_rate_A=tags["background_rate_A"],
        background_rate_B=tags["background_rate_B"],
        jitter=tags["jitter"],
    )
