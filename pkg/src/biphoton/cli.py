"""``biphoton`` command-line entry point.

Every command writes its outputs atomically and drops a JSON run manifest
next to them. ``biphoton replay MANIFEST`` re-runs a command from the
manifest's resolved config and arguments, reproducing seeded outputs bit
for bit.

Exit codes: 0 success (including fits flagged as unconverged), 2 config
errors, 3 runtime or data errors.
"""

import argparse
import csv
import io
import json
import logging
import os
import sys
import tempfile
import time
from pathlib import Path

from . import __version__
from . import config as cfgmod
from .errors import BiphotonError, ConfigError
from .fitting import FringeModel, fit_sweep
from .scenarios import SweepTrace, add_noise, build_scenario, run_sweep
from .tagstream import (
    correlate,
    generate_tags,
    read_tags_binary,
    read_tags_csv,
    write_tags_binary,
    write_tags_csv,
)

log = logging.getLogger("biphoton")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


def atomic_write_text(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_manifest(path, command, args, resolved, seed, outputs, wall_time):
    manifest = {
        "command": command,
        "version": __version__,
        "args": args,
        "config": resolved,
        "seed": seed,
        "outputs": [str(p) for p in outputs],
        "wall_time_s": wall_time,
    }
    atomic_write_text(path, json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def _rows_csv(rows, metadata=None):
    out = io.StringIO()
    for key, value in (metadata or {}).items():
        out.write(f"# {key} = {json.dumps(value, sort_keys=True)}\n")
    writer = csv.DictWriter(out, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: repr(float(v)) if isinstance(v, float) else v for k, v in row.items()})
    return out.getvalue()


def _read_stream(path):
    path = Path(path)
    return read_tags_csv(path) if path.suffix.lower() == ".csv" else read_tags_binary(path)


def _write_stream(stream, path):
    path = Path(path)
    if path.suffix.lower() == ".csv":
        write_tags_csv(stream, path)
    else:
        write_tags_binary(stream, path)


# Each runner takes the serializable argument dict and the resolved config
# (or None) and returns ``(outputs, manifest_path, seed)``.

def run_sweep_cmd(a, resolved):
    scenario = build_scenario(cfgmod.experiment_from_resolved(resolved))
    trace = run_sweep(scenario, cfgmod.sweep_from_resolved(resolved))
    if a.get("dwell") is not None:
        trace = add_noise(trace, a["dwell"], a["seed"])
    atomic_write_text(a["output"], trace.to_csv_text())
    return [a["output"]], a["output"] + ".manifest.json", a.get("seed")


def run_tags_cmd(a, resolved):
    tags = resolved["tags"]
    pair_rate = tags["pair_rate"]
    if pair_rate is None:
        scenario = build_scenario(cfgmod.experiment_from_resolved(resolved))
        pair_rate = float(scenario.ideal_rates(tags["at"], resolved["sweep"]["coordinate"])[0])
    spec = cfgmod.genspec_from_resolved(resolved, pair_rate, duration=a.get("duration"), seed=a["seed"])
    out_dir = Path(a["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = []
    for stream in generate_tags(spec):
        path = out_dir / f"{stream.detector}.tags"
        write_tags_binary(stream, path)
        outputs.append(str(path))
        if a.get("csv"):
            path = out_dir / f"{stream.detector}.csv"
            write_tags_csv(stream, path)
            outputs.append(str(path))
    log.info("pair rate %.6g /s over %.6g s", pair_rate, spec.duration)
    return outputs, str(out_dir / "manifest.json"), a["seed"]


def run_correlate_cmd(a, resolved):
    sa, sb = _read_stream(a["stream_a"]), _read_stream(a["stream_b"])
    result = correlate(sa, sb, a["window"], duration=a.get("duration"))
    meta = {"stream_a": a["stream_a"], "stream_b": a["stream_b"]}
    atomic_write_text(a["output"], _rows_csv([result.as_row()], meta))
    print(f"{result.coincidences} coincidences; singles {result.singles_A} / {result.singles_B}; "
          f"expected accidentals {result.accidentals:.4g}")
    return [a["output"]], a["output"] + ".manifest.json", None


def run_fit_cmd(a, resolved):
    trace = SweepTrace.from_csv_text(Path(a["trace"]).read_text(encoding="utf-8"))
    model = FringeModel.from_spec(a["model"])
    result = fit_sweep(trace, a["channel"], model)
    meta = {"trace": a["trace"], "model": a["model"], "channel": a["channel"]}
    atomic_write_text(a["output"], _rows_csv([result.as_row()], meta))
    print(result.report())
    return [a["output"]], a["output"] + ".manifest.json", None


def run_convert_cmd(a, resolved):
    stream = _read_stream(a["input"])
    _write_stream(stream, a["output"])
    return [a["output"]], a["output"] + ".manifest.json", None


RUNNERS = {
    "sweep": run_sweep_cmd,
    "tags": run_tags_cmd,
    "correlate": run_correlate_cmd,
    "fit": run_fit_cmd,
    "convert": run_convert_cmd,
}
CONFIG_COMMANDS = ("sweep", "tags")
OUTPUT_KEYS = {"sweep": "output", "tags": "out_dir", "correlate": "output", "fit": "output", "convert": "output"}


def execute(command, a, resolved):
    start = time.perf_counter()
    outputs, manifest_path, seed = RUNNERS[command](a, resolved)
    write_manifest(manifest_path, command, a, resolved, seed, outputs, time.perf_counter() - start)
    return EXIT_OK


def _time_arg(text):
    try:
        return cfgmod.parse_time(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser():
    parser = argparse.ArgumentParser(
        prog="biphoton",
        description="Two-photon interference scenarios, tag synthesis, correlation and fitting.",
        epilog="config keys (lengths in um unless suffixed nm/um/mm/cm/m; times in s unless "
               "suffixed ps/ns/us/ms/s; phases in rad, 'pi' expressions or 'deg'):\n\n" + cfgmod.schema_help(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def with_config(p):
        p.add_argument("config", help="experiment config file (INI sections, see 'biphoton --help')")
        p.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
                       help="override a config key; repeatable")
        p.add_argument("--seed", type=int, default=0, help="seed for all randomness (default 0)")

    p = sub.add_parser("sweep", help="evaluate a scenario along a scan and write the trace CSV")
    with_config(p)
    p.add_argument("--dwell", type=float, default=None,
                   help="add Poisson counting noise for this dwell time per point, s")
    p.add_argument("-o", "--output", required=True, help="trace CSV path")

    p = sub.add_parser("tags", help="synthesize A/B time-tag streams")
    with_config(p)
    p.add_argument("--duration", type=_time_arg, default=None, help="acquisition time (overrides tags.duration)")
    p.add_argument("--out-dir", required=True, help="directory for A.tags, B.tags and manifest.json")
    p.add_argument("--csv", action="store_true", help="also write A.csv and B.csv")

    p = sub.add_parser("correlate", help="count coincidences between two tag streams")
    p.add_argument("stream_a")
    p.add_argument("stream_b")
    p.add_argument("--window", type=_time_arg, default=1e-9, help="coincidence half-window (default 1ns)")
    p.add_argument("--duration", type=_time_arg, default=None,
                   help="acquisition time for rate estimates (default: last tag)")
    p.add_argument("-o", "--output", required=True, help="result CSV path")

    p = sub.add_parser("fit", help="fit a dip or fringe model to a trace CSV")
    p.add_argument("trace")
    p.add_argument("--model", default="dip",
                   help="dip, fringe or full, optionally pinning parameters: 'dip,x0=0' (default dip)")
    p.add_argument("--channel", default="R_AB", help="rate column to fit (default R_AB)")
    p.add_argument("-o", "--output", required=True, help="fit result CSV path")

    p = sub.add_parser("convert", help="convert tag streams between binary (.tags) and CSV (.csv)")
    p.add_argument("input")
    p.add_argument("output")

    p = sub.add_parser("replay", help="re-run a command from its manifest")
    p.add_argument("manifest")
    p.add_argument("--output-dir", default=None, help="write outputs here instead of the recorded paths")
    return parser


def _replay_inputs(ns):
    manifest = json.loads(Path(ns.manifest).read_text(encoding="utf-8"))
    try:
        command, a, resolved = manifest["command"], dict(manifest["args"]), manifest["config"]
    except KeyError as exc:
        raise ConfigError(f"manifest lacks {exc.args[0]!r}", key=exc.args[0]) from None
    if command not in RUNNERS:
        raise ConfigError(f"manifest names unknown command {command!r}", key="command")
    if ns.output_dir is not None:
        key = OUTPUT_KEYS[command]
        target = Path(ns.output_dir)
        a[key] = str(target) if key == "out_dir" else str(target / Path(a[key]).name)
    return command, a, resolved


def _inputs(ns):
    if ns.command == "replay":
        return _replay_inputs(ns)
    a = {k: v for k, v in vars(ns).items() if k not in ("command", "verbose", "config", "overrides")}
    resolved = None
    if ns.command in CONFIG_COMMANDS:
        resolved = cfgmod.load_config(ns.config, ns.overrides)
        a["config_path"] = ns.config
        a["overrides"] = list(ns.overrides)
    return ns.command, a, resolved


def main(argv=None):
    parser = build_parser()
    ns = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        command, a, resolved = _inputs(ns)
        return execute(command, a, resolved)
    except ConfigError as exc:
        print(f"biphoton: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (BiphotonError, OSError, ValueError) as exc:
        offset = getattr(exc, "offset", None)
        where = f" (offset {offset})" if offset is not None else ""
        print(f"biphoton: error: {exc}{where}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
