"""Command-line entry point: run, calibrate, validate and sweep scenarios.

Exit status: 0 when every declared expectation holds, 1 on a mismatch,
2 on invalid input (bad file, bad field, unknown id).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .network import ConfigError
from .scenario import (
    NoSeparation,
    ScenarioInvalid,
    SolveFailed,
    calibrate_thresholds,
    emit_outputs,
    load_scenario,
    run_scenario,
    sweep,
)

EXIT_OK, EXIT_MISMATCH, EXIT_INVALID = 0, 1, 2

log = logging.getLogger("mgprot")


def parse_range(text: str) -> list[float]:
    """``start:stop:step`` (inclusive stop) or a comma list of values."""
    if ":" in text:
        parts = [float(x) for x in text.split(":")]
        if len(parts) != 3 or parts[2] <= 0 or parts[1] < parts[0]:
            raise argparse.ArgumentTypeError(f"bad range {text!r}; expected start:stop:step")
        start, stop, step = parts
        n = int(round((stop - start) / step))
        vals = [start + k * step for k in range(n + 1)]
        return [v for v in vals if v <= stop + 1e-9 * max(1.0, abs(stop))]
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad value list {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty value list")
    return vals


def _load(path: str, fs: float | None = None, thresholds: str | None = None):
    s = load_scenario(path)
    if fs is not None:
        f0 = float(s.testbed.get("frequency_hz", 50.0))
        if not fs >= 20 * f0:
            raise ScenarioInvalid("--fs", f"{fs:g} Hz is below 20 x {f0:g} Hz")
        s = replace(s, fs=float(fs))
    if thresholds is not None:
        p = Path(thresholds)
        if not p.exists():
            raise ScenarioInvalid("--thresholds", f"not found: {thresholds}")
        s = replace(s, relay={**s.relay, "thresholds": str(p.resolve())})
    return s


def _print_report(rep) -> None:
    print(f"scenario: {rep.scenario}")
    for ev in rep.trips:
        print(f"  trip {ev.relay_id:<4} t={ev.t_trip:.4f} s  code {ev.fault_code}  "
              f"response {ev.response_time * 1e3:.1f} ms")
    if not rep.trips:
        print("  no trips")
    if rep.passed is not None:
        print("  expectations: " + ("met" if rep.passed else "NOT met"))
        for m in rep.mismatches:
            print(f"    - {m}")


def cmd_run(args) -> int:
    s = _load(args.scenario, args.fs, args.thresholds)
    rep = run_scenario(s)
    if args.out:
        emit_outputs(rep, args.out, s.fs)
    _print_report(rep)
    return EXIT_MISMATCH if rep.passed is False else EXIT_OK


def cmd_validate(args) -> int:
    s = load_scenario(args.scenario)
    print(f"ok: {s.name} ({len(s.events)} events, {s.duration:g} s at {s.fs:g} Hz)")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    try:
        testbed = json.loads(Path(args.testbed).read_text())
    except FileNotFoundError:
        raise ScenarioInvalid("<file>", f"not found: {args.testbed}") from None
    except json.JSONDecodeError as exc:
        raise ScenarioInvalid("<file>", f"bad JSON: {exc}") from None
    try:
        cal = calibrate_thresholds(testbed, fs=args.fs)
    except NoSeparation as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISMATCH
    text = json.dumps(cal.as_dict(), indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    print(text, end="")
    return EXIT_OK


def cmd_sweep(args) -> int:
    s = _load(args.scenario, args.fs, args.thresholds)
    if not any(ev.fault for ev in s.events):
        raise ScenarioInvalid("events", "sweep needs at least one fault event")
    status = EXIT_OK
    print(f"{'R_f (ohm)':>9}  {'trips':<24} result")
    for rf, rep in sweep(s, args.rf):
        trips = " ".join(f"{ev.relay_id}:{ev.fault_code}" for ev in rep.trips) or "-"
        result = {None: "", True: "met", False: "NOT met"}[rep.passed]
        print(f"{rf:9.3g}  {trips:<24} {result}")
        if args.out:
            emit_outputs(rep, Path(args.out) / f"rf_{rf:g}", s.fs)
        if rep.passed is False:
            status = EXIT_MISMATCH
    return status


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mgprot", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log warnings and info")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a scenario and write outputs")
    r.add_argument("scenario")
    r.add_argument("--out", help="output directory for events.jsonl, CSVs and summary.txt")
    r.add_argument("--fs", type=float, help="override the sampling rate, Hz")
    r.add_argument("--thresholds", help="thresholds.json to use instead of the testbed's")
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("calibrate", help="derive detection thresholds for a testbed")
    c.add_argument("testbed")
    c.add_argument("--out", help="write thresholds JSON here")
    c.add_argument("--fs", type=float, default=10_000.0)
    c.set_defaults(func=cmd_calibrate)

    v = sub.add_parser("validate", help="check a scenario file without running it")
    v.add_argument("scenario")
    v.set_defaults(func=cmd_validate)

    w = sub.add_parser("sweep", help="re-run a scenario over a fault-resistance range")
    w.add_argument("scenario")
    w.add_argument("--rf", type=parse_range, default=parse_range("1:20:1"), help="start:stop:step in ohm")
    w.add_argument("--out", help="parent directory for per-value outputs")
    w.add_argument("--fs", type=float)
    w.add_argument("--thresholds")
    w.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ScenarioInvalid, ConfigError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except SolveFailed as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
