"""Scenario files, the quasi-static run loop, threshold calibration and outputs.

A run is a sequence of phasor steady states.  The state is re-solved at
every scripted event and at every relay trip; between those instants each
measurement point is sampled from its steady-state phasors and fed to its
relay.  All times are absolute seconds from the start of the run.
"""

from __future__ import annotations

import copy
import json
import logging
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from .faults import FaultSpec, ZeroImpedanceFault, solve_network
from .nodal import assemble
from .network import ConfigError, NetworkModel, UnknownSwitch, apply_switch_action, build_testbed
from .phasor import A_INV
from .relay import (
    RelayConfig,
    RelayState,
    TripEvent,
    error_pct,
    isolate,
    scan_relay,
    sliding_phasors,
)

__all__ = [
    "ScenarioInvalid",
    "SolveFailed",
    "NoSeparation",
    "Event",
    "Scenario",
    "Trace",
    "RunReport",
    "Calibration",
    "data_path",
    "default_testbed",
    "load_scenario",
    "parse_scenario",
    "relay_configs",
    "run_scenario",
    "calibrate_thresholds",
    "emit_outputs",
    "sweep",
]

log = logging.getLogger(__name__)

CSV_HEADER = "t,va,vb,vc,ia,ib,ic,i_pos,i_neg,i_zero"
_ACTIONS = ("fault", "clear", "switch", "load")


class ScenarioInvalid(ValueError):
    """Scenario document failed validation; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class SolveFailed(RuntimeError):
    pass


class NoSeparation(RuntimeError):
    """Fault and no-fault measurements cannot be separated by any threshold pair."""

    def __init__(self, message: str, ranges: Mapping[str, float]):
        self.ranges = dict(ranges)
        super().__init__(message + " " + ", ".join(f"{k}={v:.4g}" for k, v in self.ranges.items()))


def data_path(name: str) -> Path:
    """Path of a file shipped in the package data directory."""
    return Path(str(resources.files("mgprot") / "data" / name))


def default_testbed() -> dict:
    return json.loads(data_path("testbed.json").read_text())


# -- scenario model -------------------------------------------------------------

@dataclass(frozen=True)
class Event:
    t: float
    action: str
    fault: FaultSpec | None = None
    target: str | None = None
    state: str | None = None


@dataclass(frozen=True)
class Scenario:
    name: str
    testbed: Mapping[str, Any]
    mode: str
    events: tuple[Event, ...]
    duration: float
    fs: float = 10_000.0
    relay: Mapping[str, Any] = field(default_factory=dict)
    expect: Mapping[str, Any] | None = None
    source: str = ""


def _need(doc: Mapping, key: str, path: str):
    if key not in doc:
        raise ScenarioInvalid(f"{path}.{key}" if path else key, "missing")
    return doc[key]


def _number(value, path: str, positive: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ScenarioInvalid(path, f"expected a number, got {value!r}")
    if positive and value <= 0:
        raise ScenarioInvalid(path, "must be positive")
    return float(value)


def _resolve_testbed(ref, base_dir: Path | None) -> tuple[dict, str]:
    if isinstance(ref, Mapping):
        return copy.deepcopy(dict(ref)), "<inline>"
    if ref in (None, "default"):
        return default_testbed(), "default"
    p = Path(ref)
    if not p.is_absolute() and base_dir is not None and (base_dir / p).exists():
        p = base_dir / p
    if not p.exists() and data_path(str(ref)).exists():
        p = data_path(str(ref))
    try:
        return json.loads(p.read_text()), str(ref)
    except FileNotFoundError:
        raise ScenarioInvalid("testbed", f"file not found: {ref}") from None
    except json.JSONDecodeError as exc:
        raise ScenarioInvalid("testbed", f"bad JSON: {exc}") from None


def parse_scenario(doc: Mapping[str, Any], base_dir: Path | None = None) -> Scenario:
    """Validate a parsed scenario document and resolve its testbed."""
    if not isinstance(doc, Mapping):
        raise ScenarioInvalid("<root>", "expected a JSON object")
    name = str(doc.get("name", "scenario"))
    testbed, ref = _resolve_testbed(doc.get("testbed"), base_dir)
    mode = doc.get("mode", "grid_connected")
    if mode not in ("grid_connected", "islanded"):
        raise ScenarioInvalid("mode", f"unknown mode {mode!r}")
    duration = _number(_need(doc, "duration", ""), "duration", positive=True)
    fs = _number(doc.get("fs", 10_000.0), "fs", positive=True)
    relay = doc.get("relay", {})
    if not isinstance(relay, Mapping):
        raise ScenarioInvalid("relay", "expected an object")

    try:
        net = build_testbed(testbed, mode)
    except ConfigError as exc:
        raise ScenarioInvalid("testbed", str(exc)) from None
    if fs < 20 * net.frequency:
        raise ScenarioInvalid("fs", f"{fs:g} Hz is below 20 x {net.frequency:g} Hz")
    loads = {ld.id for ld in net.loads}
    lines = {ln.id for ln in net.lines}
    switches = set(net.switch_ids)

    events = []
    last_t = -math.inf
    raw_events = doc.get("events", [])
    if not isinstance(raw_events, list):
        raise ScenarioInvalid("events", "expected a list")
    for k, ev in enumerate(raw_events):
        path = f"events[{k}]"
        if not isinstance(ev, Mapping):
            raise ScenarioInvalid(path, "expected an object")
        t = _number(_need(ev, "t", path), f"{path}.t")
        if t < 0 or t >= duration:
            raise ScenarioInvalid(f"{path}.t", f"must lie in [0, duration={duration})")
        if t < last_t:
            raise ScenarioInvalid(f"{path}.t", "events must be sorted by time")
        last_t = t
        action = _need(ev, "action", path)
        if action not in _ACTIONS:
            raise ScenarioInvalid(f"{path}.action", f"unknown action {action!r}; expected one of {_ACTIONS}")
        if action == "fault":
            f = _need(ev, "fault", path)
            fpath = f"{path}.fault"
            line = _need(f, "line", fpath)
            if line not in lines:
                raise ScenarioInvalid(f"{fpath}.line", f"unknown line {line!r}")
            try:
                spec = FaultSpec(
                    kind=str(_need(f, "kind", fpath)),
                    line_id=line,
                    fraction=_number(f.get("fraction", 0.5), f"{fpath}.fraction"),
                    rf=_number(f.get("rf_ohm", 0.0), f"{fpath}.rf_ohm"),
                    t_on=t,
                    faulted_phases=f.get("phases"),
                )
            except ValueError as exc:
                if isinstance(exc, ScenarioInvalid):
                    raise
                raise ScenarioInvalid(fpath, str(exc)) from None
            events.append(Event(t, action, fault=spec))
        elif action == "clear":
            events.append(Event(t, action))
        else:
            target = _need(ev, "target", path)
            if action == "load" and target not in loads:
                raise ScenarioInvalid(f"{path}.target", f"unknown load {target!r}")
            if target not in switches:
                raise ScenarioInvalid(f"{path}.target", f"unknown switch {target!r}")
            state = str(_need(ev, "state", path)).lower()
            if state not in ("open", "closed", "on", "off"):
                raise ScenarioInvalid(f"{path}.state", f"bad state {state!r}")
            events.append(Event(t, action, target=target, state=state))

    expect = doc.get("expect")
    if expect is not None:
        if not isinstance(expect, Mapping):
            raise ScenarioInvalid("expect", "expected an object")
        relays = set(net.relay_ids)
        for k, tr in enumerate(expect.get("trips", [])):
            if tr.get("relay") not in relays:
                raise ScenarioInvalid(f"expect.trips[{k}].relay", f"unknown relay {tr.get('relay')!r}")
        for k, r in enumerate(expect.get("no_trip", [])):
            if r not in relays:
                raise ScenarioInvalid(f"expect.no_trip[{k}]", f"unknown relay {r!r}")
    try:
        relay_configs(net, testbed, relay, base_dir)
    except (ValueError, TypeError) as exc:
        raise ScenarioInvalid("relay", str(exc)) from None
    return Scenario(name, testbed, mode, tuple(events), duration, fs, dict(relay), expect, ref)


def load_scenario(path: str | Path) -> Scenario:
    p = Path(path)
    if not p.exists() and data_path(f"scenarios/{p.name}").exists():
        p = data_path(f"scenarios/{p.name}")
    try:
        doc = json.loads(p.read_text())
    except FileNotFoundError:
        raise ScenarioInvalid("<file>", f"not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ScenarioInvalid("<file>", f"bad JSON: {exc}") from None
    return parse_scenario(doc, p.parent)


# -- relay settings -------------------------------------------------------------

_RELAY_FIELDS = ("v_rated", "i_rated", "v_threshold_pct", "i_threshold_pct", "presence_ratio",
                 "debounce_samples", "window_cycles", "transient_hold")


def _thresholds_from(ref, base_dir: Path | None) -> dict:
    if isinstance(ref, Mapping):
        return dict(ref)
    p = Path(ref)
    if not p.is_absolute() and base_dir is not None and (base_dir / p).exists():
        p = base_dir / p
    elif not p.exists():
        p = data_path(str(ref))
    return json.loads(p.read_text())


def relay_configs(net: NetworkModel, testbed: Mapping, overrides: Mapping | None = None,
                  base_dir: Path | None = None, thresholds: RelayConfig | None = None) -> dict[str, RelayConfig]:
    """Per-relay settings: defaults, then the testbed's relay section, then overrides.

    A ``thresholds`` entry (file name or object) supplies the two threshold
    percentages; an explicit ``thresholds`` config wins over everything.
    A line's ``rated_current_a`` sets ``i_rated`` for both its relays.
    """
    settings: dict[str, Any] = {"f0": net.frequency}
    for layer in (testbed.get("relay", {}), overrides or {}):
        if "thresholds" in layer:
            th = _thresholds_from(layer["thresholds"], base_dir)
            settings.update({k: th[k] for k in ("v_threshold_pct", "i_threshold_pct") if k in th})
        settings.update({k: layer[k] for k in _RELAY_FIELDS if k in layer})
    if thresholds is not None:
        settings["v_threshold_pct"] = thresholds.v_threshold_pct
        settings["i_threshold_pct"] = thresholds.i_threshold_pct
    base = RelayConfig(**settings)
    out = {}
    for ln in net.lines:
        cfg = base if ln.rated_current is None else replace(base, i_rated=ln.rated_current)
        for r in ln.relays:
            out[r] = cfg
    return out


# -- run loop -------------------------------------------------------------------

@dataclass
class Trace:
    """Recorded samples and sliding estimates at one measurement point."""

    relay_id: str
    line_id: str
    end: str
    t: np.ndarray
    v: np.ndarray
    i: np.ndarray
    v_est: np.ndarray
    i_est: np.ndarray

    @property
    def i_seq(self) -> np.ndarray:
        """(3, N) pos/neg/zero current estimates, A RMS."""
        return A_INV @ self.i_est

    def error_pct(self, cfg: RelayConfig) -> tuple[np.ndarray, np.ndarray]:
        return error_pct(np.abs(self.v_est), np.abs(self.i_est), cfg)


@dataclass
class RunReport:
    scenario: str
    trips: list[TripEvent]
    states: dict[str, RelayState]
    traces: dict[str, Trace]
    configs: dict[str, RelayConfig]
    faults: list[FaultSpec]
    net: NetworkModel | None = None
    passed: bool | None = None
    mismatches: list[str] = field(default_factory=list)
    files: list[Path] = field(default_factory=list)

    def trips_by_relay(self) -> dict[str, TripEvent]:
        return {ev.relay_id: ev for ev in self.trips}


def _solve(net: NetworkModel, fault: FaultSpec | None):
    try:
        return solve_network(net, fault)
    except (np.linalg.LinAlgError, ZeroImpedanceFault) as exc:
        raise SolveFailed(f"network solve failed: {exc}") from exc


def _relay_phasors(state, relay_ids):
    out = {}
    for r in relay_ids:
        v, i = state.relay_phasors(r)
        out[r] = (v.as_array(), i.as_array())
    return out


def _samples(ph: np.ndarray, t: np.ndarray, f0: float) -> np.ndarray:
    return math.sqrt(2.0) * np.real(ph[:, None] * np.exp(1j * 2 * math.pi * f0 * t)[None, :])


def _apply_event(net: NetworkModel, fault: FaultSpec | None, ev: Event):
    if ev.action == "fault":
        if fault is not None:
            log.warning("fault on %s replaced by a new fault on %s at t=%.4f s", fault.line_id,
                        ev.fault.line_id, ev.t)
        return net, ev.fault
    if ev.action == "clear":
        return net, None
    try:
        return apply_switch_action(net, ev.target, ev.state), fault
    except UnknownSwitch as exc:
        raise ScenarioInvalid(f"events(t={ev.t}).target", f"unknown switch {exc}") from None


def run_scenario(s: Scenario, thresholds: RelayConfig | None = None, trip_enabled: bool = True,
                 base_dir: Path | None = None) -> RunReport:
    """Execute one scenario deterministically and check declared expectations."""
    net = build_testbed(s.testbed, s.mode)
    configs = relay_configs(net, s.testbed, s.relay, base_dir, thresholds)
    relay_ids = list(net.relay_ids)
    f0 = net.frequency
    fs = s.fs
    n_total = int(round(s.duration * fs))
    t_all = np.arange(n_total) / fs
    windows = {r: configs[r].window_samples(fs) for r in relay_ids}
    pad = max(windows.values()) - 1

    fault: FaultSpec | None = None
    fault_t: float | None = None
    faults_seen: list[FaultSpec] = []
    state = _solve(net, None)
    ph = _relay_phasors(state, relay_ids)

    # pre-roll: the relays start with a full window of steady pre-event history
    t_pre = (np.arange(pad) - pad) / fs
    hist = {r: (_samples(ph[r][0], t_pre, f0), _samples(ph[r][1], t_pre, f0)) for r in relay_ids}

    v_rec = {r: np.zeros((3, n_total)) for r in relay_ids}
    i_rec = {r: np.zeros((3, n_total)) for r in relay_ids}
    ve_rec = {r: np.zeros((3, n_total), dtype=complex) for r in relay_ids}
    ie_rec = {r: np.zeros((3, n_total), dtype=complex) for r in relay_ids}
    rstate = {r: RelayState(r) for r in relay_ids}
    last_est = {r: (None, None) for r in relay_ids}
    trips: list[TripEvent] = []

    ev_index = [int(math.ceil(ev.t * fs - 1e-6)) for ev in s.events]
    pending = 0
    k = 0
    while k < n_total:
        while pending < len(s.events) and ev_index[pending] <= k:
            ev = s.events[pending]
            net, fault = _apply_event(net, fault, ev)
            if ev.action == "fault":
                fault_t = ev.t
                faults_seen.append(ev.fault)
            pending += 1
            state = _solve(net, fault)
            ph = _relay_phasors(state, relay_ids)
        k_end = ev_index[pending] if pending < len(s.events) else n_total
        k_end = min(k_end, n_total)
        t_seg = t_all[k:k_end]

        seg = {}
        for r in relay_ids:
            v = _samples(ph[r][0], t_seg, f0)
            i = _samples(ph[r][1], t_seg, f0)
            hv, hi = hist[r]
            n = windows[r]
            tol = configs[r].transient_hold
            lv, li = last_est[r]
            v_est = sliding_phasors(t_seg, v, n, fs, f0, hv, tol, lv)
            i_est = sliding_phasors(t_seg, i, n, fs, f0, hi, tol, li)
            seg[r] = (v, i, v_est, i_est)

        # earliest trip in this segment
        scans = {r: scan_relay(rstate[r], t_seg, seg[r][2], seg[r][3], configs[r], fault_t, trip_enabled)
                 for r in relay_ids}
        stops = [sc.stop for sc in scans.values() if sc.stop is not None]
        if stops:
            k_stop = min(stops)
            cut = k_stop + 1
            fired = []
            for r in relay_ids:
                if scans[r].stop == k_stop:
                    rstate[r] = scans[r].state
                    fired.append(scans[r].event)
                else:
                    sc = scan_relay(rstate[r], t_seg[:cut], seg[r][2][:, :cut], seg[r][3][:, :cut],
                                    configs[r], fault_t, trip_enabled)
                    rstate[r] = sc.state
        else:
            cut = len(t_seg)
            fired = []
            for r in relay_ids:
                rstate[r] = scans[r].state

        for r in relay_ids:
            v, i, v_est, i_est = seg[r]
            sl = slice(k, k + cut)
            v_rec[r][:, sl] = v[:, :cut]
            i_rec[r][:, sl] = i[:, :cut]
            ve_rec[r][:, sl] = v_est[:, :cut]
            ie_rec[r][:, sl] = i_est[:, :cut]
            if cut:
                last_est[r] = (v_est[:, cut - 1], i_est[:, cut - 1])
            hv, hi = hist[r]
            hist[r] = (np.concatenate([hv, v[:, :cut]], axis=1)[:, -pad:] if pad else hv,
                       np.concatenate([hi, i[:, :cut]], axis=1)[:, -pad:] if pad else hi)
        k += cut

        if fired:
            for ev in sorted(fired, key=lambda e: e.relay_id):
                trips.append(ev)
                net = isolate(net, ev)
            state = _solve(net, fault)
            ph = _relay_phasors(state, relay_ids)

    traces = {}
    for r in relay_ids:
        ln, end = net.relay_location(r)
        traces[r] = Trace(r, ln.id, end, t_all, v_rec[r], i_rec[r], ve_rec[r], ie_rec[r])
    report = RunReport(s.name, trips, rstate, traces, configs, faults_seen, net)
    if s.expect is not None:
        _check_expectations(report, s.expect)
    return report


def _fault_isolated(net: NetworkModel, fault: FaultSpec) -> bool:
    sysm = assemble(net, fault.line_id, fault.fraction)
    return not bool(sysm.energized()[sysm.fault_node])


def _check_line_trip(report: RunReport, lt: Mapping[str, Any]) -> list[str]:
    """The faulted line's first trip carries the code in time, and the fault ends up isolated."""
    line = lt["line"]
    on_line = [ev for ev in report.trips if report.traces[ev.relay_id].line_id == line]
    if not on_line:
        return [f"{line}: no relay tripped"]
    problems = []
    first = on_line[0]
    if "code" in lt and first.fault_code != lt["code"]:
        problems.append(f"{first.relay_id}: expected code {lt['code']}, got {first.fault_code}")
    if "max_response_s" in lt and first.response_time > lt["max_response_s"] + 1e-12:
        problems.append(f"{first.relay_id}: response {first.response_time:.6f} s exceeds {lt['max_response_s']} s")
    fault = next((f for f in reversed(report.faults) if f.line_id == line), None)
    if fault is not None and report.net is not None and not _fault_isolated(report.net, fault):
        problems.append(f"{line}: fault still fed by a source at the end of the run")
    return problems


def _check_expectations(report: RunReport, expect: Mapping[str, Any]) -> None:
    got = report.trips_by_relay()
    problems = []
    wanted = set()
    for tr in expect.get("trips", []):
        r = tr["relay"]
        wanted.add(r)
        if r not in got:
            problems.append(f"{r}: expected a trip, none occurred")
        elif "code" in tr and got[r].fault_code != tr["code"]:
            problems.append(f"{r}: expected code {tr['code']}, got {got[r].fault_code}")
        elif "max_response_s" in tr and got[r].response_time > tr["max_response_s"] + 1e-12:
            problems.append(f"{r}: response {got[r].response_time:.6f} s exceeds {tr['max_response_s']} s")
    for r in expect.get("no_trip", []):
        if r in got:
            problems.append(f"{r}: tripped at {got[r].t_trip:.4f} s but must not")
    lt = expect.get("line_trip")
    if lt:
        problems += _check_line_trip(report, lt)
    if expect.get("exclusive", False):
        for r in sorted(set(got) - wanted):
            problems.append(f"{r}: unexpected trip at {got[r].t_trip:.4f} s (code {got[r].fault_code})")
    report.mismatches = problems
    report.passed = not problems


# -- outputs ----------------------------------------------------------------------

def _fmt_time(seconds: float, fs: float) -> str:
    if seconds < 1.0 / fs:
        return "< 1 sample"
    return f"{round(seconds * 1e4) / 1e4:.4f} s"


def emit_outputs(report: RunReport, out_dir: str | Path, fs: float | None = None) -> list[Path]:
    """Write events.jsonl, one CSV per measurement point and summary.txt."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []

    ev_path = out / "events.jsonl"
    with ev_path.open("w") as fh:
        for ev in report.trips:
            fh.write(json.dumps({"t": ev.t_trip, "relay": ev.relay_id, "code": ev.fault_code,
                                 "response_time_s": ev.response_time}) + "\n")
    files.append(ev_path)

    for r, tr in report.traces.items():
        seq = np.abs(tr.i_seq)
        table = np.vstack([tr.t, tr.v, tr.i, seq]).T
        p = out / f"{tr.line_id}_{tr.end}.csv"
        np.savetxt(p, table, delimiter=",", header=CSV_HEADER, comments="", fmt="%.10g")
        files.append(p)

    if fs is None:
        tr = next(iter(report.traces.values()), None)
        fs = 1.0 / (tr.t[1] - tr.t[0]) if tr is not None and len(tr.t) > 1 else 10_000.0
    by_line = {f.line_id: f for f in report.faults}
    lines = [f"scenario: {report.scenario}",
             f"{'Relay':<6} {'Type of fault':<14} {'Location':<20} {'Response time':<14} {'R_f':<8} Code"]
    for ev in report.trips:
        tr = report.traces[ev.relay_id]
        f = by_line.get(tr.line_id)
        kind = f.kind if f else "-"
        loc = f"{f.fraction:g} of {f.line_id}" if f else tr.line_id
        rf = f"{f.rf:g} ohm" if f else "-"
        lines.append(f"{ev.relay_id:<6} {kind:<14} {loc:<20} {_fmt_time(ev.response_time, fs):<14} {rf:<8} "
                     f"{ev.fault_code}")
    if not report.trips:
        lines.append("(no trips)")
    if report.passed is not None:
        lines.append("expectations: " + ("met" if report.passed else "NOT met"))
        lines += [f"  - {m}" for m in report.mismatches]
    sp = out / "summary.txt"
    sp.write_text("\n".join(lines) + "\n")
    files.append(sp)
    report.files = files
    return files


# -- calibration ------------------------------------------------------------------

@dataclass(frozen=True)
class Calibration:
    v_threshold_pct: float
    i_threshold_pct: float
    i_fault_min: float
    i_nofault_max: float
    v_fault_max: float
    v_nofault_min: float
    current_separates: bool
    voltage_separates: bool

    def as_dict(self) -> dict:
        return dict(self.__dict__)

    def config(self, base: RelayConfig) -> RelayConfig:
        return replace(base, v_threshold_pct=self.v_threshold_pct, i_threshold_pct=self.i_threshold_pct)


CALIBRATION_FAULTS = (("LG", "DL-1"), ("LLLG", "DL-4"))


def _calibration_fault_scenario(testbed: Mapping, kind: str, line: str, rf: float, fs: float) -> Scenario:
    doc = {"name": f"calibrate {kind} {line}", "testbed": testbed, "mode": "islanded", "duration": 0.1,
           "fs": fs, "events": [{"t": 0.04, "action": "fault",
                                 "fault": {"kind": kind, "line": line, "fraction": 0.5, "rf_ohm": rf}}]}
    return parse_scenario(doc)


def default_no_fault_scenarios(testbed: Mapping | None = None, fs: float | None = None) -> list[Scenario]:
    out = []
    for k in range(1, 5):
        doc = json.loads(data_path(f"scenarios/nofault_{k}.json").read_text())
        if testbed is not None:
            doc["testbed"] = testbed
        if fs is not None:
            doc["fs"] = fs
        out.append(parse_scenario(doc, data_path("scenarios")))
    return out


def calibrate_thresholds(testbed: Mapping | None = None, fs: float = 10_000.0,
                         no_fault: Sequence[Scenario] | None = None, rf: float = 20.0) -> Calibration:
    """Place the two thresholds between fault and no-fault measurements.

    Fault side: islanded L-G and L-L-L-G faults through ``rf`` at the middle
    of DL-1 and DL-4.  For each, the relay of the faulted line that sees the
    larger fault current is used, over its faulted phases once the
    estimation window lies entirely after inception.  No-fault side: the
    relays each no-fault scenario declares as ``no_trip``, over every
    sample.  Voltage extremes come only from scenarios without a fault
    event, since a fault elsewhere is expected to depress the voltage.

    Each threshold goes midway between the two extremes when they
    separate.  Tripping needs both conditions, so one separating quantity
    is enough; the other is then set midway between the fault extreme and
    rated, keeping every calibration fault inside it.  NoSeparation is
    raised when neither quantity separates.
    """
    testbed = default_testbed() if testbed is None else testbed
    no_fault = default_no_fault_scenarios(testbed, fs) if no_fault is None else no_fault

    i_fault, v_fault = [], []
    for kind, line in CALIBRATION_FAULTS:
        s = _calibration_fault_scenario(testbed, kind, line, rf, fs)
        rep = run_scenario(s, trip_enabled=False)
        spec = s.events[0].fault
        phases = ["abc".index(p) for p in spec.faulted_phases]
        best = None
        for r, tr in rep.traces.items():
            if tr.line_id != line:
                continue
            cfg = rep.configs[r]
            v_er, i_er = tr.error_pct(cfg)
            k0 = int(math.ceil(spec.t_on * fs - 1e-6)) + cfg.window_samples(fs)
            i_min = float(i_er[phases, k0:].min())
            v_max = float(v_er[phases, k0:].max())
            if best is None or i_min > best[0]:
                best = (i_min, v_max)
        i_fault.append(best[0])
        v_fault.append(best[1])

    i_nf, v_nf = [], []
    for s in no_fault:
        watch = list((s.expect or {}).get("no_trip", []))
        rep = run_scenario(s, trip_enabled=False)
        has_fault = any(ev.action == "fault" for ev in s.events)
        for r in watch:
            v_er, i_er = rep.traces[r].error_pct(rep.configs[r])
            i_nf.append(float(i_er.max()))
            if not has_fault:
                v_nf.append(float(v_er.min()))

    i_lo, i_hi = min(i_fault), max(i_nf) if i_nf else -100.0
    v_hi, v_lo = max(v_fault), min(v_nf) if v_nf else 0.0
    ranges = {"i_fault_min": i_lo, "i_nofault_max": i_hi, "v_fault_max": v_hi, "v_nofault_min": v_lo}
    i_sep = i_lo > i_hi
    v_sep = v_hi < v_lo
    if not (i_sep or v_sep):
        raise NoSeparation("fault and no-fault ranges overlap in both voltage and current:", ranges)
    i_thr = 0.5 * (i_lo + i_hi) if i_sep else 0.5 * i_lo
    v_thr = 0.5 * (v_hi + v_lo) if v_sep else 0.5 * v_hi
    if not (i_thr > 0 and v_thr < 0):
        raise NoSeparation("no admissible threshold pair (need i_threshold > 0, v_threshold < 0):", ranges)
    if not (i_sep and v_sep):
        log.info("calibration: only %s separates fault from no-fault", "current" if i_sep else "voltage")
    return Calibration(v_thr, i_thr, i_lo, i_hi, v_hi, v_lo, i_sep, v_sep)


# -- fault-resistance sweep ------------------------------------------------------

def sweep(s: Scenario, rf_values: Sequence[float], thresholds: RelayConfig | None = None) -> list[tuple[float, RunReport]]:
    """Re-run a scenario with every fault event's resistance set to each value."""
    out = []
    for rf in rf_values:
        events = tuple(replace(ev, fault=replace(ev.fault, rf=float(rf))) if ev.fault else ev for ev in s.events)
        out.append((float(rf), run_scenario(replace(s, events=events), thresholds)))
    return out
