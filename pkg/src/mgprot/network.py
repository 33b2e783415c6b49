"""Microgrid network model: buses, lines, sources, loads and their switches.

A :class:`NetworkModel` is an immutable value.  Switching returns a new model.
Impedances are stored in ohms and EMFs in volts (phase RMS, phase a
reference); the solvers in :mod:`mgprot.nodal` convert to per-unit.
"""

from __future__ import annotations

import cmath
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable, Mapping

from .phasor import polar

__all__ = [
    "OPEN",
    "ConfigError",
    "UnknownSwitch",
    "SequenceImpedance",
    "Bus",
    "DistributionLine",
    "Source",
    "Load",
    "PerUnitBase",
    "NetworkModel",
    "is_open",
    "admittance",
    "line_total_impedance",
    "split_line",
    "build_testbed",
    "load_testbed",
    "apply_switch_action",
    "set_mode",
    "load_impedance",
]

OPEN = complex(math.inf, 0.0)
"""Sentinel for an absent (open-circuit) impedance."""


class ConfigError(ValueError):
    """Raised when a testbed configuration is incomplete or inconsistent."""

    def __init__(self, problems: Iterable[str]):
        self.problems = list(problems)
        super().__init__("invalid testbed config:\n  " + "\n  ".join(self.problems))


class UnknownSwitch(KeyError):
    pass


def is_open(z: complex) -> bool:
    return cmath.isinf(z)


def admittance(z: complex) -> complex:
    """1/z with the open sentinel mapping to zero admittance."""
    if is_open(z):
        return 0j
    if z == 0:
        raise ZeroDivisionError("zero impedance has no finite admittance")
    return 1.0 / z


@dataclass(frozen=True)
class SequenceImpedance:
    zp: complex
    zn: complex
    z0: complex

    @classmethod
    def symmetric(cls, z: complex, z0: complex | None = None) -> "SequenceImpedance":
        return cls(complex(z), complex(z), complex(z if z0 is None else z0))

    def __iter__(self):
        return iter((self.zp, self.zn, self.z0))

    def __getitem__(self, seq: int) -> complex:
        return (self.zp, self.zn, self.z0)[seq]

    def scaled(self, k: float) -> "SequenceImpedance":
        return SequenceImpedance(*(_scale(z, k) for z in self))

    def __add__(self, other: "SequenceImpedance") -> "SequenceImpedance":
        return SequenceImpedance(*(_add(a, b) for a, b in zip(self, other)))

    def __sub__(self, other: "SequenceImpedance") -> "SequenceImpedance":
        return SequenceImpedance(*(OPEN if is_open(a) else a - b for a, b in zip(self, other)))


def _scale(z: complex, k: float) -> complex:
    return OPEN if is_open(z) else z * k


def _add(a: complex, b: complex) -> complex:
    return OPEN if (is_open(a) or is_open(b)) else a + b


@dataclass(frozen=True)
class Bus:
    id: str
    nominal_voltage: float  # line-to-line RMS, V

    def __post_init__(self):
        if self.nominal_voltage <= 0:
            raise ValueError(f"bus {self.id}: nominal_voltage must be positive")


@dataclass(frozen=True)
class DistributionLine:
    id: str
    from_bus: str
    to_bus: str
    length: float  # km
    per_km: SequenceImpedance  # ohm/km
    relay_from: str | None = None
    relay_to: str | None = None
    closed_from: bool = True
    closed_to: bool = True
    rated_current: float | None = None  # A RMS

    def __post_init__(self):
        if self.length <= 0:
            raise ValueError(f"line {self.id}: length must be positive")

    @property
    def in_service(self) -> bool:
        return self.closed_from and self.closed_to

    @property
    def relays(self) -> tuple[str, ...]:
        return tuple(r for r in (self.relay_from, self.relay_to) if r)


@dataclass(frozen=True)
class Source:
    id: str
    bus: str
    emf: complex  # V phase RMS, positive sequence, phase a
    internal: SequenceImpedance  # ohm
    kind: str = "der"  # "grid" | "der"
    connected: bool = True
    rating_kva: float | None = None


@dataclass(frozen=True)
class Load:
    id: str
    bus: str
    impedance: SequenceImpedance  # ohm per phase (star equivalent)
    connected: bool = True
    p_kw: float | None = None
    pf: float | None = None


@dataclass(frozen=True)
class PerUnitBase:
    s_mva: float = 1.0
    v_kv: float = 0.415  # line-to-line

    @property
    def z_ohm(self) -> float:
        return self.v_kv**2 / self.s_mva

    @property
    def i_amp(self) -> float:
        return self.s_mva * 1e6 / (math.sqrt(3) * self.v_kv * 1e3)

    @property
    def v_phase(self) -> float:
        return self.v_kv * 1e3 / math.sqrt(3)


@dataclass(frozen=True)
class NetworkModel:
    buses: tuple[Bus, ...]
    lines: tuple[DistributionLine, ...]
    sources: tuple[Source, ...]
    loads: tuple[Load, ...] = ()
    frequency: float = 50.0
    base: PerUnitBase = field(default_factory=PerUnitBase)
    # constant current injections (A, phase a, positive sequence) that stand
    # in for the local dispatch behind a flat pre-fault profile
    injections: tuple[tuple[str, complex], ...] = ()
    name: str = ""

    @property
    def mode(self) -> str:
        grids = [s for s in self.sources if s.kind == "grid"]
        if grids and any(s.connected for s in grids):
            return "grid_connected"
        return "islanded"

    def bus(self, bus_id: str) -> Bus:
        for b in self.buses:
            if b.id == bus_id:
                return b
        raise KeyError(bus_id)

    def line(self, line_id: str) -> DistributionLine:
        for ln in self.lines:
            if ln.id == line_id:
                return ln
        raise KeyError(f"unknown line {line_id!r}")

    def relay_location(self, relay_id: str) -> tuple[DistributionLine, str]:
        """(line, end) where end is 'from' or 'to'."""
        for ln in self.lines:
            if ln.relay_from == relay_id:
                return ln, "from"
            if ln.relay_to == relay_id:
                return ln, "to"
        raise KeyError(f"unknown relay {relay_id!r}")

    @property
    def relay_ids(self) -> tuple[str, ...]:
        return tuple(r for ln in self.lines for r in ln.relays)

    @property
    def switch_ids(self) -> tuple[str, ...]:
        ids = [ln.id for ln in self.lines] + list(self.relay_ids)
        ids += [s.id for s in self.sources] + [ld.id for ld in self.loads]
        return tuple(ids)


# -- line geometry -----------------------------------------------------------

def line_total_impedance(line: DistributionLine) -> SequenceImpedance:
    return line.per_km.scaled(line.length)


def split_line(line: DistributionLine, fraction: float) -> tuple[SequenceImpedance, SequenceImpedance]:
    """Sending-side and receiving-side segments for a point at ``fraction``."""
    if not 0.0 <= fraction <= 1.0:
        raise ValueError("fraction must lie in [0, 1]")
    total = line_total_impedance(line)
    # the smaller part is the remainder of the larger one, which keeps
    # zd1 + zd2 == total exact in floating point
    if fraction >= 0.5:
        zd1 = total.scaled(fraction)
        zd2 = SequenceImpedance(*(t - a for t, a in zip(total, zd1)))
    else:
        zd2 = total.scaled(1.0 - fraction)
        zd1 = SequenceImpedance(*(t - b for t, b in zip(total, zd2)))
    return zd1, zd2


# -- switching ---------------------------------------------------------------

def _as_closed(state: Any) -> bool:
    if isinstance(state, bool):
        return state
    s = str(state).lower()
    if s in ("closed", "close", "on", "in"):
        return True
    if s in ("open", "off", "out"):
        return False
    raise ValueError(f"bad switch state {state!r}")


def apply_switch_action(net: NetworkModel, switch_id: str, state) -> NetworkModel:
    """Return a copy of ``net`` with one switch set.

    Switch ids are relay ids (one line end), line ids (both ends), source ids
    (connection switch, e.g. the grid static switch) and load ids.
    """
    closed = _as_closed(state)
    lines = list(net.lines)
    for i, ln in enumerate(lines):
        if ln.id == switch_id:
            lines[i] = replace(ln, closed_from=closed, closed_to=closed)
            return replace(net, lines=tuple(lines))
        if ln.relay_from == switch_id:
            lines[i] = replace(ln, closed_from=closed)
            return replace(net, lines=tuple(lines))
        if ln.relay_to == switch_id:
            lines[i] = replace(ln, closed_to=closed)
            return replace(net, lines=tuple(lines))
    for i, src in enumerate(net.sources):
        if src.id == switch_id:
            sources = list(net.sources)
            sources[i] = replace(src, connected=closed)
            return replace(net, sources=tuple(sources))
    for i, ld in enumerate(net.loads):
        if ld.id == switch_id:
            loads = list(net.loads)
            loads[i] = replace(ld, connected=closed)
            return replace(net, loads=tuple(loads))
    raise UnknownSwitch(switch_id)


def set_mode(net: NetworkModel, mode: str) -> NetworkModel:
    """Open or close every grid source switch."""
    if mode not in ("grid_connected", "islanded"):
        raise ValueError(f"unknown mode {mode!r}")
    closed = mode == "grid_connected"
    for src in net.sources:
        if src.kind == "grid":
            net = apply_switch_action(net, src.id, closed)
    return net


# -- testbed configuration ----------------------------------------------------

def load_impedance(p_kw: float, pf: float, v_ll: float) -> complex:
    """Per-phase star impedance of a constant-impedance load at rated voltage."""
    if p_kw <= 0 or not 0 < pf <= 1:
        raise ValueError("load needs p_kw > 0 and 0 < pf <= 1")
    q_kvar = p_kw * math.tan(math.acos(pf))
    s = complex(p_kw, q_kvar) * 1e3
    return v_ll**2 / s.conjugate()


def _cplx(value) -> complex:
    if isinstance(value, (int, float)):
        return complex(value)
    if isinstance(value, Mapping):
        return complex(value.get("r", 0.0), value.get("x", 0.0))
    r, x = value
    return complex(r, x)


def _from_x_r(magnitude: float, x_r: float) -> complex:
    ang = math.atan(x_r)
    return cmath.rect(magnitude, ang)


def _seq_from_cfg(cfg: Mapping, prefix: str, problems: list[str]) -> SequenceImpedance | None:
    if "pos" not in cfg:
        problems.append(f"{prefix}: missing 'pos' impedance")
        return None
    zp = _cplx(cfg["pos"])
    zn = _cplx(cfg.get("neg", cfg["pos"]))
    if "zero" in cfg:
        z0 = OPEN if cfg["zero"] is None else _cplx(cfg["zero"])
    else:
        z0 = zp * cfg.get("zero_ratio", 3.0)
    return SequenceImpedance(zp, zn, z0)


_REQUIRED = {
    "buses": "bus list",
    "lines": "distribution line list",
    "sources": "source list",
    "transformer": "transformer rating",
}


def build_testbed(config: Mapping[str, Any], mode: str | None = None) -> NetworkModel:
    """Build a :class:`NetworkModel` from a parsed testbed JSON document.

    ``mode`` overrides the grid switch state before the pre-fault profile is
    fixed.

    Every problem found is collected and reported together in one
    :class:`ConfigError`.
    """
    problems: list[str] = []
    for key, what in _REQUIRED.items():
        if key not in config:
            problems.append(f"{key}: missing {what}")
    if problems:
        raise ConfigError(problems)

    base_cfg = config.get("base", {})
    base = PerUnitBase(float(base_cfg.get("s_mva", 1.0)), float(base_cfg.get("v_kv", 0.415)))
    freq = float(config.get("frequency_hz", 50.0))

    buses = []
    for i, b in enumerate(config["buses"]):
        if "id" not in b:
            problems.append(f"buses[{i}]: missing id")
            continue
        v = float(b.get("nominal_voltage_v", base.v_kv * 1e3))
        if v <= 0:
            problems.append(f"buses[{i}] ({b['id']}): nominal_voltage_v must be positive")
            continue
        buses.append(Bus(b["id"], v))
    bus_ids = {b.id for b in buses}
    v_nom = {b.id: b.nominal_voltage for b in buses}

    tx = config["transformer"]
    for key in ("s_mva", "lv_kv", "z_pct", "bus"):
        if key not in tx:
            problems.append(f"transformer: missing {key}")
    if tx.get("bus") is not None and tx.get("bus") not in bus_ids:
        problems.append(f"transformer: unknown bus {tx.get('bus')!r}")

    z_tx = None
    if not any(p.startswith("transformer") for p in problems):
        v_lv = float(tx["lv_kv"]) * 1e3
        z_mag = float(tx["z_pct"]) / 100.0 * v_lv**2 / (float(tx["s_mva"]) * 1e6)
        z_tx = _from_x_r(z_mag, float(tx.get("x_r", 6.0)))

    sources = []
    for i, s in enumerate(config["sources"]):
        sid = s.get("id", f"sources[{i}]")
        kind = s.get("kind", "der")
        bus = s.get("bus")
        if bus not in bus_ids:
            problems.append(f"source {sid}: unknown bus {bus!r}")
            continue
        v_ph = v_nom[bus] / math.sqrt(3)
        emf = polar(v_ph * float(s.get("emf_pu", 1.0)), float(s.get("emf_angle_deg", 0.0)))
        if kind == "grid":
            if z_tx is None:
                continue
            if "sc_mva" not in s:
                problems.append(f"source {sid}: grid needs sc_mva")
                continue
            z_grid = _from_x_r(v_nom[bus] ** 2 / (float(s["sc_mva"]) * 1e6), float(s.get("x_r", 10.0)))
            group = str(tx.get("vector_group", "Dyn11"))
            if group.lower().startswith("dyn"):
                z0 = z_tx  # grid side blocks zero sequence
            elif group.lower().startswith("ynyn"):
                z0 = z_tx + z_grid
            else:
                z0 = OPEN
            internal = SequenceImpedance(z_grid + z_tx, z_grid + z_tx, z0)
            rating = float(s.get("p_kw", 0.0)) or None
        elif kind == "der":
            if "p_kw" not in s and "internal" not in s:
                problems.append(f"source {sid}: DER needs p_kw or an explicit internal impedance")
                continue
            if "internal" in s:
                internal = _seq_from_cfg(s["internal"], f"source {sid}", problems)
                if internal is None:
                    continue
            else:
                i_rated = float(s["p_kw"]) * 1e3 / (math.sqrt(3) * v_nom[bus])
                mult = float(s.get("fault_current_multiple", 2.0))
                zp = _from_x_r(float(s.get("emf_pu", 1.0)) * v_ph / (mult * i_rated), float(s.get("x_r", 5.0)))
                zn = zp * float(s.get("neg_ratio", 1.0))
                z0 = OPEN if s.get("grounded", True) is False else zp * float(s.get("zero_ratio", 1.0))
                internal = SequenceImpedance(zp, zn, z0)
            rating = float(s["p_kw"]) if "p_kw" in s else None
        else:
            problems.append(f"source {sid}: unknown kind {kind!r}")
            continue
        sources.append(Source(sid, bus, emf, internal, kind, True, rating))

    default_per_km = config.get("line_defaults", {}).get("z_per_km_ohm", {"pos": [0.1, 0.3], "zero_ratio": 3.0})
    lines = []
    for i, ln in enumerate(config["lines"]):
        lid = ln.get("id", f"lines[{i}]")
        for end in ("from_bus", "to_bus"):
            if ln.get(end) not in bus_ids:
                problems.append(f"line {lid}: unknown {end} {ln.get(end)!r}")
        length = float(ln.get("length_km", 1.0))
        if length <= 0:
            problems.append(f"line {lid}: length_km must be positive")
        per_km = _seq_from_cfg(ln.get("z_per_km_ohm", default_per_km), f"line {lid}", problems)
        if any(p.startswith(f"line {lid}") for p in problems):
            continue
        rated = ln.get("rated_current_a")
        lines.append(
            DistributionLine(
                lid, ln["from_bus"], ln["to_bus"], length, per_km,
                ln.get("relay_from"), ln.get("relay_to"),
                rated_current=None if rated is None else float(rated),
            )
        )
    relay_ids = [r for ln in lines for r in ln.relays]
    dupes = sorted({r for r in relay_ids if relay_ids.count(r) > 1})
    if dupes:
        problems.append(f"lines: duplicate relay ids {dupes}")

    loads = []
    for i, ld in enumerate(config.get("loads", [])):
        lid = ld.get("id", f"loads[{i}]")
        if ld.get("bus") not in bus_ids:
            problems.append(f"load {lid}: unknown bus {ld.get('bus')!r}")
            continue
        try:
            z = load_impedance(float(ld["p_kw"]), float(ld.get("pf", 1.0)), v_nom[ld["bus"]])
        except (KeyError, ValueError) as exc:
            problems.append(f"load {lid}: {exc}")
            continue
        z0 = z if ld.get("grounded", False) else OPEN
        loads.append(
            Load(lid, ld["bus"], SequenceImpedance(z, z, z0), bool(ld.get("connected", True)),
                 float(ld["p_kw"]), float(ld.get("pf", 1.0)))
        )

    if problems:
        raise ConfigError(problems)

    net = NetworkModel(tuple(buses), tuple(lines), tuple(sources), tuple(loads), freq, base,
                       name=str(config.get("name", "")))
    for sw, state in config.get("switches", {}).items():
        try:
            net = apply_switch_action(net, sw, state)
        except UnknownSwitch:
            problems.append(f"switches: unknown switch {sw!r}")
    if problems:
        raise ConfigError(problems)
    if mode is not None:
        net = set_mode(net, mode)

    if config.get("prefault", "flat") == "flat":
        from .nodal import flat_dispatch

        net = flat_dispatch(net)
    return net


def load_testbed(path: str | Path) -> tuple[NetworkModel, dict]:
    """Read a testbed JSON file; returns the model and the raw config."""
    cfg = json.loads(Path(path).read_text())
    return build_testbed(cfg), cfg
