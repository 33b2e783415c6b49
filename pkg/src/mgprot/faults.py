"""Sequence-network fault solutions.

Current sign convention: fault currents are *injections* into the network at
the fault point, so a bolted three-phase fault gives
``I+ = -Vpre / (Zf + Z1 || Z2)``.  Side contributions ``i_side1``/``i_side2``
flow from the fault point into each side; bus fault components follow as
``dV_bus = I_side * Zs`` (a sag for a real fault).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .network import OPEN, NetworkModel, SequenceImpedance, admittance, is_open
from .nodal import POS, DeEnergized, NodalSystem, TheveninPair, assemble
from .phasor import ALPHA, SequenceSet, ThreePhaseSet, fortescue_compose

__all__ = [
    "KINDS",
    "FaultSpec",
    "FaultSolution",
    "NetworkState",
    "ZeroImpedanceFault",
    "ZeroLineImpedance",
    "interconnect",
    "solve_internal_fault",
    "solve_external_fault",
    "phase_quantities",
    "solve_network",
    "two_sided",
]

KINDS = ("LG", "LL", "LLG", "LLLG")
_DEFAULT_PHASES = {"LG": "a", "LL": "bc", "LLG": "bc", "LLLG": "abc"}
_N_PHASES = {"LG": 1, "LL": 2, "LLG": 2, "LLLG": 3}
# kind code used by the relays (L-G=1, L-L=2, L-L-G=3, L-L-L-G=4)
FAULT_CODES = {"LG": 1, "LL": 2, "LLG": 3, "LLLG": 4}


class ZeroImpedanceFault(ZeroDivisionError):
    pass


class ZeroLineImpedance(ZeroDivisionError):
    pass


@dataclass(frozen=True)
class FaultSpec:
    kind: str
    line_id: str = ""
    fraction: float = 0.5
    rf: float = 0.0  # ohm
    t_on: float = 0.0
    faulted_phases: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown fault kind {self.kind!r}; expected one of {KINDS}")
        phases = self.faulted_phases or _DEFAULT_PHASES[self.kind]
        phases = "".join(sorted(set(phases.lower())))
        if not set(phases) <= set("abc") or len(phases) != _N_PHASES[self.kind]:
            raise ValueError(f"{self.kind} fault needs {_N_PHASES[self.kind]} of phases a/b/c, got {phases!r}")
        object.__setattr__(self, "faulted_phases", phases)
        if self.rf < 0:
            raise ValueError("rf must be >= 0")
        if not 0.0 <= self.fraction <= 1.0:
            raise ValueError("fraction must lie in [0, 1]")

    @property
    def reference_phase(self) -> str:
        """Phase that is symmetric with respect to the fault."""
        if self.kind == "LG":
            return self.faulted_phases
        if self.kind in ("LL", "LLG"):
            return next(p for p in "abc" if p not in self.faulted_phases)
        return "a"

    @property
    def code(self) -> int:
        return FAULT_CODES[self.kind]


def _par(a: complex, b: complex) -> complex:
    ya, yb = admittance(a), admittance(b)
    return OPEN if ya + yb == 0 else 1.0 / (ya + yb)


def interconnect(kind: str, zth, v_pre: complex, zf: complex, reference_phase: str = "a"):
    """Fault-point sequence currents and voltage changes for one fault kind.

    ``zth`` holds the (pos, neg, zero) driving-point impedances, any of which
    may be the open sentinel.  Returns ``(i_inj, dv)`` as length-3 arrays in
    pos/neg/zero order.
    """
    k = "abc".index(reference_phase)
    # rotate so the reference phase plays the role of phase a
    v = v_pre * ALPHA ** (2 * k)
    zp, zn, z0 = (complex(z) for z in zth)
    i = np.zeros(3, dtype=complex)
    dv = np.zeros(3, dtype=complex)
    if is_open(zp):
        return i, dv

    if kind == "LLLG":
        den = zp + zf
        if den == 0:
            raise ZeroImpedanceFault("bolted three-phase fault on a zero-impedance point")
        i[0] = -v / den
    elif kind == "LG":
        if is_open(zn):
            return i, dv
        if is_open(z0):
            # no zero-sequence return: no current, the neutral shifts instead
            dv[2] = -v
            return _unrotate(i, dv, k)
        den = zp + zn + z0 + 3 * zf
        if den == 0:
            raise ZeroImpedanceFault("bolted line-to-ground fault on a zero-impedance point")
        i[:] = -v / den
    elif kind == "LL":
        if is_open(zn):
            return i, dv
        den = zp + zn + zf
        if den == 0:
            raise ZeroImpedanceFault("bolted line-to-line fault on a zero-impedance point")
        i[0] = -v / den
        i[1] = -i[0]
    elif kind == "LLG":
        if is_open(zn):
            return i, dv
        zg = OPEN if is_open(z0) else z0 + 3 * zf
        den = zp + _par(zn, zg)
        if den == 0:
            raise ZeroImpedanceFault("bolted double line-to-ground fault on a zero-impedance point")
        i[0] = -v / den
        if is_open(zg):
            i[1] = -i[0]
        else:
            i[1] = -i[0] * zg / (zn + zg)
            i[2] = -i[0] * zn / (zn + zg)
    else:
        raise ValueError(f"unknown fault kind {kind!r}")

    dv[0] = zp * i[0]
    dv[1] = 0j if is_open(zn) else zn * i[1]
    if is_open(z0):
        if kind == "LLG":
            # faulted phases sit at ground potential with no return current
            vp, vn = v + dv[0], dv[1]
            dv[2] = -(ALPHA**2 * vp + ALPHA * vn)
    else:
        dv[2] = z0 * i[2]
    return _unrotate(i, dv, k)


def _unrotate(i: np.ndarray, dv: np.ndarray, k: int):
    rot = np.array([ALPHA**k, ALPHA ** (2 * k), 1.0], dtype=complex)
    return i * rot, dv * rot


@dataclass(frozen=True)
class FaultSolution:
    """Fault-component sequence quantities of a two-sided fault solve (pu).

    ``v_bus1``/``v_bus2`` and ``v_fault`` are changes from the pre-fault state;
    :func:`phase_quantities` adds the pre-fault operating point back.
    """

    i_fault: SequenceSet
    i_side1: SequenceSet
    i_side2: SequenceSet
    v_bus1: SequenceSet
    v_bus2: SequenceSet
    v_fault: SequenceSet = SequenceSet()
    thevenin: TheveninPair | None = None
    energized: bool = True


def solve_internal_fault(th: TheveninPair, spec: FaultSpec, z_base: float = 1.0) -> FaultSolution:
    """Solve a fault between the two sides of ``th``.

    ``spec.rf`` is in ohms and is divided by ``z_base``; pass the network's
    base impedance when ``th`` came from :func:`~mgprot.nodal.reduce_to_thevenin`
    (the default of 1.0 treats ``rf`` as per-unit).
    """
    zero = SequenceSet()
    if not th.energized:
        return FaultSolution(zero, zero, zero, zero, zero, zero, th, energized=False)

    y1 = np.array([admittance(z) for z in th.z1])
    y2 = np.array([admittance(z) for z in th.z2])
    ysum = y1 + y2
    zth = [OPEN if y == 0 else 1.0 / y for y in ysum]
    i_f, dv_f = interconnect(spec.kind, zth, th.vfp_prefault, spec.rf / z_base, spec.reference_phase)

    share1 = np.where(ysum != 0, y1 / np.where(ysum != 0, ysum, 1), 0)
    share2 = np.where(ysum != 0, y2 / np.where(ysum != 0, ysum, 1), 0)
    i1 = i_f * share1
    i2 = i_f * share2
    zd1 = np.array(list(th.zd1))
    zd2 = np.array(list(th.zd2))
    # drop along each segment from the fault point to the bus
    dv1 = dv_f - i1 * zd1 if th.connected1 else np.zeros(3, dtype=complex)
    dv2 = dv_f - i2 * zd2 if th.connected2 else np.zeros(3, dtype=complex)
    return FaultSolution(
        SequenceSet.from_array(i_f),
        SequenceSet.from_array(i1),
        SequenceSet.from_array(i2),
        SequenceSet.from_array(dv1),
        SequenceSet.from_array(dv2),
        SequenceSet.from_array(dv_f),
        th,
    )


def solve_external_fault(net: NetworkModel | None, th_between: TheveninPair, v1: SequenceSet,
                         v2: SequenceSet) -> SequenceSet:
    """Through-current on a healthy line from its end-bus sequence voltages."""
    zd = np.array(list(th_between.zd1)) + np.array(list(th_between.zd2))
    if np.any(zd == 0):
        raise ZeroLineImpedance("line has zero impedance in at least one sequence")
    return SequenceSet.from_array((v1.as_array() - v2.as_array()) / zd)


def phase_quantities(sol: FaultSolution, side: int) -> tuple[ThreePhaseSet, ThreePhaseSet]:
    """Total phase voltage at bus ``side`` and the current from that bus into the line (pu)."""
    if side not in (1, 2):
        raise ValueError("side must be 1 or 2")
    th = sol.thevenin
    v_pre = th.prefault_bus_voltage(side) if th is not None else 0j
    i_pre = (th.i1_prefault if side == 1 else th.i2_prefault) if th is not None else 0j
    dv = sol.v_bus1 if side == 1 else sol.v_bus2
    di = sol.i_side1 if side == 1 else sol.i_side2
    v_seq = np.array([v_pre, 0, 0], dtype=complex) + dv.as_array()
    # the side contribution flows towards the bus, i.e. out of the line
    i_seq = np.array([i_pre, 0, 0], dtype=complex) - di.as_array()
    return fortescue_compose(v_seq, "pu_V"), fortescue_compose(i_seq, "pu_A")


@dataclass
class NetworkState:
    """Solved sequence voltages of every node, with or without a fault."""

    sysm: NodalSystem
    v: np.ndarray  # (3, n) pu
    fault: FaultSpec | None = None
    i_fault: np.ndarray = field(default_factory=lambda: np.zeros(3, dtype=complex))

    @property
    def net(self) -> NetworkModel:
        return self.sysm.net

    def bus_voltage(self, bus_id: str) -> np.ndarray:
        return self.v[:, self.sysm.index[bus_id]].copy()

    def line_end_current(self, line_id: str, end: str) -> np.ndarray:
        """Sequence current (pu) flowing from the ``end`` bus into the line."""
        ln = self.net.line(line_id)
        closed = ln.closed_from if end == "from" else ln.closed_to
        out = np.zeros(3, dtype=complex)
        if not closed:
            return out
        brs = [br for br in self.sysm.branches if br.line_id == line_id]
        if self.sysm.fault_line != line_id:
            if not brs:
                return out
            sign = 1.0 if end == "from" else -1.0
            return np.array([sign * self.sysm.branch_current(brs[0], self.v[s], s) for s in range(3)])
        seg = {br.segment: br for br in brs}
        want = 1 if end == "from" else 2
        if want in seg:
            br = seg[want]
            sign = 1.0 if end == "from" else -1.0
            return np.array([sign * self.sysm.branch_current(br, self.v[s], s) for s in range(3)])
        # fault point sits on this bus: the relay carries the fault current plus
        # whatever continues along the other segment
        other = seg.get(3 - want)
        drawn = -self.i_fault
        if other is None:
            return drawn
        sign = 1.0 if want == 1 else -1.0
        return drawn + np.array([sign * self.sysm.branch_current(other, self.v[s], s) for s in range(3)])

    def relay_measurement(self, relay_id: str) -> tuple[np.ndarray, np.ndarray]:
        """(bus voltage, line current) sequence vectors in pu at one relay."""
        ln, end = self.net.relay_location(relay_id)
        bus = ln.from_bus if end == "from" else ln.to_bus
        return self.bus_voltage(bus), self.line_end_current(ln.id, end)

    def relay_phasors(self, relay_id: str) -> tuple[ThreePhaseSet, ThreePhaseSet]:
        """Phase voltage (V) and current (A) RMS phasors seen by a relay."""
        v_seq, i_seq = self.relay_measurement(relay_id)
        base = self.net.base
        return (
            fortescue_compose(v_seq * base.v_phase, "V"),
            fortescue_compose(i_seq * base.i_amp, "A"),
        )


def solve_network(net: NetworkModel, fault: FaultSpec | None = None) -> NetworkState:
    """Solve the whole network, optionally with one shunt fault applied."""
    if fault is None:
        sysm = assemble(net)
        v = np.zeros((3, sysm.n), dtype=complex)
        v[POS] = sysm.steady_state()
        return NetworkState(sysm, v)

    sysm = assemble(net, fault.line_id, fault.fraction)
    v = np.zeros((3, sysm.n), dtype=complex)
    v[POS] = sysm.steady_state()
    f = sysm.fault_node
    if not sysm.energized()[f]:
        return NetworkState(sysm, v, fault)

    cols = [sysm.transfer_column(s, f) for s in range(3)]
    zth = [OPEN if c is None else c[f] for c in cols]
    i_f, dv_f = interconnect(fault.kind, zth, v[POS, f], fault.rf / net.base.z_ohm, fault.reference_phase)
    for s, col in enumerate(cols):
        if col is not None:
            v[s] += col * i_f[s]
        elif dv_f[s] != 0:
            # floating component: every node follows the fault point
            comp = sysm.components(s)
            mask = np.array([c == comp[f] for c in comp])
            if s == POS:
                mask &= sysm.energized()
            v[s, mask] += dv_f[s]
    return NetworkState(sysm, v, fault, i_f)


def two_sided(net: NetworkModel, fault: FaultSpec) -> FaultSolution:
    """Convenience: reduce around the fault point and solve."""
    from .nodal import reduce_to_thevenin

    try:
        th = reduce_to_thevenin(net, fault.line_id, fault.fraction)
    except DeEnergized:
        dead = SequenceImpedance(OPEN, OPEN, OPEN)
        th = TheveninPair(dead, dead, 0j, energized=False)
    return solve_internal_fault(th, fault, net.base.z_ohm)
