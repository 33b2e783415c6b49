"""Per-unit nodal admittance assembly and the two-sided Thevenin reduction.

Each sequence network is assembled independently.  Sources enter the
positive-sequence network as Norton equivalents; the negative and zero
networks are passive.  Open elements are left out of the matrices entirely.

The whole microgrid is referred to one voltage level (the LV side of the
grid transformer), so a single :class:`~mgprot.network.PerUnitBase` applies.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .network import (
    OPEN,
    NetworkModel,
    SequenceImpedance,
    admittance,
    is_open,
    split_line,
)

__all__ = [
    "FAULT_NODE",
    "DeEnergized",
    "Branch",
    "NodalSystem",
    "TheveninPair",
    "assemble",
    "flat_dispatch",
    "reduce_to_thevenin",
]

FAULT_NODE = "__fault__"
POS, NEG, ZERO = 0, 1, 2


class DeEnergized(RuntimeError):
    """No connected source can feed the point of interest."""


@dataclass(frozen=True)
class Branch:
    i: int
    j: int
    z: SequenceImpedance  # pu
    line_id: str
    segment: int | None = None  # None for a whole line, 1 or 2 for a split line


def _pu(z: SequenceImpedance, z_base: float) -> SequenceImpedance:
    return SequenceImpedance(*(OPEN if is_open(x) else x / z_base for x in z))


class _Components:
    """Union-find over node indices."""

    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, k: int) -> int:
        while self.parent[k] != k:
            self.parent[k] = self.parent[self.parent[k]]
            k = self.parent[k]
        return k

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


@dataclass
class NodalSystem:
    """Assembled sequence networks for one topology (optionally split at a fault point)."""

    net: NetworkModel
    nodes: list[str]
    index: dict[str, int]
    branches: list[Branch]
    shunt: np.ndarray  # (3, n) admittance to ground, pu
    injection: np.ndarray  # (n,) positive-sequence current injection, pu
    source_nodes: frozenset[int]
    fault_node: int | None = None
    fault_line: str | None = None
    fault_fraction: float | None = None

    @property
    def n(self) -> int:
        return len(self.nodes)

    def ybus(self, seq: int) -> np.ndarray:
        y = np.diag(self.shunt[seq].astype(complex))
        for br in self.branches:
            yb = admittance(br.z[seq])
            if yb == 0:
                continue
            y[br.i, br.i] += yb
            y[br.j, br.j] += yb
            y[br.i, br.j] -= yb
            y[br.j, br.i] -= yb
        return y

    def components(self, seq: int) -> list[int]:
        uf = _Components(self.n)
        for br in self.branches:
            if not is_open(br.z[seq]):
                uf.union(br.i, br.j)
        return [uf.find(k) for k in range(self.n)]

    def energized(self) -> np.ndarray:
        """Mask of nodes whose positive-sequence component holds a connected source."""
        comp = self.components(POS)
        live = {comp[k] for k in self.source_nodes}
        return np.array([c in live for c in comp], dtype=bool)

    def steady_state(self) -> np.ndarray:
        """Positive-sequence node voltages (pu) with no fault applied."""
        v = np.zeros(self.n, dtype=complex)
        mask = self.energized()
        if mask.any():
            y = self.ybus(POS)[np.ix_(mask, mask)]
            v[mask] = np.linalg.solve(y, self.injection[mask])
        return v

    def transfer_column(self, seq: int, node: int) -> np.ndarray | None:
        """Node voltages for a unit current injected at ``node`` (a Zbus column).

        Returns None when the node's component in this sequence has no path
        to ground (the driving-point impedance is infinite).
        """
        comp = self.components(seq)
        mask = np.array([c == comp[node] for c in comp], dtype=bool)
        if seq == POS:
            mask &= self.energized()
            if not mask[node]:
                return None
        if not np.any(self.shunt[seq][mask] != 0):
            return None
        y = self.ybus(seq)[np.ix_(mask, mask)]
        rhs = np.zeros(int(mask.sum()), dtype=complex)
        rhs[int(np.flatnonzero(mask).tolist().index(node))] = 1.0
        col = np.zeros(self.n, dtype=complex)
        col[mask] = np.linalg.solve(y, rhs)
        return col

    def branch_current(self, br: Branch, v: np.ndarray, seq: int) -> complex:
        """Current flowing i -> j through a branch for node voltages ``v``."""
        return (v[br.i] - v[br.j]) * admittance(br.z[seq])


def assemble(net: NetworkModel, line_id: str | None = None, fraction: float | None = None) -> NodalSystem:
    """Assemble the sequence networks, optionally splitting ``line_id`` at ``fraction``."""
    base = net.base
    nodes = [b.id for b in net.buses]
    index = {b: k for k, b in enumerate(nodes)}
    branches: list[Branch] = []
    fault_node = None

    for ln in net.lines:
        i, j = index[ln.from_bus], index[ln.to_bus]
        if ln.id != line_id:
            if ln.in_service:
                z = _pu(ln.per_km.scaled(ln.length), base.z_ohm)
                branches.append(Branch(i, j, z, ln.id))
            continue
        zd1, zd2 = (_pu(z, base.z_ohm) for z in split_line(ln, fraction))
        if fraction == 0.0 and ln.closed_from:
            fault_node = i
        elif fraction == 1.0 and ln.closed_to:
            fault_node = j
        else:
            nodes.append(FAULT_NODE)
            fault_node = index[FAULT_NODE] = len(nodes) - 1
        if ln.closed_from and fault_node != i:
            branches.append(Branch(i, fault_node, zd1, ln.id, 1))
        if ln.closed_to and fault_node != j:
            branches.append(Branch(fault_node, j, zd2, ln.id, 2))
    if line_id is not None and fault_node is None:
        raise KeyError(f"unknown line {line_id!r}")

    n = len(nodes)
    shunt = np.zeros((3, n), dtype=complex)
    injection = np.zeros(n, dtype=complex)
    source_nodes = set()
    for src in net.sources:
        if not src.connected:
            continue
        k = index[src.bus]
        z = _pu(src.internal, base.z_ohm)
        for seq in range(3):
            shunt[seq, k] += admittance(z[seq])
        injection[k] += (src.emf / base.v_phase) * admittance(z.zp)
        source_nodes.add(k)
    for ld in net.loads:
        if not ld.connected:
            continue
        k = index[ld.bus]
        z = _pu(ld.impedance, base.z_ohm)
        for seq in range(3):
            shunt[seq, k] += admittance(z[seq])
    for bus, amps in net.injections:
        injection[index[bus]] += amps / base.i_amp

    return NodalSystem(net, nodes, index, branches, shunt, injection, frozenset(source_nodes),
                       fault_node, line_id, fraction)


def flat_dispatch(net: NetworkModel) -> NetworkModel:
    """Fix bus current injections so the pre-fault profile is 1.0 pu, 0 deg everywhere.

    The injections stand in for local generation dispatch, which is otherwise
    unspecified.  They are held constant afterwards, so later load switching
    still moves the operating point.
    """
    sysm = assemble(replace(net, injections=()))
    mask = sysm.energized()
    v = mask.astype(complex)
    mismatch = sysm.ybus(POS) @ v - sysm.injection
    inj = tuple(
        (bus, complex(mismatch[k] * net.base.i_amp))
        for k, bus in enumerate(sysm.nodes)
        if mask[k] and abs(mismatch[k]) > 0
    )
    return replace(net, injections=inj)


@dataclass(frozen=True)
class TheveninPair:
    """Two-sided equivalent of the network seen from a point on one line.

    All values are per-unit.  ``z1``/``z2`` are the impedances behind the
    point on the sending/receiving side (line segment included); ``zd1``/
    ``zd2`` are the line segments alone.  Pre-fault quantities are positive
    sequence; currents flow from the bus into the line.
    """

    z1: SequenceImpedance
    z2: SequenceImpedance
    vfp_prefault: complex
    zd1: SequenceImpedance = SequenceImpedance(0j, 0j, 0j)
    zd2: SequenceImpedance = SequenceImpedance(0j, 0j, 0j)
    v1_prefault: complex | None = None
    v2_prefault: complex | None = None
    i1_prefault: complex = 0j
    i2_prefault: complex = 0j
    connected1: bool = True
    connected2: bool = True
    energized: bool = True

    @property
    def zs1(self) -> SequenceImpedance:
        return self.z1 - self.zd1

    @property
    def zs2(self) -> SequenceImpedance:
        return self.z2 - self.zd2

    def prefault_bus_voltage(self, side: int) -> complex:
        v = self.v1_prefault if side == 1 else self.v2_prefault
        return self.vfp_prefault if v is None else v


def reduce_to_thevenin(net: NetworkModel, line_id: str, fraction: float) -> TheveninPair:
    """Collapse each side of a point on ``line_id`` into one impedance per sequence.

    A unit current injected at the point is solved on the full nodal model.
    The driving-point impedance is Z_ff and the share k1 flowing into the
    sending side fixes z1 = Z_ff/k1, z2 = Z_ff/(1 - k1).  On a radial feed
    these are exactly the Kron-reduced side impedances; on a meshed network
    they still reproduce Z_ff and the true current split.
    """
    ln = net.line(line_id)
    if not (ln.closed_from or ln.closed_to):
        raise DeEnergized(f"line {line_id} is open at both ends")
    sysm = assemble(net, line_id, fraction)
    f = sysm.fault_node
    if not sysm.energized()[f]:
        raise DeEnergized(f"no connected source feeds line {line_id}")

    v_pre = sysm.steady_state()
    zd1, zd2 = (_pu(z, net.base.z_ohm) for z in split_line(ln, fraction))
    seg = {br.segment: br for br in sysm.branches if br.line_id == line_id}
    i_from = sysm.index[ln.from_bus]
    i_to = sysm.index[ln.to_bus]

    # pre-fault current from each bus into the line
    if 2 in seg:
        i2_pre = -sysm.branch_current(seg[2], v_pre, POS)
        i1_pre = -i2_pre if ln.closed_from else 0j
    elif 1 in seg:
        i1_pre = sysm.branch_current(seg[1], v_pre, POS)
        i2_pre = 0j
    else:
        i1_pre = i2_pre = 0j
    if not ln.closed_from:
        i1_pre = 0j

    z1, z2 = [], []
    for seq in range(3):
        col = sysm.transfer_column(seq, f)
        if col is None:
            z1.append(OPEN)
            z2.append(OPEN)
            continue
        zff = col[f]
        if 2 in seg:
            k2 = sysm.branch_current(seg[2], col, seq)  # from fault node towards bus 2
            k1 = 1.0 - k2 if ln.closed_from else 0j
        elif 1 in seg:
            k1 = -sysm.branch_current(seg[1], col, seq)
            k2 = 0j
        else:
            k1 = 1.0 if ln.closed_from else 0j
            k2 = 1.0 - k1
        if not ln.closed_to:
            k1, k2 = 1.0 + 0j, 0j
        z1.append(zff / k1 if abs(k1) > 1e-15 else OPEN)
        z2.append(zff / k2 if abs(k2) > 1e-15 else OPEN)

    return TheveninPair(
        SequenceImpedance(*z1),
        SequenceImpedance(*z2),
        complex(v_pre[f]),
        zd1,
        zd2,
        complex(v_pre[i_from]),
        complex(v_pre[i_to]),
        complex(i1_pre),
        complex(i2_pre),
        ln.closed_from,
        ln.closed_to,
    )
