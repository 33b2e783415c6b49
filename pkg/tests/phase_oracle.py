"""Phase-domain reference solver used only by the tests.

Builds the full three-phase complex nodal system (modified nodal analysis for
zero-impedance fault links) directly from the network elements, with the
fault written as explicit phase branches.  It shares no solving code with the
sequence-domain engine.
"""

from __future__ import annotations

import cmath
import math

import numpy as np

a = cmath.exp(2j * math.pi / 3)
A = np.array([[1, 1, 1], [a * a, a, 1], [a, a * a, 1]], dtype=complex)
A_inv = np.linalg.inv(A)


def _y_abc(zseq, z_base):
    ys = []
    for z in zseq:
        ys.append(0j if cmath.isinf(z) else z_base / z)
    return A @ np.diag(ys) @ A_inv


class PhaseNetwork:
    def __init__(self):
        self.names: list = []
        self.idx: dict = {}
        self.stamps: list = []  # (nodes_i, nodes_j or None, Y3x3)
        self.scalar: list = []  # (ni, nj or None, y)
        self.shorts: list = []  # (ni, nj or None)
        self.inj: dict = {}

    def node(self, name):
        if name not in self.idx:
            self.idx[name] = len(self.names)
            self.names.append(name)
        return self.idx[name]

    def bus(self, name):
        return [self.node((name, p)) for p in "abc"]


def phase_solve(net, fault=None):
    """Return (bus_voltages, line_end_currents) in pu phase quantities.

    ``bus_voltages[bus]`` is a length-3 array; ``line_end_currents[(line, end)]``
    is the current flowing from that end's bus into the line.
    """
    zb = net.base.z_ohm
    pn = PhaseNetwork()
    for b in net.buses:
        pn.bus(b.id)

    series = []  # (line_id, end_tag, nodes_i, nodes_j, Y) for current readback
    for ln in net.lines:
        bi, bj = pn.bus(ln.from_bus), pn.bus(ln.to_bus)
        if fault is None or fault.line_id != ln.id:
            if ln.closed_from and ln.closed_to:
                Y = _y_abc([z * ln.length for z in ln.per_km], zb)
                pn.stamps.append((bi, bj, Y))
                series.append((ln.id, "from", bi, bj, Y))
                series.append((ln.id, "to", bj, bi, Y))
            continue
        f = pn.bus("__F__")
        total = [z * ln.length for z in ln.per_km]
        for end, bnodes, frac, closed in (
            ("from", bi, fault.fraction, ln.closed_from),
            ("to", bj, 1.0 - fault.fraction, ln.closed_to),
        ):
            if not closed:
                continue
            if frac == 0.0:
                # zero-length segment: bolted link, current read from MNA later
                start = len(pn.shorts)
                for p in range(3):
                    pn.shorts.append((bnodes[p], f[p]))
                series.append((ln.id, end, bnodes, f, ("short", start)))
            else:
                Y = _y_abc([z * frac for z in total], zb)
                pn.stamps.append((bnodes, f, Y))
                series.append((ln.id, end, bnodes, f, Y))

    for src in net.sources:
        if not src.connected:
            continue
        nodes = pn.bus(src.bus)
        Y = _y_abc(src.internal, zb)
        pn.stamps.append((nodes, None, Y))
        e = src.emf / net.base.v_phase
        e_abc = np.array([e, e * a * a, e * a])
        i_abc = Y @ e_abc
        for p in range(3):
            pn.inj[nodes[p]] = pn.inj.get(nodes[p], 0) + i_abc[p]
    for ld in net.loads:
        if ld.connected:
            pn.stamps.append((pn.bus(ld.bus), None, _y_abc(ld.impedance, zb)))
    for bus, amps in net.injections:
        j = amps / net.base.i_amp
        nodes = pn.bus(bus)
        for p, val in enumerate((j, j * a * a, j * a)):
            pn.inj[nodes[p]] = pn.inj.get(nodes[p], 0) + val

    if fault is not None:
        f = pn.bus("__F__")
        ph = ["abc".index(p) for p in fault.faulted_phases]
        rf = fault.rf / zb

        def link(ni, nj):
            if rf == 0:
                pn.shorts.append((ni, nj))
            else:
                pn.scalar.append((ni, nj, 1.0 / rf))

        if fault.kind == "LG":
            link(f[ph[0]], None)
        elif fault.kind == "LL":
            link(f[ph[0]], f[ph[1]])
        elif fault.kind == "LLG":
            g = pn.node("__G__")
            pn.shorts.append((f[ph[0]], g))
            pn.shorts.append((f[ph[1]], g))
            link(g, None)
        elif fault.kind == "LLLG":
            for p in range(3):
                link(f[p], None)

    # Solve including MNA branch currents so shorted segments can be read back.
    n = len(pn.names)
    m = len(pn.shorts)
    x_full = _solve_full(pn)
    v = x_full[:n]
    shorts_i = x_full[n:n + m]

    bus_v = {b.id: v[pn.bus(b.id)] for b in net.buses}
    currents = {}
    for line_id, end, ni, nj, Y in series:
        if isinstance(Y, tuple):
            start = Y[1]
            currents[(line_id, end)] = shorts_i[start:start + 3].copy()
        else:
            currents[(line_id, end)] = Y @ (v[ni] - v[nj])
    return bus_v, currents


def _solve_full(pn: PhaseNetwork):
    n = len(pn.names)
    m = len(pn.shorts)
    M = np.zeros((n + m, n + m), dtype=complex)
    rhs = np.zeros(n + m, dtype=complex)
    for ni, nj, Y in pn.stamps:
        ii = np.array(ni)
        M[np.ix_(ii, ii)] += Y
        if nj is not None:
            jj = np.array(nj)
            M[np.ix_(jj, jj)] += Y
            M[np.ix_(ii, jj)] -= Y
            M[np.ix_(jj, ii)] -= Y
    for ni, nj, y in pn.scalar:
        M[ni, ni] += y
        if nj is not None:
            M[nj, nj] += y
            M[ni, nj] -= y
            M[nj, ni] -= y
    for k, (ni, nj) in enumerate(pn.shorts):
        row = n + k
        # branch current flows ni -> nj
        M[ni, row] += 1
        M[row, ni] += 1
        if nj is not None:
            M[nj, row] -= 1
            M[row, nj] -= 1
    for k, val in pn.inj.items():
        rhs[k] += val
    return np.linalg.solve(M, rhs)
