"""Walk one fault from the sequence networks down to the relay decision.

Run with ``python demos/fault_walkthrough.py [KIND] [LINE] [RF_OHM]``.
"""

from __future__ import annotations

import sys

import numpy as np

from mgprot import FaultSpec, build_testbed, reduce_to_thevenin, solve_network
from mgprot.faults import two_sided
from mgprot.phasor import A_MATRIX
from mgprot.scenario import default_testbed, parse_scenario, run_scenario


def main(kind: str = "LG", line: str = "DL-2", rf: float = 5.0) -> None:
    cfg = default_testbed()
    net = build_testbed(cfg, "islanded")
    spec = FaultSpec(kind, line, 0.5, rf)

    th = reduce_to_thevenin(net, line, 0.5)
    print(f"{kind} fault through {rf:g} ohm at the middle of {line}, islanded")
    print("Thevenin impedances behind the fault point (pu):")
    for name, z in (("side 1", th.z1), ("side 2", th.z2)):
        print(f"  {name}: pos {z.zp:.4f}  neg {z.zn:.4f}  zero {z.z0:.4f}")

    sol = two_sided(net, spec)
    i_base = net.base.i_amp
    print("fault-point sequence currents (A):",
          "  ".join(f"{abs(x) * i_base:.2f}" for x in sol.i_fault.as_array()))

    st = solve_network(net, spec)
    ln = net.line(line)
    for end, relay in (("from", ln.relay_from), ("to", ln.relay_to)):
        i = np.abs(A_MATRIX @ st.line_end_current(line, end)) * i_base
        print(f"  {relay} phase currents (A): {np.round(i, 2)}")

    doc = {"name": "walkthrough", "testbed": "testbed.json", "mode": "islanded", "duration": 0.06,
           "fs": 10000.0, "events": [{"t": 0.02, "action": "fault",
                                      "fault": {"kind": kind, "line": line, "fraction": 0.5, "rf_ohm": rf}}]}
    rep = run_scenario(parse_scenario(doc))
    print("relay decisions:")
    for ev in rep.trips:
        print(f"  {ev.relay_id} trips at {ev.t_trip:.4f} s with code {ev.fault_code} "
              f"({ev.response_time * 1e3:.1f} ms after inception)")
    if not rep.trips:
        print("  none")


if __name__ == "__main__":
    args = sys.argv[1:]
    main(*(args[:2]), *(float(x) for x in args[2:3]))
