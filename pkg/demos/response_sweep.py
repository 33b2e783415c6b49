"""Re-run every shipped response-time scenario and sweep the fault resistance.

Run with ``python demos/response_sweep.py``.  The first block runs the
fourteen shipped cases as written; the second sweeps 1-20 ohm on two of them
to show where detection stops.
"""

from __future__ import annotations

from mgprot import load_scenario, run_scenario
from mgprot.scenario import sweep


def first_trip_on_line(rep, line):
    hits = [ev for ev in rep.trips if rep.traces[ev.relay_id].line_id == line]
    return hits[0] if hits else None


def main() -> None:
    print(f"{'case':<18} {'fault':<16} {'first trip':<22} expectations")
    for mode in ("grid", "island"):
        for k in range(1, 8):
            s = load_scenario(f"response_{mode}_{k}.json")
            f = s.events[0].fault
            rep = run_scenario(s)
            ev = first_trip_on_line(rep, f.line_id)
            trip = f"{ev.relay_id} code {ev.fault_code} {ev.response_time * 1e3:.1f} ms" if ev else "-"
            print(f"{mode + ' ' + str(k):<18} {f.kind + ' ' + f.line_id + ' ' + format(f.rf, 'g'):<16} "
                  f"{trip:<22} {'met' if rep.passed else 'NOT met'}")

    for name in ("response_grid_1.json", "response_island_1.json"):
        s = load_scenario(name)
        line = s.events[0].fault.line_id
        print(f"\nsweep of {name}:")
        for rf, rep in sweep(s, [1.0, 2.0, 5.0, 10.0, 15.0, 20.0]):
            ev = first_trip_on_line(rep, line)
            print(f"  {rf:5.1f} ohm  " + (f"{ev.relay_id} code {ev.fault_code}" if ev else "no trip"))


if __name__ == "__main__":
    main()
