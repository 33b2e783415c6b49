from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from mgprot.faults import (
    KINDS,
    FaultSpec,
    ZeroLineImpedance,
    phase_quantities,
    solve_external_fault,
    solve_internal_fault,
    solve_network,
    two_sided,
)
from mgprot.network import OPEN, SequenceImpedance
from mgprot.nodal import TheveninPair
from mgprot.phasor import A_MATRIX, SequenceSet
from netgen import rel_err, two_bus
from phase_oracle import phase_solve

Z = 0.05 + 0.15j
SYM = SequenceImpedance(Z, Z, 3 * Z)


def _random_pair(rng, one_sided=False):
    def z():
        return complex(rng.uniform(0.01, 1), rng.uniform(0.01, 2))

    z1 = SequenceImpedance(z(), z(), z())
    z2 = SequenceImpedance(OPEN, OPEN, OPEN) if one_sided else SequenceImpedance(z(), z(), z())
    return TheveninPair(z1, z2, complex(rng.uniform(0.9, 1.1), rng.uniform(-0.1, 0.1)))


def test_bolted_lllg_symmetric_example():
    th = TheveninPair(SYM, SYM, 1.0)
    sol = solve_internal_fault(th, FaultSpec("LLLG"))
    want = -1 / (Z / 2)
    assert abs(sol.i_fault.pos - want) < 1e-12
    assert abs(sol.i_side1.pos - want / 2) < 1e-12
    assert abs(sol.i_side2.pos - want / 2) < 1e-12
    assert sol.i_fault.neg == 0 and sol.i_fault.zero == 0


def test_bolted_lllg_example_against_phase_oracle():
    # the same symmetric case built as a network: two identical sources
    # behind a line whose halves make up the side impedances
    from mgprot.network import Bus, DistributionLine, NetworkModel, Source

    zb = 0.415**2
    seg = SequenceImpedance(*(z * zb / 2 for z in SYM))
    src_z = SequenceImpedance(*(z * zb / 2 for z in SYM))
    line = DistributionLine("L", "B1", "B2", 1.0, SequenceImpedance(*(2 * z for z in seg)), "R1", "R2")
    e = 415 / np.sqrt(3)
    net = NetworkModel((Bus("B1", 415), Bus("B2", 415)), (line,),
                       (Source("S1", "B1", e, src_z), Source("S2", "B2", e, src_z)))
    f = FaultSpec("LLLG", "L", 0.5, 0.0)
    sol = two_sided(net, f)
    assert abs(sol.i_fault.pos - (-1 / (Z / 2))) < 1e-9
    bv, cur = phase_solve(net, f)
    for side, end in ((1, "from"), (2, "to")):
        _, i = phase_quantities(sol, side)
        assert rel_err(i.as_array(), cur[("L", end)]) < 1e-6


def test_open_fault_draws_nothing():
    th = TheveninPair(SYM, SYM, 1.0)
    for kind in ("LG", "LL", "LLLG"):
        sol = solve_internal_fault(th, FaultSpec(kind, rf=1e9))
        assert np.max(np.abs(sol.i_fault.as_array())) < 1e-6
    # the resistance sits in the ground path only, so an L-L-G fault tends to
    # a bolted L-L fault: the zero-sequence part vanishes, the rest does not
    llg = solve_internal_fault(th, FaultSpec("LLG", rf=1e9)).i_fault.as_array()
    ll = solve_internal_fault(th, FaultSpec("LL", rf=0.0)).i_fault.as_array()
    assert abs(llg[2]) < 1e-6
    assert np.allclose(llg, ll, atol=1e-6)


def test_single_side_feed():
    rng = np.random.default_rng(0)
    th = _random_pair(rng, one_sided=True)
    for kind in KINDS:
        sol = solve_internal_fault(th, FaultSpec(kind, rf=0.1))
        assert np.all(sol.i_side2.as_array() == 0)
        assert np.allclose(sol.i_side1.as_array(), sol.i_fault.as_array(), atol=1e-15)


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(KINDS), st.floats(0, 5), st.sampled_from("abc"))
def test_signatures_and_conservation(seed, kind, rf, ph):
    rng = np.random.default_rng(seed)
    th = _random_pair(rng)
    phases = {"LG": ph, "LL": "abc".replace(ph, ""), "LLG": "abc".replace(ph, ""), "LLLG": "abc"}[kind]
    sol = solve_internal_fault(th, FaultSpec(kind, rf=rf, faulted_phases=phases))
    f = sol.i_fault.as_array()
    s = np.abs(f).max()
    tol = 1e-9 * max(s, 1.0)
    assert np.max(np.abs(sol.i_side1.as_array() + sol.i_side2.as_array() - f)) <= tol
    # signatures hold for the symmetric phase, so rotate it to position a
    k = "abc".index(sol_ref(kind, phases))
    fa = A_MATRIX @ f
    rot = np.roll(fa, -k)
    pr, nr, zr = np.linalg.solve(A_MATRIX, rot)
    if kind == "LG":
        assert abs(pr - nr) <= tol and abs(pr - zr) <= tol
    elif kind == "LL":
        assert abs(zr) <= tol and abs(pr + nr) <= tol
    elif kind == "LLG":
        assert abs(nr + zr + pr) <= tol
    else:
        assert abs(nr) <= tol and abs(zr) <= tol


def sol_ref(kind, phases):
    return FaultSpec(kind, faulted_phases=phases).reference_phase


def test_phase_quantities_fault_point_shapes():
    rng = np.random.default_rng(5)
    th = _random_pair(rng)
    sol = solve_internal_fault(th, FaultSpec("LLLG"))
    ia = A_MATRIX @ sol.i_fault.as_array()
    assert np.allclose(np.abs(ia), np.abs(ia[0]), rtol=1e-12)
    sol = solve_internal_fault(th, FaultSpec("LG"))
    ia = A_MATRIX @ sol.i_fault.as_array()
    assert np.max(np.abs(ia[1:])) < 1e-12 * abs(ia[0])
    sol = solve_internal_fault(th, FaultSpec("LL"))
    ia = A_MATRIX @ sol.i_fault.as_array()
    assert abs(ia[1] + ia[2]) < 1e-12 * abs(ia[1])
    assert abs(ia[0]) < 1e-12 * abs(ia[1])


@pytest.mark.parametrize("kind", KINDS)
def test_two_bus_matches_phase_oracle(kind):
    rng = np.random.default_rng(11 + KINDS.index(kind))
    for _ in range(25):
        net = two_bus(rng)
        f = FaultSpec(kind, "L", float(rng.uniform(0.05, 0.95)), float(rng.choice([0, 1, 5, 10, 20])))
        bv, cur = phase_solve(net, f)
        st_ = solve_network(net, f)
        vv = np.concatenate([A_MATRIX @ st_.bus_voltage(b) for b in ("B1", "B2")])
        ii = np.concatenate([A_MATRIX @ st_.line_end_current("L", e) for e in ("from", "to")])
        assert rel_err(vv, np.concatenate([bv["B1"], bv["B2"]])) < 1e-6
        assert rel_err(ii, np.concatenate([cur[("L", "from")], cur[("L", "to")]])) < 1e-6


@pytest.mark.parametrize("kind", KINDS)
@pytest.mark.parametrize("mode", ["grid", "island"])
def test_testbed_matches_phase_oracle(kind, mode, grid_net, island_net):
    net = grid_net if mode == "grid" else island_net
    for line in ("DL-1", "DL-2", "DL-3", "DL-4"):
        f = FaultSpec(kind, line, 0.5, 3.0)
        bv, cur = phase_solve(net, f)
        st_ = solve_network(net, f)
        buses = [b.id for b in net.buses]
        vv = np.concatenate([A_MATRIX @ st_.bus_voltage(b) for b in buses])
        assert rel_err(vv, np.concatenate([bv[b] for b in buses])) < 1e-6
        keys = sorted(k for k in cur)
        ii = np.concatenate([A_MATRIX @ st_.line_end_current(*k) for k in keys])
        assert rel_err(ii, np.concatenate([cur[k] for k in keys])) < 1e-6


# Bolted L-G at the middle of DL-1, grid connected: fault-point sequence
# currents (pu), frozen from the phase-domain solve (I0 = I_a/3 at the fault,
# injection sign)
LG_DL1_GRID = -0.08023424 + 0.25104049j


def test_testbed_lg_dl1_sequence_currents(grid_net):
    f = FaultSpec("LG", "DL-1", 0.5, 0.0)
    st_ = solve_network(grid_net, f)
    assert np.allclose(st_.i_fault, st_.i_fault[0], rtol=1e-12)
    assert abs(st_.i_fault[0] - LG_DL1_GRID) < 1e-6
    assert np.all(np.abs(st_.i_fault) > 0.1)


@pytest.mark.parametrize("kind", KINDS)
def test_fault_current_monotone_in_rf(kind, grid_net, island_net):
    for net in (grid_net, island_net):
        mags = [np.linalg.norm(solve_network(net, FaultSpec(kind, "DL-2", 0.5, rf)).i_fault)
                for rf in np.linspace(0, 20, 41)]
        assert all(b <= a * (1 + 1e-12) for a, b in zip(mags, mags[1:]))


def test_llg_phase_current_can_rise_with_rf(grid_net):
    # the faulted-phase current of an L-L-G fault is not monotone in the
    # ground resistance: it rises over the first fraction of an ohm before
    # falling; only the sequence-set magnitude is monotone
    mags = [np.abs(A_MATRIX @ solve_network(grid_net, FaultSpec("LLG", "DL-2", 0.5, rf)).i_fault).max()
            for rf in (0.0, 0.5)]
    assert mags[1] > mags[0]


def test_external_fault_examples():
    dz = SequenceImpedance(Z / 2, Z / 2, Z / 2)
    th = TheveninPair(dz, dz, 1.0, zd1=dz, zd2=dz)
    i = solve_external_fault(None, th, SequenceSet(1.1, 0, 0), SequenceSet(1.0, 0, 0))
    assert abs(i.pos - 0.1 / Z) < 1e-12
    assert solve_external_fault(None, th, SequenceSet(1, 2, 3), SequenceSet(1, 2, 3)).as_array().tolist() == [0, 0, 0]
    zero = SequenceImpedance(0j, 0j, 0j)
    with pytest.raises(ZeroLineImpedance):
        solve_external_fault(None, TheveninPair(dz, dz, 1.0, zd1=zero, zd2=zero), SequenceSet(), SequenceSet())


def test_balanced_external_fault_has_no_unbalance(grid_net):
    st_ = solve_network(grid_net, FaultSpec("LLLG", "DL-3", 0.5, 0.0))
    i = st_.line_end_current("DL-1", "from")
    assert abs(i[1]) < 1e-12 and abs(i[2]) < 1e-12 and abs(i[0]) > 0.01


@settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(st.integers(0, 2**32 - 1))
def test_random_two_bus_oracle(seed):
    rng = np.random.default_rng(seed)
    net = two_bus(rng)
    for kind in KINDS:
        f = FaultSpec(kind, "L", float(rng.uniform(0, 1)), float(rng.uniform(0, 20)))
        sol = two_sided(net, f)
        bv, cur = phase_solve(net, f)
        v = np.concatenate([phase_quantities(sol, s)[0].as_array() for s in (1, 2)])
        i = np.concatenate([phase_quantities(sol, s)[1].as_array() for s in (1, 2)])
        assert rel_err(v, np.concatenate([bv["B1"], bv["B2"]])) < 1e-6
        assert rel_err(i, np.concatenate([cur[("L", "from")], cur[("L", "to")]])) < 1e-6
