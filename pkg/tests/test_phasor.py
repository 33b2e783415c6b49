from __future__ import annotations

import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mgprot.phasor import (
    ALPHA,
    A_INV,
    A_MATRIX,
    Phasor,
    SequenceSet,
    ThreePhaseSet,
    fortescue_compose,
    fortescue_decompose,
    polar,
)

finite = st.floats(-1e4, 1e4, allow_nan=False, allow_infinity=False)
cplx = st.builds(complex, finite, finite)
triples = st.tuples(cplx, cplx, cplx)


def test_alpha_identities():
    assert abs(ALPHA**3 - 1) < 1e-12
    assert abs(1 + ALPHA + ALPHA**2) < 1e-12
    assert abs(cmath.phase(ALPHA) - 2 * math.pi / 3) < 1e-15


def test_matrices_are_inverse():
    assert np.allclose(A_MATRIX @ A_INV, np.eye(3), atol=1e-15)


def test_balanced_set_is_pure_positive():
    s = fortescue_decompose(ThreePhaseSet.polar([1, 1, 1], [0, -120, 120]))
    assert abs(s.pos - 1) < 1e-12
    assert abs(s.neg) < 1e-12 and abs(s.zero) < 1e-12


def test_cophasal_set_is_pure_zero():
    s = fortescue_decompose(ThreePhaseSet(1, 1, 1))
    assert abs(s.pos) < 1e-12 and abs(s.neg) < 1e-12
    assert abs(s.zero - 1) < 1e-12


def test_single_phase_splits_in_thirds():
    s = fortescue_decompose(ThreePhaseSet(1, 0, 0))
    assert np.allclose(s.as_array(), [1 / 3] * 3, atol=1e-15)


def test_compose_examples():
    abc = fortescue_compose(SequenceSet(1, 0, 0))
    assert np.allclose(abc.as_array(), [polar(1, 0), polar(1, -120), polar(1, 120)], atol=1e-12)
    assert np.all(fortescue_compose(SequenceSet()).as_array() == 0)


def test_compose_matches_direct_formula():
    rng = np.random.default_rng(7)
    for _ in range(50):
        p, n, z = rng.normal(size=3) + 1j * rng.normal(size=3)
        abc = fortescue_compose(SequenceSet(p, n, z)).as_array()
        want = [p + n + z, ALPHA**2 * p + ALPHA * n + z, ALPHA * p + ALPHA**2 * n + z]
        assert np.allclose(abc, want, atol=1e-12)


@settings(max_examples=300, deadline=None)
@given(triples)
def test_round_trip(x):
    arr = np.array(x, dtype=complex)
    scale = max(np.max(np.abs(arr)), 1e-300)
    back = fortescue_compose(fortescue_decompose(arr)).as_array()
    assert np.max(np.abs(back - arr)) <= 1e-9 * scale
    seq = fortescue_decompose(fortescue_compose(arr)).as_array()
    assert np.max(np.abs(seq - arr)) <= 1e-9 * scale


@settings(max_examples=200, deadline=None)
@given(triples, triples)
def test_linearity(x, y):
    sx = fortescue_decompose(np.array(x)).as_array()
    sy = fortescue_decompose(np.array(y)).as_array()
    sxy = fortescue_decompose(np.array(x) + np.array(y)).as_array()
    scale = max(1.0, np.max(np.abs(sx)), np.max(np.abs(sy)))
    assert np.max(np.abs(sxy - sx - sy)) <= 1e-12 * scale


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 1e4), st.floats(-360, 360))
def test_balanced_any_magnitude_angle(mag, ang):
    s = fortescue_decompose(ThreePhaseSet.balanced(polar(mag, ang)))
    assert abs(s.neg) < 1e-12 * max(1.0, mag)
    assert abs(s.zero) < 1e-12 * max(1.0, mag)


def test_phasor_polar_and_angle_range():
    p = Phasor.polar(2.0, 270.0)
    assert math.isclose(p.magnitude, 2.0)
    assert math.isclose(p.angle_deg, -90.0, abs_tol=1e-9)
    assert Phasor.polar(1.0, -180.0).angle == pytest.approx(math.pi)
    with pytest.raises(ValueError):
        Phasor.polar(-1.0)


def test_unit_mixing_rejected():
    v = ThreePhaseSet(1, 1, 1, "V")
    i = ThreePhaseSet(1, 1, 1, "A")
    with pytest.raises(ValueError):
        v + i
    assert (v + v).unit == "V"
