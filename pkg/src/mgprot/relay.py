"""Sampled-data relay: waveform synthesis, phasor estimation, detection,
classification and the debounced trip state machine.

Each relay sees only its own bus voltage and line-end current.  The
phasor estimator is a least-squares fit of one 50 Hz cosine/sine pair over
a sliding window; for a whole number of cycles this is exactly the
single-bin Fourier correlation.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Iterator, Sequence

import numpy as np

from .network import NetworkModel, apply_switch_action
from .phasor import A_INV, ThreePhaseSet, SequenceSet

__all__ = [
    "BadSamplingRate",
    "ShortWindow",
    "Unclassifiable",
    "RelayConfig",
    "RelayState",
    "TripEvent",
    "MeasurementSample",
    "Waveform",
    "DetectResult",
    "synthesize_waveforms",
    "synthesize_segments",
    "estimate_phasors",
    "sliding_phasors",
    "detect",
    "classify",
    "relay_step",
    "scan_relay",
    "isolate",
]

log = logging.getLogger(__name__)

MONITORING, PICKED_UP, TRIPPED = "monitoring", "picked_up", "tripped"
_SQRT2 = math.sqrt(2.0)


class BadSamplingRate(ValueError):
    pass


class ShortWindow(ValueError):
    pass


class Unclassifiable(UserWarning):
    """Flag/sequence pattern that matches no fault code row."""


@dataclass(frozen=True)
class RelayConfig:
    v_rated: float = 415.0 / math.sqrt(3.0)  # V RMS per phase
    i_rated: float = 5.0  # A RMS
    v_threshold_pct: float = -10.0
    i_threshold_pct: float = 50.0
    presence_ratio: float = 0.1
    debounce_samples: int = 3
    window_cycles: float = 1.0
    f0: float = 50.0
    # relative fit-residual energy above which an estimate is held (None: off)
    transient_hold: float | None = None

    def __post_init__(self):
        problems = []
        if self.v_rated <= 0 or self.i_rated <= 0:
            problems.append("v_rated and i_rated must be positive")
        if not self.i_threshold_pct > 0:
            problems.append("i_threshold_pct must be > 0")
        if not self.v_threshold_pct < 0:
            problems.append("v_threshold_pct must be < 0")
        if int(self.debounce_samples) != self.debounce_samples or self.debounce_samples < 1:
            problems.append("debounce_samples must be an integer >= 1")
        if self.window_cycles <= 0:
            problems.append("window_cycles must be positive")
        if self.transient_hold is not None and self.transient_hold <= 0:
            problems.append("transient_hold must be positive when set")
        if self.presence_ratio < 0:
            problems.append("presence_ratio must be >= 0")
        if problems:
            raise ValueError("; ".join(problems))

    def window_samples(self, fs: float) -> int:
        """Samples per estimation window (at least 3, enough to fit a cosine pair)."""
        return max(3, int(round(self.window_cycles * fs / self.f0)))

    @property
    def i_pickup(self) -> float:
        """Phase current (A) at which the current condition starts to hold."""
        return self.i_rated * (1.0 + self.i_threshold_pct / 100.0)

    @property
    def v_pickup(self) -> float:
        """Phase voltage (V) below which the voltage condition holds."""
        return self.v_rated * (1.0 + self.v_threshold_pct / 100.0)


@dataclass(frozen=True)
class RelayState:
    relay_id: str
    status: str = MONITORING
    pickup_time: float | None = None
    trip_time: float | None = None
    fault_code: int | None = None
    count: int = 0
    pattern: tuple[bool, bool, bool] | None = None
    # last accepted estimates, used by the transient hold
    v_hold: tuple[complex, complex, complex] | None = None
    i_hold: tuple[complex, complex, complex] | None = None


@dataclass(frozen=True)
class TripEvent:
    relay_id: str
    t_trip: float
    fault_code: int
    response_time: float
    classified: bool = True


@dataclass(frozen=True)
class MeasurementSample:
    t: float
    va: float
    vb: float
    vc: float
    ia: float
    ib: float
    ic: float


@dataclass
class Waveform:
    """Sampled three-phase voltage and current at one measurement point."""

    t: np.ndarray  # (N,)
    v: np.ndarray  # (3, N) V instantaneous
    i: np.ndarray  # (3, N) A instantaneous

    def __len__(self) -> int:
        return len(self.t)

    def samples(self) -> Iterator[MeasurementSample]:
        for k in range(len(self.t)):
            yield MeasurementSample(float(self.t[k]), *map(float, self.v[:, k]), *map(float, self.i[:, k]))


# -- synthesis ----------------------------------------------------------------

def _check_fs(fs: float, f0: float) -> None:
    if fs < 20 * f0:
        raise BadSamplingRate(f"fs = {fs} Hz is below 20 x {f0} Hz")


def _instantaneous(phasors: np.ndarray, t: np.ndarray, f0: float) -> np.ndarray:
    """sqrt(2) |X| cos(w t + angle X) for a (3,) phasor array over times t."""
    rot = np.exp(1j * 2 * math.pi * f0 * t)
    return _SQRT2 * np.real(phasors[:, None] * rot[None, :])


def synthesize_segments(segments: Sequence[tuple[float, ThreePhaseSet, ThreePhaseSet]], fs: float,
                        duration: float, f0: float = 50.0, t0: float = 0.0) -> Waveform:
    """Piecewise steady-state waveform from ``(t_start, V, I)`` segments.

    Sample ``k`` sits at ``t0 + k/fs``; each sample uses the last segment whose
    start time is not after it.  Segment start times must be increasing.
    """
    _check_fs(fs, f0)
    n = int(round(duration * fs))
    t = t0 + np.arange(n) / fs
    v = np.zeros((3, n))
    i = np.zeros((3, n))
    starts = [s[0] for s in segments]
    if any(b < a for a, b in zip(starts, starts[1:])):
        raise ValueError("segment start times must be increasing")
    # small tolerance so an event at exactly k/fs lands on sample k
    idx = np.searchsorted(np.asarray(starts) - 1e-9 / fs, t, side="right") - 1
    for s, (_, vs, is_) in enumerate(segments):
        mask = idx == s
        if mask.any():
            v[:, mask] = _instantaneous(vs.as_array(), t[mask], f0)
            i[:, mask] = _instantaneous(is_.as_array(), t[mask], f0)
    if (idx < 0).any():
        first = segments[0]
        mask = idx < 0
        v[:, mask] = _instantaneous(first[1].as_array(), t[mask], f0)
        i[:, mask] = _instantaneous(first[2].as_array(), t[mask], f0)
    return Waveform(t, v, i)


def synthesize_waveforms(pre: tuple[ThreePhaseSet, ThreePhaseSet], post: tuple[ThreePhaseSet, ThreePhaseSet],
                         t_on: float, t_clear: float | None, fs: float, duration: float,
                         cleared: tuple[ThreePhaseSet, ThreePhaseSet] | None = None,
                         f0: float = 50.0) -> Waveform:
    """Pre-fault, fault and (optionally) post-clearing segments as samples.

    ``pre``/``post``/``cleared`` are ``(voltage, current)`` phasor pairs.  With
    ``t_clear`` set and ``cleared`` omitted, the signals return to ``pre``.
    """
    if duration <= t_on:
        raise ValueError("duration must exceed t_on")
    segs = [(0.0, *pre), (t_on, *post)]
    if t_clear is not None:
        if t_clear < t_on:
            raise ValueError("t_clear must not precede t_on")
        segs.append((t_clear, *(cleared if cleared is not None else pre)))
    return synthesize_segments(segs, fs, duration, f0)


# -- estimation ---------------------------------------------------------------

def _fit_matrix(n: int, fs: float, f0: float) -> tuple[np.ndarray, np.ndarray]:
    """Least-squares map (2, n) from a window to its local phasor, and the basis (n, 2).

    The window is indexed oldest first; the local phasor (re, im) is referred
    to the newest sample, so the map is the same for every window position.
    """
    w = 2 * math.pi * f0
    d = (n - 1 - np.arange(n)) / fs  # age of each sample
    # x_m = sqrt2 * (re*cos(w d) + im*sin(w d))
    basis = _SQRT2 * np.stack([np.cos(w * d), np.sin(w * d)], axis=1)
    return np.linalg.pinv(basis), basis


def _fit(win: np.ndarray, p: np.ndarray, basis: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Local phasors and relative residual energy for windows stacked on the last axis."""
    ri = win @ p.T
    res = win - ri @ basis.T
    energy = np.einsum("...n,...n->...", win, win)
    rel = np.einsum("...n,...n->...", res, res) / np.where(energy > 0, energy, 1.0)
    return ri[..., 0] + 1j * ri[..., 1], rel


def estimate_phasors(t: np.ndarray, x: np.ndarray, f0: float = 50.0, n_window: int | None = None,
                     unit: str = "", with_residual: bool = False):
    """RMS phasors of the last ``n_window`` samples of a (3, M) record.

    The phasors are referred to absolute time (angle of ``cos(2 pi f0 t)``).
    With ``with_residual`` the relative residual energy of the fit per
    phase is returned as well; it is zero for a steady sinusoid.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    t = np.asarray(t, dtype=float)
    m = x.shape[1]
    n = m if n_window is None else int(n_window)
    if n < 3 or m < n:
        raise ShortWindow(f"need {max(n, 3)} samples, have {m}")
    fs = (n - 1) / (t[m - 1] - t[m - n])
    local, rel = _fit(x[:, m - n:], *_fit_matrix(n, fs, f0))
    ph = ThreePhaseSet.from_array(local * np.exp(-1j * 2 * math.pi * f0 * t[m - 1]), unit)
    return (ph, rel) if with_residual else ph


def _forward_fill(est: np.ndarray, valid: np.ndarray, last: np.ndarray | None) -> np.ndarray:
    """Replace invalid estimates by the most recent valid one (per phase)."""
    n = est.shape[1]
    idx = np.where(valid, np.arange(n)[None, :], -1)
    idx = np.maximum.accumulate(idx, axis=1)
    out = np.take_along_axis(est, np.maximum(idx, 0), axis=1)
    before = idx < 0
    if before.any():
        fill = est if last is None else np.broadcast_to(np.asarray(last)[:, None], est.shape)
        out = np.where(before, fill, out)
    return out


def sliding_phasors(t: np.ndarray, x: np.ndarray, n_window: int, fs: float, f0: float = 50.0,
                    history: np.ndarray | None = None, hold_tol: float | None = None,
                    last: np.ndarray | None = None) -> np.ndarray:
    """Phasor estimate at every sample of a (3, N) record, one window each.

    ``history`` supplies at least ``n_window - 1`` earlier samples (3, H) so
    the first estimates use a full window.  Without it, the first
    ``n_window - 1`` estimates are zero.

    With ``hold_tol`` set, a window whose fit leaves a relative residual
    energy above ``hold_tol`` is taken to straddle a discontinuity, and the
    previous valid estimate (or ``last``, carried over from an earlier
    record) is held instead.
    """
    x = np.asarray(x, dtype=float)
    n = int(n_window)
    if n < 3:
        raise ShortWindow("window needs at least 3 samples")
    pad = n - 1
    if history is not None and history.shape[1] >= pad:
        full = np.concatenate([history[:, history.shape[1] - pad:], x], axis=1) if pad else x
        offset = 0
    else:
        full = x
        offset = pad
    p, basis = _fit_matrix(n, fs, f0)
    local = np.zeros(x.shape, dtype=complex)
    rel = np.zeros(x.shape)
    if full.shape[1] >= n:
        win = np.lib.stride_tricks.sliding_window_view(full, n, axis=1)  # (3, K, n)
        loc, r = _fit(win, p, basis)
        k = loc.shape[1]
        local[:, offset:offset + k] = loc[:, : x.shape[1] - offset]
        rel[:, offset:offset + k] = r[:, : x.shape[1] - offset]
    est = local * np.exp(-1j * 2 * math.pi * f0 * np.asarray(t))[None, :]
    if hold_tol is None:
        return est
    return _forward_fill(est, rel <= hold_tol, last)


# -- detection and classification ---------------------------------------------

@dataclass(frozen=True)
class DetectResult:
    """Per-phase detection outcome.

    ``flags`` holds the undervoltage-and-overcurrent conjunction per phase;
    ``overcurrent`` the current condition alone.  Once any phase is flagged,
    the overcurrent phases are the ones counted for classification: on a
    resistive line-to-line fault one of the two faulted phase voltages
    hardly moves, so the conjunction alone would undercount.
    """

    flags: tuple[bool, bool, bool]
    overcurrent: tuple[bool, bool, bool]
    v_er_pct: np.ndarray
    i_er_pct: np.ndarray

    @property
    def any(self) -> bool:
        return any(self.flags)

    @property
    def phases(self) -> tuple[bool, bool, bool]:
        """Phases counted by the classifier (all False when not detected)."""
        return self.overcurrent if self.any else (False, False, False)

    @property
    def n(self) -> int:
        return sum(self.phases)


def error_pct(vmag, imag, cfg: RelayConfig) -> tuple[np.ndarray, np.ndarray]:
    """Signed voltage and current mismatch in percent of rated."""
    v_er = 100.0 * (np.asarray(vmag) - cfg.v_rated) / cfg.v_rated
    i_er = 100.0 * (np.asarray(imag) - cfg.i_rated) / cfg.i_rated
    return v_er, i_er


def detect(v_est: ThreePhaseSet, i_est: ThreePhaseSet, cfg: RelayConfig) -> DetectResult:
    """Per-phase conjunction of undervoltage and overcurrent mismatch."""
    v_er, i_er = error_pct(v_est.magnitudes(), i_est.magnitudes(), cfg)
    over = i_er >= cfg.i_threshold_pct
    flags = (v_er <= cfg.v_threshold_pct) & over
    return DetectResult(tuple(bool(f) for f in flags), tuple(bool(f) for f in over), v_er, i_er)


def classify(i_seq: SequenceSet, phase_flags, cfg: RelayConfig) -> tuple[int, bool]:
    """Fault code 1-4 from flagged-phase count and sequence presence.

    Returns ``(code, matched)``.  A pattern outside the table still yields
    the nearest code by phase count, with ``matched`` False and a warning
    logged.
    """
    n = int(sum(bool(f) for f in phase_flags))
    level = cfg.presence_ratio * cfg.i_rated
    zero = abs(i_seq.zero) >= level
    neg = abs(i_seq.neg) >= level
    if n == 3:
        return 4, True
    if n == 1 and zero:
        return 1, True
    if n == 2 and zero:
        return 3, True
    if n == 2 and neg:
        return 2, True
    if n == 0:
        raise ValueError("classify needs at least one flagged phase")
    code = 1 if n == 1 else 2
    log.warning("unclassifiable pattern n=%d |I0|=%.3g |I-|=%.3g; recorded as code %d",
                n, abs(i_seq.zero), abs(i_seq.neg), code)
    return code, False


# -- state machine --------------------------------------------------------------

def _advance(state: RelayState, t: float, flags: tuple[bool, bool, bool], i_seq: SequenceSet,
             cfg: RelayConfig, t_fault: float | None) -> tuple[RelayState, TripEvent | None]:
    if state.status == TRIPPED:
        return state, None
    if not any(flags):
        if state.status == PICKED_UP:
            return replace(state, status=MONITORING, pickup_time=None, count=0, pattern=None), None
        return state, None
    # the same phase pattern has to persist for the whole debounce run
    if state.status == PICKED_UP and flags == state.pattern:
        count = state.count + 1
        pickup = state.pickup_time
    else:
        count, pickup = 1, t
    if count < cfg.debounce_samples:
        return replace(state, status=PICKED_UP, pickup_time=pickup, count=count, pattern=flags), None
    code, matched = classify(i_seq, flags, cfg)
    ref = pickup if t_fault is None or t_fault > t else t_fault
    event = TripEvent(state.relay_id, t, code, max(0.0, t - ref), matched)
    return replace(state, status=TRIPPED, pickup_time=pickup, trip_time=t, fault_code=code,
                   count=count, pattern=flags), event


def relay_step(state: RelayState, t: np.ndarray, v: np.ndarray, i: np.ndarray, cfg: RelayConfig,
               t_fault: float | None = None) -> tuple[RelayState, TripEvent | None]:
    """Advance one relay by one sample.

    ``t`` (M,), ``v`` and ``i`` (3, M) hold the relay's own most recent
    samples, newest last; the last ``cfg.window_samples(fs)`` are used.
    ``t_fault`` is the reference instant for the reported response time.
    """
    t = np.asarray(t, dtype=float)
    if len(t) < 3:
        raise ShortWindow("need at least 3 samples")
    fs = (len(t) - 1) / (t[-1] - t[0])
    n = cfg.window_samples(fs)
    v_est, v_rel = estimate_phasors(t, v, cfg.f0, n, "V", with_residual=True)
    i_est, i_rel = estimate_phasors(t, i, cfg.f0, n, "A", with_residual=True)
    if cfg.transient_hold is not None:
        v_arr = _hold_one(v_est.as_array(), v_rel, state.v_hold, cfg.transient_hold)
        i_arr = _hold_one(i_est.as_array(), i_rel, state.i_hold, cfg.transient_hold)
        v_est = ThreePhaseSet.from_array(v_arr, "V")
        i_est = ThreePhaseSet.from_array(i_arr, "A")
        state = replace(state, v_hold=tuple(complex(z) for z in v_arr), i_hold=tuple(complex(z) for z in i_arr))
    det = detect(v_est, i_est, cfg)
    i_seq = SequenceSet.from_array(A_INV @ i_est.as_array())
    return _advance(state, float(t[-1]), det.phases, i_seq, cfg, t_fault)


def _hold_one(est: np.ndarray, rel: np.ndarray, held, tol: float) -> np.ndarray:
    if held is None:
        return est
    return np.where(rel <= tol, est, np.asarray(held, dtype=complex))


@dataclass
class ScanResult:
    state: RelayState
    event: TripEvent | None
    stop: int | None  # index of the tripping sample
    v_est: np.ndarray
    i_est: np.ndarray


def scan_relay(state: RelayState, t: np.ndarray, v_est: np.ndarray, i_est: np.ndarray, cfg: RelayConfig,
               t_fault: float | None = None, enabled: bool = True) -> ScanResult:
    """Run the state machine over precomputed sliding estimates.

    Equivalent to calling :func:`relay_step` once per sample.  Stops at the
    first trip.  With ``enabled`` False the relay only observes.
    """
    v_er, i_er = error_pct(np.abs(v_est), np.abs(i_est), cfg)
    over = i_er >= cfg.i_threshold_pct
    flags = over & ((v_er <= cfg.v_threshold_pct) & over).any(axis=0)[None, :]
    if not enabled or state.status == TRIPPED:
        return ScanResult(state, None, None, v_est, i_est)
    hot = np.flatnonzero(flags.any(axis=0))
    k_prev = -2
    for k in hot:
        if k != k_prev + 1 and state.status == PICKED_UP:
            # samples in between had no flag: dropout
            state = replace(state, status=MONITORING, pickup_time=None, count=0, pattern=None)
        k_prev = k
        f = tuple(bool(x) for x in flags[:, k])
        i_seq = SequenceSet.from_array(A_INV @ i_est[:, k])
        state, event = _advance(state, float(t[k]), f, i_seq, cfg, t_fault)
        if event is not None:
            return ScanResult(state, event, int(k), v_est, i_est)
    if len(t) and state.status == PICKED_UP and (not len(hot) or hot[-1] != len(t) - 1):
        state = replace(state, status=MONITORING, pickup_time=None, count=0, pattern=None)
    return ScanResult(state, None, None, v_est, i_est)


def isolate(net: NetworkModel, event: TripEvent) -> NetworkModel:
    """Open the tripping relay's own static switch."""
    return apply_switch_action(net, event.relay_id, "open")
