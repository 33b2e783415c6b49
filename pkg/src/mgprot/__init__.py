"""Phasor-domain microgrid simulator with a local-measurement protection relay."""

from .faults import FaultSolution, FaultSpec, solve_external_fault, solve_internal_fault, solve_network
from .network import NetworkModel, SequenceImpedance, apply_switch_action, build_testbed, line_total_impedance
from .nodal import DeEnergized, TheveninPair, reduce_to_thevenin
from .phasor import ALPHA, Phasor, SequenceSet, ThreePhaseSet, fortescue_compose, fortescue_decompose
from .relay import RelayConfig, RelayState, TripEvent, classify, detect, estimate_phasors, synthesize_waveforms
from .scenario import calibrate_thresholds, emit_outputs, load_scenario, run_scenario

__version__ = "0.1.0"

__all__ = [
    "ALPHA", "Phasor", "SequenceSet", "ThreePhaseSet", "fortescue_compose", "fortescue_decompose",
    "NetworkModel", "SequenceImpedance", "apply_switch_action", "build_testbed", "line_total_impedance",
    "DeEnergized", "TheveninPair", "reduce_to_thevenin",
    "FaultSolution", "FaultSpec", "solve_external_fault", "solve_internal_fault", "solve_network",
    "RelayConfig", "RelayState", "TripEvent", "classify", "detect", "estimate_phasors", "synthesize_waveforms",
    "calibrate_thresholds", "emit_outputs", "load_scenario", "run_scenario",
]
