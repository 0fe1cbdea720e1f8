"""Simulation of a reconfigurable two-qubit gate on a six-waveguide photonic chip."""

__version__ = "0.1.0"

from .chip import (
    ChipReflectivities, CircuitSpec, CouplerElement, PhaseCalibration, PhaseElement,
    compose, coupler_unitary, embed, fit_calibration, phase_from_voltage, standard_chip,
)
from .fock import (
    FockState, enumerate_fock_states, output_distribution, permanent, transition_amplitude,
)
from .gate import (
    GateMatrix, LogicalEncoding, ProbTable, entanglement_of_output, equal_up_to_global_phase,
    extract_logical_gate, ideal_gate, prob_table, similarity, success_probability,
)
from .hom import WavepacketModel, coincidence_probability, dip_curve, fit_dip, overlap, visibility
from .experiment import (
    SourceModel, TimeTagStream, count_coincidences, estimate_rates, generate_stream,
    run_phase_sweep_experiment,
)

__all__ = [
    "ChipReflectivities", "CircuitSpec", "CouplerElement", "PhaseCalibration", "PhaseElement",
    "compose", "coupler_unitary", "embed", "fit_calibration", "phase_from_voltage", "standard_chip",
    "FockState", "enumerate_fock_states", "output_distribution", "permanent", "transition_amplitude",
    "GateMatrix", "LogicalEncoding", "ProbTable", "entanglement_of_output", "equal_up_to_global_phase",
    "extract_logical_gate", "ideal_gate", "prob_table", "similarity", "success_probability",
    "WavepacketModel", "coincidence_probability", "dip_curve", "fit_dip", "overlap", "visibility",
    "SourceModel", "TimeTagStream", "count_coincidences", "estimate_rates", "generate_stream",
    "run_phase_sweep_experiment",
]
