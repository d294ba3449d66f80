"""Simulator for a Fredkin (controlled-SWAP) gate on three atoms trapped in a
coupled three-cavity array.

The package covers the full pipeline: composite Hilbert-space construction
with excitation-sector truncation (:mod:`cavityfredkin.hilbert`), interaction
Hamiltonians and their analytic block structure (:mod:`cavityfredkin.model`),
drive schedules (:mod:`cavityfredkin.pulses`), Schroedinger and Lindblad
propagation (:mod:`cavityfredkin.propagate`), quantum-channel reconstruction
and average gate fidelity (:mod:`cavityfredkin.channel`), and an experiment
runner CLI (:mod:`cavityfredkin.cli`).

All rates are expressed in units of the atom-cavity coupling g, and times in
units of 1/g.
"""

from cavityfredkin.hilbert import (
    HilbertSpace,
    SparseOperator,
    build_space,
    cavity_lowering,
    atom_transition,
    excitation_counter,
    qubit_embedding,
    qubit_extraction,
)
from cavityfredkin.model import PhysParams, full_hamiltonian
from cavityfredkin.pulses import DriveSchedule, resonant_gate_time, dispersive_gate_time
from cavityfredkin.propagate import DecayParams, Trajectory, evolve_state, evolve_density
from cavityfredkin.channel import (
    QuantumChannel,
    fredkin_ideal,
    reconstruct_channel,
    average_gate_fidelity,
)

__all__ = [
    "HilbertSpace",
    "SparseOperator",
    "build_space",
    "cavity_lowering",
    "atom_transition",
    "excitation_counter",
    "qubit_embedding",
    "qubit_extraction",
    "PhysParams",
    "full_hamiltonian",
    "DriveSchedule",
    "resonant_gate_time",
    "dispersive_gate_time",
    "DecayParams",
    "Trajectory",
    "evolve_state",
    "evolve_density",
    "QuantumChannel",
    "fredkin_ideal",
    "reconstruct_channel",
    "average_gate_fidelity",
]

__version__ = "0.1.0"
