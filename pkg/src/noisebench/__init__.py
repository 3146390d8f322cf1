"""noisebench: closed-loop characterization and benchmarking of noisy quantum circuits."""

from .circuits import (
    Circuit,
    Cycle,
    Gate,
    Topology,
    build_bell,
    build_bv,
    build_ghz,
    default_ghz_mapping,
    parse,
    serialize,
    toronto_topology,
)
from .paulis import (
    PTM,
    DepolarizingParams,
    FidelityVector,
    PauliChannel,
    PauliString,
    ReadoutError,
    channel_to_fidelities,
    commutes,
    depolarizing_to_pauli,
    fidelities_to_channel,
    pauli_mul,
    ptm_of_pauli_channel,
)
from .qpu import DeviceProfile, VirtualQPU, load_profile
from .sim import Counts, Distribution, NoiseModel, apply_readout, run_exact, run_shots

__all__ = [
    "PTM",
    "Circuit",
    "Counts",
    "Cycle",
    "DepolarizingParams",
    "DeviceProfile",
    "Distribution",
    "FidelityVector",
    "Gate",
    "NoiseModel",
    "PauliChannel",
    "PauliString",
    "ReadoutError",
    "Topology",
    "VirtualQPU",
    "apply_readout",
    "build_bell",
    "build_bv",
    "build_ghz",
    "channel_to_fidelities",
    "commutes",
    "default_ghz_mapping",
    "depolarizing_to_pauli",
    "fidelities_to_channel",
    "load_profile",
    "parse",
    "pauli_mul",
    "ptm_of_pauli_channel",
    "run_exact",
    "run_shots",
    "serialize",
    "toronto_topology",
]
