"""Petz-type recovery maps, pinching, and entropic inequalities at desk scale."""

from .channels import (
    Channel,
    choi_matrix,
    dephasing_channel,
    depolarizing_channel,
    identity_channel,
    make_rng,
    partial_trace,
    partial_trace_channel,
    random_channel,
    random_density,
    random_unitary,
    tensor,
    tensor_power,
    unitary_channel,
)
from .entropies import (
    MeasuredRelEntResult,
    cmi,
    fidelity,
    max_relative_entropy,
    measured_rel_ent_bruteforce,
    measured_relative_entropy,
    relative_entropy,
    von_neumann_entropy,
)
from .linalg import SpectralDecomposition, is_psd, matrix_function, spectral_decompose, support_contained
from .pinching import PinchingContext, check_pinching_inequality, enumerate_types
from .recovery import RecoveryMap, phase_unitary, quadrature_average

__version__ = "0.1.0"

__all__ = [
    "Channel",
    "MeasuredRelEntResult",
    "PinchingContext",
    "RecoveryMap",
    "SpectralDecomposition",
    "check_pinching_inequality",
    "choi_matrix",
    "cmi",
    "dephasing_channel",
    "depolarizing_channel",
    "enumerate_types",
    "fidelity",
    "identity_channel",
    "is_psd",
    "make_rng",
    "matrix_function",
    "max_relative_entropy",
    "measured_rel_ent_bruteforce",
    "measured_relative_entropy",
    "partial_trace",
    "partial_trace_channel",
    "phase_unitary",
    "quadrature_average",
    "random_channel",
    "random_density",
    "random_unitary",
    "relative_entropy",
    "spectral_decompose",
    "support_contained",
    "tensor",
    "tensor_power",
    "unitary_channel",
    "von_neumann_entropy",
]
