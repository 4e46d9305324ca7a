"""Control-pulse synthesis and verification for non-Hermitian bosonic mode pairs.

The package builds time-dependent ancillary mode frames over a truncated
Fock space, synthesizes the coupling and detuning pulses that make the
frame-rotated coefficient matrix upper triangular, integrates the
resulting non-Hermitian dynamics without renormalization, and verifies
transfer fidelities, norm restoration, spectral-degeneracy independence
and one-way absorption against bundled numeric checkpoints.
"""

from .fock_space import (
    FockSpace,
    ModeOperator,
    QuantumState,
    TruncationError,
    binomial_code_state,
    build_hamiltonian,
    cat_state,
    coherent_state,
    fidelity,
    fock_state,
    make_space,
    mode_operator,
    state_fidelity,
    thermal_state,
    total_number_operator,
)
from .ancillary_frames import (
    FrameMatrix,
    FrameParams,
    GaugePotential,
    Schedule,
    TriangularCheck,
    bright_vector,
    check_upper_triangular,
    frame_matrix,
    frame_unitary,
    gauge_potential,
    rotated_coefficients,
)
from .pulse_synthesis import (
    ControlSchedule,
    GammaSign,
    PhaseRecord,
    PulseSample,
    SingularDetuning,
    SingularPulse,
    check_norm_restoration,
    global_phase,
    linear_transfer_schedule,
    rates_from_lambda,
    synthesize_pulses,
    theta_linear,
)
from .evolution import (
    IntegratorConfig,
    LindbladParams,
    PassageCheck,
    Trajectory,
    evolve_density,
    evolve_dual,
    evolve_ket,
    evolve_lindblad,
    first_moment_check,
    passage_check,
    passage_state,
)
from .spectrum_scattering import (
    PTClassification,
    ScatteringSample,
    SpectrumPoint,
    detect_eps,
    eigenvalues,
    nonreciprocity,
    pt_classify,
    scattering_matrix,
    spectrum_series,
)

__version__ = "0.1.0"
