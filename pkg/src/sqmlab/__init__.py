"""Simulation and analysis of a qubit under simultaneous weak measurement
of two non-commuting equatorial observables."""

from .analysis import (
    DisturbanceField,
    TomoComparison,
    commutator_bound,
    disturbance_at,
    disturbance_map,
    estimate_eta,
    estimate_gamma_ramsey,
    tomo_validate,
)
from .cavity import (
    CavityParams,
    ConditionedJointRun,
    FilterCrosscheck,
    RingupResult,
    filter_crosscheck,
    lo_leakage_effect,
    oracle_report,
    params_for_rate,
    ringup_check,
    simulate_conditioned,
    simulate_effective_hamiltonian,
)
from .distributions import (
    AngularVarianceSeries,
    BlochDistribution,
    WrappedNormalFit,
    angular_diffusion_rate,
    angular_variance_series,
    fit_wrapped_normal,
    propagate_mc,
    total_variation,
)
from .engine import (
    EnsembleResult,
    ImperfectionParams,
    MeasurementRecord,
    Trajectory,
    filter_record,
    filter_records_batch,
    generate_step,
    kraus_step,
    simulate_ensemble,
    simulate_trajectory,
)
from .fokker_planck import (
    FokkerPlanckSolver,
    propagate_pde,
    stationary_peak_radius,
    stationary_radial_density,
)
from .io_utils import (
    channel_config,
    channel_from_config,
    read_distribution,
    read_record,
    read_trajectory,
    read_transfer_maps,
    record_sidecar_path,
    write_disturbance_field,
    write_distribution,
    write_json,
    write_record,
    write_tomo_comparison,
    write_trajectory,
    write_transfer_maps,
    write_variance_series,
)
from .retrodiction import (
    CONFIDENCE_DELTA_95,
    LikelihoodResult,
    TransferMap,
    composite_map,
    composite_maps_batch,
    log_likelihood,
    mle_initial_state,
    step_map,
)
from .states import (
    PAULIS,
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    MeasChannel,
    Observable,
    QubitState,
    axis_vector,
    expectation,
    from_bloch,
    purity_radius,
    sigma_delta,
    trace_distance,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "PAULIS",
    "SIGMA_X",
    "SIGMA_Y",
    "SIGMA_Z",
    "MeasChannel",
    "Observable",
    "QubitState",
    "axis_vector",
    "expectation",
    "from_bloch",
    "purity_radius",
    "sigma_delta",
    "trace_distance",
    "EnsembleResult",
    "ImperfectionParams",
    "MeasurementRecord",
    "Trajectory",
    "filter_record",
    "filter_records_batch",
    "generate_step",
    "kraus_step",
    "simulate_ensemble",
    "simulate_trajectory",
    "CONFIDENCE_DELTA_95",
    "LikelihoodResult",
    "TransferMap",
    "composite_map",
    "composite_maps_batch",
    "log_likelihood",
    "mle_initial_state",
    "step_map",
    "DisturbanceField",
    "TomoComparison",
    "commutator_bound",
    "disturbance_at",
    "disturbance_map",
    "estimate_eta",
    "estimate_gamma_ramsey",
    "tomo_validate",
    "AngularVarianceSeries",
    "BlochDistribution",
    "WrappedNormalFit",
    "angular_diffusion_rate",
    "angular_variance_series",
    "fit_wrapped_normal",
    "propagate_mc",
    "total_variation",
    "FokkerPlanckSolver",
    "propagate_pde",
    "stationary_peak_radius",
    "stationary_radial_density",
    "channel_config",
    "channel_from_config",
    "read_distribution",
    "read_record",
    "read_trajectory",
    "read_transfer_maps",
    "record_sidecar_path",
    "write_disturbance_field",
    "write_distribution",
    "write_json",
    "write_record",
    "write_tomo_comparison",
    "write_trajectory",
    "write_transfer_maps",
    "write_variance_series",
    "CavityParams",
    "ConditionedJointRun",
    "FilterCrosscheck",
    "RingupResult",
    "filter_crosscheck",
    "lo_leakage_effect",
    "oracle_report",
    "params_for_rate",
    "ringup_check",
    "simulate_conditioned",
    "simulate_effective_hamiltonian",
]
