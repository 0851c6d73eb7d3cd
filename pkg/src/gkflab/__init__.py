"""Expected curvatures of Gaussian excursion sets and the Monte Carlo lab
that validates them: closed-form predictions, field simulation, excursion
topology, experiment harness, and a command-line front end."""

from .geomcore import (
    LkVector,
    SpaceDescriptor,
    SpaceKind,
    flag_coeff,
    from_kappa,
    hermite,
    lk_model_space,
    sphere_surface,
    to_kappa,
    tube_volume_euclid,
    unit_ball_volume,
)
from .gmf import (
    DomainDescriptor,
    DomainKind,
    GmfNumericSettings,
    GmfVector,
    gauss_tube_measure,
    gmf_ball_complement,
    gmf_halfline,
    gmf_interval,
    gmf_numeric,
)
from .gkf import (
    CanonicalSphereCovariance,
    CompositeKind,
    ExponentialCovariance,
    GaussianCovariance,
    GkfPrediction,
    ec_heuristic_tail,
    expected_ec_curve,
    expected_lk,
    expected_lk_composite,
    induced_metric_scale,
    threshold_for_ec_tail,
)
from .fieldsim import (
    FieldSample,
    GridSpec,
    SphereMesh,
    canonical_sphere_process,
    icosphere,
    poincare_process,
    sample_uniform_rotation,
    simulate_field,
)
from .excursion import (
    ExcursionMask,
    boundary_estimate,
    euler_char_grid,
    euler_char_mesh,
    threshold_excursion,
    volume_estimate,
)
from .mcharness import (
    ExperimentConfig,
    ExperimentReport,
    run_ec_experiment,
    run_experiment,
    run_kff_sphere_experiment,
    run_poincare_experiment,
    run_sup_experiment,
    run_tube_experiment,
    run_volume_experiment,
)

__version__ = "0.1.0"
