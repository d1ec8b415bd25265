"""Relativistic Enskog collision operator and Picard construction of mild solutions."""

from .errors import (
    DegenerateCollisionError,
    DomainError,
    EnskogError,
    InputError,
    IssueCollector,
    IssueType,
    NoConvergence,
    SmallnessViolated,
)
from .hypotheses import (
    GaleanoParams,
    HypothesisReport,
    estimate_K,
    estimate_lipschitz,
    galeano_admissible_radii,
    galeano_bound,
    galeano_infimum,
    k_growth,
    sigma_tilde_ratio_sup,
)
from .kernel import KernelSpec, SigmaTildeKind, YFactorSpec, YKind, Y_factor, cross_section, kernel_B, weight_m
from .kinematics import (
    CollisionGeometry,
    Momentum3,
    collision_invariants,
    energy,
    in_S_plus,
    kinematics_selftest,
    omega_flux,
    post_collision,
    scattering_angle,
)
from .lattice import (
    FieldLattice,
    GridSpec,
    Trajectory,
    interpolate,
    lattice_mass,
    load_lattice,
    load_trajectory,
    momentum_rule,
    save_lattice,
    save_trajectory,
    sphere_rule,
    truncation_loss,
    weight_lattice,
    weighted_norm,
)
from .operator import (
    OperatorConfig,
    OperatorMode,
    F_minus,
    F_plus,
    collision_sharp,
    collision_sweep,
    density,
    gain_sharp,
    loss_sharp,
    monte_carlo_sharp,
)
from .solver import (
    SolverDiagnostics,
    SolverParams,
    apply_J,
    boltzmann_limit_sweep,
    contraction_estimate,
    picard_solve,
    positivity_check,
    smallness_threshold,
)

__all__ = [
    "CollisionGeometry",
    "DegenerateCollisionError",
    "DomainError",
    "EnskogError",
    "F_minus",
    "F_plus",
    "FieldLattice",
    "GaleanoParams",
    "GridSpec",
    "HypothesisReport",
    "InputError",
    "IssueCollector",
    "IssueType",
    "KernelSpec",
    "Momentum3",
    "NoConvergence",
    "OperatorConfig",
    "OperatorMode",
    "SigmaTildeKind",
    "SmallnessViolated",
    "SolverDiagnostics",
    "SolverParams",
    "Trajectory",
    "YFactorSpec",
    "YKind",
    "Y_factor",
    "apply_J",
    "boltzmann_limit_sweep",
    "collision_invariants",
    "collision_sharp",
    "collision_sweep",
    "contraction_estimate",
    "cross_section",
    "density",
    "energy",
    "estimate_K",
    "estimate_lipschitz",
    "galeano_admissible_radii",
    "galeano_bound",
    "galeano_infimum",
    "gain_sharp",
    "in_S_plus",
    "interpolate",
    "k_growth",
    "kernel_B",
    "kinematics_selftest",
    "lattice_mass",
    "load_lattice",
    "load_trajectory",
    "loss_sharp",
    "momentum_rule",
    "monte_carlo_sharp",
    "omega_flux",
    "picard_solve",
    "positivity_check",
    "post_collision",
    "save_lattice",
    "save_trajectory",
    "scattering_angle",
    "sigma_tilde_ratio_sup",
    "smallness_threshold",
    "sphere_rule",
    "truncation_loss",
    "weight_lattice",
    "weight_m",
    "weighted_norm",
]
