"""Minimum-cost control of SU(2) and SU(1,1) systems as geodesics on the control manifold."""

from .errors import (
    ConsistencyError,
    DomainError,
    QcGeoError,
    SingularityError,
    SolverError,
    SpecError,
    UnsupportedError,
)
from .field_synth import FieldTrajectory, fields_along, fields_at, hamiltonian_from_fields, project_fields
from .geodesic import BvpConfig, SweepResult, integrate_ivp, path_oracle, reduced_geodesic, solve_bvp, sweep_fiber
from .lie_rep import GroupParams, GroupTag, evolution_operator, generator, state_from_params
from .metric import christoffel_analytic, christoffel_numeric, cost_rate, metric_at, trajectory_length
from .phase_opt import (
    PrescribedPath,
    SubmanifoldMetric,
    induced_metric,
    optimal_phase,
    perturbation_scan,
    submanifold_geodesic,
    sweep_submanifold,
)
from .propagate import PropagationReport, evolve, fidelity, verify_trajectory
from .trajectory import Trajectory

__version__ = "0.1.0"
