"""kpidyn: deterministic KPI-trajectory toolkit.

Treats a business' controllable KPIs as coordinates of a mechanical
system: the profit integral of gains minus change costs selects an
optimal path between today's KPIs and a target, conserved quantities
monitor how close live dynamics stay to that optimum, and a resonance
lab probes how modulating the natural business cycles grows (or drains)
the accumulated power.
"""

__version__ = "0.1.0"

from .errors import (Degenerate, DegenerateInterval, DimensionMismatch,
                     FitFailed, InvalidFormat, InvalidStep, KpidynError,
                     NoConvergence, NotPositiveDefinite, NotSymmetric,
                     OutOfDomain, ZeroFrequency)
from .model import (BoundaryConditions, ConstantGain, GainModel, GridTabulated,
                    LossModel, QuadraticWell, Trajectory, as_kpi_vector,
                    evaluate_gain, evaluate_loss, gain_gradient,
                    loss_velocity_gradient)
from .transforms import (EigenDecomposition, ModalBasis, eigenlosses,
                         from_modal, modal_basis, symmetric_eigen, to_modal)
from .variational import (HarmonicSolution, SolverSettings,
                          analytic_harmonic_solve, compute_profit, el_residual,
                          integrate_ivp, solve_bvp_direct, solve_bvp_shooting)
from .invariants import (Alarm, InvariantReport, ModalInvariantSeries,
                         build_report, drift_alarm, harmonic_invariants,
                         power_series)
from .planner import PlanState, next_kpi, phase_advance, plan_horizon
from .oscillators import (GrowthEstimate, Perturbation, PerturbedRun,
                          ResponseCurve, Sinusoid, classify_force, escape_time,
                          forcing_peak, parametric_growth_rate, resonance_scan,
                          simulate_perturbed)
from .io import (ModelSpec, load_model, load_perturbation,
                 read_trajectory_csv, save_model, save_perturbation,
                 write_trajectory_csv)
