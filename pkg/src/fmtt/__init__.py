"""Reward-tilted sampling and search for flow-based transports.

The package evolves particles under stochastic-interpolant dynamics between
Gaussian mixtures, tilts them toward a terminal reward through look-ahead
reward fields and importance log-weights, and drives the whole loop with a
sequential Monte Carlo engine plus discrepancy-based schedule diagnostics.
Everything is verifiable against closed-form oracles.
"""

from .config import ExperimentConfig
from .diagnostics import (BarrierProfile, DiscrepancyTrace, RefinedSchedule,
                          incremental_discrepancy,
                          incremental_discrepancy_log, quality_ratio,
                          refine_schedule, thermodynamic_length,
                          total_discrepancy, trace_from_run, trace_from_runs,
                          var_model)
from .errors import (ConfigError, DegenerateEnsembleError,
                     DiagnosticsUndefinedError, FmttError, ScheduleDomainError,
                     SchemeCompatibilityError, ToleranceError)
from .flowmap import (FlowMapEvaluator, JacobianResult, MemoizedFlowMap,
                      gaussian_pair_closed_form)
from .mixtures import DynamicsAt, GaussianMixture, MixturePath, standard_normal
from .oracles import (GaussianTilt, SnisEstimate, finite_diff_grad,
                      gaussian_tilt_closed_form, snis_tilted_expectation)
from .rewards import (CustomReward, LinearReward, LogResponsibilityReward,
                      QuadraticReward, Reward, TimeDependentReward, ZeroReward,
                      hutchinson_laplacian)
from .schedule import InterpolantSchedule, ScheduleValues
from .smc import (ParticleEnsemble, RunConfig, RunResult, ess, resample, run,
                  top_n_select, weighted_expectation, z_smc)
from .tilt import (DriftMultiplier, StepInput, position_step,
                   weight_step_expectation, weight_step_ito,
                   weight_step_laplacian, weight_step_simplified)

__version__ = "0.1.0"
