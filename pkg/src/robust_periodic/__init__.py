"""Periodic switching-pattern synthesis for sampled switched systems, with
Euler-based guaranteed tubes and limit-cycle certificates."""
from .core import Ball, Box, Certificate, Grid, Pattern, TimingConfig, Trace, Tube, ball_contains
from .bounds import BoundConstants, delta_perturbed, delta_unperturbed, estimate_constants
from .certify import certificate_report, certify_limit_cycle
from .integrate import integrate_pattern, reference_solution
from .kernels import BACKEND
from .sim import PerturbationPlan, check_containment, period_gap, run_ensemble
from .synth import CostSpec, PolicyTable, dp_synthesize, evaluate_pattern
from .systems import SystemSpec, get_system
from .tube import ZonePolicy, propagate_tube

__version__ = "0.1.0"
