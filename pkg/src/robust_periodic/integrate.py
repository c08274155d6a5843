"""Explicit Euler integration of mode patterns with sub-sampling, plus an RK4 reference."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from ._kernels_py import euler_rollout_fn, rk4_rollout_fn
from .core import Pattern, TimingConfig, Trace, as_state
from .errors import LeftEnclosure, NonFiniteField
from .systems import SystemSpec


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float
    method: str = "euler"  # or "rk4"
    rk4_refinement: int = 10

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.method not in ("euler", "rk4"):
            raise ValueError(f"unknown method {self.method!r}")
        if int(self.rk4_refinement) < 1:
            raise ValueError("rk4_refinement must be >= 1")


def euler_step(system: SystemSpec, mode: int, y, h: float, w=None) -> np.ndarray:
    """One explicit Euler step y + h f_u(y, w)."""
    if not h > 0:
        raise ValueError("step must be positive")
    y = as_state(y, system.n)
    f = system.f(y, mode, None if w is None else np.asarray(w, dtype=float))
    if not np.all(np.isfinite(f)):
        raise NonFiniteField(f"vector field is not finite at {y.tolist()}")
    return y + h * f


def rollout(system: SystemSpec, u_steps: np.ndarray, y0s: np.ndarray, dt: float,
            method: str = "euler", refinement: int = 10, w: Optional[np.ndarray] = None) -> np.ndarray:
    """Batch integration: ``y0s`` (B, n), per-step mode values ``u_steps`` (N, m),
    disturbances ``w`` (B, N, n) or None.  Returns (B, N+1, n)."""
    y0s = np.atleast_2d(np.asarray(y0s, dtype=float))
    u_steps = np.asarray(u_steps, dtype=float)
    if system.native is not None:
        code, params = system.native
        if method == "euler":
            out = kernels.euler_rollout(code, params, y0s, u_steps, dt, w)
        else:
            out = kernels.rk4_rollout(code, params, y0s, u_steps, dt, refinement, w)
    elif method == "euler":
        out = euler_rollout_fn(system.field, y0s, u_steps, dt, w)
    else:
        out = rk4_rollout_fn(system.field, y0s, u_steps, dt, refinement, w)
    if not np.all(np.isfinite(out)):
        raise NonFiniteField("integration produced non-finite states")
    return out


def _disturbance(perturbation, n_steps: int, d: int) -> Optional[np.ndarray]:
    if perturbation is None:
        return None
    if hasattr(perturbation, "sequence"):
        w = perturbation.sequence(n_steps, d)
        return None if w is None else w
    w = np.asarray(perturbation, dtype=float)
    if w.shape != (n_steps, d):
        raise ValueError(f"perturbation must have shape {(n_steps, d)}, got {w.shape}")
    return w


def _integrate(system, pattern, y0, timing, n_periods, perturbation, method, refinement,
               check_enclosure):
    if n_periods < 1:
        raise ValueError("n_periods must be >= 1")
    if pattern.k != timing.k:
        raise ValueError("pattern length does not match timing.k")
    y0 = as_state(y0, system.n)
    if check_enclosure and not system.enclosure.contains(y0):
        raise LeftEnclosure("initial state outside the enclosure region", step=0)
    n_steps = n_periods * timing.K
    ids = pattern.step_modes(timing.substeps, n_steps)
    w = _disturbance(perturbation, n_steps, system.d)
    states = rollout(system, system.modes[ids], y0[None, :], timing.dt, method, refinement,
                     None if w is None else w[None])[0]
    # integer step counts, no accumulated time
    times = np.arange(n_steps + 1) * timing.dt
    trace = Trace(times, states, ids, np.zeros((0, system.d)) if w is None else w)
    if check_enclosure:
        inside = np.all((states >= system.enclosure.lower) & (states <= system.enclosure.upper), axis=1)
        if not inside.all():
            j = int(np.argmin(inside))
            raise LeftEnclosure(f"trajectory left the enclosure at t={times[j]}", step=j, partial=trace)
    return trace


def integrate_pattern(system: SystemSpec, pattern: Pattern, y0, timing: TimingConfig,
                      n_periods: int = 1, perturbation=None, check_enclosure: bool = True) -> Trace:
    """Euler trace sampled every dt over n_periods * T, pattern modes switching every tau."""
    return _integrate(system, pattern, y0, timing, n_periods, perturbation, "euler", 1,
                      check_enclosure)


def reference_solution(system: SystemSpec, pattern: Pattern, y0, timing: TimingConfig,
                       n_periods: int = 1, perturbation=None, refinement: int = 10,
                       check_enclosure: bool = True) -> Trace:
    """Fixed-step RK4 with step dt/refinement, sampled on the same dt lattice."""
    return _integrate(system, pattern, y0, timing, n_periods, perturbation, "rk4", refinement,
                      check_enclosure)
