"""Monte Carlo runs of the perturbed system and tube-containment checks."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .bounds import ball_samples
from .core import Pattern, TimingConfig, Trace, Tube, as_state
from .errors import LatticeMismatch, LeftEnclosure, TooShort
from .integrate import integrate_pattern, rollout
from .systems import SystemSpec


def default_workers() -> int:
    return max(1, int(os.environ.get("ROBUST_PERIODIC_WORKERS", "1")))


@dataclass(frozen=True)
class PerturbationPlan:
    """Disturbance realisations with ||w|| <= omega.

    kind "none": w = 0.  "random": uniform on the omega-ball, redrawn every
    ``hold`` sub-steps.  "radial": w = omega (y - c) / ||y - c||, pushing away
    from the nominal Euler path c.
    """

    kind: str = "none"
    omega: float = 0.0
    seed: int = 0
    hold: int = 1

    def __post_init__(self):
        if self.kind not in ("none", "random", "radial"):
            raise ValueError(f"unknown perturbation kind {self.kind!r}")
        if self.omega < 0:
            raise ValueError("omega must be >= 0")
        if int(self.hold) < 1:
            raise ValueError("hold must be >= 1 sub-step")

    def sequence(self, n_steps: int, d: int, rng: Optional[np.random.Generator] = None):
        """Per-sub-step disturbances (n_steps, d), or None when w is identically zero."""
        if self.kind == "none":
            return None
        if self.kind == "radial":
            raise ValueError("radial disturbances depend on the state; use run_ensemble")
        rng = rng if rng is not None else np.random.default_rng(self.seed)
        n_draws = -(-n_steps // self.hold)
        w = ball_samples(rng, n_draws, d, self.omega)
        return np.repeat(w, self.hold, axis=0)[:n_steps]


def _trace_rngs(seed: int, n: int):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def run_ensemble(system: SystemSpec, pattern: Pattern, z0, mu0: float, plan: PerturbationPlan,
                 n_traces: int, n_periods: int, timing: TimingConfig, refinement: int = 10,
                 starts: Optional[np.ndarray] = None, workers: Optional[int] = None,
                 check_enclosure: bool = True) -> list:
    """RK4 traces of the perturbed system under the repeated pattern.

    Start points are uniform in B(z0, mu0) unless ``starts`` is given.  Every
    trace draws its start and its disturbances from its own child of the
    master seed ``plan.seed``, so results do not depend on ``workers``.
    """
    if n_traces < 1:
        raise ValueError("n_traces must be >= 1")
    z0 = as_state(z0, system.n)
    rngs = _trace_rngs(plan.seed, n_traces)
    if starts is None:
        starts = np.array([z0 + ball_samples(r, 1, system.n, mu0)[0] for r in rngs])
    else:
        starts = np.atleast_2d(np.asarray(starts, dtype=float))
        if starts.shape != (n_traces, system.n):
            raise ValueError("starts must have shape (n_traces, n)")
    N = n_periods * timing.K
    ids = pattern.step_modes(timing.substeps, N)
    u_steps = system.modes[ids]
    dt = timing.dt

    if plan.kind == "radial":
        nominal = integrate_pattern(system, pattern, z0, timing, n_periods, check_enclosure=False).states
        states = np.empty((n_traces, N + 1, system.n))
        W = np.empty((n_traces, N, system.d))
        y = starts.copy()
        states[:, 0] = y
        for j in range(N):
            diff = y - nominal[j]
            nrm = np.linalg.norm(diff, axis=1, keepdims=True)
            w = np.where(nrm > 0, plan.omega * diff / np.where(nrm > 0, nrm, 1.0), 0.0)
            W[:, j] = w
            y = rollout(system, u_steps[j:j + 1], y, dt, "rk4", refinement, w[:, None, :])[:, 1]
            states[:, j + 1] = y
    else:
        if plan.kind == "none":
            W = None
        else:
            W = np.stack([plan.sequence(N, system.d, r) for r in rngs])
        nw = workers or default_workers()
        chunks = np.array_split(np.arange(n_traces), min(nw, n_traces))

        def run(idx):
            return rollout(system, u_steps, starts[idx], dt, "rk4", refinement,
                           None if W is None else W[idx])

        if len(chunks) == 1:
            states = run(chunks[0])
        else:
            with ThreadPoolExecutor(len(chunks)) as ex:
                states = np.concatenate(list(ex.map(run, chunks)))

    times = np.arange(N + 1) * dt
    traces = []
    for b in range(n_traces):
        wb = np.zeros((0, system.d)) if W is None else W[b]
        traces.append(Trace(times, states[b], ids, wb))
    if check_enclosure:
        enc = system.enclosure
        for b, tr in enumerate(traces):
            inside = np.all((tr.states >= enc.lower) & (tr.states <= enc.upper), axis=1)
            if not inside.all():
                j = int(np.argmin(inside))
                raise LeftEnclosure(f"trace {b} left the enclosure at t={times[j]:g}", step=j,
                                    partial=traces)
    return traces


@dataclass(frozen=True)
class ContainmentReport:
    margins: np.ndarray  # worst margin per trace; <= 0 means contained
    violations: tuple = field(default=())  # (trace, sample, margin) with margin > 0
    worst_margin: float = -np.inf
    n_samples: int = 0

    @property
    def contained(self) -> bool:
        return not self.violations


def check_containment(traces: Sequence[Trace], tube: Tube, tol: float = 1e-9) -> ContainmentReport:
    """Margins ||y(t) - center(t)|| - radius(t) of each trace against the tube."""
    margins = []
    violations = []
    n_samples = 0
    for b, tr in enumerate(traces):
        m = len(tr.times)
        if m > len(tube):
            raise LatticeMismatch(f"trace {b} is longer than the tube")
        expected = tube.t0 + np.arange(m) * tube.dt
        if not np.allclose(tr.times, expected, rtol=0, atol=tol * max(1.0, abs(expected[-1]))):
            raise LatticeMismatch(f"trace {b} is not sampled on the tube lattice")
        dist = np.linalg.norm(tr.states - tube.centers[:m], axis=1) - tube.radii[:m]
        margins.append(float(dist.max()))
        for j in np.flatnonzero(dist > 0):
            violations.append((b, int(j), float(dist[j])))
        n_samples += m
    margins = np.array(margins)
    worst = float(margins.max()) if margins.size else -np.inf
    return ContainmentReport(margins, tuple(violations), worst, n_samples)


def period_gap(trace: Trace, T: float) -> np.ndarray:
    """g_j = ||Y((j+1) T) - Y(j T)|| for every full period in the trace."""
    dt = trace.times[1] - trace.times[0] if len(trace.times) > 1 else 0.0
    if dt <= 0:
        raise TooShort("trace has fewer than two samples")
    K = int(round(T / dt))
    if K < 1 or abs(K * dt - T) > 1e-9 * max(1.0, T):
        raise ValueError("T is not a multiple of the trace step")
    if len(trace.states) - 1 < 2 * K:
        raise TooShort("trace spans fewer than two periods")
    marks = trace.states[::K]
    return np.linalg.norm(np.diff(marks, axis=0), axis=1)
