"""Guaranteed tube around the Euler path of a repeated pattern, with local bound constants."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .bounds import BoundConstants, check_hypothesis_H, delta_perturbed, estimate_constants
from .core import Ball, Box, Pattern, TimingConfig, Tube, as_state
from .errors import LeftEnclosure, ZoneGrowthExceeded
from .systems import SystemSpec

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ZonePolicy:
    """How candidate zones are drawn around each ball before estimating local constants.

    The first candidate is the bounding box of B_j scaled by ``inflate``,
    swept along 2 dt f(center).  Failed candidates grow by ``retry_factor``.
    Zone bounds are snapped outward to a lattice of ``quantum`` times the
    enclosure widths so that recurring zones hit the constants cache.
    """

    inflate: float = 1.5
    retry_factor: float = 1.5
    max_retries: int = 8
    samples: int = 64
    margin: float = 0.05
    quantum: float = 1.0 / 256
    seed: int = 0
    cache: bool = True


class _ConstantsCache:
    def __init__(self, system, policy, omega):
        self.system = system
        self.policy = policy
        self.omega = omega
        self.q = np.maximum(system.enclosure.widths * policy.quantum, 1e-12)
        self.store = {}
        self.hits = 0
        self.misses = 0

    def snap(self, lo, hi):
        a = np.floor(lo / self.q).astype(np.int64)
        b = np.ceil(hi / self.q).astype(np.int64)
        return a, b

    def get(self, mode, lo, hi):
        a, b = self.snap(lo, hi)
        enc = self.system.enclosure
        zone = Box(np.maximum(a * self.q, enc.lower), np.minimum(b * self.q, enc.upper))
        key = (int(mode), tuple(a), tuple(b))
        if self.policy.cache and key in self.store:
            self.hits += 1
            return zone, self.store[key]
        self.misses += 1
        c = estimate_constants(self.system, mode, zone, samples=self.policy.samples,
                               margin=self.policy.margin, seed=self.policy.seed, omega=self.omega)
        if self.policy.cache:
            self.store[key] = c
        return zone, c


def _partial(dt, centers, radii, lambdas, gammas, h_ok, j):
    return Tube(0.0, dt, centers[: j + 1].copy(), radii[: j + 1].copy(), lambdas[:j].copy(),
                gammas[:j].copy(), h_ok[:j].copy())


def propagate_tube(system: SystemSpec, pattern: Pattern, z0, mu0: float, omega: float,
                   timing: TimingConfig, n_periods: int = 1, zone_policy: Optional[ZonePolicy] = None,
                   fixed_constants: Optional[BoundConstants] = None) -> Tube:
    """Chain B_{j+1} = B(Euler_{j+1}, delta(d_j, omega, dt)) over n_periods * K steps.

    With ``fixed_constants`` the same (C, lambda, gamma) is used at every
    step and only the enclosure is checked.
    """
    if n_periods < 1:
        raise ValueError("n_periods must be >= 1")
    if pattern.k != timing.k:
        raise ValueError("pattern length does not match timing.k")
    if mu0 < 0 or omega < 0:
        raise ValueError("mu0 and omega must be >= 0")
    policy = zone_policy or ZonePolicy()
    z0 = as_state(z0, system.n)
    enc = system.enclosure
    dt = timing.dt
    N = n_periods * timing.K
    ids = pattern.step_modes(timing.substeps, N)

    centers = np.empty((N + 1, system.n))
    radii = np.empty(N + 1)
    lambdas = np.empty(N)
    gammas = np.empty(N)
    h_ok = np.zeros(N, dtype=bool)
    centers[0] = z0
    radii[0] = mu0
    if not enc.contains_ball(Ball(z0, mu0)):
        raise LeftEnclosure("initial ball is not inside the enclosure", step=0,
                            partial=_partial(dt, centers, radii, lambdas, gammas, h_ok, 0))
    cache = _ConstantsCache(system, policy, omega)

    for j in range(N):
        c, d, u = centers[j], float(radii[j]), int(ids[j])
        f = system.f(c, u)
        c1 = c + dt * f
        c2 = c + 2.0 * dt * f
        if fixed_constants is not None:
            const = fixed_constants
            d1 = delta_perturbed(d, omega, dt, const)
            b1 = Ball(c1, d1)
            if not enc.contains_ball(b1):
                raise LeftEnclosure(f"tube left the enclosure at step {j + 1}", step=j + 1,
                                    partial=_partial(dt, centers, radii, lambdas, gammas, h_ok, j))
        else:
            half = policy.inflate * d
            lo = np.minimum(c, c2) - half
            hi = np.maximum(c, c2) + half
            for attempt in range(policy.max_retries + 1):
                zone, const = cache.get(u, lo, hi)
                d1 = delta_perturbed(d, omega, dt, const)
                d2 = delta_perturbed(d, omega, 2.0 * dt, const)
                b0, b1, b2 = Ball(c, d), Ball(c1, d1), Ball(c2, d2)
                if zone.contains_ball(b0) and zone.contains_ball(b1) and zone.contains_ball(b2):
                    break
                if not (enc.contains_ball(b1) and enc.contains_ball(b2)):
                    raise LeftEnclosure(
                        f"tube left the enclosure at step {j + 1} (radius {d1:.6g})", step=j + 1,
                        partial=_partial(dt, centers, radii, lambdas, gammas, h_ok, j))
                need_lo = np.minimum.reduce([c - d, c1 - d1, c2 - d2])
                need_hi = np.maximum.reduce([c + d, c1 + d1, c2 + d2])
                pad = (policy.retry_factor - 1.0) * np.maximum(need_hi - need_lo, 1e-12)
                lo = np.minimum(lo, need_lo) - pad
                hi = np.maximum(hi, need_hi) + pad
            else:
                raise ZoneGrowthExceeded(
                    f"no valid zone after {policy.max_retries} enlargements at step {j + 1}",
                    step=j + 1, partial=_partial(dt, centers, radii, lambdas, gammas, h_ok, j))
        centers[j + 1] = c1
        radii[j + 1] = d1
        lambdas[j] = const.lam
        gammas[j] = const.gamma
        h_ok[j] = check_hypothesis_H(d, omega, dt, const)
    if not h_ok.all():
        log.warning("hypothesis (H) failed at %d of %d steps", int((~h_ok).sum()), N)
    log.debug("constants cache: %d hits, %d misses", cache.hits, cache.misses)
    return Tube(0.0, dt, centers, radii, lambdas, gammas, h_ok)


def period_radii(tube: Tube, K: int) -> np.ndarray:
    """Radii at t = 0, T, 2T, ... that the tube reaches."""
    return np.asarray(tube.radii[::K], dtype=float)
