"""Bound constants (C, lambda, gamma) and the guaranteed Euler deviation radii.

The deviation formulas are evaluated in a rearranged but algebraically
identical form built on the exponential tails

    E1(x) = e^x - 1,   E2(x) = e^x - 1 - x,   E3(x) = e^x - 1 - x - x^2/2,

which removes the cancellation of the expanded expressions for small |lambda t|.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy.stats import qmc

from .core import Box
from .errors import EmptyRegion, NegativeRadicand

LAMBDA_ZERO_TOL = 1e-9
DEFAULT_MARGIN = 0.05


@dataclass(frozen=True)
class BoundConstants:
    C: float
    lam: float
    gamma: float = 1.0
    L: float = 0.0
    region: Optional[Box] = None
    mode: Optional[int] = None

    def __post_init__(self):
        if not self.C >= 0:
            raise ValueError("C must be >= 0")
        if not self.gamma >= 0:
            raise ValueError("gamma must be >= 0")
        if not math.isfinite(self.lam):
            raise ValueError("lambda must be finite")


def exp_tail(x: float, order: int) -> float:
    """e^x minus its Taylor polynomial of degree ``order - 1``."""
    if abs(x) < 1.0:
        term = x ** order / math.factorial(order)
        total = term
        j = order
        while True:
            j += 1
            term *= x / j
            total += term
            if abs(term) <= 1e-18 * abs(total) or j > order + 60:
                return total
    out = math.expm1(x)
    poly = 1.0
    for j in range(1, order):
        poly *= x / j
        out -= poly
    return out


def _branch(lam: float) -> int:
    if abs(lam) < LAMBDA_ZERO_TOL:
        return 0
    return -1 if lam < 0 else 1


def _root(radicand: float) -> float:
    if not radicand >= 0.0:
        raise NegativeRadicand(f"radicand {radicand!r} is negative")
    return math.sqrt(radicand)


def delta_unperturbed(mu0: float, t: float, c: BoundConstants) -> float:
    """Radius bounding ||Y(t) - Euler(t)|| when the start points are ``mu0`` apart."""
    if t < 0 or mu0 < 0:
        raise ValueError("t and mu0 must be >= 0")
    C, lam = c.C, c.lam
    branch = _branch(lam)
    if branch < 0:
        x = lam * t
        r = mu0 * mu0 * math.exp(x) - 2.0 * C * C * exp_tail(x, 3) / lam ** 4
    elif branch > 0:
        x = 3.0 * lam * t
        r = mu0 * mu0 * math.exp(x) + 2.0 * C * C * exp_tail(x, 3) / (27.0 * lam ** 4)
    else:
        r = mu0 * mu0 * math.exp(t) + 2.0 * C * C * exp_tail(t, 3)
    return _root(r)


def delta_perturbed(eps0: float, omega: float, t: float, c: BoundConstants) -> float:
    """Radius bounding ||Y_w(t) - Euler(t)|| for disturbances with ||w|| <= omega."""
    if t < 0 or eps0 < 0 or omega < 0:
        raise ValueError("t, eps0 and omega must be >= 0")
    C, lam, g = c.C, c.lam, c.gamma
    gw = g * omega
    branch = _branch(lam)
    if branch < 0:
        x = lam * t
        r = (
            -2.0 * C * C * exp_tail(x, 3) / lam ** 4
            - 2.0 * C * gw * exp_tail(x, 2) / lam ** 3
            - gw * gw * exp_tail(x, 1) / lam ** 2
            + eps0 * eps0 * math.exp(x)
        )
    elif branch > 0:
        x = 3.0 * lam * t
        r = (
            2.0 * C * C * exp_tail(x, 3) / (27.0 * lam ** 4)
            + 2.0 * C * gw * exp_tail(x, 2) / (9.0 * lam ** 3)
            + gw * gw * exp_tail(x, 1) / (3.0 * lam ** 2)
            + eps0 * eps0 * math.exp(x)
        )
    else:
        r = (
            2.0 * C * C * exp_tail(t, 3)
            + 2.0 * C * gw * exp_tail(t, 2)
            + gw * gw * exp_tail(t, 1)
            + eps0 * eps0 * math.exp(t)
        )
    return _root(r)


def check_hypothesis_H(eps: float, omega: float, dt: float, c: BoundConstants) -> bool:
    return delta_perturbed(eps, omega, dt, c) >= eps * math.exp(c.lam * dt)


def chained_radii(mu0: float, omega: float, dt: float, n_steps: int, c: BoundConstants) -> np.ndarray:
    """Radii r_0 = mu0, r_{j+1} = delta_perturbed(r_j, omega, dt) with fixed constants."""
    out = np.empty(n_steps + 1)
    out[0] = mu0
    for j in range(n_steps):
        out[j + 1] = delta_perturbed(out[j], omega, dt, c)
    return out


@lru_cache(maxsize=64)
def _unit_sobol(n: int, samples: int, seed: int) -> np.ndarray:
    m = int(math.ceil(math.log2(max(samples, 2))))
    u = qmc.Sobol(d=n, scramble=True, seed=seed).random_base2(m)[:samples]
    u.setflags(write=False)
    return u


def sample_region(region: Box, samples: int, seed: int = 0, corners: bool = True) -> np.ndarray:
    """Scrambled Sobol points in ``region``, plus its corners and center."""
    lo, hi = region.lower, region.upper
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise EmptyRegion("region bounds must be finite")
    u = _unit_sobol(region.n, samples, seed)
    pts = lo + u * (hi - lo)
    if corners:
        pts = np.vstack([pts, region.corners(), region.center[None, :]])
    return pts


def ball_samples(rng: np.random.Generator, count: int, dim: int, radius: float) -> np.ndarray:
    """Uniform samples from the closed ball of the given radius centred at 0."""
    g = rng.standard_normal((count, dim))
    norms = np.linalg.norm(g, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    r = radius * rng.random((count, 1)) ** (1.0 / dim)
    w = g / norms * r
    # guard the last ulp so ||w|| <= radius holds exactly
    nw = np.linalg.norm(w, axis=1, keepdims=True)
    scale = np.where(nw > radius, radius / np.where(nw > 0, nw, 1.0), 1.0)
    return w * scale


def estimate_gamma(system, mode: int, region: Box, lam: float, omega: float,
                   samples: int = 4096, seed: int = 0, margin: float = DEFAULT_MARGIN) -> float:
    """Smallest gamma consistent with the sampled generalized one-sided Lipschitz quotient."""
    if omega <= 0:
        return 0.0
    rng = np.random.default_rng(seed)
    lo, hi = region.lower, region.upper
    y1 = lo + rng.random((samples, region.n)) * (hi - lo)
    y2 = lo + rng.random((samples, region.n)) * (hi - lo)
    w1 = ball_samples(rng, samples, system.d, omega)
    w2 = ball_samples(rng, samples, system.d, omega)
    u = system.modes[int(mode)]
    df = system.field(y1, u, w1) - system.field(y2, u, w2)
    dy = y1 - y2
    dw = w1 - w2
    ny = np.linalg.norm(dy, axis=1)
    nw = np.linalg.norm(dw, axis=1)
    ok = (ny > 0) & (nw > 0)
    q = (np.einsum("ij,ij->i", df[ok], dy[ok]) - lam * ny[ok] ** 2) / (ny[ok] * nw[ok])
    g = max(0.0, float(q.max())) if q.size else 0.0
    return g * (1.0 + margin)


def estimate_constants(system, mode: int, region: Box, samples: int = 4096,
                       margin: float = DEFAULT_MARGIN, seed: int = 0,
                       omega: float = 0.0) -> BoundConstants:
    """Sampled estimates of lambda, L, C and gamma for mode ``mode`` on ``region``.

    lambda is the largest eigenvalue of the symmetric part of the Jacobian,
    pushed up by ``margin * |lambda|``; L and sup ||f|| are scaled by
    ``1 + margin``.
    """
    if region is None:
        raise EmptyRegion("no region given")
    if samples < 2:
        raise ValueError("need at least 2 samples")
    pts = sample_region(region, samples, seed)
    J = system.jac(pts, mode)
    sym = 0.5 * (J + np.swapaxes(J, -1, -2))
    lam_raw = float(np.linalg.eigvalsh(sym)[:, -1].max())
    lam = lam_raw + margin * abs(lam_raw)
    L = float(np.linalg.norm(J, ord=2, axis=(-2, -1)).max()) * (1.0 + margin)
    fmax = float(np.linalg.norm(system.f(pts, mode), axis=-1).max()) * (1.0 + margin)
    if system.additive_perturbation:
        gamma = 1.0
    else:
        gamma = estimate_gamma(system, mode, region, lam, omega, samples, seed, margin)
    return BoundConstants(C=L * fmax, lam=lam, gamma=gamma, L=L, region=region, mode=int(mode))
