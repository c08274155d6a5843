"""Limit-cycle / robust-invariance certificates from a propagated tube."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Box, Certificate, Tube, ball_contains
from .errors import NotCertified, TubeTooShort


def _envelope(tube: Tube, i: int, K: int) -> Box:
    c = tube.centers[i:i + K + 1]
    r = tube.radii[i:i + K + 1, None]
    return Box((c - r).min(axis=0), (c + r).max(axis=0))


def certify_limit_cycle(tube: Tube, K: int, full_scan: bool = False, margin: float = 0.0,
                        store_window: bool = False) -> Certificate:
    """Look for the first i with B((i+K) dt) inside B(i dt).

    Only period boundaries i = 0, K, 2K, ... are tried unless ``full_scan``.
    An inclusion whose local rates do not sum to a negative number is
    rejected and noted in ``diagnostics``.
    """
    K = int(K)
    if K < 1:
        raise ValueError("K must be >= 1")
    n_balls = len(tube)
    if n_balls < K + 1:
        raise TubeTooShort(f"tube has {n_balls} samples, needs at least {K + 1}")
    last = n_balls - 1 - K
    candidates = range(0, last + 1) if full_scan else range(0, last + 1, K)
    notes = []
    for i in candidates:
        outer, inner = tube.ball(i), tube.ball(i + K)
        if not ball_contains(outer, inner, margin):
            continue
        lsum = math.fsum(tube.lambdas[i:i + K])
        h_bad = int(np.count_nonzero(~np.asarray(tube.h_ok[i:i + K], dtype=bool)))
        if not lsum < 0:
            notes.append(f"inclusion at i={i} rejected: sum of local rates {lsum:.6g} >= 0 "
                         f"({h_bad} steps violate (H))")
            continue
        window = [tube.ball(j) for j in range(i, i + K + 1)] if store_window else None
        return Certificate("Certified", K, tube.dt, witness_i=i, ball_outer=outer, ball_inner=inner,
                           lambda_sum=lsum, h_violations=h_bad, envelope=_envelope(tube, i, K),
                           window=window, diagnostics=tuple(notes))
    return Certificate("NotFound", K, tube.dt, diagnostics=tuple(notes))


@dataclass(frozen=True)
class Report:
    data: dict
    text: str

    def __str__(self):
        return self.text


def certificate_report(cert: Certificate, tube: Tube) -> Report:
    if not cert.certified:
        raise NotCertified("certificate status is " + cert.status)
    i, K, dt = cert.witness_i, cert.K, cert.dt
    t_i = tube.t0 + i * dt
    env = cert.envelope
    data = {
        "status": cert.status,
        "witness_i": i,
        "K": K,
        "t_outer": t_i,
        "t_inner": t_i + K * dt,
        "radius_outer": cert.ball_outer.radius,
        "radius_inner": cert.ball_inner.radius,
        "center_distance": float(np.linalg.norm(cert.ball_inner.center - cert.ball_outer.center)),
        "lambda_sum": cert.lambda_sum,
        "h_violations": cert.h_violations,
        "invariant_envelope": env.to_dict(),
        "claims": [
            "the unperturbed solution under the repeated pattern converges to a limit cycle inside I",
            f"every perturbed solution stays in I for t >= {t_i:g}",
        ],
    }
    lines = [
        f"Certified: B({t_i + K * dt:g}) is inside B({t_i:g})  (i={i}, K={K}, dt={dt:g})",
        f"  outer radius {cert.ball_outer.radius:.6g}, inner radius {cert.ball_inner.radius:.6g}, "
        f"center distance {data['center_distance']:.6g}",
        f"  sum of local rates over the window: {cert.lambda_sum:.6g}"
        + (f"  ({cert.h_violations} steps violate (H))" if cert.h_violations else ""),
        f"  I = union of tube balls over [{t_i:g}, {t_i + K * dt:g}]",
    ]
    for d, (lo, hi) in enumerate(zip(env.lower, env.upper)):
        lines.append(f"    coordinate {d + 1}: [{lo:.6g}, {hi:.6g}]")
    lines.append("  (1) the unperturbed solution converges to a limit cycle contained in I")
    lines.append(f"  (2) every perturbed solution remains in I for t >= {t_i:g}")
    return Report(data, "\n".join(lines))
