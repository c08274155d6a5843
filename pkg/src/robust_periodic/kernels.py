"""Kernel backend selection.

The compiled extension is used when it imports; setting the environment
variable ``ROBUST_PERIODIC_PURE=1`` forces the numpy fallback.
"""
import os

import numpy as np

from . import _kernels_py as pure

try:
    if os.environ.get("ROBUST_PERIODIC_PURE", "") not in ("", "0"):
        raise ImportError("pure backend requested")
    from . import _kernels as compiled
except ImportError:
    compiled = None

BACKEND = "cython" if compiled is not None else "python"
_impl = compiled if compiled is not None else pure


def _c(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def euler_rollout(code, params, y0, u_steps, dt, w=None):
    return _impl.euler_rollout(int(code), _c(params), _c(y0), _c(u_steps), float(dt),
                               None if w is None else _c(w))


def rk4_rollout(code, params, y0, u_steps, dt, refinement, w=None):
    return _impl.rk4_rollout(int(code), _c(params), _c(y0), _c(u_steps), float(dt),
                             int(refinement), None if w is None else _c(w))


def euler_transitions(code, params, y0, modes, steps, dt, weights):
    return _impl.euler_transitions(int(code), _c(params), _c(y0), _c(modes), int(steps),
                                   float(dt), _c(weights))
