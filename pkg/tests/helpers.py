import numpy as np

from robust_periodic.core import Box
from robust_periodic.systems import SystemSpec


def constant_system(c, n_modes=1, name="const"):
    """dy/dt = c + w, a python-only field (no compiled kernel)."""
    c = np.asarray(c, dtype=float)
    n = c.shape[0]
    dom = Box(-np.ones(n), np.ones(n))

    def field(y, u, w=None):
        out = np.broadcast_to(c, np.shape(y)).copy()
        return out if w is None else out + w

    return SystemSpec(name=name, n=n, d=n, domain=dom, enclosure=dom.inflate(0.1),
                      modes=np.zeros((n_modes, 1)), field=field,
                      jacobian=lambda y, u=None: np.zeros(np.shape(y)[:-1] + (n, n)),
                      integrands={"first": None}, native=None)
