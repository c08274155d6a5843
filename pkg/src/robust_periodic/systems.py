"""Built-in switched systems: the continuous-culture bioreactor and diagonal linear test systems."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from ._kernels_py import BIOREACTOR, LINEAR_DIAG, native_field
from .core import Box


@dataclass(frozen=True)
class RunningCost:
    name: str
    fn: Callable[[np.ndarray], np.ndarray]
    # set when the integrand is linear in the state; lets the compiled kernel evaluate it
    weights: Optional[np.ndarray] = None


@dataclass(frozen=True)
class SystemSpec:
    """A finite family of vector fields f_u(y, w), one per row of ``modes``.

    ``field(y, u, w)`` broadcasts over leading axes of ``y``; ``jacobian``
    returns d f / d y with shape (..., n, n).
    """

    name: str
    n: int
    d: int
    domain: Box
    enclosure: Box
    modes: np.ndarray
    field: Callable
    jacobian: Optional[Callable] = None
    integrands: dict = field(default_factory=dict)
    native: Optional[tuple] = None
    additive_perturbation: bool = True
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        modes = np.atleast_2d(np.asarray(self.modes, dtype=float))
        if modes.shape[0] < 1:
            raise ValueError("a system needs at least one mode")
        object.__setattr__(self, "modes", modes)
        if not self.enclosure.contains_box(self.domain):
            raise ValueError("enclosure must contain the domain")

    @property
    def n_modes(self) -> int:
        return self.modes.shape[0]

    def mode_value(self, index: int) -> np.ndarray:
        return self.modes[int(index)]

    def f(self, y, mode: int, w=None) -> np.ndarray:
        return self.field(np.asarray(y, dtype=float), self.modes[int(mode)], w)

    def jac(self, y, mode: int) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        u = self.modes[int(mode)]
        if self.jacobian is not None:
            return self.jacobian(y, u)
        return finite_difference_jacobian(lambda z: self.field(z, u, None), y)

    def with_modes(self, indices) -> "SystemSpec":
        return replace(self, modes=self.modes[np.asarray(indices, dtype=int)])


def finite_difference_jacobian(fun, y, rel_step=1e-6):
    """Central differences, step ``rel_step * max(1, |y_i|)`` per coordinate."""
    y = np.asarray(y, dtype=float)
    n = y.shape[-1]
    cols = []
    for i in range(n):
        h = rel_step * np.maximum(1.0, np.abs(y[..., i]))
        e = np.zeros(n)
        e[i] = 1.0
        step = h[..., None] * e
        cols.append((fun(y + step) - fun(y - step)) / (2.0 * h[..., None]))
    return np.stack(cols, axis=-1)


@dataclass(frozen=True)
class BioreactorParams:
    D: float = 0.15
    K_i: float = 22.0
    K_m: float = 1.2
    P_m: float = 50.0
    Y_xs: float = 0.4
    alpha: float = 2.2
    beta: float = 0.2
    mu_m: float = 0.48
    S_f_min: float = 28.7
    S_f_max: float = 40.0
    # listed with the model but not used by the dynamics or the cost
    S_f_bar: float = 32.9

    def __post_init__(self):
        for name, value in vars(self).items():
            if not value > 0:
                raise ValueError(f"bioreactor parameter {name} must be positive")
        if not self.S_f_min < self.S_f_max:
            raise ValueError("S_f_min must be below S_f_max")

    def kernel_params(self) -> np.ndarray:
        return np.array([self.D, self.K_i, self.K_m, self.P_m, self.Y_xs, self.alpha, self.beta, self.mu_m])


BIOREACTOR_DOMAIN = Box(np.array([4.8, 11.0, 17.5]), np.array([7.5, 26.0, 26.0]))


def growth_rate(p: BioreactorParams, S, P):
    return p.mu_m * (1.0 - P / p.P_m) * S / (p.K_m + S + S * S / p.K_i)


def bioreactor_field(y, S_f, w=None, params: BioreactorParams = BioreactorParams()):
    """Right-hand side (dX, dS, dP) for feed concentration ``S_f`` and additive disturbance ``w``."""
    y = np.asarray(y, dtype=float)
    u = np.asarray(S_f, dtype=float).reshape(np.shape(S_f) if np.ndim(S_f) > 0 else (1,))
    return native_field(BIOREACTOR, params.kernel_params())(y, u, None if w is None else np.asarray(w, dtype=float))


def _bioreactor_jacobian(p: BioreactorParams):
    def jac(y, u=None):
        y = np.asarray(y, dtype=float)
        X, S, P = y[..., 0], y[..., 1], y[..., 2]
        den = p.K_m + S + S * S / p.K_i
        mu = growth_rate(p, S, P)
        dmu_dS = p.mu_m * (1.0 - P / p.P_m) * (den - S * (1.0 + 2.0 * S / p.K_i)) / den ** 2
        dmu_dP = -p.mu_m * S / (p.P_m * den)
        J = np.empty(y.shape[:-1] + (3, 3))
        J[..., 0, 0] = -p.D + mu
        J[..., 0, 1] = X * dmu_dS
        J[..., 0, 2] = X * dmu_dP
        J[..., 1, 0] = -mu / p.Y_xs
        J[..., 1, 1] = -p.D - X * dmu_dS / p.Y_xs
        J[..., 1, 2] = -X * dmu_dP / p.Y_xs
        J[..., 2, 0] = p.alpha * mu + p.beta
        J[..., 2, 1] = p.alpha * X * dmu_dS
        J[..., 2, 2] = -p.D + p.alpha * X * dmu_dP
        return J

    return jac


def mode_table(lo: float, hi: float, n_modes: int) -> np.ndarray:
    """``n_modes`` values spaced uniformly on [lo, hi], endpoints included; one mode sits at the midpoint."""
    if n_modes < 1:
        raise ValueError("n_modes must be >= 1")
    if n_modes == 1:
        return np.array([0.5 * (lo + hi)])
    vals = np.linspace(lo, hi, n_modes)
    vals[0], vals[-1] = lo, hi
    return vals


def bioreactor_spec(n_modes: int = 300, domain: Optional[Box] = None,
                    params: Optional[BioreactorParams] = None,
                    enclosure_margin: float = 0.1) -> SystemSpec:
    p = params or BioreactorParams()
    dom = domain or BIOREACTOR_DOMAIN
    kp = p.kernel_params()
    productivity = RunningCost("productivity", lambda y: p.D * np.asarray(y)[..., 2],
                               weights=np.array([0.0, 0.0, p.D]))
    return SystemSpec(
        name="bioreactor",
        n=3,
        d=3,
        domain=dom,
        enclosure=dom.inflate(enclosure_margin),
        modes=mode_table(p.S_f_min, p.S_f_max, n_modes)[:, None],
        field=native_field(BIOREACTOR, kp),
        jacobian=_bioreactor_jacobian(p),
        integrands={"productivity": productivity},
        native=(BIOREACTOR, kp),
        additive_perturbation=True,
        params={k: v for k, v in vars(p).items()},
    )


def linear_test_spec(diag, offsets, domain: Optional[Box] = None, name: str = "linear",
                     enclosure_margin: float = 0.1) -> SystemSpec:
    """dy/dt = diag(A) y + b_u + w, one offset vector b_u per mode."""
    a = np.asarray(diag, dtype=float).reshape(-1)
    if np.any(a >= 0):
        raise ValueError("diagonal entries must be negative")
    n = a.shape[0]
    b = np.asarray(offsets, dtype=float).reshape(-1, n)
    dom = domain or Box(np.zeros(n), np.ones(n))
    first = RunningCost("first", lambda y: np.asarray(y)[..., 0], weights=np.eye(n)[0])
    return SystemSpec(
        name=name,
        n=n,
        d=n,
        domain=dom,
        enclosure=dom.inflate(enclosure_margin),
        modes=b,
        field=native_field(LINEAR_DIAG, a),
        jacobian=lambda y, u=None: np.broadcast_to(np.diag(a), np.shape(y)[:-1] + (n, n)).copy(),
        integrands={"first": first},
        native=(LINEAR_DIAG, a),
        additive_perturbation=True,
        params={"diag": a.tolist()},
    )


def linear_solution(diag, offset, y0, t):
    """Closed-form solution of dy/dt = A y + b for diagonal A."""
    a = np.asarray(diag, dtype=float)
    b = np.asarray(offset, dtype=float)
    eq = -b / a
    return eq + (np.asarray(y0, dtype=float) - eq) * np.exp(a * t)


LINEAR1D = dict(diag=[-1.0], offsets=[[0.2], [0.5], [0.8]])
LINEAR2D = dict(diag=[-1.0, -2.0], offsets=[[0.2, 0.4], [0.8, 0.6], [0.5, 1.6]])


def get_system(name: str, **overrides) -> SystemSpec:
    """Look up a registered system; ``overrides`` are numeric parameter overrides."""
    if name == "bioreactor":
        n_modes = int(overrides.pop("n_modes", 300))
        margin = float(overrides.pop("enclosure_margin", 0.1))
        params = BioreactorParams(**{k: float(v) for k, v in overrides.items()})
        return bioreactor_spec(n_modes, params=params, enclosure_margin=margin)
    if name in ("linear1d", "linear2d"):
        base = dict(LINEAR1D if name == "linear1d" else LINEAR2D)
        base.update(overrides)
        dom = base.pop("domain", None)
        if dom is not None and not isinstance(dom, Box):
            dom = Box.from_dict(dom)
        return linear_test_spec(base["diag"], base["offsets"], domain=dom, name=name,
                                enclosure_margin=float(base.get("enclosure_margin", 0.1)))
    raise KeyError(f"unknown system {name!r}; known: bioreactor, linear1d, linear2d")


SYSTEM_NAMES = ("bioreactor", "linear1d", "linear2d")
