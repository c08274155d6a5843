"""Value types shared by every stage of the pipeline.

States are plain 1-D float64 numpy arrays; the containers below are frozen
dataclasses so they can be handed to worker threads without copying.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import DimensionMismatch, DomainError, OffLattice


def as_state(y, n: Optional[int] = None) -> np.ndarray:
    arr = np.asarray(y, dtype=float).reshape(-1)
    if n is not None and arr.shape[0] != n:
        raise DimensionMismatch(f"expected dimension {n}, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("state has non-finite components")
    return arr


@dataclass(frozen=True)
class Box:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float).reshape(-1)
        hi = np.asarray(self.upper, dtype=float).reshape(-1)
        if lo.shape != hi.shape:
            raise DimensionMismatch("box bounds have different dimensions")
        if np.any(lo > hi):
            raise ValueError("box lower bound exceeds upper bound")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def n(self) -> int:
        return self.lower.shape[0]

    @property
    def widths(self) -> np.ndarray:
        return self.upper - self.lower

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    def contains(self, y) -> bool:
        y = np.asarray(y, dtype=float)
        return bool(np.all(y >= self.lower) and np.all(y <= self.upper))

    def contains_ball(self, ball: "Ball") -> bool:
        return bool(
            np.all(ball.center - ball.radius >= self.lower)
            and np.all(ball.center + ball.radius <= self.upper)
        )

    def contains_box(self, other: "Box") -> bool:
        return bool(np.all(other.lower >= self.lower) and np.all(other.upper <= self.upper))

    def inflate(self, fraction: float) -> "Box":
        """Grow every side by ``fraction`` of its width."""
        pad = fraction * self.widths
        return Box(self.lower - pad, self.upper + pad)

    def corners(self) -> np.ndarray:
        n = self.n
        bits = (np.arange(2 ** n)[:, None] >> np.arange(n)[None, :]) & 1
        return np.where(bits == 1, self.upper, self.lower)

    def to_dict(self) -> dict:
        return {"lower": self.lower.tolist(), "upper": self.upper.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Box":
        return cls(np.array(d["lower"], dtype=float), np.array(d["upper"], dtype=float))


@dataclass(frozen=True)
class Ball:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float).reshape(-1)
        if not np.all(np.isfinite(c)):
            raise ValueError("ball center must be finite")
        r = float(self.radius)
        if not r >= 0.0:
            raise ValueError(f"ball radius must be >= 0, got {r}")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "radius", r)

    def bounding_box(self, scale: float = 1.0) -> Box:
        r = scale * self.radius
        return Box(self.center - r, self.center + r)

    def to_dict(self) -> dict:
        return {"center": self.center.tolist(), "radius": self.radius}


def ball_contains(outer: Ball, inner: Ball, margin: float = 0.0) -> bool:
    """True iff ``inner`` lies inside ``outer``: ||c_in - c_out|| + r_in + margin <= r_out."""
    if outer.center.shape != inner.center.shape:
        raise DimensionMismatch("balls live in different dimensions")
    dist = float(np.linalg.norm(inner.center - outer.center))
    return dist + inner.radius + margin <= outer.radius


@dataclass(frozen=True)
class Grid:
    """Uniform grid with ``kappa`` nodes per axis, both box endpoints included."""

    domain: Box
    kappa: int

    def __post_init__(self):
        if int(self.kappa) < 2:
            raise ValueError("kappa must be >= 2")
        object.__setattr__(self, "kappa", int(self.kappa))

    @property
    def n(self) -> int:
        return self.domain.n

    @property
    def spacing(self) -> np.ndarray:
        return self.domain.widths / (self.kappa - 1)

    @property
    def epsilon(self) -> float:
        # half-diagonal of one grid cell
        return 0.5 * float(np.linalg.norm(self.spacing))

    @property
    def size(self) -> int:
        return self.kappa ** self.n

    @property
    def shape(self) -> tuple:
        return (self.kappa,) * self.n

    def axes(self) -> list:
        return [np.linspace(lo, hi, self.kappa) for lo, hi in zip(self.domain.lower, self.domain.upper)]

    def nodes(self) -> np.ndarray:
        """All nodes as a (size, n) array in flat-index (C) order."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=-1)

    def node(self, index: int) -> np.ndarray:
        multi = np.array(np.unravel_index(int(index), self.shape))
        return self._coords(multi)

    def _coords(self, multi: np.ndarray) -> np.ndarray:
        # endpoint nodes are exact: lower + (k-1) * h may differ from upper by rounding
        h = self.spacing
        out = self.domain.lower + multi * h
        return np.where(multi == self.kappa - 1, self.domain.upper, out)

    def nearest_multi(self, ys: np.ndarray) -> np.ndarray:
        ys = np.asarray(ys, dtype=float)
        with np.errstate(invalid="ignore", divide="ignore"):
            rel = (ys - self.domain.lower) / np.where(self.spacing > 0, self.spacing, 1.0)
        idx = np.floor(rel + 0.5).astype(np.int64)
        return np.clip(idx, 0, self.kappa - 1)

    def index_of(self, ys: np.ndarray) -> np.ndarray:
        """Flat index of the nearest node for each row of ``ys`` (no domain check)."""
        multi = self.nearest_multi(ys)
        return np.ravel_multi_index(tuple(np.moveaxis(multi, -1, 0)), self.shape)

    def to_dict(self) -> dict:
        return {"domain": self.domain.to_dict(), "kappa": self.kappa}

    @classmethod
    def from_dict(cls, d: dict) -> "Grid":
        return cls(Box.from_dict(d["domain"]), int(d["kappa"]))


def representative(grid: Grid, y) -> np.ndarray:
    """Nearest grid node to ``y``; raises DomainError outside the grid's box."""
    y = as_state(y, grid.n)
    if not grid.domain.contains(y):
        raise DomainError(f"state {y.tolist()} lies outside the grid domain")
    return grid._coords(grid.nearest_multi(y))


def paper_epsilon(n: int, kappa: int) -> float:
    """Representative radius quoted for the unit cube, sqrt(n) / (2 kappa)."""
    return math.sqrt(n) / (2 * kappa)


@dataclass(frozen=True)
class TimingConfig:
    tau: float
    dt: float
    k: int

    def __post_init__(self):
        if not (self.tau > 0 and self.dt > 0):
            raise ValueError("tau and dt must be positive")
        if int(self.k) < 1:
            raise ValueError("pattern length k must be >= 1")
        ratio = self.tau / self.dt
        s = round(ratio)
        if s < 1 or abs(ratio - s) > 1e-9 * max(1.0, ratio):
            raise ValueError(f"tau/dt = {ratio} is not a positive integer")
        object.__setattr__(self, "k", int(self.k))

    @property
    def substeps(self) -> int:
        return int(round(self.tau / self.dt))

    @property
    def K(self) -> int:
        return self.k * self.substeps

    @property
    def T(self) -> float:
        return self.k * self.tau

    def to_dict(self) -> dict:
        return {"tau": self.tau, "dt": self.dt, "k": self.k}

    @classmethod
    def from_dict(cls, d: dict) -> "TimingConfig":
        return cls(float(d["tau"]), float(d["dt"]), int(d["k"]))


@dataclass(frozen=True)
class Pattern:
    modes: tuple
    tau: float
    repeated: bool = True

    def __post_init__(self):
        modes = tuple(int(m) for m in self.modes)
        if not modes:
            raise ValueError("a pattern needs at least one mode")
        if any(m < 0 for m in modes):
            raise ValueError("mode indices must be >= 0")
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        object.__setattr__(self, "modes", modes)

    @property
    def k(self) -> int:
        return len(self.modes)

    def step_modes(self, substeps: int, n_steps: int) -> np.ndarray:
        """Mode index active on each Euler sub-step [j dt, (j+1) dt)."""
        j = np.arange(n_steps)
        return np.asarray(self.modes, dtype=np.int64)[(j // substeps) % self.k]


@dataclass(frozen=True)
class Trace:
    times: np.ndarray
    states: np.ndarray
    mode_ids: np.ndarray
    perturbations: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))

    def __post_init__(self):
        if len(self.times) != len(self.states):
            raise ValueError("times and states differ in length")
        if len(self.times) > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("trace times must be strictly increasing")


@dataclass(frozen=True)
class Tube:
    """Balls B(centers[j], radii[j]) at t0 + j*dt.

    ``lambdas[j-1]``, ``gammas[j-1]``, ``h_ok[j-1]`` describe step j, the
    interval [(j-1) dt, j dt].
    """

    t0: float
    dt: float
    centers: np.ndarray
    radii: np.ndarray
    lambdas: np.ndarray
    gammas: np.ndarray
    h_ok: np.ndarray

    def __post_init__(self):
        n_balls = len(self.radii)
        if len(self.centers) != n_balls:
            raise ValueError("centers and radii differ in length")
        for name in ("lambdas", "gammas", "h_ok"):
            if len(getattr(self, name)) != n_balls - 1:
                raise ValueError(f"{name} must have one entry per step")
        if np.any(np.asarray(self.radii) < 0):
            raise ValueError("negative tube radius")

    def __len__(self) -> int:
        return len(self.radii)

    @property
    def times(self) -> np.ndarray:
        return self.t0 + np.arange(len(self.radii)) * self.dt

    def ball(self, j: int) -> Ball:
        return Ball(self.centers[j], float(self.radii[j]))

    def index_at(self, t: float, rtol: float = 1e-9) -> int:
        x = (t - self.t0) / self.dt
        j = int(round(x))
        if abs(x - j) > rtol * max(1.0, abs(x)) or not 0 <= j < len(self.radii):
            raise OffLattice(f"t={t} is not a sample time of this tube")
        return j


def tube_radius_at(tube: Tube, t: float) -> float:
    return float(tube.radii[tube.index_at(t)])


@dataclass(frozen=True)
class Certificate:
    status: str  # "Certified" or "NotFound"
    K: int
    dt: float
    witness_i: Optional[int] = None
    ball_outer: Optional[Ball] = None
    ball_inner: Optional[Ball] = None
    lambda_sum: Optional[float] = None
    h_violations: int = 0
    envelope: Optional[Box] = None
    window: Optional[Sequence[Ball]] = None
    diagnostics: tuple = ()

    @property
    def certified(self) -> bool:
        return self.status == "Certified"
