"""Grid dynamic programming over Euler transitions: an approximately optimal pattern per grid node."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from ._kernels_py import euler_rollout_fn, euler_transitions_fn
from .core import Grid, Pattern, TimingConfig, as_state
from .errors import InfeasibleNode
from .integrate import integrate_pattern
from .systems import SystemSpec


@dataclass(frozen=True)
class CostSpec:
    kind: str  # "terminal" or "average"
    sense: str = "min"  # "min" or "max"
    y_end: Optional[np.ndarray] = None
    integrand: Optional[str] = None

    def __post_init__(self):
        if self.kind not in ("terminal", "average"):
            raise ValueError(f"unknown cost kind {self.kind!r}")
        if self.sense not in ("min", "max"):
            raise ValueError(f"unknown sense {self.sense!r}")
        if self.kind == "terminal":
            if self.y_end is None:
                raise ValueError("terminal cost needs y_end")
            object.__setattr__(self, "y_end", as_state(self.y_end))
        elif self.integrand is None:
            raise ValueError("average cost needs an integrand name")

    @classmethod
    def terminal(cls, y_end, sense="min"):
        return cls("terminal", sense, y_end=y_end)

    @classmethod
    def average(cls, integrand, sense="max"):
        return cls("average", sense, integrand=integrand)

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "sense": self.sense}
        if self.kind == "terminal":
            d["y_end"] = self.y_end.tolist()
        else:
            d["integrand"] = self.integrand
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CostSpec":
        return cls(d["kind"], d.get("sense", "min"), y_end=d.get("y_end"), integrand=d.get("integrand"))


def evaluate_pattern(system: SystemSpec, pattern: Pattern, y0, timing: TimingConfig,
                     cost: CostSpec, check_enclosure: bool = True) -> float:
    """Cost of one Euler run of ``pattern`` from ``y0`` (no grid projection)."""
    if cost.kind == "terminal" and cost.y_end.shape[0] != system.n:
        raise ValueError("y_end dimension mismatch")
    tr = integrate_pattern(system, pattern, y0, timing, 1, check_enclosure=check_enclosure)
    return float(_cost_of_states(system, tr.states, timing, cost))


def _cost_of_states(system, states, timing, cost):
    if cost.kind == "terminal":
        return np.linalg.norm(states[..., -1, :] - cost.y_end, axis=-1)
    g = system.integrands[cost.integrand].fn(states[..., :-1, :])
    return np.sum(g * timing.dt, axis=-1) / timing.T


@dataclass
class PolicyTable:
    """DP result: optimal first-stage values and per-stage argmax/argmin tables.

    ``values`` hold the DP optimum on the grid (successors projected to
    nodes).  ``successors[z, m]`` is the flat node index reached from node z
    under table mode m (-1 when it leaves the domain).  Mode numbers exposed
    by :meth:`pattern` are indices into the system's full mode table.
    """

    grid: Grid
    timing: TimingConfig
    cost: CostSpec
    mode_indices: np.ndarray
    values: np.ndarray
    choices: np.ndarray  # (k, n_nodes): choices[j] is used with j+1 stages to go
    successors: np.ndarray
    system_name: str = ""
    out_of_domain: str = "reject"
    _costs: dict = field(default_factory=dict, repr=False)

    @property
    def n_nodes(self) -> int:
        return self.values.shape[0]

    def feasible(self, node: int) -> bool:
        return bool(np.isfinite(self.values[int(node)]))

    def node_of(self, y) -> int:
        from .core import representative

        z = representative(self.grid, y)
        return int(self.grid.index_of(z[None, :])[0])

    def table_pattern(self, node: int) -> Optional[tuple]:
        """Forward replay of the stored choices; indices into ``mode_indices``."""
        z = int(node)
        if not self.feasible(z):
            return None
        out = []
        for j in range(self.timing.k, 0, -1):
            m = int(self.choices[j - 1, z])
            out.append(m)
            z = int(self.successors[z, m])
            if z < 0 and j > 1:
                return None
        return tuple(out)

    def pattern(self, node: int) -> Optional[Pattern]:
        local = self.table_pattern(node)
        if local is None:
            return None
        return Pattern(tuple(int(self.mode_indices[m]) for m in local), self.timing.tau)

    def pattern_for(self, y) -> Pattern:
        node = self.node_of(y)
        p = self.pattern(node)
        if p is None:
            raise InfeasibleNode(f"no feasible pattern from node {node}")
        return p

    def achieved_costs(self, system: SystemSpec, nodes=None) -> np.ndarray:
        """Unprojected Euler cost of each node's stored pattern, started at the node itself."""
        nodes = np.arange(self.n_nodes) if nodes is None else np.asarray(nodes, dtype=int)
        out = np.full(len(nodes), np.inf if self.cost.sense == "min" else -np.inf)
        todo = [i for i, z in enumerate(nodes) if int(z) not in self._costs]
        pats = {i: self.table_pattern(int(nodes[i])) for i in todo}
        live = [i for i in todo if pats[i] is not None]
        if live:
            s = self.timing.substeps
            modes = system.modes[self.mode_indices]
            local = np.array([pats[i] for i in live])  # (B, k)
            u = modes[np.repeat(local, s, axis=1)]  # (B, K, m)
            y0 = self.grid._coords(np.array(np.unravel_index(nodes[live], self.grid.shape)).T)
            states = euler_rollout_fn(system.field, y0, np.swapaxes(u, 0, 1), self.timing.dt)
            vals = _cost_of_states(system, states, self.timing, self.cost)
            for i, v in zip(live, np.atleast_1d(vals)):
                self._costs[int(nodes[i])] = float(v)
        for i, z in enumerate(nodes):
            if int(z) in self._costs:
                out[i] = self._costs[int(z)]
        return out


def _transitions(system, nodes, modes, timing, cost):
    steps, dt = timing.substeps, timing.dt
    weights = None
    if cost.kind == "average":
        weights = system.integrands[cost.integrand].weights
    else:
        weights = np.zeros(system.n)
    if system.native is not None and weights is not None:
        code, params = system.native
        return kernels.euler_transitions(code, params, nodes, modes, steps, dt, weights)
    integrand = (system.integrands[cost.integrand].fn if cost.kind == "average"
                 else (lambda y: np.zeros(y.shape[:-1])))
    return euler_transitions_fn(system.field, nodes, modes, steps, dt, integrand)


def dp_synthesize(system: SystemSpec, grid: Grid, timing: TimingConfig, cost: CostSpec,
                  mode_subset=None, out_of_domain: str = "reject",
                  chunk_nodes: int = 200_000) -> PolicyTable:
    """Backward value iteration over k stages of length tau.

    Each stage integrates Euler with sub-steps dt from a node, projects the
    hand-off state to its nearest node and adds the stage cost.  Ties go to
    the lowest mode index.
    """
    if out_of_domain not in ("reject", "clamp"):
        raise ValueError("out_of_domain must be 'reject' or 'clamp'")
    if grid.n != system.n:
        raise ValueError("grid dimension does not match the system")
    mode_indices = np.arange(system.n_modes) if mode_subset is None else np.asarray(mode_subset, dtype=int)
    modes = system.modes[mode_indices]
    nodes = grid.nodes()
    N, M = nodes.shape[0], modes.shape[0]
    lo, hi = grid.domain.lower, grid.domain.upper

    successors = np.empty((N, M), dtype=np.int64)
    stage = np.zeros((N, M))
    for a in range(0, N, chunk_nodes):
        end, integ = _transitions(system, nodes[a:a + chunk_nodes], modes, timing, cost)
        if out_of_domain == "clamp":
            end = np.clip(end, lo, hi)
        inside = np.all((end >= lo) & (end <= hi), axis=-1)
        idx = grid.index_of(end)
        successors[a:a + chunk_nodes] = np.where(inside, idx, -1)
        stage[a:a + chunk_nodes] = integ

    minimize = cost.sense == "min"
    bad = np.inf if minimize else -np.inf
    if cost.kind == "terminal":
        V = np.linalg.norm(nodes - cost.y_end, axis=1)
    else:
        V = np.zeros(N)
    k = timing.k
    choices = np.empty((k, N), dtype=np.int32 if M < 2 ** 31 else np.int64)
    rows = np.arange(N)
    ok = successors >= 0
    safe = np.where(ok, successors, 0)
    for j in range(1, k + 1):
        nxt = np.where(ok, V[safe], bad)
        Q = stage + nxt if cost.kind == "average" else nxt
        arg = np.argmin(Q, axis=1) if minimize else np.argmax(Q, axis=1)
        choices[j - 1] = arg
        V = Q[rows, arg]
    values = V / timing.T if cost.kind == "average" else V
    return PolicyTable(grid, timing, cost, mode_indices, values, choices, successors,
                       system_name=system.name, out_of_domain=out_of_domain)
