"""On-disk formats: tube/trace/policy CSV files, certificate and report JSON, configs.

Floats are written with ``repr`` (shortest round-trip decimal).  CSV files
may begin with one ``# {...}`` line holding JSON metadata.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .core import Ball, Box, Certificate, Grid, TimingConfig, Tube


class FormatError(ValueError):
    pass


def fmt(x) -> str:
    return repr(float(x))


def _write_csv(path, meta, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        if meta is not None:
            fh.write("# " + json.dumps(meta, sort_keys=True) + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _read_csv(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise FormatError(str(exc)) from exc
    meta = None
    lines = text.splitlines()
    if lines and lines[0].startswith("#"):
        try:
            meta = json.loads(lines[0][1:].strip())
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: bad metadata line") from exc
        lines = lines[1:]
    rows = list(csv.reader(io.StringIO("\n".join(lines))))
    if not rows:
        raise FormatError(f"{path}: no header row")
    return meta, rows[0], rows[1:]


# -- tube -------------------------------------------------------------------

def write_tube_csv(path, tube: Tube) -> None:
    n = tube.centers.shape[1]
    header = ["t"] + [f"c_{i + 1}" for i in range(n)] + ["radius", "lambda_local", "gamma_local", "H_ok"]
    rows = []
    times = tube.times
    for j in range(len(tube)):
        row = [fmt(times[j])] + [fmt(v) for v in tube.centers[j]] + [fmt(tube.radii[j])]
        if j == 0:
            row += ["", "", ""]
        else:
            row += [fmt(tube.lambdas[j - 1]), fmt(tube.gammas[j - 1]), "1" if tube.h_ok[j - 1] else "0"]
        rows.append(row)
    _write_csv(path, {"kind": "tube", "t0": tube.t0, "dt": tube.dt, "n": n}, header, rows)


def read_tube_csv(path) -> Tube:
    meta, header, rows = _read_csv(path)
    if len(header) < 6 or header[0] != "t" or header[-4:] != ["radius", "lambda_local", "gamma_local", "H_ok"]:
        raise FormatError(f"{path}: not a tube file (header {header})")
    n = len(header) - 5
    if len(rows) < 1:
        raise FormatError(f"{path}: tube has no rows")
    try:
        t = np.array([float(r[0]) for r in rows])
        centers = np.array([[float(v) for v in r[1:1 + n]] for r in rows])
        radii = np.array([float(r[1 + n]) for r in rows])
        lam = np.array([float(r[2 + n]) for r in rows[1:]])
        gam = np.array([float(r[3 + n]) for r in rows[1:]])
        h_ok = np.array([r[4 + n].strip() == "1" for r in rows[1:]], dtype=bool)
    except (ValueError, IndexError) as exc:
        raise FormatError(f"{path}: malformed tube row ({exc})") from exc
    if meta and "dt" in meta:
        dt, t0 = float(meta["dt"]), float(meta.get("t0", t[0]))
    elif len(t) > 1:
        dt, t0 = (t[-1] - t[0]) / (len(t) - 1), t[0]
    else:
        raise FormatError(f"{path}: cannot infer dt")
    try:
        return Tube(t0, dt, centers, radii, lam, gam, h_ok)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc


# -- traces -----------------------------------------------------------------

def write_trace_csv(path, trace, system) -> None:
    n = trace.states.shape[1]
    m = system.modes.shape[1]
    d = system.d
    has_w = trace.perturbations.size > 0
    mode_cols = ["mode_value"] if m == 1 else [f"mode_value_{i + 1}" for i in range(m)]
    header = ["t"] + [f"y_{i + 1}" for i in range(n)] + mode_cols + [f"w_{i + 1}" for i in range(d)]
    rows = []
    N = len(trace.times) - 1
    for j in range(N + 1):
        row = [fmt(trace.times[j])] + [fmt(v) for v in trace.states[j]]
        if j < N:
            row += [fmt(v) for v in system.modes[trace.mode_ids[j]]]
            row += [fmt(v) for v in trace.perturbations[j]] if has_w else ["0.0"] * d
        else:
            row += [""] * (m + d)
        rows.append(row)
    _write_csv(path, None, header, rows)


def read_trace_states(path):
    """Times and states of a trace CSV."""
    _, header, rows = _read_csv(path)
    n = sum(1 for h in header if h.startswith("y_"))
    t = np.array([float(r[0]) for r in rows])
    y = np.array([[float(v) for v in r[1:1 + n]] for r in rows])
    return t, y


# -- policy table -----------------------------------------------------------

def write_policy_csv(path, table, system, nodes=None) -> None:
    nodes = np.arange(table.n_nodes) if nodes is None else np.asarray(nodes, dtype=int)
    costs = table.achieved_costs(system, nodes)
    meta = {
        "kind": "policy",
        "system": table.system_name,
        "grid": table.grid.to_dict(),
        "timing": table.timing.to_dict(),
        "cost": table.cost.to_dict(),
        "mode_indices": [int(m) for m in table.mode_indices],
        "mode_values": system.modes.tolist(),
        "out_of_domain": table.out_of_domain,
    }
    k = table.timing.k
    header = ["node_index", "cost"] + [f"u_{i + 1}" for i in range(k)]
    rows = []
    for z, c in zip(nodes, costs):
        p = table.pattern(int(z))
        mods = [str(m) for m in p.modes] if p is not None else ["-1"] * k
        rows.append([str(int(z)), fmt(c)] + mods)
    _write_csv(path, meta, header, rows)


@dataclass
class PolicyFile:
    meta: dict
    costs: dict
    patterns: dict

    @property
    def grid(self) -> Grid:
        return Grid.from_dict(self.meta["grid"])

    @property
    def timing(self) -> TimingConfig:
        return TimingConfig.from_dict(self.meta["timing"])

    def pattern_at(self, node: int):
        return self.patterns.get(int(node))


def read_policy_csv(path) -> PolicyFile:
    meta, header, rows = _read_csv(path)
    if not meta or meta.get("kind") != "policy" or header[:2] != ["node_index", "cost"]:
        raise FormatError(f"{path}: not a policy table")
    costs, patterns = {}, {}
    try:
        for r in rows:
            z = int(r[0])
            costs[z] = float(r[1])
            mods = tuple(int(v) for v in r[2:])
            patterns[z] = None if any(m < 0 for m in mods) else mods
    except (ValueError, IndexError) as exc:
        raise FormatError(f"{path}: malformed row ({exc})") from exc
    return PolicyFile(meta, costs, patterns)


# -- certificates -----------------------------------------------------------

def certificate_to_dict(cert: Certificate) -> dict:
    d = {
        "status": cert.status,
        "i": cert.witness_i,
        "K": cert.K,
        "dt": cert.dt,
        "ball_outer": cert.ball_outer.to_dict() if cert.ball_outer else None,
        "ball_inner": cert.ball_inner.to_dict() if cert.ball_inner else None,
        "lambda_sum": cert.lambda_sum,
        "H_violations": cert.h_violations,
        "envelope": cert.envelope.to_dict() if cert.envelope else None,
        "diagnostics": list(cert.diagnostics),
    }
    if cert.window is not None:
        d["window"] = [b.to_dict() for b in cert.window]
    return d


def certificate_from_dict(d: dict) -> Certificate:
    def ball(x):
        return None if x is None else Ball(np.array(x["center"]), x["radius"])

    return Certificate(
        status=d["status"], K=int(d["K"]), dt=float(d["dt"]), witness_i=d.get("i"),
        ball_outer=ball(d.get("ball_outer")), ball_inner=ball(d.get("ball_inner")),
        lambda_sum=d.get("lambda_sum"), h_violations=int(d.get("H_violations", 0)),
        envelope=None if d.get("envelope") is None else Box.from_dict(d["envelope"]),
        window=None if "window" not in d else [ball(b) for b in d["window"]],
        diagnostics=tuple(d.get("diagnostics", ())),
    )


def write_json(path, data) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


# -- configs ----------------------------------------------------------------

BUILTIN_CONFIGS = ("bioreactor_full", "bioreactor_desk", "linear2d_demo")


def load_config(source) -> dict:
    """Read a JSON config from a path, or a built-in config by name."""
    p = Path(source)
    try:
        if p.exists():
            return json.loads(p.read_text())
        name = str(source)
        if name in BUILTIN_CONFIGS:
            return json.loads(resources.files("robust_periodic").joinpath("configs", name + ".json").read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{source}: invalid JSON ({exc})") from exc
    raise FormatError(f"config {source!r} not found")
