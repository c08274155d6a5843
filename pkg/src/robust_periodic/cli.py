"""Command-line front end.

Exit codes: 0 ok, 2 configuration or input error, 3 infeasible start node,
4 tube blow-up (zone growth or enclosure exit), 5 not certified,
6 containment violation.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import formats
from .certify import certificate_report, certify_limit_cycle
from .core import Box, Grid, Pattern, TimingConfig, as_state, representative
from .errors import DomainError, InfeasibleNode, LatticeMismatch, LeftEnclosure, ZoneGrowthExceeded
from .sim import PerturbationPlan, check_containment, default_workers, period_gap, run_ensemble
from .synth import CostSpec, dp_synthesize, evaluate_pattern
from .systems import get_system
from .tube import ZonePolicy, period_radii, propagate_tube

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_TUBE, EXIT_NOT_CERTIFIED, EXIT_CONTAINMENT = 0, 2, 3, 4, 5, 6

log = logging.getLogger("robust_periodic")


class ConfigError(Exception):
    pass


class _Exit(Exception):
    def __init__(self, code, message=""):
        super().__init__(message)
        self.code = code


# -- config -----------------------------------------------------------------

class RunConfig:
    """Parsed and validated view of a JSON config."""

    def __init__(self, raw: dict):
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        self.raw = raw
        try:
            self._parse(raw)
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"{type(exc).__name__}: {exc}") from exc

    def _parse(self, raw):
        sysc = raw.get("system")
        if not isinstance(sysc, dict) or not sysc.get("name"):
            raise ConfigError("missing system name (system.name)")
        self.system_name = sysc["name"]
        try:
            self.system = get_system(self.system_name, **dict(sysc.get("params", {})))
        except KeyError as exc:
            raise ConfigError(str(exc.args[0])) from exc
        self.z0 = as_state(sysc["z0"], self.system.n) if "z0" in sysc else self.system.domain.center

        t = raw.get("timing")
        if not isinstance(t, dict):
            raise ConfigError("missing timing section")
        self.timing = TimingConfig(float(t["tau"]), float(t["dt"]), int(t["k"]))

        g = raw.get("grid", {})
        dom = Box.from_dict(g["domain"]) if "domain" in g else self.system.domain
        self.grid = Grid(dom, int(g.get("kappa", 10)))
        self.out_of_domain = g.get("out_of_domain", "reject")
        self.mode_subset = g.get("mode_subset")

        c = raw.get("cost")
        if not isinstance(c, dict):
            raise ConfigError("missing cost section")
        self.cost = CostSpec.from_dict(c)
        if self.cost.kind == "average" and self.cost.integrand not in self.system.integrands:
            raise ConfigError(f"unknown integrand {self.cost.integrand!r}")

        p = raw.get("perturbation", {})
        self.plan = PerturbationPlan(p.get("kind", "none"), float(p.get("omega", 0.0)),
                                     int(p.get("seed", 0)), int(p.get("hold", 1)))

        tb = raw.get("tube", {})
        self.mu0 = float(tb.get("mu0", 1.0))
        self.n_periods = int(tb.get("n_periods", 4))
        self.zone = ZonePolicy(**tb.get("zone", {}))
        self.full_scan = bool(tb.get("full_scan", False))

        s = raw.get("simulate", {})
        self.n_traces = int(s.get("n_traces", 10))
        self.sim_periods = int(s.get("n_periods", self.n_periods))
        self.refinement = int(s.get("refinement", 10))
        self.tol = float(s.get("tol", 1e-9))

        o = raw.get("output", {})
        self.out_dir = Path(o.get("dir", "."))
        self.policy_rows = o.get("policy_rows", "all")
        if self.policy_rows not in ("all", "z0"):
            raise ConfigError("output.policy_rows must be 'all' or 'z0'")
        self.workers = raw.get("workers")


def _load(path) -> RunConfig:
    try:
        return RunConfig(formats.load_config(path))
    except formats.FormatError as exc:
        raise ConfigError(str(exc)) from exc


def _pattern_from_args(cfg: RunConfig, args) -> Pattern:
    if args.modes:
        try:
            modes = tuple(int(v) for v in args.modes.split(","))
        except ValueError as exc:
            raise ConfigError(f"bad --modes list {args.modes!r}") from exc
        if len(modes) != cfg.timing.k:
            raise ConfigError(f"--modes has {len(modes)} entries, timing.k is {cfg.timing.k}")
        if max(modes) >= cfg.system.n_modes or min(modes) < 0:
            raise ConfigError("--modes index out of range")
        return Pattern(modes, cfg.timing.tau)
    path = args.policy or cfg.out_dir / "policy.csv"
    try:
        pol = formats.read_policy_csv(path)
    except formats.FormatError as exc:
        raise ConfigError(str(exc)) from exc
    if pol.timing != cfg.timing:
        raise ConfigError("policy table timing differs from the config")
    if len(pol.meta.get("mode_values", [])) != cfg.system.n_modes:
        raise ConfigError("policy table mode table differs from the config")
    grid = pol.grid
    try:
        node = int(grid.index_of(representative(grid, cfg.z0)[None, :])[0])
    except DomainError as exc:
        raise ConfigError(f"z0 outside the policy grid: {exc}") from exc
    if node not in pol.patterns:
        raise ConfigError(f"policy table has no row for node {node}")
    modes = pol.pattern_at(node)
    if modes is None:
        raise _Exit(EXIT_INFEASIBLE, f"policy table marks node {node} of z0 infeasible")
    return Pattern(modes, cfg.timing.tau)


def _fmt_pattern(p: Pattern) -> str:
    return "(" + ", ".join(str(m) for m in p.modes) + ")"


# -- commands ---------------------------------------------------------------

def cmd_synthesize(args) -> int:
    cfg = _load(args.config)
    out = Path(args.out) if args.out else cfg.out_dir / "policy.csv"
    if not cfg.grid.domain.contains(cfg.z0):
        raise ConfigError("z0 lies outside the grid domain")
    table = dp_synthesize(cfg.system, cfg.grid, cfg.timing, cfg.cost,
                          mode_subset=cfg.mode_subset, out_of_domain=cfg.out_of_domain)
    node = table.node_of(cfg.z0)
    rows = args.rows or cfg.policy_rows
    formats.write_policy_csv(out, table, cfg.system, nodes=None if rows == "all" else [node])
    print(f"policy table: {out}  ({table.n_nodes} nodes, {int(np.isfinite(table.values).sum())} feasible)")
    try:
        pattern = table.pattern_for(cfg.z0)
    except InfeasibleNode as exc:
        raise _Exit(EXIT_INFEASIBLE, f"z0 {cfg.z0.tolist()}: {exc}") from exc
    cost = evaluate_pattern(cfg.system, pattern, cfg.z0, cfg.timing, cfg.cost, check_enclosure=False)
    print(f"node of z0: {node}")
    print(f"pattern: {_fmt_pattern(pattern)}")
    print(f"mode values: {[cfg.system.modes[m].tolist() for m in pattern.modes]}")
    print(f"table value: {float(table.values[node])!r}")
    print(f"cost from z0: {cost!r}")
    return EXIT_OK


def cmd_tube(args) -> int:
    cfg = _load(args.config)
    n_periods = cfg.n_periods if args.n_periods is None else args.n_periods
    if n_periods < 1:
        raise ConfigError("n_periods must be >= 1")
    pattern = _pattern_from_args(cfg, args)
    out = Path(args.out) if args.out else cfg.out_dir / "tube.csv"
    try:
        tube = propagate_tube(cfg.system, pattern, cfg.z0, cfg.mu0, cfg.plan.omega, cfg.timing,
                              n_periods, zone_policy=cfg.zone)
    except LeftEnclosure as exc:
        if exc.partial is not None:
            formats.write_tube_csv(out, exc.partial)
            print(f"partial tube ({len(exc.partial)} samples): {out}")
        kind = "zone growth exceeded" if isinstance(exc, ZoneGrowthExceeded) else "left enclosure"
        raise _Exit(EXIT_TUBE, f"tube blow-up ({kind}): {exc}") from exc
    formats.write_tube_csv(out, tube)
    K = cfg.timing.K
    print(f"tube: {out}  ({len(tube)} samples, pattern {_fmt_pattern(pattern)})")
    for p, r in enumerate(period_radii(tube, K)):
        print(f"  radius at {p}T: {float(r)!r}")
    print(f"  H violations: {int((~tube.h_ok).sum())}")
    return EXIT_OK


def cmd_certify(args) -> int:
    try:
        tube = formats.read_tube_csv(args.tube)
    except formats.FormatError as exc:
        raise ConfigError(f"malformed tube file: {exc}") from exc
    if args.K < 1:
        raise ConfigError("K must be >= 1")
    cert = certify_limit_cycle(tube, args.K, full_scan=args.full_scan)
    out = Path(args.out) if args.out else Path(args.tube).with_name("certificate.json")
    doc = formats.certificate_to_dict(cert)
    if cert.certified:
        rep = certificate_report(cert, tube)
        doc["report"] = rep.data
        formats.write_json(out, doc)
        print(rep.text)
        print(f"certificate: {out}")
        return EXIT_OK
    formats.write_json(out, doc)
    for note in cert.diagnostics:
        print("  " + note)
    print(f"not certified (K={args.K}); certificate: {out}")
    return EXIT_NOT_CERTIFIED


def cmd_simulate(args) -> int:
    cfg = _load(args.config)
    pattern = _pattern_from_args(cfg, args)
    plan = cfg.plan
    if args.omega is not None:
        plan = PerturbationPlan(plan.kind if plan.kind != "none" else "random", args.omega, plan.seed, plan.hold)
    n_traces = args.n_traces or cfg.n_traces
    if n_traces < 1 or cfg.sim_periods < 1:
        raise ConfigError("n_traces and simulate.n_periods must be >= 1")
    out_dir = Path(args.out_dir) if args.out_dir else cfg.out_dir / "traces"
    workers = args.workers or cfg.workers or default_workers()
    traces = run_ensemble(cfg.system, pattern, cfg.z0, cfg.mu0, plan, n_traces, cfg.sim_periods,
                          cfg.timing, refinement=cfg.refinement, workers=int(workers),
                          check_enclosure=False)
    seeds = np.random.SeedSequence(plan.seed).spawn(n_traces)
    manifest = {
        "system": cfg.system_name,
        "pattern": list(pattern.modes),
        "timing": cfg.timing.to_dict(),
        "mu0": cfg.mu0,
        "perturbation": {"kind": plan.kind, "omega": plan.omega, "seed": plan.seed, "hold": plan.hold},
        "traces": [],
    }
    width = max(3, len(str(n_traces - 1)))
    for b, (tr, ss) in enumerate(zip(traces, seeds)):
        name = f"trace_{b:0{width}d}.csv"
        formats.write_trace_csv(out_dir / name, tr, cfg.system)
        manifest["traces"].append({"file": name, "spawn_key": list(ss.spawn_key),
                                   "start": tr.states[0].tolist()})
    formats.write_json(out_dir / "manifest.json", manifest)
    print(f"{n_traces} traces: {out_dir}")
    if cfg.sim_periods >= 2:
        gaps = period_gap(traces[0], cfg.timing.T)
        print("  period gaps of trace 0: " + ", ".join(f"{g:.6g}" for g in gaps))
    if not args.tube:
        return EXIT_OK
    try:
        tube = formats.read_tube_csv(args.tube)
        report = check_containment(traces, tube, tol=cfg.tol)
    except (formats.FormatError, LatticeMismatch) as exc:
        raise ConfigError(str(exc)) from exc
    formats.write_json(out_dir / "containment.json", {
        "contained": report.contained,
        "worst_margin": report.worst_margin,
        "margins": report.margins.tolist(),
        "n_samples": report.n_samples,
        "violations": [{"trace": b, "sample": j, "margin": m} for b, j, m in report.violations],
    })
    print(f"  worst containment margin: {report.worst_margin!r}  ({len(report.violations)} violations)")
    return EXIT_OK if report.contained else EXIT_CONTAINMENT


def cmd_pipeline(args) -> int:
    """synthesize, tube, certify and simulate in one go; stops at the first failure."""
    cfg = _load(args.config)
    out = Path(args.out_dir) if args.out_dir else cfg.out_dir
    ns = argparse.Namespace
    policy = out / "policy.csv"
    tube = out / "tube.csv"
    code = cmd_synthesize(ns(config=args.config, out=str(policy), rows=None))
    steps = [
        lambda: cmd_tube(ns(config=args.config, policy=str(policy), modes=None, out=str(tube),
                            n_periods=None)),
        lambda: cmd_certify(ns(tube=str(tube), K=cfg.timing.K, out=str(out / "certificate.json"),
                               full_scan=cfg.full_scan)),
        lambda: cmd_simulate(ns(config=args.config, policy=str(policy), modes=None, tube=str(tube),
                                out_dir=str(out / "traces"), n_traces=None, omega=None,
                                workers=args.workers)),
    ]
    for step in steps:
        if code != EXIT_OK:
            break
        code = step()
    return code


# -- entry point ------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="robust-periodic", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    def pattern_args(p):
        g = p.add_mutually_exclusive_group()
        g.add_argument("--policy", help="policy table CSV (default: <output.dir>/policy.csv)")
        g.add_argument("--modes", help="explicit comma-separated mode indices")

    s = sub.add_parser("synthesize", help="grid DP synthesis of a pattern table")
    s.add_argument("config")
    s.add_argument("--out")
    s.add_argument("--rows", choices=("all", "z0"))
    s.add_argument("--workers", type=int)
    s.set_defaults(func=cmd_synthesize)

    s = sub.add_parser("tube", help="propagate the guaranteed tube")
    s.add_argument("config")
    pattern_args(s)
    s.add_argument("--out")
    s.add_argument("--n-periods", type=int)
    s.add_argument("--workers", type=int)
    s.set_defaults(func=cmd_tube)

    s = sub.add_parser("certify", help="search the tube for a period inclusion")
    s.add_argument("tube")
    s.add_argument("--K", type=int, required=True, help="sub-steps per period")
    s.add_argument("--out")
    s.add_argument("--full-scan", action="store_true")
    s.add_argument("--workers", type=int)
    s.set_defaults(func=cmd_certify)

    s = sub.add_parser("simulate", help="Monte Carlo ensemble and containment check")
    s.add_argument("config")
    pattern_args(s)
    s.add_argument("--tube")
    s.add_argument("--out-dir")
    s.add_argument("--n-traces", type=int)
    s.add_argument("--omega", type=float, help="override the disturbance bound")
    s.add_argument("--workers", type=int)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("pipeline", help="run all four steps")
    s.add_argument("config")
    s.add_argument("--out-dir")
    s.add_argument("--workers", type=int)
    s.set_defaults(func=cmd_pipeline)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _Exit as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
