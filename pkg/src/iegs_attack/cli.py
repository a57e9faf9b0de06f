"""Command-line front end.

Exit codes: 0 ok, 1 input error, 2 not converged, 3 oracle cap exceeded.
Flag values override the instance file, which overrides built-in defaults.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import io
import itertools
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .instance import (
    IEGSInstance,
    InstanceParseError,
    InstanceValidationError,
    NetworkError,
    build_ptdf,
    load_instance,
    validate,
)

EXIT_OK, EXIT_INPUT, EXIT_NOT_CONVERGED, EXIT_CAP = 0, 1, 2, 3
COMPARE_METHODS = ("M-R&D", "fixed-commitment", "U-R&D", "oracle")


class InputError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    instance: Path | None = None
    tau_p: float | None = None
    tau_g: float | None = None
    segments: int | None = None
    rho: float | None = None
    big_m: float | None = None
    epsilon: float | None = None
    max_iter: int | None = None
    budget: int | None = None
    violation_block: bool = False
    out: Path = Path(".")
    seed: int = 0
    backend: str = "bundled"
    timings: bool = False
    extra: dict = field(default_factory=dict)

    def check(self) -> None:
        for name in ("rho", "big_m", "epsilon"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise InputError(f"--{name.replace('_', '-')} must be positive, got {v}")
        for name in ("tau_p", "tau_g"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise InputError(f"--{name.replace('_', '-')} must be >= 0, got {v}")
        if self.max_iter is not None and self.max_iter <= 0:
            raise InputError("--max-iter must be positive")
        if self.budget is not None and self.budget < 0:
            raise InputError("--budget must be >= 0")
        if self.instance is not None and not Path(self.instance).exists():
            raise InputError(f"instance file not found: {self.instance}")

    def params(self):
        from .bilevel import RDParams

        kw = {"backend": self.backend}
        for name in ("rho", "big_m", "epsilon", "max_iter"):
            v = getattr(self, name)
            if v is not None:
                kw[name] = v
        return RDParams(**kw)

    def load(self) -> IEGSInstance:
        inst = load_instance(Path(self.instance))
        return self.apply(inst)

    def apply(self, inst: IEGSInstance) -> IEGSInstance:
        changes = {}
        if self.tau_p is not None:
            changes["tau_p"] = self.tau_p
        if self.tau_g is not None:
            changes["tau_g"] = self.tau_g
        if self.budget is not None:
            changes["budget"] = self.budget
        if changes:
            inst = inst.with_attack(**changes)
        if self.segments is not None:
            inst = inst.with_segments(self.segments)
        problems = validate(inst)
        if problems:
            raise InstanceValidationError(problems)
        return inst


# ---------------------------------------------------------------------------
# output helpers


def write_csv(path: Path | None, header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_cell(v) for v in r])
    text = buf.getvalue()
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    return text


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if not np.isfinite(v):
            return "nan" if np.isnan(v) else ("inf" if v > 0 else "-inf")
        return f"{0.0 if abs(v) < 5e-13 else v:.10g}"
    return str(v)


def schema() -> dict:
    from importlib.resources import files

    return json.loads(files("iegs_attack").joinpath("report.schema.json").read_text())


def _compact(cfg: RunConfig, inst: IEGSInstance):
    from .milp.compact import compact_for

    return compact_for(inst, violation=cfg.violation_block, budget=inst.attack.budget)


def _attack_rows(inst: IEGSInstance, x) -> list[tuple]:
    from .stealth import AttackVector, derive_falsified

    av = AttackVector.from_x(inst, x)
    rows = [("load", f"dp[{d.id}]", v) for d, v in zip(inst.power.loads, av.dp)]
    rows += [("load", f"dg[{d.id}]", v) for d, v in zip(inst.gas.loads, av.dg)]
    fm = derive_falsified(inst, av, build_ptdf(inst.power))
    rows += [("derived", f"dp_line[{l.id}]", v) for l, v in zip(inst.power.lines, fm.dp_lines)]
    rows += [("derived", f"dg_pipe[{p.id}]", v) for p, v in zip(inst.gas.pipelines, fm.dg_pipes)]
    rows += [("derived", f"dg_compressor[{c.id}]", v) for c, v in zip(inst.gas.compressors, fm.dg_compressors)]
    rows += [("derived", f"dpi[{n.id}]", v) for n, v in zip(inst.gas.nodes, fm.dpi)]
    return rows


# ---------------------------------------------------------------------------
# commands


def cmd_solve(cfg: RunConfig) -> int:
    from .bilevel import solve_om
    from .oracle import evaluate_realized_cost

    inst = cfg.load()
    compact = _compact(cfg, inst)
    rep = solve_om(compact, cfg.params())
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "iterations.csv").write_text(rep.iterations_csv(cfg.timings))
    attack = _attack_rows(inst, rep.x)
    write_csv(out / "attack.csv", ("kind", "measurement", "delta"), attack)
    disp = []
    if rep.z is not None:
        disp += [("z", n, v) for n, v in zip(rep.z_names, rep.z)]
        disp += [("y", n, v) for n, v in zip(rep.y_names, rep.y)]
    write_csv(out / "dispatch.csv", ("kind", "variable", "value"), disp)
    doc = rep.to_dict(cfg.timings)
    doc["instance"] = inst.name
    doc["params"] = {k: v for k, v in cfg.params().__dict__.items()}
    doc["falsified_measurements"] = {m: float(v) for k, m, v in attack if k == "derived"}
    rc = evaluate_realized_cost(inst, rep.x)
    doc["realized"] = {
        "policy": "fix-commitment-redispatch",
        "falsified_cost": _finite(rc.falsified_cost) if rc.falsified.feasible else None,
        "realized_cost": _finite(rc.realized_cost) if rc.realized.feasible else None,
    }
    doc["metadata"] = {"version": __version__}
    if cfg.timings:
        doc["metadata"]["generated_at"] = _dt.datetime.now(_dt.timezone.utc).isoformat()
    (out / "report.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    print(f"{rep.method}: status {rep.status}, objective {rep.objective:.10g}, iterations {rep.iterations}")
    return EXIT_OK if rep.converged else EXIT_NOT_CONVERGED


def _finite(v):
    v = float(v)
    return v if np.isfinite(v) else None


def compare_rows(inst: IEGSInstance, cfg: RunConfig, points: int = 101) -> tuple[list[str], list[list]]:
    from .bilevel import solve_model4, solve_om, solve_urd
    from .oracle import brute_force_bilevel

    compact = _compact(cfg, inst)
    params = cfg.params()
    loads = [f"dp[{d.id}]" for d in inst.power.loads] + [f"dg[{d.id}]" for d in inst.gas.loads]
    header = ["method", "objective", "iterations", "status"] + (["seconds"] if cfg.timings else []) + loads
    rows = []
    for fn in (solve_om, solve_model4, solve_urd):
        rep = fn(compact, params)
        row = [rep.method, rep.objective, rep.iterations, rep.status] + ([rep.seconds] if cfg.timings else [])
        rows.append(row + list(rep.x))
    bf = brute_force_bilevel(inst, points=points)
    row = ["oracle", bf.value, bf.evaluations, "searched"] + ([bf.seconds] if cfg.timings else [])
    rows.append(row + list(bf.x))
    return header, rows


def cmd_compare(cfg: RunConfig) -> int:
    inst = cfg.load()
    header, rows = compare_rows(inst, cfg, cfg.extra.get("points", 101))
    text = write_csv(Path(cfg.out) / "compare.csv", header, rows)
    sys.stdout.write(text)
    return EXIT_OK if all(r[3] in ("converged", "searched") for r in rows[:2] + rows[3:]) else EXIT_NOT_CONVERGED


def cmd_classify_z(cfg: RunConfig) -> int:
    from .bilevel import solve_sp2
    from .oracle import classify_z

    inst = cfg.load()
    cls = classify_z(inst)
    compact = _compact(cfg, inst)
    params = cfg.params()
    rows = []
    for z, feas, wit in zip(cls.z, cls.feasible, cls.witness):
        sp2 = solve_sp2(compact, z, params)
        rows.append(
            [
                "".join(map(str, z)),
                "mu" if feas else "nu",
                sp2.value,
                "mu" if sp2.feasible_everywhere else "nu",
                "" if wit is None else " ".join(_cell(v) for v in wit),
            ]
        )
    text = write_csv(Path(cfg.out) / "classify-z.csv", ("z", "oracle", "gamma_f", "sp2", "witness"), rows)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_oracle(cfg: RunConfig) -> int:
    from .oracle import brute_force_bilevel, classify_z

    inst = cfg.load()
    cls = classify_z(inst)
    out = Path(cfg.out)
    write_csv(
        out / "oracle-classification.csv",
        ("z", "membership", "witness"),
        [
            ("".join(map(str, z)), "mu" if f else "nu", "" if w is None else " ".join(_cell(v) for v in w))
            for z, f, w in zip(cls.z, cls.feasible, cls.witness)
        ],
    )
    bf = brute_force_bilevel(inst, points=cfg.extra.get("points", 421), jobs=cfg.extra.get("jobs", 1))
    names = [f"dp[{d.id}]" for d in inst.power.loads] + [f"dg[{d.id}]" for d in inst.gas.loads]
    write_csv(out / "oracle-trace.csv", [*names, "value"], [[*x, v] for x, v in bf.trace])
    print(f"oracle: value {bf.value:.10g} at {' '.join(_cell(v) for v in bf.x)} ({bf.evaluations} evaluations)")
    return EXIT_OK


def cmd_pwl_report(cfg: RunConfig) -> int:
    from .pwl import build_scheme, report_rows

    limit = cfg.extra.get("limit")
    segments = cfg.segments
    weymouth_c = cfg.extra.get("weymouth", 1.0)
    if limit is None or segments is None:
        if cfg.instance is None:
            raise InputError("pwl-report needs --limit and --segments, or an instance file")
        inst = cfg.load()
        pipes = inst.gas.pipelines
        if not pipes:
            raise InputError("instance has no pipelines")
        limit = pipes[0].limit if limit is None else limit
        weymouth_c = pipes[0].weymouth
        segments = inst.segments if segments is None else segments
    try:
        scheme = build_scheme(limit, segments)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    rows = report_rows(scheme, weymouth_c)
    header = ("segment", "left", "right", "slope", "max_error", "max_pressure_error", "breakpoint_error")
    text = write_csv(Path(cfg.out) / "pwl-report.csv", header, [[r[h] for h in header] for r in rows])
    sys.stdout.write(text)
    return EXIT_OK


def cmd_validate(cfg: RunConfig) -> int:
    inst = cfg.load()
    print(f"{inst.name}: ok ({len(inst.power.nodes)} buses, {len(inst.gas.nodes)} gas nodes, "
          f"{inst.n_attack} attackable loads)")
    return EXIT_OK


def _sweep_cell(args):
    inst, cfg, tau_p, tau_g, load, limit = args
    from .bilevel import solve_model4, solve_om

    cell = inst.with_attack(tau_p=tau_p, tau_g=tau_g).scaled(load, limit)
    compact = _compact(cfg, cell)
    out = []
    for fn in (solve_om, solve_model4):
        rep = fn(compact, cfg.params())
        out.append([tau_p, tau_g, load, limit, rep.method, rep.objective, rep.iterations, rep.status])
    return out


def cmd_sweep(cfg: RunConfig) -> int:
    inst = cfg.load()
    ex = cfg.extra
    taus_p = ex.get("tau_p_list") or [inst.attack.tau_p]
    taus_g = ex.get("tau_g_list") or [inst.attack.tau_g]
    loads = ex.get("load_scale") or [1.0]
    limits = ex.get("limit_scale") or [1.0]
    cells = [(inst, cfg, a, b, c, d) for a, b, c, d in itertools.product(taus_p, taus_g, loads, limits)]
    jobs = ex.get("jobs", 1)
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            results = list(pool.map(_sweep_cell, cells))
    else:
        results = [_sweep_cell(c) for c in cells]
    rows = [r for cell in results for r in cell]
    header = ("tau_p", "tau_g", "load_scale", "limit_scale", "method", "objective", "iterations", "status")
    text = write_csv(Path(cfg.out) / "sweep.csv", header, rows)
    sys.stdout.write(text)
    return EXIT_OK if all(r[7] == "converged" for r in rows) else EXIT_NOT_CONVERGED


COMMANDS = {
    "solve": cmd_solve,
    "compare": cmd_compare,
    "classify-z": cmd_classify_z,
    "oracle": cmd_oracle,
    "pwl-report": cmd_pwl_report,
    "validate": cmd_validate,
    "sweep": cmd_sweep,
}


# ---------------------------------------------------------------------------
# argument parsing


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _common(p: argparse.ArgumentParser, instance_required: bool = True) -> None:
    if instance_required:
        p.add_argument("instance", type=Path, help="instance JSON file")
    else:
        p.add_argument("instance", type=Path, nargs="?", help="instance JSON file")
    p.add_argument("--tau-p", type=float, help="power load attack bound (fraction of demand)")
    p.add_argument("--tau-g", type=float, help="gas load attack bound (fraction of demand)")
    p.add_argument("--segments", type=int, help="PWL segments per pipeline (even)")
    p.add_argument("--rho", type=float, help="penalty for relaxed commitment blocks")
    p.add_argument("--big-m", type=float, help="big-M floor")
    p.add_argument("--epsilon", type=float, help="convergence threshold")
    p.add_argument("--max-iter", type=int, help="iteration cap")
    p.add_argument("--budget", type=int, help="attack budget (measurement count)")
    p.add_argument("--violation-block", action="store_true", help="forbid estimated-state limit violations")
    p.add_argument("--out", type=Path, default=Path("."), help="output directory")
    p.add_argument("--seed", type=int, default=0, help="seed for randomized steps")
    p.add_argument("--backend", choices=("bundled", "highs"), default="bundled")
    p.add_argument("--timings", action="store_true", help="include wall times in outputs")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="iegs-attack", description="Worst-case load redistribution attacks on coupled power-gas systems.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("solve", "classify-z", "validate"):
        _common(sub.add_parser(name))
    for name in ("compare", "oracle"):
        p = sub.add_parser(name)
        _common(p)
        p.add_argument("--points", type=int, help="grid points per free dimension for the oracle search")
        p.add_argument("--jobs", type=int, default=1)
    p = sub.add_parser("pwl-report")
    _common(p, instance_required=False)
    p.add_argument("--limit", type=float, help="pipeline flow limit")
    p.add_argument("--weymouth", type=float, help="Weymouth constant (pressure error scaling)")
    p = sub.add_parser("sweep")
    _common(p)
    p.add_argument("--tau-p-list", type=_floats, help="comma-separated power attack bounds")
    p.add_argument("--tau-g-list", type=_floats, help="comma-separated gas attack bounds")
    p.add_argument("--load-scale", type=_floats, help="comma-separated load multipliers")
    p.add_argument("--limit-scale", type=_floats, help="comma-separated limit multipliers")
    p.add_argument("--jobs", type=int, default=1)
    return ap


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    extra = {}
    for key in ("points", "jobs", "limit", "weymouth", "tau_p_list", "tau_g_list", "load_scale", "limit_scale"):
        v = getattr(ns, key, None)
        if v is not None:
            extra[key] = v
    return RunConfig(
        command=ns.command,
        instance=ns.instance,
        tau_p=ns.tau_p,
        tau_g=ns.tau_g,
        segments=ns.segments,
        rho=ns.rho,
        big_m=ns.big_m,
        epsilon=ns.epsilon,
        max_iter=ns.max_iter,
        budget=ns.budget,
        violation_block=ns.violation_block,
        out=ns.out,
        seed=ns.seed,
        backend=ns.backend,
        timings=ns.timings,
        extra=extra,
    )


def main(argv=None) -> int:
    from .bilevel import CapError, RDError
    from .oracle import OracleCapError
    from .stealth import StealthError

    ns = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(ns)
        cfg.check()
        np.random.seed(cfg.seed)
        return COMMANDS[cfg.command](cfg)
    except (OracleCapError, CapError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAP
    except InstanceValidationError as exc:
        print("error: invalid instance:", file=sys.stderr)
        for d in exc.diagnostics:
            print(f"  {d}", file=sys.stderr)
        return EXIT_INPUT
    except (InputError, InstanceParseError, NetworkError, StealthError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except RDError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED


if __name__ == "__main__":
    sys.exit(main())
