"""Configuration-driven runner.

A run is described by a TOML file::

    seed = 7
    probe_mass = 4

    [space]
    sites = ["a", "b", "c"]

    [kernel]
    name = "polya_sum"
    z = "1/2"
    rho = 1

    [[tasks]]
    check = "J'"

    [[tasks]]
    gnz = "exact"
    n = 100000

Integers and ``"p/q"`` strings are read as exact rationals, floats stay
floats. Exit status is 0 when every task passes, 1 when some task fails
(the report is still written) and 2 for usage or configuration errors.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

from .checks import run_check
from .core import Config, Measure, SiteMap, Space, as_number, to_jsonable
from .extract import (ExtractionError, classify, extract_interaction, extract_local,
                      extract_vanishing_diagonal)
from .gnz import SUITE_VERSION, gnz_test, reports_to_csv, transform_test
from .kernels import (CATALOG, DynkinViolation, LocalReinforcement, PairDensity, describe,
                      interaction_kernel, linear_kernel, local_reinforcement_kernel,
                      poisson_kernel, polya_difference_kernel, polya_sum_kernel, remark_kernel)
from .partition import CocycleViolation, PartitionError, Truncation, partition_sum
from .samplers import METHODS, sample

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

__all__ = ["ConfigError", "RunConfig", "build_kernel", "execute", "main", "load_config"]

TASK_TYPES = ("check", "sample", "gnz", "extract", "transform", "partition", "classify")
TASK_OPTIONS = {
    "check": {"blocks", "map", "map_budget", "f_diagonal", "tol"},
    "sample": {"n", "burn_in", "thin"},
    "gnz": {"n", "burn_in", "thin", "batch_kernel"},
    "extract": {"max_n", "f_diagonal", "tol"},
    "transform": {"n", "blocks", "map", "burn_in", "thin"},
    "partition": {"B", "boundary"},
    "classify": {"expect"},
}
KERNEL_NAMES = ("poisson", "polya_sum", "polya_difference", "linear", "local_reinforcement",
                "interaction", "remark")


class ConfigError(ValueError):
    pass


def _reject_unknown(d: dict, allowed, where: str):
    extra = sorted(set(d) - set(allowed))
    if extra:
        raise ConfigError(f"unknown field(s) in {where}: {', '.join(extra)}")


@dataclass
class OutputSpec:
    path: str | None = None
    format: str = "json"


@dataclass
class RunConfig:
    kernel: dict
    space: dict = field(default_factory=dict)
    tasks: list = field(default_factory=list)
    seed: int = 0
    probe_mass: int = 4
    replicas: int = 1
    workers: int = 1
    truncation: Truncation = field(default_factory=Truncation)
    output: OutputSpec = field(default_factory=OutputSpec)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        _reject_unknown(d, {f.name for f in fields(cls)}, "config")
        if "kernel" not in d:
            raise ConfigError("config needs a [kernel] table")
        d = dict(d)
        tr = d.pop("truncation", {})
        _reject_unknown(tr, {f.name for f in fields(Truncation)}, "[truncation]")
        out = d.pop("output", {})
        _reject_unknown(out, {f.name for f in fields(OutputSpec)}, "[output]")
        _reject_unknown(d.get("space", {}), {"sites", "size"}, "[space]")
        try:
            cfg = cls(truncation=Truncation(**tr), output=OutputSpec(**out), **d)
        except (TypeError, ValueError) as e:
            raise ConfigError(str(e)) from None
        if cfg.output.format not in ("json", "csv"):
            raise ConfigError(f"output format must be json or csv, not {cfg.output.format!r}")
        for k in ("seed", "probe_mass", "replicas", "workers"):
            v = getattr(cfg, k)
            if not isinstance(v, int) or isinstance(v, bool) or v < (0 if k in ("seed", "probe_mass") else 1):
                raise ConfigError(f"{k} must be a {'nonnegative' if k in ('seed', 'probe_mass') else 'positive'} integer")
        for t in cfg.tasks:
            _task_type(t)
        return cfg

    def to_dict(self) -> dict:
        d = {"kernel": self.kernel, "space": self.space, "tasks": self.tasks, "seed": self.seed,
             "probe_mass": self.probe_mass, "replicas": self.replicas, "workers": self.workers,
             "truncation": {f.name: getattr(self.truncation, f.name) for f in fields(Truncation)},
             "output": {k: v for k, v in vars(self.output).items() if v is not None}}
        return d


def load_config(path) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except OSError as e:
        raise ConfigError(f"cannot read config: {e}") from None
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"malformed config: {e}") from None
    return RunConfig.from_dict(raw)


def _task_type(task: dict) -> str:
    if not isinstance(task, dict):
        raise ConfigError("each task must be a table")
    kinds = [k for k in TASK_TYPES if k in task]
    if len(kinds) != 1:
        raise ConfigError(f"each task needs exactly one of {', '.join(TASK_TYPES)}; got {task!r}")
    kind = kinds[0]
    _reject_unknown(task, {kind} | TASK_OPTIONS[kind], f"{kind} task")
    return kind


# kernel construction

def _space(cfg: RunConfig) -> Space | None:
    s = cfg.space
    if not s:
        return None
    if "sites" in s:
        return Space(tuple(s["sites"]))
    if "size" in s:
        return Space.of_size(int(s["size"]))
    raise ConfigError("[space] needs sites or size")


def _num(v):
    if isinstance(v, str) and v.strip().lower() in ("inf", "+inf", "infinity"):
        return math.inf
    try:
        return as_number(v)
    except (TypeError, ValueError, ZeroDivisionError):
        raise ConfigError(f"not a number: {v!r}") from None


def _site(space: Space, key):
    for s in space.sites:
        if s == key or str(s) == str(key):
            return s
    raise ConfigError(f"unknown site {key!r}")


def _per_site(space: Space, v, what: str) -> tuple:
    if isinstance(v, dict):
        out = [0] * space.size
        for k, x in v.items():
            out[space.index(_site(space, k))] = _num(x)
        return tuple(out)
    if isinstance(v, list):
        if len(v) != space.size:
            raise ConfigError(f"{what} needs {space.size} entries, got {len(v)}")
        return tuple(_num(x) for x in v)
    return tuple(_num(v) for _ in space.sites)


def _matrix(space: Space, m, what: str) -> tuple:
    if not isinstance(m, list) or len(m) != space.size:
        raise ConfigError(f"{what} must be a {space.size}x{space.size} array")
    return tuple(_per_site(space, row, what) for row in m)


def _increments(space: Space, c):
    if c is None:
        return None
    if not isinstance(c, dict):
        raise ConfigError("c must be a table keyed by site")
    out = {}
    for k, v in c.items():
        s = _site(space, k)
        out[s] = [_num(x) for x in v] if isinstance(v, list) else _num(v)
    return out


def build_kernel(spec: dict, space: Space | None):
    """Kernel from a ``[kernel]`` table; raises ConfigError or ParameterError."""
    spec = dict(spec)
    name = spec.pop("name", None)
    if name not in KERNEL_NAMES:
        raise ConfigError(f"unknown kernel {name!r}; known: {', '.join(KERNEL_NAMES)}")
    if name == "remark":
        _reject_unknown(spec, (), "[kernel]")
        k = remark_kernel()
        if space is not None and [str(s) for s in space.sites] != [str(s) for s in k.space.sites]:
            raise ConfigError("the remark kernel lives on sites [-1, 0, 1]")
        return k
    if space is None:
        raise ConfigError("config needs a [space] table")
    allowed = {"poisson": {"rho"}, "polya_sum": {"rho", "z"}, "polya_difference": {"rho", "z"},
               "linear": {"rho", "c"}, "local_reinforcement": {"rho", "c", "mass_bound"},
               "interaction": {"rho", "c", "f", "phi", "strict", "mass_bound"}}[name]
    _reject_unknown(spec, allowed, "[kernel]")
    rho = Measure(space, _per_site(space, spec.get("rho", 1), "rho"))
    if name == "poisson":
        return poisson_kernel(rho)
    if name in ("polya_sum", "polya_difference"):
        if "z" not in spec:
            raise ConfigError(f"{name} needs z")
        make = polya_sum_kernel if name == "polya_sum" else polya_difference_kernel
        return make(_num(spec["z"]), rho)
    if name == "linear":
        return linear_kernel(rho, _num(spec.get("c", 0)))
    mass_bound = int(spec.get("mass_bound", 64))
    if name == "local_reinforcement":
        return local_reinforcement_kernel(
            LocalReinforcement(rho, _increments(space, spec.get("c")), mass_bound))
    if ("f" in spec) == ("phi" in spec):
        raise ConfigError("interaction kernel needs exactly one of f or phi")
    if "f" in spec:
        f = PairDensity(space, _matrix(space, spec["f"], "f"))
    else:
        phi = tuple(tuple(float(v) for v in row) for row in _matrix(space, spec["phi"], "phi"))
        f = PairDensity.from_potential(space, phi)
    return interaction_kernel(rho, f, _increments(space, spec.get("c")),
                              strict=bool(spec.get("strict", True)), mass_bound=mass_bound)


def _site_map(space: Space, task: dict) -> SiteMap:
    if "blocks" in task:
        return SiteMap.from_blocks(space, [[_site(space, s) for s in b] for b in task["blocks"]])
    if "map" in task:
        return SiteMap.from_dict(space, {_site(space, k): v for k, v in task["map"].items()})
    raise ConfigError("this task needs blocks or map")


# task execution

def _run_task(i: int, task: dict, pi, cfg: RunConfig, out_dir: Path | None, fmt: str) -> dict:
    kind = _task_type(task)
    arg = task[kind]
    space = pi.space
    seed, pm = cfg.seed, cfg.probe_mass
    common = dict(replicas=cfg.replicas, workers=cfg.workers, truncation=cfg.truncation)
    chain = {k: task[k] for k in ("burn_in", "thin") if k in task}
    rec = {"task": kind, "arg": arg}

    if kind == "check":
        kw = {}
        if arg == "D":
            kw["G"] = _site_map(space, task)
        if arg == "A6":
            kw["f_diagonal"] = _per_site(space, task["f_diagonal"], "f_diagonal")
        if "map_budget" in task:
            kw["map_budget"] = int(task["map_budget"])
        rep = run_check(pi, arg, pm, float(task.get("tol", 1e-9)), **kw)
        rec.update(passed=rep.passed, report=rep.to_dict())
    elif kind == "sample":
        if arg not in METHODS:
            raise ConfigError(f"unknown sampler {arg!r}")
        batch = sample(pi, arg, int(task.get("n", 10_000)), seed, **common, **chain)
        rec.update(passed=True, report=batch.to_dict())
        rec["report"]["marginals"] = {str(s): batch.marginal(s) for s in space.sites}
        if out_dir is not None and fmt == "csv":
            name = f"task{i:02d}_samples.csv"
            (out_dir / name).write_text(batch.to_csv())
            rec["csv"] = name
    elif kind == "gnz":
        if arg not in METHODS:
            raise ConfigError(f"unknown sampler {arg!r}")
        n = int(task.get("n", 10_000))
        batch = None
        if "batch_kernel" in task:
            # draws from another kernel tested against this one
            other = build_kernel(task["batch_kernel"], space)
            batch = sample(other, arg, n, seed, **common, **chain)
        elif chain:
            batch = sample(pi, arg, n, seed, **common, **chain)
        reps = gnz_test(pi, arg, None, n, seed, batch=batch, **common)
        rec.update(passed=all(r.passed for r in reps), suite_version=SUITE_VERSION,
                   report=[r.to_dict() for r in reps])
        if out_dir is not None and fmt == "csv":
            name = f"task{i:02d}_gnz.csv"
            (out_dir / name).write_text(reports_to_csv(reps))
            rec["csv"] = name
    elif kind == "extract":
        max_n = int(task.get("max_n", 6))
        tol = float(task.get("tol", 1e-9))
        try:
            if arg == "local":
                dec = extract_local(pi, max_n, pm, tol)
            elif arg in ("interaction", "interaction_positive_diagonal"):
                if "f_diagonal" not in task:
                    raise ConfigError("extract = 'interaction' needs f_diagonal")
                diag = _per_site(space, task["f_diagonal"], "f_diagonal")
                dec = extract_interaction(pi, diag, max_n, pm, tol)
            elif arg in ("vanishing_diagonal", "interaction_vanishing_diagonal"):
                dec = extract_vanishing_diagonal(pi, max_n, pm, tol)
            else:
                raise ConfigError(f"unknown extraction regime {arg!r}")
            rec.update(passed=True, report=dec.to_dict())
        except ExtractionError as e:
            rec.update(passed=False, error=str(e), witness=to_jsonable(e.witness))
    elif kind == "transform":
        if arg not in METHODS:
            raise ConfigError(f"unknown sampler {arg!r}")
        G = _site_map(space, task)
        try:
            reps, target, pushed = transform_test(pi, G, arg, None, int(task.get("n", 10_000)),
                                                  seed, probe_mass=pm, **common)
            rec.update(passed=all(r.passed for r in reps), map=G.as_dict(),
                       report=[r.to_dict() for r in reps],
                       marginals={str(s): pushed.marginal(s) for s in G.target.sites})
        except DynkinViolation as e:
            rec.update(passed=False, error=str(e), witness=e.witness)
    elif kind == "partition":
        B = [_site(space, s) for s in task.get("B", list(space.sites))]
        boundary = Config.from_dict(space, {_site(space, k): int(v)
                                            for k, v in task.get("boundary", {}).items()})
        ps = partition_sum(pi, boundary, B, cfg.truncation)
        rec.update(passed=ps.converged, report={
            "value": ps.value, "tail_bound": ps.tail_bound, "converged": ps.converged,
            "truncation_mass": ps.truncation_mass, "certified": ps.certified,
            "warning": ps.warning})
    elif kind == "classify":
        c = classify(pi, pm)
        ok = "expect" not in task or task["expect"] == c.kind
        rec.update(passed=ok, report=c.to_dict())
    return to_jsonable(rec)


def execute(cfg: RunConfig, out_dir=None, fmt: str | None = None, only: str | None = None):
    """Run the tasks and return ``(exit_status, report_dict)``; writes files if ``out_dir``."""
    fmt = fmt or cfg.output.format
    out = Path(out_dir) if out_dir is not None else (
        Path(cfg.output.path) if cfg.output.path else None)
    pi = build_kernel(cfg.kernel, _space(cfg))
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    tasks = [t for t in cfg.tasks if only is None or _task_type(t) == only]
    results = []
    for i, t in enumerate(tasks):
        try:
            results.append(_run_task(i, t, pi, cfg, out, fmt))
        except (CocycleViolation, PartitionError) as e:
            results.append(to_jsonable({"task": _task_type(t), "arg": t[_task_type(t)],
                                        "passed": False, "error": str(e),
                                        "witness": getattr(e, "witness", None)}))
    passed = all(r["passed"] for r in results)
    cfg_echo = cfg.to_dict()
    cfg_echo.pop("workers")  # reports must not depend on the thread count
    report = {"config": to_jsonable(cfg_echo), "kernel": pi.name, "passed": passed,
              "tasks": results}
    if out is not None:
        (out / "report.json").write_text(dumps(report))
    return (0 if passed else 1), report


def dumps(report: dict) -> str:
    return json.dumps(to_jsonable(report), sort_keys=True, indent=1) + "\n"


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="papangelou", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", required=True, help="TOML run configuration")
        sp.add_argument("--seed", type=int, help="override the config seed")
        sp.add_argument("--out", help="output directory for report.json and CSV dumps")
        sp.add_argument("--format", choices=("json", "csv"))
        sp.add_argument("--probe-mass", type=int)
        sp.add_argument("--replicas", type=int)
        sp.add_argument("--workers", type=int, help="threads; never changes the results")
        return sp

    common(sub.add_parser("run", help="run every task in the config"))
    common(sub.add_parser("check", help="postulate checks")).add_argument(
        "--property", help="check this property instead of the config's check tasks")
    for name in ("sample", "gnz", "transform"):
        sp = common(sub.add_parser(name, help=f"{name} tasks"))
        sp.add_argument("--method", choices=METHODS)
        sp.add_argument("--n", type=int)
        if name == "transform":
            sp.add_argument("--blocks", help="blocks like 'a+b,c'")
    common(sub.add_parser("extract", help="structural extraction")).add_argument(
        "--regime", choices=("local", "interaction", "vanishing_diagonal"))
    d = sub.add_parser("describe", help="catalog entry for a kernel family")
    d.add_argument("kernel")
    return p


def _override_task(args) -> dict | None:
    c = args.command
    if c == "check" and args.property:
        return {"check": args.property}
    if c in ("sample", "gnz", "transform") and args.method:
        t = {c: args.method}
        if args.n:
            t["n"] = args.n
        if c == "transform":
            if not args.blocks:
                raise ConfigError("--blocks is required with --method for transform")
            t["blocks"] = [b.split("+") for b in args.blocks.split(",")]
        return t
    if c == "extract" and args.regime:
        return {"extract": args.regime}
    return None


def _inherit(override: dict, kind: str, tasks: list) -> dict:
    """Fill options the flags did not set from the first config task of the same type."""
    for t in tasks:
        if isinstance(t, dict) and kind in t:
            base = {k: v for k, v in t.items() if k != kind}
            if kind == "transform" and "blocks" in override:
                base.pop("map", None)
            return {**base, **override}
    return override


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "describe":
        if args.kernel not in CATALOG:
            print(f"error: unknown kernel {args.kernel!r}; known: {', '.join(CATALOG)}",
                  file=sys.stderr)
            return 2
        print(describe(args.kernel))
        return 0
    try:
        cfg = load_config(args.config)
        for k in ("seed", "probe_mass", "replicas", "workers"):
            v = getattr(args, k)
            if v is not None:
                setattr(cfg, k, v)
        if args.probe_mass is not None and args.probe_mass < 0:
            raise ConfigError("--probe-mass must be >= 0")
        if (args.replicas is not None and args.replicas < 1) or (
                args.workers is not None and args.workers < 1):
            raise ConfigError("--replicas and --workers must be >= 1")
        only = None if args.command == "run" else args.command
        override = _override_task(args)
        if override is not None:
            kind = _task_type(override)
            cfg.tasks = [_inherit(override, kind, cfg.tasks)]
        status, report = execute(cfg, args.out, args.format, only)
    except (ConfigError, ValueError, KeyError, TypeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    if args.out is None and cfg.output.path is None:
        sys.stdout.write(dumps(report))
    else:
        for t in report["tasks"]:
            print(f"{t['task']:10s} {str(t['arg']):24s} {'pass' if t['passed'] else 'FAIL'}")
    return status


if __name__ == "__main__":
    sys.exit(main())
