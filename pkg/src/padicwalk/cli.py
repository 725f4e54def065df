"""Command line front end.

Every subcommand is a deterministic function of its ``RunConfig``; output goes
to ``--out`` (or stdout) as CSV or JSON.  Exit codes: 0 success, 1 assertion
failure, 2 configuration or precondition error.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional

from . import kernel, walk
from .convergence import run_convergence
from .core import DomainError, Params, PreconditionError
from .emit import csv_table, to_json
from .oracles import phi_dft_oracle
from .selftest import FAULTS, run_selftest

DEFAULT_SEED = 20240601
EXIT_OK, EXIT_ASSERT, EXIT_CONFIG = 0, 1, 2


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    p: int = 2
    m: Optional[int] = None
    m_range: Optional[tuple] = None
    b: Fraction = Fraction(1)
    D: Fraction = Fraction(1)
    times: Optional[list] = None
    steps: Optional[list] = None
    r: Optional[list] = None
    s: Optional[list] = None
    seed: int = DEFAULT_SEED
    samples: int = 100_000
    tol: float = 1e-12
    out: Optional[str] = None
    format: str = "csv"
    literal_symbol: bool = False
    workers: int = 1
    bound: str = "printed"
    strict: bool = False
    inject_fault: Optional[str] = None
    warnings: list = field(default_factory=list)

    def params(self, m: Optional[int] = None) -> Params:
        level = m if m is not None else self.m
        if level is None:
            raise ConfigError("--m is required")
        try:
            return Params(self.p, level, self.b, self.D)
        except (DomainError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    def record(self) -> dict:
        """The config as it appears in JSON output (no output path)."""
        d = asdict(self)
        d.pop("out")
        d.pop("warnings")
        return d


# -- parsing ---------------------------------------------------------------------

def parse_rational(text: str, what: str, warnings: list | None = None) -> Fraction:
    text = text.strip()
    try:
        value = Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"{what}: cannot parse {text!r} as a rational") from exc
    if any(c in text for c in ".eE") and warnings is not None:
        warnings.append(f"{what} {text!r} read as the exact decimal {value}; floor(t*lambda) "
                        "is sensitive near step boundaries, prefer num/den")
    return value


def _list(text: Optional[str], conv):
    if text is None:
        return None
    items = [x for x in text.split(",") if x.strip()]
    if not items:
        raise ConfigError(f"empty grid {text!r}")
    return [conv(x) for x in items]


def _int(text: str) -> int:
    try:
        return int(text)
    except ValueError as exc:
        raise ConfigError(f"not an integer: {text!r}") from exc


def _m_range(text: Optional[str]):
    if text is None:
        return None
    lo, sep, hi = text.partition("..")
    if not sep:
        raise ConfigError(f"--m-range must look like A..B, got {text!r}")
    a, b = _int(lo), _int(hi)
    if a > b:
        raise ConfigError(f"empty m range {text!r}")
    return (a, b)


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--p", type=int, default=2, help="prime (default 2)")
    shared.add_argument("--m", type=int, help="level of G_m (kernel: largest j)")
    shared.add_argument("--m-range", help="levels A..B, inclusive")
    shared.add_argument("--b", default="1", help="jump exponent, rational (default 1)")
    shared.add_argument("--diffusion", default="1", help="diffusion constant D, rational (default 1)")
    shared.add_argument("--time", help="comma-separated times, e.g. 1/2,1,2")
    shared.add_argument("--steps", help="comma-separated step counts n")
    shared.add_argument("--r", help="comma-separated moment orders in (0, b)")
    shared.add_argument("--s", help="comma-separated Hoelder exponents in (0, 1)")
    shared.add_argument("--seed", type=int, default=DEFAULT_SEED)
    shared.add_argument("--samples", type=int, default=100_000)
    shared.add_argument("--tol", type=float, default=1e-12)
    shared.add_argument("--out", help="output path (default stdout)")
    shared.add_argument("--format", choices=("csv", "json"))
    shared.add_argument("--literal-symbol", action="store_true",
                        help="use -1/beta as the limit symbol at the trivial character")
    shared.add_argument("--workers", type=int, default=1)

    parser = argparse.ArgumentParser(prog="padicwalk", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("step-law", parents=[shared], help="one-step law and characteristic function")
    sub.add_parser("walk", parents=[shared], help="sample an embedded path")
    sub.add_parser("pmf", parents=[shared], help="exact n-step law")
    sub.add_parser("kernel", parents=[shared], help="limit heat kernel table")
    mom = sub.add_parser("moments", parents=[shared], help="exact moments against the moment bound")
    mom.add_argument("--bound", choices=("printed", "repaired"), default="printed")
    sub.add_parser("converge", parents=[shared], help="convergence report over an m range")
    st = sub.add_parser("selftest", parents=[shared], help="oracle and invariant suite")
    st.add_argument("--strict", action="store_true", help="count known defects as failures")
    st.add_argument("--inject-fault", choices=sorted(FAULTS), help="mutation test")
    return parser


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    warnings: list = []
    if ns.samples <= 0:
        raise ConfigError("--samples must be positive")
    if ns.workers < 1:
        raise ConfigError("--workers must be >= 1")
    if not 0 <= ns.seed < 2**64:
        raise ConfigError("--seed must be a 64-bit unsigned integer")
    default_fmt = "json" if ns.command in ("converge", "selftest") else "csv"
    cfg = RunConfig(
        command=ns.command,
        p=ns.p,
        m=ns.m,
        m_range=_m_range(ns.m_range),
        b=parse_rational(ns.b, "--b", warnings),
        D=parse_rational(ns.diffusion, "--diffusion", warnings),
        times=_list(ns.time, lambda x: parse_rational(x, "--time", warnings)),
        steps=_list(ns.steps, _int),
        r=_list(ns.r, lambda x: float(parse_rational(x, "--r"))),
        s=_list(ns.s, lambda x: float(parse_rational(x, "--s"))),
        seed=ns.seed,
        samples=ns.samples,
        tol=ns.tol,
        out=ns.out,
        format=ns.format or default_fmt,
        literal_symbol=ns.literal_symbol,
        workers=ns.workers,
        bound=getattr(ns, "bound", "printed"),
        strict=getattr(ns, "strict", False),
        inject_fault=getattr(ns, "inject_fault", None),
        warnings=warnings,
    )
    if cfg.times and any(t <= 0 for t in cfg.times):
        raise ConfigError("--time values must be positive")
    if cfg.steps and any(n < 0 for n in cfg.steps):
        raise ConfigError("--steps values must be >= 0")
    return cfg


# -- commands -----------------------------------------------------------------------
# Each command returns (tables, meta, ok): tables maps a name to (header, rows).


def cmd_step_law(cfg: RunConfig):
    params = cfg.params()
    law = walk.step_law(params)
    m = params.m
    pmf = law.pmf().values
    law_rows = [(ell, law.circle_prob[ell - 1], law.density.values[m - ell], pmf[m - ell])
                for ell in range(1, m + 1)]
    phi_rows = []
    for k in range(m + 1):
        closed, oracle = walk.phi_closed(k, params), phi_dft_oracle(k, params)
        phi_rows.append((k, closed, oracle, abs(closed - oracle)))
    tables = {
        "step_law": (["ell", "circleProb", "densityValue", "pmfPerElement"], law_rows),
        "phi": (["dualNormExp", "phiClosed", "phiOracle", "absDiff"], phi_rows),
    }
    return tables, {"c_m": law.c_m}, True


def cmd_pmf(cfg: RunConfig):
    params = cfg.params()
    m = params.m
    rows = []
    for n in cfg.steps or [1]:
        dens = walk.nstep_density(n, params)
        pmf = dens.values / params.order
        # ell = m - v; ell = 0 is the zero class
        rows += [(n, ell, dens.values[m - ell], pmf[m - ell]) for ell in range(m + 1)]
    return {"pmf": (["n", "ell", "densityValue", "pmfPerElement"], rows)}, {}, True


def cmd_walk(cfg: RunConfig):
    params = cfg.params()
    T = (cfg.times or [Fraction(1)])[0]
    path = walk.sample_embedded_path(T, walk.step_law(params), walk.RngStream(cfg.seed, 0))
    rows = list(path.rows())
    meta = {"horizon": T, "steps": len(rows) - 1, "lambda": walk.time_scale(params).lam}
    return {"path": (["stepIndex", "time", "residue", "digitString"], rows)}, meta, True


def cmd_kernel(cfg: RunConfig):
    params = Params(cfg.p, 1, cfg.b, cfg.D) if cfg.m is None else cfg.params()
    J = cfg.m if cfg.m is not None else 8
    tables = {}
    for t in cfg.times or [Fraction(1)]:
        kern = kernel.kernel_table(t, params, J)
        tables[f"kernel_t={t}"] = (["j", "density", "ballMass", "tailBound"], list(kern.rows()))
    return tables, {}, True


def cmd_moments(cfg: RunConfig):
    params = cfg.params()
    bound = walk.moment_bound if cfg.bound == "printed" else walk.moment_bound_repaired
    rows = []
    ok = True
    for r in cfg.r or [float(params.b) / 2]:
        for n in cfg.steps or range(1, 65):
            lhs = walk.exact_moment(n, r, params)
            rhs = bound(n, r, params)
            rows.append((n, r, lhs, rhs, lhs <= rhs))
            ok &= lhs <= rhs
    meta = {"bound": cfg.bound, "violations": sum(not row[4] for row in rows)}
    return {"moments": (["n", "r", "exactMoment", "bound", "pass"], rows)}, meta, ok


def cmd_converge(cfg: RunConfig):
    lo, hi = cfg.m_range or ((cfg.m, cfg.m) if cfg.m is not None else (3, 8))
    times = cfg.times or [Fraction(1, 2), Fraction(1), Fraction(2)]
    pool = ThreadPoolExecutor(cfg.workers) if cfg.workers > 1 else None
    try:
        rep = run_convergence(cfg.p, cfg.b, cfg.D, range(lo, hi + 1), times, cfg.seed, cfg.samples,
                              cfg.tol, cfg.literal_symbol, executor=pool)
    finally:
        if pool:
            pool.shutdown()
    report = rep.to_dict()
    tables = {
        "perM": (["m", "t", "epsL1", "tailBound", "supGap"],
                 [(x["m"], x["t"], x["epsL1"], x["tailBound"], x["supGap"]) for x in rep.perM]),
        "fdd": (["history", "m", "discrete", "limit", "gap"],
                [(x["history"], x["m"], x["discrete"], x["limit"], x["gap"]) for x in rep.fdd]),
        "assertions": (["name", "passed"], [(a["name"], a["passed"]) for a in rep.assertions]),
    }
    return tables, {"report": report}, rep.passed


def cmd_selftest(cfg: RunConfig):
    res = run_selftest(fault=cfg.inject_fault, strict=cfg.strict,
                       log=lambda line: print(line, file=sys.stderr))
    rows = [(c.name, c.passed, c.known_defect, c.detail) for c in res.checks]
    meta = {"strict": cfg.strict, "fault": cfg.inject_fault, "passed": res.passed}
    return {"selftest": (["check", "passed", "knownDefect", "detail"], rows)}, meta, res.passed


COMMANDS = {
    "step-law": cmd_step_law,
    "walk": cmd_walk,
    "pmf": cmd_pmf,
    "kernel": cmd_kernel,
    "moments": cmd_moments,
    "converge": cmd_converge,
    "selftest": cmd_selftest,
}


# -- emission -----------------------------------------------------------------------

def render(cfg: RunConfig, tables: dict, meta: dict) -> dict:
    """Rendered outputs keyed by destination suffix ('' is the main output)."""
    if cfg.format == "json":
        if cfg.command == "converge":
            return {"": to_json(meta["report"]) + "\n"}
        doc = {"command": cfg.command, "config": cfg.record(), **meta,
               "tables": {name: [dict(zip(h, row)) for row in rows] for name, (h, rows) in tables.items()}}
        return {"": to_json(doc) + "\n"}
    names = list(tables)
    out = {"": csv_table(*tables[names[0]])}
    for name in names[1:]:
        out["-" + name.replace("=", "").replace("/", "_")] = csv_table(*tables[name])
    return out


def write_outputs(cfg: RunConfig, outputs: dict) -> None:
    if cfg.out is None:
        sys.stdout.write("\n".join(outputs.values()))
        return
    base = Path(cfg.out)
    for suffix, text in outputs.items():
        target = base if not suffix else base.with_name(base.stem + suffix + (base.suffix or ".csv"))
        target.write_text(text, encoding="utf-8", newline="")


def error_record(exc: Exception, command: str | None) -> dict:
    rec = {"error": type(exc).__name__, "command": command, "message": str(exc)}
    rec.update(getattr(exc, "info", {}))
    return rec


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        cfg = config_from_args(ns)
        for w in cfg.warnings:
            print(f"warning: {w}", file=sys.stderr)
        tables, meta, ok = COMMANDS[cfg.command](cfg)
    except (ConfigError, PreconditionError, DomainError) as exc:
        print(to_json(error_record(exc, ns.command), indent=0).replace("\n", ""), file=sys.stderr)
        return EXIT_CONFIG
    write_outputs(cfg, render(cfg, tables, meta))
    return EXIT_OK if ok else EXIT_ASSERT


def main_exit() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_exit()
