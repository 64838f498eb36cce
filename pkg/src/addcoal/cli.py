"""Command-line surface: simulate | limit | exact | verify | sweep.

Config files are flat UTF-8 ``key = value`` text with keys matching the
flag names; unknown keys are rejected and explicitly given flags override
file values.  Every output row leads with provenance (seed, n, reps,
embedding, version).  Exit codes: 0 success, 1 usage error,
2 verification failure, 3 runtime failure.
"""

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass, fields, replace
from fractions import Fraction

from . import __version__, acceptance
from .cost_engine import (
    DEFAULT_ALPHA_GRID,
    DEFAULT_BETA_GRID,
    Functional,
)
from .exact_oracles import DP_MAX, PMK_EXACT_MAX, p_mk, partition_dp
from .experiment import ExperimentSpec, regime_sweep, run_monte_carlo
from .process_core import Embedding
from .smoluchowski import (
    phi_closed_form,
    phi_comparison_curve,
    phi_curve_quadrature,
    phi_classical_table,
)


class UsageError(ValueError):
    pass


_ALL_FUNCTIONALS = tuple(f.value for f in Functional)

COMMANDS = ("simulate", "limit", "exact", "verify", "sweep")
EXACT_TABLES = ("pmk", "condr", "dp")


@dataclass(frozen=True)
class RunConfig:
    """One CLI invocation's settings; round-trips through config text."""

    command: str
    n: tuple = (1000,)
    embedding: str = "direct"
    functionals: tuple = _ALL_FUNCTIONALS
    reps: int = 1
    seed: int = 0
    alpha_grid: tuple = DEFAULT_ALPHA_GRID
    beta_grid: tuple = DEFAULT_BETA_GRID
    tol: float = 1e-8
    fmt: str = "csv"
    out: str = ""
    raw_out: str = ""
    workers: int = 1
    eps: float = 0.15
    table: str = ""
    only: tuple = ()
    mutate: tuple = ()

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise UsageError(f"unknown command {self.command!r}; expected one of {COMMANDS}")
        if self.fmt not in ("csv", "json"):
            raise UsageError("format must be csv or json")
        if self.embedding not in tuple(e.value for e in Embedding):
            raise UsageError(f"unknown embedding {self.embedding!r}")
        for f in self.functionals:
            if f not in _ALL_FUNCTIONALS:
                raise UsageError(f"unknown functional {f!r}; known: {_ALL_FUNCTIONALS}")
        if self.table and self.table not in EXACT_TABLES:
            raise UsageError(f"unknown exact table {self.table!r}; known: {EXACT_TABLES}")


# config (de)serialization ---------------------------------------------------

_KEY_TO_FIELD = {
    "command": "command",
    "n": "n",
    "embedding": "embedding",
    "functional": "functionals",
    "reps": "reps",
    "seed": "seed",
    "alpha-grid": "alpha_grid",
    "beta-grid": "beta_grid",
    "tol": "tol",
    "format": "fmt",
    "out": "out",
    "raw-out": "raw_out",
    "workers": "workers",
    "eps": "eps",
    "table": "table",
    "only": "only",
    "mutate": "mutate",
}
_FIELD_TO_KEY = {v: k for k, v in _KEY_TO_FIELD.items()}

_INT_FIELDS = {"reps", "seed", "workers"}
_FLOAT_FIELDS = {"tol", "eps"}
_INT_TUPLE_FIELDS = {"n"}
_FLOAT_TUPLE_FIELDS = {"alpha_grid", "beta_grid"}
_STR_TUPLE_FIELDS = {"functionals", "only", "mutate"}


def _format_value(field_name, value):
    if field_name in _FLOAT_TUPLE_FIELDS:
        return ",".join(f"{v:.17g}" for v in value)
    if field_name in _INT_TUPLE_FIELDS or field_name in _STR_TUPLE_FIELDS:
        return ",".join(str(v) for v in value)
    if field_name in _FLOAT_FIELDS:
        return f"{value:.17g}"
    return str(value)


def _parse_value(field_name, raw):
    raw = raw.strip()
    if field_name in _INT_FIELDS:
        return int(raw)
    if field_name in _FLOAT_FIELDS:
        return float(raw)
    parts = tuple(p.strip() for p in raw.split(",") if p.strip()) if raw else ()
    if field_name in _INT_TUPLE_FIELDS:
        return tuple(int(p) for p in parts)
    if field_name in _FLOAT_TUPLE_FIELDS:
        return tuple(float(p) for p in parts)
    if field_name in _STR_TUPLE_FIELDS:
        return parts
    return raw


def serialize_config(config: RunConfig) -> str:
    lines = []
    for f in fields(RunConfig):
        value = getattr(config, f.name)
        lines.append(f"{_FIELD_TO_KEY[f.name]} = {_format_value(f.name, value)}")
    return "\n".join(lines) + "\n"


def parse_config(text: str) -> RunConfig:
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"config line {lineno}: expected 'key = value', got {line!r}")
        key, _, raw = line.partition("=")
        key = key.strip()
        if key not in _KEY_TO_FIELD:
            raise UsageError(f"config line {lineno}: unknown key {key!r}")
        field_name = _KEY_TO_FIELD[key]
        values[field_name] = _parse_value(field_name, raw)
    if "command" not in values:
        raise UsageError("config must set 'command'")
    return RunConfig(**values)


# output writers -------------------------------------------------------------


def _fmt_cell(v):
    if isinstance(v, float):
        return f"{v:.17g}"
    return v


def write_rows(rows, fmt: str, out_path: str) -> None:
    """Rows are dicts sharing one key order; csv or json, file or stdout."""
    if fmt == "json":
        payload = json.dumps({"rows": rows}, indent=1, default=float) + "\n"
    else:
        buf = io.StringIO()
        if rows:
            writer = csv.writer(buf, lineterminator="\n")
            writer.writerow(rows[0].keys())
            for row in rows:
                writer.writerow([_fmt_cell(v) for v in row.values()])
        payload = buf.getvalue()
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(payload)
    else:
        sys.stdout.write(payload)


def _provenance(config: RunConfig, n) -> dict:
    return {
        "seed": config.seed,
        "n": n,
        "reps": config.reps,
        "embedding": config.embedding,
        "version": __version__,
    }


# commands -------------------------------------------------------------------


def cmd_simulate(config: RunConfig) -> int:
    n = config.n[0]
    # beta checkpoints beyond sqrt(n) would sit at step 0 (value 0); drop them
    beta_grid = tuple(b for b in config.beta_grid if b * b <= n)
    spec = ExperimentSpec(
        n=n,
        embedding=config.embedding,
        functionals=tuple(Functional(f) for f in config.functionals),
        reps=config.reps,
        seed=config.seed,
        alpha_grid=config.alpha_grid,
        beta_grid=beta_grid,
        workers=config.workers,
    )
    result = run_monte_carlo(spec)
    rows = []
    for functional, kind, point, stats in result.rows():
        row = _provenance(config, n)
        row.update(
            kind=kind,
            alpha_or_beta=point,
            functional=functional.value,
            mean=stats.mean,
            stderr=stats.stderr,
        )
        rows.append(row)
    write_rows(rows, config.fmt, config.out)
    if config.raw_out:
        _write_raw(result, spec, config.raw_out)
    return 0


def _write_raw(result, spec, path: str) -> None:
    """Newline-delimited per-replication records (rep, functional, kind, point, value)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("rep,functional,kind,point,value\n")
        for f in spec.functionals:
            for rep in range(spec.reps):
                try:
                    for j, a in enumerate(spec.alpha_grid):
                        fh.write(
                            f"{rep},{f.value},alpha,{a:.17g},"
                            f"{result.alpha_values[f][rep, j]:.17g}\n"
                        )
                    for j, b in enumerate(spec.beta_grid):
                        fh.write(
                            f"{rep},{f.value},beta,{b:.17g},"
                            f"{result.beta_values[f][rep, j]:.17g}\n"
                        )
                    fh.write(f"{rep},{f.value},total,nan,{result.totals[f][rep]:.17g}\n")
                except OSError as exc:
                    raise OSError(f"writing raw records for replication {rep}: {exc}") from exc


def cmd_limit(config: RunConfig) -> int:
    grid = config.alpha_grid
    rows = []
    for name in config.functionals:
        functional = Functional(name)
        if functional is Functional.QFW:
            quad = phi_curve_quadrature(functional, grid, tol=config.tol)
            values = [(r.value, r.value, r.error) for r in quad]
        else:
            values = [
                (phi_closed_form(functional, a), phi_comparison_curve(functional, a), 0.0)
                for a in grid
            ]
        for a, (phi, phi_sim, err) in zip(grid, values):
            table = phi_classical_table(functional, a)
            rows.append(
                {
                    "seed": config.seed,
                    "n": "",
                    "reps": "",
                    "embedding": "",
                    "version": __version__,
                    "alpha": a,
                    "functional": functional.value,
                    "phi_normalized": phi,
                    "phi_match_simulation": phi_sim,
                    "phi_classical_table_if_any": "" if table is None else table,
                    "quadrature_error_estimate": err,
                }
            )
    write_rows(rows, config.fmt, config.out)
    return 0


def _rational(x) -> str:
    return f"{x.numerator}/{x.denominator}"


def cmd_exact(config: RunConfig) -> int:
    if not config.table:
        raise UsageError(f"exact needs a table argument: one of {EXACT_TABLES}")
    n = config.n[0]
    rows = []
    if config.table == "pmk":
        if n < 2:
            raise UsageError("pmk table needs n >= 2")
        for k in range(1, n):
            p = p_mk(n, k)
            exact = n <= PMK_EXACT_MAX
            rows.append(
                {
                    "m": n,
                    "k": k,
                    "p_rational": _rational(p) if exact else "",
                    "p_decimal": float(p),
                }
            )
    elif config.table == "condr":
        if not 2 <= n <= DP_MAX:
            raise UsageError(f"condr table needs 2 <= n <= {DP_MAX} (partition DP cap)")
        dp = partition_dp(n)
        for k in range(1, n):
            for l, er in sorted(dp.conditional_r_given_l(k).items()):
                rows.append(
                    {
                        "n": n,
                        "k": k,
                        "l": l,
                        "expected_R_rational": _rational(er),
                        "expected_R_decimal": float(er),
                        "formula_n_minus_l_over_n_minus_k": _rational(
                            Fraction(n - l, n - k)
                        ),
                    }
                )
    else:  # dp
        if not 2 <= n <= DP_MAX:
            raise UsageError(f"dp table needs 2 <= n <= {DP_MAX} (partition DP cap)")
        dp = partition_dp(n)
        for name in config.functionals:
            functional = Functional(name)
            cumulative = Fraction(0)
            for k in range(1, n):
                step = dp.expected_step_cost(functional, k)
                cumulative += step
                rows.append(
                    {
                        "n": n,
                        "k": k,
                        "functional": functional.value,
                        "e_step_rational": _rational(step),
                        "e_step_decimal": float(step),
                        "e_cumulative_rational": _rational(cumulative),
                        "e_cumulative_decimal": float(cumulative),
                    }
                )
    write_rows(rows, config.fmt, config.out)
    return 0


def cmd_verify(config: RunConfig) -> int:
    results = acceptance.run_criteria(only=config.only or None, mutate=config.mutate)
    for r in results:
        print(f"[{r.status:9s}] {r.cid}: {r.measured} (target {r.target}; tol {r.tolerance})")
    report = {
        "version": __version__,
        "passed": acceptance.suite_passed(results),
        "criteria": [
            {
                "cid": r.cid,
                "status": r.status,
                "passed": r.passed,
                "informative": r.informative,
                "measured": r.measured,
                "target": r.target,
                "tolerance": r.tolerance,
                "detail": r.detail,
                "seconds": r.seconds,
            }
            for r in results
        ],
    }
    payload = json.dumps(report, indent=1) + "\n"
    if config.out:
        with open(config.out, "w", encoding="utf-8") as fh:
            fh.write(payload)
    else:
        sys.stdout.write(payload)
    return 0 if report["passed"] else 2


def cmd_sweep(config: RunConfig) -> int:
    if not config.n:
        raise UsageError("sweep needs at least one n (comma-separated for several)")
    rows_out = []
    for row in regime_sweep(
        config.n, config.eps, reps=config.reps, seed=config.seed,
        embedding=Embedding(config.embedding),
    ):
        base = _provenance(config, row.n)
        base.update(
            eps=config.eps,
            k_sparse=row.k_sparse,
            k_full=row.k_full,
            mean_B_over_n_sparse=row.sparse.mean,
            ci95_sparse=row.sparse.ci95,
            mean_B_over_n_full=row.full.mean,
            ci95_full=row.full.ci95,
        )
        rows_out.append(base)
    write_rows(rows_out, config.fmt, config.out)
    return 0


_DISPATCH = {
    "simulate": cmd_simulate,
    "limit": cmd_limit,
    "exact": cmd_exact,
    "verify": cmd_verify,
    "sweep": cmd_sweep,
}


# argument parsing -----------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="addcoal",
        description="Merging-cost lab for the additive coalescent.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--n", type=str, default=None,
                       help="chain size; comma-separated list for sweep")
        p.add_argument("--reps", type=int, default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--embedding", choices=[e.value for e in Embedding], default=None)
        p.add_argument("--functional", action="append", default=None,
                       help="repeatable; defaults to all six")
        p.add_argument("--alpha-grid", type=str, default=None, help="comma-separated")
        p.add_argument("--beta-grid", type=str, default=None, help="comma-separated")
        p.add_argument("--tol", type=float, default=None)
        p.add_argument("--format", dest="fmt", choices=("csv", "json"), default=None)
        p.add_argument("--out", type=str, default=None)
        p.add_argument("--config", type=str, default=None, help="flat key=value file")
        p.add_argument("--workers", type=int, default=None)

    p_sim = sub.add_parser("simulate", help="Monte Carlo cost curves and totals")
    add_common(p_sim)
    p_sim.add_argument("--raw-out", type=str, default=None,
                       help="also stream per-replication records here")

    p_lim = sub.add_parser("limit", help="deterministic limit curves phi(alpha)")
    add_common(p_lim)

    p_ex = sub.add_parser("exact", help="exact oracle tables")
    p_ex.add_argument("table", choices=EXACT_TABLES)
    add_common(p_ex)

    p_ver = sub.add_parser("verify", help="run the acceptance suite")
    add_common(p_ver)
    p_ver.add_argument("--only", action="append", default=None,
                       help="run only the named criteria (repeatable)")
    p_ver.add_argument("--mutate", action="append", default=None,
                       help="mutation test mode (e.g. pmk)")

    p_sw = sub.add_parser("sweep", help="largest-cluster regime sweep")
    add_common(p_sw)
    p_sw.add_argument("--eps", type=float, default=None,
                      help="regime exponent offset in (0, 1/2)")
    return parser


_NS_TO_FIELD = {
    "n": "n",
    "reps": "reps",
    "seed": "seed",
    "embedding": "embedding",
    "functional": "functionals",
    "alpha_grid": "alpha_grid",
    "beta_grid": "beta_grid",
    "tol": "tol",
    "fmt": "fmt",
    "out": "out",
    "raw_out": "raw_out",
    "workers": "workers",
    "eps": "eps",
    "table": "table",
    "only": "only",
    "mutate": "mutate",
}


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    if getattr(ns, "config", None):
        with open(ns.config, encoding="utf-8") as fh:
            base = parse_config(fh.read())
        if base.command != ns.command:
            base = replace(base, command=ns.command)
        config = base
    else:
        config = RunConfig(command=ns.command)
    overrides = {}
    for attr, field_name in _NS_TO_FIELD.items():
        value = getattr(ns, attr, None)
        if value is None:
            continue
        if attr in ("n", "alpha_grid", "beta_grid"):
            overrides[field_name] = _parse_value(field_name, value)
        elif attr in ("functional", "only", "mutate"):
            overrides[field_name] = tuple(value)
        else:
            overrides[field_name] = value
    if overrides:
        config = replace(config, **overrides)
    # re-run validation after overrides
    return RunConfig(**{f.name: getattr(config, f.name) for f in fields(RunConfig)})


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:  # argparse errors (usage) or --help/--version
        code = exc.code if isinstance(exc.code, int) else 0
        return 0 if code == 0 else 1
    try:
        config = config_from_args(ns)
        return _DISPATCH[config.command](config)
    except (UsageError, ValueError) as exc:
        json.dump({"error": str(exc), "kind": "usage"}, sys.stderr)
        sys.stderr.write("\n")
        return 1
    except OSError as exc:
        json.dump({"error": str(exc), "kind": "io"}, sys.stderr)
        sys.stderr.write("\n")
        return 3
    except Exception as exc:  # pragma: no cover - defensive
        json.dump({"error": f"{type(exc).__name__}: {exc}", "kind": "runtime"}, sys.stderr)
        sys.stderr.write("\n")
        return 3


if __name__ == "__main__":
    sys.exit(main())
