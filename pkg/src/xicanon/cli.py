"""Command-line harness: ``xicanon <subcommand> [options]``.

Exit status is 0 when everything requested succeeded (for ``verify``:
every gating check passed), 1 when a check or computation failed, and 2
for configuration errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import subprocess
import sys
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import canonical as can
from . import operator as opmod
from . import verification as ver
from .errors import ConfigError, RegimeError, XiCanonError
from .kernel import KernelContext, h1_omega, h1_omega_integral, h_omega
from .specfun import theta_omega

FLOAT_FORMAT = "%.17g"


# ---------------------------------------------------------------------------
# tables and serialization
# ---------------------------------------------------------------------------

@dataclass
class Table:
    """Column-oriented output of one subcommand with its metadata."""

    columns: List[str]
    rows: List[Tuple]
    meta: Dict[str, object] = field(default_factory=dict)

    def column(self, name: str) -> list:
        i = self.columns.index(name)
        return [r[i] for r in self.rows]


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return FLOAT_FORMAT % float(v)
    return str(v)


def _parse_cell(s: str, integer: bool):
    if s in ("true", "false"):
        return s == "true"
    try:
        return int(s) if integer else float(s)
    except ValueError:
        return s


def _integer_columns(table: Table) -> List[str]:
    if not table.rows:
        return []
    return [c for c, v in zip(table.columns, table.rows[0])
            if isinstance(v, (int, np.integer)) and not isinstance(v, (bool, np.bool_))]


_NONFINITE = {"nan": math.nan, "inf": math.inf, "-inf": -math.inf}


def _json_value(v):
    """Plain JSON scalar; non-finite floats become the strings nan/inf/-inf."""
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else repr(v)
    if isinstance(v, dict):
        return {k: _json_value(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_json_value(x) for x in v]
    return v


def _from_json(v):
    if isinstance(v, str) and v in _NONFINITE:
        return _NONFINITE[v]
    if isinstance(v, dict):
        return {k: _from_json(x) for k, x in v.items()}
    if isinstance(v, list):
        return [_from_json(x) for x in v]
    return v


def table_to_text(table: Table, fmt: str) -> str:
    if fmt == "json":
        doc = {"meta": _json_value(table.meta), "columns": table.columns,
               "rows": [[_json_value(v) for v in r] for r in table.rows]}
        return json.dumps(doc, indent=1, sort_keys=True, allow_nan=False) + "\n"
    buf = io.StringIO()
    meta = dict(table.meta, integer_columns=_integer_columns(table))
    buf.write("# " + json.dumps(_json_value(meta), sort_keys=True, allow_nan=False) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(table.columns)
    for r in table.rows:
        w.writerow([_cell(v) for v in r])
    return buf.getvalue()


def write_table(table: Table, path: Optional[str], fmt: str) -> None:
    text = table_to_text(table, fmt)
    if path is None:
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def read_table(path: str) -> Table:
    """Inverse of :func:`write_table` for either format."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if text.lstrip().startswith("{"):
        doc = json.loads(text)
        return Table(doc["columns"], [tuple(_from_json(v) for v in r) for r in doc["rows"]],
                     _from_json(doc["meta"]))
    first, rest = text.split("\n", 1)
    if not first.startswith("# "):
        raise ValueError("missing metadata header")
    meta = _from_json(json.loads(first[2:]))
    ints = set(meta.pop("integer_columns", []))
    rows = list(csv.reader(io.StringIO(rest)))
    columns = rows[0]
    flags = [c in ints for c in columns]
    return Table(columns, [tuple(_parse_cell(c, f) for c, f in zip(r, flags)) for r in rows[1:] if r], meta)


def git_describe() -> str:
    here = os.path.dirname(os.path.abspath(__file__))
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"], cwd=here,
                             capture_output=True, text=True, timeout=10)
    except (OSError, subprocess.SubprocessError):
        return "unknown"
    return out.stdout.strip() if out.returncode == 0 and out.stdout.strip() else "unknown"


def gnuplot_script(table: Table, data_path: str, fmt: str) -> str:
    """Companion gnuplot script plotting every numeric column against the first."""
    if fmt != "csv":
        raise ConfigError("gnuplot scripts need --format csv")
    name = os.path.basename(data_path)
    stem = os.path.splitext(name)[0]
    numeric = [i for i, c in enumerate(table.columns)
               if table.rows and isinstance(table.rows[0][i], (int, float, np.number))
               and not isinstance(table.rows[0][i], bool)]
    if len(numeric) < 2:
        raise ConfigError("table has fewer than two numeric columns")
    x = numeric[0] + 1
    parts = [f"'{name}' using {x}:{i + 1} with linespoints title '{table.columns[i]}'" for i in numeric[1:]]
    lines = ["set datafile separator ','",
             "set datafile commentschars '#'",
             "set key autotitle columnhead",
             f"set xlabel '{table.columns[numeric[0]]}'",
             "set terminal pngcairo size 900,600",
             f"set output '{stem}_gnuplot.png'",
             "plot \\\n    " + ", \\\n    ".join(parts)]
    return "\n".join(lines) + "\n"


def plot_png(table: Table, png_path: str, title: str) -> None:
    """Matplotlib rendering of a table: numeric columns against the first."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    numeric = [i for i, c in enumerate(table.columns)
               if table.rows and isinstance(table.rows[0][i], (int, float, np.number))
               and not isinstance(table.rows[0][i], bool)]
    fig, ax = plt.subplots(figsize=(8, 5))
    if len(numeric) >= 2:
        x = np.array([r[numeric[0]] for r in table.rows], dtype=float)
        for i in numeric[1:]:
            y = np.array([r[i] for r in table.rows], dtype=float)
            ax.plot(x, y, marker=".", label=table.columns[i])
        ax.set_xlabel(table.columns[numeric[0]])
        ax.legend()
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(png_path, dpi=110)
    plt.close(fig)


def plot_report_png(results: Sequence[ver.CheckResult], png_path: str) -> None:
    """Bar chart of log10(worst value / tolerance) per gating check."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    names, ratios, colors = [], [], []
    for r in results:
        vals = [v for v in r.values.values() if np.isfinite(v)]
        if not r.gate or not vals or not (r.tolerance > 0 and np.isfinite(r.tolerance)):
            continue
        names.append(r.name)
        ratios.append(math.log10(max(max(vals), 1e-300) / r.tolerance))
        colors.append("tab:green" if r.passed else "tab:red")
    fig, ax = plt.subplots(figsize=(9, 0.35 * max(len(names), 4) + 1.5))
    ax.barh(names, ratios, color=colors)
    ax.axvline(0.0, color="k", lw=0.8)
    ax.set_xlabel("log10(worst value / tolerance)")
    fig.tight_layout()
    fig.savefig(png_path, dpi=110)
    plt.close(fig)


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def parse_range(text: str) -> Tuple[float, float, int]:
    """``a0:a1:n`` -> (a0, a1, n)."""
    parts = text.split(":")
    try:
        if len(parts) != 3:
            raise ValueError
        lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise ConfigError(f"expected start:stop:count, got {text!r}") from None
    if n < 1 or not (math.isfinite(lo) and math.isfinite(hi)) or (n > 1 and hi <= lo):
        raise ConfigError(f"invalid range {text!r}")
    return lo, hi, n


def parse_complex(text: str) -> complex:
    """``re,im`` (or a bare real) -> complex."""
    parts = text.split(",")
    try:
        if len(parts) == 1:
            return complex(float(parts[0]), 0.0)
        if len(parts) == 2:
            return complex(float(parts[0]), float(parts[1]))
    except ValueError:
        pass
    raise ConfigError(f"expected re,im, got {text!r}")


def _grid(rng: Tuple[float, float, int]) -> np.ndarray:
    lo, hi, n = rng
    return np.linspace(lo, hi, n)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--omega", type=float, default=None, help="parameter omega (default 1.5)")
    common.add_argument("--format", dest="fmt", choices=("csv", "json"), default="csv")
    common.add_argument("--out", default=None, help="output file (default: stdout)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--allow-large-a", action="store_true", help="permit a beyond 4")
    common.add_argument("--gnuplot", action="store_true", help="write a companion gnuplot script")
    common.add_argument("--plot", action="store_true", help="render a PNG next to the output file")

    p = argparse.ArgumentParser(prog="xicanon", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("theta", parents=[common], help="Theta_omega on a real grid or at one point")
    s.add_argument("--z", default=None, help="single point re,im")
    s.add_argument("--t-grid", default="-20:20:81", help="real grid t0:t1:n")

    s = sub.add_parser("kernel", parents=[common], help="h and h1 (both forms) on a grid")
    s.add_argument("--x-grid", default="1.1:20:100")

    s = sub.add_parser("det", parents=[common], help="Fredholm determinants det(I +- H)")
    s.add_argument("--a-grid", default="1:2:11")
    s.add_argument("--nodes", type=int, default=opmod.DEFAULT_NODES, help="nodes per panel")

    s = sub.add_parser("mcurve", parents=[common], help="mu and m from both sources")
    s.add_argument("--a-grid", default="1:2:21")

    s = sub.add_parser("evolve", parents=[common], help="(A_a, B_a) along the canonical system")
    s.add_argument("--z", default="2,0")
    s.add_argument("--a-max", type=float, default=2.0)
    s.add_argument("--a-grid", default=None, help="samples (default 1:a_max:21)")

    s = sub.add_parser("potentials", parents=[common], help="Schroedinger potentials V+ and V-")
    s.add_argument("--a-grid", default="1:2:41")

    s = sub.add_parser("zeros", parents=[common], help="real zeros of A^omega with the contour count")
    s.add_argument("--tmax", type=float, default=30.0)

    s = sub.add_parser("verify", parents=[common], help="run the verification suite")
    s.add_argument("--only", action="append", default=None,
                   help="run only groups with this prefix (repeatable): " + ", ".join(k for k, _ in ver.SUITE))
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--with-runtime", action="store_true", help="include runtimes in the report")
    return p


def config_from_args(args) -> ver.RunConfig:
    omega = 1.5 if args.omega is None else args.omega
    sweep = None if args.omega is None else (args.omega,)
    a_grid = parse_range(args.a_grid) if getattr(args, "a_grid", None) else None
    try:
        return ver.RunConfig(omega=omega, omega_sweep=sweep, seed=args.seed,
                             workers=getattr(args, "workers", 1), fmt=args.fmt, out=args.out,
                             a_grid=a_grid, allow_large_a=args.allow_large_a)
    except ValueError as err:
        raise ConfigError(str(err)) from None


def _meta(cfg: ver.RunConfig, command: str, grid=None, extra=None) -> dict:
    meta = {"command": command, "omega": cfg.omega, "seed": cfg.seed,
            "grid": list(grid) if grid is not None else None,
            "tolerances": cfg.all_tolerances(), "git_describe": git_describe()}
    if extra:
        meta.update(extra)
    return meta


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_theta(args, cfg: ver.RunConfig) -> Table:
    if args.z is not None:
        z = np.array([parse_complex(args.z)])
        grid = None
    else:
        grid = parse_range(args.t_grid)
        z = _grid(grid).astype(complex)
    th = np.atleast_1d(theta_omega(z, cfg.omega))
    rows = [(zi.real, zi.imag, t.real, t.imag, abs(t)) for zi, t in zip(z, th)]
    return Table(["re_z", "im_z", "re_theta", "im_theta", "abs_theta"], rows, _meta(cfg, "theta", grid))


def cmd_kernel(args, cfg: ver.RunConfig) -> Table:
    grid = parse_range(args.x_grid)
    x = _grid(grid)
    ctx = KernelContext(cfg.omega, n_max=max(4096, int(math.ceil(x.max()))))
    rows = list(zip(x, h_omega(x, ctx), h1_omega(x, ctx), h1_omega_integral(x, ctx)))
    return Table(["x", "h", "h1", "h1_integral"], rows, _meta(cfg, "kernel", grid))


def _a_values(cfg: ver.RunConfig) -> np.ndarray:
    a = _grid(cfg.a_grid)
    if np.any(a <= 0):
        raise ConfigError("a must be positive")
    can.check_a_max(float(a.max()), cfg.allow_large_a)
    return a


def cmd_det(args, cfg: ver.RunConfig) -> Table:
    a = _a_values(cfg)
    ctx = KernelContext(cfg.omega)
    rows = []
    for ai in a:
        op = opmod.operator_at(ctx, float(ai), args.nodes)
        lp, lm = opmod.log_det_pair(op)
        rows.append((ai, lp, lm, math.exp(lp), math.exp(lm), op.grid.size))
    return Table(["a", "log_det_plus", "log_det_minus", "det_plus", "det_minus", "nodes"], rows,
                 _meta(cfg, "det", cfg.a_grid, {"nodes_per_panel": args.nodes}))


def cmd_mcurve(args, cfg: ver.RunConfig) -> Table:
    a = _a_values(cfg)
    mc = can.m_curve(KernelContext(cfg.omega), a, allow_large_a=cfg.allow_large_a)
    rel = np.abs(mc.m_values - mc.alt_m_values) / mc.alt_m_values
    rows = list(zip(a, mc.mu_values, mc.m_values, mc.alt_m_values, rel))
    return Table(["a", "mu", "m", "m_det", "rel_diff"], rows,
                 _meta(cfg, "mcurve", cfg.a_grid, {"source": mc.source, "alt_source": "determinant_ratio"}))


def cmd_evolve(args, cfg: ver.RunConfig) -> Table:
    z = parse_complex(args.z)
    if args.a_grid is None:
        grid = (1.0, args.a_max, 21)
        cfg = ver.RunConfig(**{**cfg.__dict__, "a_grid": grid})
    a = _a_values(cfg)
    mc = None
    if a.max() > 1:
        mc = can.m_curve(KernelContext(cfg.omega), np.array([1.0, float(a.max())]),
                         with_determinants=False, allow_large_a=cfg.allow_large_a)
    start = can.ab_initial(z, cfg.omega)
    states = can.evolve_path(start, a, mc)
    rows = [(s.a, complex(s.A).real, complex(s.A).imag, complex(s.B).real, complex(s.B).imag) for s in states]
    return Table(["a", "re_A", "im_A", "re_B", "im_B"], rows,
                 _meta(cfg, "evolve", cfg.a_grid, {"z": [z.real, z.imag]}))


def cmd_potentials(args, cfg: ver.RunConfig) -> Table:
    a = _a_values(cfg)
    if a.size < 3:
        raise ConfigError("potentials need at least three samples")
    ctx = KernelContext(cfg.omega)
    if a.max() > 1:
        mc = can.m_curve(ctx, np.array([1.0, float(a.max())]), with_determinants=False,
                         allow_large_a=cfg.allow_large_a).resampled(a)
    else:
        mc = can.MCurve(cfg.omega, a, np.zeros_like(a), np.ones_like(a))
    pot = can.potentials(mc)
    m = np.asarray(mc.m_values)[1:-1]
    rows = list(zip(pot.a, m, pot.mu, pot.v_plus, pot.v_minus))
    return Table(["a", "m", "mu", "v_plus", "v_minus"], rows, _meta(cfg, "potentials", cfg.a_grid))


def cmd_zeros(args, cfg: ver.RunConfig) -> Table:
    if not args.tmax > 0:
        raise ConfigError("tmax must be positive")
    rep = can.zeros_of_A(cfg.omega, args.tmax)
    rows = [(i + 1, float(t)) for i, t in enumerate(rep.zeros)]
    extra = {"tmax": args.tmax, "contour_count": rep.contour_count, "b_zeros": [float(t) for t in rep.b_zeros],
             "interlaced": rep.interlaced, "count_matches": int(rep.zeros.size) == rep.contour_count}
    sys.stderr.write(f"real zeros: {rep.zeros.size}, contour count: {rep.contour_count}, "
                     f"interlaced with B: {rep.interlaced}\n")
    return Table(["index", "z_k"], rows, _meta(cfg, "zeros", None, extra))


def report_table(results: Sequence[ver.CheckResult], cfg: ver.RunConfig, with_runtime: bool = False) -> Table:
    cols = ["check", "anchor", "quantity", "value", "tolerance", "passed", "gate", "detail"]
    if with_runtime:
        cols.append("runtime")
    rows = []
    for r in results:
        items = list(r.values.items()) or [("", float("nan"))]
        for k, v in items:
            row = (r.name, r.anchor, k, v, r.tolerance, r.passed, r.gate, r.detail)
            rows.append(row + ((r.runtime,) if with_runtime else ()))
    meta = _meta(cfg, "verify", None, {"exit_status": ver.exit_status(results)})
    return Table(cols, rows, meta)


def cmd_verify(args, cfg: ver.RunConfig) -> Tuple[Table, List[ver.CheckResult]]:
    results = ver.run_suite(cfg, args.only)
    for r in results:
        flag = "PASS" if r.passed else "FAIL"
        if not r.gate:
            flag = "INFO"
        sys.stderr.write(f"{flag} {r.name} [{r.anchor}]" + (f" {r.detail}" if r.detail else "") + "\n")
    return report_table(results, cfg, args.with_runtime), results


COMMANDS = {"theta": cmd_theta, "kernel": cmd_kernel, "det": cmd_det, "mcurve": cmd_mcurve,
            "evolve": cmd_evolve, "potentials": cmd_potentials, "zeros": cmd_zeros}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    try:
        cfg = config_from_args(args)
        if (args.gnuplot or args.plot) and args.out is None:
            raise ConfigError("--gnuplot and --plot need --out")
        results = None
        if args.command == "verify":
            table, results = cmd_verify(args, cfg)
        else:
            table = COMMANDS[args.command](args, cfg)
        write_table(table, args.out, cfg.fmt)
        if args.gnuplot:
            stem = os.path.splitext(args.out)[0]
            with open(stem + ".gp", "w", encoding="utf-8") as fh:
                fh.write(gnuplot_script(table, args.out, cfg.fmt))
        if args.plot:
            png = os.path.splitext(args.out)[0] + ".png"
            if results is not None:
                plot_report_png(results, png)
            else:
                plot_png(table, png, f"{args.command}, omega = {cfg.omega:g}")
    except (ConfigError, RegimeError) as err:
        sys.stderr.write(f"configuration error: {err}\n")
        return 2
    except XiCanonError as err:
        sys.stderr.write(f"{type(err).__name__}: {err}\n")
        return 1
    except OSError as err:
        sys.stderr.write(f"I/O error: {err}\n")
        return 2
    return ver.exit_status(results) if results is not None else 0


if __name__ == "__main__":
    sys.exit(main())
