"""Command-line entry point: ``barystab <experiment> --config cfg.json --out dir``.

Each run writes one CSV per result table, a ``summary.json`` and a
``manifest.json`` listing every file it produced.  ``barystab plot`` turns
two CSV columns into an SVG chart.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from contextlib import contextmanager
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from . import io as _io
from .exceptions import BadConfig, BarystabError, MissingColumn, NonPositiveLogData, OutOfRegime
from .experiments import RUNNERS, ExperimentConfig
from .metrics import fit_exponent

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_IO = 0, 2, 3, 4
LOCK_NAME = ".barystab.lock"
ENV_THREADS, ENV_SEED = "BARYSTAB_THREADS", "BARYSTAB_SEED"

# columns drawn by --plot, per experiment
PLOT_COLUMNS = {
    "fig1": ("epsilon", "ratio_w1", True),
    "fig2": ("epsilon", "w2_bary", True),
    "remark-exponent": ("epsilon", "gap", True),
    "stability-sweep": ("perturbation", "w2_bary", True),
    "empirical-bary": ("m", "mean_w2", True),
    "reg-bias": ("lambda", "w2_bias", True),
}
# the family each experiment runs on when the config does not say
DEFAULT_FAMILY = {"fig1": "fig1", "remark-exponent": "remark"}


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def load_config(subcommand: str, path, seed=None, threads=None, force=False) -> ExperimentConfig:
    """Config from JSON, then environment overrides, then explicit flags."""
    data = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError as exc:
            raise BadConfig(f"config file not found: {path}") from exc
        except (OSError, json.JSONDecodeError) as exc:
            raise BadConfig(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise BadConfig("config must be a JSON object")
    data = dict(data)
    data.setdefault("family", DEFAULT_FAMILY.get(subcommand, "fig2"))
    for key, env, flag in (("threads", ENV_THREADS, threads), ("seed", ENV_SEED, seed)):
        if env in os.environ:
            try:
                data[key] = int(os.environ[env])
            except ValueError as exc:
                raise BadConfig(f"{env} must be an integer") from exc
        if flag is not None:
            data[key] = flag
    if force:
        data["force"] = True
    return ExperimentConfig.from_dict(data)


@contextmanager
def _locked(out_dir: Path):
    lock = out_dir / LOCK_NAME
    fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield
    finally:
        lock.unlink(missing_ok=True)


def run(subcommand: str, config_path=None, out_dir=".", seed=None, threads=None, force=False,
        plot_svg: bool = False) -> int:
    """Run one experiment and write its outputs; returns the process exit code."""
    if subcommand not in RUNNERS:
        print(f"error: unknown experiment {subcommand!r}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(subcommand, config_path, seed=seed, threads=threads, force=force)
    except BadConfig as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        with _locked(out):
            started = _now()
            result = RUNNERS[subcommand](cfg)
            files = []
            for name, table in result.tables.items():
                files.append(table.to_csv(out / f"{name}.csv"))
                if plot_svg and subcommand in PLOT_COLUMNS:
                    x, y, loglog = PLOT_COLUMNS[subcommand]
                    files.append(plot(files[-1], x, y, loglog, out / f"{name}.svg"))
            files.append(_io.write_json(out / "summary.json", result.summary))
            manifest = {
                "subcommand": subcommand,
                "config": cfg.to_dict(),
                "seed": cfg.seed,
                "version": __version__,
                "started": started,
                "finished": _now(),
                "outputs": [p.name for p in files],
            }
            _io.write_json(out / "manifest.json", manifest)
    except FileExistsError:
        print(f"error: {out / LOCK_NAME} exists; another run is using this directory", file=sys.stderr)
        return EXIT_IO
    except (BadConfig, OutOfRegime) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BarystabError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


# ---------------------------------------------------------------------------
# SVG


WIDTH, HEIGHT = 800, 600
MARGIN = {"left": 90, "right": 30, "top": 40, "bottom": 70}


def _read_columns(csv_path, x_col: str, y_col: str):
    header, rows = _io.read_csv(csv_path)
    for col in (x_col, y_col):
        if col not in header:
            raise MissingColumn(f"column {col!r} not in {csv_path}")
    if not rows:
        raise MissingColumn(f"{csv_path} has no data rows")
    ix, iy = header.index(x_col), header.index(y_col)
    x = np.array([float(r[ix]) for r in rows])
    y = np.array([float(r[iy]) for r in rows])
    return x, y


def _ticks(lo: float, hi: float, n: int = 5) -> np.ndarray:
    return np.linspace(lo, hi, n) if hi > lo else np.array([lo])


def _fmt(v: float) -> str:
    return f"{v:.3g}"


def render_svg(x, y, x_label: str, y_label: str, loglog: bool) -> str:
    """Scatter plus connecting line; with ``loglog`` a fitted power law and its slope."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    tx, ty = (np.log10(x), np.log10(y)) if loglog else (x, y)
    x0, x1 = float(tx.min()), float(tx.max())
    y0, y1 = float(ty.min()), float(ty.max())
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def sx(v):
        return MARGIN["left"] + (v - x0) / (x1 - x0) * pw

    def sy(v):
        return MARGIN["top"] + (1 - (v - y0) / (y1 - y0)) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="13">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<rect x="{MARGIN["left"]}" y="{MARGIN["top"]}" width="{pw}" height="{ph}" '
        'fill="none" stroke="black"/>',
    ]
    for v in _ticks(x0, x1):
        label = _fmt(10**v if loglog else v)
        out.append(f'<line x1="{sx(v):.2f}" y1="{MARGIN["top"] + ph}" x2="{sx(v):.2f}" '
                   f'y2="{MARGIN["top"] + ph + 6}" stroke="black"/>')
        out.append(f'<text x="{sx(v):.2f}" y="{MARGIN["top"] + ph + 22}" text-anchor="middle">{label}</text>')
    for v in _ticks(y0, y1):
        label = _fmt(10**v if loglog else v)
        out.append(f'<line x1="{MARGIN["left"] - 6}" y1="{sy(v):.2f}" x2="{MARGIN["left"]}" '
                   f'y2="{sy(v):.2f}" stroke="black"/>')
        out.append(f'<text x="{MARGIN["left"] - 10}" y="{sy(v) + 4:.2f}" text-anchor="end">{label}</text>')
    scale = " (log scale)" if loglog else ""
    out.append(f'<text x="{MARGIN["left"] + pw / 2:.2f}" y="{HEIGHT - 20}" '
               f'text-anchor="middle">{x_label}{scale}</text>')
    out.append(f'<text x="20" y="{MARGIN["top"] + ph / 2:.2f}" text-anchor="middle" '
               f'transform="rotate(-90 20 {MARGIN["top"] + ph / 2:.2f})">{y_label}{scale}</text>')
    order = np.argsort(tx, kind="stable")
    pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(tx[order], ty[order]))
    out.append(f'<polyline points="{pts}" fill="none" stroke="#1f77b4" stroke-width="1.5"/>')
    for a, b in zip(tx, ty):
        out.append(f'<circle cx="{sx(a):.2f}" cy="{sy(b):.2f}" r="4" fill="#1f77b4"/>')
    if loglog and len(x) >= 2 and np.ptp(tx) > 0:
        fit = fit_exponent(np.column_stack([x, y]), min_points=2)
        ly = (fit.intercept + fit.slope * np.log(10**np.array([x0, x1]))) / math.log(10)
        out.append(f'<line x1="{sx(x0):.2f}" y1="{sy(ly[0]):.2f}" x2="{sx(x1):.2f}" y2="{sy(ly[1]):.2f}" '
                   'stroke="#d62728" stroke-dasharray="6 4"/>')
        out.append(f'<text x="{MARGIN["left"] + 12}" y="{MARGIN["top"] + 20}" fill="#d62728">'
                   f'slope {fit.slope:.3f}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def plot(csv_path, x_col: str, y_col: str, loglog: bool = True, out_path=None) -> Path:
    """Write an SVG chart of two CSV columns; returns its path.

    Raises
    ------
    MissingColumn
        If a column is absent or the file has no rows.
    NonPositiveLogData
        If ``loglog`` and some value is not strictly positive.
    """
    x, y = _read_columns(csv_path, x_col, y_col)
    if loglog and (np.any(~(x > 0)) or np.any(~(y > 0))):
        raise NonPositiveLogData("log-log plot needs strictly positive data")
    out_path = Path(out_path) if out_path is not None else Path(csv_path).with_suffix(".svg")
    out_path.write_text(render_svg(x, y, x_col, y_col, loglog), encoding="utf-8")
    return out_path


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="barystab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in RUNNERS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--out", default=".", help="output directory (default: current)")
        p.add_argument("--seed", type=int, help="unsigned 64-bit seed")
        p.add_argument("--threads", type=int, help="worker threads")
        p.add_argument("--force", action="store_true", help="run outside the validated parameter regime")
        p.add_argument("--plot", action="store_true", help="also write an SVG chart")
    p = sub.add_parser("plot", help="SVG chart of two CSV columns")
    p.add_argument("csv")
    p.add_argument("x_col")
    p.add_argument("y_col")
    p.add_argument("--linear", action="store_true", help="linear axes instead of log-log")
    p.add_argument("--out", help="SVG path (default: next to the CSV)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "plot":
        try:
            path = plot(args.csv, args.x_col, args.y_col, not args.linear, args.out)
        except (MissingColumn, NonPositiveLogData) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        except OSError as exc:
            print(f"i/o error: {exc}", file=sys.stderr)
            return EXIT_IO
        print(path)
        return EXIT_OK
    return run(args.command, args.config, args.out, seed=args.seed, threads=args.threads,
               force=args.force, plot_svg=args.plot)


if __name__ == "__main__":
    sys.exit(main())
