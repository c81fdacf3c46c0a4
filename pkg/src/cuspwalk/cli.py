"""Command line front end: run a configured experiment, reduce its CSVs to
plain whitespace plot data, and run the release checklist.

Plot emission stays dependency-free on purpose: the artifacts are x/y text
files (plus log-log variants and a fitted-slope sidecar) that gnuplot,
pyplot, or a spreadsheet can consume directly.
"""

from __future__ import annotations

import argparse
import dataclasses
import math
import os
import sys
from pathlib import Path

import numpy as np

from .checks import CHECK_NAMES, run_checklist
from .config import parse_config, serialize_config
from .experiments import run_config

__all__ = ["emit_plot_data", "main"]

_OUT_ENV = "CUSPWALK_OUT"

# default plot columns per experiment tag in the CSV header; the y axis is
# the quantity whose trend the experiment exists to exhibit
_PLOT_COLUMNS = {
    "ess-spectrum": ("t_max", "inside"),
    "gap-scan": ("h", "gap"),
    "bottom-check": ("h", "min_eig"),
    "quasimode": ("h", "residual"),
    "contraction": ("h", "rate"),
    "smoothing": ("h", "h1_norm"),
    "tempered-gap": ("h", "gap"),
    "tv-decay": ("n", "tv_lower"),
    "escape": ("n", "tv_bound"),
}


def _read_csv(path: Path) -> tuple[str, list[str], list[list[str]]]:
    """Read one versioned CSV: (experiment tag, column names, raw rows)."""
    lines = path.read_text().splitlines()
    if not lines or not lines[0].startswith("#"):
        raise ValueError(f"{path}: missing '#' version header")
    head = lines[0].lstrip("#").split()
    tag = head[-1] if head else ""
    if len(lines) < 2:
        raise ValueError(f"{path}: missing column line")
    columns = lines[1].split(",")
    rows = [line.split(",") for line in lines[2:] if line.strip()]
    return tag, columns, rows


def emit_plot_data(csv_path: str | os.PathLike, x: str | None = None,
                   y: str | None = None,
                   out_dir: str | os.PathLike | None = None) -> list[Path]:
    """Write plot files next to a CSV (or into out_dir) and return them.

    Always writes ``<stem>.xy``; adds ``<stem>.loglog`` and a fitted-slope
    sidecar ``<stem>.slope.txt`` when both chosen columns are strictly
    positive.  TV curves get log-scale values in the .xy itself with the
    noise floor carried along, since that is the plot one actually reads.
    An empty CSV yields an empty .xy and a warning, not an error.
    """
    path = Path(csv_path)
    tag, columns, rows = _read_csv(path)
    x_col, y_col = _PLOT_COLUMNS.get(tag, (None, None))
    x_col = x or x_col or columns[0]
    y_col = y or y_col or columns[-1]
    for name in (x_col, y_col):
        if name not in columns:
            raise ValueError(
                f"{path}: no column {name!r} (have {', '.join(columns)})")
    out_base = Path(out_dir) if out_dir is not None else path.parent
    out_base.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    xy_path = out_base / (path.stem + ".xy")
    if not rows:
        xy_path.write_text("")
        print(f"warning: {path} has no data rows; wrote empty {xy_path}",
              file=sys.stderr)
        return [xy_path]

    xs = np.array([float(r[columns.index(x_col)]) for r in rows])
    ys = np.array([float(r[columns.index(y_col)]) for r in rows])

    if tag == "tv-decay" and "noise_floor" in columns and y is None:
        floor = [float(r[columns.index("noise_floor")]) for r in rows]
        body = "".join(
            f"{xv!r} {math.log(max(yv, 1e-300))!r} {fv!r}\n"
            for xv, yv, fv in zip(xs, ys, floor))
    else:
        body = "".join(f"{xv!r} {yv!r}\n" for xv, yv in zip(xs, ys))
    xy_path.write_text(body)
    written.append(xy_path)

    if np.all(xs > 0) and np.all(ys > 0):
        lx, ly = np.log(xs), np.log(ys)
        ll_path = out_base / (path.stem + ".loglog")
        ll_path.write_text(
            "".join(f"{a!r} {b!r}\n" for a, b in zip(lx, ly)))
        written.append(ll_path)
        if len(xs) >= 2 and np.ptp(lx) > 0:
            slope = float(np.polyfit(lx, ly, 1)[0])
            slope_path = out_base / (path.stem + ".slope.txt")
            slope_path.write_text(
                f"log-log slope of {y_col} vs {x_col}: {slope!r}\n")
            written.append(slope_path)
    return written


def _parse_config_file(path: str):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise SystemExit(f"cannot read config {path}: {exc}")
    try:
        return parse_config(text)
    except ValueError as exc:
        raise SystemExit(f"{path}: {exc}")


def _checklist_numbers(names) -> tuple[int, ...]:
    numbers = []
    for token in names:
        if token.isdigit():
            number = int(token)
            if not 1 <= number <= len(CHECK_NAMES):
                raise SystemExit(f"no checklist item {token}")
        else:
            try:
                number = CHECK_NAMES.index(token) + 1
            except ValueError:
                raise SystemExit(
                    f"unknown checklist item {token!r}; "
                    f"choose from {', '.join(CHECK_NAMES)}")
        numbers.append(number)
    return tuple(numbers)


def _report(results) -> bool:
    all_ok = True
    for res in results:
        verdict = "PASS" if res.passed else "FAIL"
        print(f"{verdict} {res.number:2d} {res.name}: {res.details}")
        all_ok &= res.passed
    return all_ok


def _cmd_run(args) -> int:
    cfg = _parse_config_file(args.config)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    out_root = os.environ.get(_OUT_ENV) or None
    manifest = run_config(cfg, out_root=out_root, threads=args.threads)
    print(f"manifest: {manifest.path}")
    for key, value in manifest.fitted.items():
        print(f"  {key} = {value!r}")
    if not cfg.checklist:
        return 0
    numbers = _checklist_numbers(cfg.checklist)
    results = run_checklist(out_root=Path(manifest.path).parent.parent,
                            threads=args.threads, numbers=numbers)
    return 0 if _report(results) else 1


def _cmd_plot(args) -> int:
    try:
        for written in emit_plot_data(args.csv, x=args.x, y=args.y,
                                      out_dir=args.out_dir):
            print(written)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


def _cmd_check(args) -> int:
    numbers = None
    if args.config is not None:
        cfg = _parse_config_file(args.config)
        if cfg.checklist:
            numbers = _checklist_numbers(cfg.checklist)
    out_root = args.out_root or os.environ.get(_OUT_ENV) or None
    results = run_checklist(out_root=out_root, threads=args.threads,
                            numbers=numbers)
    return 0 if _report(results) else 1


def _cmd_show(args) -> int:
    cfg = _parse_config_file(args.config)
    print(serialize_config(cfg), end="")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="cuspwalk",
        description="random-walk spectra and mixing on cusped surfaces")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one configured experiment")
    p_run.add_argument("config", help="INI config file")
    p_run.add_argument("--seed", type=int, default=None,
                       help="override the config's random seed")
    p_run.add_argument("--threads", type=int, default=1,
                       help="parallel h-sweep width")
    p_run.set_defaults(fn=_cmd_run)

    p_plot = sub.add_parser("plot", help="emit plain plot data from a CSV")
    p_plot.add_argument("csv", help="experiment CSV file")
    p_plot.add_argument("--x", default=None, help="x column override")
    p_plot.add_argument("--y", default=None, help="y column override")
    p_plot.add_argument("--out-dir", default=None,
                        help="directory for the emitted files")
    p_plot.set_defaults(fn=_cmd_plot)

    p_check = sub.add_parser("check", help="run the release checklist")
    p_check.add_argument("config", nargs="?", default=None,
                         help="optional config naming a [checks] subset")
    p_check.add_argument("--out-root", default=None,
                         help="where checklist experiments write outputs")
    p_check.add_argument("--threads", type=int, default=1)
    p_check.set_defaults(fn=_cmd_check)

    p_show = sub.add_parser("show-config",
                            help="parse a config and echo its canonical form")
    p_show.add_argument("config")
    p_show.set_defaults(fn=_cmd_show)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
