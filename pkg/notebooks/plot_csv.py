"""
Plot CSV output from the command line tool
==========================================

Usage::

    densemimo analytic --config notebooks/configs/contamination_threshold.toml --out threshold.csv
    python notebooks/plot_csv.py threshold.csv lambda m_threshold_mr m_threshold_zf --group zeta --logx

Needs matplotlib, which the package itself does not depend on.
"""

import argparse
import csv
import io
from collections import defaultdict

try:
    import matplotlib.pyplot as plt
except ImportError as exc:  # pragma: no cover
    raise SystemExit("plot_csv.py needs matplotlib (pip install matplotlib)") from exc


def read(path):
    with open(path, encoding="utf-8") as fh:
        lines = [l for l in fh if not l.startswith("#")]
    return list(csv.DictReader(io.StringIO("".join(lines))))


def main():
    p = argparse.ArgumentParser()
    p.add_argument("csv")
    p.add_argument("x")
    p.add_argument("y", nargs="+")
    p.add_argument("--group", default=None, help="column that splits curves, e.g. zeta or scheme")
    p.add_argument("--logx", action="store_true")
    p.add_argument("--out", default=None, help="save instead of showing")
    args = p.parse_args()

    curves = defaultdict(list)
    for row in read(args.csv):
        curves[row[args.group] if args.group else ""].append(row)
    fig, ax = plt.subplots()
    for key, rows in curves.items():
        rows.sort(key=lambda r: float(r[args.x]))
        xs = [float(r[args.x]) for r in rows]
        for col in args.y:
            ax.plot(xs, [float(r[col]) for r in rows], label=f"{col} {args.group}={key}" if key else col)
    if args.logx:
        ax.set_xscale("log")
    ax.set_xlabel(args.x)
    ax.legend()
    ax.grid(True, alpha=0.3)
    if args.out:
        fig.savefig(args.out, dpi=150)
    else:
        plt.show()


if __name__ == "__main__":
    main()
