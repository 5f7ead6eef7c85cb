"""Command line front end: ``densemimo analytic | simulate | selftest``.

Runs are described by a TOML file::

    master_seed = 1

    [model]                      # optional, defaults to the dual-slope model
    breakpoints_m = [100.0]
    exponents = [2.1, 4.0]
    upsilon1 = 8.3e-4

    [analytic]
    lam = {start = 1, stop = 1000, count = 40, scale = "log"}
    zeta = [1, 4]
    K = 10
    M_over_K = [10, 50]

    [simulate]
    quantity = "se"              # se | uatf | nmse | antenna_ratio
    schemes = ["MR", "ZF", "SMMSE", "MMMSE"]
    lam = [10, 50]
    delta_deg = [0, 5, 10]       # or "uncorrelated"
    M = 100
    K = 10
    zeta = 4

Grid keys accept a scalar, a list, or a ``{start, stop, count, scale}``
range and are combined as a Cartesian product.  Output is UTF-8 CSV with
``#`` metadata lines ahead of the header row.  Exit codes: 0 success,
1 invalid input, 2 numerical failure.
"""

import argparse
import csv
import itertools
import json
import math
import sys

import numpy as np

from . import __version__, analytic, selftest
from .montecarlo import QUANTITIES, SCHEMES, Scenario, SimulationError, iter_sweep
from .propagation import MultiSlopeModel
from .uplink import db2lin

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

FORMAT_VERSION = 1
EXIT_OK, EXIT_INVALID, EXIT_NUMERIC = 0, 1, 2

TOP_KEYS = {"format_version", "master_seed", "model", "analytic", "simulate"}
MODEL_KEYS = {"breakpoints_m", "exponents", "upsilon1"}
COMMON_GRID = {"lam", "zeta", "K", "M", "M_over_K", "snr0_db", "snrtr_db", "tau_c"}
ANALYTIC_KEYS = COMMON_GRID
SIMULATE_KEYS = COMMON_GRID | {
    "delta_deg",
    "quantity",
    "schemes",
    "trials",
    "fading_redraws",
    "gain_floor",
    "window_side",
    "target_se",
}
DEFAULTS = {"K": 10, "snr0_db": 5.0, "tau_c": 400.0, "zeta": 4}

ANALYTIC_COLUMNS = [
    "lambda", "zeta", "mu1", "mu2", "A", "nmse_bound", "sinr_mr", "sinr_zf", "se_mr", "se_zf",
    "rate_inf", "zeta_opt", "m_threshold_mr", "m_threshold_zf", "M", "K", "tau_c", "snr0_db", "snrtr_db",
]  # fmt: skip
SIMULATE_COLUMNS = [
    "scenario_index", "lambda", "M", "K", "zeta", "delta_deg", "snr0_db", "snrtr_db", "tau_c",
    "trials", "fading_redraws", "pilot_redraws", "gain_floor", "window_side", "master_seed", "scheme",
    "se", "se_ci", "ase", "ase_ci", "uatf_se", "uatf_se_ci", "nmse", "nmse_ci",
    "noncoherent_db", "coherent_db", "antenna_ratio", "trials_ok", "trials_failed", "error",
]  # fmt: skip


class ConfigError(ValueError):
    pass


def load_config(path):
    try:
        with open(path, "rb") as fh:
            cfg = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    _reject_unknown(cfg, TOP_KEYS, "top level")
    _reject_unknown(cfg.get("model", {}), MODEL_KEYS, "[model]")
    _reject_unknown(cfg.get("analytic", {}), ANALYTIC_KEYS, "[analytic]")
    _reject_unknown(cfg.get("simulate", {}), SIMULATE_KEYS, "[simulate]")
    version = cfg.get("format_version", FORMAT_VERSION)
    if version != FORMAT_VERSION:
        raise ConfigError(f"unsupported format_version {version}; this build reads {FORMAT_VERSION}")
    return cfg


def _reject_unknown(section, allowed, where):
    if not isinstance(section, dict):
        raise ConfigError(f"{where} must be a table")
    unknown = sorted(set(section) - allowed)
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {', '.join(unknown)}")


def expand(value, name):
    """Scalar, list or ``{start, stop, count, scale}`` range -> list of values."""
    if isinstance(value, dict):
        _reject_unknown(value, {"start", "stop", "count", "scale"}, f"range {name}")
        try:
            start, stop, count = float(value["start"]), float(value["stop"]), int(value["count"])
        except KeyError as exc:
            raise ConfigError(f"range {name} needs start, stop and count") from exc
        scale = value.get("scale", "lin")
        if count < 1:
            raise ConfigError(f"range {name} is empty")
        if scale == "log":
            if start <= 0 or stop <= 0:
                raise ConfigError(f"log range {name} needs positive bounds")
            return [float(v) for v in np.geomspace(start, stop, count)]
        if scale == "lin":
            return [float(v) for v in np.linspace(start, stop, count)]
        raise ConfigError(f"range {name}: scale must be 'lin' or 'log'")
    if isinstance(value, list):
        if not value:
            raise ConfigError(f"{name} grid is empty")
        return list(value)
    return [value]


def model_from_config(cfg):
    m = cfg.get("model")
    if not m:
        return MultiSlopeModel.dual_slope()
    try:
        return MultiSlopeModel(tuple(m["breakpoints_m"]), tuple(m["exponents"]), float(m["upsilon1"]))
    except KeyError as exc:
        raise ConfigError(f"[model] misses {exc}") from exc


def _antenna_grid(section, K):
    if "M" in section and "M_over_K" in section:
        raise ConfigError("give either M or M_over_K, not both")
    if "M_over_K" in section:
        return [int(round(r * K)) for r in expand(section["M_over_K"], "M_over_K")]
    return [int(m) for m in expand(section.get("M", 100), "M")]


def _delta(v):
    if isinstance(v, str):
        if v.lower() in ("uncorrelated", "none"):
            return None
        raise ConfigError(f"delta_deg entry {v!r} is neither a number nor 'uncorrelated'")
    return float(v)


def analytic_rows(cfg):
    sec = cfg.get("analytic")
    if sec is None:
        raise ConfigError("config has no [analytic] section")
    model = model_from_config(cfg)
    for lam_, z, K, snr0, tc in itertools.product(
        expand(sec["lam"], "lam") if "lam" in sec else _missing("lam"),
        expand(sec.get("zeta", DEFAULTS["zeta"]), "zeta"),
        expand(sec.get("K", DEFAULTS["K"]), "K"),
        expand(sec.get("snr0_db", DEFAULTS["snr0_db"]), "snr0_db"),
        expand(sec.get("tau_c", DEFAULTS["tau_c"]), "tau_c"),
    ):
        snrtr = sec.get("snrtr_db", snr0 + 10.0)
        for M in _antenna_grid(sec, K):
            yield _analytic_row(model, float(lam_), float(z), int(K), int(M), float(snr0), float(snrtr), float(tc))


def _missing(name):
    raise ConfigError(f"missing required grid key {name!r}")


def _analytic_row(model, lam, zeta, K, M, snr0_db, snrtr_db, tau_c):
    if not lam > 0 or not zeta > 0 or K < 1 or M < 1:
        raise ConfigError("lam, zeta, K and M must be positive")
    if zeta * K > tau_c:
        raise ConfigError(f"zeta*K = {zeta * K:g} exceeds tau_c = {tau_c:g}")
    snr0, snrtr = float(db2lin(snr0_db)), float(db2lin(snrtr_db))
    mp = analytic.MomentPair.compute(model, lam)
    inp = analytic.UatfInputs(M, K, zeta, snr0, snrtr, tau_c, mp)
    sinr_mr = analytic.uatf_sinr("MR", inp)
    sinr_zf = analytic.uatf_sinr("ZF", inp) if M > K else math.nan
    tau_p = zeta * K
    return {
        "lambda": lam,
        "zeta": zeta,
        "mu1": mp.mu1,
        "mu2": mp.mu2,
        "A": inp.A,
        "nmse_bound": analytic.nmse_upper_bound(model, lam, zeta, tau_p, snrtr),
        "sinr_mr": sinr_mr,
        "sinr_zf": sinr_zf,
        "se_mr": analytic.uatf_se("MR", inp),
        "se_zf": analytic.uatf_se("ZF", inp) if M > K else math.nan,
        "rate_inf": analytic.rate_limit(mp.mu2, zeta, K, tau_c),
        "zeta_opt": analytic.optimal_zeta_from_mu2(mp.mu2, K, tau_c),
        "m_threshold_mr": analytic.dominance_threshold_from_moments("MR", mp.mu1, mp.mu2, zeta, K, tau_p, snrtr),
        "m_threshold_zf": analytic.dominance_threshold_from_moments("ZF", mp.mu1, mp.mu2, zeta, K, tau_p, snrtr),
        "M": M,
        "K": K,
        "tau_c": tau_c,
        "snr0_db": snr0_db,
        "snrtr_db": snrtr_db,
    }


def simulate_grid(cfg, seed=None, trials=None):
    """Validated scenario list and run options from the ``[simulate]`` section."""
    sec = cfg.get("simulate")
    if sec is None:
        raise ConfigError("config has no [simulate] section")
    if "lam" not in sec:
        _missing("lam")
    model = model_from_config(cfg)
    master_seed = int(cfg.get("master_seed", 0) if seed is None else seed)
    quantity = sec.get("quantity", "se")
    if quantity not in QUANTITIES:
        raise ConfigError(f"quantity must be one of {QUANTITIES}")
    schemes = tuple(expand(sec.get("schemes", list(SCHEMES)), "schemes"))
    bad = [s for s in schemes if s not in SCHEMES]
    if bad:
        raise ConfigError(f"unknown schemes {bad}")
    extra = {}
    for key in ("fading_redraws", "gain_floor", "window_side"):
        if key in sec:
            extra[key] = sec[key]
    n_trials = trials if trials is not None else sec.get("trials", 500)
    grid = []
    for lam_, dd, z, K, snr0, tc in itertools.product(
        expand(sec["lam"], "lam"),
        [_delta(v) for v in expand(sec.get("delta_deg", "uncorrelated"), "delta_deg")],
        expand(sec.get("zeta", DEFAULTS["zeta"]), "zeta"),
        expand(sec.get("K", DEFAULTS["K"]), "K"),
        expand(sec.get("snr0_db", DEFAULTS["snr0_db"]), "snr0_db"),
        expand(sec.get("tau_c", DEFAULTS["tau_c"]), "tau_c"),
    ):
        for M in _antenna_grid(sec, K):
            try:
                grid.append(
                    Scenario(
                        lam=float(lam_), M=int(M), K=int(K), zeta=int(z) if float(z).is_integer() else z,
                        delta_deg=dd, snr0_db=float(snr0), snrtr_db=sec.get("snrtr_db", float(snr0) + 10.0),
                        tau_c=float(tc), model=model, trials=int(n_trials), master_seed=master_seed, **extra,
                    )
                )  # fmt: skip
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"invalid scenario: {exc}") from exc
    target = sec.get("target_se")
    if quantity == "antenna_ratio" and target is None:
        raise ConfigError("quantity 'antenna_ratio' needs target_se")
    return grid, schemes, quantity, target


def _fmt(v):
    if v is None:
        return "uncorrelated"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _record_row(idx, rec):
    sc = rec.scenario
    return {
        "scenario_index": idx,
        "lambda": sc.lam,
        "M": sc.M,
        "K": sc.K,
        "zeta": sc.zeta,
        "delta_deg": sc.delta_deg,
        "snr0_db": sc.snr0_db,
        "snrtr_db": sc.snrtr_db,
        "tau_c": sc.tau_c,
        "trials": sc.trials,
        "fading_redraws": sc.fading_redraws,
        "pilot_redraws": sc.pilot_redraws,
        "gain_floor": sc.gain_floor,
        "window_side": "auto" if sc.window_side is None else sc.window_side,
        "master_seed": sc.master_seed,
        "scheme": rec.scheme,
        "se": rec.se,
        "se_ci": rec.se_ci,
        "ase": rec.ase,
        "ase_ci": rec.ase_ci,
        "uatf_se": rec.uatf_se,
        "uatf_se_ci": rec.uatf_se_ci,
        "nmse": rec.nmse,
        "nmse_ci": rec.nmse_ci,
        "noncoherent_db": rec.noncoherent_db,
        "coherent_db": rec.coherent_db,
        "antenna_ratio": rec.antenna_ratio,
        "trials_ok": rec.trials_ok,
        "trials_failed": rec.trials_failed,
        "error": rec.error,
    }


def _open_out(path):
    if path is None or path == "-":
        return sys.stdout, False
    return open(path, "w", newline="", encoding="utf-8"), True


def _write_meta(fh, subcommand, cfg, extra=()):
    fh.write(f"# densemimo v{__version__}\n")
    fh.write(f"# format_version: {FORMAT_VERSION}\n")
    fh.write(f"# subcommand: {subcommand}\n")
    for key, value in extra:
        fh.write(f"# {key}: {value}\n")
    fh.write(f"# config: {json.dumps(cfg, sort_keys=True)}\n")


def cmd_analytic(args):
    cfg = load_config(args.config)
    rows = list(analytic_rows(cfg))
    if not rows:
        raise ConfigError("empty grid")
    fh, close = _open_out(args.out)
    try:
        _write_meta(fh, "analytic", cfg, [("model", json.dumps(model_from_config(cfg).as_dict()))])
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ANALYTIC_COLUMNS)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in ANALYTIC_COLUMNS])
    finally:
        if close:
            fh.close()
    return EXIT_OK


def cmd_simulate(args):
    cfg = load_config(args.config)
    grid, schemes, quantity, target = simulate_grid(cfg, seed=args.seed, trials=args.trials)
    if not grid:
        raise ConfigError("empty grid")
    sc0 = grid[0]
    meta = [
        ("quantity", quantity),
        ("schemes", " ".join(schemes)),
        ("master_seed", sc0.master_seed),
        ("trials", sc0.trials),
        ("fading_redraws", sc0.fading_redraws),
        ("tau_c", " ".join(sorted({_fmt(s.tau_c) for s in grid}))),
        ("snrtr_db", " ".join(sorted({_fmt(s.snrtr_db) for s in grid}))),
        ("gain_floor", sc0.gain_floor),
        ("model", json.dumps(sc0.model.as_dict())),
        ("ci", "95% normal approximation over trials"),
    ]
    if target is not None:
        meta.append(("target_se", target))
    failed = False
    fh, close = _open_out(args.out)
    try:
        _write_meta(fh, "simulate", cfg, meta)
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SIMULATE_COLUMNS)
        fh.flush()
        idx_of = {id(sc): i for i, sc in enumerate(grid)}
        for rec in iter_sweep(grid, schemes, threads=args.threads, quantity=quantity, target_se=target):
            row = _record_row(idx_of[id(rec.scenario)], rec)
            w.writerow([_fmt(row[c]) for c in SIMULATE_COLUMNS])
            fh.flush()  # keep finished rows if a later scenario dies
            failed |= bool(rec.error)
    finally:
        if close:
            fh.close()
    return EXIT_NUMERIC if failed else EXIT_OK


def cmd_selftest(args):
    failed = selftest.run(sys.stdout)
    if failed:
        print(f"{len(failed)} check(s) failed: {', '.join(failed)}")
        return EXIT_NUMERIC
    print("all checks passed")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="densemimo", description="Dense multicell massive MIMO uplink toolkit.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, helptext in (("analytic", "closed-form bounds over a grid"), ("simulate", "Monte Carlo sweep")):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("--config", required=True, help="TOML run description")
        sp.add_argument("--out", default=None, help="CSV output path (default: stdout)")
        sp.add_argument("--seed", type=int, default=None, help="override master_seed")
        sp.add_argument("--threads", type=int, default=None, help="worker processes for trials")
        sp.add_argument("--trials", type=int, default=None, help="override trial count")
    sub.add_parser("selftest", help="fast invariant checks")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    handler = {"analytic": cmd_analytic, "simulate": cmd_simulate, "selftest": cmd_selftest}[args.command]
    try:
        return handler(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (SimulationError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        # model and closed-form domain errors (poles, bad parameters)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
