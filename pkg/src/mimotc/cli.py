"""Command-line front end.

Subcommands: ``simulate``, ``bounds``, ``find-tc``, ``sweep``,
``eigen-moments`` and ``design``. Settings come from flags and an optional
JSON ``--config`` file (flags win). JSON results echo the resolved
configuration, so feeding a result back through ``--config`` repeats the
run. Exit status is 0 on success, 1 for bad parameters or flags and 2 for
runtime failures such as an unreachable outage target.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from typing import Optional

import numpy as np

from . import bounds as bnd
from .channel import wishart_eigen_moments
from .geometry import DEFAULT_MEAN_NODES
from .montecarlo import (MOMENT_SAMPLES, REPORT_TRIALS, SEARCH_TRIALS, BracketNotFoundError,
                         MonotonicityError, SimOptions, cached_moments, estimate_outage,
                         find_lambda_star, format_number, rows_to_csv, run_point, sweep)
from .params import ParameterError, SystemParams
from .receiver import DEFAULT_SUBSET_LIMIT

PROG = "mimotc"
COMMANDS = ("simulate", "bounds", "find-tc", "sweep", "eigen-moments", "design")

DEFAULTS = {
    "mode": "no-csit", "N": None, "k": 1, "m": None, "alpha": 3.0, "beta": 1.0,
    "d": 1.0, "epsilon": 0.1, "R": 1.0, "lambda": None, "disk_radius": None,
    "trials": None, "seed": 0, "mean_nodes": DEFAULT_MEAN_NODES, "window": None,
    "subset_limit": DEFAULT_SUBSET_LIMIT, "engine": "auto", "tol_rel": 1e-3,
    "moment_samples": MOMENT_SAMPLES, "threads": None, "format": None,
    "inverse": True, "points": None,
}
# keys that never reach the echoed config
_LOCAL = {"output", "config", "command"}


class UsageError(Exception):
    """Bad command line; maps to exit status 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _add_scenario(p):
    S = argparse.SUPPRESS
    g = p.add_argument_group("scenario")
    g.add_argument("--mode", default=S, help="no-csit, cmsir or csit (default no-csit)")
    g.add_argument("--N", type=int, default=S, help="antennas per node")
    g.add_argument("--k", type=int, default=S, help="streams per link (default 1)")
    g.add_argument("--m", type=int, default=S,
                   help="cancelation dimensions (default 0; N-k with CSIT)")
    g.add_argument("--alpha", type=float, default=S, help="path-loss exponent (default 3)")
    g.add_argument("--beta", type=float, default=S, help="linear SIR threshold (default 1)")
    g.add_argument("--d", type=float, default=S, help="link length (default 1)")
    g.add_argument("--epsilon", type=float, default=S, help="outage constraint (default 0.1)")
    g.add_argument("--R", type=float, default=S, help="rate per stream (default 1)")
    dens = g.add_mutually_exclusive_group()
    dens.add_argument("--lambda", dest="lambda", type=float, default=S,
                      help="transmitter density per unit area")
    dens.add_argument("--disk-radius", dest="disk_radius", type=float, default=S,
                      help="density given as the radius of the disk holding "
                           "--mean-nodes transmitters on average")


def _add_engine(p):
    S = argparse.SUPPRESS
    g = p.add_argument_group("simulation")
    g.add_argument("--trials", type=_positive_int, default=S,
                   help=f"trials per density (default {REPORT_TRIALS} for simulate, "
                        f"{SEARCH_TRIALS} for find-tc)")
    g.add_argument("--seed", type=int, default=S, help="master seed (default 0)")
    g.add_argument("--mean-nodes", dest="mean_nodes", type=float, default=S,
                   help=f"mean node count on the disk (default {DEFAULT_MEAN_NODES})")
    g.add_argument("--window", type=int, default=S, help="CMSIR search window (default c+4)")
    g.add_argument("--subset-limit", dest="subset_limit", type=int, default=S,
                   help=f"largest exhaustive CMSIR search (default {DEFAULT_SUBSET_LIMIT})")
    g.add_argument("--engine", choices=("auto", "fast", "full"), default=S,
                   help="auto, fast (distribution level) or full (matrix chain)")
    g.add_argument("--tol-rel", dest="tol_rel", type=float, default=S,
                   help="relative bracket width ending the density search (default 1e-3)")
    g.add_argument("--threads", type=_positive_int, default=S,
                   help="worker threads (default: all cores)")


def _add_moments(p):
    p.add_argument("--moment-samples", dest="moment_samples", type=_positive_int,
                   default=argparse.SUPPRESS,
                   help=f"Wishart samples for CSIT moments (default {MOMENT_SAMPLES})")


def _add_io(p):
    S = argparse.SUPPRESS
    p.add_argument("--config", default=S, help="JSON file with defaults for any flag")
    p.add_argument("--output", default=S, help="write results here instead of stdout")
    p.add_argument("--format", choices=("csv", "json"), default=S, help="output format")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog=PROG, description="Transmission capacity of multi-antenna "
                                            "Poisson ad-hoc networks.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("simulate", help="estimate outage at one density")
    _add_scenario(p); _add_engine(p); _add_moments(p); _add_io(p)

    p = sub.add_parser("bounds", help="closed-form outage and capacity bounds")
    _add_scenario(p); _add_moments(p); _add_io(p)
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS,
                   help="seed for the CSIT eigenvalue moments (default 0)")
    p.add_argument("--mean-nodes", dest="mean_nodes", type=float, default=argparse.SUPPRESS,
                   help="used only to convert --disk-radius")

    p = sub.add_parser("find-tc", help="search the largest density meeting the outage target")
    _add_scenario(p); _add_engine(p); _add_moments(p); _add_io(p)

    p = sub.add_parser("sweep", help="evaluate a list of points into the CSV table")
    _add_scenario(p); _add_engine(p); _add_moments(p); _add_io(p)
    p.add_argument("--points", default=argparse.SUPPRESS,
                   help="JSON file: a list of point objects, or {'points': [...]}; "
                        "scenario flags fill keys a point leaves out")

    p = sub.add_parser("eigen-moments", help="moments of the k-th Wishart eigenvalue")
    S = argparse.SUPPRESS
    p.add_argument("--N", type=int, default=S)
    p.add_argument("--k", type=int, default=S)
    _add_moments(p)
    p.add_argument("--seed", type=int, default=S)
    p.add_argument("--no-inverse", dest="inverse", action="store_false", default=S,
                   help="skip E{1/gamma_k} (required when k = N)")
    _add_io(p)

    p = sub.add_parser("design", help="stream count and cancelation dimensions "
                                      "maximizing the bounds")
    p.add_argument("--N", type=int, default=S)
    p.add_argument("--alpha", type=float, default=S)
    p.add_argument("--mode", default=S)
    for flag in ("beta", "d", "epsilon", "R"):
        p.add_argument(f"--{flag}", type=float, default=S)
    _add_io(p)
    return parser


def _normalize_keys(data: dict) -> dict:
    return {str(k).lstrip("-").replace("-", "_"): v for k, v in data.items()}


def load_config(path: str) -> dict:
    """Flat mapping of flag names to values.

    A previous JSON result is accepted too; its ``config`` section is used.
    """
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise UsageError(f"--config: cannot read {path!r}: {exc.strerror}")
    except json.JSONDecodeError as exc:
        raise UsageError(f"--config: {path!r} is not valid JSON: {exc}")
    if not isinstance(data, dict):
        raise UsageError(f"--config: {path!r} must hold a JSON object")
    if isinstance(data.get("config"), dict):
        data = data["config"]
    data = _normalize_keys(data)
    unknown = set(data) - set(DEFAULTS) - _LOCAL
    if unknown:
        raise UsageError(f"--config: unknown keys {sorted(unknown)}")
    return {k: v for k, v in data.items() if k not in _LOCAL}


def resolve(args: argparse.Namespace) -> dict:
    """Merge defaults, config file and flags into one settings dict."""
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config", "output")}
    file_cfg = load_config(args.config) if getattr(args, "config", None) else {}
    # a density given on the command line replaces either density key from the file
    if "lambda" in flags or "disk_radius" in flags:
        file_cfg.pop("lambda", None)
        file_cfg.pop("disk_radius", None)
    cfg = {**DEFAULTS, **file_cfg, **flags}
    if cfg["lambda"] is not None and cfg["disk_radius"] is not None:
        raise UsageError("--lambda and --disk-radius are mutually exclusive")
    if cfg["disk_radius"] is not None:
        r = float(cfg["disk_radius"])
        if not r > 0:
            raise ParameterError(f"--disk-radius must be positive, got {r}")
        cfg["lambda"] = float(cfg["mean_nodes"]) / (math.pi * r * r)
        cfg["disk_radius"] = None
    return cfg


def _params(cfg: dict) -> SystemParams:
    if cfg["N"] is None:
        raise ParameterError("--N is required")
    return SystemParams(N=cfg["N"], k=cfg["k"], m=cfg["m"], alpha=cfg["alpha"],
                        beta=cfg["beta"], d=cfg["d"], epsilon=cfg["epsilon"], R=cfg["R"],
                        mode=cfg["mode"])


def _options(cfg: dict) -> SimOptions:
    return SimOptions(mean_nodes=cfg["mean_nodes"], engine=cfg["engine"],
                      window=cfg["window"], subset_limit=cfg["subset_limit"],
                      threads=cfg["threads"])


def _moments(params: SystemParams, cfg: dict):
    if not params.mode.has_csit:
        return None
    return cached_moments(params.N, params.k, int(cfg["moment_samples"]), int(cfg["seed"]))


def to_jsonable(x):
    """Floats to 12 significant digits; non-finite values become strings."""
    if isinstance(x, dict):
        return {str(k): to_jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [to_jsonable(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return float(format(x, ".12g"))
    return x


def _config_echo(cfg: dict, keys) -> dict:
    return {k: cfg[k] for k in keys}


_SCENARIO_KEYS = ("mode", "N", "k", "m", "alpha", "beta", "d", "epsilon", "R")
_ENGINE_KEYS = ("trials", "seed", "mean_nodes", "window", "subset_limit", "engine",
                "tol_rel", "threads", "moment_samples")


def _point(cfg: dict) -> dict:
    keys = _SCENARIO_KEYS + ("lambda", "trials", "seed", "mean_nodes", "window",
                             "subset_limit", "engine", "tol_rel", "moment_samples")
    return {k: cfg[k] for k in keys if cfg[k] is not None}


def _bounds_result(params: SystemParams, lam: Optional[float], cfg: dict) -> dict:
    moments = _moments(params, cfg)
    out = {"cancel_count": params.cancel_count, "valid": params.bounds_valid}
    if lam is not None:
        out.update(bnd.pout_bounds(params, lam, moments).to_dict())
    out.update(bnd.tc_bounds(params, moments).to_dict())
    if moments is not None:
        out["moments"] = moments.to_dict()
    return out


def cmd_simulate(cfg: dict):
    params = _params(cfg)
    if cfg["lambda"] is None:
        raise ParameterError("simulate needs --lambda or --disk-radius")
    cfg["trials"] = cfg["trials"] or REPORT_TRIALS
    cfg.update({k: v for k, v in params.to_dict().items() if k in _SCENARIO_KEYS})
    if cfg["format"] == "csv":
        return "csv", rows_to_csv([_checked_row(run_point(_point(cfg), cfg["threads"]))])
    est = estimate_outage(params, float(cfg["lambda"]), int(cfg["trials"]), int(cfg["seed"]),
                          _options(cfg))
    result = est.to_dict()
    if params.bounds_valid:
        result["bounds"] = _bounds_result(params, est.lam, cfg)
    return "json", result


def _checked_row(row: dict) -> dict:
    # single-point commands report failures through the exit status
    err = row.get("error")
    if err:
        kind, _, msg = err.partition(": ")
        if kind in ("BracketNotFoundError", "MonotonicityError"):
            raise BracketNotFoundError(msg)
        raise ParameterError(msg)
    return row


def cmd_bounds(cfg: dict):
    params = _params(cfg)
    cfg.update({k: v for k, v in params.to_dict().items() if k in _SCENARIO_KEYS})
    lam = None if cfg["lambda"] is None else float(cfg["lambda"])
    if lam is not None and not lam > 0:
        raise ParameterError(f"--lambda must be positive, got {lam}")
    result = _bounds_result(params, lam, cfg)
    if cfg["format"] == "csv":
        row = {**params.to_dict(), "lambda": lam, "seed": cfg["seed"], "valid": params.bounds_valid,
               "pout_lb": result.get("pout_lower"), "pout_ub": result.get("pout_upper"),
               "tc_lb": result["tc_lower"], "tc_ub": result["tc_upper"]}
        return "csv", rows_to_csv([row])
    return "json", result


def cmd_find_tc(cfg: dict):
    params = _params(cfg)
    cfg.update({k: v for k, v in params.to_dict().items() if k in _SCENARIO_KEYS})
    cfg["trials"] = cfg["trials"] or SEARCH_TRIALS
    cfg["lambda"] = None
    if cfg["format"] == "csv":
        return "csv", rows_to_csv([_checked_row(run_point(_point(cfg), cfg["threads"]))])
    res = find_lambda_star(params, trials=int(cfg["trials"]), tol_rel=float(cfg["tol_rel"]),
                           seed=int(cfg["seed"]), options=_options(cfg))
    result = res.to_dict()
    if params.bounds_valid:
        result["bounds"] = _bounds_result(params, res.lambda_star, cfg)
    return "json", result


def _load_points(path: str) -> list:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise UsageError(f"--points: cannot read {path!r}: {exc.strerror}")
    except json.JSONDecodeError as exc:
        raise UsageError(f"--points: {path!r} is not valid JSON: {exc}")
    if isinstance(data, dict):
        data = data.get("points")
    if not isinstance(data, list) or not all(isinstance(p, dict) for p in data):
        raise UsageError(f"--points: {path!r} must hold a list of objects")
    return [_normalize_keys(p) for p in data]


def cmd_sweep(cfg: dict):
    points = cfg["points"]
    if isinstance(points, str):
        points = _load_points(points)
    elif points is None:
        raise ParameterError("sweep needs --points")
    shared = _point(cfg)
    merged = [{**shared, **p} for p in points]
    rows = sweep(merged, threads=cfg["threads"])
    if cfg["format"] == "json":
        cfg["points"] = points
        return "json", {"rows": rows}
    return "csv", rows_to_csv(rows)


def cmd_eigen_moments(cfg: dict):
    if cfg["N"] is None:
        raise ParameterError("--N is required")
    N, k = int(cfg["N"]), int(cfg["k"])
    seed = int(cfg["seed"])
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(N, k)))
    mom = wishart_eigen_moments(N, k, int(cfg["moment_samples"]), rng, inverse=cfg["inverse"])
    result = mom.to_dict()
    if cfg["format"] == "csv":
        keys = list(result)
        return "csv", ",".join(keys) + "\n" + ",".join(
            format_number(result[k]) for k in keys) + "\n"
    return "json", result


def cmd_design(cfg: dict):
    if cfg["N"] is None:
        raise ParameterError("--N is required")
    k, m = bnd.optimal_design(int(cfg["N"]), float(cfg["alpha"]), cfg["mode"], cfg["beta"],
                              cfg["d"], cfg["epsilon"], cfg["R"])
    if cfg["format"] == "json":
        return "json", {"k": k, "m": m}
    if cfg["format"] == "csv":
        return "csv", f"k,m\n{k},{m}\n"
    return "text", f"k={k}, m={m}\n"


HANDLERS = {"simulate": cmd_simulate, "bounds": cmd_bounds, "find-tc": cmd_find_tc,
            "sweep": cmd_sweep, "eigen-moments": cmd_eigen_moments, "design": cmd_design}

ECHO_KEYS = {
    "simulate": _SCENARIO_KEYS + ("lambda",) + _ENGINE_KEYS,
    "bounds": _SCENARIO_KEYS + ("lambda", "seed", "moment_samples", "mean_nodes"),
    "find-tc": _SCENARIO_KEYS + _ENGINE_KEYS,
    "sweep": _SCENARIO_KEYS + _ENGINE_KEYS + ("points",),
    "eigen-moments": ("N", "k", "moment_samples", "seed", "inverse"),
    "design": ("N", "alpha", "mode", "beta", "d", "epsilon", "R"),
}


def _open_output(path: Optional[str]):
    if path is None:
        return None
    try:
        return open(path, "w", newline="")
    except OSError as exc:
        raise UsageError(f"--output: cannot write {path!r}: {exc.strerror}")


def run(argv=None, stdout=None, stderr=None) -> int:
    stdout = sys.stdout if stdout is None else stdout
    stderr = sys.stderr if stderr is None else stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = resolve(args)
        sink = _open_output(getattr(args, "output", None))
        try:
            kind, payload = HANDLERS[args.command](cfg)
            if kind == "json":
                # the config echo keeps full precision so it reproduces the run
                doc = {"command": args.command,
                       "config": _config_echo(cfg, ECHO_KEYS[args.command]),
                       "result": to_jsonable(payload)}
                text = json.dumps(doc, indent=2) + "\n"
            else:
                text = payload
            (sink or stdout).write(text)
        finally:
            if sink is not None:
                sink.close()
    except UsageError as exc:
        stderr.write(f"{PROG}: error: {exc}\n")
        return 1
    except ParameterError as exc:
        stderr.write(f"{PROG}: parameter error: {exc}\n")
        return 1
    except (BracketNotFoundError, MonotonicityError) as exc:
        stderr.write(f"{PROG}: runtime error: {exc}\n")
        return 2
    return 0


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
