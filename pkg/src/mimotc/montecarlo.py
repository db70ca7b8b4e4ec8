"""Outage estimation, lambda* search and parameter sweeps.

Trials are grouped into fixed blocks of ``BLOCK_TRIALS``; block ``b`` draws
from ``SeedSequence(seed, spawn_key=(b,))``. Blocks run on a thread pool
and are reassembled in order, so every result depends only on
``(params, trials, seed)`` and never on the worker count.

On the finite disk the node count does not depend on the density, and the
realization at density ``lam`` is the realization at ``lam_ref`` with all
distances scaled by ``sqrt(lam_ref / lam)``. Hence
``SIR(lam) = SIR(lam_ref) * (lam_ref / lam) ** (alpha / 2)`` exactly for
the same seed, which is how :class:`OutageCurve` evaluates many densities
from one simulation (common random numbers).
"""

from __future__ import annotations

import csv
import io
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Optional

import numpy as np

from . import bounds as bnd
from .channel import wishart_eigen_moments
from .geometry import DEFAULT_MEAN_NODES, sample_interferer_batch, sample_interferers
from .params import Mode, ParameterError, SystemParams
from .receiver import (DEFAULT_SUBSET_LIMIT, compute_sir, draw_channels,
                       fast_sir_batch)

log = logging.getLogger(__name__)

BLOCK_TRIALS = 500
MIN_TRIALS = 100
SEARCH_TRIALS = 20_000
REPORT_TRIALS = 100_000
MOMENT_SAMPLES = 100_000
MAX_EXPANSIONS = 20
EXPANSION_FACTOR = 4.0

CSV_COLUMNS = ("mode", "N", "k", "m", "alpha", "beta", "d", "epsilon", "lambda",
               "trials", "seed", "pout_hat", "ci95", "pout_lb", "pout_ub", "valid",
               "tc", "tc_lb", "tc_ub", "error")


class BracketNotFoundError(RuntimeError):
    """The outage target is not crossed inside the searched density range."""


class MonotonicityError(RuntimeError):
    """Estimated outage fell with density by more than its confidence interval."""


def ci95(p: float, trials: int) -> float:
    return 1.96 * max(math.sqrt(p * (1 - p) / trials), 1.0 / trials)


@dataclass(frozen=True)
class SimOptions:
    """Engine settings that do not change the modeled scenario."""

    mean_nodes: float = DEFAULT_MEAN_NODES
    engine: str = "auto"
    window: Optional[int] = None
    subset_limit: int = DEFAULT_SUBSET_LIMIT
    explicit_precoders: bool = True
    threads: Optional[int] = None

    def resolve_engine(self, params: SystemParams) -> str:
        if self.engine not in ("auto", "fast", "full"):
            raise ParameterError(f"engine must be auto, fast or full, got {self.engine!r}")
        if self.engine == "fast" and params.mode is Mode.NO_CSIT_CMSIR:
            raise ParameterError("fast engine unavailable for CMSIR")
        if self.engine != "auto":
            return self.engine
        # the distribution-level shortcut matches the matrix chain only here
        return "fast" if params.mode is Mode.NO_CSIT_NEAREST else "full"


def _block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(block,)))


def simulate_sir(params: SystemParams, lam: float, trials: int, seed: int,
                 options: SimOptions = SimOptions()) -> np.ndarray:
    """Per-stream SIR for ``trials`` independent realizations, shape (trials, k)."""
    if trials < 1:
        raise ParameterError(f"trials must be positive, got {trials}")
    if not lam > 0:
        raise ParameterError(f"lambda must be positive, got {lam}")
    engine = options.resolve_engine(params)
    nblocks = -(-trials // BLOCK_TRIALS)

    def run_block(b: int) -> np.ndarray:
        rng = _block_rng(seed, b)
        size = min(BLOCK_TRIALS, trials - b * BLOCK_TRIALS)
        if engine == "fast":
            dist, counts = sample_interferer_batch(lam, options.mean_nodes, size, rng)
            return fast_sir_batch(params, dist, counts, rng)
        out = np.empty((size, params.k))
        for t in range(size):
            ppp = sample_interferers(lam, options.mean_nodes, rng)
            ch = draw_channels(params, ppp.count, rng, options.explicit_precoders)
            out[t] = compute_sir(params, ppp, ch, options.window,
                                 options.subset_limit).per_stream_sir
        return out

    threads = options.threads or os.cpu_count() or 1
    if threads == 1 or nblocks == 1:
        parts = [run_block(b) for b in range(nblocks)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run_block, range(nblocks)))
    return np.concatenate(parts, axis=0)


@dataclass(frozen=True)
class OutageEstimate:
    p_hat: float
    ci95_half_width: float
    trials: int
    lam: float
    seed: int
    per_stream_p: tuple
    per_stream_ci: tuple

    def to_dict(self) -> dict:
        return {"pout_hat": self.p_hat, "ci95": self.ci95_half_width, "trials": self.trials,
                "lambda": self.lam, "seed": self.seed,
                "per_stream_pout": list(self.per_stream_p),
                "per_stream_ci95": list(self.per_stream_ci)}


def _outage_from_sir(params: SystemParams, sir: np.ndarray, lam: float,
                     seed: int) -> OutageEstimate:
    T = sir.shape[0]
    counts = (sir <= params.beta).sum(axis=0)
    per = tuple(float(c) / T for c in counts)
    p = per[params.outage_stream]
    return OutageEstimate(p, ci95(p, T), T, lam, seed, per,
                          tuple(ci95(q, T) for q in per))


def estimate_outage(params: SystemParams, lam: float, trials: int = REPORT_TRIALS,
                    seed: int = 0, options: SimOptions = SimOptions()) -> OutageEstimate:
    """Empirical outage of the capacity-defining stream at density ``lam``.

    That stream is stream 1 without CSIT and stream k with CSIT; outage
    rates of all streams are reported alongside.
    """
    if trials < MIN_TRIALS:
        raise ParameterError(f"trials must be at least {MIN_TRIALS}, got {trials}")
    sir = simulate_sir(params, lam, trials, seed, options)
    return _outage_from_sir(params, sir, lam, seed)


class OutageCurve:
    """Outage as a function of density from one common-random-number run."""

    def __init__(self, params: SystemParams, sir_ref: np.ndarray, lam_ref: float, seed: int):
        self.params = params
        self.lam_ref = lam_ref
        self.seed = seed
        self.trials = sir_ref.shape[0]
        self._sorted = np.sort(sir_ref[:, params.outage_stream])
        self._sir_ref = sir_ref

    @classmethod
    def simulate(cls, params: SystemParams, trials: int, seed: int, lam_ref: float,
                 options: SimOptions = SimOptions()) -> "OutageCurve":
        if trials < MIN_TRIALS:
            raise ParameterError(f"trials must be at least {MIN_TRIALS}, got {trials}")
        return cls(params, simulate_sir(params, lam_ref, trials, seed, options), lam_ref, seed)

    def pout(self, lam: float) -> float:
        threshold = self.params.beta * (lam / self.lam_ref) ** (self.params.alpha / 2)
        return float(np.searchsorted(self._sorted, threshold, side="right")) / self.trials

    def estimate(self, lam: float) -> OutageEstimate:
        sir = self._sir_ref * (self.lam_ref / lam) ** (self.params.alpha / 2)
        return _outage_from_sir(self.params, sir, lam, self.seed)

    def ci(self, lam: float) -> float:
        return ci95(self.pout(lam), self.trials)


@dataclass(frozen=True)
class TcResult:
    lambda_star: float
    capacity: float
    bracket: tuple
    iterations: int
    achieved_pout: float
    achieved_ci95: float
    capacity_ci: tuple
    epsilon: float
    trials: int
    seed: int

    def to_dict(self) -> dict:
        return {"lambda_star": self.lambda_star, "capacity": self.capacity,
                "bracket": list(self.bracket), "iterations": self.iterations,
                "achieved_pout": self.achieved_pout, "achieved_ci95": self.achieved_ci95,
                "capacity_ci": list(self.capacity_ci), "epsilon": self.epsilon,
                "trials": self.trials, "seed": self.seed}


def _initial_lambda(params: SystemParams) -> float:
    return 0.1 / (math.pi * params.d ** 2)


def _bracket(curve: OutageCurve, target: float, lam0: float):
    lo = hi = lam0
    p = curve.pout(lam0)
    expansions = 0
    if p <= target:
        while True:
            if expansions == MAX_EXPANSIONS:
                raise BracketNotFoundError(
                    f"outage stays <= {target} up to lambda={hi:.6g}")
            nxt = hi * EXPANSION_FACTOR
            q = curve.pout(nxt)
            if q < p - 2 * curve.ci(hi):
                raise MonotonicityError(
                    f"outage fell from {p:.4g} to {q:.4g} as lambda rose to {nxt:.6g}")
            expansions += 1
            lo, hi, p = hi, nxt, q
            if q > target:
                break
    else:
        while True:
            if expansions == MAX_EXPANSIONS:
                raise BracketNotFoundError(
                    f"outage stays above {target} down to lambda={lo:.6g}")
            nxt = lo / EXPANSION_FACTOR
            q = curve.pout(nxt)
            if q > p + 2 * curve.ci(lo):
                raise MonotonicityError(
                    f"outage rose from {p:.4g} to {q:.4g} as lambda fell to {nxt:.6g}")
            expansions += 1
            hi, lo, p = lo, nxt, q
            if q <= target:
                break
    return lo, hi, expansions


def _bisect(curve: OutageCurve, target: float, lam0: float, tol_rel: float):
    lo, hi, it = _bracket(curve, target, lam0)
    while hi / lo > 1 + tol_rel:
        mid = math.sqrt(lo * hi)
        if curve.pout(mid) <= target:
            lo = mid
        else:
            hi = mid
        it += 1
    return lo, hi, it


def find_lambda_star(params: SystemParams, epsilon: Optional[float] = None,
                     trials: int = SEARCH_TRIALS, tol_rel: float = 1e-3, seed: int = 0,
                     options: SimOptions = SimOptions(),
                     lambda0: Optional[float] = None) -> TcResult:
    """Largest density whose outage stays within ``epsilon``, and the capacity.

    The bracket grows geometrically from ``lambda0`` and is then bisected in
    log-density until its ratio is at most ``1 + tol_rel``. The reported
    density is the geometric midpoint. ``capacity_ci`` inverts the outage
    curve at ``epsilon`` minus and plus its 95% half-width.
    """
    eps = params.epsilon if epsilon is None else epsilon
    if not 0 < eps < 1:
        raise ParameterError(f"epsilon must lie in (0, 1), got {eps}")
    lam0 = _initial_lambda(params) if lambda0 is None else lambda0
    curve = OutageCurve.simulate(params, trials, seed, lam0, options)
    lo, hi, iterations = _bisect(curve, eps, lam0, tol_rel)
    lam_star = math.sqrt(lo * hi)
    scale = params.k * (1 - eps) * params.R
    half = ci95(eps, trials)
    ci_lams = []
    for target in (eps - half, eps + half):
        try:
            a, b, _ = _bisect(curve, target, lam_star, tol_rel)
            ci_lams.append(math.sqrt(a * b))
        except BracketNotFoundError:
            ci_lams.append(math.nan)
    p_star = curve.pout(lam_star)
    return TcResult(lam_star, scale * lam_star, (lo, hi), iterations, p_star,
                    ci95(p_star, trials), (scale * ci_lams[0], scale * ci_lams[1]),
                    eps, trials, seed)


@lru_cache(maxsize=64)
def cached_moments(N: int, k: int, samples: int = MOMENT_SAMPLES, seed: int = 0):
    """Wishart moments for the CSIT bounds; the inverse is dropped when it diverges."""
    rng = np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(N, k)))
    return wishart_eigen_moments(N, k, samples, rng, inverse=k < N)


POINT_KEYS = {"mode", "N", "k", "m", "alpha", "beta", "d", "epsilon", "R", "lambda",
              "trials", "seed", "mean_nodes", "window", "subset_limit", "engine",
              "tol_rel", "moment_samples", "explicit_precoders"}


def params_from_point(point: dict) -> SystemParams:
    unknown = set(point) - POINT_KEYS
    if unknown:
        raise ParameterError(f"unknown keys in sweep point: {sorted(unknown)}")
    fields = {k: point[k] for k in ("mode", "N", "k", "m", "alpha", "beta", "d",
                                    "epsilon", "R") if point.get(k) is not None}
    if "N" not in fields:
        raise ParameterError("sweep point lacks N")
    return SystemParams(**fields)


def format_number(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".12g")


def run_point(point: dict, threads: Optional[int] = None) -> dict:
    """One sweep row; failures are captured in the ``error`` column."""
    row = dict.fromkeys(CSV_COLUMNS)
    for key in ("mode", "N", "k", "m", "alpha", "beta", "d", "epsilon", "lambda",
                "trials", "seed"):
        row[key] = point.get(key)
    try:
        params = params_from_point(point)
        row.update({k: v for k, v in params.to_dict().items() if k in row})
        seed = int(point.get("seed", 0))
        options = SimOptions(
            mean_nodes=point.get("mean_nodes", DEFAULT_MEAN_NODES),
            engine=point.get("engine", "auto"),
            window=point.get("window"),
            subset_limit=point.get("subset_limit", DEFAULT_SUBSET_LIMIT),
            explicit_precoders=point.get("explicit_precoders", True),
            threads=threads)
        row["seed"] = seed
        if point.get("lambda") is not None:
            trials = int(point.get("trials", REPORT_TRIALS))
            est = estimate_outage(params, float(point["lambda"]), trials, seed, options)
            lam, p, ci = est.lam, est.p_hat, est.ci95_half_width
        else:
            trials = int(point.get("trials", SEARCH_TRIALS))
            res = find_lambda_star(params, trials=trials, seed=seed, options=options,
                                   tol_rel=point.get("tol_rel", 1e-3))
            lam, p, ci = res.lambda_star, res.achieved_pout, res.achieved_ci95
            row["tc"] = res.capacity
        row.update({"lambda": lam, "trials": trials, "pout_hat": p, "ci95": ci})
        row["valid"] = params.bounds_valid
        if params.bounds_valid:
            moments = None
            if params.mode.has_csit:
                moments = cached_moments(params.N, params.k,
                                         int(point.get("moment_samples", MOMENT_SAMPLES)), seed)
            pb = bnd.pout_bounds(params, lam, moments)
            tb = bnd.tc_bounds(params, moments)
            row.update({"pout_lb": pb.lower, "pout_ub": pb.upper,
                        "tc_lb": tb.lower, "tc_ub": tb.upper})
    except (ParameterError, BracketNotFoundError, MonotonicityError, TypeError,
            ValueError) as exc:
        log.warning("sweep point %r failed: %s", point, exc)
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def sweep(points: Iterable[dict], output=None, threads: Optional[int] = None) -> list:
    """Evaluate each point in order and write the fixed-schema CSV.

    ``output`` may be a path, a text stream or ``None``. Returns the rows.
    """
    rows = [run_point(dict(p), threads) for p in points]
    text = rows_to_csv(rows)
    if output is not None:
        if hasattr(output, "write"):
            output.write(text)
        else:
            with open(output, "w", newline="") as fh:
                fh.write(text)
    return rows


def rows_to_csv(rows: list) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        mode = row.get("mode")
        cells = [mode.value if isinstance(mode, Mode) else (mode or "")]
        cells += [format_number(row.get(c)) for c in CSV_COLUMNS[1:-1]]
        cells.append(row.get("error") or "")
        writer.writerow(cells)
    return buf.getvalue()


def stream_sweep_m(N: int, k: int, alpha: float) -> int:
    """Cancelation dimensions for the stream sweep: ``min(floor((1-2/a)N), floor((N-k)/k))``."""
    return min(int(math.floor((1 - 2 / alpha) * N)), (N - k) // k)
