"""Closed-form outage and transmission-capacity bounds.

Every function evaluates a published closed form as written; the Monte
Carlo module is the independent check. Probabilities are reported both
raw and clamped to [0, 1].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

from scipy.special import gammaln

from .channel import EigenMoments
from .params import Mode, ParameterError, SystemParams


@dataclass(frozen=True)
class PoutBounds:
    lower: float
    upper: float
    lower_raw: float
    upper_raw: float
    valid: bool

    @classmethod
    def from_raw(cls, lower_raw: float, upper_raw: float, valid: bool) -> "PoutBounds":
        return cls(_clamp(lower_raw), _clamp(upper_raw), lower_raw, upper_raw, valid)

    def to_dict(self) -> dict:
        return {"pout_lower": self.lower, "pout_upper": self.upper,
                "pout_lower_raw": self.lower_raw, "pout_upper_raw": self.upper_raw,
                "valid": self.valid}


@dataclass(frozen=True)
class TcBounds:
    """Transmission-capacity bounds in bits/s/Hz per unit area."""

    lower: float
    upper: float
    params: SystemParams
    valid: bool
    notes: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"tc_lower": self.lower, "tc_upper": self.upper, "valid": self.valid,
                **{f"note_{k}": v for k, v in self.notes.items()}}


def _clamp(x: float) -> float:
    if math.isnan(x):
        return x
    return min(1.0, max(0.0, x))


def cancelable_count(params: SystemParams) -> int:
    return params.cancel_count


def gamma_ratio(c: float, alpha: float) -> float:
    """Exact ``Gamma(c + alpha/2) / Gamma(c + 1)`` through log-gamma."""
    return math.exp(gammaln(c + alpha / 2) - gammaln(c + 1))


def gamma_ratio_bound(c: float, alpha: float) -> float:
    """Upper bound ``(c + 1/8 + alpha/4)^(alpha/2 - 1)`` on :func:`gamma_ratio`."""
    if not (c > 0 and alpha > 0):
        raise ParameterError(f"need c > 0 and alpha > 0, got c={c}, alpha={alpha}")
    return (c + 1 / 8 + alpha / 4) ** (alpha / 2 - 1)


def _far_field(params: SystemParams, c_plus_one: float) -> float:
    # (alpha/2 - 1)^-1 (c + 1)^(1 - alpha/2): bound on sum of E{d_i^-alpha} beyond the canceled set
    a = params.alpha
    return (a / 2 - 1) ** -1 * c_plus_one ** (1 - a / 2)


def _check_lambda(lam: float) -> None:
    if not lam > 0:
        raise ParameterError(f"lambda must be positive, got {lam}")


def pout_bounds_no_csit(params: SystemParams, lam: float) -> PoutBounds:
    """Outage bounds when the ``floor(m/k)`` nearest interferers are nulled.

    The same bounds hold for CMSIR cancelation.
    """
    if params.mode.has_csit:
        raise ParameterError("pout_bounds_no_csit needs a no-CSIT mode")
    _check_lambda(lam)
    N, k, m, a, b, d = params.N, params.k, params.m, params.alpha, params.beta, params.d
    c = m // k
    load = d ** a * b * (math.pi * lam) ** (a / 2)
    if k > 1:
        lower = 1 - (N - m - k + 1) / ((k - 1) * load) * (c + 5 / 8 + a / 4) ** (a / 2)
    else:
        lower = 1 - (N - m) / load * (m + 13 / 8 + a / 4) ** (a / 2)
    tail = k * _far_field(params, c + 1)
    if N > k + m:
        upper = load * tail / (N - m - k)
    else:
        # k + m = N: s is exponential, Jensen on exp(-x)
        upper = 1 - math.exp(-load * tail)
    return PoutBounds.from_raw(lower, upper, params.bounds_valid)


def pout_bounds_csit(params: SystemParams, lam: float, moments: EigenMoments) -> PoutBounds:
    """Outage bounds for multi-mode beamforming, worst (k-th) stream.

    ``moments`` supplies ``E{gamma_k}`` and ``E{1/gamma_k}``; a missing
    inverse moment (divergent, k = N) gives an infinite raw upper bound.
    """
    if not params.mode.has_csit:
        raise ParameterError("pout_bounds_csit needs CSIT mode")
    _check_moments(params, moments)
    _check_lambda(lam)
    N, k, a, b, d = params.N, params.k, params.alpha, params.beta, params.d
    load = d ** a * b * (math.pi * lam) ** (a / 2)
    nk = N // k
    if k > 1:
        lower = 1 - moments.mean_gamma_k / ((k - 1) * load) * (nk - 1 + 5 / 8 + a / 4) ** (a / 2)
    else:
        lower = 1 - moments.mean_gamma_k / load * (nk - 1 + 13 / 8 + a / 4) ** (a / 2)
    if moments.mean_inv_gamma_k is None:
        upper = math.inf
    else:
        upper = load * k * moments.mean_inv_gamma_k * _far_field(params, nk)
    return PoutBounds.from_raw(lower, upper, params.bounds_valid)


def _check_moments(params: SystemParams, moments: EigenMoments) -> None:
    if moments is None:
        raise ParameterError("CSIT bounds need eigenvalue moments")
    if (moments.N, moments.k) != (params.N, params.k):
        raise ParameterError(
            f"moments are for (N={moments.N}, k={moments.k}), "
            f"params have (N={params.N}, k={params.k})")


def pout_bounds(params: SystemParams, lam: float,
                moments: Optional[EigenMoments] = None) -> PoutBounds:
    if params.mode.has_csit:
        return pout_bounds_csit(params, lam, moments)
    return pout_bounds_no_csit(params, lam)


def tc_bounds_no_csit(params: SystemParams) -> TcBounds:
    """Capacity bounds obtained by setting the outage bounds equal to epsilon."""
    if params.mode.has_csit:
        raise ParameterError("tc_bounds_no_csit needs a no-CSIT mode")
    N, k, m, a, b, d = params.N, params.k, params.m, params.alpha, params.beta, params.d
    eps, R = params.epsilon, params.R
    c = m // k
    if k > 1:
        upper = (k * R * (1 - eps) ** (1 - 2 / a) / math.pi
                 * ((N - m - k + 1) / ((k - 1) * d ** a * b)) ** (2 / a)
                 * (c + 5 / 8 + a / 4))
    else:
        upper = (R * (1 - eps) ** (1 - 2 / a) / math.pi
                 * ((N - m) / (d ** a * b)) ** (2 / a)
                 * (m + 13 / 8 + a / 4 + 1))
    far = _far_field(params, c + 1) ** (-2 / a)
    if k + m == N:
        lower = k * R * (1 - eps) / math.pi * (-math.log(1 - eps) / (k * b * d ** a)) ** (2 / a) * far
    else:
        lower = k * R * (1 - eps) / math.pi * ((N - k - m) * eps / (k * b * d ** a)) ** (2 / a) * far
    return TcBounds(lower, upper, params, params.bounds_valid)


def tc_bounds_csit(params: SystemParams, moments: EigenMoments) -> TcBounds:
    """Beamforming capacity bounds with measured finite-N eigenvalue moments.

    The asymptotic constants ``c1 N`` and ``c2 / N`` are replaced by the
    measured ``E{gamma_k}`` and ``E{1/gamma_k}``.
    """
    if not params.mode.has_csit:
        raise ParameterError("tc_bounds_csit needs CSIT mode")
    _check_moments(params, moments)
    N, k, a, b, d = params.N, params.k, params.alpha, params.beta, params.d
    eps, R = params.epsilon, params.R
    nk = N // k
    g = moments.mean_gamma_k
    if k > 1:
        upper = ((1 - eps) ** (1 - 2 / a) * k * R / math.pi
                 * (g / ((k - 1) * d ** a * b)) ** (2 / a) * (nk + 3 / 8 + a / 4))
    else:
        upper = ((1 - eps) ** (1 - 2 / a) * R / math.pi
                 * (g / (d ** a * b)) ** (2 / a) * (N + 5 / 8 + a / 4))
    if moments.mean_inv_gamma_k is None:
        lower = 0.0
    else:
        denom = d ** a * b * moments.mean_inv_gamma_k * _far_field(params, nk)
        lower = (1 - eps) * R * k ** (1 - 2 / a) / math.pi * (eps / denom) ** (2 / a)
    notes = {"moments": "measured", "moment_samples": moments.samples}
    return TcBounds(lower, upper, params, params.bounds_valid, notes)


def tc_bounds(params: SystemParams, moments: Optional[EigenMoments] = None) -> TcBounds:
    if params.mode.has_csit:
        return tc_bounds_csit(params, moments)
    return tc_bounds_no_csit(params)


def optimal_design(N: int, alpha: float, mode, beta: float = 1.0, d: float = 1.0,
                   epsilon: float = 0.1, R: float = 1.0) -> tuple:
    """Stream count and cancelation dimensions that maximize the bounds.

    With CSIT this is single-stream beamforming nulling N - 1 interferers.
    Without CSIT it is one stream with ``m`` the floor or ceiling of
    ``(1 - 2/alpha) N``, whichever gives the larger capacity lower bound
    (smaller ``m`` on an exact tie). Candidates violating the
    cancel-count condition are used only if no valid candidate exists.
    """
    mode = Mode.parse(mode)
    if N < 2 or not alpha > 2:
        raise ParameterError(f"need N >= 2 and alpha > 2, got N={N}, alpha={alpha}")
    if mode.has_csit:
        return 1, N - 1
    target = (1 - 2 / alpha) * N
    cands = sorted({min(max(int(math.floor(target)), 0), N - 1),
                    min(max(int(math.ceil(target)), 0), N - 1)})
    scored = []
    for m in cands:
        p = SystemParams(N=N, k=1, m=m, alpha=alpha, beta=beta, d=d, epsilon=epsilon,
                         R=R, mode=mode)
        scored.append((not p.bounds_valid, -tc_bounds_no_csit(p).lower, m))
    return 1, min(scored)[2]
