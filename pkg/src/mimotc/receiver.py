"""Partial zero-forcing receivers and per-stream SIR for one realization.

Three strategies are covered:

* no CSIT, cancel the ``floor(m/k)`` nearest interferers;
* no CSIT, constrained max-SIR (CMSIR) choice of the canceled set;
* CSIT multi-mode beamforming, cancel the ``floor(N/k) - 1`` nearest.

Receive rows are returned as ``q^T`` so that ``Q @ y`` is the filtered
output; a blocker ``b`` is nulled when ``q^T b == 0``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .channel import (ChannelDecomposition, complex_gaussian, decompose,
                      null_space_basis, stacked_complement_projection,
                      wishart_eigenvalues, zf_rows_from_projection)
from .geometry import PointProcessSample
from .params import DimensionError, Mode, ParameterError, SystemParams

DEFAULT_SUBSET_LIMIT = 5000
DEFAULT_WINDOW_EXTRA = 4


@dataclass(frozen=True)
class ChannelSet:
    """Channels seen by the typical receiver.

    ``H00`` is N x k without CSIT and the full N x N link with CSIT.
    ``interferers`` stacks one effective N x k matrix per interferer,
    index-aligned with the sorted distances (precoder already applied).
    """

    H00: np.ndarray
    interferers: np.ndarray
    own_decomposition: Optional[ChannelDecomposition] = None


@dataclass(frozen=True)
class SirSample:
    """Per-stream outcome of one realization.

    ``gains[l, n]`` is the post-filter power of interferer ``n`` on stream
    ``l`` (rho without CSIT, mu with CSIT); entries of canceled interferers
    are residuals that the SIR ignores.
    """

    per_stream_sir: np.ndarray
    canceled_sets: tuple
    signal_power: np.ndarray
    gains: np.ndarray
    receive_rows: Optional[np.ndarray] = None

    @property
    def canceled_set(self) -> tuple:
        return self.canceled_sets[0]


def draw_channels(params: SystemParams, count: int, rng: np.random.Generator,
                  explicit_precoders: bool = True) -> ChannelSet:
    """Draw the typical link and ``count`` interferer channels.

    With CSIT each interferer transmits on the top-k right singular vectors
    of its own link. ``explicit_precoders=False`` skips those SVDs and draws
    the effective N x k matrices directly, which has the same law because a
    unitary precoder independent of ``H0n`` leaves it i.i.d. Gaussian.
    """
    N, k = params.N, params.k
    if not params.mode.has_csit:
        return ChannelSet(complex_gaussian((N, k), rng),
                          complex_gaussian((count, N, k), rng))
    H00 = complex_gaussian((N, N), rng)
    dec = decompose(H00, k)
    if explicit_precoders and count:
        H0n = complex_gaussian((count, N, N), rng)
        Hnn = complex_gaussian((count, N, N), rng)
        _, _, Vh = np.linalg.svd(Hnn)
        V_k = np.conj(np.swapaxes(Vh[:, :k, :], -1, -2))
        eff = H0n @ V_k
    else:
        eff = complex_gaussian((count, N, k), rng)
    return ChannelSet(H00, eff, dec)


def _weights(params: SystemParams, distances: np.ndarray) -> np.ndarray:
    return np.asarray(distances, dtype=float) ** (-params.alpha)


def _evaluate_subsets(params: SystemParams, H00: np.ndarray, Hint: np.ndarray,
                      weights: np.ndarray, stream: int, subsets: np.ndarray):
    """SIR of one stream for each candidate canceled set (rows of ``subsets``).

    Returns the SIRs, receive rows, signal powers and interferer gains.
    """
    N, k = params.N, params.k
    M, c = subsets.shape
    h = H00[:, stream]
    own = np.delete(H00, stream, axis=1)
    blocks = Hint[subsets]                              # (M, c, N, k)
    blocks = np.swapaxes(blocks, 1, 2).reshape(M, N, c * k)
    blockers = np.concatenate([np.broadcast_to(own, (M, N, k - 1)), blocks], axis=2)
    if blockers.shape[-1] > N - 1:
        raise DimensionError(
            f"nulling {k - 1} own streams and {c} interferers x {k} streams "
            f"needs {blockers.shape[-1] + 1} > N={N} dimensions")
    proj = stacked_complement_projection(np.broadcast_to(h, (M, N)), blockers)
    rows, s = zf_rows_from_projection(proj)
    amp = np.einsum("mn,inj->mij", rows, Hint)
    gains = (amp.real ** 2 + amp.imag ** 2).sum(axis=2)   # (M, n)
    keep = np.ones(gains.shape, dtype=bool)
    if c:
        keep[np.arange(M)[:, None], subsets] = False
    interference = (gains * weights * keep).sum(axis=1)
    with np.errstate(divide="ignore"):
        sir = np.where(interference > 0,
                       params.d ** (-params.alpha) * s / np.where(interference > 0, interference, 1.0),
                       np.inf)
    return sir, rows, s, gains


def zf_vectors_nearest(H00: np.ndarray, interferer_channels: np.ndarray,
                       params: SystemParams) -> np.ndarray:
    """Receive rows nulling the other own streams and the nearest interferers.

    Each row is the normalized projection of its own column onto the null
    space, which maximizes the signal power inside that space.

    Returns
    -------
    ndarray, shape (k, N)
    """
    c = min(params.cancel_count, len(interferer_channels))
    nearest = np.arange(c)[None, :]
    rows = [_evaluate_subsets(params, H00, interferer_channels,
                              np.zeros(len(interferer_channels)), l, nearest)[1][0]
            for l in range(params.k)]
    return np.stack(rows)


def sir_no_csit_nearest(params: SystemParams, ppp: PointProcessSample,
                        channels: ChannelSet) -> SirSample:
    if params.mode is Mode.CSIT_BF_NEAREST:
        raise ParameterError("sir_no_csit_nearest needs a no-CSIT mode")
    w = _weights(params, ppp.distances)
    c = min(params.cancel_count, ppp.count)
    nearest = np.arange(c)[None, :]
    out = [_evaluate_subsets(params, channels.H00, channels.interferers, w, l, nearest)
           for l in range(params.k)]
    return SirSample(
        per_stream_sir=np.array([o[0][0] for o in out]),
        canceled_sets=tuple(tuple(range(c)) for _ in out),
        signal_power=np.array([o[2][0] for o in out]),
        gains=np.stack([o[3][0] for o in out]),
        receive_rows=np.stack([o[1][0] for o in out]),
    )


def sir_cmsir(params: SystemParams, ppp: PointProcessSample, channels: ChannelSet,
              window: Optional[int] = None,
              subset_limit: int = DEFAULT_SUBSET_LIMIT) -> SirSample:
    """Constrained max-SIR cancelation, searched over the nearest ``window``.

    Every candidate set is scored with interference from all remaining
    interferers, inside and outside the window. Enumeration is exhaustive
    when the number of candidate sets is at most ``subset_limit``; otherwise
    a best-single-swap local search starts from the nearest set. The nearest
    set is always scored, so the result never falls below
    :func:`sir_no_csit_nearest` on the same draw. Ties go to the
    lexicographically smallest index set.
    """
    if params.mode is Mode.CSIT_BF_NEAREST:
        raise ParameterError("CMSIR is defined without CSIT only")
    c_full = params.cancel_count
    window = c_full + DEFAULT_WINDOW_EXTRA if window is None else int(window)
    if window < c_full:
        raise ParameterError(f"window={window} smaller than cancel count {c_full}")
    nearest = sir_no_csit_nearest(params, ppp, channels)
    c = min(c_full, ppp.count)
    pool = min(window, ppp.count)
    if c == 0 or pool == c:
        return nearest

    w = _weights(params, ppp.distances)
    sirs, sets, powers, gains, rows = [], [], [], [], []
    for l in range(params.k):
        def score(subsets, _l=l):
            return _evaluate_subsets(params, channels.H00, channels.interferers, w, _l,
                                     np.asarray(subsets, dtype=int).reshape(-1, c))

        if math.comb(pool, c) <= subset_limit:
            best = _exhaustive(score, pool, c)
        else:
            best = _swap_search(score, pool, c)
        subset, vals = best
        if vals[0] > nearest.per_stream_sir[l]:
            sirs.append(vals[0]); sets.append(subset); rows.append(vals[1])
            powers.append(vals[2]); gains.append(vals[3])
        else:
            sirs.append(nearest.per_stream_sir[l]); sets.append(nearest.canceled_sets[l])
            rows.append(nearest.receive_rows[l]); powers.append(nearest.signal_power[l])
            gains.append(nearest.gains[l])
    return SirSample(np.array(sirs), tuple(sets), np.array(powers),
                     np.stack(gains), np.stack(rows))


def _pick(subsets, out):
    sir = out[0]
    # argmax returns the first maximum; candidates arrive in lexicographic order
    i = int(np.argmax(sir))
    return tuple(int(x) for x in subsets[i]), (sir[i], out[1][i], out[2][i], out[3][i])


def _exhaustive(score, pool, c):
    subsets = np.array(list(itertools.combinations(range(pool), c)), dtype=int)
    return _pick(subsets, score(subsets))


def _swap_search(score, pool, c):
    current = tuple(range(c))
    best = _pick(np.array([current]), score([current]))
    while True:
        inside = set(current)
        moves = sorted({tuple(sorted((inside - {o}) | {i}))
                        for o in current for i in range(pool) if i not in inside})
        if not moves:
            return best
        cand = _pick(np.array(moves), score(moves))
        if cand[1][0] > best[1][0]:
            best, current = cand, cand[0]
        else:
            return best


def bf_receive_matrix(channels: ChannelSet, canceled: int, k: int) -> np.ndarray:
    """``(S0 U_k)^{-1} S0`` for the CSIT receiver canceling the first ``canceled``.

    ``S0`` spans the part of the interferer null space closest to ``U_k``.
    """
    dec = channels.own_decomposition
    N = dec.U_k.shape[0]
    blockers = np.swapaxes(channels.interferers[:canceled], 0, 1).reshape(N, canceled * k)
    S0 = null_space_basis(blockers, k, n=N, align=dec.U_k)
    return np.linalg.solve(S0 @ dec.U_k, S0)


def sir_csit_bf(params: SystemParams, ppp: PointProcessSample,
                channels: ChannelSet) -> SirSample:
    if not params.mode.has_csit:
        raise ParameterError("sir_csit_bf needs CSIT mode")
    if channels.own_decomposition is None:
        raise ParameterError("CSIT channel set lacks the own-link decomposition")
    k = params.k
    c = min(params.cancel_count, ppp.count)
    A = bf_receive_matrix(channels, c, k)
    coef = np.einsum("ln,inj->lij", A, channels.interferers)
    mu = (coef.real ** 2 + coef.imag ** 2).sum(axis=2)           # (k, n)
    gamma = channels.own_decomposition.eigenvalues[:k]
    w = _weights(params, ppp.distances)
    interference = (mu[:, c:] * w[c:]).sum(axis=1)
    with np.errstate(divide="ignore"):
        sir = np.where(interference > 0,
                       params.d ** (-params.alpha) * gamma / np.where(interference > 0, interference, 1.0),
                       np.inf)
    return SirSample(sir, tuple(tuple(range(c)) for _ in range(k)), gamma.copy(), mu, A)


def compute_sir(params: SystemParams, ppp: PointProcessSample, channels: ChannelSet,
                window: Optional[int] = None,
                subset_limit: int = DEFAULT_SUBSET_LIMIT) -> SirSample:
    if params.mode is Mode.NO_CSIT_NEAREST:
        return sir_no_csit_nearest(params, ppp, channels)
    if params.mode is Mode.NO_CSIT_CMSIR:
        return sir_cmsir(params, ppp, channels, window, subset_limit)
    return sir_csit_bf(params, ppp, channels)


def fast_sir(params: SystemParams, ppp: PointProcessSample,
             rng: np.random.Generator) -> SirSample:
    """Draw per-stream SIR from the post-filter distributions directly.

    Without CSIT the signal power is Gamma(N - k c - k + 1, 1) and each
    surviving interferer contributes Gamma(k, 1); with CSIT the gains are
    the top-k eigenvalues of a fresh Wishart draw and interferers again
    contribute Gamma(k, 1). Streams are drawn independently, so only the
    per-stream marginals are reproduced.
    """
    if params.mode is Mode.NO_CSIT_CMSIR:
        raise ParameterError("fast path unavailable for CMSIR: selection couples "
                             "channels and geometry")
    k, n = params.k, ppp.count
    c = min(params.cancel_count, n)
    if params.mode.has_csit:
        signal = wishart_eigenvalues(params.N, 1, rng)[0, :k]
    else:
        signal = rng.gamma(params.N - k * c - k + 1, size=k)
    gains = rng.gamma(k, size=(k, n))
    gains[:, :c] = 0.0
    w = _weights(params, ppp.distances)
    interference = gains @ w
    with np.errstate(divide="ignore"):
        sir = np.where(interference > 0,
                       params.d ** (-params.alpha) * signal / np.where(interference > 0, interference, 1.0),
                       np.inf)
    return SirSample(sir, tuple(tuple(range(c)) for _ in range(k)), signal, gains)


def fast_sir_batch(params: SystemParams, distances: np.ndarray, counts: np.ndarray,
                   rng: np.random.Generator) -> np.ndarray:
    """Vectorized :func:`fast_sir` over padded realizations.

    ``distances`` is (T, W) with ``inf`` padding as produced by
    :func:`geometry.sample_interferer_batch`. Returns (T, k) SIRs.
    """
    if params.mode is Mode.NO_CSIT_CMSIR:
        raise ParameterError("fast path unavailable for CMSIR")
    T, W = distances.shape
    k = params.k
    c = np.minimum(params.cancel_count, counts)
    if params.mode.has_csit:
        signal = wishart_eigenvalues(params.N, T, rng)[:, :k] if T else np.empty((0, k))
    else:
        signal = rng.gamma((params.N - k * c - k + 1)[:, None], size=(T, k))
    w = distances ** (-params.alpha)
    w[np.arange(W)[None, :] < c[:, None]] = 0.0
    gains = rng.gamma(k, size=(T, k, W))
    interference = np.einsum("tkw,tw->tk", gains, w)
    with np.errstate(divide="ignore"):
        return np.where(interference > 0,
                        params.d ** (-params.alpha) * signal / np.where(interference > 0, interference, 1.0),
                        np.inf)
