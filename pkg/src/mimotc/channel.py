"""Rayleigh channel generation, decompositions and Wishart eigenvalue moments."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .params import DimensionError, ParameterError

RANK_RTOL = 1e-10
_EIG_CHUNK = 20000


def complex_gaussian(shape, rng: np.random.Generator) -> np.ndarray:
    """i.i.d. CN(0, 1) array: real and imaginary parts each of variance 1/2."""
    z = rng.standard_normal(tuple(shape) + (2,))
    return (z[..., 0] + 1j * z[..., 1]) * np.sqrt(0.5)


def sample_complex_gaussian(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    if rows < 1 or cols < 1:
        raise ParameterError(f"matrix dimensions must be positive, got {rows}x{cols}")
    return complex_gaussian((rows, cols), rng)


@dataclass(frozen=True)
class ChannelDecomposition:
    """Truncated SVD ``H ~ U_k D_k V_k^*`` plus all eigenvalues of ``H H^*``."""

    U_k: np.ndarray
    D_k: np.ndarray
    V_k: np.ndarray
    eigenvalues: np.ndarray


def decompose(H: np.ndarray, k: int) -> ChannelDecomposition:
    H = np.asarray(H)
    if not 1 <= k <= min(H.shape):
        raise ParameterError(f"k={k} outside 1..{min(H.shape)} for a {H.shape} matrix")
    U, sv, Vh = np.linalg.svd(H)
    eig = np.zeros(H.shape[0])
    eig[: sv.size] = sv ** 2
    return ChannelDecomposition(
        U_k=U[:, :k],
        D_k=np.diag(sv[:k]),
        V_k=Vh[:k].conj().T,
        eigenvalues=eig,
    )


def null_space_basis(blockers, out_rows: int, n: Optional[int] = None,
                     align: Optional[np.ndarray] = None) -> np.ndarray:
    """Rows that annihilate every blocker: ``S @ b == 0``.

    Parameters
    ----------
    blockers : sequence of vectors or (n, p) array of column vectors
    out_rows : int
        Number of orthonormal rows to return.
    n : int, optional
        Ambient dimension; needed only when ``blockers`` is empty.
    align : ndarray, shape (n, out_rows), optional
        When the annihilating subspace is larger than ``out_rows``, pick the
        rows spanning the projection of these columns onto it. Without it
        the leading basis vectors are returned.

    Returns
    -------
    ndarray, shape (out_rows, n)
        Orthonormal rows (``S S^* = I``).
    """
    B = _as_columns(blockers, n)
    dim = B.shape[0]
    if B.shape[1]:
        U, sv, _ = np.linalg.svd(B, full_matrices=True)
        rank = int(np.sum(sv > RANK_RTOL * sv[0])) if sv.size and sv[0] > 0 else 0
        W = U[:, rank:]
    else:
        W = np.eye(dim, dtype=complex)
    if W.shape[1] < out_rows:
        raise DimensionError(
            f"{dim - W.shape[1]} independent blockers leave {W.shape[1]} "
            f"dimensions, {out_rows} requested")
    if W.shape[1] > out_rows and align is not None:
        coords = W.conj().T @ np.asarray(align)
        Q, _ = np.linalg.qr(coords)
        W = W @ Q[:, :out_rows]
    return W[:, :out_rows].conj().T


def _as_columns(blockers, n) -> np.ndarray:
    if isinstance(blockers, np.ndarray) and blockers.ndim == 2:
        return blockers.astype(complex, copy=False)
    vecs = [np.asarray(b, dtype=complex).ravel() for b in blockers]
    if not vecs:
        if n is None:
            raise ParameterError("ambient dimension n is required with no blockers")
        return np.zeros((n, 0), dtype=complex)
    return np.stack(vecs, axis=1)


@dataclass(frozen=True)
class EigenMoments:
    """Monte Carlo moments of the k-th largest eigenvalue of an N x N Wishart."""

    N: int
    k: int
    mean_gamma_k: float
    mean_inv_gamma_k: Optional[float]
    samples: int
    ci_half_widths: tuple

    def to_dict(self) -> dict:
        return {
            "N": self.N, "k": self.k,
            "mean_gamma_k": self.mean_gamma_k,
            "mean_inv_gamma_k": self.mean_inv_gamma_k,
            "samples": self.samples,
            "ci95_gamma": self.ci_half_widths[0],
            "ci95_inv_gamma": self.ci_half_widths[1],
        }


def wishart_eigenvalues(N: int, samples: int, rng: np.random.Generator) -> np.ndarray:
    """Eigenvalues of ``H H^*`` in descending order, one row per sample."""
    out = np.empty((samples, N))
    for start in range(0, samples, _EIG_CHUNK):
        stop = min(start + _EIG_CHUNK, samples)
        H = complex_gaussian((stop - start, N, N), rng)
        W = H @ np.conj(np.swapaxes(H, -1, -2))
        out[start:stop] = np.linalg.eigvalsh(W)[:, ::-1]
    return out


def wishart_eigen_moments(N: int, k: int, samples: int, rng: np.random.Generator,
                          inverse: bool = True) -> EigenMoments:
    """Estimate ``E{gamma_k}`` and ``E{1/gamma_k}`` for i.i.d. CN(0,1) H.

    The smallest eigenvalue of a square complex Wishart matrix has positive
    density at zero, so ``E{1/gamma_N}`` diverges; that request is refused.
    """
    if not 1 <= k <= N:
        raise ParameterError(f"k must satisfy 1 <= k <= N={N}, got {k}")
    if samples < 1000:
        raise ParameterError(f"samples must be at least 1000, got {samples}")
    if inverse and k == N:
        raise ParameterError(
            f"E{{1/gamma_{k}}} diverges for an {N}x{N} channel; "
            "skip the inverse moment")
    gk = wishart_eigenvalues(N, samples, rng)[:, k - 1]
    z = 1.96 / np.sqrt(samples)
    mean_inv = ci_inv = None
    if inverse:
        inv = 1.0 / gk
        mean_inv, ci_inv = float(inv.mean()), float(z * inv.std(ddof=1))
    return EigenMoments(N, k, float(gk.mean()), mean_inv, samples,
                        (float(z * gk.std(ddof=1)), ci_inv))


def orthonormal_columns_residual(A: np.ndarray) -> float:
    """Max deviation of ``A^* A`` from identity."""
    G = A.conj().T @ A
    return float(np.max(np.abs(G - np.eye(G.shape[0]))))


def stacked_complement_projection(targets: np.ndarray, blockers: np.ndarray) -> np.ndarray:
    """Project each target vector onto the orthogonal complement of its blockers.

    ``targets`` has shape (M, n) and ``blockers`` shape (M, n, p). Assumes
    generic (full column rank) blockers, which random channels are with
    probability one; use :func:`null_space_basis` for hand-built inputs.
    """
    if blockers.shape[-1] == 0:
        return targets.copy()
    if blockers.shape[-1] >= blockers.shape[-2]:
        raise DimensionError(
            f"{blockers.shape[-1]} blockers leave no room in {blockers.shape[-2]} dimensions")
    Q, _ = np.linalg.qr(blockers)
    coef = np.einsum("mnp,mn->mp", Q.conj(), targets)
    return targets - np.einsum("mnp,mp->mn", Q, coef)


def zf_rows_from_projection(proj: np.ndarray):
    """Receive rows ``q^T = (P h)^* / |P h|`` and the signal power ``|P h|^2``."""
    power = np.einsum("mn,mn->m", proj.conj(), proj).real
    rows = proj.conj() / np.sqrt(power)[:, None]
    return rows, power

