"""Scenario parameters and the exception types shared across the package."""

from __future__ import annotations

import enum
from dataclasses import asdict, dataclass, replace
from typing import Optional


class ParameterError(ValueError):
    """An input violates a documented precondition."""


class DimensionError(ParameterError):
    """Cancelation demands more receive dimensions than are available."""


class Mode(str, enum.Enum):
    NO_CSIT_NEAREST = "no-csit"
    NO_CSIT_CMSIR = "cmsir"
    CSIT_BF_NEAREST = "csit"

    @classmethod
    def parse(cls, value) -> "Mode":
        if isinstance(value, cls):
            return value
        aliases = {
            "nocsitnearest": cls.NO_CSIT_NEAREST,
            "nocsitcmsir": cls.NO_CSIT_CMSIR,
            "csitbfnearest": cls.CSIT_BF_NEAREST,
            "csit-bf": cls.CSIT_BF_NEAREST,
        }
        key = str(value).strip().lower()
        for m in cls:
            if key == m.value:
                return m
        if key.replace("_", "").replace("-", "") in aliases:
            return aliases[key.replace("_", "").replace("-", "")]
        raise ParameterError(f"unknown mode {value!r}; expected one of "
                             f"{[m.value for m in cls]}")

    @property
    def has_csit(self) -> bool:
        return self is Mode.CSIT_BF_NEAREST


@dataclass(frozen=True)
class SystemParams:
    """All symbols describing one network scenario.

    Parameters
    ----------
    N : int
        Antennas per node.
    k : int
        Data streams per link, ``1 <= k <= N``.
    m : int, optional
        Receive dimensions reserved for cancelation (no-CSIT modes,
        ``0 <= m <= N - k``). Fixed to ``N - k`` in CSIT mode.
    alpha : float
        Path-loss exponent, strictly greater than 2.
    beta : float
        Linear SIR threshold.
    d : float
        Typical link length in meters.
    epsilon : float
        Outage constraint in (0, 1).
    R : float
        Per-stream rate, bits/s/Hz.
    mode : Mode
        Transmit/receive strategy.
    tx_power : float, optional
        Carried for documentation only; it cancels in every SIR.
    """

    N: int
    k: int = 1
    m: Optional[int] = None
    alpha: float = 3.0
    beta: float = 1.0
    d: float = 1.0
    epsilon: float = 0.1
    R: float = 1.0
    mode: Mode = Mode.NO_CSIT_NEAREST
    tx_power: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode.parse(self.mode))
        N, k = self.N, self.k
        if int(N) != N or N < 1:
            raise ParameterError(f"N must be a positive integer, got {N}")
        if int(k) != k or not 1 <= k <= N:
            raise ParameterError(f"k must satisfy 1 <= k <= N={N}, got {k}")
        object.__setattr__(self, "N", int(N))
        object.__setattr__(self, "k", int(k))
        if self.mode.has_csit:
            if self.m is not None and self.m != N - k:
                raise ParameterError(
                    f"m is fixed to N-k={N - k} in CSIT mode, got {self.m}")
            object.__setattr__(self, "m", N - k)
        else:
            m = 0 if self.m is None else self.m
            if int(m) != m or not 0 <= m <= N - k:
                raise ParameterError(
                    f"m must satisfy 0 <= m <= N-k={N - k}, got {m}")
            object.__setattr__(self, "m", int(m))
        if not self.alpha > 2:
            raise ParameterError(f"alpha must exceed 2, got {self.alpha}")
        if not self.beta >= 0:
            raise ParameterError(f"beta must be non-negative, got {self.beta}")
        if not self.d > 0:
            raise ParameterError(f"d must be positive, got {self.d}")
        if not 0 < self.epsilon < 1:
            raise ParameterError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if not self.R > 0:
            raise ParameterError(f"R must be positive, got {self.R}")

    @property
    def cancel_count(self) -> int:
        """Number of interferers the receiver nulls."""
        if self.mode.has_csit:
            return self.N // self.k - 1
        return self.m // self.k

    @property
    def signal_dof(self) -> int:
        """Shape of the Gamma-distributed post-ZF signal power (no CSIT).

        Unused cancelation dimensions (when k does not divide m) are
        returned to the signal.
        """
        return self.N - self.k * self.cancel_count - self.k + 1

    @property
    def bounds_valid(self) -> bool:
        return self.cancel_count > self.alpha / 2 - 1

    @property
    def outage_stream(self) -> int:
        """Zero-based index of the stream whose outage defines capacity."""
        return self.k - 1 if self.mode.has_csit else 0

    def with_(self, **changes) -> "SystemParams":
        if "k" in changes and "m" not in changes and self.mode.has_csit:
            changes["m"] = None
        return replace(self, **changes)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["mode"] = self.mode.value
        return out
