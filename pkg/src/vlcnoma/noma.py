"""Power-domain NOMA: gain-ratio power allocation, noise, SINR and rate."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DomainError, ExcludedUserError

ELECTRON_CHARGE = 1.602176634e-19  # C

MODES = ("literal", "sic")


@dataclass(frozen=True)
class NoiseParams:
    """Receiver noise inputs. Defaults are conventional indoor optical wireless values."""

    noise_power_density: float = 4.7e-28  # A^2/Hz
    receiver_bandwidth: float = 100e6  # Hz
    dark_current: float = 1e-9  # A
    background_power_ref: float = 1e-6  # W, at reference_fov
    reference_fov: float = 85.0  # degrees
    electron_charge: float = ELECTRON_CHARGE

    def __post_init__(self):
        for name in ("noise_power_density", "receiver_bandwidth", "dark_current", "background_power_ref"):
            if getattr(self, name) < 0:
                raise DomainError(f"{name} must be non-negative, got {getattr(self, name)}")
        if not 0.0 < self.reference_fov <= 90.0:
            raise DomainError(f"reference_fov must be within (0, 90], got {self.reference_fov}")


def background_power(p_ref: float, fov: float, fov_ref: float = 85.0) -> float:
    """Ambient optical power seen by a detector, scaled by acceptance solid angle."""
    return p_ref * (1.0 - math.cos(math.radians(fov))) / (1.0 - math.cos(math.radians(fov_ref)))


def noise_power(params: NoiseParams, responsivity: float, branch_fov: float) -> float:
    """Receiver noise variance ``B N0 + 2 q (I_d + R P_bn) B`` in A^2."""
    p_bn = background_power(params.background_power_ref, branch_fov, params.reference_fov)
    b = params.receiver_bandwidth
    return b * params.noise_power_density + 2.0 * params.electron_charge * (params.dark_current + responsivity * p_bn) * b


def decoding_order(gains) -> np.ndarray:
    """Indices sorted by descending gain; ties keep the caller's order."""
    g = np.asarray(gains, dtype=float)
    return np.argsort(-g, kind="stable")


def allocate_power_grpa(gains, user_ids=None) -> np.ndarray:
    """Gain-ratio power allocation coefficients, returned in the caller's order.

    With users ranked by descending gain h_1 >= h_2 >= ..., the k-th user
    gets weight ``(h_1 / h_k) ** k``; weights are normalised to sum to one.
    Weaker users therefore always receive at least as much power.
    """
    g = np.asarray(gains, dtype=float).reshape(-1)
    if g.size == 0:
        raise DomainError("power allocation needs at least one user")
    for i, gi in enumerate(g):
        if not gi > 0:
            raise ExcludedUserError(user_ids[i] if user_ids is not None else i, float(gi))
    order = decoding_order(g)
    rank = np.empty(g.size, dtype=float)
    rank[order] = np.arange(1, g.size + 1)
    # log-space keeps large ratios from overflowing
    logw = rank * (math.log(g[order[0]]) - np.log(g))
    w = np.exp(logw - logw.max())
    return w / w.sum()


@dataclass
class NomaGroup:
    """Users sharing one access point, with their allocation coefficients."""

    serving_ap: object
    user_ids: list
    gains: np.ndarray
    coefficients: np.ndarray = field(default=None)

    def __post_init__(self):
        self.gains = np.asarray(self.gains, dtype=float)
        if self.coefficients is None:
            self.coefficients = allocate_power_grpa(self.gains, self.user_ids)
        else:
            self.coefficients = np.asarray(self.coefficients, dtype=float)

    def __len__(self) -> int:
        return len(self.user_ids)

    def interferers(self, k: int, mode: str = "literal") -> np.ndarray:
        """Indices of the users whose signals remain as interference for user ``k``.

        ``literal`` keeps every other user. ``sic`` keeps only users with
        stronger channels: they are decoded after ``k`` so their signals
        cannot be cancelled.
        """
        n = len(self)
        if mode == "literal":
            return np.array([i for i in range(n) if i != k], dtype=int)
        if mode == "sic":
            order = list(decoding_order(self.gains))
            pos = order.index(k)
            return np.array(sorted(order[:pos]), dtype=int)
        raise DomainError(f"unknown NOMA mode {mode!r}; expected one of {MODES}")

    def interference_weight(self, k: int, mode: str = "literal") -> float:
        idx = self.interferers(k, mode)
        return math.fsum(self.coefficients[idx]) if idx.size else 0.0


def sinr_from_weights(a_k: float, interference: float, signal: float, sigma2: float, extra: float = 0.0) -> float:
    """``(a_k S)^2 / ((I S)^2 + extra + sigma2)`` where S is the received photocurrent."""
    if a_k == 0:
        return 0.0
    num = (a_k * signal) ** 2
    den = (interference * signal) ** 2 + extra + sigma2
    if den == 0:
        warnings.warn("SINR denominator is zero; reporting infinite SINR", RuntimeWarning, stacklevel=2)
        return math.inf
    return num / den


def sinr_eq1(k: int, group: NomaGroup, branch_gain: float, pt: float, responsivity: float, eta: float,
             sigma2: float, mode: str = "literal", extra_interference: float = 0.0) -> float:
    """SINR of user ``k`` in ``group`` for a NOMA downlink.

    ``SINR_k = (a_k Pt R h_k eta)^2 / ((sum_{i != k} a_i Pt R h_k eta)^2 + sigma2)``

    In ``literal`` mode the sum runs over all other users of the serving
    access point; ``sic`` mode keeps only users with stronger channels.
    ``extra_interference`` (A^2) adds co-channel interference from other
    access points when that option is enabled.
    """
    if not 0 <= k < len(group):
        raise DomainError(f"user index {k} outside group of {len(group)}")
    if sigma2 < 0:
        raise DomainError(f"noise power must be non-negative, got {sigma2}")
    signal = pt * responsivity * branch_gain * eta
    return sinr_from_weights(float(group.coefficients[k]), group.interference_weight(k, mode), signal, sigma2,
                             extra_interference)


def data_rate(sinr: float, bandwidth: float) -> float:
    """Shannon rate in bit/s."""
    if sinr < 0:
        raise DomainError(f"SINR must be non-negative, got {sinr}")
    if not bandwidth > 0:
        raise DomainError(f"bandwidth must be positive, got {bandwidth}")
    return bandwidth * math.log2(1.0 + sinr)


def effective_bandwidth(channel_bandwidth: float, params: NoiseParams) -> float:
    """Per-user signalling bandwidth: the channel's 3-dB bandwidth capped at the receiver bandwidth."""
    return min(params.receiver_bandwidth, channel_bandwidth)


def sinr_db(sinr: float) -> float:
    if sinr <= 0:
        return -math.inf
    return 10.0 * math.log10(sinr)
