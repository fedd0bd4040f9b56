"""Angle-diversity and wide-FOV receiver models, channel sets and branch selection."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import raytrace
from .exceptions import DomainError, NoCoverageError
from .noma import NoiseParams, noise_power, sinr_from_weights
from .raytrace import ChannelSummary, DetectorBranch
from .scene import Room, as_vec3, orientation_from_angles

ADR = "adr"
WIDE = "wide"

ADR_ELEVATION = 70.0
ADR_AZIMUTHS = (45.0, 135.0, 225.0, 315.0)
ADR_FOV = 25.0
DETECTOR_AREA = 20e-6  # m^2 (20 mm^2)
RESPONSIVITY = 0.4  # A/W
WIDE_FOV = 85.0


@dataclass(frozen=True)
class ReceiverModel:
    kind: str
    branches: tuple
    position: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "position", as_vec3(self.position))
        object.__setattr__(self, "branches", tuple(self.branches))
        if self.kind not in (ADR, WIDE):
            raise DomainError(f"unknown receiver kind {self.kind!r}")

    def __len__(self) -> int:
        return len(self.branches)


def _check_inside(position, room):
    if room is not None and not room.contains(position):
        raise DomainError(f"receiver position {tuple(np.round(position, 6))} is outside the room")


def build_adr(position, room: Room | None = None, elevation: float = ADR_ELEVATION, azimuths=ADR_AZIMUTHS,
              fov: float = ADR_FOV, area: float = DETECTOR_AREA, responsivity: float = RESPONSIVITY) -> ReceiverModel:
    """Four co-located detectors tilted ``elevation`` degrees above horizontal at the given azimuths."""
    position = as_vec3(position)
    _check_inside(position, room)
    branches = [DetectorBranch(position, orientation_from_angles(elevation, az), fov, area, responsivity)
                for az in azimuths]
    return ReceiverModel(ADR, branches, position)


def build_wide_fov(position, fov_half_angle: float = WIDE_FOV, room: Room | None = None,
                   area: float = DETECTOR_AREA, responsivity: float = RESPONSIVITY) -> ReceiverModel:
    position = as_vec3(position)
    _check_inside(position, room)
    if not 0.0 < fov_half_angle <= 90.0:
        raise DomainError(f"FOV half-angle must be within (0, 90], got {fov_half_angle}")
    return ReceiverModel(WIDE, [DetectorBranch(position, (0.0, 0.0, 1.0), fov_half_angle, area, responsivity)], position)


@dataclass
class BranchChannelSet:
    """Channel summaries for every (access point, user, branch) triple."""

    ap_ids: list
    user_ids: list
    receivers: list
    summaries: dict  # (ap_index, user_index) -> list[ChannelSummary]
    responses: dict = field(default_factory=dict)  # (ap_index, user_index, branch) -> ImpulseResponse

    def __post_init__(self):
        for a in range(len(self.ap_ids)):
            for u, rx in enumerate(self.receivers):
                s = self.summaries.get((a, u))
                if s is None or len(s) != len(rx.branches):
                    raise DomainError(f"channel set incomplete for AP {self.ap_ids[a]!r}, user {self.user_ids[u]!r}")

    @property
    def n_aps(self) -> int:
        return len(self.ap_ids)

    @property
    def n_users(self) -> int:
        return len(self.user_ids)

    def gains(self, ap: int, user: int) -> np.ndarray:
        return np.array([s.dc_gain for s in self.summaries[(ap, user)]])

    def bandwidths(self, ap: int, user: int) -> np.ndarray:
        return np.array([s.bandwidth_3db for s in self.summaries[(ap, user)]])

    def best_gain(self, ap: int, user: int) -> float:
        return float(self.gains(ap, user).max())

    @classmethod
    def from_arrays(cls, gains, receivers, bandwidths=None, ap_ids=None, user_ids=None) -> "BranchChannelSet":
        """Build a channel set from a ``gains[ap][user][branch]`` nested array (tests, synthetic studies)."""
        n_aps = len(gains)
        n_users = len(receivers)
        summaries = {}
        for a in range(n_aps):
            for u in range(n_users):
                g = np.asarray(gains[a][u], dtype=float)
                bw = np.full(g.shape, raytrace.DEFAULT_SCAN_LIMIT) if bandwidths is None else np.asarray(bandwidths[a][u], dtype=float)
                summaries[(a, u)] = [ChannelSummary(float(gi), float(bi), 0.0, False) for gi, bi in zip(g, bw)]
        return cls(list(ap_ids or [f"AP{i + 1}" for i in range(n_aps)]),
                   list(user_ids or [f"U{i + 1}" for i in range(n_users)]), list(receivers), summaries)


def trace_channels(scene, aps, receivers, user_ids=None, max_order: int = 2,
                   bin_width: float = raytrace.DEFAULT_BIN_WIDTH, scan_limit: float = raytrace.DEFAULT_SCAN_LIMIT,
                   pad_factor: int = raytrace.DEFAULT_PAD_FACTOR, threads: int = 1,
                   keep_responses: bool = False) -> BranchChannelSet:
    """Trace every access point to every branch of every receiver.

    Each (AP, user, branch) trace is independent, so results are identical
    whatever the worker count; they are assembled in a fixed order.
    """
    if max_order >= 2:
        scene.pair_kernel  # build once before workers share it
    tasks = [(a, u, b) for a in range(len(aps)) for u, rx in enumerate(receivers) for b in range(len(rx.branches))]

    def work(task):
        a, u, b = task
        ir = raytrace.impulse_response(aps[a], receivers[u].branches[b], scene, max_order, bin_width)
        return ir, raytrace.summarize(ir, scan_limit, pad_factor)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, tasks))
    else:
        results = [work(t) for t in tasks]
    summaries = {}
    responses = {}
    for (a, u, b), (ir, summary) in zip(tasks, results):
        summaries.setdefault((a, u), []).append(summary)
        if keep_responses:
            responses[(a, u, b)] = ir
    return BranchChannelSet([getattr(ap, "id", f"AP{i + 1}") for i, ap in enumerate(aps)],
                            list(user_ids or [f"U{i + 1}" for i in range(len(receivers))]),
                            list(receivers), summaries, responses)


@dataclass(frozen=True)
class NomaContext:
    """What a user needs to know about its NOMA group to rank its branches."""

    coefficient: float
    interference_weight: float
    transmit_power: float
    efficiency: float
    noise: NoiseParams
    extra_interference: np.ndarray | None = None  # per-branch co-channel interference, A^2


def branch_sinrs(receiver: ReceiverModel, gains, context: NomaContext) -> np.ndarray:
    """SINR the user would see on each of its branches."""
    out = np.empty(len(receiver.branches))
    for b, br in enumerate(receiver.branches):
        signal = context.transmit_power * br.responsivity * gains[b] * context.efficiency
        sigma2 = noise_power(context.noise, br.responsivity, br.fov_half_angle)
        extra = 0.0 if context.extra_interference is None else float(context.extra_interference[b])
        out[b] = sinr_from_weights(context.coefficient, context.interference_weight, signal, sigma2, extra) if gains[b] > 0 else 0.0
    return out


def select_best_branch(user: int, receiver: ReceiverModel, serving_ap: int, channels: BranchChannelSet,
                       context: NomaContext) -> int:
    """Index of the branch giving ``user`` the highest SINR from ``serving_ap``; ties go to the lowest index."""
    gains = channels.gains(serving_ap, user)
    if not np.any(gains > 0):
        raise NoCoverageError(channels.user_ids[user])
    sinrs = branch_sinrs(receiver, gains, context)
    sinrs[gains <= 0] = -np.inf
    return int(np.argmax(sinrs))
