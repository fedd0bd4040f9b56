"""Access-point assignment: one NOMA group per AP, chosen to maximise sum SINR."""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DomainError, EnumerationCapError, NoCoverageError
from .noma import (NoiseParams, NomaGroup, allocate_power_grpa, data_rate, effective_bandwidth,
                   sinr_db)
from .receiver import BranchChannelSet, NomaContext, branch_sinrs, select_best_branch

DEFAULT_CAP = 10 ** 6
OBJECTIVES = ("sum-sinr", "sum-rate")


@dataclass(frozen=True)
class Assignment:
    """User -> access point map stored as an index vector (``vector[u]`` is the AP index of user u)."""

    vector: tuple
    user_ids: tuple = ()
    ap_ids: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "vector", tuple(int(v) for v in self.vector))
        if not self.user_ids:
            object.__setattr__(self, "user_ids", tuple(f"U{i + 1}" for i in range(len(self.vector))))
        if not self.ap_ids:
            n = max(self.vector) + 1 if self.vector else 0
            object.__setattr__(self, "ap_ids", tuple(f"AP{i + 1}" for i in range(n)))

    def mapping(self) -> dict:
        return {u: self.ap_ids[a] for u, a in zip(self.user_ids, self.vector)}

    def groups(self) -> dict:
        out = {a: [] for a in range(len(self.ap_ids))}
        for u, a in enumerate(self.vector):
            if a >= 0:
                out[a].append(u)
        return out


@dataclass(frozen=True)
class UserLink:
    user_id: str
    ap_id: str
    branch: int
    dc_gain: float
    bandwidth: float
    bandwidth_limited: bool
    coefficient: float
    sinr: float
    rate: float
    sinr_literal: float
    sinr_sic: float

    @property
    def sinr_db(self) -> float:
        return sinr_db(self.sinr)


@dataclass
class LinkReport:
    assignment: Assignment
    links: list
    objective: str = "sum-sinr"
    optimal: bool = True
    extra: dict = field(default_factory=dict)

    @property
    def sum_sinr(self) -> float:
        return math.fsum(l.sinr for l in self.links)

    @property
    def sum_rate(self) -> float:
        return math.fsum(l.rate for l in self.links)

    def by_user(self) -> dict:
        return {l.user_id: l for l in self.links}


def enumerate_assignments(n_users: int, n_aps: int, cap: int = DEFAULT_CAP):
    """All ``n_aps ** n_users`` assignment vectors in lexicographic order."""
    if n_users < 1 or n_aps < 1:
        raise DomainError("need at least one user and one access point")
    if n_aps ** n_users > cap:
        raise EnumerationCapError(
            f"{n_aps}^{n_users} = {n_aps ** n_users} assignments exceed the enumeration cap {cap}; "
            "use the greedy fallback")
    return itertools.product(range(n_aps), repeat=n_users)


def _ap_param(aps, a, name, default):
    return getattr(aps[a], name, default) if aps is not None else default


def evaluate_assignment(vector, channels: BranchChannelSet, noise: NoiseParams, mode: str = "literal",
                        aps=None, inter_ap: bool = False) -> list | None:
    """Per-user links for an assignment vector, or None if some user has no signal from its AP.

    Users mapped to a negative AP index are left out (partial assignments).
    Group coefficients come from each member's strongest-branch gain; each
    member then picks its best branch under those coefficients.
    """
    vector = tuple(vector)
    groups: dict[int, list[int]] = {}
    for u, a in enumerate(vector):
        if a >= 0:
            groups.setdefault(a, []).append(u)
    active = sorted(groups)
    links = {}
    for a in active:
        members = groups[a]
        ref = np.array([channels.best_gain(a, u) for u in members])
        if np.any(ref <= 0):
            return None
        ids = [channels.user_ids[u] for u in members]
        group = NomaGroup(a, ids, ref, allocate_power_grpa(ref, ids))
        pt = _ap_param(aps, a, "transmit_power", 1.9)
        eta = _ap_param(aps, a, "efficiency", 1.0)
        for k, u in enumerate(members):
            rx = channels.receivers[u]
            extra = None
            if inter_ap:
                extra = np.zeros(len(rx.branches))
                for other in active:
                    if other == a:
                        continue
                    g = channels.gains(other, u)
                    for b, br in enumerate(rx.branches):
                        extra[b] += (_ap_param(aps, other, "transmit_power", 1.9) * br.responsivity * g[b]
                                     * _ap_param(aps, other, "efficiency", 1.0)) ** 2
            ctx = {m: NomaContext(float(group.coefficients[k]), group.interference_weight(k, m), pt, eta, noise, extra)
                   for m in ("literal", "sic")}
            b = select_best_branch(u, rx, a, channels, ctx[mode])
            gains = channels.gains(a, u)
            s = {m: float(branch_sinrs(rx, gains, ctx[m])[b]) for m in ctx}
            summary = channels.summaries[(a, u)][b]
            bw = effective_bandwidth(summary.bandwidth_3db, noise)
            sinr = s[mode]
            links[u] = UserLink(channels.user_ids[u], channels.ap_ids[a], b, summary.dc_gain,
                                summary.bandwidth_3db, summary.bandwidth_limited, float(group.coefficients[k]),
                                sinr, data_rate(sinr, bw) if math.isfinite(sinr) else math.inf,
                                s["literal"], s["sic"])
    return [links[u] for u in sorted(links)]


def _score(links, objective: str) -> float:
    if links is None:
        return -math.inf
    if objective == "sum-sinr":
        return math.fsum(l.sinr for l in links)
    if objective == "sum-rate":
        return math.fsum(l.rate for l in links)
    raise DomainError(f"unknown objective {objective!r}; expected one of {OBJECTIVES}")


def sum_sinr(assignment, channels: BranchChannelSet, noise: NoiseParams, mode: str = "literal", aps=None,
             inter_ap: bool = False) -> float:
    """Sum of user SINRs under ``assignment``; ``-inf`` when it leaves a user uncovered."""
    vector = assignment.vector if isinstance(assignment, Assignment) else assignment
    return _score(evaluate_assignment(vector, channels, noise, mode, aps, inter_ap), "sum-sinr")


def _make(vector, channels):
    return Assignment(vector, tuple(channels.user_ids), tuple(channels.ap_ids))


def optimize(channels: BranchChannelSet, noise: NoiseParams, mode: str = "literal", objective: str = "sum-sinr",
             aps=None, inter_ap: bool = False, cap: int = DEFAULT_CAP, threads: int = 1):
    """Exhaustive search for the assignment with the largest objective.

    Ties go to the lexicographically smallest assignment vector. Returns
    ``(Assignment, LinkReport)``.
    """
    if objective not in OBJECTIVES:
        raise DomainError(f"unknown objective {objective!r}; expected one of {OBJECTIVES}")
    vectors = list(enumerate_assignments(channels.n_users, channels.n_aps, cap))

    def score(v):
        links = evaluate_assignment(v, channels, noise, mode, aps, inter_ap)
        return _score(links, objective), links

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            scored = list(pool.map(score, vectors))
    else:
        scored = [score(v) for v in vectors]
    best, best_score, best_links = None, -math.inf, None
    for v, (s, links) in zip(vectors, scored):
        if s > best_score:
            best, best_score, best_links = v, s, links
    if best is None:
        raise NoCoverageError(_uncovered(channels), "no assignment gives every user a signal")
    assignment = _make(best, channels)
    return assignment, LinkReport(assignment, best_links, objective, True)


def _uncovered(channels):
    bad = [channels.user_ids[u] for u in range(channels.n_users)
           if all(channels.best_gain(a, u) <= 0 for a in range(channels.n_aps))]
    return bad[0] if len(bad) == 1 else bad


def evaluate_fixed(vector, channels: BranchChannelSet, noise: NoiseParams, mode: str = "literal",
                   objective: str = "sum-sinr", aps=None, inter_ap: bool = False):
    """Score a caller-supplied assignment instead of searching."""
    links = evaluate_assignment(vector, channels, noise, mode, aps, inter_ap)
    if links is None:
        bad = [channels.user_ids[u] for u, a in enumerate(vector) if channels.best_gain(a, u) <= 0]
        raise NoCoverageError(bad[0] if len(bad) == 1 else bad)
    assignment = _make(vector, channels)
    return assignment, LinkReport(assignment, links, objective, optimal=False, extra={"fixed": True})


def greedy(channels: BranchChannelSet, noise: NoiseParams, mode: str = "literal", objective: str = "sum-sinr",
           aps=None, inter_ap: bool = False):
    """Non-optimal fallback for instances beyond the enumeration cap.

    Users are placed in descending order of their best gain, each on the AP
    that maximises the objective of the partial assignment.
    """
    strength = [max(channels.best_gain(a, u) for a in range(channels.n_aps)) for u in range(channels.n_users)]
    order = sorted(range(channels.n_users), key=lambda u: (-strength[u], u))
    vector = [-1] * channels.n_users
    for u in order:
        best_a, best_s = None, -math.inf
        for a in range(channels.n_aps):
            vector[u] = a
            s = _score(evaluate_assignment(vector, channels, noise, mode, aps, inter_ap), objective)
            if s > best_s:
                best_a, best_s = a, s
        if best_a is None:
            raise NoCoverageError(channels.user_ids[u])
        vector[u] = best_a
    assignment = _make(vector, channels)
    links = evaluate_assignment(vector, channels, noise, mode, aps, inter_ap)
    return assignment, LinkReport(assignment, links, objective, optimal=False, extra={"greedy": True})
