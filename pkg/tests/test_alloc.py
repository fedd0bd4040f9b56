import itertools
import math

import numpy as np
import pytest

from vlcnoma.alloc import (Assignment, enumerate_assignments, evaluate_assignment, evaluate_fixed, greedy, optimize,
                           sum_sinr)
from vlcnoma.exceptions import EnumerationCapError, NoCoverageError
from vlcnoma.noma import NoiseParams
from vlcnoma.receiver import BranchChannelSet, build_adr, build_wide_fov
from vlcnoma.scene import AccessPoint

Q = 1.602176634e-19


def reference_sigma2(noise, r, fov):
    pbn = noise.background_power_ref * (1 - math.cos(math.radians(fov))) / (1 - math.cos(math.radians(noise.reference_fov)))
    return noise.receiver_bandwidth * (noise.noise_power_density + 2 * Q * (noise.dark_current + r * pbn))


def reference_sum_sinr(vector, gains, receivers, noise, pt=1.9, mode="literal"):
    """Straight transcription of the allocation rules with plain loops."""
    total = 0.0
    for a in set(vector):
        members = [u for u, v in enumerate(vector) if v == a]
        best = [max(gains[a][u]) for u in members]
        if min(best) <= 0:
            return -math.inf
        ranked = sorted(range(len(members)), key=lambda i: -best[i])
        w = [0.0] * len(members)
        for r, i in enumerate(ranked, start=1):
            w[i] = (best[ranked[0]] / best[i]) ** r
        coeff = [x / sum(w) for x in w]
        for i, u in enumerate(members):
            if mode == "literal":
                others = [j for j in range(len(members)) if j != i]
            else:
                others = ranked[:ranked.index(i)]
            interf = sum(coeff[j] for j in others)
            sinrs = []
            for b, br in enumerate(receivers[u].branches):
                s = pt * br.responsivity * gains[a][u][b]
                sig2 = reference_sigma2(noise, br.responsivity, br.fov_half_angle)
                sinrs.append((coeff[i] * s) ** 2 / ((interf * s) ** 2 + sig2) if gains[a][u][b] > 0 else 0.0)
            total += max(sinrs)
    return total


def random_instance(rng, n_aps, n_users, kind="adr", zeros=0.3):
    rx = [build_adr([1, 1, 1]) if kind == "adr" else build_wide_fov([1, 1, 1]) for _ in range(n_users)]
    nb = len(rx[0].branches)
    g = rng.uniform(1e-8, 2e-6, (n_aps, n_users, nb))
    g[rng.random(g.shape) < zeros] = 0.0
    for u in range(n_users):  # keep every user covered by at least one AP
        if not g[:, u].any():
            g[rng.integers(n_aps), u, rng.integers(nb)] = 1e-7
    return BranchChannelSet.from_arrays(g, rx), g, rx


def test_enumeration_counts_and_order():
    v = list(enumerate_assignments(4, 2))
    assert len(v) == 16 and v[0] == (0, 0, 0, 0) and v[-1] == (1, 1, 1, 1)
    assert v == sorted(v)
    assert list(enumerate_assignments(3, 1)) == [(0, 0, 0)]
    assert len(list(enumerate_assignments(3, 3))) == 27


def test_enumeration_cap():
    with pytest.raises(EnumerationCapError):
        enumerate_assignments(21, 2)
    with pytest.raises(EnumerationCapError):
        enumerate_assignments(3, 3, cap=26)


def test_single_user_single_ap_is_snr():
    rx = [build_wide_fov([1, 1, 1])]
    ch = BranchChannelSet.from_arrays([[[1e-6]]], rx)
    noise = NoiseParams()
    s = 1.9 * 0.4 * 1e-6
    assert sum_sinr((0,), ch, noise) == pytest.approx(s * s / reference_sigma2(noise, 0.4, 85), rel=1e-13)


def test_empty_ap_contributes_nothing():
    rx = [build_wide_fov([1, 1, 1])]
    ch = BranchChannelSet.from_arrays([[[1e-6]], [[1e-6]]], rx)
    links = evaluate_assignment((1,), ch, NoiseParams())
    assert len(links) == 1 and links[0].ap_id == "AP2"


def test_symmetric_two_by_two_splits_users():
    rx = [build_wide_fov([1, 1, 1]) for _ in range(2)]
    ch = BranchChannelSet.from_arrays([[[2e-6], [1e-6]], [[1e-6], [2e-6]]], rx)
    assignment, report = optimize(ch, NoiseParams())
    assert assignment.vector == (0, 1)
    assert report.optimal


def test_single_ap_puts_everyone_there(rng):
    ch, g, rx = random_instance(rng, 1, 4, zeros=0.0)
    assignment, _ = optimize(ch, NoiseParams())
    assert assignment.vector == (0, 0, 0, 0)


def test_bundled_scenario_matches_independent_rescan(paper_channels, paper_noise):
    for kind, ch in paper_channels.items():
        gains = [[list(ch.gains(a, u)) for u in range(ch.n_users)] for a in range(ch.n_aps)]
        scores = {v: reference_sum_sinr(v, gains, ch.receivers, paper_noise)
                  for v in itertools.product(range(ch.n_aps), repeat=ch.n_users)}
        best = max(scores, key=lambda v: (scores[v], tuple(-x for x in v)))
        assignment, report = optimize(ch, paper_noise)
        assert assignment.vector == best, kind
        assert report.sum_sinr == pytest.approx(scores[best], rel=1e-12)


@pytest.mark.parametrize("mode", ["literal", "sic"])
def test_optimum_on_random_instances(rng, mode):
    noise = NoiseParams()
    for _ in range(15):
        n_aps, n_users = rng.integers(1, 4), rng.integers(1, 6)
        ch, g, rx = random_instance(rng, n_aps, n_users)
        assignment, report = optimize(ch, noise, mode)
        ref = max(reference_sum_sinr(v, g, rx, noise, mode=mode)
                  for v in itertools.product(range(n_aps), repeat=n_users))
        assert report.sum_sinr == pytest.approx(ref, rel=1e-12)
        assert sum_sinr(assignment, ch, noise, mode) == report.sum_sinr


def test_deterministic_and_thread_independent(rng):
    ch, _, _ = random_instance(rng, 3, 5)
    a1, r1 = optimize(ch, NoiseParams())
    a2, r2 = optimize(ch, NoiseParams(), threads=4)
    assert a1 == a2
    assert [l.sinr for l in r1.links] == [l.sinr for l in r2.links]


def test_adding_an_ap_never_lowers_the_optimum(rng):
    noise = NoiseParams()
    for _ in range(10):
        ch3, g, rx = random_instance(rng, 3, 4)
        ch2 = BranchChannelSet.from_arrays(g[:2], rx)
        try:
            _, r2 = optimize(ch2, noise)
        except NoCoverageError:
            continue
        _, r3 = optimize(ch3, noise)
        assert r3.sum_sinr >= r2.sum_sinr


def test_sum_rate_objective_maximizes_rate(rng):
    noise = NoiseParams()
    ch, _, _ = random_instance(rng, 2, 4)
    _, rate_rep = optimize(ch, noise, objective="sum-rate")
    for v in itertools.product(range(2), repeat=4):
        links = evaluate_assignment(v, ch, noise)
        if links is not None:
            assert math.fsum(l.rate for l in links) <= rate_rep.sum_rate * (1 + 1e-12)


def test_greedy_is_labelled_and_feasible(rng):
    ch, _, _ = random_instance(rng, 3, 5)
    assignment, report = greedy(ch, NoiseParams())
    assert not report.optimal and report.extra["greedy"]
    _, best = optimize(ch, NoiseParams())
    assert report.sum_sinr <= best.sum_sinr * (1 + 1e-12)
    assert all(a >= 0 for a in assignment.vector)


def test_infeasible_assignment_scores_minus_infinity():
    rx = [build_wide_fov([1, 1, 1]) for _ in range(2)]
    ch = BranchChannelSet.from_arrays([[[1e-6], [0.0]], [[1e-6], [1e-6]]], rx)
    assert sum_sinr((0, 0), ch, NoiseParams()) == -math.inf
    assignment, _ = optimize(ch, NoiseParams())
    assert assignment.vector[1] == 1
    with pytest.raises(NoCoverageError):
        evaluate_fixed((0, 0), ch, NoiseParams())


def test_uncovered_user_raises():
    rx = [build_wide_fov([1, 1, 1]) for _ in range(2)]
    ch = BranchChannelSet.from_arrays([[[1e-6], [0.0]], [[1e-6], [0.0]]], rx)
    with pytest.raises(NoCoverageError) as err:
        optimize(ch, NoiseParams())
    assert err.value.user_id == "U2"


def test_inter_ap_interference_lowers_sinr(rng):
    ch, _, _ = random_instance(rng, 2, 4, zeros=0.0)
    aps = [AccessPoint([1, 1, 3], id="AP1"), AccessPoint([1, 3, 3], id="AP2")]
    quiet = evaluate_assignment((0, 0, 1, 1), ch, NoiseParams(), aps=aps)
    noisy = evaluate_assignment((0, 0, 1, 1), ch, NoiseParams(), aps=aps, inter_ap=True)
    assert all(n.sinr < q.sinr for n, q in zip(noisy, quiet))
    # a single active AP has no co-channel interferer
    assert evaluate_assignment((0,) * 4, ch, NoiseParams(), aps=aps, inter_ap=True)[0].sinr == \
        evaluate_assignment((0,) * 4, ch, NoiseParams(), aps=aps)[0].sinr


def test_assignment_mapping_and_groups():
    a = Assignment((0, 1, 0), ("U1", "U2", "U3"), ("AP1", "AP2"))
    assert a.mapping() == {"U1": "AP1", "U2": "AP2", "U3": "AP1"}
    assert a.groups() == {0: [0, 2], 1: [1]}
