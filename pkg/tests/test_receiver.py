import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from vlcnoma.exceptions import DomainError, NoCoverageError
from vlcnoma.noma import NoiseParams, allocate_power_grpa, noise_power
from vlcnoma.receiver import (BranchChannelSet, NomaContext, branch_sinrs, build_adr, build_wide_fov,
                              select_best_branch)
from vlcnoma.scene import Room


def test_adr_geometry():
    rx = build_adr([2, 2, 1])
    normals = np.array([b.normal for b in rx.branches])
    s = math.sin(math.radians(70))
    assert_allclose(normals[:, 2], s, rtol=1e-14)
    assert_allclose(normals.sum(axis=0), [0, 0, 4 * s], atol=1e-14)
    for i in range(4):
        a, b = normals[i, :2], normals[(i + 1) % 4, :2]
        cosang = a @ b / (np.linalg.norm(a) * np.linalg.norm(b))
        assert cosang == pytest.approx(0.0, abs=1e-14)
    assert all(br.fov_half_angle == 25 and br.area == 20e-6 for br in rx.branches)


def test_wide_fov_single_upward_branch():
    rx = build_wide_fov([2, 2, 1])
    assert len(rx) == 1
    assert_allclose(rx.branches[0].normal, [0, 0, 1])
    assert rx.branches[0].fov_half_angle == 85


def test_receiver_outside_room():
    with pytest.raises(DomainError):
        build_adr([9, 2, 1], Room())
    with pytest.raises(DomainError):
        build_wide_fov([2, 2, -0.1], room=Room())
    with pytest.raises(DomainError):
        build_wide_fov([2, 2, 1], fov_half_angle=95)


def ctx(coefficient=1.0, weight=0.0, noise=None):
    return NomaContext(coefficient, weight, 1.9, 1.0, noise or NoiseParams())


def test_unique_candidate_branch_is_chosen():
    rx = build_adr([1, 1, 1])
    ch = BranchChannelSet.from_arrays([[[0.0, 0.0, 3e-7, 0.0]]], [rx])
    assert select_best_branch(0, rx, 0, ch, ctx()) == 2


def test_wide_fov_always_branch_zero():
    rx = build_wide_fov([1, 1, 1])
    ch = BranchChannelSet.from_arrays([[[1e-6]]], [rx])
    assert select_best_branch(0, rx, 0, ch, ctx(0.3, 0.7)) == 0


def test_no_coverage():
    rx = build_adr([1, 1, 1])
    ch = BranchChannelSet.from_arrays([[[0.0] * 4]], [rx])
    with pytest.raises(NoCoverageError):
        select_best_branch(0, rx, 0, ch, ctx())


def test_ties_go_to_lowest_index():
    rx = build_adr([1, 1, 1])
    ch = BranchChannelSet.from_arrays([[[1e-7, 2e-7, 2e-7, 1e-7]]], [rx])
    assert select_best_branch(0, rx, 0, ch, ctx()) == 1


def test_dominant_branch_wins(rng):
    rx = build_adr([1, 1, 1])
    for _ in range(50):
        g = rng.uniform(0, 1e-6, 4)
        best = int(np.argmax(g))
        ch = BranchChannelSet.from_arrays([[g]], [rx])
        assert select_best_branch(0, rx, 0, ch, ctx(0.2, 0.8)) == best


def test_selection_invariant_to_gain_scaling(rng):
    # all ADR branches share FOV and responsivity, so scaling every gain by k cannot change the ranking
    rx = build_adr([1, 1, 1])
    g = rng.uniform(1e-8, 1e-6, 4)
    base = select_best_branch(0, rx, 0, BranchChannelSet.from_arrays([[g]], [rx]), ctx(0.3, 0.7))
    for k in (1e-3, 0.5, 7.0, 1e3):
        scaled = BranchChannelSet.from_arrays([[g * k]], [rx])
        assert select_best_branch(0, rx, 0, scaled, ctx(0.3, 0.7)) == base
        squared = BranchChannelSet.from_arrays([[g * k * k]], [rx])
        assert select_best_branch(0, rx, 0, squared, ctx(0.3, 0.7)) == base


def test_user1_on_ap1_by_hand(paper_channels, paper_noise):
    ch = paper_channels["adr"]
    # U1 and U2 sharing AP1: coefficients from their best-branch gains
    ref = np.array([ch.best_gain(0, 0), ch.best_gain(0, 1)])
    a = allocate_power_grpa(ref)
    rx = ch.receivers[0]
    gains = ch.gains(0, 0)
    expected = []
    for b, br in enumerate(rx.branches):
        s = 1.9 * 0.4 * gains[b]
        s2 = noise_power(paper_noise, 0.4, 25.0)
        expected.append((a[0] * s) ** 2 / ((a[1] * s) ** 2 + s2) if gains[b] > 0 else 0.0)
    got = branch_sinrs(rx, gains, NomaContext(a[0], a[1], 1.9, 1.0, paper_noise))
    assert_allclose(got, expected, rtol=1e-13)
    chosen = select_best_branch(0, rx, 0, ch, NomaContext(a[0], a[1], 1.9, 1.0, paper_noise))
    assert chosen == int(np.argmax(expected))
    # U1 at (0.5, 0.5) sees AP1 at (1, 1) towards +x +y, the 45 degree branch
    assert chosen == 0


def test_channel_set_rejects_missing_entries():
    rx = build_adr([1, 1, 1])
    with pytest.raises(DomainError):
        BranchChannelSet(["AP1"], ["U1"], [rx], {(0, 0): []})
