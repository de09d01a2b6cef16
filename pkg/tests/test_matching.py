import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from hck.matching import (N_HUMAN_QUERIES, N_PART_QUERIES, GroundTruthHuman, MaskCostConfig,
                          QueryBundle, attention_scope_mask, bce_cost, dice_cost, hungarian,
                          mask_cost_matrix, two_stage_match)
from helpers import random_hierarchy
from oracles import all_assignments, brute_assignment, brute_two_stage, naive_cost_matrix


def binary(n, pos, start=0):
    m = np.zeros(n)
    m[start:start + pos] = 1
    return m


# --- costs ------------------------------------------------------------------------

def test_dice_examples():
    g = binary(100, 40)
    assert dice_cost(g, g)[0, 0] == pytest.approx(0.0, abs=1e-15)
    assert dice_cost(binary(100, 40), binary(100, 40, 50))[0, 0] == pytest.approx(1 - 1 / 81, abs=1e-12)
    assert dice_cost(np.zeros(10), np.zeros(10))[0, 0] == 0.0


def test_bce_examples():
    g = binary(50, 20)
    assert bce_cost(g, g)[0, 0] == pytest.approx(-math.log(1 - 1e-6), rel=1e-9)
    for gt in (g, 1 - g, np.zeros(50)):
        assert bce_cost(np.full(50, 0.5), gt)[0, 0] == pytest.approx(math.log(2), abs=1e-12)
    assert bce_cost(np.array([0.9, 0.2]), np.array([1.0, 0.0]))[0, 0] == pytest.approx(
        (-math.log(0.9) - math.log(0.8)) / 2, abs=1e-12)
    assert bce_cost(np.array([0.9, 0.2]), np.array([1.0, 0.0]))[0, 0] == pytest.approx(0.16425, abs=1e-5)


def test_length_mismatch():
    with pytest.raises(ValueError):
        dice_cost(np.zeros(3), np.zeros(4))
    with pytest.raises(ValueError):
        bce_cost(np.zeros(3), np.zeros(4))
    with pytest.raises(ValueError):
        mask_cost_matrix(np.zeros((2, 3)), np.zeros((2, 4)))


def test_config_validation():
    with pytest.raises(ValueError):
        MaskCostConfig(w_bce=-1)
    with pytest.raises(ValueError):
        MaskCostConfig(eps=0.0)


@settings(max_examples=40)
@given(arrays(np.float64, (3, 9), elements=st.floats(0, 1)), arrays(np.bool_, (2, 9)))
def test_costs_bounded_and_naive(p, g):
    g = g.astype(float)
    d = dice_cost(p, g)
    assert np.all((d >= -1e-12) & (d <= 1 + 1e-12))
    assert np.all(bce_cost(p, g) >= 0)
    assert np.allclose(mask_cost_matrix(p, g, MaskCostConfig(5, 2, 0)), naive_cost_matrix(p, g), atol=1e-12, rtol=0)


def test_cost_matrix_examples(rng):
    gts = np.stack([binary(30, 10), binary(30, 10, 10), binary(30, 10, 20)])
    c = mask_cost_matrix(gts, gts, MaskCostConfig(1, 1, 0))
    assert np.all(np.abs(np.diag(c)) < 1e-5)
    assert np.all(c[~np.eye(3, dtype=bool)] > 0)
    assert np.all(mask_cost_matrix(rng.uniform(size=(3, 30)), gts, MaskCostConfig(0, 0, 0)) == 0)
    p = rng.uniform(size=(3, 30))
    g = (rng.uniform(size=(2, 30)) < 0.5).astype(float)
    assert np.allclose(mask_cost_matrix(p, g), naive_cost_matrix(p, g), atol=1e-12, rtol=0)


def test_class_term(rng):
    p = rng.uniform(size=(3, 20))
    g = (rng.uniform(size=(2, 20)) < 0.5).astype(float)
    probs = rng.dirichlet(np.ones(15), 3)
    c = mask_cost_matrix(p, g, MaskCostConfig(), probs, [4, 9])
    assert np.allclose(c, naive_cost_matrix(p, g, probs=probs, classes=[4, 9]), atol=1e-12, rtol=0)
    with pytest.raises(ValueError):
        mask_cost_matrix(p, g, MaskCostConfig(), probs, None)
    with pytest.raises(ValueError):
        mask_cost_matrix(p, g, MaskCostConfig(), probs, [0, 16])


# --- Hungarian --------------------------------------------------------------------

def test_hungarian_examples():
    assert hungarian(np.array([[0.0, 1], [1, 0]])) == ([(0, 0), (1, 1)], 0.0)
    assert hungarian(np.array([[3.5]])) == ([(0, 0)], 3.5)
    assert hungarian(np.zeros((0, 4))) == ([], 0.0)
    assert hungarian(np.zeros((3, 0))) == ([], 0.0)
    with pytest.raises(ValueError):
        hungarian(np.array([[np.inf]]))


def test_hungarian_5x5_integer_seeds():
    for seed in range(1000):
        c = np.random.default_rng(seed).integers(0, 20, (5, 5)).astype(float)
        assert hungarian(c)[1] == brute_assignment(c)[0]


@settings(max_examples=80)
@given(st.integers(1, 7), st.integers(1, 7), st.integers(0, 2**32 - 1), st.booleans())
def test_hungarian_exhaustive(r, c, seed, integer):
    if min(r, c) > 5 and max(r, c) == 7:
        c = 6  # keep the permutation count tractable
    rng = np.random.default_rng(seed)
    m = rng.integers(-5, 6, (r, c)).astype(float) if integer else rng.normal(size=(r, c))
    pairs, total = hungarian(m)
    assert len(pairs) == min(r, c)
    assert len({i for i, _ in pairs}) == len(pairs) == len({j for _, j in pairs})
    best = brute_assignment(m)[0]
    if integer:
        assert total == best
    else:
        assert abs(total - best) <= 1e-12 * max(1, abs(best))
    for cand in all_assignments(r, c):
        assert total <= sum(m[i, j] for i, j in cand) + 1e-9


@settings(max_examples=60)
@given(st.integers(1, 5), st.integers(1, 5), st.integers(0, 2**32 - 1))
def test_hungarian_lex_smallest_tie(r, c, seed):
    rng = np.random.default_rng(seed)
    m = rng.integers(0, 3, (r, c)).astype(float)
    pairs, total = hungarian(m)
    optima = [sorted(a) for a in all_assignments(r, c) if sum(m[i, j] for i, j in a) == total]
    if r <= c:
        assert pairs == min(optima)
    else:
        assert pairs == min(optima, key=lambda a: sorted((j, i) for i, j in a))


@settings(max_examples=40)
@given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 2**32 - 1), st.integers(-50, 50))
def test_hungarian_shift_invariance(r, c, seed, shift):
    m = np.random.default_rng(seed).integers(0, 9, (r, c)).astype(float)
    p1, t1 = hungarian(m)
    p2, t2 = hungarian(m + shift)
    assert p1 == p2
    assert t2 == t1 + shift * min(r, c)


def test_hungarian_larger_is_fast(rng):
    import time
    m = rng.normal(size=(16, 16))
    t = time.perf_counter()
    hungarian(m)
    assert time.perf_counter() - t < 2.0


# --- two-stage ------------------------------------------------------------------

def _check_structure(a, bundle, gts):
    qs = [q for q, _ in a.humans]
    gs = [g for _, g in a.humans]
    assert len(set(qs)) == len(qs) and len(set(gs)) == len(gs)
    assert set(a.parts) <= set(gs)
    for g, pp in a.parts.items():
        assert len({i for i, _ in pp}) == len(pp) == len({j for _, j in pp})
        assert all(0 <= i < bundle.n_parts and 0 <= j < len(gts[g].part_ids) for i, j in pp)


def test_identity_example():
    m = binary(20, 10)
    parts = np.stack([binary(20, 5), binary(20, 5, 5)])
    bundle = QueryBundle.from_arrays(m[None], parts[None])
    a = two_stage_match(bundle, [GroundTruthHuman(m, parts, np.array([1, 8]))], MaskCostConfig(1, 1, 0))
    assert a.humans == [(0, 0)] and a.parts == {0: [(0, 0), (1, 1)]}
    assert a.human_cost + a.part_cost < 1e-4


def test_swapped_humans():
    rng = np.random.default_rng(7)
    n = 40
    g0, g1 = binary(n, 20), binary(n, 20, 20)
    gp0 = np.stack([binary(n, 7), binary(n, 7, 7), binary(n, 6, 14)])
    gp1 = np.stack([binary(n, 7, 20), binary(n, 7, 27), binary(n, 6, 34)])
    gts = [GroundTruthHuman(g0, gp0, np.array([1, 8, 9])), GroundTruthHuman(g1, gp1, np.array([1, 8, 9]))]
    hm = np.stack([g1 * 0.9 + 0.05, g0 * 0.9 + 0.05])
    pm = np.stack([gp1[[2, 0, 1]] * 0.8 + 0.1, gp0[[1, 2, 0]] * 0.8 + 0.1])
    bundle = QueryBundle.from_arrays(hm, pm)
    a = two_stage_match(bundle, gts)
    assert a.humans == [(0, 1), (1, 0)]
    assert a.parts[1] == [(0, 2), (1, 0), (2, 1)]
    assert a.parts[0] == [(0, 1), (1, 2), (2, 0)]
    ref = brute_two_stage(hm, pm, [g.mask for g in gts], [g.part_masks for g in gts], [g.part_ids for g in gts])
    assert a.humans == ref[0] and a.parts == ref[1]
    _check_structure(a, bundle, gts)


@settings(max_examples=80)
@given(st.integers(0, 2**32 - 1))
def test_two_stage_matches_brute(seed):
    rng = np.random.default_rng(seed)
    bundle, gts, (hm, pm, probs) = random_hierarchy(rng)
    a = two_stage_match(bundle, gts)
    h, parts, hc, pc = brute_two_stage(hm, pm, [g.mask for g in gts], [g.part_masks for g in gts],
                                       [g.part_ids for g in gts], probs)
    assert a.humans == h
    assert a.parts == parts
    assert a.human_cost == pytest.approx(hc, abs=1e-9)
    assert a.part_cost == pytest.approx(pc, abs=1e-9)
    _check_structure(a, bundle, gts)


@settings(max_examples=40)
@given(st.integers(0, 2**32 - 1))
def test_gt_permutation(seed):
    rng = np.random.default_rng(seed)
    bundle, gts, _ = random_hierarchy(rng)
    perm = rng.permutation(len(gts))
    a = two_stage_match(bundle, gts)
    b = two_stage_match(bundle, [gts[i] for i in perm])
    inv = {int(new): int(old) for new, old in enumerate(perm)}
    assert sorted((q, inv[g]) for q, g in b.humans) == a.humans
    assert {inv[g]: pp for g, pp in b.parts.items()} == a.parts
    assert b.human_cost == pytest.approx(a.human_cost, abs=1e-12)
    assert b.part_cost == pytest.approx(a.part_cost, abs=1e-12)


def test_query_budget(rng):
    n = 60
    hm = rng.uniform(size=(N_HUMAN_QUERIES, n))
    pm = rng.uniform(size=(N_HUMAN_QUERIES, N_PART_QUERIES, n))
    gts = []
    for h in range(7):
        m = np.zeros(n)
        m[h * 8:(h + 1) * 8] = 1
        parts = np.stack([np.eye(n)[h * 8 + k] for k in range(8)])
        gts.append(GroundTruthHuman(m, parts, np.arange(1, 9)))
    a = two_stage_match(QueryBundle.from_arrays(hm, pm), gts)
    assert len(a.humans) == N_HUMAN_QUERIES
    assert all(len(pp) <= N_PART_QUERIES for pp in a.parts.values())


def test_empty_inputs(rng):
    bundle = QueryBundle.from_arrays(rng.uniform(size=(2, 5)), rng.uniform(size=(2, 3, 5)))
    a = two_stage_match(bundle, [])
    assert a.humans == [] and a.parts == {}
    d = a.to_dict()
    assert d["config"]["w_bce"] == 5.0


def test_bundle_validation(rng):
    with pytest.raises(ValueError):
        QueryBundle.from_arrays(rng.uniform(size=(2, 5)), rng.uniform(size=(3, 3, 5)))
    with pytest.raises(ValueError):
        QueryBundle.from_arrays(rng.uniform(size=(1, 5)), rng.uniform(size=(1, 2, 5)), rng.uniform(size=(1, 2, 4)))


def test_ground_truth_from_labels():
    inst = np.array([0, 1, 1, 1, 2, 2])
    part = np.array([0, 1, 8, 8, 1, 0])
    g = GroundTruthHuman.from_labels(inst, part, 1)
    assert g.mask.tolist() == [0, 1, 1, 1, 0, 0]
    assert g.part_ids.tolist() == [1, 8]
    assert g.part_masks.tolist() == [[0, 1, 0, 0, 0, 0], [0, 0, 1, 1, 0, 0]]


# --- attention scope ----------------------------------------------------------------

def test_attention_scope_examples():
    full, empty, mixed = attention_scope_mask([np.full(4, 0.95), np.zeros(4), np.array([0.6, 0.4, 0.5])])
    assert full.tolist() == [0, 1, 2, 3]
    assert empty.tolist() == [0, 1, 2, 3]
    assert mixed.tolist() == [0, 2]


@settings(max_examples=40)
@given(arrays(np.float64, 12, elements=st.floats(0, 1)), st.floats(0.01, 1))
def test_attention_scope_property(m, thr):
    (s,) = attention_scope_mask([m], thr)
    want = np.nonzero(m >= thr)[0]
    assert s.tolist() == (want.tolist() if len(want) else list(range(12)))
