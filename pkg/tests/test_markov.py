import itertools
import math

import numpy as np
import pytest

from trnglab.markov import (AttackCurve, TransitionMatrix,
                            attack_success_curve, build_increment_pmf,
                            build_transition_matrix, mask_for_symbols,
                            matrix_power, sequence_probability,
                            shift_symmetry_check, top_k_sequences)


@pytest.fixture(scope="module")
def P():
    return build_transition_matrix(build_increment_pmf(129.5, 1.0))


def enum_prob(pmf, query):
    """Oracle: direct sum over start states and increment paths."""
    offs = [int(k) for k in pmf.offsets]
    probs = [float(p) for p in pmf.probs]
    total = 0.0
    for s0 in range(128):
        if (s0 >> 4) != query[0]:
            continue
        stack = [(s0, 1.0 / 128.0, 1)]
        while stack:
            state, p, depth = stack.pop()
            if depth == len(query):
                total += p
                continue
            for k, pk in zip(offs, probs):
                nxt = (state + k) % 128
                if (nxt >> 4) == query[depth]:
                    stack.append((nxt, p * pk, depth + 1))
    return total


# --- construction ---

def test_matrix_is_row_stochastic(P):
    sums = P.entries.sum(axis=1)
    assert np.abs(sums - 1.0).max() < 1e-12
    assert P.entries.min() >= 0.0


def test_matrix_is_circulant(P):
    row0 = P.entries[0]
    for i in range(1, 128):
        assert np.array_equal(P.entries[i], np.roll(row0, i))


def test_matrix_folds_pmf_mod_128(P):
    pmf = build_increment_pmf(129.5, 1.0)
    expected = np.zeros(128)
    for k, p in zip(pmf.offsets, pmf.probs):
        expected[int(k) % 128] += p
    assert np.allclose(P.entries[0], expected, atol=1e-15)


def test_transition_matrix_validation():
    bad = np.zeros((128, 128))
    with pytest.raises(ValueError):
        TransitionMatrix(entries=bad)
    with pytest.raises(ValueError):
        TransitionMatrix(entries=np.eye(64))
    neg = np.eye(128)
    neg[0, 0] = -1.0
    neg[0, 1] = 2.0
    with pytest.raises(ValueError):
        TransitionMatrix(entries=neg)


def test_zero_sigma_matrix_is_permutation():
    P0 = build_transition_matrix(build_increment_pmf(129.5, 0.0))
    assert np.array_equal(P0.entries @ np.ones(128), np.ones(128))
    assert set(np.unique(P0.entries)) == {0.0, 1.0}
    # increment 129 advances every state by one mod 128
    for i in range(128):
        assert P0.entries[i, (i + 129) % 128] == 1.0


# --- powers ---

def test_matrix_power_identity_and_composition(P):
    I = matrix_power(P, 0)
    assert np.array_equal(I.entries, np.eye(128))
    P2 = matrix_power(P, 2)
    assert np.allclose(P2.entries, P.entries @ P.entries, atol=1e-15)
    P5 = matrix_power(P, 5)
    assert np.allclose(P5.entries,
                       P2.entries @ P2.entries @ P.entries, atol=1e-14)


def test_matrix_power_stays_stochastic(P):
    P64 = matrix_power(P, 64)
    assert np.abs(P64.entries.sum(axis=1) - 1.0).max() < 1e-9
    with pytest.raises(ValueError):
        matrix_power(P, -1)


def test_matrix_power_converges_to_uniform(P):
    # irreducible aperiodic doubly stochastic chain: uniform stationary law;
    # the slowest mode decays like exp(-2 (pi sigma / 128)^2) per step
    Pn = matrix_power(P, 16384)
    assert np.abs(Pn.entries - 1.0 / 128.0).max() < 1e-6


# --- masking ---

def test_mask_keeps_only_selected_block(P):
    M = mask_for_symbols(P, 2, 3)
    assert M.shape == (128, 128)
    assert np.array_equal(M[32:48, 48:64], P.entries[32:48, 48:64])
    M[32:48, 48:64] = 0.0
    assert not M.any()


def test_mask_domination(P):
    # masking never increases any entry
    for a, b in ((0, 0), (1, 2), (7, 0)):
        M = mask_for_symbols(P, a, b)
        assert (M <= P.entries + 1e-18).all()
        assert M.sum() <= P.entries.sum()


def test_mask_validates_symbols(P):
    with pytest.raises(ValueError):
        mask_for_symbols(P, 8, 0)
    with pytest.raises(ValueError):
        mask_for_symbols(P, 0, -1)


def test_masked_matrix_route_equals_block_route(P):
    # full 128-wide masked products against the 16-wide block slices
    for q in ((0, 0, 0), (1, 2, 3), (7, 0, 1), (5, 5, 4)):
        v = np.full(128, 1.0 / 128.0)
        sel = np.zeros(128)
        sel[q[0] * 16:(q[0] + 1) * 16] = 1.0
        v = v * sel
        for a, b in zip(q, q[1:]):
            v = v @ mask_for_symbols(P, a, b)
        assert sequence_probability(P, q) == pytest.approx(v.sum(),
                                                           abs=1e-12)


# --- sequence probabilities ---

def test_sequence_probability_validation(P):
    with pytest.raises(ValueError):
        sequence_probability(P, ())
    with pytest.raises(ValueError):
        sequence_probability(P, (0, 8))


def test_single_symbol_is_uniform(P):
    for s in range(8):
        assert sequence_probability(P, (s,)) == pytest.approx(0.125,
                                                              abs=1e-15)


def test_sequence_probability_matches_path_enumeration(P):
    pmf = build_increment_pmf(129.5, 1.0)
    for length in (1, 2, 3):
        total = 0.0
        worst = 0.0
        for q in itertools.product(range(8), repeat=length):
            got = sequence_probability(P, q)
            worst = max(worst, abs(got - enum_prob(pmf, q)))
            total += got
        assert worst < 1e-10
        assert total == pytest.approx(1.0, abs=1e-8)


def test_shift_symmetry_holds_for_circulant(P):
    assert shift_symmetry_check(P)


def test_shift_symmetry_fails_for_biased_matrix():
    # pile extra mass inside block 0 and renormalize; rotation symmetry dies
    entries = build_transition_matrix(
        build_increment_pmf(129.5, 1.0)).entries.copy()
    entries[0:16, 0:16] += 0.5 / 16.0
    entries /= entries.sum(axis=1, keepdims=True)
    biased = TransitionMatrix(entries=entries)
    assert not shift_symmetry_check(biased)


# --- top-k enumeration ---

def test_top_k_exhaustive_oracle_l2(P):
    got = top_k_sequences(P, 2, 64)
    brute = sorted(
        ((q, sequence_probability(P, q))
         for q in itertools.product(range(8), repeat=2)),
        key=lambda item: (-item[1], item[0]))
    assert len(got) == 64
    assert [q for q, _ in got] == [q for q, _ in brute]
    for (qa, pa), (qb, pb) in zip(got, brute):
        assert pa == pytest.approx(pb, abs=1e-12)


def test_top_k_mass_ordering(P):
    seqs = top_k_sequences(P, 4, 32)
    probs = [p for _, p in seqs]
    assert probs == sorted(probs, reverse=True)
    assert len({q for q, _ in seqs}) == 32


def test_top_k_clamps_k(P):
    assert len(top_k_sequences(P, 1, 1000)) == 8


def test_top_k_validation(P):
    with pytest.raises(ValueError):
        top_k_sequences(P, 0, 5)
    with pytest.raises(ValueError):
        top_k_sequences(P, 3, 0)


def test_top_k_zero_sigma_constant_runs():
    # the noiseless chain has exactly eight nonzero length-5 sequences,
    # each an eighth likely, and they are near-constant symbol ramps
    P0 = build_transition_matrix(build_increment_pmf(128.0, 0.0))
    top = top_k_sequences(P0, 5, 8)
    for q, p in top:
        assert p == pytest.approx(0.125, abs=1e-15)
        assert len(set(q)) == 1


# --- attack curve ---

def test_attack_curve_matches_exhaustive(P):
    for key_bits, length in ((6, 2), (9, 3)):
        allp = sorted((sequence_probability(P, q)
                       for q in itertools.product(range(8), repeat=length)),
                      reverse=True)
        budgets = [1, 3, 17, 8 ** length]
        curve = attack_success_curve(P, key_bits, budgets)
        assert curve.sequence_length == length
        for (budget, got) in curve.points:
            expected = min(1.0, sum(allp[:budget]))
            assert got == pytest.approx(expected, abs=1e-9)


def test_attack_curve_monotone_and_bounded(P):
    curve = attack_success_curve(P, 30, [1, 10, 100, 1000, 10_000])
    probs = [p for _, p in curve.points]
    assert all(0.0 <= p <= 1.0 for p in probs)
    assert all(b >= a for a, b in zip(probs, probs[1:]))


def test_attack_curve_exhaustive_budget_is_one(P):
    curve = attack_success_curve(P, 6, [64, 100])
    assert curve.points[0] == (64, 1.0)
    # over-budget clamps to the full space
    assert curve.points[1] == (64, 1.0)


def test_attack_curve_validation(P):
    with pytest.raises(ValueError):
        attack_success_curve(P, 2, [4])
    with pytest.raises(ValueError):
        attack_success_curve(P, 15, [])
    with pytest.raises(ValueError):
        attack_success_curve(P, 15, [0])


def test_attack_curve_fields(P):
    curve = attack_success_curve(P, 15, [8])
    assert isinstance(curve, AttackCurve)
    assert curve.key_bits == 15
    assert curve.sequence_length == 5
    assert curve.points[0][0] == 8
    assert curve.points[0][1] == pytest.approx(0.611, abs=0.02)
