"""Markov-chain attacker for the degraded TRNG.

The infected counter's 7 observable bits form a 128-state chain whose
one-step law is the rounded-Gaussian increment pmf folded mod 128, giving a
circulant row-stochastic matrix.  An output symbol fixes the state to one of
eight 16-state blocks, so the probability of a symbol sequence is the mass
surviving a product of masked 16x16 blocks starting from the uniform state.
Most-likely sequences come from best-first search over prefixes (prefix mass
is an admissible bound: masked steps never increase mass); attack-success
curves come from a threshold sweep that enumerates every sequence above a
probability floor.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from trnglab.ring import IncrementPmf, build_increment_pmf

__all__ = [
    "TransitionMatrix", "AttackCurve", "build_increment_pmf",
    "build_transition_matrix", "matrix_power", "mask_for_symbols",
    "sequence_probability", "top_k_sequences", "attack_success_curve",
    "shift_symmetry_check",
]

_N_STATES = 128
_BLOCK = 16
_N_SYMBOLS = 8


@dataclass(frozen=True, eq=False)
class TransitionMatrix:
    """128x128 row-stochastic matrix over the 7-bit counter states."""

    entries: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.entries, dtype=np.float64)
        if arr.shape != (_N_STATES, _N_STATES):
            raise ValueError("entries must be 128x128")
        if arr.min() < 0:
            raise ValueError("entries must be nonnegative")
        if np.abs(arr.sum(axis=1) - 1.0).max() > 1e-9:
            raise ValueError("rows must sum to 1 within 1e-9")
        object.__setattr__(self, "entries", arr)

    def entry(self, i: int, j: int) -> float:
        return float(self.entries[i, j])

    def block(self, from_symbol: int, to_symbol: int) -> np.ndarray:
        """16x16 sub-block for states with the given top-3-bit symbols."""
        _check_symbol(from_symbol)
        _check_symbol(to_symbol)
        return self.entries[
            from_symbol * _BLOCK:(from_symbol + 1) * _BLOCK,
            to_symbol * _BLOCK:(to_symbol + 1) * _BLOCK,
        ]


@dataclass(frozen=True)
class AttackCurve:
    key_bits: int
    sequence_length: int
    points: tuple[tuple[int, float], ...]


def _check_symbol(s: int) -> None:
    if not 0 <= s <= 7:
        raise ValueError("symbol must be a 3-bit value")


def build_transition_matrix(pmf: IncrementPmf) -> TransitionMatrix:
    """Fold the increment pmf mod 128 into a circulant stochastic matrix."""
    row0 = np.zeros(_N_STATES)
    for k, p in zip(pmf.offsets, pmf.probs):
        row0[int(k) % _N_STATES] += p
    entries = np.empty((_N_STATES, _N_STATES))
    for i in range(_N_STATES):
        entries[i] = np.roll(row0, i)
    return TransitionMatrix(entries=entries)


def matrix_power(P: TransitionMatrix, n: int) -> TransitionMatrix:
    """P**n by repeated squaring; n = 0 gives the identity."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    return TransitionMatrix(entries=np.linalg.matrix_power(P.entries, n))


def mask_for_symbols(P: TransitionMatrix, from_symbol: int,
                     to_symbol: int) -> np.ndarray:
    """Zero every transition not going from one symbol block to another."""
    masked = np.zeros((_N_STATES, _N_STATES))
    masked[
        from_symbol * _BLOCK:(from_symbol + 1) * _BLOCK,
        to_symbol * _BLOCK:(to_symbol + 1) * _BLOCK,
    ] = P.block(from_symbol, to_symbol)
    return masked


def uniform_state() -> np.ndarray:
    """Eq.-2 initial vector: every 7-bit state equally likely."""
    return np.full(_N_STATES, 1.0 / _N_STATES)


def sequence_probability(P: TransitionMatrix, query) -> float:
    """Probability that L consecutive outputs equal the query symbols.

    Selects the uniform initial vector's components in the first symbol's
    block, then applies one masked step per subsequent symbol.  Operating on
    the 16-wide block slices is algebraically identical to multiplying the
    full 128-wide vector by the masked matrices.
    """
    symbols = list(query)
    if not symbols:
        raise ValueError("query must be nonempty")
    for s in symbols:
        _check_symbol(s)
    v = np.full(_BLOCK, 1.0 / _N_STATES)
    prev = symbols[0]
    for s in symbols[1:]:
        v = v @ P.block(prev, s)
        prev = s
    return float(v.sum())


def top_k_sequences(P: TransitionMatrix, length: int,
                    k: int) -> list[tuple[tuple[int, ...], float]]:
    """k most likely length-L symbol sequences, best-first over prefixes.

    A prefix's surviving mass bounds every completion from above, so the
    first k complete sequences popped from the frontier are exact.  Ties
    break lexicographically.  k clamps to 8**length; if fewer sequences have
    nonzero probability than requested, the remainder is padded with
    zero-probability sequences in lexicographic order.
    """
    if length < 1:
        raise ValueError("length must be positive")
    if k < 1:
        raise ValueError("k must be positive")
    k = min(k, _N_SYMBOLS ** length)
    v0 = np.full(_BLOCK, 1.0 / _N_STATES)
    heap = [(-v0.sum(), (s,), v0) for s in range(_N_SYMBOLS)]
    heapq.heapify(heap)
    out: list[tuple[tuple[int, ...], float]] = []
    while heap and len(out) < k:
        neg_mass, prefix, v = heapq.heappop(heap)
        if len(prefix) == length:
            out.append((prefix, -neg_mass))
            continue
        a = prefix[-1]
        for b in range(_N_SYMBOLS):
            w = v @ P.block(a, b)
            mass = float(w.sum())
            if mass > 0.0:
                heapq.heappush(heap, (-mass, prefix + (b,), w))
    if len(out) < k:
        seen = {q for q, _ in out}
        for q in itertools.product(range(_N_SYMBOLS), repeat=length):
            if len(out) >= k:
                break
            if q not in seen:
                out.append((q, 0.0))
    return out


@njit(cache=True)
def _enum_threshold(blocks, reach, length, tau, out):
    """Count (and store while they fit) all sequence probs >= tau.

    blocks is the (8, 8, 16, 16) array of matrix sub-blocks; reach flags
    blocks with any mass.  Iterative DFS with pruning on prefix mass, which
    dominates every completion.
    """
    cnt = 0
    root = 16.0 / 128.0
    if tau > root:
        return 0
    if length == 1:
        for _s in range(8):
            if cnt < out.size:
                out[cnt] = root
            cnt += 1
        return cnt
    v = np.empty((length, 16))
    sym = np.empty(length, np.int64)
    child = np.empty(length, np.int64)
    for s0 in range(8):
        for j in range(16):
            v[0, j] = 1.0 / 128.0
        sym[0] = s0
        d = 0
        child[0] = 0
        while d >= 0:
            if child[d] == 8:
                d -= 1
                continue
            t = child[d]
            child[d] += 1
            if not reach[sym[d], t]:
                continue
            m = 0.0
            for j in range(16):
                acc = 0.0
                for i in range(16):
                    acc += v[d, i] * blocks[sym[d], t, i, j]
                v[d + 1, j] = acc
                m += acc
            if m < tau:
                continue
            if d + 2 == length:
                if cnt < out.size:
                    out[cnt] = m
                cnt += 1
            else:
                sym[d + 1] = t
                d += 1
                child[d] = 0
    return cnt


def _block_array(P: TransitionMatrix):
    blocks = np.empty((_N_SYMBOLS, _N_SYMBOLS, _BLOCK, _BLOCK))
    reach = np.zeros((_N_SYMBOLS, _N_SYMBOLS), dtype=np.bool_)
    for a in range(_N_SYMBOLS):
        for b in range(_N_SYMBOLS):
            blocks[a, b] = P.block(a, b)
            reach[a, b] = blocks[a, b].any()
    return blocks, reach


def attack_success_curve(P: TransitionMatrix, key_bits: int,
                         budgets) -> AttackCurve:
    """Success probability of guessing ceil(key_bits/3) outputs per budget.

    A budget of k guesses succeeds when the realized sequence is among the k
    most likely, so the success probability is their cumulative mass.  All
    sequences above a descending probability floor are enumerated until the
    largest budget is covered; a budget of 8**L is exhaustive and scores
    exactly 1.
    """
    if key_bits < 3:
        raise ValueError("key_bits must be at least 3")
    budgets = [int(b) for b in budgets]
    if not budgets or min(budgets) < 1:
        raise ValueError("budgets must be positive integers")
    length = math.ceil(key_bits / 3)
    total = _N_SYMBOLS ** length
    clamped = [min(b, total) for b in budgets]
    need = max(c for c in clamped if c < total) if any(
        c < total for c in clamped) else 0

    probs = np.empty(0)
    if need:
        blocks, reach = _block_array(P)
        tau = 16.0 / 128.0
        while True:
            out = np.empty(need * 4 + 4096)
            cnt = int(_enum_threshold(blocks, reach, length, tau, out))
            if cnt > out.size:
                out = np.empty(cnt)
                cnt = int(_enum_threshold(blocks, reach, length, tau, out))
            if cnt >= need:
                probs = np.sort(out[:cnt])[::-1]
                break
            if tau < 1e-300:
                probs = np.sort(out[:cnt])[::-1]
                break
            tau *= 0.25
    cum = np.cumsum(probs)

    points = []
    for b in sorted(clamped):
        if b == total:
            points.append((b, 1.0))
        elif b <= cum.size:
            points.append((b, float(min(1.0, cum[b - 1]))))
        else:
            points.append((b, float(min(1.0, cum[-1])) if cum.size else 0.0))
    return AttackCurve(key_bits=key_bits, sequence_length=length,
                       points=tuple(points))


def shift_symmetry_check(P: TransitionMatrix, tol: float = 1e-12) -> bool:
    """True iff sequence probabilities are invariant under symbol rotation.

    Exhausts every query of length 1..3 and every constant offset mod 8;
    this is the observable face of the circulant structure.
    """
    for length in (1, 2, 3):
        for q in itertools.product(range(_N_SYMBOLS), repeat=length):
            p0 = sequence_probability(P, q)
            for c in range(1, _N_SYMBOLS):
                shifted = tuple((s + c) % _N_SYMBOLS for s in q)
                if abs(sequence_probability(P, shifted) - p0) > tol:
                    return False
    return True
