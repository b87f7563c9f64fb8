"""Collapse-time simulator for a 3-edge ring oscillator TRNG.

Three edges race around an inverter ring, nominally 120 degrees apart.  The
state tracked here is the triple of inter-edge gaps (picoseconds), which sum
to the ring period.  Each cycle every gap picks up zero-sum Gaussian jitter;
a small deterministic drift feeds the widest gap at the expense of the other
two, pushing the ring toward collapse.  Collapse happens when any gap falls
to the minimum sustainable pulse width, and the cycle count at that moment
is the entropy sample (14-bit saturating counter).

Temperature enters through a linear stage-delay law.  Jitter and drift scale
with stage delay so the Trojan-free dynamics are temperature-stable; the
collapse barrier is a circuit constant and does not scale.  The Trojan is an
extra injection delay on one edge that grows linearly above 25 C; once the
offset eats the whole nominal gap the ring collapses immediately and the
device degenerates into the predictable counter modeled by
infected_counter_trace().
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy import stats as _stats
from scipy.special import ndtr

from trnglab.noise import (
    GOLDEN,
    MASK64,
    _mix64_nb,
    context_digest,
    derive_sample_key,
    gauss_pair,
)

T_REF_DEGC = 25.0
MAX_COUNT = (1 << 14) - 1

# zero-sum jitter basis: e1=(1,-1,0)/sqrt2, e2=(1,1,-2)/sqrt6 scaled by the
# effective per-cycle sigma reproduce mean-centered iid Gaussians exactly
_E1 = 0.7071067811865476
_E2 = 0.4082482904638631

# frozen calibration: Trojan-free mean count ~3.2e3 at 25 C with an
# inverse-Gaussian KS comfortably under 0.05, censoring ~0.03%, and count
# spread (std ~2e3) wide enough that COUNT[6:4] is uniform to <1e-9 bias
_CAL_JITTER_SIGMA_PS = 0.5
_CAL_DRIFT_PS = 0.04


@dataclass(frozen=True)
class RingConfig:
    """Physical abstraction of the ring: delays, jitter, drift, barrier."""

    stage_count: int = 15
    stage_delay_ps: float = 20.0
    jitter_sigma_ps: float = _CAL_JITTER_SIGMA_PS
    drift_ps_per_cycle: float = _CAL_DRIFT_PS
    min_gap_ps: float | None = None
    temp_coeff_per_degC: float = 0.001

    def __post_init__(self):
        if self.stage_count <= 0 or self.stage_count % 3 != 0:
            raise ValueError("stage_count must be a positive multiple of 3")
        if self.stage_delay_ps <= 0:
            raise ValueError("stage_delay_ps must be positive")
        if self.jitter_sigma_ps < 0:
            raise ValueError("jitter_sigma_ps must be nonnegative")
        if self.min_gap_ps is None:
            object.__setattr__(self, "min_gap_ps", self.stage_delay_ps)
        if self.min_gap_ps <= 0:
            raise ValueError("min_gap_ps must be positive")
        if self.min_gap_ps >= self.period_ps() / 3.0:
            raise ValueError("min_gap_ps must be below period/3")

    def period_ps(self) -> float:
        """Ring period at 25 C: one full oscillation is two traversals."""
        return 2.0 * self.stage_count * self.stage_delay_ps

    def sigma_eff_ps(self) -> float:
        """Per-cycle gap noise scale: 2*stage_count stage transitions."""
        return self.jitter_sigma_ps * math.sqrt(2.0 * self.stage_count)


@dataclass(frozen=True)
class TrojanConfig:
    """Extra injection delay on one edge, growing with temperature."""

    enabled: bool = True
    base_offset_ps: float = 5.0
    offset_slope_ps_per_degC: float = 2.2
    target_edge: int = 1

    def __post_init__(self):
        if self.base_offset_ps < 0:
            raise ValueError("base_offset_ps must be nonnegative")
        if self.offset_slope_ps_per_degC < 0:
            raise ValueError("offset_slope_ps_per_degC must be nonnegative")
        if self.target_edge not in (0, 1, 2):
            raise ValueError("target_edge must be 0, 1 or 2")


@dataclass(frozen=True)
class ThermalPoint:
    temperature_degC: float

    def __post_init__(self):
        if not math.isfinite(self.temperature_degC):
            raise ValueError("temperature must be finite")


@dataclass(frozen=True)
class RingState:
    gaps_ps: tuple[float, float, float]
    cycle_index: int

    def min_gap(self) -> float:
        return min(self.gaps_ps)


@dataclass(frozen=True)
class CollapseSample:
    count: int
    censored: bool

    def __post_init__(self):
        if not 0 <= self.count <= MAX_COUNT:
            raise ValueError("count out of 14-bit range")
        if self.censored and self.count != MAX_COUNT:
            raise ValueError("censored sample must saturate the counter")


@dataclass(frozen=True, eq=False)
class IncrementPmf:
    """Integer-valued counter increment law: rounded N(mu, sigma) in LSB."""

    mu_lsb: float
    sigma_lsb: float
    offsets: np.ndarray
    probs: np.ndarray

    def mean(self) -> float:
        return float(np.dot(self.offsets, self.probs))


def build_increment_pmf(mu_lsb: float, sigma_lsb: float) -> IncrementPmf:
    """P(k) proportional to the unit-bin Gaussian integral at integer k.

    Keeps every integer whose bin mass is at least 1e-12 and renormalizes.
    sigma_lsb == 0 degenerates to a point mass at the bin containing mu.
    """
    if sigma_lsb < 0:
        raise ValueError("sigma_lsb must be nonnegative")
    if sigma_lsb == 0.0:
        k = math.ceil(mu_lsb - 0.5)
        return IncrementPmf(mu_lsb, sigma_lsb,
                            np.array([k], dtype=np.int64),
                            np.array([1.0]))
    lo = math.floor(mu_lsb - 8.0 * sigma_lsb) - 1
    hi = math.ceil(mu_lsb + 8.0 * sigma_lsb) + 1
    ks = np.arange(lo, hi + 1, dtype=np.int64)
    edges = (ks - mu_lsb) / sigma_lsb
    probs = ndtr(edges + 0.5 / sigma_lsb) - ndtr(edges - 0.5 / sigma_lsb)
    keep = probs >= 1e-12
    ks, probs = ks[keep], probs[keep]
    probs = probs / probs.sum()
    return IncrementPmf(mu_lsb, sigma_lsb, ks, probs)


def stage_delay_at(cfg: RingConfig, t: ThermalPoint) -> float:
    """Linear thermal law for per-stage delay; exact at 25 C."""
    d = cfg.stage_delay_ps * (1.0 + cfg.temp_coeff_per_degC
                              * (t.temperature_degC - T_REF_DEGC))
    if d <= 0:
        raise ValueError("stage delay must stay positive at this temperature")
    return d


def trojan_offset_at(tc: TrojanConfig | None, t: ThermalPoint) -> float:
    if tc is None or not tc.enabled:
        return 0.0
    return tc.base_offset_ps + tc.offset_slope_ps_per_degC * max(
        0.0, t.temperature_degC - T_REF_DEGC)


def _thermal_scale(cfg: RingConfig, t: ThermalPoint) -> float:
    return stage_delay_at(cfg, t) / cfg.stage_delay_ps


def init_ring(cfg: RingConfig, tc: TrojanConfig | None,
              t: ThermalPoint) -> RingState:
    """Inject three edges a third of a period apart, Trojan edge late.

    The Trojan delay steals from the gap behind the target edge and feeds
    the gap ahead of it.  A gap driven to the barrier is clamped there
    (collapse on cycle 0), the excess returned to the enlarged gap so the
    gap sum stays one period.
    """
    period = 2.0 * stage_delay_at(cfg, t) * cfg.stage_count
    if period <= 3.0 * cfg.min_gap_ps:
        raise ValueError("period too short for three edges at this gap floor")
    third = period / 3.0
    gaps = [third, third, third]
    off = trojan_offset_at(tc, t)
    if off > 0.0:
        edge = tc.target_edge
        behind = (edge - 1) % 3
        gaps[behind] -= off
        gaps[edge] += off
        if gaps[behind] <= cfg.min_gap_ps:
            gaps[edge] -= cfg.min_gap_ps - gaps[behind]
            gaps[behind] = cfg.min_gap_ps
    return RingState(gaps_ps=(gaps[0], gaps[1], gaps[2]), cycle_index=0)


def is_terminal(state: RingState, cfg: RingConfig) -> bool:
    return state.min_gap() <= cfg.min_gap_ps


def advance_cycle(state: RingState, cfg: RingConfig, t: ThermalPoint,
                  key: int) -> RingState:
    """One ring cycle: zero-sum jitter plus inward drift on the widest gap.

    key is the per-sample noise key; the cycle index selects the stream
    position, so the update is a pure function of (state, key).  This is the
    reference implementation; _collapse_batch() is the compiled twin and the
    two must match bit for bit (enforced in tests).
    """
    if is_terminal(state, cfg):
        raise ValueError("advance_cycle on terminal state")
    scale = _thermal_scale(cfg, t)
    sigma = cfg.sigma_eff_ps() * scale
    drift = cfg.drift_ps_per_cycle * scale
    g0, g1, g2 = state.gaps_ps
    z1, z2 = gauss_pair(key, state.cycle_index)
    n0 = sigma * (z1 * _E1 + z2 * _E2)
    n1 = sigma * (z2 * _E2 - z1 * _E1)
    n2 = -(n0 + n1)
    dd = drift * (1.0 / 3.0)
    d0 = d1 = d2 = -dd
    if g0 >= g1 and g0 >= g2:
        d0 = dd + dd
    elif g1 >= g2:
        d1 = dd + dd
    else:
        d2 = dd + dd
    return RingState(
        gaps_ps=(g0 + (n0 + d0), g1 + (n1 + d1), g2 + (n2 + d2)),
        cycle_index=state.cycle_index + 1,
    )


@njit(cache=True)
def _collapse_batch(keys, g0_init, g1_init, g2_init, sigma, drift, barrier,
                    max_count):
    # compiled twin of advance_cycle iterated to collapse; same float ops
    n = keys.size
    counts = np.empty(n, np.int32)
    censored = np.zeros(n, np.bool_)
    u53 = 1.1102230246251565e-16
    two_pi = 6.283185307179586
    e1 = 0.7071067811865476
    e2 = 0.4082482904638631
    golden = np.uint64(0x9E3779B97F4A7C15)
    one = np.uint64(1)
    eleven = np.uint64(11)
    dd = drift * (1.0 / 3.0)
    for s in range(n):
        g0, g1, g2 = g0_init, g1_init, g2_init
        if g0 <= barrier or g1 <= barrier or g2 <= barrier:
            counts[s] = 0
            continue
        ctr = keys[s]
        cnt = max_count
        cens = True
        for k in range(max_count):
            ctr += golden
            x1 = _mix64_nb(ctr)
            ctr += golden
            x2 = _mix64_nb(ctr)
            u1 = float((x1 >> eleven) + one) * u53
            u2 = float(x2 >> eleven) * u53
            r = math.sqrt(-2.0 * math.log(u1))
            theta = two_pi * u2
            z1 = r * math.cos(theta)
            z2 = r * math.sin(theta)
            n0 = sigma * (z1 * e1 + z2 * e2)
            n1 = sigma * (z2 * e2 - z1 * e1)
            n2 = -(n0 + n1)
            d0 = -dd
            d1 = -dd
            d2 = -dd
            if g0 >= g1 and g0 >= g2:
                d0 = dd + dd
            elif g1 >= g2:
                d1 = dd + dd
            else:
                d2 = dd + dd
            g0 += n0 + d0
            g1 += n1 + d1
            g2 += n2 + d2
            if g0 <= barrier or g1 <= barrier or g2 <= barrier:
                cnt = k + 1
                cens = False
                break
        counts[s] = cnt
        censored[s] = cens
    return counts, censored


def _noise_context(cfg: RingConfig, tc: TrojanConfig | None,
                   t: ThermalPoint) -> int:
    off = trojan_offset_at(tc, t)
    edge = tc.target_edge if tc is not None and tc.enabled else -1
    text = "|".join([
        repr(cfg.stage_count), repr(cfg.stage_delay_ps),
        repr(cfg.jitter_sigma_ps), repr(cfg.drift_ps_per_cycle),
        repr(cfg.min_gap_ps), repr(cfg.temp_coeff_per_degC),
        repr(t.temperature_degC), repr(off), repr(edge),
    ])
    return context_digest(text)


def _batch_arrays(cfg: RingConfig, tc: TrojanConfig | None, t: ThermalPoint,
                  seed: int, n: int, first_index: int = 0):
    """Raw (counts, censored) arrays for n samples; core of the public ops."""
    ctx = _noise_context(cfg, tc, t)
    keys = np.empty(n, dtype=np.uint64)
    for i in range(n):
        keys[i] = derive_sample_key(seed, ctx, first_index + i)
    state = init_ring(cfg, tc, t)
    scale = _thermal_scale(cfg, t)
    g0, g1, g2 = state.gaps_ps
    counts, censored = _collapse_batch(
        keys, g0, g1, g2,
        cfg.sigma_eff_ps() * scale,
        cfg.drift_ps_per_cycle * scale,
        float(cfg.min_gap_ps),
        MAX_COUNT,
    )
    return counts, censored


def simulate_collapse(cfg: RingConfig, tc: TrojanConfig | None,
                      t: ThermalPoint, seed: int,
                      sample_index: int = 0) -> CollapseSample:
    """Run one ring from injection to collapse (or counter saturation)."""
    counts, censored = _batch_arrays(cfg, tc, t, seed, 1, sample_index)
    return CollapseSample(count=int(counts[0]), censored=bool(censored[0]))


def sample_collapse_counts(cfg: RingConfig, tc: TrojanConfig | None,
                           t: ThermalPoint, n: int,
                           seed: int) -> list[CollapseSample]:
    """n independent collapse samples, order-independent per-index keys."""
    if n < 1:
        raise ValueError("n must be positive")
    counts, censored = _batch_arrays(cfg, tc, t, seed, n)
    return [CollapseSample(count=int(c), censored=bool(z))
            for c, z in zip(counts, censored)]


def infected_counter_trace(pmf: IncrementPmf, n: int,
                           seed: int) -> np.ndarray:
    """Degraded-mode counter: free-running mod-2^14 walk with pmf steps.

    c0 is uniform on [0, 128) (the attacker's uniform initial state over the
    7 observable bits; higher bits start 0); each later value adds an iid
    pmf increment.  Returns n counter readings including c0.
    """
    if n < 1:
        raise ValueError("n must be positive")
    rng = np.random.default_rng(seed)
    c0 = int(rng.integers(0, 128))
    if n == 1:
        return np.array([c0], dtype=np.int64)
    steps = rng.choice(pmf.offsets, size=n - 1, p=pmf.probs)
    trace = np.empty(n, dtype=np.int64)
    trace[0] = c0
    np.cumsum(steps, out=trace[1:])
    trace[1:] = (trace[1:] + c0) % (MAX_COUNT + 1)
    return trace


@dataclass(frozen=True)
class InverseGaussianFit:
    mu: float
    lam: float
    ks_statistic: float


def fit_inverse_gaussian(counts: np.ndarray) -> InverseGaussianFit:
    """Closed-form MLE for the inverse-Gaussian law, with a KS score.

    mu_hat is the sample mean; lambda_hat is n / sum(1/x - 1/mu_hat).
    Censored samples must be excluded by the caller.
    """
    x = np.asarray(counts, dtype=np.float64)
    if x.size < 2 or np.any(x <= 0):
        raise ValueError("need at least two positive counts")
    mu = float(x.mean())
    lam = float(x.size / np.sum(1.0 / x - 1.0 / mu))
    dist = _stats.invgauss(mu / lam, scale=lam)
    ks = float(_stats.kstest(x, dist.cdf).statistic)
    return InverseGaussianFit(mu=mu, lam=lam, ks_statistic=ks)
