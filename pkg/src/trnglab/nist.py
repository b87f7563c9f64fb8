"""Seven SP 800-22 statistical tests.

Frequency, block frequency, cumulative sums (both directions), longest run
of ones, spectral (DFT), and approximate entropy, evaluated at significance
0.01.  Implementations follow the SP 800-22 formulas directly; agreement
with an independent reference implementation is part of the test suite.

Bits are passed as anything array-like of 0/1 (a Bitstream works via its
.bits attribute).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from trnglab.special import erfc, igamc, normal_cdf

ALPHA = 0.01

# longest-run-of-ones tables: stream threshold -> (M, class bounds, pi)
_LONGEST_RUN_TABLES = (
    (750000, 10000, (10, 16), (0.0882, 0.2092, 0.2483, 0.1933, 0.1208,
                               0.0675, 0.0727)),
    (6272, 128, (4, 9), (0.1174, 0.2430, 0.2493, 0.1752, 0.1027, 0.1124)),
    (128, 8, (1, 4), (0.2148, 0.3672, 0.2305, 0.1875)),
)


@dataclass(frozen=True)
class TestResult:
    test_name: str
    p_values: tuple[float, ...]
    passed: bool

    @property
    def p_value(self) -> float:
        return min(self.p_values)


@dataclass(frozen=True)
class BatteryReport:
    results: tuple[TestResult, ...]
    n: int
    metadata: dict = field(default_factory=dict)

    @property
    def all_passed(self) -> bool:
        return all(r.passed for r in self.results)

    def __getitem__(self, name: str) -> TestResult:
        for r in self.results:
            if r.test_name == name:
                return r
        raise KeyError(name)


def _bits(bits, n=None) -> np.ndarray:
    arr = getattr(bits, "bits", bits)
    arr = np.asarray(arr, dtype=np.uint8)
    if arr.ndim != 1:
        raise ValueError("bits must be one-dimensional")
    if n is not None:
        if n > arr.size:
            raise ValueError("n exceeds available bits")
        arr = arr[:n]
    return arr


def _result(name: str, p_values, alpha: float = ALPHA) -> TestResult:
    ps = tuple(float(min(max(p, 0.0), 1.0)) for p in p_values)
    return TestResult(name, ps, passed=min(ps) >= alpha)


def frequency_test(bits, n: int | None = None, min_n: int = 100) -> TestResult:
    """Monobit test: p = erfc(|S|/sqrt(2n)) with S = 2*ones - n."""
    x = _bits(bits, n)
    if x.size < min_n:
        raise ValueError(f"need at least {min_n} bits")
    s = abs(2 * int(x.sum()) - x.size)
    p = erfc(s / math.sqrt(2.0 * x.size))
    return _result("frequency", [p])


def block_frequency_test(bits, n: int | None = None,
                         block_len: int = 128) -> TestResult:
    """Chi-square of per-block one-proportions over disjoint blocks."""
    x = _bits(bits, n)
    m = block_len
    if x.size < m:
        raise ValueError("stream shorter than one block")
    nblocks = x.size // m
    pi = x[: nblocks * m].reshape(nblocks, m).mean(axis=1)
    chi2 = 4.0 * m * float(((pi - 0.5) ** 2).sum())
    p = igamc(nblocks / 2.0, chi2 / 2.0)
    return _result("block_frequency", [p])


def _cusum_p(z: int, n: int) -> float:
    zs = z / math.sqrt(n)
    total = 1.0
    k_lo = int(math.floor((-n / z + 1) / 4.0))
    k_hi = int(math.floor((n / z - 1) / 4.0))
    for k in range(k_lo, k_hi + 1):
        total -= normal_cdf((4 * k + 1) * zs) - normal_cdf((4 * k - 1) * zs)
    k_lo = int(math.floor((-n / z - 3) / 4.0))
    for k in range(k_lo, k_hi + 1):
        total += normal_cdf((4 * k + 3) * zs) - normal_cdf((4 * k + 1) * zs)
    return total

def cumulative_sums_test(bits, n: int | None = None,
                         mode: str = "forward") -> TestResult:
    """Maximum partial-sum excursion of the +-1-mapped stream."""
    if mode not in ("forward", "reverse"):
        raise ValueError("mode must be forward or reverse")
    x = _bits(bits, n)
    if x.size < 100:
        raise ValueError("need at least 100 bits")
    steps = 2 * x.astype(np.int64) - 1
    if mode == "reverse":
        steps = steps[::-1]
    sums = np.cumsum(steps)
    z = int(max(sums.max(), -sums.min()))
    p = _cusum_p(z, x.size)
    return _result(f"cumulative_sums_{mode}", [p])


def longest_run_test(bits, n: int | None = None) -> TestResult:
    """Longest run of ones per block against the SP 800-22 class tables."""
    x = _bits(bits, n)
    for threshold, m, (v_lo, v_hi), pi in _LONGEST_RUN_TABLES:
        if x.size >= threshold:
            break
    else:
        raise ValueError("need at least 128 bits")
    nblocks = x.size // m
    blocks = x[: nblocks * m].reshape(nblocks, m)
    run = np.zeros(nblocks, dtype=np.int64)
    best = np.zeros(nblocks, dtype=np.int64)
    for j in range(m):
        col = blocks[:, j].astype(np.int64)
        run = (run + col) * col
        np.maximum(best, run, out=best)
    classes = np.clip(best, v_lo, v_hi) - v_lo
    counts = np.bincount(classes, minlength=v_hi - v_lo + 1)
    expected = nblocks * np.asarray(pi)
    chi2 = float(((counts - expected) ** 2 / expected).sum())
    p = igamc(len(pi) / 2.0 - 0.5, chi2 / 2.0)
    return _result("longest_runs", [p])


def spectral_fft_test(bits, n: int | None = None) -> TestResult:
    """DFT peak count below the 95% threshold sqrt(n*ln(1/0.05))."""
    x = _bits(bits, n)
    if x.size < 100:
        raise ValueError("need at least 100 bits")
    nn = x.size
    mags = np.abs(np.fft.rfft(2.0 * x - 1.0)[: nn // 2])
    threshold = math.sqrt(nn * math.log(1.0 / 0.05))
    n1 = float((mags < threshold).sum())
    n0 = 0.95 * nn / 2.0
    d = (n1 - n0) / math.sqrt(nn * 0.95 * 0.05 / 4.0)
    p = erfc(abs(d) / math.sqrt(2.0))
    return _result("fft", [p])


def default_apen_block(n: int) -> int:
    """Largest m with m < log2(n) - 5 per SP 800-22 guidance, floor 2."""
    return max(2, int(math.floor(math.log2(n))) - 6)


def approximate_entropy_test(bits, n: int | None = None,
                             m: int | None = None) -> TestResult:
    """ApEn(m) = phi(m) - phi(m+1) against ln 2, chi-square p-value."""
    x = _bits(bits, n)
    if x.size < 100:
        raise ValueError("need at least 100 bits")
    nn = x.size
    if m is None:
        m = default_apen_block(nn)
    if not 1 <= m <= 16 or 2 ** (m + 1) > nn:
        raise ValueError("block length m too large for stream")

    def phi(mm: int) -> float:
        ext = np.concatenate([x, x[: mm - 1]]) if mm > 1 else x
        v = np.zeros(nn, dtype=np.int64)
        for i in range(mm):
            v = (v << 1) | ext[i: i + nn]
        c = np.bincount(v, minlength=2 ** mm) / nn
        c = c[c > 0]
        return float((c * np.log(c)).sum())

    apen = phi(m) - phi(m + 1)
    chi2 = 2.0 * nn * (math.log(2.0) - apen)
    p = igamc(2 ** (m - 1), chi2 / 2.0)
    return _result("approximate_entropy", [p])


def run_battery(bits, metadata: dict | None = None) -> BatteryReport:
    """All seven tests in report order on one stream."""
    x = _bits(bits)
    results = (
        frequency_test(x),
        block_frequency_test(x),
        cumulative_sums_test(x, mode="forward"),
        cumulative_sums_test(x, mode="reverse"),
        longest_run_test(x),
        spectral_fft_test(x),
        approximate_entropy_test(x),
    )
    return BatteryReport(results=results, n=int(x.size),
                         metadata=dict(metadata or {}))


def format_report(report: BatteryReport) -> str:
    lines = [f"{'test':<24} {'p-value':>12} verdict"]
    for r in report.results:
        pv = ", ".join(f"{p:.6f}" for p in r.p_values)
        lines.append(f"{r.test_name:<24} {pv:>12} "
                     f"{'pass' if r.passed else 'FAIL'}")
    lines.append(f"overall: {'pass' if report.all_passed else 'FAIL'} "
                 f"({report.n} bits)")
    return "\n".join(lines)
