"""Ring-oscillator TRNG laboratory.

Simulates a three-edge collapse-time ring oscillator with an optional
temperature-triggered degradation fault, extracts output bits the way the
hardware does, scores bitstreams with a battery of randomness tests, and
mounts a Markov-chain key-search attack against the degraded output.
"""

from trnglab.ring import (
    MAX_COUNT,
    RingConfig,
    TrojanConfig,
    ThermalPoint,
    RingState,
    CollapseSample,
    IncrementPmf,
    InverseGaussianFit,
    stage_delay_at,
    trojan_offset_at,
    init_ring,
    advance_cycle,
    simulate_collapse,
    sample_collapse_counts,
    infected_counter_trace,
    build_increment_pmf,
    fit_inverse_gaussian,
)
from trnglab.extract import (
    Bitstream,
    count_to_symbol,
    symbols_to_bitstream,
    write_bitstream,
    read_bitstream,
    render_raster,
)
from trnglab.nist import (
    TestResult,
    BatteryReport,
    frequency_test,
    block_frequency_test,
    cumulative_sums_test,
    longest_run_test,
    spectral_fft_test,
    approximate_entropy_test,
    default_apen_block,
    run_battery,
    format_report,
)
from trnglab.markov import (
    TransitionMatrix,
    AttackCurve,
    build_transition_matrix,
    matrix_power,
    mask_for_symbols,
    sequence_probability,
    top_k_sequences,
    attack_success_curve,
    shift_symmetry_check,
)
from trnglab.config import (
    RunSettings,
    parse_config,
    load_config,
    config_digest,
    resolve_seed,
)

__version__ = "0.1.0"
