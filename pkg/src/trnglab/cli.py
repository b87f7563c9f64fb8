"""Batch command line: simulate, sweep, bits, nist, attack, render.

Every file-producing run writes a manifest.json next to its outputs with the
resolved configuration, seed, and output names, so any result can be
regenerated byte-identically from the manifest alone.  Exit codes: 0 on
success, 1 for usage or configuration errors, 2 when a statistical battery
rejects, 3 for runtime failures.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
import tempfile
from dataclasses import asdict

import numpy as np

from trnglab import __version__
from trnglab.config import (DEFAULT_TEMPERATURES, RunSettings, config_digest,
                            load_config, resolve_seed)
from trnglab.extract import (Bitstream, count_to_symbol, read_bitstream,
                             render_raster, symbols_to_bitstream,
                             write_bitstream)
from trnglab.markov import (attack_success_curve, build_increment_pmf,
                            build_transition_matrix, top_k_sequences)
from trnglab.nist import format_report, run_battery
from trnglab.ring import (MAX_COUNT, RingConfig, ThermalPoint, TrojanConfig,
                          _batch_arrays, infected_counter_trace)

__all__ = ["main"]

_CENSOR_ABORT_RATE = 0.5


class _UsageError(Exception):
    pass


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trnglab",
        description="Collapse-time TRNG laboratory: simulation, extraction, "
                    "statistical testing, and Markov key-guessing attacks.")
    parser.add_argument("--version", action="version",
                        version=f"trnglab {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add_common(p, seed=True):
        p.add_argument("--config", help="key=value config file")
        if seed:
            p.add_argument("--seed", type=int, default=None,
                           help="RNG seed (falls back to TRNGLAB_SEED, then "
                                "the config file, then 0)")

    p = sub.add_parser("simulate", help="collapse-count samples to CSV")
    add_common(p)
    p.add_argument("--temp", help="temperature in degC (exactly one)")
    p.add_argument("--n", type=int, required=True, help="sample count")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="per-temperature summary CSV")
    add_common(p)
    p.add_argument("--temp", help="comma-separated temperatures in degC")
    p.add_argument("--n", type=int, required=True,
                   help="samples per temperature")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("bits", help="extract a bitstream file")
    add_common(p)
    p.add_argument("--temp", help="temperature in degC (exactly one)")
    p.add_argument("--n", type=int, required=True, help="number of bits")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--degraded-model", action="store_true",
                   help="use the predictable-counter abstraction instead of "
                        "the full ring simulation")
    p.add_argument("--mu", type=float, default=129.5,
                   help="degraded-model mean increment (LSB)")
    p.add_argument("--sigma", type=float, default=1.0,
                   help="degraded-model increment spread (LSB)")
    p.set_defaults(func=cmd_bits)

    p = sub.add_parser("nist", help="run the statistical battery on a "
                                    "bitstream file")
    p.add_argument("path", help="bitstream file written by `bits`")
    p.add_argument("--out", help="optional directory for the text report")
    p.set_defaults(func=cmd_nist)

    p = sub.add_parser("attack", help="ranked guesses and success curve for "
                                      "the degraded counter")
    p.add_argument("--mu", type=float, default=129.5,
                   help="mean counter increment (LSB)")
    p.add_argument("--sigma", type=float, default=1.0,
                   help="counter increment spread (LSB)")
    p.add_argument("--key-bits", type=int, required=True,
                   help="secret key size in bits")
    p.add_argument("--budgets", default="32768,262144",
                   help="comma-separated guess budgets")
    p.add_argument("--top-k", type=int, default=8,
                   help="number of ranked patterns to emit")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("render", help="bitstream to portable bitmap")
    p.add_argument("path", help="bitstream file written by `bits`")
    p.add_argument("--width", type=int, required=True, help="raster width")
    p.add_argument("--scan", choices=("row", "col"), default="row",
                   help="fill order of the raster")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_render)
    return parser


def _settings(args) -> RunSettings:
    if getattr(args, "config", None) is None:
        return RunSettings(ring=RingConfig(), trojan=TrojanConfig())
    try:
        return load_config(args.config)
    except OSError as exc:
        raise _UsageError(f"cannot read config: {exc}") from None
    except ValueError as exc:
        raise _UsageError(str(exc)) from None


def _parse_temps(raw: str) -> tuple[float, ...]:
    try:
        temps = tuple(float(v) for v in raw.split(",") if v.strip())
    except ValueError:
        raise _UsageError(f"bad temperature list: {raw!r}") from None
    if not temps:
        raise _UsageError("empty temperature list")
    return temps


def _single_temp(args, settings: RunSettings) -> float:
    if args.temp is not None:
        temps = _parse_temps(args.temp)
        if len(temps) != 1:
            raise _UsageError(f"{args.subcommand} takes exactly one "
                              "temperature")
        return temps[0]
    if len(settings.temperatures_degC) == 1:
        return settings.temperatures_degC[0]
    return 25.0


def _out_dir(args) -> str:
    os.makedirs(args.out, exist_ok=True)
    return args.out


def _digest_text(text: str) -> str:
    return hashlib.sha256(text.encode("ascii")).hexdigest()[:16]


def _write_manifest(out_dir: str, subcommand: str, digest: str,
                    seed: int | None, temps, outputs: list[str],
                    config: dict, parameters: dict) -> None:
    manifest = {
        "subcommand": subcommand,
        "tool_version": __version__,
        "config_digest": digest,
        "seed": seed,
        "temperatures_degC": list(temps),
        "outputs": outputs,
        "config": config,
        "parameters": parameters,
    }
    blob = json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    fd, tmp = tempfile.mkstemp(dir=out_dir, suffix=".manifest")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(blob)
        os.replace(tmp, os.path.join(out_dir, "manifest.json"))
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _device_config_dict(settings: RunSettings) -> dict:
    return {"ring": asdict(settings.ring), "trojan": asdict(settings.trojan)}


def cmd_simulate(args) -> int:
    settings = _settings(args)
    temp = _single_temp(args, settings)
    if args.n < 0:
        raise _UsageError("--n must be nonnegative")
    seed = resolve_seed(args.seed, settings)
    out_dir = _out_dir(args)
    tp = ThermalPoint(temperature_degC=temp)
    csv_path = os.path.join(out_dir, "counts.csv")
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "count", "censored"])
        if args.n > 0:
            counts, censored = _batch_arrays(
                settings.ring, settings.trojan, tp, seed, args.n)
            for i in range(args.n):
                writer.writerow([i, int(counts[i]), int(censored[i])])
    _write_manifest(out_dir, "simulate",
                    config_digest(settings.ring, settings.trojan),
                    seed, [temp], ["counts.csv"],
                    _device_config_dict(settings), {"n": args.n})
    return 0


def cmd_sweep(args) -> int:
    settings = _settings(args)
    if args.temp is not None:
        temps = _parse_temps(args.temp)
    else:
        temps = settings.temperatures_degC
    if args.n < 1:
        raise _UsageError("--n must be positive")
    seed = resolve_seed(args.seed, settings)
    out_dir = _out_dir(args)
    csv_path = os.path.join(out_dir, "sweep.csv")
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["temperature_degC", "mean", "variance",
                         "censor_rate"])
        for temp in temps:
            tp = ThermalPoint(temperature_degC=temp)
            counts, censored = _batch_arrays(
                settings.ring, settings.trojan, tp, seed, args.n)
            writer.writerow([
                f"{temp:.10g}",
                f"{counts.mean():.10g}",
                f"{counts.astype(np.float64).var():.10g}",
                f"{censored.mean():.6g}",
            ])
    _write_manifest(out_dir, "sweep",
                    config_digest(settings.ring, settings.trojan),
                    seed, list(temps), ["sweep.csv"],
                    _device_config_dict(settings), {"n": args.n})
    return 0


def _collect_symbols(settings: RunSettings, tp: ThermalPoint, seed: int,
                     n_symbols: int) -> list[int]:
    """Non-censored collapse counts mapped to symbols, batch-continued."""
    symbols: list[int] = []
    attempts = 0
    censored_total = 0
    next_index = 0
    while len(symbols) < n_symbols:
        batch = max(n_symbols - len(symbols), 256)
        counts, censored = _batch_arrays(
            settings.ring, settings.trojan, tp, seed, batch, next_index)
        next_index += batch
        attempts += batch
        censored_total += int(censored.sum())
        for c, z in zip(counts, censored):
            if not z:
                symbols.append(count_to_symbol(int(c)))
                if len(symbols) == n_symbols:
                    break
        if attempts >= 256 and censored_total / attempts > _CENSOR_ABORT_RATE:
            raise RuntimeError(
                f"censoring rate {censored_total / attempts:.1%} exceeds "
                f"{_CENSOR_ABORT_RATE:.0%}; the device is saturating instead "
                "of collapsing")
    return symbols


def cmd_bits(args) -> int:
    settings = _settings(args)
    temp = _single_temp(args, settings)
    if args.n < 1:
        raise _UsageError("--n must be positive")
    if args.sigma < 0:
        raise _UsageError("--sigma must be nonnegative")
    seed = resolve_seed(args.seed, settings)
    out_dir = _out_dir(args)
    tp = ThermalPoint(temperature_degC=temp)
    n_symbols = math.ceil(args.n / 3)
    digest = config_digest(settings.ring, settings.trojan)
    if args.degraded_model:
        pmf = build_increment_pmf(args.mu, args.sigma)
        trace = infected_counter_trace(pmf, n_symbols, seed)
        symbols = [count_to_symbol(int(c)) for c in trace]
    else:
        symbols = _collect_symbols(settings, tp, seed, n_symbols)
    origin = {"config_digest": digest, "temperature_degC": temp,
              "seed": seed, "degraded_model": bool(args.degraded_model)}
    bs = symbols_to_bitstream(symbols, origin=origin)
    if bs.length > args.n:
        bs = Bitstream(bits=bs.bits[:args.n], origin=origin)
    bits_path = os.path.join(out_dir, "bits.bin")
    write_bitstream(bs, bits_path)
    params = {"n_bits": args.n, "degraded_model": bool(args.degraded_model)}
    if args.degraded_model:
        params.update({"mu": args.mu, "sigma": args.sigma})
    _write_manifest(out_dir, "bits", digest, seed, [temp],
                    ["bits.bin", "bits.bin.meta"],
                    _device_config_dict(settings), params)
    return 0


def cmd_nist(args) -> int:
    try:
        bs = read_bitstream(args.path)
    except OSError as exc:
        raise _UsageError(f"cannot read bitstream: {exc}") from None
    report = run_battery(bs)
    text = format_report(report)
    print(text)
    if args.out:
        out_dir = _out_dir(args)
        with open(os.path.join(out_dir, "nist_report.txt"), "w") as fh:
            fh.write(text + "\n")
        _write_manifest(out_dir, "nist", _digest_text(args.path), None, [],
                        ["nist_report.txt"], {},
                        {"path": args.path, "n": report.n})
    return 0 if report.all_passed else 2


def _symbol_bits(seq) -> str:
    return "".join(f"{s:03b}" for s in seq)


def cmd_attack(args) -> int:
    if args.key_bits < 3:
        raise _UsageError("--key-bits must be at least 3")
    if args.sigma < 0:
        raise _UsageError("--sigma must be nonnegative")
    if args.top_k < 1:
        raise _UsageError("--top-k must be positive")
    try:
        budgets = [int(v) for v in args.budgets.split(",") if v.strip()]
    except ValueError:
        raise _UsageError(f"bad budget list: {args.budgets!r}") from None
    if not budgets or min(budgets) < 1:
        raise _UsageError("budgets must be positive integers")
    out_dir = _out_dir(args)
    pmf = build_increment_pmf(args.mu, args.sigma)
    P = build_transition_matrix(pmf)
    length = math.ceil(args.key_bits / 3)

    ranked = top_k_sequences(P, length, args.top_k)
    patterns_path = os.path.join(out_dir, "patterns.csv")
    with open(patterns_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["rank", "sequence", "probability", "cumulative"])
        cumulative = 0.0
        for rank, (seq, prob) in enumerate(ranked, start=1):
            cumulative += prob
            writer.writerow([rank, _symbol_bits(seq), f"{prob:.6g}",
                             f"{cumulative:.6g}"])

    curve = attack_success_curve(P, args.key_bits, budgets)
    curve_path = os.path.join(out_dir, "curve.csv")
    with open(curve_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["budget", "success_probability"])
        for budget, prob in curve.points:
            writer.writerow([budget, f"{prob:.6g}"])

    digest = _digest_text(f"mu={args.mu!r}|sigma={args.sigma!r}")
    _write_manifest(out_dir, "attack", digest, None, [],
                    ["patterns.csv", "curve.csv"],
                    {"degraded": {"mu": args.mu, "sigma": args.sigma}},
                    {"key_bits": args.key_bits, "budgets": budgets,
                     "top_k": args.top_k})
    return 0


def cmd_render(args) -> int:
    if args.width < 1:
        raise _UsageError("--width must be positive")
    try:
        bs = read_bitstream(args.path)
    except OSError as exc:
        raise _UsageError(f"cannot read bitstream: {exc}") from None
    scan = {"row": "row-major", "col": "column-major"}[args.scan]
    out_dir = _out_dir(args)
    raster_path = os.path.join(out_dir, "raster.pbm")
    with open(raster_path, "wb") as fh:
        fh.write(render_raster(bs, args.width, scan_order=scan))
    _write_manifest(out_dir, "render", _digest_text(args.path), None, [],
                    ["raster.pbm"], {},
                    {"path": args.path, "width": args.width,
                     "scan": args.scan})
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code if isinstance(exc.code, int) else 1
        return 0 if code == 0 else 1
    try:
        return args.func(args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
