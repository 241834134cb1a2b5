"""Seeded experiment orchestration and CSV export.

Every CSV opens with ``#`` comment lines carrying the schema version, the
experiment kind, the SHA-256 of the resolved config, the seed(s) and the
resolved config itself, so identical inputs give byte-identical files.
"""
from __future__ import annotations

import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from .cellsim import summarize, sweep
from .config import SCHEMA_VERSION, ExperimentConfig, ExperimentKind
from .link import measure_link, simulate_link
from .mobility import generate_trace, write_trace_csv
from .receiver import estimate_dmrs_sjnr

log = logging.getLogger(__name__)

SUMMARY_COLUMNS = ("seed", "pss_detected", "pss_n_id_2", "pss_timing", "pss_peak_metric",
                   "pss_acquired", "pci_detected", "pci_true", "dmrs_sjnr_db", "pss_evm_pct",
                   "pbch_evm_pct", "pdsch_evm_pct", "mib_decodable")
BURST_COLUMNS = ("burst_index", "start_symbol", "beam_gain_db", "dmrs_sjnr_db", "pbch_evm_pct")
CORRELATION_COLUMNS = ("lag", "pss0", "pss1", "pss2")
CONSTELLATION_COLUMNS = ("channel", "index", "i", "q")
SWEEP_COLUMNS = ("axis_value", "seed", "throughput_bps", "goodput_bps", "mean_sinr_db",
                 "retx_fraction")
SWEEP_SUMMARY_COLUMNS = ("axis_value", "n", "throughput_bps_mean", "throughput_bps_std",
                         "goodput_bps_mean", "goodput_bps_std", "mean_sinr_db_mean",
                         "mean_sinr_db_std", "retx_fraction_mean", "retx_fraction_std")


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if v is None:
        return ""
    return str(v)


def header_lines(cfg: ExperimentConfig, seed) -> list[str]:
    seed_text = ",".join(str(s) for s in seed) if isinstance(seed, (list, tuple)) else str(seed)
    return [
        f"jamcell schema={SCHEMA_VERSION} experiment={cfg.kind.value}",
        f"config_sha256={cfg.sha256}",
        f"seed={seed_text}",
        f"config={cfg.canonical_json()}",
    ]


def write_csv(path: Path, columns, rows, header) -> Path:
    with open(path, "w", newline="") as fh:
        for line in header:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            values = [r[c] for c in columns] if isinstance(r, dict) else r
            w.writerow([_fmt(v) for v in values])
    return path


def read_csv(path) -> tuple[list[str], list[dict]]:
    """(comment lines, rows) of a CSV written by this module."""
    comments, body = [], []
    with open(path) as fh:
        for line in fh:
            (comments if line.startswith("#") else body).append(line)
    rows = list(csv.DictReader(body))
    return [c[2:].rstrip("\n") for c in comments], rows


def _ssb_attack_run(args):
    cfg, seed = args
    sc = cfg.link
    cap = simulate_link(sc, seed)
    res = measure_link(cap)
    true_cell = cap.burst_set.pci
    starts = [s for s in cap.burst_set.start_symbols if s + 4 <= res.rx_grid.n_symbols]
    bursts = []
    for idx, s in enumerate(starts):
        bursts.append({
            "burst_index": idx,
            "start_symbol": s,
            "beam_gain_db": cap.burst_set.beam_gains_db[idx],
            "dmrs_sjnr_db": estimate_dmrs_sjnr(res.rx_grid, true_cell, idx, s),
            "pbch_evm_pct": res.pbch_evm_per_burst[idx],
        })
    summary = {
        "seed": seed,
        "pss_detected": res.pss.detected,
        "pss_n_id_2": res.pss.n_id_2,
        "pss_timing": res.pss.timing_offset,
        "pss_peak_metric": res.pss.peak_metric,
        "pss_acquired": res.pss_acquired,
        "pci_detected": res.pci_detected.pci if res.pci_detected is not None else -1,
        "pci_true": true_cell.pci,
        "dmrs_sjnr_db": float(np.mean(res.ssb.dmrs_sjnr_db)),
        "pss_evm_pct": res.ssb.pss_evm_rms,
        "pbch_evm_pct": res.ssb.pbch_evm_rms,
        "pdsch_evm_pct": res.pdsch_evm,
        "mib_decodable": res.ssb.mib_decodable,
    }
    corr = res.correlation
    const = []
    for idx, pts in res.pbch_constellation.items():
        const.extend((f"pbch{idx}", k, float(z.real), float(z.imag)) for k, z in enumerate(pts))
    const.extend(("pdsch", k, float(z.real), float(z.imag))
                 for k, z in enumerate(res.pdsch_constellation))
    return summary, bursts, corr, const


def _write_ssb_run(cfg: ExperimentConfig, out: Path, seed, bursts, corr, const) -> list[Path]:
    head = header_lines(cfg, seed)
    stem = f"ssb_attack_seed{seed}"
    lag = np.arange(corr.shape[1])
    return [
        write_csv(out / f"{stem}_bursts.csv", BURST_COLUMNS, bursts, head),
        write_csv(out / f"{stem}_correlation.csv", CORRELATION_COLUMNS,
                  zip(lag, corr[0], corr[1], corr[2]), head),
        write_csv(out / f"{stem}_constellation.csv", CONSTELLATION_COLUMNS, const, head),
    ]


def _map(fn, jobs, workers: int):
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(fn, jobs))
    return [fn(j) for j in jobs]


def run_ssb_attack(cfg: ExperimentConfig, out: Path, workers: int = 1) -> list[Path]:
    results = _map(_ssb_attack_run, [(cfg, s) for s in cfg.seeds], workers)
    files, summaries = [], []
    for seed, (summary, bursts, corr, const) in zip(cfg.seeds, results):
        files += _write_ssb_run(cfg, out, seed, bursts, corr, const)
        summaries.append(summary)
    summaries.sort(key=lambda r: r["seed"])
    files.append(write_csv(out / "ssb_attack_summary.csv", SUMMARY_COLUMNS, summaries,
                           header_lines(cfg, list(cfg.seeds))))
    return files


def run_cell_sweep(cfg: ExperimentConfig, out: Path, workers: int = 1) -> list[Path]:
    rows = sweep(cfg.cell, cfg.sweep_axis, list(cfg.sweep_values), cfg.seeds, workers=workers)
    head = header_lines(cfg, list(cfg.seeds))
    return [
        write_csv(out / "cell_sweep.csv", SWEEP_COLUMNS, rows, head),
        write_csv(out / "cell_sweep_summary.csv", SWEEP_SUMMARY_COLUMNS, summarize(rows), head),
    ]


def _trace_run(args):
    cfg, seed = args
    t = cfg.trace
    return generate_trace(t.steps, t.n_nodes, t.duration_s, seed)


def run_mobility_trace(cfg: ExperimentConfig, out: Path, workers: int = 1) -> list[Path]:
    traces = _map(_trace_run, [(cfg, s) for s in cfg.seeds], workers)
    files = []
    for seed, trace in zip(cfg.seeds, traces):
        path = out / f"mobility_trace_seed{seed}.csv"
        with open(path, "w", newline="") as fh:
            write_trace_csv(trace, fh, header_lines(cfg, seed))
        files.append(path)
    return files


RUNNERS = {
    ExperimentKind.SSB_ATTACK: run_ssb_attack,
    ExperimentKind.CELL_SWEEP: run_cell_sweep,
    ExperimentKind.MOBILITY_TRACE: run_mobility_trace,
}


def run_experiment(cfg: ExperimentConfig, out_dir=None, workers: int = 1) -> list[Path]:
    """Run every seed of ``cfg`` and write its CSVs; returns the written paths."""
    out = Path(out_dir if out_dir is not None else cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    log.info("%s: %d seed(s) -> %s", cfg.kind.value, len(cfg.seeds), out)
    files = RUNNERS[cfg.kind](cfg, out, workers)
    log.info("wrote %d file(s)", len(files))
    return files


def with_overrides(cfg: ExperimentConfig, kind=None, seeds=None) -> ExperimentConfig:
    kw = {}
    if kind is not None:
        kw["kind"] = ExperimentKind.parse(kind) if isinstance(kind, str) else kind
    if seeds is not None:
        kw["seeds"] = tuple(int(s) for s in seeds)
    return replace(cfg, **kw)
