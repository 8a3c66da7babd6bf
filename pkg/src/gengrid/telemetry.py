"""Aggregation and export of trial data.

Builds the per-start-cell first-hop probability maps and dwell heatmaps the
experiments report, hashes traces for determinism regression, and writes the
schema-versioned report files (JSON for nested aggregates, CSV for per-trial
rows). All aggregation is a pure, order-insensitive fold over trial records.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Iterable

from .grid import CellId, Side

if TYPE_CHECKING:  # avoid a runtime import cycle with scenarios
    from .scenarios import ExperimentReport, TrialRecord

EXPORT_SCHEMA = 1

DIRECTIONS = ("N", "E", "S", "W", "stay")


class TelemetryError(Exception):
    pass


@dataclass
class ProbabilityMap:
    """Per start cell: empirical distribution of the first hop direction."""

    cells: dict[CellId, dict[str, float]]
    trials: int


@dataclass
class Heatmap:
    """Per-cell fraction of total robot-ticks."""

    rows: int
    cols: int
    cells: dict[CellId, float]


def _hop_direction(src: CellId, dst: CellId) -> str:
    dr, dc = dst.row - src.row, dst.col - src.col
    for side in Side:
        if (dr, dc) == side.delta:
            return side.name
    return "stay"  # non-orthogonal transition; counted as unclassified


def hop_probability_map(records: Iterable["TrialRecord"]) -> ProbabilityMap:
    records = list(records)
    if not records:
        raise TelemetryError("hop_probability_map needs at least one record")
    counts: dict[CellId, dict[str, int]] = {}
    for record in records:
        start = record.start_cell
        bucket = counts.setdefault(start, {d: 0 for d in DIRECTIONS})
        first = next((h for h in record.hops if h.robot == 0), None)
        if first is None:
            bucket["stay"] += 1
        else:
            bucket[_hop_direction(first.src, first.dst)] += 1
    cells = {}
    for start, bucket in counts.items():
        total = sum(bucket.values())
        cells[start] = {d: n / total for d, n in bucket.items() if n > 0}
    return ProbabilityMap(cells=cells, trials=len(records))


def occupancy_heatmap(records: Iterable["TrialRecord"]) -> Heatmap:
    records = list(records)
    if not records:
        raise TelemetryError("occupancy_heatmap needs at least one record")
    rows, cols = records[0].rows, records[0].cols
    counts: dict[int, int] = {}
    total = 0
    for record in records:
        for track in record.occupancy:
            for idx in track.tolist():
                counts[idx] = counts.get(idx, 0) + 1
                total += 1
    cells = {CellId(idx // cols, idx % cols): n / total for idx, n in counts.items()}
    return Heatmap(rows=rows, cols=cols, cells=cells)


def trace_hash(record: "TrialRecord") -> str:
    """Stable 64-bit content digest over occupancy and hop events.

    Serialized with fixed-width little-endian integers so the digest is
    platform independent.
    """
    h = hashlib.sha256()
    h.update(struct.pack("<iiii", record.rows, record.cols,
                         len(record.occupancy), record.variant_index))
    for track in record.occupancy:
        h.update(struct.pack("<i", len(track)))
        h.update(track.astype("<i4").tobytes())
    h.update(struct.pack("<i", len(record.hops)))
    for hop in record.hops:
        h.update(struct.pack("<iiiiii", hop.robot, hop.tick,
                             hop.src.row, hop.src.col, hop.dst.row, hop.dst.col))
    return h.digest()[:8].hex()


def experiment_hash(records: Iterable["TrialRecord"]) -> str:
    """Digest of a whole trial set: hash of the per-trial trace hashes."""
    h = hashlib.sha256()
    for record in records:
        h.update(trace_hash(record).encode())
    return h.digest()[:8].hex()


# --- export ------------------------------------------------------------------


def _probmap_payload(pmap: ProbabilityMap) -> dict:
    return {
        "schema": EXPORT_SCHEMA,
        "trials": pmap.trials,
        "cells": {
            f"{cid.row},{cid.col}": {d: p for d, p in sorted(dirs.items())}
            for cid, dirs in sorted(pmap.cells.items())
        },
    }


def _report_payload(report: "ExperimentReport") -> dict:
    return {
        "schema": EXPORT_SCHEMA,
        "scenario": report.scenario,
        "figure": report.figure,
        "seed": report.seed,
        "trials_per_variant": report.trials_per_variant,
        "variant_count": report.variant_count,
        "duration_ticks": report.duration_ticks,
        "noise": {
            "sigma_rot": report.noise.sigma_rot,
            "sigma_drive": report.noise.sigma_drive,
            "duty_mismatch": report.noise.duty_mismatch,
        },
        "success_rate": report.success_rate,
        "per_variant_success": report.per_variant_success,
        "safe_time_fraction": report.safe_time_fraction,
        "trace_hash": experiment_hash(report.records),
    }


def _trials_csv(report: "ExperimentReport") -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["trial", "variant", "seed", "start_row", "start_col",
                     "success", "final_row", "final_col", "hops", "wall_ticks"])
    for r in report.records:
        writer.writerow([
            r.trial_index, r.variant_index, r.seed,
            r.start_cell.row, r.start_cell.col,
            int(r.success),
            r.final_cells[0].row if r.final_cells else "",
            r.final_cells[0].col if r.final_cells else "",
            len(r.hops), r.wall_ticks,
        ])
    return buf.getvalue()


def _heatmap_csv(heat: Heatmap) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["row", "col", "fraction"])
    for cid in sorted(heat.cells):
        writer.writerow([cid.row, cid.col, repr(heat.cells[cid])])
    return buf.getvalue()


def export_report(report: "ExperimentReport", out_dir) -> list[Path]:
    """Write report.json, trials.csv, probmap.json and heatmap.csv.

    Byte-stable: exporting the same report twice produces identical files.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        files = {
            "report.json": json.dumps(_report_payload(report), sort_keys=True, indent=2) + "\n",
            "trials.csv": _trials_csv(report),
            "probmap.json": json.dumps(_probmap_payload(report.probability_map),
                                       sort_keys=True, indent=2) + "\n",
            "heatmap.csv": _heatmap_csv(report.heatmap),
        }
        written = []
        for name, text in files.items():
            path = out / name
            path.write_text(text, encoding="utf-8")
            written.append(path)
        return written
    except OSError as exc:
        raise TelemetryError(f"cannot write report into {out}: {exc}") from exc


def read_trials_csv(path) -> list[dict]:
    """Round-trip helper: parse trials.csv back into dict rows."""
    with open(path, newline="", encoding="utf-8") as fh:
        return [dict(row) for row in csv.DictReader(fh)]
