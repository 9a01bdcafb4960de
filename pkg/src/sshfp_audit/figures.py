"""Render report figures to image files.

Kept separate from the aggregation code: analysis produces counts, this
module draws them. Uses the Agg backend so it works headless.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from sshfp_audit.analysis import (
    HASH_TYPE_COLUMNS,
    KEY_ALGO_COLUMNS,
    DnssecStatus,
    MatchClassKind,
    ScanReport,
)


def render_all(report: ScanReport, out_dir: str | Path) -> list[Path]:
    """Write all report figures into out_dir; returns the created paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = [
        _match_ratio_figure(report, out_dir / "match_ratios.png"),
        _dnssec_figure(report, out_dir / "dnssec_status.png"),
        _distribution_figure(report, out_dir / "algo_hash_distribution.png"),
    ]
    return paths


def _match_ratio_figure(report: ScanReport, path: Path) -> Path:
    fig, (ax_class, ax_bins) = plt.subplots(1, 2, figsize=(9, 3.5))
    kinds = [k.value for k in MatchClassKind]
    counts = [report.match_class_counts.get(k, 0) for k in kinds]
    ax_class.bar(kinds, counts, color=["#2a9d8f", "#e9c46a", "#e76f51"])
    ax_class.set_title("Match class per domain")
    ax_class.set_ylabel("domains")

    edges = [f"{10 * i}-{10 * (i + 1)}%" for i in range(10)]
    ax_bins.bar(range(10), report.match_ratio_bins, color="#264653")
    ax_bins.set_xticks(range(10))
    ax_bins.set_xticklabels(edges, rotation=45, ha="right", fontsize=7)
    ax_bins.set_title("Match ratio distribution")
    ax_bins.set_ylabel("domains")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def _dnssec_figure(report: ScanReport, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(7, 3.5))
    statuses = [s.value for s in DnssecStatus]
    splits = [
        ("domains", report.dnssec_domains),
        ("record sets", report.dnssec_record_sets),
        ("records", report.dnssec_records),
        ("hosts", report.dnssec_hosts),
    ]
    width = 0.2
    for i, (label, split) in enumerate(splits):
        xs = [x + (i - 1.5) * width for x in range(len(statuses))]
        ax.bar(xs, [split.get(s, 0) for s in statuses], width=width, label=label)
    ax.set_xticks(range(len(statuses)))
    ax.set_xticklabels(statuses)
    ax.set_title("DNSSEC security status")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def _distribution_figure(report: ScanReport, path: Path) -> Path:
    fig, (ax_algo, ax_hash) = plt.subplots(1, 2, figsize=(10, 3.5))
    rows = [
        ("DNS", report.dns_key_algo, report.dns_hash_type),
        ("SSH", report.ssh_key_algo, report.ssh_hash_type),
        ("matching", report.matching_key_algo, report.matching_hash_type),
        ("mismatching", report.mismatching_key_algo, report.mismatching_hash_type),
    ]
    width = 0.2
    algo_labels = [a.name for a in KEY_ALGO_COLUMNS]
    hash_labels = [h.name for h in HASH_TYPE_COLUMNS]
    for i, (label, algo_hist, hash_hist) in enumerate(rows):
        xs = [x + (i - 1.5) * width for x in range(len(algo_labels))]
        ax_algo.bar(xs, [algo_hist.get(int(a), 0) for a in KEY_ALGO_COLUMNS], width=width, label=label)
        xs = [x + (i - 1.5) * width for x in range(len(hash_labels))]
        ax_hash.bar(xs, [hash_hist.get(int(h), 0) for h in HASH_TYPE_COLUMNS], width=width, label=label)
    ax_algo.set_xticks(range(len(algo_labels)))
    ax_algo.set_xticklabels(algo_labels, fontsize=8)
    ax_algo.set_title("Key algorithms")
    ax_hash.set_xticks(range(len(hash_labels)))
    ax_hash.set_xticklabels(hash_labels)
    ax_hash.set_title("Hash types")
    ax_hash.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
