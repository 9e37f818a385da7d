"""Merge benchmark CSVs from several hosts into side-by-side tables."""

import csv
import statistics
from pathlib import Path

from .records import TIMING_FIELDS, read_csv

REPORT_METRICS = TIMING_FIELDS + ("peak_rss_bytes",)
COMPARISON_PREFIX = ("stack", "size_bytes", "quantity", "metric")


def host_label(rec) -> str:
    gib = rec.total_ram_bytes / 1024 ** 3
    return f"{rec.cpu_model} / {gib:.1f} GiB"


def host_comparison(records):
    """``(hosts, rows)`` where each row is ``(stack, size, quantity, metric,
    {host: median})``. Hosts keep first-seen order; duplicate cells on one
    host collapse to their median. Metrics no host measured are dropped."""
    hosts = []
    cells = {}
    for rec in records:
        host = host_label(rec)
        if host not in hosts:
            hosts.append(host)
        for metric in REPORT_METRICS:
            value = getattr(rec, metric)
            if value is None:
                continue
            key = (rec.stack_name, rec.size_bytes, rec.quantity, metric)
            cells.setdefault(key, {}).setdefault(host, []).append(value)
    order = {m: i for i, m in enumerate(REPORT_METRICS)}
    rows = []
    for key in sorted(cells, key=lambda k: (k[0], k[1], k[2], order[k[3]])):
        rows.append((*key, {h: statistics.median(v) for h, v in cells[key].items()}))
    return hosts, rows


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.3f}"
    return str(value)


def write_report(csv_paths, out_dir):
    """Read every CSV, write ``host_comparison.csv`` and ``host_comparison.md``
    into ``out_dir`` and return both paths."""
    records = []
    for path in csv_paths:
        records.extend(read_csv(path))
    if not records:
        raise ValueError("no records in the given CSV files")
    hosts, rows = host_comparison(records)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    header = list(COMPARISON_PREFIX) + hosts

    csv_path = out_dir / "host_comparison.csv"
    with csv_path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for *key, by_host in rows:
            writer.writerow(key + [_cell(by_host.get(h)) for h in hosts])

    md_path = out_dir / "host_comparison.md"
    lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    for *key, by_host in rows:
        values = [str(k) for k in key] + [_cell(by_host.get(h)) for h in hosts]
        lines.append("| " + " | ".join(values) + " |")
    md_path.write_text("\n".join(lines) + "\n")
    return csv_path, md_path
