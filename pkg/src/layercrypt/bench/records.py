"""Measurement rows and their CSV form."""

import csv
import datetime as dt
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .. import hostinfo

CSV_HEADER = (
    "stack,level,size_bytes,quantity,repeats,encrypt_ms,decrypt_ms,"
    "client_process_ms,server_process_ms,peak_rss_bytes,cpu_model,"
    "total_ram_bytes,timestamp"
)
CSV_COLUMNS = tuple(CSV_HEADER.split(","))

MEMORY_UNSUPPORTED = "memory_unsupported"

TIMING_FIELDS = ("encrypt_ms", "decrypt_ms", "client_process_ms", "server_process_ms")


def utc_now() -> str:
    return dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds")


@dataclass
class BenchRecord:
    stack_name: str
    level: Optional[str]
    size_bytes: int
    quantity: int
    repeats: int
    encrypt_ms: Optional[float] = None
    decrypt_ms: Optional[float] = None
    client_process_ms: Optional[float] = None
    server_process_ms: Optional[float] = None
    peak_rss_bytes: Optional[int] = None
    memory_unsupported: bool = False
    cpu_model: str = field(default_factory=hostinfo.cpu_model)
    total_ram_bytes: int = field(default_factory=hostinfo.total_ram_bytes)
    timestamp: str = field(default_factory=utc_now)
    # per-repeat raw timings; not serialized
    samples: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        for name in TIMING_FIELDS:
            value = getattr(self, name)
            if value is not None and value < 0:
                raise ValueError(f"{name} must be >= 0, got {value}")


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _row(rec: BenchRecord) -> list:
    peak = MEMORY_UNSUPPORTED if rec.memory_unsupported else _fmt(rec.peak_rss_bytes)
    return [
        rec.stack_name, rec.level or "", rec.size_bytes, rec.quantity, rec.repeats,
        _fmt(rec.encrypt_ms), _fmt(rec.decrypt_ms), _fmt(rec.client_process_ms),
        _fmt(rec.server_process_ms), peak, rec.cpu_model, rec.total_ram_bytes,
        rec.timestamp,
    ]


def write_csv(records, path) -> Path:
    records = list(records)
    if not records:
        raise ValueError("refusing to write an empty record list")
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            fh.write(CSV_HEADER + "\n")
            writer = csv.writer(fh, lineterminator="\n")
            for rec in records:
                writer.writerow(_row(rec))
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def _opt_float(text):
    return float(text) if text != "" else None


def read_csv(path) -> list:
    path = Path(path)
    try:
        fh = path.open(newline="")
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc}") from exc
    with fh:
        header = fh.readline().rstrip("\r\n")
        if header != CSV_HEADER:
            raise ValueError(f"{path}: unexpected CSV header {header!r}")
        out = []
        for row in csv.reader(fh):
            if not row:
                continue
            d = dict(zip(CSV_COLUMNS, row))
            unsupported = d["peak_rss_bytes"] == MEMORY_UNSUPPORTED
            out.append(BenchRecord(
                stack_name=d["stack"],
                level=d["level"] or None,
                size_bytes=int(d["size_bytes"]),
                quantity=int(d["quantity"]),
                repeats=int(d["repeats"]),
                encrypt_ms=_opt_float(d["encrypt_ms"]),
                decrypt_ms=_opt_float(d["decrypt_ms"]),
                client_process_ms=_opt_float(d["client_process_ms"]),
                server_process_ms=_opt_float(d["server_process_ms"]),
                peak_rss_bytes=None if unsupported or not d["peak_rss_bytes"]
                else int(d["peak_rss_bytes"]),
                memory_unsupported=unsupported,
                cpu_model=d["cpu_model"],
                total_ram_bytes=int(d["total_ram_bytes"]),
                timestamp=d["timestamp"],
            ))
    return out


@dataclass(frozen=True)
class Stats:
    median: float
    mean: float
    stdev: float
    min: float
    max: float

    @classmethod
    def of(cls, values) -> "Stats":
        values = [float(v) for v in values]
        return cls(
            median=statistics.median(values),
            mean=statistics.fmean(values),
            stdev=statistics.stdev(values) if len(values) > 1 else 0.0,
            min=min(values),
            max=max(values),
        )


def summarize(records) -> dict:
    """Dispersion per ``(stack, size_bytes, quantity)``.

    Uses the per-repeat samples when a record carries them, otherwise the
    record's headline value (e.g. records read back from several CSVs).
    """
    records = list(records)
    if not records:
        raise ValueError("nothing to summarize")
    pooled = {}
    for rec in records:
        key = (rec.stack_name, rec.size_bytes, rec.quantity)
        bucket = pooled.setdefault(key, {})
        for name in TIMING_FIELDS:
            values = rec.samples.get(name)
            if values is None:
                value = getattr(rec, name)
                values = [] if value is None else [value]
            bucket.setdefault(name, []).extend(values)
    return {
        key: {name: Stats.of(vals) for name, vals in metrics.items() if vals}
        for key, metrics in pooled.items()
    }
