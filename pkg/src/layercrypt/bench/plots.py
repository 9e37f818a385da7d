"""SVG charts of benchmark records, one file per experiment."""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

PANEL_LABELS = {
    "encrypt_ms": "encryption time (ms)",
    "decrypt_ms": "decryption time (ms)",
    "client_process_ms": "client process time (ms)",
    "server_process_ms": "server process time (ms)",
    "peak_rss_bytes": "peak RSS (MiB)",
}


def _panels(records):
    if all(r.encrypt_ms is None for r in records):
        return ["peak_rss_bytes"]
    panels = ["encrypt_ms", "decrypt_ms"]
    if any(r.repeats == 1 and r.client_process_ms is not None for r in records) and \
            len({r.quantity for r in records}) > 1:
        panels += ["client_process_ms", "server_process_ms"]
    return panels


def series_of(records, x_axis: str):
    """``{label: [(x, record), ...]}`` sorted by x."""
    by_stack_q = {}
    for r in records:
        by_stack_q.setdefault(r.stack_name, set()).add(r.quantity)
    series = {}
    for r in records:
        if x_axis == "quantity":
            label, x = r.stack_name, r.quantity
        else:
            multi_q = len(by_stack_q[r.stack_name]) > 1
            label = f"{r.stack_name} x{r.quantity}" if multi_q else r.stack_name
            x = r.size_bytes
        series.setdefault(label, []).append((x, r))
    for points in series.values():
        points.sort(key=lambda p: p[0])
    return series


def _x_scale(records, x_axis):
    if x_axis == "quantity":
        return 1, "packet quantity"
    if max(r.size_bytes for r in records) >= 1024 ** 2:
        return 1024 ** 2, "packet size (MiB)"
    return 1024, "packet size (KiB)"


def emit_plot_data(records, path, title: str = "", x_axis: str = "size") -> Path:
    """Write an SVG chart. Each series is a line whose SVG group id is
    ``series:<panel>:<label>`` so tests and tooling can find it."""
    records = list(records)
    if not records:
        raise ValueError("refusing to plot an empty record list")
    path = Path(path)
    panels = _panels(records)
    divisor, xlabel = _x_scale(records, x_axis)
    series = series_of(records, x_axis)

    plt.rcParams["svg.hashsalt"] = "layercrypt"
    fig, axes = plt.subplots(1, len(panels), figsize=(5.5 * len(panels), 4.2), squeeze=False)
    for ax, panel in zip(axes[0], panels):
        for label, points in series.items():
            xs, ys = [], []
            for x, rec in points:
                y = getattr(rec, panel)
                if y is None:
                    continue
                xs.append(x / divisor)
                ys.append(y / 1024 ** 2 if panel == "peak_rss_bytes" else y)
            if not xs:
                continue
            (line,) = ax.plot(xs, ys, marker="o", label=label)
            line.set_gid(f"series:{panel}:{label}")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(PANEL_LABELS[panel])
        ax.grid(True, alpha=0.3)
        ax.legend(fontsize="small")
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(path, format="svg", metadata={"Date": None})
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    finally:
        plt.close(fig)
    return path
