import platform

import psutil


def cpu_model() -> str:
    try:
        with open("/proc/cpuinfo") as fh:
            for line in fh:
                if line.startswith("model name"):
                    return line.split(":", 1)[1].strip()
    except OSError:
        pass
    return platform.processor() or platform.machine() or "unknown"


def total_ram_bytes() -> int:
    return int(psutil.virtual_memory().total)


def sysinfo() -> dict:
    return {
        "cpu_model": cpu_model(),
        "total_ram_bytes": total_ram_bytes(),
        "machine": platform.machine(),
        "python": platform.python_version(),
    }
