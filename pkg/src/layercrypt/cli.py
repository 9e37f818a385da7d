"""Command-line entry point: ``serve``, ``run``, ``bench`` and ``report``.

Settings resolve in order: built-in defaults, a ``key=value`` config file
(``--config``), the ``LAYERCRYPT_OUTPUT_DIR`` environment variable, then
command-line flags.

Exit codes: 0 success, 1 verification failure, 2 usage error, 3 transport
error.
"""

import argparse
import logging
import os
import signal
import sys
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional

from .bench.matrix import EXPERIMENT_NAMES, BenchConfig, experiment, run_matrix
from .bench.plots import emit_plot_data
from .bench.records import BenchRecord, write_csv
from .bench.report import write_report
from .envelope import TestRequest
from .errors import (
    AuthenticationError,
    IntegrityError,
    LayercryptError,
    SchemaError,
    TransportError,
    UnknownNameError,
)
from .transport import ServerConfig, run_session, serve

EXIT_OK = 0
EXIT_VERIFY = 1
EXIT_USAGE = 2
EXIT_TRANSPORT = 3

OUTPUT_DIR_ENV = "LAYERCRYPT_OUTPUT_DIR"
QUICK_ENV = "LAYERCRYPT_QUICK"

log = logging.getLogger("layercrypt")


@dataclass
class Config:
    seed: int = 42
    max_size_mb: int = 64
    repeats: int = 5
    output_dir: Path = Path("results")
    units_mode: str = "binary"
    server_url: Optional[str] = None

    def validate(self):
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")
        if self.max_size_mb < 1:
            raise ValueError("max_size_mb must be >= 1")
        if self.units_mode not in ("binary", "decimal"):
            raise ValueError("units_mode must be 'binary' or 'decimal'")
        return self


_CONFIG_TYPES = {f.name: f.type for f in fields(Config)}


def _coerce(key, text):
    if key in ("seed", "max_size_mb", "repeats"):
        return int(text)
    if key == "output_dir":
        return Path(text)
    return text


def read_config_file(path) -> dict:
    values = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            key = key.strip()
            if not sep or key not in _CONFIG_TYPES:
                raise ValueError(f"{path}:{lineno}: expected one of "
                                 f"{', '.join(_CONFIG_TYPES)} as key=value")
            values[key] = _coerce(key, value.strip())
    return values


def resolve_config(args) -> Config:
    values = {}
    if getattr(args, "config", None):
        values.update(read_config_file(args.config))
    if os.environ.get(OUTPUT_DIR_ENV):
        values["output_dir"] = Path(os.environ[OUTPUT_DIR_ENV])
    for key in _CONFIG_TYPES:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = _coerce(key, flag) if isinstance(flag, str) else flag
    return Config(**values).validate()


def _parse_bind(text):
    host, sep, port = text.rpartition(":")
    if not sep or not port.isdigit():
        raise argparse.ArgumentTypeError(f"expected HOST:PORT, got {text!r}")
    return host or "127.0.0.1", int(port)


def _parse_hex(text):
    try:
        return bytes.fromhex(text)
    except ValueError:
        raise argparse.ArgumentTypeError("expected a hex string") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value settings file")
    common.add_argument("--seed", type=int)
    common.add_argument("--units-mode", dest="units_mode", choices=("binary", "decimal"))
    common.add_argument("--output-dir", dest="output_dir")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="layercrypt", description="Layered encryption levels: service, client, benchmarks and reports.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", parents=[common], help="run the encryptor service")
    p.add_argument("--bind", type=_parse_bind, default=("127.0.0.1", 8080), metavar="HOST:PORT")
    p.add_argument("--max-size-mb", dest="max_size_mb", type=int)
    p.add_argument("--no-keys-on-wire", dest="keys_on_wire", action="store_false",
                   help="keep secret key slots off the wire (needs --psk)")
    p.add_argument("--psk", type=_parse_hex, help="pre-shared secret, hex")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("run", parents=[common], help="one client session against a server")
    p.add_argument("--server", dest="server_url")
    p.add_argument("--level", required=True, help="Guest, Basic, Advanced or Admin")
    p.add_argument("--size", type=int, required=True)
    p.add_argument("--unit", choices=("KB", "MB"), required=True)
    p.add_argument("--quantity", type=int, default=1)
    p.add_argument("--psk", type=_parse_hex, help="pre-shared secret, hex")
    p.add_argument("--csv", help="CSV path (default: OUTPUT_DIR/run.csv)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("bench", parents=[common], help="run a named experiment")
    p.add_argument("--experiment", required=True, help=", ".join(EXPERIMENT_NAMES))
    p.add_argument("--repeats", type=int)
    p.add_argument("--full-scale", action="store_true")
    p.add_argument("--quick", action="store_true",
                   help=f"cap MB sweeps at 8 MB (also via {QUICK_ENV}=1)")
    p.add_argument("--server", dest="server_url")
    p.add_argument("--stream", action="store_true",
                   help="memory probe: process packets one at a time")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("report", parents=[common], help="merge CSVs into host tables")
    p.add_argument("--input", nargs="+", required=True)
    p.add_argument("--out", help="output directory (default: OUTPUT_DIR)")
    p.set_defaults(func=cmd_report)
    return parser


def _raise_interrupt(signum, frame):
    raise KeyboardInterrupt


def cmd_serve(args, cfg: Config) -> int:
    if not args.keys_on_wire and not args.psk:
        print("error: --no-keys-on-wire needs --psk", file=sys.stderr)
        return EXIT_USAGE
    server_cfg = ServerConfig(seed=cfg.seed, max_size_mb=cfg.max_size_mb,
                              units_mode=cfg.units_mode, keys_on_wire=args.keys_on_wire,
                              psk=args.psk)
    signal.signal(signal.SIGTERM, _raise_interrupt)
    try:
        serve(args.bind, server_cfg)
    except OSError as exc:
        print(f"error: cannot bind {args.bind[0]}:{args.bind[1]}: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT
    return EXIT_OK


def cmd_run(args, cfg: Config) -> int:
    if not cfg.server_url:
        print("error: --server is required", file=sys.stderr)
        return EXIT_USAGE
    try:
        req = TestRequest(args.level, args.size, args.unit, args.quantity)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    result = run_session(cfg.server_url, req, cfg.seed, psk=args.psk, units_mode=cfg.units_mode)
    if args.verbose:
        print("envelope fields: " + ", ".join(result.envelope_fields))
        for r in result.records:
            print(f"  packet {r.packet_index}: {r.bytes} B  encrypt {r.encrypt_ms:.3f} ms  "
                  f"decrypt {r.decrypt_ms:.3f} ms  verified")
    size = req.size_bytes(cfg.units_mode)
    print(f"{req.test_type}: {req.packet_quantity} x {args.size} {args.unit} verified; "
          f"encrypt {result.encrypt_ms:.3f} ms, decrypt {result.decrypt_ms:.3f} ms, "
          f"client {result.client_process_ms:.3f} ms, server {result.server_process_ms:.3f} ms")
    rec = BenchRecord(
        stack_name=req.test_type, level=req.test_type, size_bytes=size,
        quantity=req.packet_quantity, repeats=1,
        encrypt_ms=result.encrypt_ms, decrypt_ms=result.decrypt_ms,
        client_process_ms=result.client_process_ms,
        server_process_ms=result.server_process_ms,
    )
    path = write_csv([rec], args.csv or cfg.output_dir / "run.csv")
    print(f"wrote {path}")
    return EXIT_OK


def cmd_bench(args, cfg: Config) -> int:
    try:
        exp = experiment(args.experiment)
    except UnknownNameError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    quick = args.quick or os.environ.get(QUICK_ENV, "") not in ("", "0")
    bench_cfg = BenchConfig(
        seed=cfg.seed, repeats=cfg.repeats, units_mode=cfg.units_mode, quick=quick,
        full_scale=args.full_scale, server_url=cfg.server_url,
        max_size_mb=cfg.max_size_mb, retain_packets=not args.stream,
    )
    records = run_matrix(exp.name, bench_cfg)
    if not records:
        print("error: the experiment produced no records", file=sys.stderr)
        return EXIT_VERIFY
    csv_path = write_csv(records, cfg.output_dir / f"{exp.name}.csv")
    svg_path = emit_plot_data(records, cfg.output_dir / f"{exp.name}.svg",
                              title=exp.description, x_axis=exp.x_axis)
    for rec in records:
        if rec.memory_unsupported:
            print(f"{rec.stack_name} {rec.size_bytes} B x{rec.quantity}: memory_unsupported")
    print(f"{len(records)} records; wrote {csv_path} and {svg_path}")
    return EXIT_OK


def cmd_report(args, cfg: Config) -> int:
    out = Path(args.out) if args.out else cfg.output_dir
    csv_path, md_path = write_report(args.input, out)
    print(f"wrote {csv_path} and {md_path}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args, cfg)
    except (AuthenticationError, IntegrityError) as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except TransportError as exc:
        print(f"transport error: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT
    except (LayercryptError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VERIFY


if __name__ == "__main__":
    sys.exit(main())
