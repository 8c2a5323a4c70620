"""Command-line front end.

Every invocation emits one record echoing its parameters. CSV (default) carries
the result rows only; JSON carries the full record and can be replayed with
``--config``. Error-rate flags are the per-path rate ``q/2``.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys

from . import __version__
from .channel import ChannelMode, ChannelSpec
from .errors import DomainError
from .keyrate import (
    ALL_PROTOCOLS,
    DEFAULT_EPS_S,
    Protocol,
    SecurityParams,
    allocate,
    asymptotic_efficiency,
    key_length,
)
from .mcsim import SimConfig, simulate, simulate_statistical
from .optimize import Axis, Grid, SweepSpec, crossover, optimize_k, sweep, zero_threshold

TOOL = "twoway-qkd"
OUTDIR_ENV = "TWOWAY_QKD_OUTDIR"

EXIT_OK, EXIT_USAGE, EXIT_DOMAIN, EXIT_IO = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def _signals(text: str) -> float:
    v = float(text)
    if math.isinf(v):
        return math.inf
    if v != int(v) or v < 1:
        raise argparse.ArgumentTypeError(f"signal count must be a positive integer, got {text!r}")
    return int(v)


def _protocols(text: str) -> list[str]:
    if text.lower() == "all":
        return [p.value for p in ALL_PROTOCOLS]
    out = []
    for part in text.split(","):
        try:
            out.append(Protocol(part.strip().lower()).value)
        except ValueError:
            raise argparse.ArgumentTypeError(f"unknown protocol {part!r}") from None
    return out


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--channel", choices=[m.value for m in ChannelMode],
                        default=ChannelMode.INDEPENDENT.value)
    common.add_argument("--eps-s", type=float, default=DEFAULT_EPS_S)
    common.add_argument("--ec-cofactor", type=float, default=1.0)
    common.add_argument("--format", choices=["csv", "json"], default="csv")
    common.add_argument("--output", default=None,
                        help=f"output file; relative paths resolve against ${OUTDIR_ENV}")

    p = _Parser(prog=TOOL, description="Finite-key rates for two-way QKD (LM05, SDC) and BB84.")
    p.add_argument("--version", action="version", version=f"{TOOL} {__version__}")
    p.add_argument("--config", default=None, help="replay a JSON record written by this tool")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("rate", parents=[common], help="key length for given M and k")
    s.add_argument("--protocol", type=_protocols, required=True)
    s.add_argument("--signals", type=_signals, required=True)
    s.add_argument("--qhalf", type=float, required=True)
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--k", type=int)
    g.add_argument("--optimize-k", action="store_true")

    s = sub.add_parser("optimize", parents=[common], help="optimal control-mode size")
    s.add_argument("--protocol", type=_protocols, required=True)
    s.add_argument("--signals", type=_signals, required=True)
    s.add_argument("--qhalf", type=float, required=True)
    s.add_argument("--trace", action="store_true", help="include the (k, L) scan in JSON output")

    s = sub.add_parser("sweep-error", parents=[common], help="efficiency against q/2")
    s.add_argument("--protocol", type=_protocols, default=_protocols("all"))
    s.add_argument("--signals", type=_signals, required=True)
    s.add_argument("--qhalf", required=True, help="grid min:max:points")
    s.add_argument("--workers", type=int, default=1)

    s = sub.add_parser("sweep-blocks", parents=[common], help="efficiency against M")
    s.add_argument("--protocol", type=_protocols, default=_protocols("all"))
    s.add_argument("--signals", required=True, help="grid min:max:points")
    s.add_argument("--qhalf", type=float, required=True)
    s.add_argument("--log", action="store_true", help="logarithmic grid")
    s.add_argument("--workers", type=int, default=1)

    s = sub.add_parser("threshold", parents=[common], help="largest q/2 with positive key")
    s.add_argument("--protocol", type=_protocols, required=True)
    s.add_argument("--signals", type=_signals, required=True, help="block size or 'inf'")

    s = sub.add_parser("crossover", parents=[common], help="q/2 where two protocols cross")
    s.add_argument("--protocol", type=_protocols, required=True, help="two protocols, e.g. lm05,bb84")
    s.add_argument("--signals", type=_signals, required=True, help="block size or 'inf'")
    s.add_argument("--bracket", default=None, help="lo:hi search bracket in q/2")

    s = sub.add_parser("asymptotic", parents=[common], help="infinite-key efficiency")
    s.add_argument("--protocol", type=_protocols, required=True)
    s.add_argument("--qhalf", type=float, required=True)

    s = sub.add_parser("simulate", parents=[common], help="Monte Carlo rounds")
    s.add_argument("--protocol", type=_protocols, required=True)
    s.add_argument("--qhalf", type=float, required=True)
    s.add_argument("--rounds", type=_signals, required=True)
    s.add_argument("--c", type=float, required=True, help="encoding-mode probability")
    s.add_argument("--pz", type=float, default=None, help="preferred-basis probability (default: c)")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--statistical", action="store_true",
                   help="sample at the stipulated rates (required for correlated channels)")
    return p


def _finite(M, allow_inf=False):
    if M == math.inf:
        if not allow_inf:
            raise DomainError("this command needs a finite --signals")
        return None
    return int(M)


def _sec(a) -> SecurityParams:
    return SecurityParams(a.eps_s, a.ec_cofactor)


def _cmd_rate(a) -> list[dict]:
    ch = ChannelSpec.from_qhalf(a.qhalf, a.channel)
    rows = []
    for proto in a.protocol:
        p = Protocol(proto)
        if getattr(a, "optimize_k", True) or getattr(a, "k", None) is None:
            rep = optimize_k(_finite(a.signals), ch, _sec(a), p, trace=getattr(a, "trace", False))
            bd, trace = rep.breakdown, rep.scan_trace
        else:
            bd, trace = key_length(allocate(_finite(a.signals), a.k, p), ch, _sec(a)), None
        row = {"qhalf": a.qhalf, "q": ch.q, **bd.as_dict()}
        if trace is not None and a.format == "json":
            row["scan_trace"] = trace
        rows.append(row)
    return rows


def _sweep_rows(result, protocols) -> list[dict]:
    rows = []
    for r in result:
        row = {"qhalf": r.qhalf, "q": 2 * r.qhalf, "M": r.M}
        for p in protocols:
            row[f"eff_{p.value}"] = r.efficiency[p]
            row[f"L_{p.value}"] = r.L[p]
            row[f"k_{p.value}"] = r.k_star[p]
            row[f"asym_{p.value}"] = r.asymptotic[p]
        rows.append(row)
    return rows


def _cmd_sweep_error(a) -> list[dict]:
    protos = tuple(Protocol(p) for p in a.protocol)
    spec = SweepSpec(Axis.ERROR_RATE, Grid.parse(a.qhalf), _finite(a.signals), protos,
                     ChannelMode(a.channel), _sec(a))
    return _sweep_rows(sweep(spec, a.workers), protos)


def _cmd_sweep_blocks(a) -> list[dict]:
    protos = tuple(Protocol(p) for p in a.protocol)
    spec = SweepSpec(Axis.BLOCK_SIZE, Grid.parse(a.signals, a.log), a.qhalf, protos,
                     ChannelMode(a.channel), _sec(a))
    return _sweep_rows(sweep(spec, a.workers), protos)


def _cmd_threshold(a) -> list[dict]:
    rows = []
    for proto in a.protocol:
        t = zero_threshold(Protocol(proto), _finite(a.signals, True), ChannelMode(a.channel), _sec(a))
        rows.append({"protocol": proto, "M": _finite(a.signals, True), "qhalf_threshold": t,
                     "q_threshold": 2 * t})
    return rows


def _cmd_crossover(a) -> list[dict]:
    if len(a.protocol) != 2:
        raise UsageError("crossover needs exactly two protocols, e.g. --protocol lm05,bb84")
    bracket = None
    if a.bracket:
        try:
            lo, hi = (float(v) for v in a.bracket.split(":"))
        except ValueError:
            raise UsageError(f"bad bracket {a.bracket!r}; expected lo:hi") from None
        bracket = (lo, hi)
    pa, pb = (Protocol(p) for p in a.protocol)
    x = crossover(pa, pb, _finite(a.signals, True), ChannelMode(a.channel), _sec(a), bracket=bracket)
    return [{"protocol_a": pa.value, "protocol_b": pb.value, "M": _finite(a.signals, True),
             "qhalf_crossover": x, "q_crossover": 2 * x}]


def _cmd_asymptotic(a) -> list[dict]:
    ch = ChannelSpec.from_qhalf(a.qhalf, a.channel)
    return [{"protocol": p, "qhalf": a.qhalf, "q": ch.q,
             "efficiency": asymptotic_efficiency(Protocol(p), ch)} for p in a.protocol]


def _cmd_simulate(a) -> list[dict]:
    ch = ChannelSpec.from_qhalf(a.qhalf, a.channel)
    rows = []
    for p in a.protocol:
        cfg = SimConfig(Protocol(p), ch, int(a.rounds), a.c, a.seed, a.pz)
        rep = simulate_statistical(cfg) if a.statistical else simulate(cfg)
        rows.append({"qhalf": a.qhalf, "q": ch.q, "seed": a.seed, **rep.as_dict()})
    return rows


COMMANDS = {
    "rate": _cmd_rate,
    "optimize": _cmd_rate,
    "sweep-error": _cmd_sweep_error,
    "sweep-blocks": _cmd_sweep_blocks,
    "threshold": _cmd_threshold,
    "crossover": _cmd_crossover,
    "asymptotic": _cmd_asymptotic,
    "simulate": _cmd_simulate,
}

_OUTPUT_KEYS = ("format", "output", "config")


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def to_csv(rows: list[dict]) -> str:
    cols: list[str] = []
    for r in rows:
        for key in r:
            if key not in cols and key != "scan_trace":
                cols.append(key)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([_cell(r.get(c)) for c in cols])
    return buf.getvalue()


def _jsonable(v):
    if isinstance(v, float) and math.isinf(v):
        return "inf"
    return v


def make_record(args: argparse.Namespace, rows: list[dict]) -> dict:
    params = {k: _jsonable(v) for k, v in vars(args).items() if k not in _OUTPUT_KEYS}
    if "qhalf" in params and isinstance(params["qhalf"], float):
        params["q"] = 2 * params["qhalf"]
    record = {"tool": TOOL, "version": __version__, "command": args.command,
              "params": params, "result": rows}
    if args.command == "simulate":
        record["seed"] = args.seed
    return record


def _load_config(path: str, overrides: argparse.Namespace) -> argparse.Namespace:
    with open(path) as fh:
        rec = json.load(fh)
    try:
        params = dict(rec["params"])
        command = rec["command"]
    except (KeyError, TypeError, ValueError):
        raise OSError(f"{path}: not a {TOOL} record") from None
    if command not in COMMANDS:
        raise OSError(f"{path}: unknown command {command!r}")
    params.pop("q", None)
    if params.get("signals") == "inf":
        params["signals"] = math.inf
    ns = argparse.Namespace(**params)
    ns.command = command
    ns.format = getattr(overrides, "format", None) or "json"
    ns.output = getattr(overrides, "output", None)
    return ns


def _write(text: str, output: str | None) -> None:
    if output is None:
        sys.stdout.write(text)
        return
    outdir = os.environ.get(OUTDIR_ENV)
    if outdir and not os.path.isabs(output):
        output = os.path.join(outdir, output)
    with open(output, "w", newline="") as fh:
        fh.write(text)


def run(argv=None) -> int:
    """Parse ``argv``, execute, write output; returns the exit status."""
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        parser = build_parser()
        if "--config" in argv:
            # replay: only --format/--output may accompany the record
            i = argv.index("--config")
            if i + 1 >= len(argv):
                raise UsageError("--config needs a path")
            path = argv[i + 1]
            rest = argv[:i] + argv[i + 2:]
            extra = _Parser(add_help=False)
            extra.add_argument("--format", choices=["csv", "json"], default=None)
            extra.add_argument("--output", default=None)
            over = extra.parse_args(rest)
            args = _load_config(path, over)
        else:
            args = parser.parse_args(argv)
            if args.command is None:
                raise UsageError(parser.format_usage().strip())
        rows = COMMANDS[args.command](args)
        record = make_record(args, rows)
        text = json.dumps(record, indent=2) + "\n" if args.format == "json" else to_csv(rows)
        _write(text, args.output)
        return EXIT_OK
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:  # DomainError and malformed numbers
        print(f"{TOOL}: domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except (OSError, json.JSONDecodeError) as exc:
        print(f"{TOOL}: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


def main() -> int:
    return run()


if __name__ == "__main__":
    sys.exit(main())
