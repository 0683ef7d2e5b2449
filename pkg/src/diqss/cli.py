"""Command-line front end.

Exit codes: 0 success, 2 usage error, 3 infeasible parameters, 4 I/O failure.
CSV output starts with ``#`` metadata lines recording the full parameter set
and the package version; numbers carry 9 significant digits.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import os
import sys
from pathlib import Path

from . import __version__
from .keyrate import (
    PRESETS,
    ChannelParams,
    InfeasibleError,
    bound_for,
    curve,
    efficiency_threshold,
    key_rate,
    max_distance,
    noise_threshold,
    preset_curves,
    rate_at,
)
from .mcsim import SimConfig, estimate_vs_model, run_simulation
from .states import NoiseParams, basis_weight

OUTPUT_DIR_ENV = "DIQSS_OUTPUT_DIR"

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_IO = 0, 2, 3, 4


def _fmt(x) -> str:
    if isinstance(x, bool) or x is None:
        return str(x).lower()
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        return f"{x:.9g}"
    return str(x)


def _ranged(lo, hi, name, integer=False):
    def parse(text):
        try:
            value = int(text) if integer else float(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{name} must be a number, got {text!r}") from None
        if math.isnan(value) or not lo <= value <= hi:
            raise argparse.ArgumentTypeError(f"{name} must lie in [{lo}, {hi}], got {text}")
        return value

    return parse


_unit = lambda name: _ranged(0.0, 1.0, name)  # noqa: E731


def _postselection(text):
    table = {"auto": None, "on": True, "off": False}
    if text not in table:
        raise argparse.ArgumentTypeError(f"postselection must be one of {sorted(table)}, got {text!r}")
    return table[text]


def _output_path(out: str | None) -> Path | None:
    if out is None:
        return None
    path = Path(out)
    base = os.environ.get(OUTPUT_DIR_ENV)
    if base and not path.is_absolute():
        path = Path(base) / path
    return path


def write_csv(out: str | None, meta: dict, columns: list[str], rows) -> Path | None:
    """Emit CSV to ``out`` (or stdout when ``out`` is None)."""
    buf = io.StringIO()
    buf.write(f"# diqss {__version__}\n")
    for k, v in meta.items():
        buf.write(f"# {k}={_fmt(v)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    writer.writerows([_fmt(v) for v in row] for row in rows)
    text = buf.getvalue()
    path = _output_path(out)
    if path is None:
        sys.stdout.write(text)
        return None
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path


def _add_common(parser, *names):
    opts = {
        "p": lambda: parser.add_argument("--p", type=_unit("p"), default=0.5, help="probability of the first key basis (default 0.5)"),
        "q": lambda: parser.add_argument("--q", type=_ranged(0.0, 0.5, "q"), default=0.0, help="preprocessing flip probability (default 0)"),
        "F": lambda: parser.add_argument("--F", type=_unit("F"), default=1.0, help="white-noise fidelity (default 1)"),
        "eta": lambda: parser.add_argument("--eta", type=_unit("eta"), default=1.0, help="global detection efficiency (default 1)"),
        "channel": lambda: (
            parser.add_argument("--eta-d", type=_unit("eta-d"), default=0.98, help="detector efficiency (default 0.98)"),
            parser.add_argument("--eta-c", type=_unit("eta-c"), default=0.99, help="coupling efficiency (default 0.99)"),
            parser.add_argument("--alpha", type=_ranged(0.0, 10.0, "alpha"), default=0.2, help="fiber loss in dB/km (default 0.2)"),
        ),
        "resolution": lambda: parser.add_argument("--resolution", type=_ranged(32, 1 << 16, "resolution", integer=True), default=512, help="entropy-bound S grid size (default 512)"),
        "postselection": lambda: parser.add_argument("--postselection", type=_postselection, default=None, metavar="{auto,on,off}", help="replace no-clicks by coins (auto: on unless p in {0,1} and q=0)"),
        "out": lambda: parser.add_argument("--out", default=None, help=f"CSV output path, relative to ${OUTPUT_DIR_ENV} if set (default stdout)"),
    }
    for name in names:
        opts[name]()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="diqss", description="Key rates, thresholds and simulations for GHZ-based DI secret sharing.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("entropy", help="entropy bound H(A|E) against S")
    _add_common(p, "p", "q", "resolution", "out")
    p.add_argument("--raw", action="store_true", help="also emit the bound before convexification")

    p = sub.add_parser("rate", help="key rate at a QBER, or at (F, eta)")
    p.add_argument("--delta", type=_ranged(0.0, 0.5, "delta"), default=None, help="QBER; if omitted, derived from --F and --eta")
    _add_common(p, "p", "q", "F", "eta", "postselection", "resolution")

    p = sub.add_parser("threshold", help="noise, efficiency or distance threshold")
    p.add_argument("kind", choices=("noise", "efficiency", "distance"))
    _add_common(p, "p", "q", "F", "channel", "postselection", "resolution", "out")

    p = sub.add_parser("curve", help="figure curves as CSV")
    p.add_argument("kind", choices=("rate-vs-qber", "rate-vs-eta", "rate-vs-L", "entropy-vs-S"))
    p.add_argument("--preset", choices=sorted(PRESETS), default=None, help="emit every series of a figure preset")
    p.add_argument("--points", type=_ranged(2, 100000, "points", integer=True), default=241)
    p.add_argument("--x-min", type=float, default=None)
    p.add_argument("--x-max", type=float, default=None)
    _add_common(p, "p", "q", "F", "channel", "postselection", "resolution", "out")

    p = sub.add_parser("simulate", help="Monte-Carlo protocol simulation")
    p.add_argument("--rounds", type=_ranged(1, 10**12, "rounds", integer=True), default=10**6)
    p.add_argument("--seed", type=_ranged(0, 2**64 - 1, "seed", integer=True), default=0)
    p.add_argument("--announce-fraction", type=_ranged(1e-9, 1 - 1e-9, "announce-fraction"), default=0.1)
    p.add_argument("--workers", type=_ranged(1, 1024, "workers", integer=True), default=1)
    _add_common(p, "p", "q", "F", "eta", "out")
    return parser


def _channel(args) -> ChannelParams:
    return ChannelParams(alpha_db_per_km=args.alpha, eta_d=args.eta_d, eta_c=args.eta_c)


def cmd_entropy(args) -> int:
    bound = bound_for(args.p, args.q, args.resolution)
    meta = {"command": "entropy", "p": args.p, "q": args.q, "lambda": basis_weight(args.p),
            "resolution": args.resolution, "convexified": True}
    if args.raw:
        rows = zip(bound.s.tolist(), bound.h.tolist(), bound.raw.tolist())
        write_csv(args.out, meta, ["S", "H", "H_raw"], rows)
    else:
        write_csv(args.out, meta, ["S", "H"], zip(bound.s.tolist(), bound.h.tolist()))
    return EXIT_OK


def cmd_rate(args) -> int:
    bound = bound_for(args.p, args.q, args.resolution)
    if args.delta is not None:
        r = key_rate(args.delta, args.p, args.q, bound=bound)
        print(f"rate={_fmt(r)} delta={_fmt(args.delta)} p={_fmt(args.p)} q={_fmt(args.q)}")
    else:
        r = rate_at(args.F, args.eta, args.p, args.q, args.postselection, bound=bound)
        print(f"rate={_fmt(r)} F={_fmt(args.F)} eta={_fmt(args.eta)} p={_fmt(args.p)} q={_fmt(args.q)}")
    return EXIT_OK


def cmd_threshold(args) -> int:
    meta = {"command": f"threshold {args.kind}", "p": args.p, "q": args.q, "resolution": args.resolution}
    if args.kind == "noise":
        value = noise_threshold(args.p, args.q, args.resolution)
        print(f"noise_threshold={_fmt(value)} p={_fmt(args.p)} q={_fmt(args.q)}")
        columns, row = ["delta_max"], [value]
    elif args.kind == "efficiency":
        value = efficiency_threshold(args.p, args.q, args.F, args.postselection, args.resolution)
        meta.update(F=args.F, postselection=args.postselection)
        print(f"efficiency_threshold={_fmt(value)} p={_fmt(args.p)} q={_fmt(args.q)} F={_fmt(args.F)}")
        columns, row = ["eta_min"], [value]
    else:
        ch = _channel(args)
        L_star, users = max_distance(args.p, args.q, ch, args.postselection, args.F, args.resolution)
        meta.update(F=args.F, alpha=ch.alpha_db_per_km, eta_d=ch.eta_d, eta_c=ch.eta_c,
                    postselection=args.postselection)
        if L_star == 0.0:
            print(f"infeasible: no positive key rate at L=0 (eta={_fmt(ch.eta)})", file=sys.stderr)
            return EXIT_INFEASIBLE
        print(f"L_star_km={_fmt(L_star)} user_distance_km={_fmt(users)} p={_fmt(args.p)} q={_fmt(args.q)}")
        columns, row = ["L_star_km", "user_distance_km"], [L_star, users]
    if args.out:
        write_csv(args.out, meta, columns, [row])
    return EXIT_OK


def cmd_curve(args) -> int:
    kind = args.kind.replace("-", "_")
    x_range = None
    if args.x_min is not None or args.x_max is not None:
        if args.x_min is None or args.x_max is None or not args.x_min < args.x_max:
            raise _UsageError("--x-min and --x-max must be given together with x-min < x-max")
        x_range = (args.x_min, args.x_max)
    common = dict(F=args.F, channel=_channel(args), resolution=args.resolution, points=args.points, x_range=x_range)
    if args.preset:
        preset_kind = PRESETS[args.preset][0]
        if preset_kind != kind:
            raise _UsageError(f"preset {args.preset} is a {preset_kind.replace('_', '-')} figure")
        curves = preset_curves(args.preset, **common)
    else:
        curves = [curve(kind, p=args.p, q=args.q, postselection=args.postselection, **common)]
    meta = {"command": f"curve {args.kind}", "preset": args.preset or "none",
            "F": args.F, "resolution": args.resolution, "points": args.points}
    if kind == "rate_vs_L":
        meta.update(alpha=args.alpha, eta_d=args.eta_d, eta_c=args.eta_c)
    for i, c in enumerate(curves):
        params = " ".join(f"{k}={_fmt(v)}" for k, v in c.params.items())
        meta[f"series{i}"] = f"{c.label} | {params}"
    if args.preset == "fig6":
        meta["note"] = "baseline series counts rounds with a missing click as errors"
    value = "H" if kind == "entropy_vs_S" else "rate"
    rows = [(c.label, x, y) for c in curves for x, y in c.points]
    write_csv(args.out, meta, ["series", curves[0].abscissa, value], rows)
    return EXIT_OK


def cmd_simulate(args) -> int:
    noise = NoiseParams(F=args.F, eta=args.eta, p=args.p, q=args.q)
    cfg = SimConfig(rounds=args.rounds, noise=noise, seed=args.seed, announce_fraction=args.announce_fraction)
    stats = run_simulation(cfg, workers=args.workers)
    report = estimate_vs_model(stats, noise)
    fields = [
        ("rounds", stats.rounds),
        ("sifted_key_rounds", stats.sifted_key_rounds),
        ("discarded_rounds", stats.discarded_rounds),
        ("bell_rounds", stats.bell_rounds),
        ("announced_rounds", stats.announced_rounds),
        ("qber", stats.qber_estimate),
        ("qber_se", stats.qber_se),
        ("S", stats.S_estimate),
        ("S_se", stats.S_se),
        ("S_ABC", stats.S_ABC_estimate),
        ("S_ABC_se", stats.S_ABC_se),
        ("reconstruction_failures", stats.reconstruction_failures),
        ("z_qber", report.z_qber),
        ("z_S", report.z_S),
        ("z_sift", report.z_sift),
    ]
    fields += [(f"count_{i}{j}{k}", n) for (i, j, k), n in stats.counts.items()]
    for name, value in fields:
        print(f"{name}={_fmt(value)}")
    for flag in report.flags:
        print(f"flag: {flag}", file=sys.stderr)
    if args.out:
        meta = {"command": "simulate", "rounds": args.rounds, "seed": args.seed, "F": args.F,
                "eta": args.eta, "p": args.p, "q": args.q, "announce_fraction": args.announce_fraction}
        write_csv(args.out, meta, ["quantity", "value"], fields)
    return EXIT_OK


class _UsageError(Exception):
    pass


COMMANDS = {
    "entropy": cmd_entropy,
    "rate": cmd_rate,
    "threshold": cmd_threshold,
    "curve": cmd_curve,
    "simulate": cmd_simulate,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits with 2 on usage errors and 0 on --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except _UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"diqss: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
