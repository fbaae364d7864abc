"""``petzlab`` command-line front end.

Exit codes: 0 success, 1 failed verdicts, 2 usage or config errors,
3 runtime errors.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import io as pio
from .channels import make_rng, random_channel, random_density
from .entropies import fidelity, max_relative_entropy, measured_relative_entropy, relative_entropy
from .errors import InstanceError, PetzlabError
from .harness import DEFAULT_TOLERANCES, SuiteConfig, dumps_report, failed, run_suite, summarize, validate_config
from .recovery import KINDS, RecoveryMap

MAX_ENTRIES = 10_000
EXIT_OK, EXIT_FAILED, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2, 3
LN2 = math.log(2.0)


class UsageError(Exception):
    pass


def default_config() -> dict:
    return json.loads(resources.files("petzlab").joinpath("data/default_config.json").read_text())


def _check_size(a: np.ndarray, where: str) -> None:
    if a.size > MAX_ENTRIES:
        raise UsageError(f"{where}: {a.size} entries exceeds the CLI limit of {MAX_ENTRIES}; use the petzlab Python API")


def _load_matrix(path) -> np.ndarray:
    a, _ = pio.load_matrix(path)
    _check_size(a, str(path))
    return a


def _load_channel(path):
    ch = pio.load_channel(path)
    _check_size(ch.stacked, str(path))
    return ch


def _scale(x: float, base: str) -> float:
    return x / LN2 if base == "bits" else x


def _print_record(rows) -> None:
    width = max(len(k) for k, _ in rows)
    for key, value in rows:
        print(f"{key.ljust(width)}  {value}")


# subcommands ---------------------------------------------------------------

def cmd_entropy(args) -> int:
    rho = _load_matrix(args.rho)
    sigma = _load_matrix(args.sigma)
    base = args.base
    d = relative_entropy(rho, sigma, args.tol)
    dm = measured_relative_entropy(rho, sigma, support_tol=args.tol)
    f = fidelity(rho, sigma)
    fb = math.inf if f <= 0 else -2.0 * math.log(f)
    dmax = max_relative_entropy(rho, sigma, "nats", args.tol)
    lower = dm.value if math.isinf(dm.value) else max(dm.value, fb)
    rows = [
        ("base", base),
        ("D", pio.fmt(_scale(d, base))),
        ("D_M", pio.fmt(_scale(dm.value, base))),
        ("D_M_converged", pio.fmt(dm.converged)),
        ("D_M_bracket", f"[{pio.fmt(_scale(lower, base))}, {pio.fmt(_scale(d, base))}]"),
        ("F", pio.fmt(f)),
        ("-2logF", pio.fmt(_scale(fb, base))),
        ("D_max", pio.fmt(_scale(dmax, base))),
    ]
    if args.channel:
        ch = _load_channel(args.channel)
        d_out = relative_entropy(ch(rho), ch(sigma), args.tol)
        g = math.nan if math.isinf(d) and math.isinf(d_out) else d - d_out
        rows.append(("gap", pio.fmt(_scale(g, base))))
    _print_record(rows)
    return EXIT_OK


def _map_spec(args, ref_dims) -> dict:
    if args.spec:
        spec = pio.read_json(args.spec)
        if not isinstance(spec, dict):
            raise UsageError(f"{args.spec}: map spec must be a JSON object")
        return spec
    if args.kind is None:
        raise UsageError(f"give --kind or --spec; valid kinds: {', '.join(KINDS)}")
    spec = {"kind": args.kind}
    if args.kind == "rotatedPetz":
        spec["theta"] = args.theta if args.theta is not None else [0.0] * ref_dims[0]
        spec["phi"] = args.phi if args.phi is not None else [0.0] * ref_dims[1]
    elif args.kind == "pinchingRecovery":
        spec["n"] = args.n
    elif args.kind == "convex":
        raise UsageError("convex maps need weights and atoms; pass them with --spec FILE")
    return spec


def cmd_recover(args) -> int:
    sigma = _load_matrix(args.sigma)
    ch = _load_channel(args.channel)
    x = _load_matrix(args.x)
    probe = RecoveryMap.petz(sigma, ch)
    spec = _map_spec(args, (probe.ref.d1, probe.ref.d2))
    if spec.get("kind") not in KINDS:
        raise UsageError(f"invalid map kind {spec.get('kind')!r}; valid kinds: {', '.join(KINDS)}")
    try:
        rmap = RecoveryMap.from_dict(spec, sigma, ch)
    except (KeyError, TypeError) as exc:
        raise UsageError(f"malformed map spec ({exc}); valid kinds: {', '.join(KINDS)}") from exc
    if rmap.dim_out ** 2 > MAX_ENTRIES:
        raise UsageError(f"output would have {rmap.dim_out ** 2} entries; use the petzlab Python API")
    out = rmap(x)
    pio.save_matrix(args.out, out, [sigma.shape[0]] * rmap.n)
    residual = abs(np.trace(out) - np.trace(x))
    _print_record([("kind", rmap.kind), ("out", str(args.out)), ("trace_residual", pio.fmt(residual))])
    return EXIT_OK


def _parse_tol_overrides(items) -> dict:
    out = {}
    for item in items or []:
        name, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"--tol expects NAME=VALUE, got {item!r}")
        try:
            out[name] = float(value)
        except ValueError as exc:
            raise UsageError(f"--tol {item!r}: value is not a number") from exc
    return out


def cmd_verify(args) -> int:
    if args.config:
        try:
            data = pio.read_json(args.config)
        except (OSError, PetzlabError) as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_USAGE
    else:
        data = default_config()
    if isinstance(data, dict):
        if args.seed is not None:
            data["seed"] = args.seed
        try:
            overrides = _parse_tol_overrides(args.tol)
        except UsageError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_USAGE
        if overrides:
            data["tolerances"] = {**data.get("tolerances", {}), **overrides}
    errors = validate_config(data)
    if errors:
        for e in errors:
            print(f"config error: {e}", file=sys.stderr)
        return EXIT_USAGE
    config = SuiteConfig.from_dict(data)
    try:
        reports = run_suite(config)
    except InstanceError as exc:
        print(f"runtime error in {exc.label}: {exc.message}", file=sys.stderr)
        return EXIT_RUNTIME
    Path(args.out).write_text(dumps_report(reports))
    print_summary(summarize(reports))
    return EXIT_FAILED if failed(reports) else EXIT_OK


def print_summary(rows) -> None:
    header = ("check", "instances", "pass", "fail", "inconclusive", "skipped", "worstSlack")
    table = [header] + [tuple(pio.fmt(r[h]) if h == "worstSlack" else str(r[h]) for h in header) for r in rows]
    widths = [max(len(row[i]) for row in table) for i in range(len(header))]
    for row in table:
        print("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())


def cmd_report(args) -> int:
    reports = pio.read_json(args.report)
    if not isinstance(reports, list):
        raise UsageError(f"{args.report}: a report must be a JSON array")
    if args.format == "csv":
        text = pio.render_csv(reports)
    elif args.format == "markdown":
        text = pio.render_markdown(reports)
    else:
        text = dumps_report(reports)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_rand(args) -> int:
    if args.dim_a * args.dim_a > MAX_ENTRIES or args.dim_b * args.dim_b > MAX_ENTRIES:
        raise UsageError("requested dimensions exceed the CLI limit; use the petzlab Python API")
    rng = make_rng(args.seed)
    kraus = max(args.kraus, -(-args.dim_a // args.dim_b))
    rho = random_density(args.dim_a, rng=rng)
    sigma = random_density(args.dim_a, rng=rng)
    ch = random_channel(args.dim_a, args.dim_b, kraus, rng)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    pio.save_matrix(out / "rho.json", rho)
    pio.save_matrix(out / "sigma.json", sigma)
    pio.save_channel(out / "channel.json", ch)
    _print_record([("seed", str(args.seed)), ("rho", str(out / "rho.json")),
                   ("sigma", str(out / "sigma.json")), ("channel", str(out / "channel.json"))])
    return EXIT_OK


# parser ----------------------------------------------------------------------

def _phases(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="petzlab", description="Recovery maps and entropic inequalities at desk scale.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("entropy", help="divergences between two states")
    p.add_argument("rho")
    p.add_argument("sigma")
    p.add_argument("--channel", help="channel file; adds the data-processing gap")
    p.add_argument("--base", choices=("nats", "bits"), default="nats")
    p.add_argument("--tol", type=float, default=1e-9, help="support tolerance")
    p.set_defaults(func=cmd_entropy)

    p = sub.add_parser("recover", help="apply a recovery map")
    p.add_argument("--sigma", required=True)
    p.add_argument("--channel", required=True)
    p.add_argument("--x", required=True, help="operator to recover from")
    p.add_argument("--kind", help=f"one of {', '.join(KINDS)}")
    p.add_argument("--theta", type=_phases, help="phases on the eigenvalues of sigma")
    p.add_argument("--phi", type=_phases, help="phases on the eigenvalues of N(sigma)")
    p.add_argument("--n", type=int, default=1, help="tensor power for pinchingRecovery")
    p.add_argument("--spec", help="JSON map spec (required for convex maps)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_recover)

    p = sub.add_parser("verify", help="run the verification suite")
    p.add_argument("config", nargs="?", help="JSON config (default: the shipped config)")
    p.add_argument("--seed", type=int)
    p.add_argument("--tol", action="append", metavar="NAME=VALUE",
                   help=f"tolerance override; names: {', '.join(DEFAULT_TOLERANCES)}")
    p.add_argument("--out", default="petzlab-report.json")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("report", help="render a JSON report")
    p.add_argument("report")
    p.add_argument("--format", choices=("csv", "markdown", "json"), default="csv")
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("rand", help="write a seeded random instance")
    p.add_argument("--dim-a", type=int, default=2)
    p.add_argument("--dim-b", type=int, default=2)
    p.add_argument("--kraus", type=int, default=2)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", default=".", help="output directory")
    p.set_defaults(func=cmd_rand)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except (OSError, PetzlabError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE if isinstance(exc, (OSError, ValueError)) else EXIT_RUNTIME

