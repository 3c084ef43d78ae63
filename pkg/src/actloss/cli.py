"""Command-line experiment runner.

Subcommands: generate | solve | transition | landscape | qq | fdcheck.
Every run is deterministic under --seed: trials and region samples are
keyed by substreams of the master seed, so reruns are byte-identical and
extending a grid never perturbs existing cells.  Exit codes: 0 success,
1 a numerical check failed its tolerance/bound, 2 usage or validation
error.  ARTIFACT_THREADS caps the worker pool used for trial fan-out.
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import dataclass, fields, replace

import numpy as np

from .activation import ActivationProfile, profile_from_spec
from .descent import (
    STEPSIZE_BETA_PAIRINGS,
    TRANSITION_GAMMA_RATIO,
    SolveConfig,
    descend,
    success_curve,
)
from .ensemble import generate, load, save
from .landscape import REGIONS, R2A, UNDEFINED, sample_point, sample_region
from .loss import _per_term_arrays, fd_check
from .ensemble import RngSpec

__all__ = ["ExperimentConfig", "build_parser", "config_from_args", "main"]

LANDSCAPE_GAMMA_RATIO = 2.0
DEFAULT_LANDSCAPE_PROFILE = "h1:beta=10,gamma=20"
DEFAULT_LANDSCAPE_REGIONS = "R1,R2c,R3"
FD_REGIONS = ("R1", "R2a", "R2b", "R2c", "R3")


# ---------------------------------------------------------------------------
# Config plumbing
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    """Normalized, round-trippable form of one CLI invocation."""

    command: str
    n: int | None = None
    m: int | None = None
    ratios: tuple[float, ...] | None = None
    trials: int | None = None
    mu: float | None = None
    loss: str | None = None
    profile: str | None = None
    delta: float | None = None
    seed: int | None = None
    samples: int | None = None
    quantiles: int | None = None
    eps: float | None = None
    points: int | None = None
    x_scalar: float | None = None
    z_scalar: float | None = None
    x_mode: str | None = None
    regions: tuple[str, ...] | None = None
    max_iters: int | None = None
    tol: float | None = None
    ensemble: str | None = None
    pairings: bool = False
    text: bool = False
    out: str | None = None
    fmt: str | None = None

    def to_argv(self) -> list[str]:
        argv = [self.command]
        flags = {
            "n": "-n",
            "m": "-m",
            "ratios": "--ratios",
            "trials": "--trials",
            "mu": "--mu",
            "loss": "--loss",
            "profile": "--profile",
            "delta": "--delta",
            "seed": "--seed",
            "samples": "--samples",
            "quantiles": "--quantiles",
            "eps": "--eps",
            "points": "--points",
            "x_scalar": "--x",
            "z_scalar": "--z",
            "x_mode": "--x-mode",
            "regions": "--regions",
            "max_iters": "--max-iters",
            "tol": "--tol",
            "ensemble": "--ensemble",
            "out": "-o",
            "fmt": "--format",
        }
        for f in fields(self):
            if f.name in ("command", "pairings", "text"):
                continue
            val = getattr(self, f.name)
            if val is None:
                continue
            if f.name in ("ratios", "regions"):
                argv += [flags[f.name], ",".join(repr(v) if isinstance(v, float) else str(v) for v in val)]
            elif isinstance(val, float):
                argv += [flags[f.name], repr(val)]
            else:
                argv += [flags[f.name], str(val)]
        if self.pairings:
            argv.append("--pairings")
        if self.text:
            argv.append("--text")
        return argv


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    kwargs = {}
    for f in fields(ExperimentConfig):
        if hasattr(args, f.name):
            kwargs[f.name] = getattr(args, f.name)
    return ExperimentConfig(**kwargs)


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def _positive_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}")
    if not v > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {v}")
    return v


def _ratio_list(text: str) -> tuple[float, ...]:
    """Parse '4,4.5,5' or a range 'lo:hi:step' into a ratio tuple."""
    try:
        if ":" in text:
            parts = [float(p) for p in text.split(":")]
            if len(parts) == 2:
                lo, hi, step = parts[0], parts[1], 1.0
            elif len(parts) == 3:
                lo, hi, step = parts
            else:
                raise ValueError
            if step <= 0 or hi < lo:
                raise ValueError
            count = int(round((hi - lo) / step)) + 1
            vals = tuple(lo + i * step for i in range(count) if lo + i * step <= hi + 1e-9)
        else:
            vals = tuple(float(p) for p in text.split(",") if p.strip())
        if not vals or any(not 1.0 <= v <= 20.0 for v in vals):
            raise ValueError
        return vals
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"bad ratio list {text!r}: use 'a,b,c' or 'lo:hi:step' with ratios in [1, 20]"
        )


def _region_list(text: str) -> tuple[str, ...]:
    vals = tuple(p.strip() for p in text.split(",") if p.strip())
    allowed = set(REGIONS) - {R2A}
    for v in vals:
        if v not in allowed:
            raise argparse.ArgumentTypeError(
                f"unknown region {v!r}; choose from {sorted(allowed)}"
            )
    if not vals:
        raise argparse.ArgumentTypeError("empty region list")
    return vals


def _parse_profile(spec: str, gamma_ratio: float) -> ActivationProfile:
    try:
        return profile_from_spec(spec, default_gamma_ratio=gamma_ratio)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


# ---------------------------------------------------------------------------
# Output helpers
# ---------------------------------------------------------------------------


def _fmt_cell(v) -> str:
    if isinstance(v, bool):
        return "yes" if v else "no"
    if isinstance(v, float):
        return repr(float(v))
    return "" if v is None else str(v)


def _write_csv(out_path: str | None, header: list[str], rows: list[list]) -> None:
    def emit(fh):
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt_cell(v) for v in row])

    if out_path is None:
        emit(sys.stdout)
    else:
        try:
            with open(out_path, "w", newline="") as fh:
                emit(fh)
        except OSError as exc:
            raise SystemExit(f"cannot write {out_path!r}: {exc}")


def _print_table(header: list[str], rows: list[list]) -> None:
    cells = [[_fmt_cell(v) if not isinstance(v, float) else f"{v:.6g}" for v in row] for row in rows]
    widths = [max(len(h), *(len(r[i]) for r in cells)) if cells else len(h) for i, h in enumerate(header)]
    print("  ".join(h.ljust(w) for h, w in zip(header, widths)))
    for row in cells:
        print("  ".join(c.ljust(w) for c, w in zip(row, widths)))


def _emit(args, header, rows) -> None:
    fmt = args.fmt or ("csv" if args.out else "table")
    if fmt == "csv":
        _write_csv(args.out, header, rows)
    else:
        _print_table(header, rows)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def _cmd_generate(args) -> int:
    ens = generate(args.n, args.m, args.seed, x_mode=args.x_mode)
    try:
        save(ens, args.out, text=args.text)
    except OSError as exc:
        raise SystemExit(f"cannot write {args.out!r}: {exc}")
    print(
        f"n={ens.n} m={ens.m} seed={ens.seed} x_mode={args.x_mode} "
        f"mean_energy={ens.y1_over_m!r} file={args.out}"
    )
    return 0


def _cmd_solve(args) -> int:
    if args.ensemble is not None:
        ens = load(args.ensemble)
    else:
        ens = generate(args.n, args.m, args.seed, x_mode=args.x_mode)
    profile = None
    if args.loss == "activated":
        profile = _parse_profile(args.profile, TRANSITION_GAMMA_RATIO)
    config = SolveConfig(
        mu=args.mu,
        max_iters=args.max_iters,
        tol=args.tol,
        loss_kind=args.loss,
        profile=profile,
        init_seed=args.seed,
        init_stream=1,
    )
    rec = descend(ens, config)
    print(
        f"loss={args.loss} mu={args.mu} n={ens.n} m={ens.m} seed={args.seed} "
        f"iterations={rec.iterations_run} rel_err={rec.final_rel_err!r} "
        f"success={rec.success} diverged={rec.diverged}"
    )
    return 0


def _transition_runs(args) -> list[tuple[str, float, ActivationProfile | None]]:
    """Resolve which (loss_kind, mu, profile) rows the invocation covers."""
    if args.pairings:
        runs = []
        for mu, beta in sorted(STEPSIZE_BETA_PAIRINGS.items()):
            runs.append(
                ("activated", mu, ActivationProfile("h2", beta, TRANSITION_GAMMA_RATIO * beta))
            )
        return runs
    kinds = ("activated", "vanilla") if args.loss == "both" else (args.loss,)
    runs = []
    for kind in kinds:
        profile = None
        if kind == "activated":
            if args.profile is not None:
                profile = _parse_profile(args.profile, TRANSITION_GAMMA_RATIO)
            elif args.mu in STEPSIZE_BETA_PAIRINGS:
                beta = STEPSIZE_BETA_PAIRINGS[args.mu]
                profile = ActivationProfile("h2", beta, TRANSITION_GAMMA_RATIO * beta)
            else:
                raise SystemExit(
                    f"no default activation pairing for mu={args.mu}; pass --profile"
                )
        runs.append((kind, args.mu, profile))
    return runs


def _cmd_transition(args) -> int:
    header = ["loss_kind", "mu", "beta", "gamma", "ratio", "trials", "successes", "probability"]
    rows = []
    for kind, mu, profile in _transition_runs(args):
        config = SolveConfig(
            mu=mu,
            max_iters=args.max_iters,
            tol=args.tol,
            loss_kind=kind,
            profile=profile,
        )
        _, records = success_curve(
            args.n,
            args.ratios,
            args.trials,
            config,
            master_seed=args.seed,
            x_mode="gaussian",
            return_records=True,
        )
        for ratio, recs in zip(args.ratios, records):
            successes = sum(r.success for r in recs)
            rows.append(
                [
                    kind,
                    mu,
                    profile.beta if profile else None,
                    profile.gamma if profile else None,
                    ratio,
                    args.trials,
                    successes,
                    successes / args.trials,
                ]
            )
    _emit(args, header, rows)
    return 0


def _cmd_landscape(args) -> int:
    profile = _parse_profile(args.profile, LANDSCAPE_GAMMA_RATIO)
    ens = generate(args.n, args.m, args.seed, x_mode=args.x_mode)
    header = ["region", "sample", "quantity", "computed", "bound", "kind", "satisfied"]
    rows = []
    all_ok = True
    blocks = []
    for region in args.regions:
        reports, summary = sample_region(
            ens,
            profile,
            region,
            args.samples,
            delta=args.delta,
            sampler_seed=args.seed,
        )
        blocks.append((region, reports, summary))
        for i, rep in enumerate(reports):
            for chk in rep.checks:
                rows.append(
                    [region, i, chk.name, chk.computed, chk.bound, chk.kind, chk.satisfied]
                )
                all_ok &= chk.satisfied
    fmt = args.fmt or ("csv" if args.out else "table")
    if fmt == "csv":
        _write_csv(args.out, header, rows)
    else:
        for region, reports, summary in blocks:
            print(
                f"region {region}: n={args.n} m={args.m} delta={args.delta} "
                f"samples={args.samples} pass={summary['pass_fraction']}"
            )
            names = [c.name for c in reports[0].checks] if reports[0].checks else []
            for name in names:
                computed = [c.computed for r in reports for c in r.checks if c.name == name]
                bounds = [c.bound for r in reports for c in r.checks if c.name == name]
                kind = next(c.kind for r in reports for c in r.checks if c.name == name)
                print(f"  numerical results   [{name}]: " + "  ".join(f"{v:.6g}" for v in computed))
                print(f"  theoretical bounds ({kind}): " + "  ".join(f"{v:.6g}" for v in bounds))
            print()
    return 0 if all_ok else 1


def _cmd_qq(args) -> int:
    profile = _parse_profile(args.profile, LANDSCAPE_GAMMA_RATIO)
    d1v, d1a, d2v, d2a = _per_term_arrays(
        args.x_scalar, args.z_scalar, args.samples, profile, args.seed
    )
    levels = np.linspace(0.0, 1.0, args.quantiles)
    header = ["quantile", "vanilla_d1", "activated_d1", "vanilla_d2", "activated_d2"]
    cols = [np.quantile(v, levels) for v in (d1v, d1a, d2v, d2a)]
    rows = [
        [float(levels[i])] + [float(c[i]) for c in cols] for i in range(args.quantiles)
    ]
    fmt = args.fmt or "csv"
    if fmt == "csv":
        _write_csv(args.out, header, rows)
    else:
        _print_table(header, rows)
    return 0


def _cmd_fdcheck(args) -> int:
    profile = _parse_profile(args.profile, LANDSCAPE_GAMMA_RATIO)
    x_mode = "ones" if args.n == 1 else args.x_mode
    ens = generate(args.n, args.m, args.seed, x_mode=x_mode)
    header = ["region", "points", "max_rel_grad_err", "max_rel_hess_err"]
    rows = []
    all_ok = True
    if args.n == 1:
        # The t-band regions R2a/R2b are empty on a line; sample the ray
        # z in (0, 10]*|x| instead, which sweeps plateau, ramp and cutoff.
        rng = RngSpec(args.seed, 0).generator()
        worst_g = worst_h = 0.0
        for _ in range(args.points):
            z = np.array([rng.uniform(0.0, 10.0)]) * abs(float(ens.x[0]))
            res = fd_check(ens, profile, z, eps=args.eps)
            worst_g = max(worst_g, res["max_rel_grad_err"])
            worst_h = max(worst_h, res["max_rel_hess_err"])
        ok = worst_g <= args.grad_tol and worst_h <= args.hess_tol
        all_ok &= ok
        rows.append(["ray", args.points, worst_g, worst_h])
    else:
        for i, region in enumerate(FD_REGIONS):
            rng = RngSpec(args.seed, i).generator()
            worst_g = worst_h = 0.0
            for _ in range(args.points):
                z = sample_point(region, ens.x, args.delta, rng)
                res = fd_check(ens, profile, z, eps=args.eps)
                worst_g = max(worst_g, res["max_rel_grad_err"])
                worst_h = max(worst_h, res["max_rel_hess_err"])
            ok = worst_g <= args.grad_tol and worst_h <= args.hess_tol
            all_ok &= ok
            rows.append([region, args.points, worst_g, worst_h])
    _emit(args, header, rows)
    return 0 if all_ok else 1


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="actloss",
        description=__doc__,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, seed_default=0):
        p.add_argument("--seed", type=int, default=seed_default, help="master seed")
        p.add_argument("-o", dest="out", default=None, help="output file path")
        p.add_argument(
            "--format",
            dest="fmt",
            choices=("csv", "table"),
            default=None,
            help="output format (default: csv when -o is given, else table)",
        )

    p = sub.add_parser("generate", help="generate and save one measurement ensemble")
    p.add_argument("-n", type=_positive_int, required=True, help="dimension")
    p.add_argument("-m", type=_positive_int, required=True, help="number of equations")
    p.add_argument("--x-mode", choices=("gaussian", "ones"), default="gaussian")
    p.add_argument("--text", action="store_true", help="write the text format")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", dest="out", required=True, help="output file path")
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("solve", help="run one gradient-descent recovery")
    p.add_argument("-n", type=_positive_int, default=128)
    p.add_argument("-m", type=_positive_int, default=768)
    p.add_argument("--ensemble", default=None, help="load the instance from a file")
    p.add_argument("--mu", type=_positive_float, default=0.3)
    p.add_argument("--loss", choices=("activated", "vanilla"), default="activated")
    p.add_argument("--profile", default="h2:beta=5", help="e.g. h2:beta=5,gamma=7.5")
    p.add_argument("--max-iters", dest="max_iters", type=_positive_int, default=2500)
    p.add_argument("--tol", type=_positive_float, default=1e-3)
    p.add_argument("--x-mode", choices=("gaussian", "ones"), default="gaussian")
    add_common(p)
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("transition", help="success probability vs sampling ratio m/n")
    p.add_argument("-n", type=_positive_int, default=128)
    p.add_argument("--ratios", type=_ratio_list, default=_ratio_list("4:10:0.5"))
    p.add_argument("--trials", type=_positive_int, default=100)
    p.add_argument("--mu", type=_positive_float, default=0.3)
    p.add_argument(
        "--loss", choices=("activated", "vanilla", "both"), default="both"
    )
    p.add_argument(
        "--profile",
        default=None,
        help="activation spec; default pairs beta with mu (0.1->20, 0.2->10, 0.3->5), gamma=1.5*beta",
    )
    p.add_argument(
        "--pairings",
        action="store_true",
        help="run the activated loss at all three (mu, beta) pairings in one file",
    )
    p.add_argument("--max-iters", dest="max_iters", type=_positive_int, default=2500)
    p.add_argument("--tol", type=_positive_float, default=1e-3)
    add_common(p)
    p.set_defaults(func=_cmd_transition)

    p = sub.add_parser("landscape", help="verify region certificates on random samples")
    p.add_argument("-n", type=_positive_int, default=128)
    p.add_argument("-m", type=_positive_int, default=768)
    p.add_argument("--regions", type=_region_list, default=_region_list(DEFAULT_LANDSCAPE_REGIONS))
    p.add_argument("--samples", type=_positive_int, default=3)
    p.add_argument("--delta", type=_positive_float, default=0.01)
    p.add_argument("--profile", default=DEFAULT_LANDSCAPE_PROFILE)
    p.add_argument("--x-mode", choices=("gaussian", "ones"), default="ones")
    add_common(p)
    p.set_defaults(func=_cmd_landscape)

    p = sub.add_parser("qq", help="per-term derivative quantiles of both losses (n=1)")
    p.add_argument("--samples", type=_positive_int, default=100_000)
    p.add_argument("--quantiles", type=_positive_int, default=1024)
    p.add_argument("--x", dest="x_scalar", type=float, default=1.0)
    p.add_argument("--z", dest="z_scalar", type=float, default=2.0)
    p.add_argument("--profile", default=DEFAULT_LANDSCAPE_PROFILE)
    add_common(p)
    p.set_defaults(func=_cmd_qq)

    p = sub.add_parser("fdcheck", help="finite-difference validation of grad/Hessian")
    p.add_argument("-n", type=_positive_int, default=8)
    p.add_argument("-m", type=_positive_int, default=64)
    p.add_argument("--eps", type=_positive_float, default=1e-5)
    p.add_argument("--points", type=_positive_int, default=5, help="points per region")
    p.add_argument("--delta", type=_positive_float, default=0.01)
    p.add_argument("--grad-tol", dest="grad_tol", type=_positive_float, default=1e-5)
    p.add_argument("--hess-tol", dest="hess_tol", type=_positive_float, default=1e-4)
    p.add_argument("--profile", default=DEFAULT_LANDSCAPE_PROFILE)
    p.add_argument("--x-mode", choices=("gaussian", "ones"), default="gaussian")
    add_common(p)
    p.set_defaults(func=_cmd_fdcheck)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "n", None) is not None and args.command == "fdcheck" and args.n > 16:
        parser.error("fdcheck is limited to n <= 16 (dense FD sweeps)")
    try:
        return args.func(args)
    except SystemExit:
        raise
    except (ValueError, RuntimeError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
