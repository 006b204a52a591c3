"""Command-line interface.

Subcommands drive the pipeline stage by stage (construct, steady,
spectrum, evolve, perturb, census) or run the whole verification sweep
(verify).  Exit codes: 0 success, 1 configuration or validation error,
2 solver failure, 3 verification failure.  Errors are emitted as a JSON
object on stderr so callers can parse them.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import ConfigError, RunConfig, load_config
from .errors import (NoConvergence, NotConverged, SingularJacobian,
                     TorusPatternsError)
from .pipeline import Pipeline

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_SOLVER = 2
EXIT_VERIFY = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="toruspatterns",
        description="Stable patterns on rippled tori: construction, spectra, "
                    "first-order ripple response, and critical-point census.",
    )
    parser.add_argument("--config", default="default",
                        help="config file path or builtin name "
                             "(default, figure2)")
    parser.add_argument("--out", default=None, help="output directory override")
    parser.add_argument("--epsilon", type=float, default=None,
                        help="ripple amplitude override for steady/spectrum/census")
    parser.add_argument("--n", type=int, default=None,
                        help="wave count override")
    parser.add_argument("--grid", default=None,
                        help="grid override, NPHIxNTHETA")
    parser.add_argument("--seed", type=int, default=None, help="seed override")
    parser.add_argument("--quiet", action="store_true",
                        help="suppress progress output")
    parser.add_argument("command",
                        choices=["construct", "steady", "spectrum", "evolve",
                                 "perturb", "census", "verify"])
    return parser


def _apply_overrides(config: RunConfig, args) -> RunConfig:
    doc = config.to_dict()
    if args.out is not None:
        doc["output_dir"] = args.out
    if args.n is not None:
        doc["params"]["n_waves"] = args.n
    if args.grid is not None:
        try:
            n_phi, n_theta = (int(part) for part in args.grid.lower().split("x"))
        except ValueError as exc:
            raise ConfigError(f"--grid expects NPHIxNTHETA, got {args.grid!r}") from exc
        doc["grid"] = {"n_phi": n_phi, "n_theta": n_theta}
    if args.seed is not None:
        doc["seed"] = args.seed
    if args.epsilon is not None:
        doc["census"]["epsilon"] = args.epsilon
        doc["probe"]["epsilon"] = args.epsilon
    return RunConfig.from_dict(doc)


def _error_json(kind: str, exc: Exception) -> str:
    return json.dumps({"error": kind, "type": type(exc).__name__,
                       "message": str(exc)}, sort_keys=True)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        config = _apply_overrides(config, args)
    except (ConfigError, ValueError) as exc:
        print(_error_json("config", exc), file=sys.stderr)
        return EXIT_CONFIG

    pipe = Pipeline(config)
    out = Path(config.output_dir)
    say = (lambda *a: None) if args.quiet else (lambda *a: print(*a))
    eps = args.epsilon if args.epsilon is not None else config.census_epsilon

    try:
        if args.command == "construct":
            written = pipe.write_construct(out)
        elif args.command == "steady":
            written = pipe.write_steady(out, eps)
        elif args.command == "spectrum":
            written = pipe.write_spectrum(out, eps)
        elif args.command == "evolve":
            written = pipe.write_evolve(out)
        elif args.command == "perturb":
            written = pipe.write_perturb(out)
        elif args.command == "census":
            written = pipe.write_census(out, eps)
        else:
            return _run_verify(pipe, out, say)
    except (NoConvergence, NotConverged, SingularJacobian) as exc:
        print(_error_json("solver", exc), file=sys.stderr)
        return EXIT_SOLVER
    except ConfigError as exc:
        print(_error_json("config", exc), file=sys.stderr)
        return EXIT_CONFIG
    except TorusPatternsError as exc:
        print(_error_json("solver", exc), file=sys.stderr)
        return EXIT_SOLVER

    for name in written:
        say(f"wrote {out / name}")
    return EXIT_OK


def _run_verify(pipe: Pipeline, out: Path, say) -> int:
    written = pipe.write_verify(out)
    report = pipe.verification_report()
    for claim in report["claims"]:
        status = "PASS" if claim["passed"] else "FAIL"
        say(f"[{status}] {claim['name']}")
    for name in written:
        say(f"wrote {out / name}")
    if not report["all_passed"]:
        failing = [c["name"] for c in report["claims"] if not c["passed"]]
        print(_error_json("verification",
                          TorusPatternsError(f"failing claims: {failing}")),
              file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
