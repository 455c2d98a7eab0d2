"""Command line interface.

Exit codes form a small contract scripts can rely on:

* 0: success; for ``audit``, a clean verdict.
* 1: unreadable or invalid input data (I/O, parse, validation).
* 2: invalid configuration or usage (argparse uses 2 as well).
* 3: ``audit`` found leakage across a test boundary.
* 4: plan and manifest do not describe the same records.

Color is used only for the audit verdict, only on a tty, and never when
the SPLITGUARD_NO_COLOR environment variable is set to anything.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

from .auditor import audit_plan, render_text
from .errors import (
    InvalidConfig,
    OracleError,
    ParseError,
    PlanManifestMismatch,
    SplitguardError,
    ValidationError,
)
from .evalsim import (
    ORACLE_KINDS,
    load_result,
    render_markdown,
    run_simulation,
    save_result,
)
from .manifest import load_manifest, save_manifest
from .splitter import (
    Scheme,
    SplitConfig,
    derive_train_val_test,
    load_plan,
    plan_split,
    save_plan,
)
from .synth import (
    SynthConfig,
    augment_records,
    generate_cohort,
    generate_holdout,
    load_synth_config,
)

EXIT_OK = 0
EXIT_DATA = 1
EXIT_CONFIG = 2
EXIT_LEAKY = 3
EXIT_MISMATCH = 4


def _use_color(stream) -> bool:
    if os.environ.get("SPLITGUARD_NO_COLOR"):
        return False
    return hasattr(stream, "isatty") and stream.isatty()


def parse_seeds(spec: str) -> list[int]:
    """Parse '0..9', '3', or '0,2,5' (commas may mix with ranges)."""
    seeds: list[int] = []
    for token in spec.split(","):
        token = token.strip()
        if not token:
            raise InvalidConfig(f"empty seed token in {spec!r}")
        if ".." in token:
            lo_text, _, hi_text = token.partition("..")
            try:
                lo, hi = int(lo_text), int(hi_text)
            except ValueError:
                raise InvalidConfig(f"malformed seed range {token!r}") from None
            if hi < lo:
                raise InvalidConfig(f"seed range {token!r} runs backwards")
            seeds.extend(range(lo, hi + 1))
        else:
            try:
                seeds.append(int(token))
            except ValueError:
                raise InvalidConfig(f"malformed seed {token!r}") from None
    if len(set(seeds)) != len(seeds):
        raise InvalidConfig(f"seed spec {spec!r} repeats a seed")
    return seeds


def _load_config(path: str | None, seed: int | None) -> SynthConfig:
    config = SynthConfig() if path is None else load_synth_config(path)
    if seed is not None:
        config = replace(config, seed=seed)
    return config


def _cmd_synth(args: argparse.Namespace) -> int:
    config = _load_config(args.synth, args.seed)
    cohort = generate_cohort(config)
    if not args.raw:
        cohort = augment_records(cohort, config)
    save_manifest(cohort, args.out)
    print(
        f"wrote {len(cohort.records)} records "
        f"({len(cohort.subjects)} subjects) to {args.out}"
    )
    if args.holdout_out:
        holdout = generate_holdout(config)
        save_manifest(holdout, args.holdout_out)
        print(
            f"wrote {len(holdout.records)} holdout records "
            f"({len(holdout.subjects)} subjects) to {args.holdout_out}"
        )
    return EXIT_OK


def _cmd_split(args: argparse.Namespace) -> int:
    m = load_manifest(args.manifest)
    config = SplitConfig(
        scheme=Scheme.parse(args.scheme),
        seed=args.seed,
        k=args.k,
        val_fraction_of_total=args.val_fraction,
    )
    plan = plan_split(m, config)
    if args.out:
        save_plan(plan, args.out)
        for fold in range(plan.k):
            roles = derive_train_val_test(plan, fold)
            print(
                f"fold {fold}: train={len(roles['train'])} "
                f"val={len(roles['val'])} test={len(roles['test'])}"
            )
        print(f"wrote {plan.k}-fold {plan.scheme.value} plan to {args.out}")
    else:
        sys.stdout.write(plan.to_json())
    return EXIT_OK


def _cmd_audit(args: argparse.Namespace) -> int:
    m = load_manifest(args.manifest)
    plan = load_plan(args.plan)
    holdout = load_manifest(args.holdout) if args.holdout else None
    report = audit_plan(plan, m, holdout=holdout)
    if args.json:
        sys.stdout.write(report.to_json())
    else:
        sys.stdout.write(render_text(report, color=_use_color(sys.stdout)))
    return EXIT_OK if report.verdict == "clean" else EXIT_LEAKY


def _cmd_simulate(args: argparse.Namespace) -> int:
    config = _load_config(args.synth, None)
    seeds = parse_seeds(args.seeds)
    schemes = tuple(Scheme.parse(t) for t in args.schemes.split(",") if t.strip())
    if not schemes:
        raise InvalidConfig("need at least one scheme")
    result = run_simulation(
        config,
        seeds,
        oracle=args.oracle,
        k=args.k,
        val_fraction_of_total=args.val_fraction,
        schemes=schemes,
    )
    if args.out:
        save_result(result, args.out)
        print(f"wrote simulation over {len(seeds)} seeds to {args.out}")
    else:
        sys.stdout.write(json.dumps(result, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def _cmd_report(args: argparse.Namespace) -> int:
    result = load_result(args.results)
    text = render_markdown(result)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"wrote report to {args.out}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="splitguard",
        description=(
            "Plan, audit and stress-test cross-validation splits for "
            "longitudinal record collections."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic cohort manifest")
    p.add_argument("--synth", help="TOML file with a [cohort] table")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument(
        "-o", "--out", required=True, help="cohort manifest path (.csv or .jsonl)"
    )
    p.add_argument("--holdout-out", help="also write a held-out subject manifest")
    p.add_argument(
        "--raw", action="store_true", help="skip augmentation, write source scans only"
    )
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("split", help="plan k folds over a manifest")
    p.add_argument("-m", "--manifest", required=True)
    p.add_argument(
        "--scheme", required=True, help="subject_wise, record_wise or late_wise"
    )
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--val-fraction", type=float, default=0.10)
    p.add_argument("-o", "--out", help="plan JSON path (stdout when omitted)")
    p.set_defaults(func=_cmd_split)

    p = sub.add_parser("audit", help="audit a plan for leakage")
    p.add_argument("-m", "--manifest", required=True)
    p.add_argument("--plan", required=True)
    p.add_argument("--holdout", help="second manifest checked for shared subjects")
    p.add_argument("--json", action="store_true", help="emit the report as JSON")
    p.set_defaults(func=_cmd_audit)

    p = sub.add_parser("simulate", help="run the full scheme comparison experiment")
    p.add_argument("--synth", help="TOML file with a [cohort] table")
    p.add_argument("--seeds", default="0..9", help="e.g. 0..9 or 0,2,5")
    p.add_argument("--oracle", default="knn1", choices=ORACLE_KINDS)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--val-fraction", type=float, default=0.10)
    p.add_argument("--schemes", default="subject_wise,record_wise,late_wise")
    p.add_argument("-o", "--out", help="result JSON path (stdout when omitted)")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("report", help="render a simulation result as markdown")
    p.add_argument("results", help="simulation result JSON path")
    p.add_argument("-o", "--out", help="markdown path (stdout when omitted)")
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except PlanManifestMismatch as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISMATCH
    except InvalidConfig as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ParseError, ValidationError, OracleError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except SplitguardError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
