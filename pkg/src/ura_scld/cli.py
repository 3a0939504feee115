"""``simulate`` command line entry point."""
from __future__ import annotations

import argparse
import logging
import sys

from .errors import InvalidConfig
from .experiment import ExperimentConfig, run_experiment

EXIT_OK = 0
EXIT_INVALID_CONFIG = 2
EXIT_NUMERICAL = 3


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="simulate",
        description="Monte Carlo PUPE / run-time study of baseline and SCLD decoding for massive-MIMO URA.",
    )
    p.add_argument("--config", required=True, help="YAML (or JSON) experiment config")
    p.add_argument("--out", default=None, help="directory for report.json and results.csv")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--modes", type=lambda s: [m.strip() for m in s.split(",") if m.strip()])
    p.add_argument("--ka", type=_int_list, help="comma-separated K_a values")
    p.add_argument("--m", type=_int_list, help="comma-separated antenna counts")
    p.add_argument("--threads", type=int, help="worker processes")
    p.add_argument("-q", "--quiet", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s")
    log = logging.getLogger("simulate")

    overrides = {
        "trials": args.trials, "seed": args.seed, "modes": args.modes,
        "K_a": args.ka, "M": args.m, "threads": args.threads,
    }
    try:
        cfg = ExperimentConfig.load(args.config)
        cfg = ExperimentConfig.from_dict({**cfg.to_dict(), **{k: v for k, v in overrides.items() if v is not None}})
    except InvalidConfig as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_INVALID_CONFIG

    def progress(r):
        log.info("ka=%d m=%d trial=%d missed=%s seconds=%s", r.ka, r.m, r.trial, r.missed,
                 {k: round(v, 3) for k, v in r.seconds.items()})

    report = run_experiment(cfg, progress=progress)
    if args.out:
        report.write(args.out)
        log.info("wrote %s", args.out)
    else:
        sys.stdout.write(report.to_csv())
    for p in report.points:
        log.info("ka=%d m=%d %-8s pupe=%.4f [%.4f, %.4f] time=%.3fs ratio=%s", p["ka"], p["m"], p["mode"],
                 p["pupe"], p["pupe_ci_lo"], p["pupe_ci_hi"], p["mean_decode_seconds"], p["runtime_ratio"])

    if report.failure_rate > cfg.failure_threshold:
        print(f"numerical failure rate {report.failure_rate:.3f} exceeds {cfg.failure_threshold}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
