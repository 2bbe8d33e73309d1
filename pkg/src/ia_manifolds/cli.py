"""Command-line entry point: ``ia-sim --experiment {convergence,rate,angle,all}``."""

import argparse
import logging
import sys

from .experiments import (
    ConfigError,
    load_config,
    run_angle_experiment,
    run_convergence_experiment,
    run_rate_experiment,
)

log = logging.getLogger("ia_manifolds")


def _float_list(text):
    try:
        return tuple(float(s) for s in text.split(",") if s.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _str_list(text):
    return tuple(s.strip() for s in text.split(",") if s.strip())


def build_parser():
    p = argparse.ArgumentParser(
        prog="ia-sim",
        description="Monte-Carlo interference-alignment precoder experiments.",
    )
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument(
        "--experiment", default="convergence",
        choices=("convergence", "rate", "angle", "all"),
    )
    p.add_argument("--algo", type=_str_list, help="comma list of euclidean,stiefel,grassmann")
    p.add_argument("--seeds", type=int, help="number of channel realizations")
    p.add_argument("--master-seed", type=int)
    p.add_argument("--iters", type=int, help="maximum number of sweeps")
    p.add_argument("--tol", type=float, help="relative cost tolerance (cost / initial cost)")
    p.add_argument("--snr", type=_float_list, help="comma list of SNRs in dB for rate runs")
    p.add_argument("--out", help="output directory")
    p.add_argument("--workers", type=int, help="worker processes (results do not depend on it)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = load_config(
            args.config,
            algorithms=args.algo,
            seeds=args.seeds,
            master_seed=args.master_seed,
            max_iterations=args.iters,
            relative_tolerance=args.tol,
            snr_db_list=args.snr,
            output_dir=args.out,
            workers=args.workers,
        )
    except ConfigError as exc:
        log.error("config: %s", exc)
        return 2

    todo = ("convergence", "rate", "angle") if args.experiment == "all" else (args.experiment,)
    try:
        for name in todo:
            if name == "convergence":
                records = run_convergence_experiment(cfg)
                failed = sum(r.status.startswith("error") for r in records)
                log.info("convergence: %d runs, %d failed", len(records), failed)
            elif name == "rate":
                for algo, res in run_rate_experiment(cfg).items():
                    slope = res["dof_slope"]
                    log.info("rate: %s dof_slope=%s", algo, "n/a" if slope is None else f"{slope:.3f}")
            else:
                run_angle_experiment(cfg)
                log.info("angles: written for seed %d", cfg.angle_seed)
    except ConfigError as exc:
        log.error("config: %s", exc)
        return 2
    except OSError as exc:
        log.error("I/O: %s", exc)
        return 1
    log.info("results in %s", cfg.output_dir)
    return 0


if __name__ == "__main__":
    sys.exit(main())
