"""Command-line entry points: run, oracle, verify, bench."""

import argparse
import json
import sys

from vertfed.config import load_config


def _add_config_arg(sub):
    sub.add_argument("-c", "--config", required=True, help="run config (INI)")


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="vertfed",
        description="Vertical federated training over functional encryption",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p_run = subs.add_parser("run", help="execute a training run")
    _add_config_arg(p_run)
    p_run.add_argument("-o", "--out", default=None, help="output directory")

    p_oracle = subs.add_parser("oracle", help="centralized plaintext baseline")
    _add_config_arg(p_oracle)

    p_verify = subs.add_parser(
        "verify", help="replay a run's batches against the plaintext oracle"
    )
    _add_config_arg(p_verify)
    p_verify.add_argument(
        "--tolerance", type=float, default=None,
        help="fail (exit 1) when max gradient deviation exceeds this",
    )

    p_bench = subs.add_parser("bench", help="crypto microbenchmarks")
    p_bench.add_argument("--compare", action="store_true", help="numba vs numpy")
    p_bench.add_argument("--group-bits", type=int, default=48)
    p_bench.add_argument("--table-bound", type=int, default=1 << 18)

    args = parser.parse_args(argv)

    if args.command == "run":
        from vertfed.runner import run_experiment

        result = run_experiment(load_config(args.config), out_dir=args.out)
        print(
            json.dumps(
                {
                    "test_accuracy": result.test_accuracy,
                    "confusion": result.confusion,
                    "skipped_batches": len(result.skips),
                    "party_to_party_messages": result.meter.party_to_party_count(),
                    "total_bytes": result.meter.total_bytes(),
                    "elapsed_s": round(result.elapsed_s, 3),
                },
                indent=2,
            )
        )
        return 0

    if args.command == "oracle":
        from vertfed.runner import run_oracle

        report = run_oracle(load_config(args.config))
        print(
            json.dumps(
                {
                    "test_accuracy": report["test_accuracy"],
                    "confusion": report["confusion"],
                    "final_loss": report["losses"][-1] if report["losses"] else None,
                },
                indent=2,
            )
        )
        return 0

    if args.command == "verify":
        from vertfed.runner import run_verify

        report = run_verify(load_config(args.config))
        print(json.dumps(report, indent=2))
        if args.tolerance is not None and report["max_deviation"] > args.tolerance:
            print(
                f"FAIL: deviation {report['max_deviation']:.3e} > {args.tolerance:.3e}",
                file=sys.stderr,
            )
            return 1
        return 0

    if args.command == "bench":
        from vertfed import bench

        if args.compare:
            results = bench.compare(
                group_bits=args.group_bits, table_bound=args.table_bound
            )
            print(bench.format_comparison(results))
        else:
            print(json.dumps(bench.run_suite(args.group_bits, args.table_bound), indent=2))
        return 0

    return 2


if __name__ == "__main__":
    raise SystemExit(main())
