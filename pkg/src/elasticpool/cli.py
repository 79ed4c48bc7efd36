"""
Command-line scenario runner.

    elasticpool --scenario abrupt.yaml --out results/
    elasticpool --scenario abrupt.yaml --compare overprovision,cpu_only,fine_grained

A single run writes ``samples.csv``, ``summary.txt``, ``events.log`` and a
``store.csv`` debug dump into the output directory. A comparison writes one
subdirectory per baseline plus ``comparison.tsv``.

Exit status: 0 on success, 2 on a configuration error, 3 when a run breaks
an internal invariant.
"""

import argparse
import logging
import os
import sys

from .bench.harness import (InvariantViolation, compare, comparison_text, run_baseline,
                            samples_csv, summary_text)
from .scenario import POLICIES, ScenarioError, load_scenario

log = logging.getLogger("elasticpool.cli")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INVARIANT = 3


def build_parser():
    p = argparse.ArgumentParser(prog="elasticpool",
                                description="Run an elastic object pool scenario.")
    p.add_argument("--scenario", required=True, help="flat-key YAML scenario file")
    p.add_argument("--seed", type=int, help="override the scenario seed")
    p.add_argument("--out", help="output directory (default: the scenario's out key)")
    p.add_argument("--compare", help="comma-separated baselines, at least two")
    p.add_argument("--log-level", default="WARNING",
                   choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    return p


def write_outputs(result, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "samples.csv"), "w", newline="") as fh:
        fh.write(samples_csv(result))
    with open(os.path.join(out_dir, "summary.txt"), "w") as fh:
        fh.write(summary_text(result))
    with open(os.path.join(out_dir, "events.log"), "w") as fh:
        fh.writelines(line + "\n" for line in result.events.lines())
    with open(os.path.join(out_dir, "store.csv"), "w", newline="") as fh:
        result.pool.store.dump_csv(fh)


def _parse_baselines(text):
    names = [b.strip() for b in text.split(",") if b.strip()]
    for b in names:
        if b not in POLICIES:
            raise ValueError("unknown baseline %r (choose from %s)"
                             % (b, ", ".join(POLICIES)))
    if len(names) < 2:
        raise ValueError("--compare needs at least two baselines")
    return names


def run(args, baselines=None):
    scenario = load_scenario(args.scenario)
    if args.seed is not None:
        scenario = scenario.replace(seed=args.seed)
    out_dir = args.out or scenario.out

    if baselines:
        table = compare(scenario, baselines,
                        on_result=lambda b, res: write_outputs(res, os.path.join(out_dir, b)))
        os.makedirs(out_dir, exist_ok=True)
        text = comparison_text(table)
        with open(os.path.join(out_dir, "comparison.tsv"), "w") as fh:
            fh.write(text)
        sys.stdout.write(text)
        return EXIT_OK

    res = run_baseline(scenario, scenario.policy)
    write_outputs(res, out_dir)
    sys.stdout.write(summary_text(res))
    return EXIT_OK


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.seed is not None and not 0 <= args.seed < 2 ** 64:
        parser.error("--seed must be an unsigned 64-bit integer")
    baselines = None
    if args.compare is not None:
        try:
            baselines = _parse_baselines(args.compare)
        except ValueError as exc:
            parser.error(str(exc))
    logging.basicConfig(level=getattr(logging, args.log_level),
                        format="%(levelname)s %(name)s %(message)s")
    try:
        return run(args, baselines)
    except ScenarioError as exc:
        print("error: %s" % exc.located(args.scenario), file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_CONFIG
    except InvariantViolation as exc:
        print("invariant violated: %s" % exc, file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
