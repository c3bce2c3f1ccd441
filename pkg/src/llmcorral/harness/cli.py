"""Command line entry point: ``llmcorral run|aggregate|validate-data``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from ..env import load_actions, load_records
from ..exceptions import LLMCorralError
from .config import load_config
from .runner import aggregate_dir, run_seeds


def _cmd_run(args):
    config = load_config(args.config)
    seeds = config.seeds if args.seeds is None else list(range(args.seeds))
    out = args.out or config.output_dir
    results = run_seeds(config, seeds, out, jobs=args.jobs)
    for r in results:
        s = r.summary
        print(f"seed {r.seed}: avg_reward={s['avg_reward']:.5f} llm_calls={s['llm_calls']} "
              f"call_fraction={s['llm_call_fraction']:.5f} final_p_cb={s['final_p_cb']:.4f}")
    if out:
        print(f"wrote {Path(out).resolve()}")
    return 0


def _cmd_aggregate(args):
    agg, summary = aggregate_dir(args.in_dir, args.out)
    print(json.dumps(summary, indent=2))
    print(f"wrote {len(agg['step'])} rows to {args.out}")
    return 0


def _cmd_validate(args):
    actions = load_actions(args.actions)
    records = load_records(args.records, len(actions))
    dims = {r.context.dim for r in records}
    print(f"ok: {len(actions)} actions (dim {actions.dim}), {len(records)} records"
          + (f" (dim {dims.pop()})" if len(dims) == 1 else ""))
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="llmcorral", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment config over one or more seeds")
    r.add_argument("--config", required=True)
    r.add_argument("--seeds", type=int, help="run seeds 0..n-1 instead of the config's list")
    r.add_argument("--out", help="output directory (overrides the config)")
    r.add_argument("--jobs", type=int, default=1, help="seeds run in parallel")
    r.set_defaults(func=_cmd_run)

    a = sub.add_parser("aggregate", help="mean and sem across seed-*/metrics.csv files")
    a.add_argument("--in", dest="in_dir", required=True)
    a.add_argument("--out", required=True)
    a.set_defaults(func=_cmd_aggregate)

    v = sub.add_parser("validate-data", help="check a JSON-lines dataset")
    v.add_argument("--actions", required=True)
    v.add_argument("--records", required=True)
    v.set_defaults(func=_cmd_validate)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (LLMCorralError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
