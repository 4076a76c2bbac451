"""Command line interface: ``polyak-pg {train-rl,train-opt,eval,compare}``."""
from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from pathlib import Path

from .exceptions import ConfigError, InputError, NumericError, UsageError
from .finite_sum import read_loss_series_csv
from .harness import (compare_report, load_config, run_experiment, run_finite_sum,
                      with_paper_scale)
from .policies import load_checkpoint
from .rollout import greedy_returns

def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", type=Path, help="INI config file")
    p.add_argument("--seed", type=int, help="run (or select) this seed only")
    p.add_argument("--out", type=Path, help="output directory (overrides experiment.out)")
    p.add_argument("--set", dest="overrides", action="append", default=[],
                   metavar="SECTION.KEY=VALUE", help="override one config value")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="polyak-pg", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train-rl", help="train policies (twin Polyak, Adam or SGD)")
    _common(p)
    p.add_argument("--paper-scale", action="store_true",
                   help="500 trajectories per model per update instead of 50")
    p.add_argument("--no-resume", action="store_true", help="retrain seeds already on disk")

    p = sub.add_parser("train-opt", help="finite-sum logistic regression lab")
    _common(p)

    p = sub.add_parser("eval", help="greedy evaluation of saved checkpoints")
    _common(p)
    p.add_argument("--checkpoint", type=Path, action="append", default=[],
                   help="checkpoint file (repeatable); default: all under experiment.out")

    p = sub.add_parser("compare", help="aggregate metrics files into plot data")
    _common(p)
    p.add_argument("metrics", nargs="*", type=Path, help="metrics CSVs; default: experiment.out")
    return parser


def _config(args):
    overrides = list(args.overrides)
    if args.out is not None:
        overrides.append(f"experiment.out={args.out}")
    return load_config(args.config, overrides)


def _seeds(args):
    return None if args.seed is None else [args.seed]


def cmd_train_rl(args) -> int:
    config = _config(args)
    if args.paper_scale:
        config = with_paper_scale(config)
    for path in run_experiment(config, _seeds(args), resume=not args.no_resume):
        with path.open(newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        evals = [float(r["eval_return"]) for r in rows if r["eval_return"] != "nan"]
        final = evals[-1] if evals else math.nan
        print(f"{path}: {len(rows)} iterations, final eval return {final:.2f}")
    return 0


def cmd_train_opt(args) -> int:
    config = _config(args)
    for path in run_finite_sum(config, _seeds(args)):
        print(path)
        for s in read_loss_series_csv(path):
            hit = s.first_below(1e-2)
            print(f"  {s.method:<28} final f={s.f_full[-1]:.3e}  first below 1e-2: {hit}")
    return 0


def cmd_eval(args) -> int:
    config = _config(args)
    out = Path(config.out)
    ckpts = args.checkpoint or sorted(out.rglob("*.policy"))
    if not ckpts:
        raise UsageError(f"no checkpoints given and none found under {out}")
    seeds = list(config.eval_seeds) if args.seed is None else [args.seed]
    if set(seeds) & set(config.train_seeds):
        raise ConfigError(f"evaluation seed overlaps training seeds {config.train_seeds}")
    env = config.make_env()
    out.mkdir(parents=True, exist_ok=True)
    dest = out / "eval_results.csv"
    with dest.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(("checkpoint", "eval_seed", "return"))
        for ck in ckpts:
            returns = greedy_returns(env, load_checkpoint(ck), seeds)
            for s, r in zip(seeds, returns):
                w.writerow((str(ck), s, repr(float(r))))
            print(f"{ck}: mean greedy return {returns.mean():.2f} over seeds {seeds}")
    print(dest)
    return 0


def cmd_compare(args) -> int:
    base = load_config(args.config, args.overrides)
    files = list(args.metrics) or sorted(Path(base.out).rglob("seed_*.csv"))
    if args.seed is not None:
        files = [f for f in files if f.stem == f"seed_{args.seed}"]
    if not files:
        raise UsageError("no metrics files to compare")
    out = args.out or Path(base.out) / "report"
    summary = compare_report(files, out, base.moving_average_window)
    for row in summary:
        parts = [f"{k}={v:.4g}" if isinstance(v, float) else f"{k}={v}" for k, v in row.items()]
        print("  ".join(parts))
    print(out)
    return 0


COMMANDS = {"train-rl": cmd_train_rl, "train-opt": cmd_train_opt, "eval": cmd_eval,
            "compare": cmd_compare}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, InputError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NumericError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
