"""
`grid <config>`: the full (method x eta x m x seed) sweep with AUC-based eta selection.
"""
import argparse

from spmalab.commands.run import summarize
from spmalab.services.experiment_service import best_eta, load_config, run_experiment
from spmalab.services.report_service import emit_report


def register(subparsers) -> None:
    parser = subparsers.add_parser("grid", help="sweep every eta, m and seed of the config")
    parser.add_argument("config", help="experiment config (JSON)")
    parser.set_defaults(handler=handle)


def handle(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    results = run_experiment(cfg, threads=args.threads, seed_offset=args.seed_offset)
    emit_report(results, args.output_dir or cfg.output_dir or args.default_output_dir, svg=not args.no_svg)
    print(summarize(results))
    for (method, m), (eta, score) in sorted(best_eta(results).items(), key=lambda kv: (kv[0][0], kv[0][1] or -1)):
        print(f"best eta for {method}{'' if m is None else f' (m={m})'}: {eta:g} (AUC {score:.6g})")
    return 0
