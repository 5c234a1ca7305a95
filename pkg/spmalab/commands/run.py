"""
`run <config>`: one run per method and seed at the first eta and m of the config.
"""
import argparse

from spmalab.services.experiment_service import load_config, run_experiment
from spmalab.services.report_service import emit_report


def register(subparsers) -> None:
    parser = subparsers.add_parser("run", help="single run per method at the first eta / m of the config")
    parser.add_argument("config", help="experiment config (JSON)")
    parser.set_defaults(handler=handle)


def summarize(results) -> str:
    lines = [f"{'method':<18} {'eta':>8} {'m':>5} {'seed':>5} {'J(pi_T)':>14} {'subopt_inf':>12}"]
    for cell in results.cells:
        if not cell.ok:
            lines.append(f"{cell.key.method:<18} {cell.key.eta:>8.4g} {str(cell.key.m or '-'):>5} {cell.key.seed:>5}  failed: {cell.error}")
            continue
        last = cell.records[-1]
        lines.append(
            f"{cell.key.method:<18} {cell.key.eta:>8.4g} {str(cell.key.m or '-'):>5} {cell.key.seed:>5} {last.j_value:>14.8f} {last.subopt_inf:>12.4e}"
        )
    return "\n".join(lines)


def handle(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    cfg = cfg.copy(update={"eta_grid": cfg.eta_grid[:1], "inner_m": cfg.inner_m[:1]})
    results = run_experiment(cfg, threads=args.threads, seed_offset=args.seed_offset)
    emit_report(results, args.output_dir or cfg.output_dir or args.default_output_dir, svg=not args.no_svg)
    print(summarize(results))
    return 0
