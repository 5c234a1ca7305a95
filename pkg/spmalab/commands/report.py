"""
`report <results-dir>`: rebuild summary.md and the chart from the CSVs of an earlier run.
"""
import argparse

from spmalab.services.report_service import emit_report, load_results


def register(subparsers) -> None:
    parser = subparsers.add_parser("report", help="regenerate summary and chart from a results directory")
    parser.add_argument("results_dir")
    parser.set_defaults(handler=handle)


def handle(args: argparse.Namespace) -> int:
    results = load_results(args.results_dir)
    emit_report(results, args.output_dir or args.results_dir, svg=not args.no_svg, write_csv=args.output_dir is not None)
    return 0
