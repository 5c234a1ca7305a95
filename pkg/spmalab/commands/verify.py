import argparse

from spmalab.services.verify_service import SUITES, verify


def register(subparsers) -> None:
    parser = subparsers.add_parser("verify", help="run an acceptance suite; exit 1 on any failed check")
    parser.add_argument("suite", choices=SUITES)
    parser.set_defaults(handler=handle)


def handle(args: argparse.Namespace) -> int:
    return verify(args.suite)
