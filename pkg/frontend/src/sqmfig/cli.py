"""Command-line entry point: render figure specifications.

``sqmfig spec.json [spec2.json ...]`` loads each JSON figure
specification and writes ``<out>.png`` and ``<out>.svg`` next to it (or
under ``--out-dir``).  Exit codes: 0 success, 2 specification error,
3 rendering failure.  Failures print one JSON line
``{"error": {"type": ..., "message": ...}}`` to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys

from .figspec import SpecError, load_spec
from .render import render_figure


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sqmfig",
        description="render sqmlab outputs into PNG + SVG figures",
    )
    parser.add_argument("specs", nargs="+", metavar="SPEC.json",
                        help="figure specification file(s)")
    parser.add_argument("--out-dir", default=None,
                        help="directory for relative output basenames "
                             "(default: each spec's directory)")
    return parser


def _fail(kind: str, message: str, code: int) -> int:
    payload = {"error": {"type": kind, "message": message}}
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    for spec_path in args.specs:
        try:
            spec = load_spec(spec_path, out_dir=args.out_dir)
        except SpecError as exc:
            return _fail("spec", str(exc), 2)
        try:
            written = render_figure(spec)
        except Exception as exc:  # noqa: BLE001 - boundary of the process
            return _fail("render", f"{type(exc).__name__}: {exc}", 3)
        for path in written:
            print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
