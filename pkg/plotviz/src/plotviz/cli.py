"""plotviz command line: regenerate one figure from one CSV artifact."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .render import KINDS, PlotSpec, SchemaError, render


def main(argv=None) -> int:
    p = argparse.ArgumentParser(prog="plotviz",
                                description="regenerate figure-style plots "
                                            "from simulation CSV artifacts")
    p.add_argument("kind", choices=KINDS)
    p.add_argument("--in", dest="input_csv", required=True, type=Path)
    p.add_argument("--out", dest="output", required=True, type=Path)
    p.add_argument("--dpi", type=int, default=160)
    args = p.parse_args(argv)
    try:
        spec = PlotSpec(input_csv=args.input_csv, kind=args.kind,
                        output=args.output, dpi=args.dpi)
        out = render(spec)
    except (SchemaError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
