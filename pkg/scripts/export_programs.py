#!/usr/bin/env python3
"""Write the benchmark corpus out as .prob files for use with the CLI."""
import argparse
import pathlib
import sys

from flowsmc import benchmarks

DEFAULTS = [
    ("coin", (0.36,)),
    ("coin", (0.1,)),
    ("obsLoop", (3, 10)),
    ("condDemo", ()),
    ("unifCd", (10,)),
    ("unifCd", (20,)),
    ("unifCd2", (10,)),
    ("poisCd", (6, 20)),
    ("poisCd2", (6, 20)),
    ("geomIt", (0.5, 5)),
    ("geomIt2", (0.5, 5)),
    ("mixed", (0,)),
    ("mixed", (5,)),
]


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("outdir", nargs="?", default="programs")
    args = parser.parse_args(argv)
    outdir = pathlib.Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    for name, params in DEFAULTS:
        tag = "_".join(str(p).replace(".", "p") for p in params)
        path = outdir / (f"{name}_{tag}.prob" if tag else f"{name}.prob")
        path.write_text(benchmarks.source(name, *params), encoding="utf-8")
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
