"""Command line for the archive-to-CSV conversion."""

from __future__ import annotations

import argparse
import sys

from . import ArchiveError, ArchiveManifest, convert


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="ihdp-convert",
        description="Convert IHDP100 train/test npz archives to per-realization CSVs")
    parser.add_argument("--train", required=True, help="train archive (npz)")
    parser.add_argument("--test", required=True, help="test archive (npz)")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--realizations", type=int, default=100,
                        help="realizations expected on the last array axis")
    args = parser.parse_args(argv)

    manifest = ArchiveManifest(args.train, args.test, n_realizations=args.realizations)
    try:
        written = convert(args.train, args.test, args.out, manifest=manifest)
    except (ArchiveError, FileNotFoundError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {len(written)} files to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
