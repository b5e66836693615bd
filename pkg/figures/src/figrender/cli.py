"""Command line entry point: render_figures <panel> --in DIR --out FILE."""

import argparse
import sys

from .inputs import MissingInput, SchemaMismatch
from .panels import render


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="render_figures",
        description="Render one figure panel from a study output directory.")
    parser.add_argument("panel", choices=("heatmap", "curve", "rmse"),
                        help="which panel to render")
    parser.add_argument("--in", dest="in_dir", required=True, metavar="DIR",
                        help="study output directory (CSV files, manifest)")
    parser.add_argument("--out", required=True, metavar="FILE",
                        help="PNG file to write")
    args = parser.parse_args(argv)
    try:
        metadata = render(args.panel, args.in_dir, args.out)
    except MissingInput as err:
        print(f"error: {err}", file=sys.stderr)
        return 3
    except SchemaMismatch as err:
        print(f"error: {err}", file=sys.stderr)
        return 4
    print(f"wrote {args.out} (manifest {metadata['manifest-sha256'][:12]})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
