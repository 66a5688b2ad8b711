"""Render figures from a completed pipeline output directory.

`pavl-plots render --in results/ --out figures/ [--only ID] [--format svg]`

Figures render sequentially; a figure whose inputs are missing or
insufficient is skipped with a warning. The command fails only when
nothing could be rendered (exit 1) or on usage errors (exit 2).
"""

import argparse
import os
import sys

import matplotlib.pyplot as plt

from . import __version__
from .figures import FIGURE_IDS, SkipFigure, build
from .io import MissingInputError

EXIT_OK = 0
EXIT_ALL_FAILED = 1
EXIT_USAGE = 2


def render_one(figure_id, input_dir, output_path):
    """Render a single figure to output_path; format follows the suffix."""
    fig = build(figure_id, input_dir)
    try:
        fig.savefig(output_path)
    finally:
        plt.close(fig)
    return output_path


def render_all(input_dir, output_dir, image_format="svg", only=None):
    """Render every figure (or just `only`); returns (rendered, skipped)."""
    ids = [only] if only else list(FIGURE_IDS)
    os.makedirs(output_dir, exist_ok=True)
    rendered, skipped = [], []
    for figure_id in ids:
        target = os.path.join(output_dir, figure_id + "." + image_format)
        try:
            rendered.append(render_one(figure_id, input_dir, target))
        except (MissingInputError, SkipFigure) as exc:
            print("warning: skipped %s: %s" % (figure_id, exc),
                  file=sys.stderr)
            skipped.append(figure_id)
    return rendered, skipped


def build_parser():
    parser = argparse.ArgumentParser(
        prog="pavl-plots", description="figure generation for pavl outputs")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    render = sub.add_parser("render", help="render the standard figure set")
    render.add_argument("--in", dest="input_dir", required=True,
                        help="pipeline output directory")
    render.add_argument("--out", dest="output_dir", required=True,
                        help="directory for the image files")
    render.add_argument("--only", default=None, metavar="FIGURE_ID",
                        help="render a single figure (one of: %s)"
                             % ", ".join(FIGURE_IDS))
    render.add_argument("--format", default="svg", choices=("svg", "png"),
                        help="image format (default svg)")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.only is not None and args.only not in FIGURE_IDS:
        print("error: unknown figure id %r" % args.only, file=sys.stderr)
        return EXIT_USAGE
    if not os.path.isdir(args.input_dir):
        print("error: input directory %s does not exist" % args.input_dir,
              file=sys.stderr)
        return EXIT_USAGE
    rendered, skipped = render_all(args.input_dir, args.output_dir,
                                   image_format=args.format, only=args.only)
    print("rendered %d figure(s), skipped %d" % (len(rendered), len(skipped)))
    if not rendered:
        return EXIT_ALL_FAILED
    return EXIT_OK


def entrypoint():
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
