"""Figure rendering for sqmlab CSV/JSON outputs.

The package turns the delimited artifacts written by the ``sqmlab`` CLI
into PNG + SVG figures.  It communicates with the simulation package
exclusively through files: a JSON figure specification names a figure
kind and the input CSV/JSON paths, and :func:`render_figure` writes the
images.  Rendering is deterministic — the same specification and inputs
reproduce both files byte for byte.
"""

from .figspec import FIGURE_KINDS, FigureSpec, SpecError, load_spec
from .render import render_figure

__version__ = "0.1.0"

__all__ = [
    "FIGURE_KINDS",
    "FigureSpec",
    "SpecError",
    "load_spec",
    "render_figure",
    "__version__",
]
