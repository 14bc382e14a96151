"""Figure rendering for exported trajectory-optimization run data."""

from .data import PlotDataError, load_compare, load_run, load_trace
from .render import (
    build_convergence_figure,
    build_swingup_figure,
    render_convergence,
    render_swingup,
)

__version__ = "0.1.0"

__all__ = [
    "PlotDataError", "load_compare", "load_run", "load_trace",
    "build_convergence_figure", "build_swingup_figure",
    "render_convergence", "render_swingup",
]
