"""Figure regeneration for serene-sim sweep outputs."""

from .data import Run, SchemaError, load_runs
from .figures import FIGURES, FigureSpec, render, render_all

__version__ = "0.1.0"

__all__ = [
    "Run",
    "SchemaError",
    "load_runs",
    "FIGURES",
    "FigureSpec",
    "render",
    "render_all",
    "__version__",
]
