"""Comparison figures for qwqkd sweep and threshold outputs.

Pure read-and-draw: series come straight from the CSV files the ``qwqkd``
CLI emits; nothing numeric is recomputed here.
"""

__version__ = "0.1.0"

from .render import FigureSpec, RenderedFigure, load_figure_spec, render  # noqa: F401
