"""Renders experiment CSV output into the standard figure set."""

__version__ = "0.1.0"

from .render import (EmptyInput, FigureRecipe, PlotkitError, RenderReport,
                     SchemaMismatch, load_recipe, render)

__all__ = ["EmptyInput", "FigureRecipe", "PlotkitError", "RenderReport",
           "SchemaMismatch", "load_recipe", "render", "__version__"]
