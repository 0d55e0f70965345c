"""Figure regeneration for simulation CSV artifacts."""

__version__ = "0.1.0"

from .render import KINDS, PlotSpec, SchemaError, Table, read_artifact_csv, render

__all__ = ["KINDS", "PlotSpec", "SchemaError", "Table", "read_artifact_csv",
           "render", "__version__"]
