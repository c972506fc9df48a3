"""Generalized Randers geometry: jets, Cartan-frame tensors, closed forms and checks."""

from .catalog import CATALOG, CatalogEntry, get_entry
from .expr import EvalContext, parse_expression
from .geometry import FinslerFrame, MetricField, SlitPoint
from .randers import OneFormField, RandersBundle, StarQuantities

__version__ = "0.1.0"

__all__ = ["CATALOG", "CatalogEntry", "EvalContext", "FinslerFrame", "MetricField",
           "OneFormField", "RandersBundle", "SlitPoint", "StarQuantities", "get_entry",
           "parse_expression"]
