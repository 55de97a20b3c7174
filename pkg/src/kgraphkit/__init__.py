"""Higher-rank graph combinatorics and finite-dimensional operator checks."""

from .core import (
    Degree,
    DegreeOutOfRange,
    KGraph,
    KGraphError,
    NotComposable,
    ParseError,
    Path,
    SkeletonEdge,
    Square,
    ValidationError,
    Violation,
    compose,
    degrees_up_to,
    kgraph_to_dict,
    make_bouquet,
    make_cycle,
    make_omega,
    omega_path,
    paths_of_degree,
    paths_up_to_degree,
    segment,
    validate_presentation,
    vertex_at,
)

__version__ = "0.1.0"

__all__ = [
    "Degree",
    "DegreeOutOfRange",
    "KGraph",
    "KGraphError",
    "NotComposable",
    "ParseError",
    "Path",
    "SkeletonEdge",
    "Square",
    "ValidationError",
    "Violation",
    "compose",
    "degrees_up_to",
    "kgraph_to_dict",
    "make_bouquet",
    "make_cycle",
    "make_omega",
    "omega_path",
    "paths_of_degree",
    "paths_up_to_degree",
    "segment",
    "validate_presentation",
    "vertex_at",
    "__version__",
]
