from hyperfill.domain.models import (
    BesovParams,
    BoundaryFunction,
    Corpus,
    ExponentEstimates,
    ExtensionResult,
    FillingGraph,
    FillingParams,
    GraphFunction,
    Hull,
    LiftedMeasure,
    Net,
    PartitionOfUnity,
    PointCloudSpace,
    ReportTable,
    TraceResult,
    UniformizedGraph,
)
from hyperfill.domain.rules import HypothesisError, MetricAxiomError, ValidationError

__all__ = [
    "BesovParams",
    "BoundaryFunction",
    "Corpus",
    "ExponentEstimates",
    "ExtensionResult",
    "FillingGraph",
    "FillingParams",
    "GraphFunction",
    "Hull",
    "HypothesisError",
    "LiftedMeasure",
    "MetricAxiomError",
    "Net",
    "PartitionOfUnity",
    "PointCloudSpace",
    "ReportTable",
    "TraceResult",
    "UniformizedGraph",
    "ValidationError",
]
