"""Zero-shot video moment retrieval from sketched multi-object trajectory queries."""

__version__ = "0.1.0"

from sketchmatch.geometry import (
    BoundingBox,
    ClipWindow,
    FeatureGrid,
    GeometryError,
    QueryObject,
    QuerySegment,
    Trajectory,
    VisualQuery,
    normalize,
    query_to_grid,
    resample,
    temporal_iou,
    window_to_grid,
)

__all__ = [
    "BoundingBox",
    "ClipWindow",
    "FeatureGrid",
    "GeometryError",
    "QueryObject",
    "QuerySegment",
    "Trajectory",
    "VisualQuery",
    "normalize",
    "query_to_grid",
    "resample",
    "temporal_iou",
    "window_to_grid",
    "__version__",
]
