"""Detection and analysis of significantly overlapping communities."""

__version__ = "0.1.0"

from overlapcomm.graph import Graph, GraphStats, load_edge_list, stats  # noqa: E402
from overlapcomm.cover import Community, Cover, OverlapRecord  # noqa: E402
from overlapcomm.detect import DetectParams, detect  # noqa: E402

__all__ = [
    "__version__",
    "Community",
    "Cover",
    "DetectParams",
    "Graph",
    "GraphStats",
    "OverlapRecord",
    "detect",
    "load_edge_list",
    "stats",
]
