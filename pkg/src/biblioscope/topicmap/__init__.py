"""Keyword co-occurrence maps: network, clusters, layout and overlays."""
from .clustering import VOSClustering, cluster, partition_quality
from .io import read_map, write_map
from .layout import VOSLayout, layout
from .network import (
    CoocEdge, EmptyNetworkError, TermNetwork, TermNode, association_strength, build_network,
)
from .overlays import (
    UnknownCountryError, country_activity_overlay, country_submap, temporal_overlay,
)

__all__ = [
    "CoocEdge", "EmptyNetworkError", "TermNetwork", "TermNode", "UnknownCountryError",
    "VOSClustering", "VOSLayout", "association_strength", "build_network", "cluster",
    "country_activity_overlay", "country_submap", "layout", "partition_quality",
    "read_map", "temporal_overlay", "write_map",
]
