from .algorithm import build_csr, detect_communities, leiden_rounds, modularity, project_level
from .backend import BACKEND
from .structures import CommunityHierarchy, LeidenConfig, Partition, WeightedGraph

__all__ = [
    "BACKEND",
    "CommunityHierarchy",
    "LeidenConfig",
    "Partition",
    "WeightedGraph",
    "build_csr",
    "detect_communities",
    "leiden_rounds",
    "modularity",
    "project_level",
]
