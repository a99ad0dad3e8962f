"""Spectral view augmentations and contrastive pre-training for graph encoders."""
from specaug.graph import Graph, from_edge_pairs
from specaug.kernels import backend_name

__version__ = "0.1.0"

__all__ = ["Graph", "from_edge_pairs", "backend_name", "__version__"]
