"""Frame-semantic parsing with tree-path features learned by a GCN."""

__version__ = "0.1.0"
