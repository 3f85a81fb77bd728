"""framelab: two-story frame FEM bench and graph message-passing surrogate."""

__version__ = "0.1.0"
