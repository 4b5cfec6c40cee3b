"""Online scheduling with redundant execution and opportunistic checkpointing."""

__version__ = "0.1.0"
