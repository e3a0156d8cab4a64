"""Traversability estimation from synthetic terrain: multi-hypothesis
semantic masks, variance-based confidence, depth-derived geometric risk and
conservative score fusion."""

__version__ = "0.1.0"
