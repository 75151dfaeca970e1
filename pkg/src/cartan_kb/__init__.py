"""Exact integral-matrix tools for Cartan and decomposition matrices of blocks."""

from importlib.resources import files

__version__ = "0.1.0"


def fixture_path(name: str):
    """Path to a bundled data fixture."""
    return files(__name__) / "data" / name
