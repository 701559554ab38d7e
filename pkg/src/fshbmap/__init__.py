"""Fast sparse-view tomographic reconstruction under a compound-Gaussian prior."""

__version__ = "0.1.0"
