"""conserva: finite-volume conservation workbench."""

__version__ = "0.3.0"
