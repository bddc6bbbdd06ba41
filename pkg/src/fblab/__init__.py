"""Grid laboratory for the vectorial one-phase free boundary problem."""

__version__ = "0.1.0"
