"""Local coloring algorithms for cuts in random regular graphs."""

__version__ = "0.1.0"
