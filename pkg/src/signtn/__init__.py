"""Sign structure and contraction hardness of random tensor networks."""

__version__ = "0.1.0"
