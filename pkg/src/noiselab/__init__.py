"""Label-noise laboratory: pseudo and randomized noisy datasets, robust training, learning-dynamics metrics."""

__version__ = "0.1.0"
