"""XY model under quenched disorder: graphs, samplers, exact oracles."""

__version__ = "0.1.0"
