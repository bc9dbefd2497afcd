"""Learning partial weighted MAX-SAT models from contextual examples."""

__version__ = "0.1.0"
