"""Mean-field spin fluctuations: exact laws, Stein bounds, rate experiments."""

__version__ = "0.1.0"
