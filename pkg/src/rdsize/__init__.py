"""Population size estimation from respondent-driven sampling data."""

__version__ = "0.1.0"
