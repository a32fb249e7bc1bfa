"""Answer-acceptability prediction pipeline for Stack Exchange data dumps."""

__version__ = "0.1.0"
