"""BAC-NOMA resource allocation: rate models, LP reformulation and simulation."""

__version__ = "0.1.0"
