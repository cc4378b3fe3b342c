"""ccmerge: identify and merge common work across batched code call conditions."""

__version__ = "0.1.0"
