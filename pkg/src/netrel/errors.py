class DataError(ValueError):
    """Malformed or inconsistent input data (files, vectors, dimensions)."""


class NumericalError(RuntimeError):
    """A numerical procedure failed, e.g. training produced a NaN loss."""
