"""Shared text-output helpers."""


def csv_float(x: float) -> str:
    """Full-precision float field: 17 significant digits round-trips exactly."""
    return f"{float(x):.17g}"
