"""Small shared helpers."""

from __future__ import annotations


def fmt(x) -> str:
    """Render a float with 9 significant digits for CSV output."""
    return f"{float(x):.9g}"
