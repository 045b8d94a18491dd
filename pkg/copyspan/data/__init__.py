"""
Fixtures shipped with the package: measured kernel curves and per-op costs,
per-corpus aggregates, the mini regression corpus and two toy vocabularies.
"""

from pathlib import Path

DATA_DIR = Path(__file__).parent


def fixture_path(name: str) -> Path:
    """
    Path of a bundled fixture, e.g. ``kernel_7b.json`` or ``vocab/fragmenting.vocab``.

    Raises:
        FileNotFoundError: When no such fixture ships with the package.
    """
    path = DATA_DIR / name
    if not path.is_file():
        raise FileNotFoundError(f"No bundled fixture named '{name}'.")

    return path
