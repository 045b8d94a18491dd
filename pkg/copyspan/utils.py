import math
from collections.abc import Sequence
from hashlib import blake2b, sha256
from pathlib import Path
from typing import Union


def checksum_file(path: Union[Path, str]) -> str:
    """
    The sha256 hex digest of a file, used to fingerprint report inputs.
    """
    return sha256(Path(path).read_bytes()).hexdigest()


def stable_hash(value: str) -> int:
    """
    A 64-bit hash of ``value`` that, unlike ``hash()``, does not change between
    interpreter runs.
    """
    return int.from_bytes(blake2b(value.encode("utf8"), digest_size=8).digest(), "big")


def nearest_rank(values: Sequence[Union[int, float]], pct: float) -> Union[int, float]:
    """
    Nearest-rank percentile: the smallest value such that at least ``pct`` percent
    of the data is less than or equal to it.

    Args:
        values (Sequence): The observations, in any order.
        pct (float): Percentile in ``(0, 100]``.

    Returns:
        The percentile value, or ``0`` for an empty sequence.
    """
    if not values:
        return 0

    if not 0 < pct <= 100:
        raise ValueError(f"Percentile must be in (0, 100], got '{pct}'.")

    ordered = sorted(values)
    rank = math.ceil(pct / 100 * len(ordered))
    return ordered[max(rank, 1) - 1]


def utf8_offset(text: str, index: int) -> int:
    """
    Convert a character index into ``text`` to a UTF-8 byte offset.
    """
    return len(text[:index].encode("utf8", "surrogateescape"))


__all__ = [
    "checksum_file",
    "nearest_rank",
    "stable_hash",
    "utf8_offset",
]
