from hashlib import sha256

import pytest

from copyspan.utils import checksum_file, nearest_rank, stable_hash, utf8_offset


def test_checksum_file(tmp_path):
    path = tmp_path / "doc.txt"
    path.write_bytes(b"this is content")
    assert checksum_file(path) == sha256(b"this is content").hexdigest()
    assert checksum_file(str(path)) == checksum_file(path)

    path.write_bytes(b"this is other content")
    assert checksum_file(path) == sha256(b"this is other content").hexdigest()


def test_stable_hash():
    assert stable_hash("mini-01") == stable_hash("mini-01")
    assert stable_hash("mini-01") != stable_hash("mini-02")
    assert 0 <= stable_hash("x") < 2**64


@pytest.mark.parametrize(
    "pct,expected", ((50, 3), (95, 5), (100, 5), (1, 1), (20, 1), (21, 2))
)
def test_nearest_rank(pct, expected):
    assert nearest_rank([5, 1, 4, 2, 3], pct) == expected


def test_nearest_rank_edges():
    assert nearest_rank([], 50) == 0
    with pytest.raises(ValueError):
        nearest_rank([1], 0)


def test_utf8_offset():
    assert utf8_offset("abc", 2) == 2
    assert utf8_offset("é語x", 2) == 5
