from typing import Any

import pytest
from pydantic import Field

from copyspan import BaseModel


@pytest.fixture
def MyModel() -> type:
    class _MyModel(BaseModel):
        name: str
        copy_tokens: int = Field(alias="T_copy")
        extras: dict[str, Any]
        note: Any = None

    return _MyModel


@pytest.mark.parametrize("mode", ("python", "json"))
def test_model_dump(mode, MyModel):
    model = MyModel(name="foo", T_copy=3, extras={"span": [1, 2]})
    actual = model.model_dump(mode=mode)
    assert isinstance(actual, dict)
    assert actual["name"] == "foo"
    assert actual["T_copy"] == 3
    assert "note" not in actual


def test_populate_by_name(MyModel):
    assert MyModel(name="foo", copy_tokens=3, extras={}).copy_tokens == 3


def test_model_dump_json(MyModel):
    model = MyModel(name="foo", T_copy=3, extras={"b": 1, "a": "é"})
    actual = model.model_dump_json()
    assert actual == '{"T_copy":3,"extras":{"a":"é","b":1},"name":"foo"}'


def test_model_dump_json_is_stable(MyModel):
    first = MyModel(name="foo", T_copy=3, extras={"z": 1, "a": 2}).model_dump_json()
    second = MyModel(extras={"a": 2, "z": 1}, T_copy=3, name="foo").model_dump_json()
    assert first == second
