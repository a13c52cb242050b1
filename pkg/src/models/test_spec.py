import pytest
from pydantic import ValidationError

from src.testing import qubit_record
from src.models.spec import ModelSpec


def test_standard_and_per_block() -> None:
    assert ModelSpec.standard(4).is_standard
    per_block = ModelSpec.per_block(4)
    assert per_block.groups == [0, 1, 2, 3]
    assert per_block.summary() == "[0 1 2 3]"


def test_time_segments_are_consecutive() -> None:
    spec = ModelSpec.time_segments(6, 2)
    assert spec.summary() == "[0 0 0 1 1 1]"
    assert spec.name == "split:2"
    assert ModelSpec.time_segments(7, 3).summary() == "[0 0 0 1 1 2 2]"


def test_per_setting_groups_repeated_settings() -> None:
    record = qubit_record(("X", 1, 1), ("Y", 1, 1), ("Z", 1, 1), ("X", 1, 1), ("Y", 1, 1), ("Z", 1, 1))
    assert ModelSpec.per_setting(record).summary() == "[0 1 2 0 1 2]"


def test_free_observable_gives_each_measuring_block_its_own_group() -> None:
    record = qubit_record(("X", 1, 1), ("Y", 1, 1), ("X", 1, 1))
    spec = ModelSpec.free_observable(record, "X")
    assert spec.summary() == "[0 0 1]"
    assert spec.shared == frozenset({"Y", "Z"})


def test_grouping_must_cover_every_block() -> None:
    with pytest.raises(ValidationError):
        ModelSpec(name="gap", grouping={0: 0, 2: 1})
    with pytest.raises(ValidationError):
        ModelSpec(name="empty", grouping={})


def test_prediction_group_defaults_to_first() -> None:
    spec = ModelSpec(name="late", grouping={0: 5, 1: 3})
    assert spec.prediction_group == 5
    assert ModelSpec(name="late", grouping={0: 5, 1: 3}, predictive_group=3).prediction_group == 3
    with pytest.raises(ValidationError):
        ModelSpec(name="bad", grouping={0: 0}, predictive_group=1)
