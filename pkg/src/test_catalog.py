import pytest

from src.catalog import resolve_models, split_tokens
from src.testing import qubit_record
from src.errors import ConfigError
from src.likelihood import ExperimentRecord


@pytest.fixture
def six_blocks() -> ExperimentRecord:
    return qubit_record(("X", 60, 40), ("Y", 45, 55), ("Z", 52, 48), ("X", 40, 60), ("Y", 55, 45), ("Z", 50, 50))


@pytest.mark.parametrize(
    "text,expected",
    [
        ("standard,per-block", ["standard", "per-block"]),
        ("standard;mask:Y,Z@2", ["standard", "mask:Y,Z@2"]),
        (" split:3 , ", ["split:3"]),
    ],
)
def test_split_tokens(text: str, expected: list[str]) -> None:
    assert split_tokens(text) == expected


def test_standard_is_always_first(six_blocks: ExperimentRecord) -> None:
    specs = resolve_models("per-block,split:2", six_blocks)
    assert [s.name for s in specs] == ["standard", "per-block", "split:2"]
    assert specs[0].is_standard


def test_duplicates_are_dropped(six_blocks: ExperimentRecord) -> None:
    specs = resolve_models(["standard", "per-block", "per-block"], six_blocks)
    assert [s.name for s in specs] == ["standard", "per-block"]


def test_mask_token(six_blocks: ExperimentRecord) -> None:
    _, mask = resolve_models("standard;mask:z@3", six_blocks)
    assert mask.name == "mask:z@3"
    assert mask.shared == frozenset({"Z"})
    assert mask.summary() == "[0 0 1 1 2 2]"
    _, default = resolve_models(["mask:X,Y"], six_blocks)
    assert default.summary() == "[0 0 0 1 1 1]"


def test_per_setting_and_free_tokens(six_blocks: ExperimentRecord) -> None:
    _, per_setting, free = resolve_models("per-setting,free:Y", six_blocks)
    assert per_setting.summary() == "[0 1 2 0 1 2]"
    assert free.summary() == "[0 0 0 0 1 0]"


@pytest.mark.parametrize(
    "tokens",
    ["bogus", "split:0", "split:7", "split:two", "mask:Q", "mask:XX", "mask:Z@9", "free:XZ", "scan", ""],
)
def test_bad_tokens_are_config_errors(six_blocks: ExperimentRecord, tokens: str) -> None:
    with pytest.raises(ConfigError):
        resolve_models(tokens, six_blocks)


def test_free_observable_needs_a_measuring_block() -> None:
    record = qubit_record(("X", 5, 5), ("Y", 5, 5))
    with pytest.raises(ConfigError, match="free:Z"):
        resolve_models("free:Z", record)
