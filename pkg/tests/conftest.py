import numpy as np
import pytest

from utils.benchmark import benchmark_rules, make_blobs
from utils.dataset import CATEGORICAL, NUMERIC, Attribute, Dataset, Schema
from utils.rule_parser import parse_rule_set


@pytest.fixture
def mixed_schema():
    return Schema(
        attributes=(
            Attribute("age", NUMERIC),
            Attribute("income", NUMERIC),
            Attribute("color", CATEGORICAL, ("red", "green", "blue")),
        ),
        label_name="label",
        labels=("no", "yes"),
    )


@pytest.fixture
def mixed_data(mixed_schema):
    return Dataset.from_records(
        mixed_schema,
        [
            (25.0, 30.0, "red", "no"),
            (35.0, 45.0, "green", "no"),
            (45.0, 60.0, "blue", "yes"),
            (55.0, 80.0, "red", "yes"),
            (65.0, 20.0, "green", "no"),
            (30.0, 90.0, "blue", "yes"),
            (50.0, 50.0, "red", "no"),
            (40.0, 70.0, "green", "yes"),
        ],
    )


@pytest.fixture
def line_schema():
    return Schema(
        attributes=(Attribute("x", NUMERIC),),
        label_name="class",
        labels=("a", "b"),
    )


@pytest.fixture
def line_data(line_schema):
    """x = 0..19; clase b para x ≥ 10"""
    x = np.arange(20, dtype=float)
    return Dataset(line_schema, x[:, None], (x >= 10).astype(int))


@pytest.fixture
def blobs():
    return make_blobs(200, seed=3)


@pytest.fixture
def blob_rules():
    return benchmark_rules()


@pytest.fixture
def parse(mixed_schema):
    def _parse(text, schema=None):
        return parse_rule_set(text, schema or mixed_schema)

    return _parse
