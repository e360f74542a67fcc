"""
Benchmark sintético 2-D: dos nubes gaussianas y una regla que invierte la
clase en un cuadrante.
"""

from pathlib import Path
from typing import Union

import numpy as np

from utils.dataset import NUMERIC, Attribute, Dataset, Schema, save_dataset, save_schema
from utils.rule_parser import parse_rule_set
from utils.rng import derive
from utils.rules import FeedbackRuleSet

BENCHMARK_SCHEMA = Schema(
    attributes=(Attribute("x1", NUMERIC), Attribute("x2", NUMERIC)),
    label_name="class",
    labels=("neg", "pos"),
)

BENCHMARK_RULES = 'R1: IF x1 > 0 AND x2 > 1 THEN class = "neg"\n'

CENTRES = np.array([[-1.5, 0.0], [1.5, 0.0]])


def make_blobs(n: int = 400, seed: int = 0, spread: float = 1.0) -> Dataset:
    """n filas, mitad por clase, centradas en (∓1.5, 0)"""
    rng = derive(seed, "benchmark")
    y = np.repeat([0, 1], [n // 2, n - n // 2])
    X = CENTRES[y] + rng.normal(scale=spread, size=(n, 2))
    return Dataset(BENCHMARK_SCHEMA, np.round(X, 6), y)


def benchmark_rules() -> FeedbackRuleSet:
    return parse_rule_set(BENCHMARK_RULES, BENCHMARK_SCHEMA)


def write_benchmark(out_dir: Union[str, Path], n: int = 400, seed: int = 0) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "data": out / "blobs.csv",
        "schema": out / "schema.json",
        "rules": out / "rules.txt",
    }
    save_dataset(make_blobs(n, seed), paths["data"], with_provenance=False)
    save_schema(BENCHMARK_SCHEMA, paths["schema"])
    paths["rules"].write_text(BENCHMARK_RULES, encoding="utf-8")
    return paths
