import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from utils.dataset import CATEGORICAL, NUMERIC, Attribute, Dataset, Schema
from utils.errors import GenerationError, NeighborError
from utils.generation import (
    DistanceMetric,
    base_mixture_label,
    enforced_conditions,
    generate,
    nearest,
    neighbors_in_rule,
    synthesize_categorical,
    synthesize_numeric,
    synthetic_dataset,
)
from utils.relaxation import pre_select_bp
from utils.rule_parser import parse_rule_set
from utils.rules import FULL_INTERVAL, Interval, LabelDistribution, Predicate, predicate_interval
from utils.selection import select_random

# ── Distancia ───────────────────────────


def test_metric_normalizes_numeric_and_counts_categories(mixed_data):
    metric = DistanceMetric.fit(mixed_data)
    a, b = mixed_data.X[0], mixed_data.X[4]  # edad 25→65 (rango 40), ingreso 30→20 (rango 70), red→green
    expected = np.sqrt(1.0 + (10 / 70) ** 2 + 1.0)
    assert metric.distance(a, b) == pytest.approx(expected)


def test_constant_column_contributes_nothing(line_schema):
    d = Dataset(line_schema, [[3.0], [3.0]], [0, 1])
    assert DistanceMetric.fit(d).distance(d.X[0], d.X[1]) == 0.0


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 9), st.integers(0, 9), st.integers(0, 2)), min_size=3, max_size=12))
def test_metric_axioms(records):
    schema = Schema(
        (Attribute("p", NUMERIC), Attribute("q", NUMERIC), Attribute("c", CATEGORICAL, ("a", "b", "c"))),
        "y",
        ("n", "s"),
    )
    d = Dataset(schema, [list(r) for r in records], np.zeros(len(records), dtype=int))
    metric = DistanceMetric.fit(d)
    x, y, z = d.X[0], d.X[1], d.X[2]
    assert metric.distance(x, x) == 0.0
    assert metric.distance(x, y) == pytest.approx(metric.distance(y, x))
    assert metric.distance(x, z) <= metric.distance(x, y) + metric.distance(y, z) + 1e-12


def test_nearest_breaks_ties_by_index(line_schema):
    d = Dataset(line_schema, [[0.0], [1.0], [-1.0], [1.0], [5.0]], [0, 0, 0, 0, 1])
    metric = DistanceMetric.fit(d)
    assert nearest(metric, d, 0, np.arange(5), 3).tolist() == [1, 2, 3]


def test_neighbors_need_k_plus_one(blobs, blob_rules):
    small = blobs.take(range(4))
    (bp,) = pre_select_bp(small, blob_rules, k=5)
    with pytest.raises(NeighborError):
        neighbors_in_rule(bp, int(bp.member_indices[0]), 5, DistanceMetric.fit(small), small)


# ── Numéricos ───────────────────────────


def test_equality_condition_wins():
    rng = np.random.default_rng(0)
    assert synthesize_numeric(1.0, 9.0, [Predicate("x", "=", 4.0)], rng) == 4.0


def test_value_stays_on_the_segment():
    rng = np.random.default_rng(0)
    for _ in range(50):
        v = synthesize_numeric(2.0, 8.0, [Predicate("x", ">", 5.0)], rng)
        assert 5.0 < v <= 8.0


def test_empty_window_raises():
    with pytest.raises(GenerationError):
        synthesize_numeric(0.0, 1.0, [Predicate("x", ">", 3.0), Predicate("x", "<", 2.0)], np.random.default_rng(0))


def test_falls_back_to_observed_range():
    rng = np.random.default_rng(0)
    v = synthesize_numeric(0.0, 1.0, [Predicate("x", ">", 5.0)], rng, observed=(0.0, 10.0))
    assert 5.0 < v <= 10.0


def test_falls_back_to_nearest_endpoint():
    rng = np.random.default_rng(0)
    assert synthesize_numeric(0.0, 1.0, [Predicate("x", ">=", 5.0)], rng, observed=(0.0, 1.0)) == 5.0
    v = synthesize_numeric(0.0, 1.0, [Predicate("x", ">", 5.0)], rng, observed=(0.0, 1.0))
    assert v > 5.0
    assert v == pytest.approx(5.0)


def test_open_bound_on_a_constant_large_column():
    rng = np.random.default_rng(0)
    above = synthesize_numeric(1e5, 1e5, [Predicate("x", ">", 1e5)], rng, observed=(1e5, 1e5))
    below = synthesize_numeric(1e5, 1e5, [Predicate("x", "<", 1e5)], rng, observed=(1e5, 1e5))
    assert above > 1e5 and Predicate("x", ">", 1e5).holds(above)
    assert below < 1e5 and Predicate("x", "<", 1e5).holds(below)


def test_open_window_on_a_large_segment_stays_inside():
    rng = np.random.default_rng(0)
    conditions = [Predicate("x", ">", 1e5), Predicate("x", "<", 1e5 + 1e-6)]
    v = synthesize_numeric(1e5, 1e5 + 1e-6, conditions, rng, observed=(1e5, 1e5 + 1e-6))
    assert all(c.holds(v) for c in conditions)


numeric_conditions = st.lists(
    st.builds(Predicate, st.just("x"), st.sampled_from(("<", "<=", ">", ">=")), st.integers(-10, 10).map(float)),
    min_size=1,
    max_size=3,
)
halves = st.integers(-24, 24).map(lambda v: v / 2)


@settings(max_examples=300, deadline=None)
@given(halves, halves, numeric_conditions)
def test_generated_value_satisfies_conditions(base, nbr, conditions):
    window = FULL_INTERVAL
    for c in conditions:
        window = window.intersect(predicate_interval(c))
    assume(not window.is_empty)
    v = synthesize_numeric(base, nbr, conditions, np.random.default_rng(0))
    assert all(c.holds(v) for c in conditions)
    lo, hi = min(base, nbr), max(base, nbr)
    if not Interval(lo, True, hi, True).intersect(window).is_empty:
        assert lo <= v <= hi


# ── Categóricos ─────────────────────────


def test_majority_vote(mixed_schema):
    attr = mixed_schema.attribute("color")
    assert synthesize_categorical(["blue", "red", "blue"], [], attr) == "blue"


def test_vote_ties_follow_declared_order(mixed_schema):
    attr = mixed_schema.attribute("color")
    assert synthesize_categorical(["blue", "green"], [], attr) == "green"


def test_vote_respects_conditions(mixed_schema):
    attr = mixed_schema.attribute("color")
    conds = [Predicate("color", "!=", "blue")]
    assert synthesize_categorical(["blue", "blue", "red"], conds, attr) == "red"


def test_vote_falls_back_to_schema_order(mixed_schema):
    attr = mixed_schema.attribute("color")
    conds = [Predicate("color", "=", "green")]
    assert synthesize_categorical(["blue", "red"], conds, attr) == "green"


# ── Exclusiones ─────────────────────────


def test_exclusion_negation_prefers_what_the_base_satisfies(parse, mixed_schema, mixed_data):
    rule = parse('IF age > 20 AND NOT (color = "red" AND income > 50) THEN class = "yes"').rules[0]
    red_poor = mixed_data.instance(0)  # red, 30
    blue_rich = mixed_data.instance(2)  # blue, 60
    assert enforced_conditions(rule, red_poor)[-1] == Predicate("income", "<=", 50.0)
    assert enforced_conditions(rule, blue_rich)[-1] == Predicate("color", "!=", "red")


def test_unavoidable_exclusion_raises(parse, mixed_data):
    rule = parse('IF income > 60 AND NOT (income > 50) THEN class = "yes"').rules[0]
    with pytest.raises(GenerationError):
        enforced_conditions(rule, mixed_data.instance(0))


# ── Generación ──────────────────────────


def _plan(blobs, rules, eta=30, seed=0):
    bps = pre_select_bp(blobs, rules, k=5)
    return bps, select_random(bps, eta, np.random.default_rng(seed))


def test_generated_instances_satisfy_the_rule(blobs, blob_rules):
    bps, plan = _plan(blobs, blob_rules)
    out = generate(bps, plan, 5, np.random.default_rng(1), blobs)
    assert len(out) == len(plan)
    rule = blob_rules.rules[0]
    for s in out:
        assert rule.satisfies(s.instance)
        assert s.label == "neg"
        assert s.provenance.is_synthetic
        assert s.provenance.rule_id == "R1"


def test_generation_is_deterministic(blobs, blob_rules):
    bps, plan = _plan(blobs, blob_rules)
    a = synthetic_dataset(blobs, generate(bps, plan, 5, np.random.default_rng(7), blobs))
    b = synthetic_dataset(blobs, generate(bps, plan, 5, np.random.default_rng(7), blobs))
    np.testing.assert_array_equal(a.X, b.X)
    assert a.provenance == b.provenance


def test_generation_from_relaxed_population(line_data, line_schema):
    frs = parse_rule_set('IF x > 18.5 THEN class = "a"', line_schema)  # sólo la fila 19
    bps = pre_select_bp(line_data, frs, k=3)
    assert bps[0].relaxed
    plan = select_random(bps, 10, np.random.default_rng(0))
    out = generate(bps, plan, 3, np.random.default_rng(0), line_data)
    assert all(s.instance["x"] > 18.5 for s in out)


def test_probabilistic_labels_come_from_the_support(blobs):
    frs = parse_rule_set('IF x1 > 0 THEN class ~ {"neg": 0.5, "pos": 0.5}', blobs.schema)
    bps = pre_select_bp(blobs, frs, k=5)
    plan = select_random(bps, 200, np.random.default_rng(0))
    labels = [s.label for s in generate(bps, plan, 5, np.random.default_rng(0), blobs)]
    assert set(labels) == {"neg", "pos"}


def test_base_mixture_label():
    dist = LabelDistribution.delta("a")
    rng = np.random.default_rng(0)
    assert base_mixture_label(dist, "b", ("a", "b", "c"), 1.0, rng) == "a"
    assert base_mixture_label(dist, "b", ("a", "b", "c"), 0.0, rng) == "b"
    assert base_mixture_label(dist, "a", ("a", "b", "c"), 0.0, rng) in ("b", "c")


@pytest.mark.parametrize("p", [0.4, 0.6, 0.8, 1.0])
def test_rule_probability_sets_the_label_frequency(blobs, p):
    text = 'IF x1 > 0 THEN class = "neg"' if p == 1.0 else f'IF x1 > 0 THEN class ~ {{"neg": {p}, "pos": {1 - p:.1f}}}'
    frs = parse_rule_set(text, blobs.schema)
    bps = pre_select_bp(blobs, frs, k=5)
    plan = select_random(bps, 2000, np.random.default_rng(11))
    labels = [s.label for s in generate(bps, plan, 5, np.random.default_rng(12), blobs)]
    assert len(labels) == 2000
    assert abs(labels.count("neg") / len(labels) - p) <= 0.05


@pytest.mark.parametrize("p", [0.4, 0.6, 0.8, 1.0])
def test_base_mixture_frequency(p):
    dist = LabelDistribution.delta("a")
    rng = np.random.default_rng(5)
    draws = [base_mixture_label(dist, "b", ("a", "b"), p, rng) for _ in range(4000)]
    assert abs(draws.count("a") / len(draws) - p) <= 0.05
    assert set(draws) <= {"a", "b"}
