from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from utils.dataset import CATEGORICAL, NUMERIC, Attribute, Dataset, Schema
from utils.relaxation import build_base_population, pre_select_bp, relax_rule
from utils.rule_parser import parse_rule_set
from utils.rules import Clause, FeedbackRule, LabelDistribution, Predicate, merge_overlapping

PAIR_SCHEMA = Schema((Attribute("a", NUMERIC), Attribute("b", NUMERIC)), "class", ("n", "p"))


@pytest.fixture
def diagonal():
    """a = b = i para i en 0..19"""
    v = np.arange(20, dtype=float)
    return Dataset(PAIR_SCHEMA, np.column_stack([v, v]), (v >= 10).astype(int))


def _rule(text, schema=PAIR_SCHEMA):
    return parse_rule_set(text, schema).rules[0]


def test_enough_coverage_is_left_alone(diagonal):
    rule = _rule('IF a < 8 THEN class = "p"')
    r = relax_rule(rule, diagonal, 6)
    assert not r.relaxed
    assert r.indices.tolist() == list(range(8))
    assert r.clause == rule.clause


def test_greedy_keeps_the_condition_with_more_support(diagonal):
    # a < 10 cubre 10 filas, b > 16 cubre 3 y juntas ninguna
    rule = _rule('IF a < 10 AND b > 16 THEN class = "p"')
    r = relax_rule(rule, diagonal, 6)
    assert r.relaxed
    assert r.clause == Clause((Predicate("a", "<", 10.0),))
    assert len(r.indices) == 10
    assert r.levels == (10,)


def test_everything_deleted_covers_all_rows(diagonal):
    rule = _rule('IF a < 2 AND b < 1 THEN class = "p"')
    r = relax_rule(rule, diagonal, 50)
    assert r.clause.is_empty
    assert len(r.indices) == len(diagonal)
    assert r.deletions == 2


def test_tie_deletes_later_condition(diagonal):
    # borrar cualquiera de las dos deja 5 filas
    rule = _rule('IF a < 5 AND b > 14 THEN class = "p"')
    r = relax_rule(rule, diagonal, 3)
    assert r.clause == Clause((Predicate("a", "<", 5.0),))


def test_exclusions_stop_counting_once_relaxed(diagonal):
    rule = _rule('IF a < 3 AND b > 15 AND NOT (a > 100) THEN class = "p"')
    r = relax_rule(rule, diagonal, 4)
    assert r.relaxed
    assert len(r.indices) == 4  # b > 15


def test_l_must_be_positive(diagonal):
    with pytest.raises(ValueError):
        relax_rule(_rule('IF a < 3 THEN class = "p"'), diagonal, 0)


# ── Oráculo exhaustivo ──────────────────

MIX_SCHEMA = Schema(
    (Attribute("u", NUMERIC), Attribute("v", NUMERIC), Attribute("c", CATEGORICAL, ("x", "y", "z"))),
    "class",
    ("n", "p"),
)
rows = st.lists(
    st.tuples(st.integers(0, 4), st.integers(0, 4), st.sampled_from(("x", "y", "z"))),
    min_size=1,
    max_size=15,
)
predicates = st.one_of(
    st.builds(Predicate, st.sampled_from(("u", "v")), st.sampled_from(("<", "<=", ">", ">=", "=")),
              st.integers(0, 4).map(float)),
    st.builds(Predicate, st.just("c"), st.sampled_from(("=", "!=")), st.sampled_from(("x", "y", "z"))),
)


def _oracle_levels(clause: Clause, d: Dataset, L: int):
    """Por nivel, la mejor cobertura entre todos los subconjuntos con un borrado más"""
    kept = tuple(range(len(clause)))
    levels = []
    while kept:
        best_cov, best_kept, best_deleted = -1, None, -1
        for subset in combinations(kept, len(kept) - 1):
            cov = int(Clause(tuple(clause.predicates[i] for i in subset)).mask(d).sum())
            deleted = next(i for i in kept if i not in subset)
            if cov > best_cov or (cov == best_cov and deleted > best_deleted):
                best_cov, best_kept, best_deleted = cov, subset, deleted
        kept = best_kept
        levels.append(best_cov)
        if best_cov >= L:
            break
    return levels, kept


@settings(max_examples=100, deadline=None)
@given(rows, st.lists(predicates, min_size=1, max_size=4), st.integers(1, 10))
def test_relaxation_matches_exhaustive_search(records, preds, L):
    d = Dataset(
        MIX_SCHEMA,
        [[u, v, ("x", "y", "z").index(c)] for u, v, c in records],
        np.zeros(len(records), dtype=int),
    )
    rule = FeedbackRule("R", Clause(tuple(preds)), LabelDistribution.delta("p"))
    r = relax_rule(rule, d, L)
    full = int(rule.mask(d).sum())
    if full >= L:
        assert not r.relaxed
        return
    levels, kept = _oracle_levels(rule.clause, d, L)
    assert list(r.levels) == levels
    assert r.clause == Clause(tuple(rule.clause.predicates[i] for i in kept))
    assert all(a <= b for a, b in zip(levels, levels[1:]))
    assert len(r.indices) >= min(L, len(d))


# ── Poblaciones base ────────────────────


def test_pre_select_uses_k_plus_one(diagonal):
    frs = parse_rule_set('IF a < 20 THEN class = "p"\nIF a > 17 THEN class = "n"', PAIR_SCHEMA)
    bps = pre_select_bp(diagonal, frs, k=5)
    assert [bp.relaxed for bp in bps] == [False, True]
    assert len(bps[0]) == 20
    assert len(bps[1]) == 20  # la única condición se borra


def test_tiny_dataset_takes_everything(diagonal):
    small = diagonal.take([0, 1, 2, 3])
    frs = parse_rule_set('IF a < 1 THEN class = "p"', PAIR_SCHEMA)
    (bp,) = pre_select_bp(small, frs, k=5)
    assert bp.relaxed
    assert sorted(bp.member_indices.tolist()) == [0, 1, 2, 3]


def test_group_population_is_the_union(diagonal):
    frs = merge_overlapping(
        parse_rule_set('IF a < 4 THEN class = "p"\nIF a < 6 AND b > 2 THEN class = "p"', PAIR_SCHEMA)
    )
    bp = build_base_population(frs.rules[0], diagonal, 6)
    assert not bp.relaxed
    assert bp.member_indices.tolist() == [0, 1, 2, 3, 4, 5]
    assert bp.target_rule(diagonal.instance(4)).id == "R2"
    assert bp.target_rule(diagonal.instance(0)).id == "R1"


def test_group_relaxes_the_cheapest_member(diagonal):
    frs = merge_overlapping(
        parse_rule_set(
            'IF a < 1 AND b < 1 THEN class = "p"\nIF a < 1 AND b < 8 THEN class = "p"', PAIR_SCHEMA
        )
    )
    bp = build_base_population(frs.rules[0], diagonal, 6)
    # R1 necesita dos borrados, R2 sólo uno (b < 8 cubre 8 filas)
    assert bp.relaxed
    assert bp.relaxed_member.id == "R2"
    assert len(bp) == 8
    assert bp.target_rule(diagonal.instance(0)).id == "R2"
