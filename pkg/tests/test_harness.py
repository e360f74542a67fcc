import json

import numpy as np
import pytest

from utils.dataset import Dataset
from utils.engine import FroteConfig
from utils.errors import ConfigError, PoolError
from utils.harness import (
    AGGREGATED,
    ExperimentConfig,
    aggregate_runs,
    draw_rule_set,
    extract_seed_rules,
    load_experiment_config,
    paired_record,
    perturb_rules,
    run_experiment,
    with_probability,
    write_report,
)
from utils.models import TrainerSpec
from utils.rules import coverage_mask, is_satisfiable

# ── Configuración ───────────────────────


def test_config_from_dict(tmp_path):
    cfg = ExperimentConfig.from_dict(
        {
            "data": "d.csv",
            "schema": "s.json",
            "trainer": "tree",
            "tau": 5,
            "eta": 3,
            "runs": 2,
            "variants": ["random", "ip"],
            "coverage_bounds": [0.1, 0.3],
        },
        base_dir=tmp_path,
    )
    assert cfg.data == str(tmp_path / "d.csv")
    assert cfg.trainer.kind == "decision_tree"
    assert cfg.frote.tau == 5 and cfg.frote.eta_override == 3
    assert cfg.variants == ("random", "ip")
    assert cfg.coverage_bounds == (0.1, 0.3)


def test_config_round_trips_through_dict():
    cfg = ExperimentConfig(runs=3, tcf=0.4, frote=FroteConfig(tau=7))
    data = cfg.to_dict()
    assert data["frote"]["tau"] == 7
    assert json.loads(json.dumps(data)) == data


@pytest.mark.parametrize(
    "data",
    [
        {"colour": "red"},
        {"data": "d.csv"},
        {"variants": ["greedy"]},
        {"runs": 0},
        {"tcf": 1.5},
        {"coverage_bounds": [0.3, 0.1]},
        {"rule_probability": 0.0},
        {"trainer": "svm"},
    ],
)
def test_bad_config(data):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(data)


def test_config_file_must_be_json(tmp_path):
    path = tmp_path / "exp.json"
    path.write_text("{runs: 2", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_experiment_config(path)


# ── Reglas semilla y pool ───────────────


def test_seed_rules_partition_the_data(blobs):
    rules = extract_seed_rules(blobs, TrainerSpec("logreg"), max_depth=2, seed=0)
    assert len(rules) >= 2
    assert [r.id for r in rules] == [f"S{i + 1}" for i in range(len(rules))]
    hits = sum(coverage_mask(r, blobs).astype(int) for r in rules)
    np.testing.assert_array_equal(hits, np.ones(len(blobs), dtype=int))
    assert all(r.distribution.is_deterministic for r in rules)


def test_seed_rules_need_a_split(line_schema):
    flat = Dataset(line_schema, [[1.0], [2.0], [3.0]], [0, 0, 0])
    with pytest.raises(PoolError):
        extract_seed_rules(flat, TrainerSpec("tree"), max_depth=2)


def test_perturbed_pool(blobs):
    seeds = extract_seed_rules(blobs, TrainerSpec("tree"), max_depth=2, seed=0)
    pool = perturb_rules(seeds, blobs, 10, (0.05, 0.5), rng=np.random.default_rng(4))
    assert 0 < len(pool) <= 10
    assert [r.id for r in pool] == [f"P{i + 1}" for i in range(len(pool))]
    assert len({(r.clause, r.distribution) for r in pool}) == len(pool)
    for r in pool:
        assert is_satisfiable(r, blobs.schema)
        assert 0.05 <= coverage_mask(r, blobs).mean() < 0.5


def test_pool_is_reproducible(blobs):
    seeds = extract_seed_rules(blobs, TrainerSpec("tree"), max_depth=2, seed=0)
    a = perturb_rules(seeds, blobs, 8, (0.05, 0.5), rng=np.random.default_rng(9))
    b = perturb_rules(seeds, blobs, 8, (0.05, 0.5), rng=np.random.default_rng(9))
    assert a == b


def test_pool_needs_seeds(blobs):
    with pytest.raises(PoolError):
        perturb_rules([], blobs, 5)


# ── Sorteo de conjuntos ─────────────────


def test_draw_avoids_conflicts(parse, mixed_data):
    pool = list(parse('IF age > 40 THEN class = "yes"\nIF age < 30 THEN class = "no"').rules)
    frs = draw_rule_set(pool, 2, mixed_data, np.random.default_rng(0))
    assert frs.ids == ["R1", "R2"]


def test_draw_gives_up_on_conflicting_pool(parse, mixed_data):
    pool = list(parse('IF age > 40 THEN class = "yes"\nIF age > 50 THEN class = "no"').rules)
    with pytest.raises(PoolError):
        draw_rule_set(pool, 2, mixed_data, np.random.default_rng(0), attempts=5)


def test_draw_more_than_the_pool(parse, mixed_data):
    pool = list(parse('IF age > 40 THEN class = "yes"').rules)
    with pytest.raises(PoolError):
        draw_rule_set(pool, 2, mixed_data, np.random.default_rng(0))


def test_with_probability(parse, mixed_schema):
    rule = parse('IF age > 40 THEN class = "yes"').rules[0]
    soft = with_probability(rule, mixed_schema.labels, 0.7)
    assert soft.distribution.prob("yes") == pytest.approx(0.7)
    assert soft.distribution.prob("no") == pytest.approx(0.3)
    assert soft.clause == rule.clause


# ── Agregados ───────────────────────────


def _row(j_final, j_mod=0.5, added=10):
    row = {group: {} for group, _ in AGGREGATED}
    for group, name in AGGREGATED:
        row[group][name] = 0.0
    row["mod"]["j_bar"] = j_mod
    row["final"]["j_bar"] = j_final
    row["instances_added"] = added
    return row


def _runs(pairs):
    return [{"variants": {"random": _row(a), "ip": _row(b)}} for a, b in pairs]


def test_aggregate_runs():
    runs = _runs([(0.6, 0.7), (0.4, 0.5)])
    agg = aggregate_runs(runs, ("random", "ip"))
    assert agg["random"]["final.j_bar"]["mean"] == pytest.approx(0.5)
    assert agg["random"]["final.j_bar"]["std"] == pytest.approx(0.1)
    assert agg["random"]["instances_added"]["mean"] == 10
    # final ≥ mod (0.5) en 1 de 2 para random y en 2 de 2 para ip
    assert agg["random"]["final_ge_mod"] == 1
    assert agg["ip"]["final_ge_mod"] == 2


def test_paired_record_rounds_to_three_decimals():
    runs = _runs([(0.5, 0.6), (0.5, 0.4), (0.5, 0.5001), (0.5, 0.5)])
    assert paired_record(runs, ("random", "ip")) == {"ip_vs_random": {"win": 1, "loss": 1, "tie": 2}}


def test_paired_record_needs_two_variants():
    assert paired_record(_runs([(0.5, 0.5)]), ("random",)) == {}


# ── Experimento completo ────────────────


def _small_experiment():
    return ExperimentConfig(
        benchmark_rows=200,
        trainer=TrainerSpec("tree"),
        tcf=0.2,
        runs=2,
        variants=("random", "ip"),
        frote=FroteConfig(tau=3, seed=5),
    )


def test_benchmark_experiment():
    report = run_experiment(_small_experiment())
    data = report.to_dict()
    assert report.pool_size == 1
    assert len(data["runs"]) == 2
    for run in data["runs"]:
        assert set(run["variants"]) == {"random", "ip"}
        for v in run["variants"].values():
            assert v["delta"]["total_imp"] == pytest.approx(v["final"]["j_bar"] - v["initial"]["j_bar"])
            assert v["iterations"] <= 3
    assert set(data["aggregate"]) == {"random", "ip"}
    record = data["paired"]["ip_vs_random"]
    assert record["win"] + record["loss"] + record["tie"] == 2


def test_experiment_is_deterministic():
    a = run_experiment(_small_experiment()).to_dict()
    b = run_experiment(_small_experiment()).to_dict()
    assert a == b


def test_write_report_sorts_keys(tmp_path):
    path = tmp_path / "out" / "report.json"
    write_report(path, {"b": 1, "a": {"d": 2, "c": "J̄"}})
    text = path.read_text(encoding="utf-8")
    assert text.endswith("\n")
    assert text.index('"a"') < text.index('"b"')
    assert text.index('"c"') < text.index('"d"')
    assert "J̄" in text


def test_aggregates_match_the_runs():
    report = run_experiment(_small_experiment())
    for variant in ("random", "ip"):
        finals = [r["variants"][variant]["final"]["j_bar"] for r in report.runs]
        assert report.aggregate[variant]["final.j_bar"]["mean"] == pytest.approx(np.mean(finals))
        assert report.aggregate[variant]["final.j_bar"]["std"] == pytest.approx(np.std(finals))


def test_relabel_without_covered_training_rows_changes_nothing():
    cfg = ExperimentConfig(
        benchmark_rows=200,
        trainer=TrainerSpec("logreg"),
        tcf=0.0,
        runs=2,
        frote=FroteConfig(tau=2, seed=3, strategy="relabel"),
    )
    for run in run_experiment(cfg).runs:
        v = run["variants"]["random"]
        assert v["mod"] == v["initial"]


def test_probabilistic_runs_score_against_stored_labels():
    cfg = ExperimentConfig(
        benchmark_rows=200,
        trainer=TrainerSpec("tree"),
        tcf=0.0,
        runs=1,
        rule_probability=0.6,
        frote=FroteConfig(tau=2, seed=4),
    )
    assert cfg.scores_labels
    assert cfg.to_dict()["score_against_labels"] is True
    assert not ExperimentConfig(runs=1).scores_labels
    assert ExperimentConfig(runs=1, frote=FroteConfig(base_mixture_p=0.8)).scores_labels
    assert not ExperimentConfig(runs=1, rule_probability=0.6, score_against_labels=False).scores_labels

    final = run_experiment(cfg).runs[0]["variants"]["random"]["final"]
    assert final["mra"] is None or 0.0 <= final["mra"] <= 1.0


# ── Benchmark de referencia (LR, relabel, τ=50, q=0.5) ──


def _reference(tcf, variants=("random",), **frote):
    cfg = ExperimentConfig(
        benchmark_rows=400,
        trainer=TrainerSpec("logreg"),
        tcf=tcf,
        runs=10,
        variants=variants,
        frote=FroteConfig(tau=50, q=0.5, seed=0, strategy="relabel", **frote),
    )
    return run_experiment(cfg)


def test_reference_rule_is_learned_without_covered_training_rows():
    runs = [r["variants"]["random"] for r in _reference(0.0).runs]
    mra_gain = [v["final"]["mra"] - v["initial"]["mra"] for v in runs]
    f1_drop = [v["initial"]["f1"] - v["final"]["f1"] for v in runs]
    assert np.median(mra_gain) >= 0.3
    assert np.median(f1_drop) <= 0.05


def test_reference_augmentation_beats_relabel_alone():
    report = _reference(0.2)
    assert report.aggregate["random"]["final_ge_mod"] >= 7


def test_reference_ip_adds_no_more_than_random():
    report = _reference(0.2, variants=("random", "ip"), k=2)
    added = report.aggregate
    assert added["ip"]["instances_added"]["mean"] <= added["random"]["instances_added"]["mean"]
