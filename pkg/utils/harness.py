"""
Protocolo experimental: reglas semilla extraídas de un árbol sustituto,
pool de reglas perturbadas, particiones por tcf y ejecuciones repetidas con
métricas inicial / mod / final sobre test.
"""

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from config import Config
from utils.benchmark import benchmark_rules, make_blobs
from utils.dataset import Dataset, load_dataset
from utils.engine import SELECTORS, FroteConfig, run_frote
from utils.errors import ConfigError, PoolError
from utils.models import DECISION_TREE, ConstantModel, Model, TrainerSpec, TreeModel, train
from utils.objective import j_bar_test
from utils.preparation import split_with_tcf
from utils.rng import derive, derive_seed
from utils.rule_parser import parse_rule_file
from utils.rules import (
    REVERSED,
    Clause,
    FeedbackRule,
    FeedbackRuleSet,
    LabelDistribution,
    Predicate,
    coverage_mask,
    detect_conflicts,
    is_satisfiable,
    merge_overlapping,
)

log = logging.getLogger("harness")


# ──────────────────────────────────────────
# CONFIGURACIÓN
# ──────────────────────────────────────────


@dataclass(frozen=True)
class ExperimentConfig:
    data: Optional[str] = None
    schema: Optional[str] = None
    rules: Optional[str] = None
    benchmark_rows: int = 400
    trainer: TrainerSpec = field(default_factory=lambda: TrainerSpec("logreg"))
    frs_size: int = 1
    tcf: float = 0.0
    runs: int = 10
    coverage_bounds: tuple = Config.COVERAGE_BOUNDS
    outside_train_frac: float = Config.OUTSIDE_TRAIN_FRAC
    pool_size: int = 100
    seed_rule_depth: int = 3
    rule_probability: Optional[float] = None
    score_against_labels: Optional[bool] = None
    variants: tuple = ("random",)
    track_progress: bool = False
    frote: FroteConfig = field(default_factory=FroteConfig)

    def __post_init__(self):
        lo, hi = self.coverage_bounds
        if not 0.0 <= lo < hi <= 1.0:
            raise ConfigError(f"cotas de cobertura inválidas: {self.coverage_bounds}")
        if self.runs < 1:
            raise ConfigError("runs debe ser ≥ 1")
        if self.frs_size < 1:
            raise ConfigError("frs_size debe ser ≥ 1")
        if not 0.0 <= self.tcf <= 1.0:
            raise ConfigError(f"tcf fuera de [0,1]: {self.tcf}")
        if (self.data is None) != (self.schema is None):
            raise ConfigError("data y schema van juntos")
        if not self.variants or any(v not in SELECTORS for v in self.variants):
            raise ConfigError(f"variantes inválidas: {self.variants}")
        if self.rule_probability is not None and not 0.0 < self.rule_probability <= 1.0:
            raise ConfigError(f"rule_probability fuera de (0,1]: {self.rule_probability}")

    @property
    def scores_labels(self) -> bool:
        """Con reglas probabilísticas o mezcla de bases el test conserva sus etiquetas: se mide contra ellas"""
        if self.score_against_labels is not None:
            return self.score_against_labels
        return self.rule_probability is not None or self.frote.base_mixture_p is not None

    @classmethod
    def from_dict(cls, data: dict, base_dir: Union[str, Path] = ".") -> "ExperimentConfig":
        data = dict(data)
        base = Path(base_dir)
        for key in ("data", "schema", "rules"):
            if data.get(key) is not None:
                data[key] = str(base / data[key])
        trainer = data.pop("trainer", {"kind": "logreg"})
        if isinstance(trainer, str):
            trainer = {"kind": trainer}
        frote_fields = {k: data.pop(k) for k in list(data) if k in FroteConfig.__dataclass_fields__}
        if "eta" in data:
            frote_fields["eta_override"] = data.pop("eta")
        if "coverage_bounds" in data:
            data["coverage_bounds"] = tuple(data["coverage_bounds"])
        if "variants" in data:
            data["variants"] = tuple(data["variants"])
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"claves desconocidas en la configuración: {sorted(unknown)}")
        try:
            return cls(
                trainer=TrainerSpec(trainer["kind"], trainer.get("params", {})),
                frote=FroteConfig(**frote_fields),
                **data,
            )
        except TypeError as e:
            raise ConfigError(f"configuración inválida: {e}") from None

    def to_dict(self) -> dict:
        return {
            "data": self.data,
            "schema": self.schema,
            "rules": self.rules,
            "benchmark_rows": self.benchmark_rows,
            "trainer": self.trainer.to_dict(),
            "frs_size": self.frs_size,
            "tcf": self.tcf,
            "runs": self.runs,
            "coverage_bounds": list(self.coverage_bounds),
            "outside_train_frac": self.outside_train_frac,
            "pool_size": self.pool_size,
            "seed_rule_depth": self.seed_rule_depth,
            "rule_probability": self.rule_probability,
            "score_against_labels": self.scores_labels,
            "variants": list(self.variants),
            "track_progress": self.track_progress,
            "frote": self.frote.to_dict(),
        }


def load_experiment_config(path: Union[str, Path]) -> ExperimentConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"JSON inválido en {path}: {e}") from None
    return ExperimentConfig.from_dict(data, base_dir=path.parent)


# ──────────────────────────────────────────
# REGLAS SEMILLA
# ──────────────────────────────────────────


def _path_predicates(model: TreeModel, conds) -> list[Predicate]:
    """Camino del árbol → predicados, quedándose con la cota más ajustada"""
    schema = model.schema
    upper: dict = {}  # x < t
    lower: dict = {}  # x ≥ t
    equal: dict = {}
    differ: dict = {}
    for f, op, t in conds:
        j, code = model.encoder.features[f]
        attr = schema.attributes[j]
        if code is None:
            if op == "<":
                upper[j] = min(upper.get(j, t), t)
            else:
                lower[j] = max(lower.get(j, t), t)
        elif op == ">=":
            equal[j] = attr.categories[code]
        else:
            differ.setdefault(j, [])
            if attr.categories[code] not in differ[j]:
                differ[j].append(attr.categories[code])

    out = []
    for j, attr in enumerate(schema.attributes):
        if j in lower:
            out.append(Predicate(attr.name, ">=", float(lower[j])))
        if j in upper:
            out.append(Predicate(attr.name, "<", float(upper[j])))
        if j in equal:
            out.append(Predicate(attr.name, "=", equal[j]))
        elif j in differ:
            out.extend(Predicate(attr.name, "!=", tok) for tok in differ[j])
    return out


def extract_seed_rules(
    d: Dataset, trainer: TrainerSpec, max_depth: int, seed: int = 0, model: Optional[Model] = None
) -> list[FeedbackRule]:
    """
    Ajusta un árbol a las predicciones del modelo entrenado y convierte cada
    camino raíz→hoja en una regla determinista (clase mayoritaria de la hoja).
    """
    model = model or train(trainer, d, seed)
    surrogate_data = d.with_labels(model.predict_dataset(d))
    tree = train(TrainerSpec(DECISION_TREE, {"max_depth": max_depth}), surrogate_data, seed)
    if isinstance(tree, ConstantModel) or tree.root.is_leaf:
        raise PoolError("el árbol sustituto tiene una sola hoja: no hay reglas que extraer")

    rules = []
    for conds, cls, n_rows in tree.paths():
        if n_rows == 0:
            continue
        clause = Clause(tuple(_path_predicates(tree, conds)))
        rules.append(
            FeedbackRule(
                id=f"S{len(rules) + 1}",
                clause=clause,
                distribution=LabelDistribution.delta(d.schema.labels[cls]),
            )
        )
    log.info(f"{len(rules)} reglas semilla extraídas (profundidad {max_depth})")
    return rules


# ──────────────────────────────────────────
# PERTURBACIÓN
# ──────────────────────────────────────────


def _reverse(rule: FeedbackRule, rng: np.random.Generator, d: Dataset) -> Optional[Clause]:
    preds = list(rule.clause.predicates)
    i = int(rng.integers(len(preds)))
    p = preds[i]
    op = REVERSED[p.operator]
    if d.schema.attribute(p.attribute).is_numeric and op == "!=":
        return None
    preds[i] = replace(p, operator=op)
    return Clause(tuple(preds))


def _revalue(rule: FeedbackRule, rng: np.random.Generator, d: Dataset) -> Optional[Clause]:
    preds = list(rule.clause.predicates)
    i = int(rng.integers(len(preds)))
    p = preds[i]
    attr = d.schema.attribute(p.attribute)
    column = d.column(attr.name)
    if attr.is_numeric:
        value = float(np.round(rng.uniform(column.min(), column.max()), 6))
    else:
        observed = [attr.token(c) for c in np.unique(column) if attr.token(c) != p.value]
        if not observed:
            return None
        value = observed[int(rng.integers(len(observed)))]
    preds[i] = replace(p, value=value)
    return Clause(tuple(preds))


def _append(
    rule: FeedbackRule, rng: np.random.Generator, seeds: Sequence[FeedbackRule]
) -> Optional[Clause]:
    others = [s for s in seeds if s.clause != rule.clause]
    if not others:
        return None
    donor = others[int(rng.integers(len(others)))]
    p = donor.clause.predicates[int(rng.integers(len(donor.clause)))]
    if p in rule.clause.predicates:
        return None
    if any(q.attribute == p.attribute and q.operator == "=" for q in rule.clause.predicates):
        return None
    return Clause(rule.clause.predicates + (p,))


def perturb_rules(
    seed_rules: Sequence[FeedbackRule],
    d: Dataset,
    count: int,
    bounds: tuple = Config.COVERAGE_BOUNDS,
    rng: Optional[np.random.Generator] = None,
    attempt_factor: int = Config.POOL_ATTEMPT_FACTOR,
) -> list[FeedbackRule]:
    """
    Pool de reglas: se aplica una perturbación (invertir operador, cambiar
    valor o añadir una condición de otra regla) a una regla semilla al azar y
    se conserva si es satisfacible, no repetida y lo ≤ cobertura < hi.
    """
    if not seed_rules:
        raise PoolError("no hay reglas semilla que perturbar")
    rng = rng if rng is not None else np.random.default_rng(0)
    lo, hi = bounds
    pool: list[FeedbackRule] = []
    seen = set()
    attempts = 0
    cap = attempt_factor * count
    while len(pool) < count and attempts < cap:
        attempts += 1
        rule = seed_rules[int(rng.integers(len(seed_rules)))]
        kind = int(rng.integers(3))
        if kind == 0:
            clause = _reverse(rule, rng, d)
        elif kind == 1:
            clause = _revalue(rule, rng, d)
        else:
            clause = _append(rule, rng, seed_rules)
        if clause is None:
            continue
        key = (clause, rule.distribution)
        if key in seen:
            continue
        candidate = FeedbackRule(f"P{len(pool) + 1}", clause, rule.distribution)
        if not is_satisfiable(candidate, d.schema):
            continue
        share = coverage_mask(candidate, d).mean() if len(d) else 0.0
        if not lo <= share < hi:
            continue
        seen.add(key)
        pool.append(candidate)

    if len(pool) < count:
        log.warning(f"pool incompleto: {len(pool)}/{count} reglas tras {attempts} intentos")
    return pool


# ──────────────────────────────────────────
# EXPERIMENTOS
# ──────────────────────────────────────────


def with_probability(rule: FeedbackRule, labels: Sequence[str], p: float) -> FeedbackRule:
    """π con probabilidad p para la clase de la regla y el resto repartido"""
    target = rule.distribution.mode
    others = [c for c in labels if c != target]
    weights = [(target, p)] + [(c, (1 - p) / len(others)) for c in others]
    return replace(rule, distribution=LabelDistribution(tuple(weights)))


def draw_rule_set(
    pool: Sequence[FeedbackRule],
    size: int,
    d: Dataset,
    rng: np.random.Generator,
    attempts: int = Config.FRS_DRAW_ATTEMPTS,
) -> FeedbackRuleSet:
    """|F| reglas del pool sin conflictos; se vuelve a sortear si hay conflicto"""
    if size > len(pool):
        raise PoolError(f"se piden {size} reglas pero el pool tiene {len(pool)}")
    for _ in range(attempts):
        idx = sorted(rng.choice(len(pool), size=size, replace=False))
        frs = FeedbackRuleSet(d.schema, tuple(pool[i] for i in idx))
        if not detect_conflicts(frs):
            return frs
    raise PoolError(f"no se encontró un conjunto de {size} reglas sin conflictos en un pool de {len(pool)}")


def _metrics(model: Model, frs: FeedbackRuleSet, test: Dataset, against_labels: bool = False) -> dict:
    report = j_bar_test(model, frs, test, against_labels=against_labels)
    return {"mra": report.mra, "f1": report.outside_f1, "j_bar": report.j_value}


def _mean_std(values: list) -> dict:
    vals = [v for v in values if v is not None]
    if not vals:
        return {"mean": None, "std": None}
    return {"mean": float(np.mean(vals)), "std": float(np.std(vals))}


@dataclass
class RunReport:
    config: dict
    pool_size: int
    runs: list = field(default_factory=list)
    aggregate: dict = field(default_factory=dict)
    paired: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "pool_size": self.pool_size,
            "runs": self.runs,
            "aggregate": self.aggregate,
            "paired": self.paired,
        }


AGGREGATED = (
    ("initial", "mra"), ("initial", "f1"), ("initial", "j_bar"),
    ("mod", "mra"), ("mod", "f1"), ("mod", "j_bar"),
    ("final", "mra"), ("final", "f1"), ("final", "j_bar"),
    ("delta", "mod_imp"), ("delta", "final_imp"), ("delta", "total_imp"),
    ("delta", "added_fraction"),
)


def aggregate_runs(runs: list, variants: Sequence[str]) -> dict:
    out = {}
    for v in variants:
        rows = [r["variants"][v] for r in runs]
        out[v] = {
            f"{group}.{name}": _mean_std([row[group][name] for row in rows])
            for group, name in AGGREGATED
        }
        out[v]["instances_added"] = _mean_std([row["instances_added"] for row in rows])
        out[v]["final_ge_mod"] = sum(
            1 for row in rows if round(row["final"]["j_bar"], 3) >= round(row["mod"]["j_bar"], 3)
        )
    return out


def paired_record(runs: list, variants: Sequence[str]) -> dict:
    """Victorias/derrotas/empates de J̄ final (3 decimales) de cada variante frente a la primera"""
    if len(variants) < 2:
        return {}
    ref = variants[0]
    out = {}
    for v in variants[1:]:
        win = loss = tie = 0
        for r in runs:
            a = round(r["variants"][v]["final"]["j_bar"], 3)
            b = round(r["variants"][ref]["final"]["j_bar"], 3)
            if a > b:
                win += 1
            elif a < b:
                loss += 1
            else:
                tie += 1
        out[f"{v}_vs_{ref}"] = {"win": win, "loss": loss, "tie": tie}
    return out


def load_experiment_data(cfg: ExperimentConfig) -> Dataset:
    if cfg.data is not None:
        return load_dataset(cfg.data, cfg.schema)
    return make_blobs(cfg.benchmark_rows, seed=cfg.frote.seed)


def build_pool(cfg: ExperimentConfig, d: Dataset) -> list[FeedbackRule]:
    """Reglas fijas (archivo o benchmark) o pool de reglas perturbadas"""
    if cfg.rules is not None:
        frs = parse_rule_file(cfg.rules, d.schema)
        return [m for r in frs.rules for m in r.members]
    if cfg.data is None:
        return list(benchmark_rules().rules)
    seeds = extract_seed_rules(d, cfg.trainer, cfg.seed_rule_depth, seed=derive_seed(cfg.frote.seed, "seed_rules"))
    return perturb_rules(
        seeds, d, cfg.pool_size, cfg.coverage_bounds, rng=derive(cfg.frote.seed, "pool")
    )


def run_experiment(cfg: ExperimentConfig) -> RunReport:
    """
    Por ejecución: sortear |F| reglas sin conflicto, partir con tcf, correr
    cada variante de selector sobre la misma partición y medir inicial / mod /
    final sobre test.
    """
    d = load_experiment_data(cfg)
    pool = build_pool(cfg, d)
    report = RunReport(config=cfg.to_dict(), pool_size=len(pool))
    log.info(f"experimento: {cfg.runs} ejecuciones, pool de {len(pool)} reglas, variantes {list(cfg.variants)}")

    for run in range(cfg.runs):
        frs = draw_rule_set(pool, cfg.frs_size, d, derive(cfg.frote.seed, "draw", run))
        if cfg.rule_probability is not None:
            frs = FeedbackRuleSet(
                d.schema,
                tuple(with_probability(r, d.schema.labels, cfg.rule_probability) for r in frs.rules),
            )
        train_set, test_set = split_with_tcf(
            d, frs, cfg.tcf, cfg.outside_train_frac, derive(cfg.frote.seed, "split", run)
        )
        scoring = merge_overlapping(frs)
        entry = {"run": run, "rules": frs.ids, "train_rows": len(train_set), "test_rows": len(test_set), "variants": {}}
        for variant in cfg.variants:
            fcfg = replace(cfg.frote, selector=variant, seed=derive_seed(cfg.frote.seed, "run", run))
            result = run_frote(
                fcfg, train_set, frs, cfg.trainer, eval_set=test_set if cfg.track_progress else None
            )
            initial = _metrics(result.initial_model, scoring, test_set, cfg.scores_labels)
            mod = _metrics(result.mod_model, scoring, test_set, cfg.scores_labels)
            final = _metrics(result.model, scoring, test_set, cfg.scores_labels)
            entry["variants"][variant] = {
                "initial": initial,
                "mod": mod,
                "final": final,
                "delta": {
                    "mod_imp": mod["j_bar"] - initial["j_bar"],
                    "final_imp": final["j_bar"] - mod["j_bar"],
                    "total_imp": final["j_bar"] - initial["j_bar"],
                    "added_fraction": result.instances_added / len(result.modified),
                },
                "instances_added": result.instances_added,
                "iterations": len(result.traces),
                "accepted_iterations": result.accepted_iterations,
                "stop_reason": result.stop_reason,
                "trace": [t.to_dict() for t in result.traces],
            }
            log.info(
                f"ejecución {run} [{variant}]: J̄ {initial['j_bar']:.3f} → {mod['j_bar']:.3f} → "
                f"{final['j_bar']:.3f}, +{result.instances_added} instancias"
            )
        report.runs.append(entry)

    report.aggregate = aggregate_runs(report.runs, cfg.variants)
    report.paired = paired_record(report.runs, cfg.variants)
    return report


def write_report(path: Union[str, Path], report: dict):
    """JSON con claves ordenadas: mismo seed, mismos bytes (salvo wall_time)"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(report, sort_keys=True, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
