"""
Objetivo: acuerdo modelo-regla (MRA), F1 fuera de cobertura, Ĵ de
entrenamiento (0.5/0.5) y J̄ de test ponderado por cobertura.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from utils.dataset import Dataset
from utils.errors import ValidationError
from utils.models import Model
from utils.rules import FeedbackRuleSet, assign_rules


@dataclass(frozen=True)
class ObjectiveReport:
    per_rule_mra: dict
    mra: Optional[float]
    outside_f1: Optional[float]
    j_value: float
    weights: dict
    empty_rules: tuple = ()
    covered: int = 0
    outside: int = 0

    def to_dict(self) -> dict:
        return {
            "per_rule_mra": dict(self.per_rule_mra),
            "mra": self.mra,
            "outside_f1": self.outside_f1,
            "j_value": self.j_value,
            "weights": dict(self.weights),
            "empty_rules": list(self.empty_rules),
            "covered": self.covered,
            "outside": self.outside,
        }


@dataclass(frozen=True)
class MraResult:
    per_rule: dict
    aggregate: Optional[float]
    counts: dict = field(default_factory=dict)
    empty_rules: tuple = ()


def _agreement(
    frs: FeedbackRuleSet, d: Dataset, pred: np.ndarray, owner: np.ndarray, against_labels: bool = False
):
    labels = d.schema.labels
    per_rule, counts, empty = {}, {}, []
    for r_idx, rule in enumerate(frs.rules):
        rows = np.flatnonzero(owner == r_idx)
        counts[rule.id] = len(rows)
        if not len(rows):
            per_rule[rule.id] = None
            empty.append(rule.id)
            continue
        if against_labels:
            per_rule[rule.id] = float(np.mean(pred[rows] == d.y[rows]))
            continue
        # acuerdo esperado: π_r(predicción)
        per_rule[rule.id] = float(np.mean([rule.distribution.prob(labels[pred[i]]) for i in rows]))
    return per_rule, counts, tuple(empty)


def _aggregate(per_rule: dict, counts: dict) -> Optional[float]:
    total = sum(counts.values())
    if not total:
        return None
    return sum(counts[r] * v for r, v in per_rule.items() if v is not None) / total


def mra(
    model: Model, frs: FeedbackRuleSet, d: Dataset, rng: Optional[np.random.Generator] = None
) -> MraResult:
    """
    Por regla, fracción esperada de filas cubiertas en que la predicción
    coincide con una etiqueta ~ π_r (forma cerrada; rng no se usa). El
    agregado pondera por tamaño de cobertura y omite reglas sin cobertura.
    """
    pred = model.predict_dataset(d)
    owner = assign_rules(frs, d)
    per_rule, counts, empty = _agreement(frs, d, pred, owner)
    return MraResult(per_rule, _aggregate(per_rule, counts), counts, empty)


def f1_score(truth: np.ndarray, pred: np.ndarray, n_labels: int) -> Optional[float]:
    """Binario: F1 de la segunda clase declarada. Multiclase: macro sobre clases vistas."""
    if len(truth) == 0:
        return None

    def f1_of(c: int) -> float:
        tp = np.sum((pred == c) & (truth == c))
        fp = np.sum((pred == c) & (truth != c))
        fn = np.sum((pred != c) & (truth == c))
        denom = 2 * tp + fp + fn
        return 1.0 if denom == 0 else float(2 * tp / denom)

    if n_labels == 2:
        return f1_of(1)
    seen = np.union1d(truth, pred)
    return float(np.mean([f1_of(int(c)) for c in seen]))


def outside_f1(model: Model, frs: FeedbackRuleSet, d: Dataset) -> Optional[float]:
    """F1 sobre las filas que ninguna regla cubre, contra las etiquetas guardadas"""
    outside = assign_rules(frs, d) < 0
    pred = model.predict_dataset(d)
    return f1_score(d.y[outside], pred[outside], len(d.schema.labels))


def j_train(
    model: Model,
    frs: FeedbackRuleSet,
    d: Dataset,
    rng: Optional[np.random.Generator] = None,
    agreement_set: Optional[Dataset] = None,
) -> ObjectiveReport:
    """
    Ĵ = 0.5·(1−MRA) + 0.5·(1−F1); un término indefinido cuenta como acuerdo 0.
    Con agreement_set el MRA se mide sobre sus filas cubiertas; el F1 sigue
    midiéndose sobre las filas de d que ninguna regla cubre.
    """
    pred = model.predict_dataset(d)
    owner = assign_rules(frs, d)
    if agreement_set is None:
        per_rule, counts, empty = _agreement(frs, d, pred, owner)
    else:
        per_rule, counts, empty = _agreement(
            frs, agreement_set, model.predict_dataset(agreement_set), assign_rules(frs, agreement_set)
        )
    agg = _aggregate(per_rule, counts)
    outside = owner < 0
    f1 = f1_score(d.y[outside], pred[outside], len(d.schema.labels))
    j = 0.5 * (1.0 - (agg or 0.0)) + 0.5 * (1.0 - (f1 or 0.0))
    return ObjectiveReport(
        per_rule_mra=per_rule,
        mra=agg,
        outside_f1=f1,
        j_value=float(j),
        weights={"mra": 0.5, "f1": 0.5},
        empty_rules=empty,
        covered=sum(counts.values()),
        outside=int(outside.sum()),
    )


def j_bar_test(
    model: Model,
    frs: FeedbackRuleSet,
    test: Dataset,
    rng: Optional[np.random.Generator] = None,
    against_labels: bool = False,
) -> ObjectiveReport:
    """
    J̄ = Σ_r P(cov_r)·MRA_r + P(fuera)·F1, con probabilidades empíricas del test.
    Con against_labels el acuerdo en cobertura se mide contra las etiquetas
    guardadas del test y no contra π_r.
    """
    if len(test) == 0:
        raise ValidationError("el conjunto de test está vacío")
    n = len(test)
    pred = model.predict_dataset(test)
    owner = assign_rules(frs, test)
    per_rule, counts, empty = _agreement(frs, test, pred, owner, against_labels)
    outside = owner < 0
    f1 = f1_score(test.y[outside], pred[outside], len(test.schema.labels))

    weights = {rid: counts[rid] / n for rid in per_rule}
    weights["outside"] = int(outside.sum()) / n
    j_bar = sum(weights[rid] * v for rid, v in per_rule.items() if v is not None)
    j_bar += weights["outside"] * (f1 or 0.0)

    agg = _aggregate(per_rule, counts)
    return ObjectiveReport(
        per_rule_mra=per_rule,
        mra=agg,
        outside_f1=f1,
        j_value=float(j_bar),
        weights=weights,
        empty_rules=empty,
        covered=sum(counts.values()),
        outside=int(outside.sum()),
    )
