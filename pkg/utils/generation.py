"""
Generación de instancias sintéticas restringidas por reglas: vecinos dentro
de la población base, interpolación numérica recortada a la ventana de las
condiciones y voto mayoritario categórico.
"""

import logging
from collections import Counter
from dataclasses import dataclass
from typing import TYPE_CHECKING, Optional, Sequence

import numpy as np

from utils.dataset import Attribute, Dataset, Instance, Provenance
from utils.errors import GenerationError, NeighborError
from utils.relaxation import BasePopulation
from utils.rules import (
    FULL_INTERVAL,
    FeedbackRule,
    Interval,
    LabelDistribution,
    Predicate,
    predicate_categories,
    predicate_interval,
    sample_label,
)

if TYPE_CHECKING:
    from utils.selection import SelectionPlan

log = logging.getLogger("generation")


# ──────────────────────────────────────────
# DISTANCIA MIXTA
# ──────────────────────────────────────────


@dataclass(frozen=True)
class DistanceMetric:
    """
    Numéricos: |a−b| / (max−min) del dataset (0 si el rango es nulo).
    Categóricos: 0 si coinciden, categorical_cost si no. Norma euclídea.
    """

    numeric: np.ndarray
    lo: np.ndarray
    span: np.ndarray
    categorical_cost: float = 1.0

    @classmethod
    def fit(cls, d: Dataset, categorical_cost: float = 1.0) -> "DistanceMetric":
        numeric = np.array([a.is_numeric for a in d.schema.attributes], dtype=bool)
        if len(d):
            lo, hi = d.X.min(axis=0), d.X.max(axis=0)
        else:
            lo = hi = np.zeros(d.schema.width)
        return cls(numeric, lo, hi - lo, categorical_cost)

    def observed_range(self, j: int) -> tuple[float, float]:
        return float(self.lo[j]), float(self.lo[j] + self.span[j])

    def distances(self, a: np.ndarray, B: np.ndarray) -> np.ndarray:
        """Distancia de la fila a a cada fila de B"""
        B = np.atleast_2d(B)
        diff = np.abs(B - a)
        scale = np.where(self.span > 0, self.span, 1.0)
        comp = np.where(
            self.numeric,
            np.where(self.span > 0, diff / scale, 0.0),
            np.where(diff > 0, self.categorical_cost, 0.0),
        )
        return np.sqrt((comp**2).sum(axis=1))

    def distance(self, a: np.ndarray, b: np.ndarray) -> float:
        return float(self.distances(a, b)[0])


def nearest(metric: DistanceMetric, d: Dataset, row: int, candidates: np.ndarray, k: int) -> np.ndarray:
    """Los k candidatos más cercanos a row (sin row); empate por índice"""
    others = np.asarray([c for c in candidates if c != row], dtype=int)
    dist = metric.distances(d.X[row], d.X[others]) if len(others) else np.empty(0)
    order = np.lexsort((others, dist))
    return others[order[:k]]


def neighbors_in_rule(
    bp: BasePopulation, base: int, k: int, metric: DistanceMetric, d: Dataset
) -> np.ndarray:
    """k vecinos de base dentro de la población base (sin mirar etiquetas)"""
    if len(bp) < k + 1:
        raise NeighborError(f"la población base de {bp.rule_id} tiene {len(bp)} filas; se necesitan {k + 1}")
    return nearest(metric, d, base, bp.member_indices, k)


# ──────────────────────────────────────────
# SÍNTESIS POR ATRIBUTO
# ──────────────────────────────────────────


def _inset(lo: float, hi: float, window: Interval) -> tuple[float, float]:
    # extremos abiertos: el float representable más cercano hacia dentro
    a = lo if window.lo_closed or lo != window.lo else float(np.nextafter(lo, np.inf))
    b = hi if window.hi_closed or hi != window.hi else float(np.nextafter(hi, -np.inf))
    return a, b


def synthesize_numeric(
    base_v: float,
    nbr_v: float,
    conditions: Sequence[Predicate],
    rng: np.random.Generator,
    observed: Optional[tuple[float, float]] = None,
) -> float:
    """
    Valor uniforme en el segmento base–vecino recortado a la ventana de las
    condiciones. Si el recorte queda vacío se usa la ventana (acotada al rango
    observado, o su extremo finito más próximo).
    """
    for c in conditions:
        if c.operator == "=":
            v = float(c.value)
            if not all(p.holds(v) for p in conditions):
                raise GenerationError(f"condiciones incompatibles sobre '{c.attribute}'")
            return v

    window = FULL_INTERVAL
    for c in conditions:
        window = window.intersect(predicate_interval(c))
    if window.is_empty:
        raise GenerationError("las condiciones numéricas no tienen solución")

    observed = observed or (min(base_v, nbr_v), max(base_v, nbr_v))

    segment = Interval(min(base_v, nbr_v), True, max(base_v, nbr_v), True)
    target = segment.intersect(window)
    if target.is_empty:
        target = Interval(observed[0], True, observed[1], True).intersect(window)
    if not target.is_empty:
        a, b = _inset(target.lo, target.hi, window)
        if a <= b:
            return float(rng.uniform(a, b)) if a < b else a
        mid = (target.lo + target.hi) / 2
        if window.contains(mid):
            return mid

    # extremo finito de la ventana más próximo al segmento
    ends = []
    if np.isfinite(window.lo):
        ends.append(window.lo if window.lo_closed else float(np.nextafter(window.lo, np.inf)))
    if np.isfinite(window.hi):
        ends.append(window.hi if window.hi_closed else float(np.nextafter(window.hi, -np.inf)))
    centre = (segment.lo + segment.hi) / 2
    ends = [v for v in ends if window.contains(v)]
    if not ends:
        raise GenerationError("ventana numérica sin extremos utilizables")
    return min(ends, key=lambda v: abs(v - centre))


def synthesize_categorical(
    nbr_values: Sequence[str], conditions: Sequence[Predicate], attr: Attribute
) -> str:
    """Valor más frecuente entre los vecinos que cumple las condiciones"""
    counts = Counter(nbr_values)
    ranked = sorted(counts, key=lambda tok: (-counts[tok], attr.code(tok)))
    for tok in list(ranked) + list(attr.categories):
        if all(c.holds(tok) for c in conditions):
            return tok
    raise GenerationError(f"ninguna categoría de '{attr.name}' cumple las condiciones")


# ──────────────────────────────────────────
# CONDICIONES A IMPONER
# ──────────────────────────────────────────


def _compatible(conditions: Sequence[Predicate], extra: Predicate, attr: Attribute) -> bool:
    same = [c for c in conditions if c.attribute == extra.attribute] + [extra]
    if attr.is_numeric:
        window = FULL_INTERVAL
        for c in same:
            window = window.intersect(predicate_interval(c))
        return not window.is_empty
    allowed = frozenset(range(len(attr.categories)))
    for c in same:
        allowed &= predicate_categories(c, attr)
    return bool(allowed)


def enforced_conditions(rule: FeedbackRule, base: Instance) -> list[Predicate]:
    """
    Condiciones de la cláusula original más, por cada exclusión, un predicado
    negado: el primero que base ya cumple, o si no el primero compatible.
    """
    schema = base.schema
    conditions = list(rule.clause.predicates)
    for excl in rule.exclusions:
        options = [n for p in excl.predicates for n in p.negations()]
        options = [n for n in options if _compatible(conditions, n, schema.attribute(n.attribute))]
        if not options:
            raise GenerationError(f"{rule.id}: no se puede evitar la exclusión [{excl.render()}]")
        held = [n for n in options if n.holds(base[n.attribute])]
        conditions.append((held or options)[0])
    return conditions


# ──────────────────────────────────────────
# GENERACIÓN
# ──────────────────────────────────────────


@dataclass(frozen=True)
class SyntheticInstance:
    instance: Instance
    provenance: Provenance

    @property
    def label(self) -> str:
        return self.instance.label


def base_mixture_label(
    dist: LabelDistribution, base_label: str, labels: Sequence[str], p: float, rng: np.random.Generator
) -> str:
    """
    Con probabilidad p la clase de la regla; si no, la etiqueta de la base
    (o, si coincide con la de la regla, otra clase al azar).
    """
    target = dist.mode
    if rng.random() < p:
        return target
    if base_label != target:
        return base_label
    others = [c for c in labels if c != target]
    return others[int(rng.integers(len(others)))]


def generate(
    bps: Sequence[BasePopulation],
    plan: "SelectionPlan",
    k: int,
    rng: np.random.Generator,
    d: Dataset,
    metric: Optional[DistanceMetric] = None,
    base_mixture_p: Optional[float] = None,
) -> list[SyntheticInstance]:
    """Una instancia sintética por base seleccionada, en el orden del plan"""
    metric = metric or DistanceMetric.fit(d)
    by_id = {bp.rule_id: bp for bp in bps}
    schema = d.schema
    selections = plan.flat()
    streams = rng.spawn(len(selections))

    out = []
    for (rule_id, base), r in zip(selections, streams):
        bp = by_id[rule_id]
        base_inst = d.instance(base)
        nbrs = neighbors_in_rule(bp, base, k, metric, d)
        nbr = int(r.choice(nbrs))
        target = bp.target_rule(base_inst)
        conditions = enforced_conditions(target, base_inst)

        values = []
        for j, attr in enumerate(schema.attributes):
            conds = [c for c in conditions if c.attribute == attr.name]
            if attr.is_numeric:
                values.append(
                    synthesize_numeric(
                        d.X[base, j], d.X[nbr, j], conds, r, observed=metric.observed_range(j)
                    )
                )
            else:
                tokens = [attr.token(d.X[n, j]) for n in nbrs]
                values.append(synthesize_categorical(tokens, conds, attr))

        dist = bp.original_rule.distribution
        if base_mixture_p is None:
            label = sample_label(dist, r)
        else:
            label = base_mixture_label(dist, base_inst.label, schema.labels, base_mixture_p, r)

        inst = Instance(schema, tuple(values), label)
        if not bp.original_rule.satisfies(inst):
            raise GenerationError(f"la instancia generada desde la fila {base} no satisface {rule_id}")
        out.append(SyntheticInstance(inst, Provenance("synthetic", rule_id, int(base), nbr)))

    log.debug(f"{len(out)} instancias generadas")
    return out


def synthetic_dataset(d: Dataset, items: Sequence[SyntheticInstance]) -> Dataset:
    return Dataset.from_instances(
        d.schema, [s.instance for s in items], [s.provenance for s in items]
    )
