"""
Selección de instancias base: aleatoria uniforme o por el programa entero
que maximiza el peso seleccionado (pesos borderline/seguro/ruidoso).
"""

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from config import Config
from utils.dataset import Dataset
from utils.generation import DistanceMetric, nearest
from utils.models import Model
from utils.relaxation import BasePopulation

log = logging.getLogger("selection")

SAFE = "safe"
BORDERLINE = "borderline"
NOISY = "noisy"


@dataclass(frozen=True)
class InstanceWeights:
    weights: np.ndarray
    categories: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.weights)

    def count(self, category: str) -> int:
        return sum(1 for c in self.categories if c == category)


@dataclass(frozen=True)
class SelectionPlan:
    """Índices seleccionados por regla (con repetición en la selección aleatoria)"""

    per_rule: dict
    repaired: frozenset = field(default_factory=frozenset)
    deferred: tuple = ()
    forced: bool = False

    def flat(self) -> list[tuple[str, int]]:
        return [(rid, int(i)) for rid, idx in self.per_rule.items() for i in idx]

    def __len__(self) -> int:
        return sum(len(idx) for idx in self.per_rule.values())

    def counts(self) -> dict:
        return {rid: len(idx) for rid, idx in self.per_rule.items()}


def categorize(q_diff: int, k_w: int) -> str:
    if q_diff >= k_w:
        return NOISY
    if 2 * q_diff >= k_w:
        return BORDERLINE
    return SAFE


def compute_weights(
    d: Dataset,
    model: Model,
    k_w: int = Config.WEIGHT_NEIGHBORS,
    metric: Optional[DistanceMetric] = None,
    borderline_weight: float = Config.BORDERLINE_WEIGHT,
    default_weight: float = Config.DEFAULT_WEIGHT,
) -> InstanceWeights:
    """
    Para cada fila, q' = vecinos (de los k_w más cercanos) cuya predicción
    difiere de la de la fila. Ruidosa si q' = k_w, borderline si
    k_w/2 ≤ q' < k_w, segura en otro caso.
    """
    n = len(d)
    if n < k_w + 1:
        return InstanceWeights(np.full(n, default_weight), (SAFE,) * n)

    metric = metric or DistanceMetric.fit(d)
    pred = model.predict_dataset(d)
    everyone = np.arange(n)
    categories = []
    for i in range(n):
        nbrs = nearest(metric, d, i, everyone, k_w)
        categories.append(categorize(int(np.sum(pred[nbrs] != pred[i])), k_w))
    weights = np.array(
        [borderline_weight if c == BORDERLINE else default_weight for c in categories]
    )
    log.debug(f"pesos: {categories.count(BORDERLINE)} borderline, {categories.count(NOISY)} ruidosas")
    return InstanceWeights(weights, tuple(categories))


def _quotas(active: Sequence[BasePopulation], eta: int) -> list[int]:
    m = len(active)
    base, extra = divmod(eta, m)
    return [base + (1 if j < extra else 0) for j in range(m)]


def select_random(bps: Sequence[BasePopulation], eta: int, rng: np.random.Generator) -> SelectionPlan:
    """
    η selecciones repartidas entre reglas (⌊η/m⌋ cada una, el resto a las
    primeras), uniformes con reemplazo. Las poblaciones vacías se saltan.
    """
    if eta < 1:
        raise ValueError(f"eta debe ser ≥ 1, no {eta}")
    active = [bp for bp in bps if not bp.is_empty]
    if not active:
        return SelectionPlan({})
    per_rule = {}
    for bp, quota in zip(active, _quotas(active, eta)):
        if quota == 0:
            continue
        picks = rng.choice(bp.member_indices, size=quota, replace=True)
        per_rule[bp.rule_id] = tuple(sorted(int(i) for i in picks))
    return SelectionPlan(per_rule)


def decay_weights(
    weights: InstanceWeights, rows, factor: float = Config.REJECTED_WEIGHT_DECAY
) -> InstanceWeights:
    """Multiplica por factor el peso de las filas de un lote rechazado"""
    w = weights.weights.copy()
    w[np.asarray(list(rows), dtype=int)] *= factor
    return InstanceWeights(w, weights.categories)


def select_ip(
    bps: Sequence[BasePopulation], weights: InstanceWeights, eta: int, k: int, offset: int = 0
) -> SelectionPlan:
    """
    max Σ w_i z_i  s.a.  k+1 ≤ Σ_i a_ji z_i ≤ ⌊η/m⌋ por regla j.

    Con coberturas disjuntas el programa se separa por regla y el óptimo es
    tomar los min(cota superior, |BP_j|) miembros de mayor peso (empate:
    menor índice). Reparación: cota inferior = min(k+1, |BP_j|) y, si la
    superior queda por debajo, se sube hasta la inferior.

    El total no pasa de η: las reglas reparadas que ya no caben se aplazan
    (el orden de reparto empieza en la regla offset mod m). Sólo si la
    primera regla no cabe en η la reparación es forzada y el lote lo supera.
    """
    if eta < 1:
        raise ValueError(f"eta debe ser ≥ 1, no {eta}")
    active = [bp for bp in bps if not bp.is_empty]
    if not active:
        return SelectionPlan({})
    m = len(active)
    upper_all = eta // m

    chosen, repaired, deferred = {}, set(), []
    budget = eta
    forced = False
    for j in range(m):
        bp = active[(j + offset) % m]
        members = np.asarray(bp.member_indices, dtype=int)
        lower = min(k + 1, len(members))
        if lower < k + 1 or upper_all < lower:
            repaired.add(bp.rule_id)
        take = min(max(upper_all, lower), len(members))
        if take > budget:
            if chosen:
                deferred.append(bp.rule_id)
                continue
            forced = True
        order = np.lexsort((members, -weights.weights[members]))
        chosen[bp.rule_id] = tuple(sorted(int(i) for i in members[order[:take]]))
        budget -= take

    per_rule = {bp.rule_id: chosen[bp.rule_id] for bp in active if bp.rule_id in chosen}
    if forced:
        size = sum(map(len, chosen.values()))
        log.debug(f"reparación forzada: η={eta} < k+1={k + 1}, el lote tiene {size} bases")
    if repaired:
        log.debug(f"cotas reparadas en: {sorted(repaired)}")
    if deferred:
        log.debug(f"reglas aplazadas por falta de cupo: {deferred}")
    return SelectionPlan(per_rule, frozenset(repaired), tuple(deferred), forced)
