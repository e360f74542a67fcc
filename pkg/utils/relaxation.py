"""
Poblaciones base por regla. Si una regla cubre menos de L filas se relaja
borrando condiciones (una por nivel, la que más cobertura da) hasta
alcanzar L o quedarse sin condiciones.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from utils.dataset import Dataset, Instance
from utils.rules import Clause, FeedbackRule, FeedbackRuleSet, Rule

log = logging.getLogger("relaxation")


@dataclass(frozen=True)
class Relaxation:
    clause: Clause
    indices: np.ndarray
    relaxed: bool
    levels: tuple[int, ...] = ()  # cobertura tras cada borrado

    @property
    def deletions(self) -> int:
        return len(self.levels)


@dataclass(frozen=True)
class BasePopulation:
    rule_id: str
    original_rule: Rule
    relaxed_clause: Optional[Clause]
    member_indices: np.ndarray
    relaxed: bool
    relaxed_member: Optional[FeedbackRule] = None
    levels: tuple[int, ...] = ()

    def __len__(self) -> int:
        return len(self.member_indices)

    @property
    def is_empty(self) -> bool:
        return len(self.member_indices) == 0

    def target_rule(self, base: Instance) -> FeedbackRule:
        """Regla (miembro) cuyas condiciones originales debe cumplir lo generado a partir de base"""
        rule = self.original_rule
        if isinstance(rule, FeedbackRule):
            return rule
        if self.relaxed_member is not None:
            return self.relaxed_member
        return rule.member_for(base) or rule.members[0]


def relax_rule(rule: FeedbackRule, d: Dataset, L: int) -> Relaxation:
    """
    Regla parcial maximal: si |cov(rule, d)| ≥ L la regla queda intacta; si no,
    se borra en cada nivel la condición que maximiza la cobertura (empate: la
    de más a la derecha) hasta llegar a L. Las exclusiones dejan de contar en
    cuanto empieza la relajación.
    """
    if L < 1:
        raise ValueError(f"L debe ser ≥ 1, no {L}")
    full = np.flatnonzero(rule.mask(d))
    if len(full) >= L:
        return Relaxation(rule.clause, full, relaxed=False)

    clause = rule.clause
    levels = []
    mask = np.ones(len(d), dtype=bool)
    while not clause.is_empty:
        best, best_mask, best_cov = None, None, -1
        for c in range(len(clause)):
            candidate = clause.without(c)
            cand_mask = candidate.mask(d)
            cov = int(cand_mask.sum())
            if cov >= best_cov:
                best, best_mask, best_cov = candidate, cand_mask, cov
        clause, mask = best, best_mask
        levels.append(best_cov)
        if best_cov >= L:
            break

    log.debug(f"{rule.id}: relajada a [{clause.render()}] tras {len(levels)} borrados, cobertura {int(mask.sum())}")
    return Relaxation(clause, np.flatnonzero(mask), relaxed=True, levels=tuple(levels))


def build_base_population(rule: Rule, d: Dataset, L: int) -> BasePopulation:
    if isinstance(rule, FeedbackRule):
        r = relax_rule(rule, d, L)
        return BasePopulation(
            rule_id=rule.id,
            original_rule=rule,
            relaxed_clause=r.clause if r.relaxed else None,
            member_indices=r.indices,
            relaxed=r.relaxed,
            levels=r.levels,
        )

    union = np.flatnonzero(rule.mask(d))
    if len(union) >= L:
        return BasePopulation(rule.id, rule, None, union, relaxed=False)

    # el grupo no alcanza: se relaja cada miembro y gana el de menos borrados
    best_member, best = None, None
    for m in rule.members:
        r = relax_rule(m, d, L)
        if best is None or (r.deletions, -len(r.indices)) < (best.deletions, -len(best.indices)):
            best_member, best = m, r
    return BasePopulation(
        rule_id=rule.id,
        original_rule=rule,
        relaxed_clause=best.clause,
        member_indices=best.indices,
        relaxed=True,
        relaxed_member=best_member,
        levels=best.levels,
    )


def pre_select_bp(
    d: Dataset, frs: FeedbackRuleSet, k: int, L: Optional[int] = None
) -> list[BasePopulation]:
    """Una población base por regla, con al menos L = k+1 miembros si se puede"""
    L = k + 1 if L is None else L
    bps = [build_base_population(r, d, L) for r in frs.rules]
    relaxed = [bp.rule_id for bp in bps if bp.relaxed]
    if relaxed:
        log.debug(f"reglas relajadas (L={L}): {relaxed}")
    return bps
