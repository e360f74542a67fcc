"""
Preparación del dataset de entrada: estrategias de modificación de las filas
cubiertas por reglas y partición train/test controlada por tcf.
"""

import logging
import math
from typing import Optional

import numpy as np

from utils.dataset import Dataset
from utils.errors import ConfigError, DistributionError
from utils.rules import FeedbackRuleSet, assign_rules, sample_label

log = logging.getLogger("preparation")

NONE = "none"
RELABEL = "relabel"
DROP = "drop"
STRATEGIES = (NONE, RELABEL, DROP)


def apply_modification(
    d: Dataset,
    frs: FeedbackRuleSet,
    strategy: str,
    rng: Optional[np.random.Generator] = None,
) -> Dataset:
    """
    none: identidad.
    relabel: cada fila cubierta cuya etiqueta no coincide con la regla toma la
    clase de la regla (con π probabilística, una etiqueta muestreada de π).
    drop: esas filas se eliminan (con π probabilística, las de etiqueta con
    probabilidad nula).
    """
    if strategy not in STRATEGIES:
        raise ConfigError(f"estrategia de modificación desconocida '{strategy}'")
    if strategy == NONE:
        return d

    owner = assign_rules(frs, d)
    labels = d.schema.labels

    if strategy == DROP:
        doomed = []
        for i in np.flatnonzero(owner >= 0):
            dist = frs.rules[owner[i]].distribution
            if dist.prob(labels[d.y[i]]) == 0.0:
                doomed.append(int(i))
        log.debug(f"drop: {len(doomed)} filas eliminadas")
        return d.drop(doomed)

    y = d.y.copy()
    changed = 0
    for i in np.flatnonzero(owner >= 0):
        dist = frs.rules[owner[i]].distribution
        if dist.is_deterministic:
            target = dist.weights[0][0]
        else:
            if rng is None:
                raise DistributionError("relabel con π probabilística requiere un generador aleatorio")
            target = sample_label(dist, rng)
        new = d.schema.label_index(target)
        if new != y[i]:
            y[i] = new
            changed += 1
    log.debug(f"relabel: {changed} filas reetiquetadas")
    return d.with_labels(y)


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def split_with_tcf(
    d: Dataset,
    frs: FeedbackRuleSet,
    tcf: float,
    outside_train_frac: float,
    rng: np.random.Generator,
) -> tuple[Dataset, Dataset]:
    """
    Parte D en train/test: round(tcf·|cov|) filas cubiertas van a train y las
    no cubiertas se reparten según outside_train_frac.
    """
    if not 0.0 <= tcf <= 1.0:
        raise ConfigError(f"tcf fuera de [0,1]: {tcf}")
    if not 0.0 <= outside_train_frac <= 1.0:
        raise ConfigError(f"outside_train_frac fuera de [0,1]: {outside_train_frac}")

    covered_mask = np.zeros(len(d), dtype=bool)
    for r in frs.rules:
        covered_mask |= r.mask(d)
    covered = np.flatnonzero(covered_mask)
    outside = np.flatnonzero(~covered_mask)

    n_cov = _round_half_up(tcf * len(covered))
    n_out = _round_half_up(outside_train_frac * len(outside))
    cov_perm = rng.permutation(covered)
    out_perm = rng.permutation(outside)

    train_idx = np.sort(np.concatenate([cov_perm[:n_cov], out_perm[:n_out]]))
    test_idx = np.sort(np.concatenate([cov_perm[n_cov:], out_perm[n_out:]]))
    log.debug(
        f"split: {n_cov}/{len(covered)} cubiertas y {n_out}/{len(outside)} externas a train"
    )
    return d.take(train_idx), d.take(test_idx)
