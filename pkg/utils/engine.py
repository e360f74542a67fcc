"""
Bucle de aumentación: generar instancias que cumplen las reglas, reentrenar
y quedarse con el lote sólo si el objetivo de entrenamiento baja.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

from config import Config
from utils.dataset import Dataset
from utils.errors import ConfigError, TrainerError, ValidationError
from utils.generation import DistanceMetric, generate, synthetic_dataset
from utils.models import Model, TrainerSpec, train
from utils.objective import ObjectiveReport, j_bar_test, j_train
from utils.preparation import STRATEGIES, apply_modification
from utils.relaxation import pre_select_bp
from utils.rng import derive, derive_seed
from utils.rules import FeedbackRuleSet, assign_rules, prepare_rule_set
from utils.selection import compute_weights, decay_weights, select_ip, select_random

log = logging.getLogger("engine")

SELECTORS = ("random", "ip")

STOP_ITERATIONS = "iteration_limit"
STOP_QUOTA = "quota"
STOP_EMPTY = "empty_base_populations"


@dataclass(frozen=True)
class FroteConfig:
    tau: int = Config.DEFAULT_TAU
    q: float = Config.DEFAULT_Q
    k: int = Config.DEFAULT_K
    eta_override: Optional[int] = None
    selector: str = Config.DEFAULT_SELECTOR
    strategy: str = Config.DEFAULT_STRATEGY
    seed: int = Config.DEFAULT_SEED
    k_weights: int = Config.WEIGHT_NEIGHBORS
    base_mixture_p: Optional[float] = None

    def __post_init__(self):
        if self.tau < 1:
            raise ConfigError(f"tau debe ser ≥ 1, no {self.tau}")
        if not self.q > 0:
            raise ConfigError(f"q debe ser > 0, no {self.q}")
        if self.k < 1:
            raise ConfigError(f"k debe ser ≥ 1, no {self.k}")
        if self.eta_override is not None and self.eta_override < 1:
            raise ConfigError(f"eta debe ser ≥ 1, no {self.eta_override}")
        if self.selector not in SELECTORS:
            raise ConfigError(f"selector desconocido '{self.selector}'")
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"estrategia desconocida '{self.strategy}'")
        if self.base_mixture_p is not None and not 0.0 <= self.base_mixture_p <= 1.0:
            raise ConfigError(f"base_mixture_p fuera de [0,1]: {self.base_mixture_p}")

    def eta(self, n: int) -> int:
        """η = ⌈q·|D|/τ⌉ (mínimo 1) salvo que se fije a mano"""
        if self.eta_override is not None:
            return self.eta_override
        return max(1, math.ceil(self.q * n / self.tau))

    def to_dict(self) -> dict:
        return {
            "tau": self.tau,
            "q": self.q,
            "k": self.k,
            "eta_override": self.eta_override,
            "selector": self.selector,
            "strategy": self.strategy,
            "seed": self.seed,
            "k_weights": self.k_weights,
            "base_mixture_p": self.base_mixture_p,
        }


@dataclass(frozen=True)
class IterationTrace:
    iteration: int
    generated: int
    accepted: bool
    j_before: float
    j_after: float
    n_total: int
    overshoot: int = 0
    test_j_bar: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "generated": self.generated,
            "accepted": self.accepted,
            "j_before": self.j_before,
            "j_after": self.j_after,
            "n_total": self.n_total,
            "overshoot": self.overshoot,
            "test_j_bar": self.test_j_bar,
        }


@dataclass
class AugmentationResult:
    dataset: Dataset
    model: Model
    initial_model: Model
    mod_model: Model
    modified: Dataset
    rule_set: FeedbackRuleSet
    eta: int
    traces: list = field(default_factory=list)
    initial_report: Optional[ObjectiveReport] = None
    mod_report: Optional[ObjectiveReport] = None
    final_report: Optional[ObjectiveReport] = None
    stop_reason: str = STOP_ITERATIONS

    @property
    def instances_added(self) -> int:
        return len(self.dataset) - len(self.modified)

    @property
    def accepted_iterations(self) -> int:
        return sum(1 for t in self.traces if t.accepted)

    def to_dict(self) -> dict:
        return {
            "eta": self.eta,
            "input_rows": len(self.modified),
            "instances_added": self.instances_added,
            "iterations": len(self.traces),
            "accepted_iterations": self.accepted_iterations,
            "stop_reason": self.stop_reason,
            "initial": self.initial_report.to_dict() if self.initial_report else None,
            "mod": self.mod_report.to_dict() if self.mod_report else None,
            "final": self.final_report.to_dict() if self.final_report else None,
            "trace": [t.to_dict() for t in self.traces],
        }


def _train(trainer: TrainerSpec, d: Dataset, seed: int, iteration: Optional[int] = None) -> Model:
    try:
        return train(trainer, d, seed)
    except TrainerError as e:
        raise TrainerError(str(e), iteration=iteration) from e


def agreement_rows(frs: FeedbackRuleSet, current: Dataset, candidate_data: Dataset) -> Optional[Dataset]:
    """
    Filas sobre las que se mide el MRA de un candidato. Si D̂ tiene filas
    cubiertas reales basta con D̂ (None); si sólo tiene sintéticas o ninguna,
    se usa la cobertura de D̂ ∪ S para que el lote nuevo también cuente.
    """
    covered = assign_rules(frs, current) >= 0
    if covered.any() and not current.synthetic_mask[covered].all():
        return None
    return candidate_data


def run_frote(
    cfg: FroteConfig,
    d: Dataset,
    frs: FeedbackRuleSet,
    trainer: TrainerSpec,
    eval_set: Optional[Dataset] = None,
) -> AugmentationResult:
    """
    Aplica la estrategia de modificación y repite hasta τ veces o hasta
    superar la cuota q·|D|: seleccionar bases, generar S, reentrenar sobre
    D̂ ∪ S y aceptar S sólo si Ĵ (evaluado sobre D̂, ver agreement_rows)
    baja estrictamente.
    """
    if len(d) == 0:
        raise ValidationError("el dataset de entrada está vacío")
    frs = prepare_rule_set(frs)

    trainer_seed = derive_seed(cfg.seed, "trainer")
    initial_model = _train(trainer, d, trainer_seed)

    current = apply_modification(d, frs, cfg.strategy, rng=derive(cfg.seed, "relabel"))
    if len(current) == 0:
        raise ValidationError("la estrategia de modificación dejó el dataset vacío")
    modified = current
    quota = cfg.q * len(modified)
    eta = cfg.eta(len(modified))

    mod_model = _train(trainer, modified, trainer_seed)
    model = mod_model
    initial_report = j_train(initial_model, frs, modified)
    mod_report = j_train(mod_model, frs, modified)
    j_hat = mod_report.j_value

    log.info(
        f"inicio: |D|={len(modified)}, reglas={len(frs)}, η={eta}, τ={cfg.tau}, "
        f"selector={cfg.selector}, Ĵ={j_hat:.4f}"
    )

    if cfg.selector == "ip" and eta < cfg.k + 1:
        log.warning(f"η={eta} < k+1={cfg.k + 1}: la selección IP forzará lotes de más de η bases")

    bps = pre_select_bp(current, frs, cfg.k)
    weights = compute_weights(current, model, cfg.k_weights) if cfg.selector == "ip" else None

    traces = []
    n_added = 0
    i = 0
    stop_reason = STOP_ITERATIONS
    while i < cfg.tau and n_added <= quota:
        usable = [bp for bp in bps if len(bp) >= cfg.k + 1]
        if not usable:
            stop_reason = STOP_EMPTY
            log.warning(f"iteración {i}: ninguna población base tiene {cfg.k + 1} filas; fin anticipado")
            break

        if cfg.selector == "ip":
            plan = select_ip(usable, weights, eta, cfg.k, offset=i)
        else:
            plan = select_random(usable, eta, derive(cfg.seed, "selection", i))
        synth = generate(
            usable,
            plan,
            cfg.k,
            derive(cfg.seed, "generation", i),
            current,
            metric=DistanceMetric.fit(current),
            base_mixture_p=cfg.base_mixture_p,
        )
        candidate_data = current.concat(synthetic_dataset(current, synth))
        candidate = _train(trainer, candidate_data, trainer_seed, iteration=i)
        j_new = j_train(
            candidate, frs, current, agreement_set=agreement_rows(frs, current, candidate_data)
        ).j_value

        accepted = j_new < j_hat
        j_before = j_hat
        if accepted:
            current, model, j_hat = candidate_data, candidate, j_new
            n_added += len(synth)
            bps = pre_select_bp(current, frs, cfg.k)
            if cfg.selector == "ip":
                weights = compute_weights(current, model, cfg.k_weights)
        elif cfg.selector == "ip":
            # las bases de un lote rechazado ceden el sitio en la próxima selección
            weights = decay_weights(weights, [row for _, row in plan.flat()])

        test_j_bar = j_bar_test(model, frs, eval_set).j_value if eval_set is not None and len(eval_set) else None
        traces.append(
            IterationTrace(
                iteration=i,
                generated=len(synth),
                accepted=accepted,
                j_before=j_before,
                j_after=j_new,
                n_total=n_added,
                overshoot=max(0, math.ceil(n_added - quota)),
                test_j_bar=test_j_bar,
            )
        )
        log.debug(
            f"iteración {i}: |S|={len(synth)}, Ĵ'={j_new:.4f} vs {j_before:.4f}, "
            f"{'aceptada' if accepted else 'descartada'}, N={n_added}"
        )
        i += 1
    else:
        stop_reason = STOP_QUOTA if n_added > quota else STOP_ITERATIONS

    final_report = j_train(model, frs, modified)
    log.info(
        f"fin ({stop_reason}): {i} iteraciones, {sum(t.accepted for t in traces)} aceptadas, "
        f"{n_added} instancias añadidas, Ĵ={j_hat:.4f}"
    )
    return AugmentationResult(
        dataset=current,
        model=model,
        initial_model=initial_model,
        mod_model=mod_model,
        modified=modified,
        rule_set=frs,
        eta=eta,
        traces=traces,
        initial_report=initial_report,
        mod_report=mod_report,
        final_report=final_report,
        stop_reason=stop_reason,
    )
