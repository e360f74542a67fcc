"""
Reglas de feedback: predicados, cláusulas, distribuciones de etiquetas,
cobertura y resolución de conflictos.

La intersección de coberturas se decide sobre el dominio completo (no sobre
un dataset): cada cláusula induce una caja (intervalos por atributo numérico,
conjuntos de categorías por atributo categórico) y las exclusiones son cajas
que se restan. Los atributos numéricos se tratan como reales sin cota.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from utils.dataset import Attribute, Dataset, Instance, Schema, Value, format_number
from utils.errors import DistributionError, RuleConflictError, RuleTypeError

log = logging.getLogger("rules")

NUMERIC_OPERATORS = ("=", ">", ">=", "<", "<=")
CATEGORICAL_OPERATORS = ("=", "!=")

# Operador invertido (perturbación de reglas): = ↔ ≠, ≤ ↔ ≥, < ↔ >
REVERSED = {"=": "!=", "!=": "=", "<": ">", ">": "<", "<=": ">=", ">=": "<="}

PROBABILITY_TOLERANCE = 1e-9

EXCLUDE_INTERSECTION = "exclude_intersection"
MIXTURE = "mixture"


# ──────────────────────────────────────────
# PREDICADOS Y CLÁUSULAS
# ──────────────────────────────────────────


@dataclass(frozen=True)
class Predicate:
    """Condición (atributo, operador, valor)"""

    attribute: str
    operator: str
    value: Value

    def holds(self, v: Value) -> bool:
        op, ref = self.operator, self.value
        if op == "=":
            return v == ref
        if op == "!=":
            return v != ref
        if op == "<":
            return v < ref
        if op == "<=":
            return v <= ref
        if op == ">":
            return v > ref
        return v >= ref

    def mask(self, column: np.ndarray, attr: Attribute) -> np.ndarray:
        """Evalúa el predicado sobre una columna codificada"""
        ref = float(self.value) if attr.is_numeric else attr.code(self.value)
        op = self.operator
        if op == "=":
            return column == ref
        if op == "!=":
            return column != ref
        if op == "<":
            return column < ref
        if op == "<=":
            return column <= ref
        if op == ">":
            return column > ref
        return column >= ref

    def validate(self, schema: Schema):
        if not schema.has_attribute(self.attribute):
            raise RuleTypeError(f"atributo desconocido '{self.attribute}'")
        attr = schema.attribute(self.attribute)
        if attr.is_numeric:
            if self.operator not in NUMERIC_OPERATORS:
                raise RuleTypeError(
                    f"operador '{self.operator}' no permitido en el atributo numérico '{attr.name}'"
                )
            if isinstance(self.value, str) or not math.isfinite(self.value):
                raise RuleTypeError(f"'{attr.name}' es numérico: valor inválido {self.value!r}")
        else:
            if self.operator not in CATEGORICAL_OPERATORS:
                raise RuleTypeError(
                    f"operador '{self.operator}' no permitido en el atributo categórico '{attr.name}'"
                )
            if not isinstance(self.value, str) or self.value not in attr.categories:
                raise RuleTypeError(
                    f"'{self.value}' no es una categoría de '{attr.name}'"
                )

    def negations(self) -> list["Predicate"]:
        """Predicados cuya disyunción es la negación de éste"""
        if self.operator == "=" and not isinstance(self.value, str):
            return [replace(self, operator="<"), replace(self, operator=">")]
        negated = {"=": "!=", "!=": "=", "<": ">=", ">=": "<", ">": "<=", "<=": ">"}
        return [replace(self, operator=negated[self.operator])]

    def render(self) -> str:
        literal = quote(self.value) if isinstance(self.value, str) else format_number(self.value)
        return f"{self.attribute} {self.operator} {literal}"


@dataclass(frozen=True)
class Clause:
    """Conjunción de predicados. La cláusula vacía cubre todo el dominio."""

    predicates: tuple[Predicate, ...] = ()

    def __len__(self) -> int:
        return len(self.predicates)

    @property
    def is_empty(self) -> bool:
        return not self.predicates

    def holds(self, x: Instance) -> bool:
        return all(p.holds(x[p.attribute]) for p in self.predicates)

    def mask(self, d: Dataset) -> np.ndarray:
        out = np.ones(len(d), dtype=bool)
        for p in self.predicates:
            j = d.schema.index(p.attribute)
            out &= p.mask(d.X[:, j], d.schema.attributes[j])
        return out

    def conditions_on(self, name: str) -> list[Predicate]:
        return [p for p in self.predicates if p.attribute == name]

    def without(self, index: int) -> "Clause":
        return Clause(self.predicates[:index] + self.predicates[index + 1:])

    def conjoin(self, other: "Clause") -> "Clause":
        return Clause(self.predicates + other.predicates)

    def render(self) -> str:
        return " AND ".join(p.render() for p in self.predicates)


EMPTY_CLAUSE = Clause()


# ──────────────────────────────────────────
# DISTRIBUCIONES DE ETIQUETAS
# ──────────────────────────────────────────


@dataclass(frozen=True)
class LabelDistribution:
    """π: probabilidad por clase. Se guarda ordenada y sin entradas nulas."""

    weights: tuple[tuple[str, float], ...]

    def __post_init__(self):
        if not self.weights:
            raise DistributionError("distribución vacía")
        labels = [lbl for lbl, _ in self.weights]
        if len(set(labels)) != len(labels):
            raise DistributionError(f"clases repetidas en la distribución: {labels}")
        if any(p < 0 or not math.isfinite(p) for _, p in self.weights):
            raise DistributionError("probabilidades negativas o no finitas")
        total = sum(p for _, p in self.weights)
        if abs(total - 1.0) > PROBABILITY_TOLERANCE:
            raise DistributionError(f"las probabilidades suman {total}, no 1")
        canonical = tuple(sorted((lbl, float(p)) for lbl, p in self.weights if p > 0))
        object.__setattr__(self, "weights", canonical)

    @classmethod
    def delta(cls, label: str) -> "LabelDistribution":
        return cls(((label, 1.0),))

    @classmethod
    def from_mapping(cls, mapping: dict) -> "LabelDistribution":
        return cls(tuple(mapping.items()))

    @property
    def support(self) -> list[str]:
        return [lbl for lbl, _ in self.weights]

    @property
    def is_deterministic(self) -> bool:
        return len(self.weights) == 1

    @property
    def mode(self) -> str:
        return max(self.weights, key=lambda kv: kv[1])[0]

    def prob(self, label: str) -> float:
        for lbl, p in self.weights:
            if lbl == label:
                return p
        return 0.0

    def same_as(self, other: "LabelDistribution") -> bool:
        labels = set(self.support) | set(other.support)
        return all(abs(self.prob(c) - other.prob(c)) <= PROBABILITY_TOLERANCE for c in labels)

    def mix(self, other: "LabelDistribution", weight: float) -> "LabelDistribution":
        """weight·self + (1−weight)·other"""
        labels = sorted(set(self.support) | set(other.support))
        mixed = [(c, weight * self.prob(c) + (1 - weight) * other.prob(c)) for c in labels]
        total = sum(p for _, p in mixed)
        return LabelDistribution(tuple((c, p / total) for c, p in mixed))

    def validate(self, schema: Schema):
        for lbl in self.support:
            if lbl not in schema.labels:
                raise RuleTypeError(f"clase desconocida '{lbl}'")

    def render(self) -> str:
        if self.is_deterministic:
            return f"class = {quote(self.weights[0][0])}"
        body = ", ".join(f"{quote(lbl)}: {p!r}" for lbl, p in self.weights)
        return f"class ~ {{{body}}}"


def quote(text: str) -> str:
    """Literal entre comillas dobles, con escapes"""
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def sample_label(dist: LabelDistribution, rng: Optional[np.random.Generator]) -> str:
    """Etiqueta muestreada según π. La delta no consume el generador."""
    if dist.is_deterministic:
        return dist.weights[0][0]
    if rng is None:
        raise DistributionError("distribución probabilística sin generador aleatorio")
    cumulative = np.cumsum([p for _, p in dist.weights])
    u = rng.random() * cumulative[-1]
    k = int(np.searchsorted(cumulative, u, side="right"))
    return dist.weights[min(k, len(dist.weights) - 1)][0]


# ──────────────────────────────────────────
# REGLAS
# ──────────────────────────────────────────


@dataclass(frozen=True)
class FeedbackRule:
    """
    IF clause AND NOT exclusion_1 AND NOT ... THEN Y ~ π
    """

    id: str
    clause: Clause
    distribution: LabelDistribution
    exclusions: tuple[Clause, ...] = ()

    @property
    def members(self) -> tuple["FeedbackRule", ...]:
        return (self,)

    def satisfies(self, x: Instance) -> bool:
        if not self.clause.holds(x):
            return False
        return not any(e.holds(x) for e in self.exclusions)

    def mask(self, d: Dataset) -> np.ndarray:
        out = self.clause.mask(d)
        for e in self.exclusions:
            out &= ~e.mask(d)
        return out

    def with_exclusions(self, clauses: Iterable[Clause]) -> "FeedbackRule":
        extra = tuple(c for c in clauses if c not in self.exclusions)
        return replace(self, exclusions=self.exclusions + extra)

    def render(self, prefix: Optional[str] = None) -> str:
        head = f"{prefix or self.id}: IF {self.clause.render()}"
        for e in self.exclusions:
            head += f" AND NOT ({e.render()})"
        return f"{head} THEN {self.distribution.render()}"


@dataclass(frozen=True)
class RuleGroup:
    """Reglas solapadas con la misma π: se satisface si alguna miembro se satisface"""

    id: str
    members: tuple[FeedbackRule, ...]
    distribution: LabelDistribution

    def satisfies(self, x: Instance) -> bool:
        return any(m.satisfies(x) for m in self.members)

    def mask(self, d: Dataset) -> np.ndarray:
        out = np.zeros(len(d), dtype=bool)
        for m in self.members:
            out |= m.mask(d)
        return out

    def member_for(self, x: Instance) -> Optional[FeedbackRule]:
        for m in self.members:
            if m.satisfies(x):
                return m
        return None

    def render(self) -> str:
        return "\n".join(m.render(prefix=f"{self.id}/{m.id}") for m in self.members)


Rule = Union[FeedbackRule, RuleGroup]


@dataclass(frozen=True)
class FeedbackRuleSet:
    """F = {(s_r, π_r)}, validado contra el esquema"""

    schema: Schema
    rules: tuple[Rule, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "rules", tuple(self.rules))
        ids = [r.id for r in self.rules]
        if len(set(ids)) != len(ids):
            raise RuleTypeError(f"ids de regla repetidos: {ids}")
        for r in self.rules:
            r.distribution.validate(self.schema)
            for m in r.members:
                for p in m.clause.predicates:
                    p.validate(self.schema)
                for e in m.exclusions:
                    for p in e.predicates:
                        p.validate(self.schema)

    def __len__(self) -> int:
        return len(self.rules)

    def __iter__(self):
        return iter(self.rules)

    @property
    def ids(self) -> list[str]:
        return [r.id for r in self.rules]

    def get(self, rule_id: str) -> Rule:
        for r in self.rules:
            if r.id == rule_id:
                return r
        raise KeyError(rule_id)

    def render(self) -> str:
        return "\n".join(r.render() for r in self.rules) + ("\n" if self.rules else "")


# ──────────────────────────────────────────
# SATISFACCIÓN Y COBERTURA
# ──────────────────────────────────────────


def satisfies(rule: Rule, x: Instance) -> bool:
    return rule.satisfies(x)


def coverage_mask(target: Union[Rule, FeedbackRuleSet, Clause], d: Dataset) -> np.ndarray:
    if isinstance(target, FeedbackRuleSet):
        out = np.zeros(len(d), dtype=bool)
        for r in target.rules:
            out |= r.mask(d)
        return out
    return target.mask(d)


def coverage(target: Union[Rule, FeedbackRuleSet, Clause], d: Dataset) -> set[int]:
    """Índices de filas cuyos atributos satisfacen la regla (las etiquetas no cuentan)"""
    return set(int(i) for i in np.flatnonzero(coverage_mask(target, d)))


def assign_rules(frs: FeedbackRuleSet, d: Dataset) -> np.ndarray:
    """Por fila, índice de la primera regla que la cubre (−1 si ninguna)"""
    owner = np.full(len(d), -1, dtype=int)
    for r_idx, r in enumerate(frs.rules):
        m = r.mask(d) & (owner < 0)
        owner[m] = r_idx
    return owner


# ──────────────────────────────────────────
# GEOMETRÍA DEL DOMINIO
# ──────────────────────────────────────────


@dataclass(frozen=True)
class Interval:
    lo: float = -math.inf
    lo_closed: bool = False
    hi: float = math.inf
    hi_closed: bool = False

    @property
    def is_empty(self) -> bool:
        if self.lo > self.hi:
            return True
        if self.lo == self.hi:
            return not (self.lo_closed and self.hi_closed) or math.isinf(self.lo)
        return False

    def intersect(self, other: "Interval") -> "Interval":
        if self.lo > other.lo or (self.lo == other.lo and not self.lo_closed):
            lo, lo_closed = self.lo, self.lo_closed
        else:
            lo, lo_closed = other.lo, other.lo_closed
        if self.hi < other.hi or (self.hi == other.hi and not self.hi_closed):
            hi, hi_closed = self.hi, self.hi_closed
        else:
            hi, hi_closed = other.hi, other.hi_closed
        return Interval(lo, lo_closed, hi, hi_closed)

    def contains(self, v: float) -> bool:
        above = v > self.lo or (v == self.lo and self.lo_closed)
        below = v < self.hi or (v == self.hi and self.hi_closed)
        return above and below


FULL_INTERVAL = Interval()


def predicate_interval(p: Predicate) -> Interval:
    v = float(p.value)
    if p.operator == "=":
        return Interval(v, True, v, True)
    if p.operator == "<":
        return Interval(hi=v, hi_closed=False)
    if p.operator == "<=":
        return Interval(hi=v, hi_closed=True)
    if p.operator == ">":
        return Interval(lo=v, lo_closed=False)
    return Interval(lo=v, lo_closed=True)


def predicate_categories(p: Predicate, attr: Attribute) -> frozenset:
    code = attr.code(p.value)
    if p.operator == "=":
        return frozenset({code})
    return frozenset(range(len(attr.categories))) - {code}


def clause_box(clause: Clause, schema: Schema) -> Optional[dict]:
    """Caja inducida por la cláusula, o None si es insatisfacible"""
    box: dict = {}
    for p in clause.predicates:
        attr = schema.attribute(p.attribute)
        if attr.is_numeric:
            box[attr.name] = box.get(attr.name, FULL_INTERVAL).intersect(predicate_interval(p))
        else:
            full = frozenset(range(len(attr.categories)))
            box[attr.name] = box.get(attr.name, full) & predicate_categories(p, attr)
    return None if _box_is_empty(box) else box


def _box_is_empty(box: dict) -> bool:
    for part in box.values():
        if isinstance(part, Interval):
            if part.is_empty:
                return True
        elif not part:
            return True
    return False


def _full_part(attr: Attribute):
    return FULL_INTERVAL if attr.is_numeric else frozenset(range(len(attr.categories)))


def _box_intersect(a: dict, b: dict, schema: Schema) -> Optional[dict]:
    out = dict(a)
    for name, part in b.items():
        if name in out:
            cur = out[name]
            out[name] = cur.intersect(part) if isinstance(cur, Interval) else cur & part
        else:
            out[name] = part
    return None if _box_is_empty(out) else out


def _box_subtract(a: dict, hole: dict, schema: Schema) -> list[dict]:
    """a \\ hole como lista de cajas disjuntas"""
    if _box_intersect(a, hole, schema) is None:
        return [a]
    pieces = []
    cur = dict(a)
    for attr in schema.attributes:
        if attr.name not in hole:
            continue
        h = hole[attr.name]
        c = cur.get(attr.name, _full_part(attr))
        if isinstance(c, Interval):
            below = c.intersect(Interval(-math.inf, False, h.lo, not h.lo_closed))
            above = c.intersect(Interval(h.hi, not h.hi_closed, math.inf, False))
            for part in (below, above):
                if not part.is_empty:
                    pieces.append({**cur, attr.name: part})
            cur[attr.name] = c.intersect(h)
        else:
            outside = c - h
            if outside:
                pieces.append({**cur, attr.name: outside})
            cur[attr.name] = c & h
    return pieces


def _region_is_empty(box: dict, holes: Sequence[dict], schema: Schema) -> bool:
    pieces = [box]
    for hole in holes:
        pieces = [piece for p in pieces for piece in _box_subtract(p, hole, schema)]
        if not pieces:
            return True
    return not pieces


def _regions(rule: Rule, schema: Schema) -> list[tuple[dict, list[dict]]]:
    out = []
    for m in rule.members:
        box = clause_box(m.clause, schema)
        if box is None:
            continue
        holes = [h for h in (clause_box(e, schema) for e in m.exclusions) if h is not None]
        out.append((box, holes))
    return out


def is_satisfiable(rule: Rule, schema: Schema) -> bool:
    return any(not _region_is_empty(b, h, schema) for b, h in _regions(rule, schema))


def domains_intersect(a: Rule, b: Rule, schema: Schema) -> bool:
    """cov(a) ∩ cov(b) ≠ ∅ sobre el dominio completo"""
    for box_a, holes_a in _regions(a, schema):
        for box_b, holes_b in _regions(b, schema):
            both = _box_intersect(box_a, box_b, schema)
            if both is not None and not _region_is_empty(both, holes_a + holes_b, schema):
                return True
    return False


# ──────────────────────────────────────────
# CONFLICTOS
# ──────────────────────────────────────────


def _conflict_index_pairs(rules: Sequence[Rule], schema: Schema) -> list[tuple[int, int]]:
    pairs = []
    for i in range(len(rules)):
        for j in range(i + 1, len(rules)):
            if rules[i].distribution.same_as(rules[j].distribution):
                continue
            if domains_intersect(rules[i], rules[j], schema):
                pairs.append((i, j))
    return pairs


def detect_conflicts(frs: FeedbackRuleSet) -> list[tuple[str, str]]:
    """Pares de reglas con coberturas que se intersecan y π distintas"""
    return [
        (frs.rules[i].id, frs.rules[j].id)
        for i, j in _conflict_index_pairs(frs.rules, frs.schema)
    ]


def _exclude(rule: Rule, other: Rule) -> Rule:
    clauses = [m.clause for m in other.members]
    if isinstance(rule, RuleGroup):
        return replace(rule, members=tuple(m.with_exclusions(clauses) for m in rule.members))
    return rule.with_exclusions(clauses)


def resolve_conflicts(
    frs: FeedbackRuleSet, policy: str = EXCLUDE_INTERSECTION, weight: float = 0.5
) -> FeedbackRuleSet:
    """
    Resuelve conflictos por pares hasta que no quede ninguno:
    - exclude_intersection: cada regla excluye la cláusula de la otra
    - mixture: además crea una regla para la intersección con
      π = weight·π_1 + (1−weight)·π_2
    """
    if policy not in (EXCLUDE_INTERSECTION, MIXTURE):
        raise RuleTypeError(f"política de resolución desconocida '{policy}'")
    if not 0.0 <= weight <= 1.0:
        raise RuleTypeError(f"peso de mezcla fuera de [0,1]: {weight}")

    rules = list(frs.rules)
    guard = 50 * max(len(rules), 1) ** 2
    for _ in range(guard):
        pairs = _conflict_index_pairs(rules, frs.schema)
        if not pairs:
            break
        i, j = pairs[0]
        a, b = rules[i], rules[j]
        extra = []
        if policy == MIXTURE:
            mixed = a.distribution.mix(b.distribution, weight)
            for ma in a.members:
                for mb in b.members:
                    if not domains_intersect(ma, mb, frs.schema):
                        continue
                    extra.append(
                        FeedbackRule(
                            id=f"{ma.id}&{mb.id}",
                            clause=ma.clause.conjoin(mb.clause),
                            distribution=mixed,
                            exclusions=ma.exclusions + mb.exclusions,
                        )
                    )
        log.debug(f"conflicto {a.id} / {b.id} resuelto con {policy}")
        rules[i] = _exclude(a, b)
        rules[j] = _exclude(b, a)
        taken = {r.id for r in rules}
        for r in extra:
            rid, n = r.id, 2
            while rid in taken:
                rid, n = f"{r.id}_{n}", n + 1
            taken.add(rid)
            rules.append(replace(r, id=rid))
    else:
        raise RuleConflictError("la resolución de conflictos no convergió")
    return FeedbackRuleSet(frs.schema, tuple(rules))


def merge_overlapping(frs: FeedbackRuleSet) -> FeedbackRuleSet:
    """
    Agrupa (clausura transitiva) las reglas que se solapan con la misma π.
    El resultado tiene coberturas disjuntas dos a dos.
    """
    rules = list(frs.rules)
    parent = list(range(len(rules)))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(len(rules)):
        for j in range(i + 1, len(rules)):
            if not domains_intersect(rules[i], rules[j], frs.schema):
                continue
            if not rules[i].distribution.same_as(rules[j].distribution):
                raise RuleConflictError(
                    f"las reglas {rules[i].id} y {rules[j].id} están en conflicto; resuélvalas antes"
                )
            ri, rj = find(i), find(j)
            if ri != rj:
                parent[max(ri, rj)] = min(ri, rj)

    components: dict[int, list[int]] = {}
    for i in range(len(rules)):
        components.setdefault(find(i), []).append(i)

    merged = []
    for root in sorted(components):
        idx = components[root]
        if len(idx) == 1:
            merged.append(rules[idx[0]])
            continue
        members = tuple(m for i in idx for m in rules[i].members)
        merged.append(
            RuleGroup(
                id="|".join(rules[i].id for i in idx),
                members=members,
                distribution=rules[idx[0]].distribution,
            )
        )
        log.debug(f"reglas fusionadas: {[rules[i].id for i in idx]}")
    return FeedbackRuleSet(frs.schema, tuple(merged))


def prepare_rule_set(frs: FeedbackRuleSet) -> FeedbackRuleSet:
    """Exige un conjunto sin conflictos y lo deja con coberturas disjuntas"""
    conflicts = detect_conflicts(frs)
    if conflicts:
        raise RuleConflictError(f"conflictos sin resolver: {conflicts}")
    return merge_overlapping(frs)
