"""
Algoritmos de entrenamiento de caja negra: regresión logística (softmax),
árbol de decisión CART y un bosque aleatorio pequeño. Todos deterministas
dada la semilla.
"""

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from config import Config
from utils.dataset import Dataset, Instance, Schema
from utils.errors import ConfigError, SchemaMismatchError, TrainerError

log = logging.getLogger("models")

LOGISTIC_REGRESSION = "logistic_regression"
RANDOM_FOREST = "random_forest_lite"
DECISION_TREE = "decision_tree"

ALIASES = {
    "logreg": LOGISTIC_REGRESSION,
    "lr": LOGISTIC_REGRESSION,
    "forest": RANDOM_FOREST,
    "rf": RANDOM_FOREST,
    "tree": DECISION_TREE,
}

DEFAULTS = {
    LOGISTIC_REGRESSION: {
        "iterations": Config.LR_ITERATIONS,
        "learning_rate": Config.LR_LEARNING_RATE,
        "l2": 1e-4,
    },
    RANDOM_FOREST: {
        "n_trees": Config.FOREST_TREES,
        "max_depth": Config.FOREST_MAX_DEPTH,
        "bag_fraction": 1.0,
    },
    DECISION_TREE: {
        "max_depth": Config.TREE_MAX_DEPTH,
    },
}

FORMAT_VERSION = 1


@dataclass(frozen=True)
class TrainerSpec:
    """Tipo de algoritmo + hiperparámetros validados"""

    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        kind = ALIASES.get(self.kind, self.kind)
        if kind not in DEFAULTS:
            raise ConfigError(f"modelo desconocido '{self.kind}'")
        unknown = set(self.params) - set(DEFAULTS[kind])
        if unknown:
            raise ConfigError(f"hiperparámetros desconocidos para {kind}: {sorted(unknown)}")
        params = {**DEFAULTS[kind], **self.params}
        for name in ("iterations", "n_trees", "max_depth"):
            if name in params:
                if int(params[name]) != params[name] or params[name] < 1:
                    raise ConfigError(f"{name} debe ser un entero ≥ 1")
                params[name] = int(params[name])
        for name in ("learning_rate", "bag_fraction"):
            if name in params and not params[name] > 0:
                raise ConfigError(f"{name} debe ser > 0")
        if params.get("l2", 0) < 0:
            raise ConfigError("l2 debe ser ≥ 0")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "params", params)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": dict(self.params)}


# ──────────────────────────────────────────
# CODIFICACIÓN
# ──────────────────────────────────────────


class FeatureEncoder:
    """Numéricos tal cual; categóricos one-hot en el orden declarado del esquema"""

    def __init__(self, schema: Schema):
        self.schema = schema
        self.features: list[tuple[int, Optional[int]]] = []
        for j, a in enumerate(schema.attributes):
            if a.is_numeric:
                self.features.append((j, None))
            else:
                self.features.extend((j, c) for c in range(len(a.categories)))

    @property
    def width(self) -> int:
        return len(self.features)

    def transform(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        out = np.empty((X.shape[0], self.width))
        for f, (j, code) in enumerate(self.features):
            out[:, f] = X[:, j] if code is None else (X[:, j] == code)
        return out


# ──────────────────────────────────────────
# MODELOS
# ──────────────────────────────────────────


class Model:
    """Modelo ajustado. predict es determinista e inmutable tras el ajuste."""

    kind = "base"

    def __init__(self, schema: Schema):
        self.schema = schema
        self.fingerprint = schema.fingerprint
        self.encoder = FeatureEncoder(schema)

    def _check(self, schema: Schema):
        if schema.fingerprint != self.fingerprint:
            raise SchemaMismatchError("el esquema de los datos no coincide con el del modelo")

    def predict_codes(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def predict(self, x: Instance) -> str:
        self._check(x.schema)
        return self.schema.labels[int(self.predict_codes(x.encoded()[None, :])[0])]

    def predict_dataset(self, d: Dataset) -> np.ndarray:
        """Índices de clase predichos por fila"""
        self._check(d.schema)
        if len(d) == 0:
            return np.empty(0, dtype=int)
        return self.predict_codes(d.X)

    def state(self) -> dict:
        raise NotImplementedError


class ConstantModel(Model):
    kind = "constant"

    def __init__(self, schema: Schema, code: int):
        super().__init__(schema)
        self.code = int(code)

    def predict_codes(self, X):
        return np.full(np.atleast_2d(X).shape[0], self.code, dtype=int)

    def state(self):
        return {"code": self.code}


# ── Regresión logística ─────────────────────


def softmax(Z: np.ndarray) -> np.ndarray:
    Z = Z - Z.max(axis=1, keepdims=True)
    E = np.exp(Z)
    return E / E.sum(axis=1, keepdims=True)


def softmax_loss_and_grad(W: np.ndarray, b: np.ndarray, X: np.ndarray, Y: np.ndarray, l2: float = 0.0):
    """Entropía cruzada media (+ l2/2·|W|²) y su gradiente. Y en one-hot."""
    n = X.shape[0]
    P = softmax(X @ W + b)
    loss = -np.sum(Y * np.log(np.clip(P, 1e-300, None))) / n + 0.5 * l2 * np.sum(W * W)
    G = (P - Y) / n
    return loss, X.T @ G + l2 * W, G.sum(axis=0)


class LogisticModel(Model):
    kind = LOGISTIC_REGRESSION

    def __init__(self, schema, mean, scale, W, b):
        super().__init__(schema)
        self.mean = np.asarray(mean, dtype=float)
        self.scale = np.asarray(scale, dtype=float)
        self.W = np.asarray(W, dtype=float)
        self.b = np.asarray(b, dtype=float)

    def scores(self, X: np.ndarray) -> np.ndarray:
        F = (self.encoder.transform(X) - self.mean) / self.scale
        return F @ self.W + self.b

    def predict_codes(self, X):
        return np.argmax(self.scores(X), axis=1)

    def state(self):
        return {
            "mean": self.mean.tolist(),
            "scale": self.scale.tolist(),
            "W": self.W.tolist(),
            "b": self.b.tolist(),
        }


def _fit_logistic(spec: TrainerSpec, d: Dataset) -> LogisticModel:
    schema = d.schema
    encoder = FeatureEncoder(schema)
    F = encoder.transform(d.X)
    mean = F.mean(axis=0)
    scale = F.std(axis=0)
    scale[scale == 0] = 1.0
    X = (F - mean) / scale
    Y = np.eye(len(schema.labels))[d.y]

    W = np.zeros((X.shape[1], Y.shape[1]))
    b = np.zeros(Y.shape[1])
    lr = spec.params["learning_rate"]
    l2 = spec.params["l2"]
    loss, gW, gb = softmax_loss_and_grad(W, b, X, Y, l2)
    for _ in range(spec.params["iterations"]):
        W_new, b_new = W - lr * gW, b - lr * gb
        new_loss, new_gW, new_gb = softmax_loss_and_grad(W_new, b_new, X, Y, l2)
        if new_loss > loss:
            lr /= 2
            if lr < 1e-12:
                break
            continue
        W, b, loss, gW, gb = W_new, b_new, new_loss, new_gW, new_gb
    if not np.all(np.isfinite(W)):
        raise TrainerError("la regresión logística divergió")
    return LogisticModel(schema, mean, scale, W, b)


# ── Árboles ─────────────────────────────────


@dataclass
class Node:
    counts: np.ndarray
    feature: Optional[int] = None
    threshold: Optional[float] = None
    left: Optional["Node"] = None
    right: Optional["Node"] = None

    @property
    def is_leaf(self) -> bool:
        return self.feature is None

    def to_dict(self) -> dict:
        if self.is_leaf:
            return {"counts": self.counts.tolist()}
        return {
            "counts": self.counts.tolist(),
            "feature": self.feature,
            "threshold": self.threshold,
            "left": self.left.to_dict(),
            "right": self.right.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Node":
        node = cls(np.asarray(data["counts"], dtype=float))
        if "feature" in data:
            node.feature = int(data["feature"])
            node.threshold = float(data["threshold"])
            node.left = cls.from_dict(data["left"])
            node.right = cls.from_dict(data["right"])
        return node


def gini(counts: np.ndarray) -> float:
    n = counts.sum()
    if n == 0:
        return 0.0
    p = counts / n
    return float(1.0 - np.sum(p * p))


def best_split(F: np.ndarray, y: np.ndarray, n_classes: int, features: np.ndarray):
    """(coste, atributo, umbral) del mejor corte x < t por gini; None si no hay"""
    n = len(y)
    best = None
    onehot = np.eye(n_classes)[y]
    for f in features:
        order = np.argsort(F[:, f], kind="stable")
        xs = F[order, f]
        left = np.cumsum(onehot[order], axis=0)[:-1]
        total = left[-1] + onehot[order[-1]] if n > 1 else onehot[order[-1]]
        right = total - left
        nl = np.arange(1, n, dtype=float)
        nr = n - nl
        gl = 1.0 - np.sum((left / nl[:, None]) ** 2, axis=1)
        gr = 1.0 - np.sum((right / nr[:, None]) ** 2, axis=1)
        cost = (nl * gl + nr * gr) / n
        valid = xs[1:] > xs[:-1]
        if not np.any(valid):
            continue
        cost = np.where(valid, cost, np.inf)
        i = int(np.argmin(cost))
        if best is None or cost[i] < best[0]:
            best = (float(cost[i]), int(f), float((xs[i] + xs[i + 1]) / 2))
    return best


def grow_tree(
    F: np.ndarray,
    y: np.ndarray,
    n_classes: int,
    max_depth: int,
    rng: Optional[np.random.Generator] = None,
    max_features: Optional[int] = None,
    depth: int = 0,
) -> Node:
    counts = np.bincount(y, minlength=n_classes).astype(float)
    node = Node(counts)
    if depth >= max_depth or len(y) < 2 or np.count_nonzero(counts) < 2:
        return node
    p = F.shape[1]
    if rng is not None and max_features is not None and max_features < p:
        features = np.sort(rng.choice(p, size=max_features, replace=False))
    else:
        features = np.arange(p)
    split = best_split(F, y, n_classes, features)
    if split is None or split[0] >= gini(counts) - 1e-12:
        return node
    _, f, t = split
    mask = F[:, f] < t
    node.feature, node.threshold = f, t
    node.left = grow_tree(F[mask], y[mask], n_classes, max_depth, rng, max_features, depth + 1)
    node.right = grow_tree(F[~mask], y[~mask], n_classes, max_depth, rng, max_features, depth + 1)
    return node


def _leaf_counts(node: Node, row: np.ndarray) -> np.ndarray:
    while not node.is_leaf:
        node = node.left if row[node.feature] < node.threshold else node.right
    return node.counts


class TreeModel(Model):
    kind = DECISION_TREE

    def __init__(self, schema, root: Node):
        super().__init__(schema)
        self.root = root

    def predict_codes(self, X):
        F = self.encoder.transform(X)
        return np.array([int(np.argmax(_leaf_counts(self.root, row))) for row in F], dtype=int)

    def paths(self) -> list[tuple[list[tuple[int, str, float]], int, int]]:
        """Caminos raíz→hoja: ([(feature, '<' | '>=', umbral)], clase, filas)"""
        out = []

        def walk(node, conds):
            if node.is_leaf:
                out.append((conds, int(np.argmax(node.counts)), int(node.counts.sum())))
                return
            walk(node.left, conds + [(node.feature, "<", node.threshold)])
            walk(node.right, conds + [(node.feature, ">=", node.threshold)])

        walk(self.root, [])
        return out

    def state(self):
        return {"root": self.root.to_dict()}


class ForestModel(Model):
    kind = RANDOM_FOREST

    def __init__(self, schema, trees: list[Node]):
        super().__init__(schema)
        self.trees = trees

    def predict_codes(self, X):
        F = self.encoder.transform(X)
        out = np.empty(F.shape[0], dtype=int)
        for i, row in enumerate(F):
            votes = np.zeros(len(self.schema.labels))
            for t in self.trees:
                c = _leaf_counts(t, row)
                votes += c / c.sum()
            out[i] = int(np.argmax(votes))
        return out

    def state(self):
        return {"trees": [t.to_dict() for t in self.trees]}


def _fit_tree(spec: TrainerSpec, d: Dataset) -> TreeModel:
    F = FeatureEncoder(d.schema).transform(d.X)
    return TreeModel(d.schema, grow_tree(F, d.y, len(d.schema.labels), spec.params["max_depth"]))


def _fit_forest(spec: TrainerSpec, d: Dataset, seed: int) -> ForestModel:
    F = FeatureEncoder(d.schema).transform(d.X)
    n = len(d)
    rng = np.random.default_rng(seed)
    size = max(1, int(round(spec.params["bag_fraction"] * n)))
    max_features = max(1, int(math.floor(math.sqrt(F.shape[1]))))
    trees = []
    for _ in range(spec.params["n_trees"]):
        idx = rng.integers(0, n, size=size)
        trees.append(
            grow_tree(
                F[idx], d.y[idx], len(d.schema.labels), spec.params["max_depth"], rng, max_features
            )
        )
    return ForestModel(d.schema, trees)


def train(spec: TrainerSpec, d: Dataset, seed: int = 0) -> Model:
    """M = A(D). Con una sola clase presente devuelve un clasificador constante."""
    if len(d) == 0:
        raise TrainerError("no se puede entrenar con un dataset vacío")
    present = np.unique(d.y)
    if len(present) == 1:
        log.debug(f"una sola clase presente: modelo constante '{d.schema.labels[present[0]]}'")
        return ConstantModel(d.schema, int(present[0]))
    try:
        with np.errstate(over="raise", invalid="raise"):
            if spec.kind == LOGISTIC_REGRESSION:
                return _fit_logistic(spec, d)
            if spec.kind == DECISION_TREE:
                return _fit_tree(spec, d)
            return _fit_forest(spec, d, seed)
    except FloatingPointError as e:
        raise TrainerError(f"{spec.kind}: error numérico ({e})") from None


# ──────────────────────────────────────────
# PERSISTENCIA
# ──────────────────────────────────────────


def model_to_dict(model: Model) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "kind": model.kind,
        "schema": model.schema.to_dict(),
        "state": model.state(),
    }


def model_from_dict(data: dict) -> Model:
    if data.get("format_version") != FORMAT_VERSION:
        raise SchemaMismatchError(f"versión de modelo no soportada: {data.get('format_version')}")
    schema = Schema.from_dict(data["schema"])
    state = data["state"]
    kind = data["kind"]
    if kind == ConstantModel.kind:
        return ConstantModel(schema, state["code"])
    if kind == LOGISTIC_REGRESSION:
        return LogisticModel(schema, state["mean"], state["scale"], state["W"], state["b"])
    if kind == DECISION_TREE:
        return TreeModel(schema, Node.from_dict(state["root"]))
    if kind == RANDOM_FOREST:
        return ForestModel(schema, [Node.from_dict(t) for t in state["trees"]])
    raise SchemaMismatchError(f"tipo de modelo desconocido '{kind}'")


def save_model(model: Model, path: Union[str, Path]):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh)


def load_model(path: Union[str, Path]) -> Model:
    with open(path, encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))
