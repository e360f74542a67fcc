"""
Datos tabulares tipados: esquema, instancias, datasets y lectura/escritura CSV
"""

import hashlib
import json
import logging
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import numpy as np
import pandas as pd

from utils.errors import DatasetParseError, SchemaError

log = logging.getLogger("dataset")

NUMERIC = "numeric"
CATEGORICAL = "categorical"
PROVENANCE_COLUMN = "_provenance"

Value = Union[float, str]


@dataclass(frozen=True)
class Attribute:
    """Un atributo del esquema (numérico o categórico)"""

    name: str
    kind: str
    categories: Optional[tuple[str, ...]] = None

    @property
    def is_numeric(self) -> bool:
        return self.kind == NUMERIC

    def code(self, token: str) -> int:
        """Índice de una categoría según el orden declarado"""
        try:
            return self.categories.index(token)
        except ValueError:
            raise SchemaError(
                f"categoría desconocida '{token}' para '{self.name}'"
            ) from None

    def token(self, code: float) -> str:
        return self.categories[int(code)]


@dataclass(frozen=True)
class Schema:
    """Esquema de un dataset: atributos ordenados, columna de etiqueta y clases"""

    attributes: tuple[Attribute, ...]
    label_name: str
    labels: tuple[str, ...]

    def __post_init__(self):
        if not self.attributes:
            raise SchemaError("el esquema no declara atributos")
        names = [a.name for a in self.attributes]
        if len(set(names)) != len(names):
            raise SchemaError(f"nombres de atributo repetidos: {names}")
        if self.label_name in names:
            raise SchemaError(f"la etiqueta '{self.label_name}' choca con un atributo")
        for a in self.attributes:
            if a.kind not in (NUMERIC, CATEGORICAL):
                raise SchemaError(f"tipo inválido '{a.kind}' en '{a.name}'")
            if a.kind == CATEGORICAL:
                if not a.categories:
                    raise SchemaError(f"'{a.name}' es categórico pero no declara categorías")
                if len(set(a.categories)) != len(a.categories):
                    raise SchemaError(f"categorías repetidas en '{a.name}'")
        if len(self.labels) < 2:
            raise SchemaError("se necesitan al menos 2 clases")
        if len(set(self.labels)) != len(self.labels):
            raise SchemaError("clases repetidas")

    # ── Consultas ─────────────────────────────

    @property
    def names(self) -> list[str]:
        return [a.name for a in self.attributes]

    @property
    def width(self) -> int:
        return len(self.attributes)

    def index(self, name: str) -> int:
        for i, a in enumerate(self.attributes):
            if a.name == name:
                return i
        raise SchemaError(f"atributo desconocido '{name}'")

    def attribute(self, name: str) -> Attribute:
        return self.attributes[self.index(name)]

    def has_attribute(self, name: str) -> bool:
        return any(a.name == name for a in self.attributes)

    def label_index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise SchemaError(f"clase desconocida '{label}'") from None

    @cached_property
    def fingerprint(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode("utf-8")
        return hashlib.sha1(blob).hexdigest()

    # ── Serialización ─────────────────────────

    def to_dict(self) -> dict:
        attrs = []
        for a in self.attributes:
            entry = {"name": a.name, "kind": a.kind}
            if a.categories is not None:
                entry["categories"] = list(a.categories)
            attrs.append(entry)
        return {
            "attributes": attrs,
            "label": {"name": self.label_name, "classes": list(self.labels)},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Schema":
        try:
            attrs = tuple(
                Attribute(
                    name=str(a["name"]),
                    kind=str(a["kind"]),
                    categories=(
                        tuple(str(c) for c in a["categories"])
                        if a.get("categories") is not None
                        else None
                    ),
                )
                for a in data["attributes"]
            )
            label = data["label"]
            return cls(
                attributes=attrs,
                label_name=str(label["name"]),
                labels=tuple(str(c) for c in label["classes"]),
            )
        except (KeyError, TypeError) as e:
            raise SchemaError(f"esquema mal formado: falta {e}") from None


def load_schema(path: Union[str, Path]) -> Schema:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as e:
        raise SchemaError(f"JSON inválido en {path}: {e}") from None
    return Schema.from_dict(data)


def save_schema(schema: Schema, path: Union[str, Path]):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(schema.to_dict(), fh, indent=2)


@dataclass(frozen=True)
class Provenance:
    """Origen de una fila: original o sintética (regla, base, vecino)"""

    kind: str = "original"
    rule_id: Optional[str] = None
    base_idx: Optional[int] = None
    neighbor_idx: Optional[int] = None

    @property
    def is_synthetic(self) -> bool:
        return self.kind == "synthetic"

    def to_token(self) -> str:
        if not self.is_synthetic:
            return "original"
        return f"synthetic:{self.rule_id}:{self.base_idx}:{self.neighbor_idx}"

    @classmethod
    def from_token(cls, token: str) -> "Provenance":
        if token in ("", "original"):
            return ORIGINAL
        parts = token.rsplit(":", 2)
        head, base, nbr = parts if len(parts) == 3 else ("", "", "")
        if not head.startswith("synthetic:"):
            raise ValueError(f"procedencia inválida '{token}'")
        return cls("synthetic", head[len("synthetic:"):], int(base), int(nbr))


ORIGINAL = Provenance()


@dataclass(frozen=True)
class Instance:
    """Una fila decodificada: valores por atributo y etiqueta"""

    schema: Schema
    values: tuple
    label: Optional[str] = None

    def __getitem__(self, name: str) -> Value:
        return self.values[self.schema.index(name)]

    def encoded(self) -> np.ndarray:
        row = np.empty(self.schema.width, dtype=float)
        for j, (a, v) in enumerate(zip(self.schema.attributes, self.values)):
            row[j] = float(v) if a.is_numeric else a.code(v)
        return row

    @classmethod
    def from_mapping(cls, schema: Schema, values: dict, label: Optional[str] = None) -> "Instance":
        return cls(schema, tuple(values[name] for name in schema.names), label)


class Dataset:
    """
    Dataset inmutable. Internamente los atributos se guardan codificados en
    una matriz float (las categorías como su índice declarado) y las
    etiquetas como índices de clase.
    """

    def __init__(
        self,
        schema: Schema,
        X: np.ndarray,
        y: np.ndarray,
        provenance: Optional[Sequence[Provenance]] = None,
    ):
        X = np.array(X, dtype=float).reshape(-1, schema.width)
        y = np.array(y, dtype=int).reshape(-1)
        if X.shape[0] != y.shape[0]:
            raise SchemaError("X e y tienen distinto número de filas")
        if provenance is None:
            provenance = (ORIGINAL,) * len(y)
        provenance = tuple(provenance)
        if len(provenance) != len(y):
            raise SchemaError("la procedencia no coincide con el número de filas")
        if len(y) and (y.min() < 0 or y.max() >= len(schema.labels)):
            raise SchemaError("índice de clase fuera de rango")
        for j, a in enumerate(schema.attributes):
            col = X[:, j]
            if not np.all(np.isfinite(col)):
                raise SchemaError(f"valores no finitos en '{a.name}'")
            if not a.is_numeric and len(col):
                if col.min() < 0 or col.max() >= len(a.categories) or np.any(col != np.round(col)):
                    raise SchemaError(f"código de categoría inválido en '{a.name}'")
        X.setflags(write=False)
        y.setflags(write=False)
        self.schema = schema
        self.X = X
        self.y = y
        self.provenance = provenance

    # ── Consultas ─────────────────────────────

    def __len__(self) -> int:
        return len(self.y)

    def __repr__(self) -> str:
        return f"Dataset(rows={len(self)}, synthetic={self.n_synthetic})"

    def instance(self, i: int) -> Instance:
        values = tuple(
            float(v) if a.is_numeric else a.token(v)
            for a, v in zip(self.schema.attributes, self.X[i])
        )
        return Instance(self.schema, values, self.schema.labels[self.y[i]])

    def instances(self) -> list[Instance]:
        return [self.instance(i) for i in range(len(self))]

    def column(self, name: str) -> np.ndarray:
        return self.X[:, self.schema.index(name)]

    def label_tokens(self) -> list[str]:
        return [self.schema.labels[c] for c in self.y]

    @property
    def synthetic_mask(self) -> np.ndarray:
        return np.array([p.is_synthetic for p in self.provenance], dtype=bool)

    @property
    def n_synthetic(self) -> int:
        return int(self.synthetic_mask.sum())

    # ── Construcción ──────────────────────────

    def take(self, indices: Iterable[int]) -> "Dataset":
        idx = np.asarray(list(indices), dtype=int)
        return Dataset(
            self.schema, self.X[idx], self.y[idx], [self.provenance[i] for i in idx]
        )

    def drop(self, indices: Iterable[int]) -> "Dataset":
        removed = set(int(i) for i in indices)
        return self.take(i for i in range(len(self)) if i not in removed)

    def with_labels(self, y: np.ndarray) -> "Dataset":
        return Dataset(self.schema, self.X, y, self.provenance)

    def concat(self, other: "Dataset") -> "Dataset":
        if other.schema != self.schema:
            raise SchemaError("no se pueden unir datasets con esquemas distintos")
        return Dataset(
            self.schema,
            np.vstack([self.X, other.X]),
            np.concatenate([self.y, other.y]),
            self.provenance + other.provenance,
        )

    @classmethod
    def empty(cls, schema: Schema) -> "Dataset":
        return cls(schema, np.empty((0, schema.width)), np.empty(0, dtype=int))

    @classmethod
    def from_instances(
        cls,
        schema: Schema,
        instances: Sequence[Instance],
        provenance: Optional[Sequence[Provenance]] = None,
    ) -> "Dataset":
        if not instances:
            return cls.empty(schema)
        X = np.vstack([inst.encoded() for inst in instances])
        y = [schema.label_index(inst.label) for inst in instances]
        return cls(schema, X, y, provenance)

    @classmethod
    def from_records(cls, schema: Schema, records: Sequence[tuple]) -> "Dataset":
        """Atajo para tests: cada registro es (valores..., etiqueta)"""
        instances = [Instance(schema, tuple(r[:-1]), r[-1]) for r in records]
        return cls.from_instances(schema, instances)


# ── Lectura / escritura CSV ─────────────────────────────────


def load_dataset(csv_path: Union[str, Path], schema_path: Union[str, Path, Schema]) -> Dataset:
    """
    Lee un CSV (RFC-4180, encabezado obligatorio) y lo valida contra el
    esquema. Conserva el orden de filas y, si existe, la columna de procedencia.
    """
    schema = schema_path if isinstance(schema_path, Schema) else load_schema(schema_path)
    try:
        frame = pd.read_csv(csv_path, dtype=str, keep_default_na=False, encoding="utf-8")
    except pd.errors.EmptyDataError:
        raise DatasetParseError(f"{csv_path}: el CSV no tiene encabezado") from None

    expected = schema.names + [schema.label_name]
    for name in expected:
        if name not in frame.columns:
            raise DatasetParseError(f"falta la columna '{name}'", attribute=name)
    extra = [c for c in frame.columns if c not in expected and c != PROVENANCE_COLUMN]
    if extra:
        raise DatasetParseError(f"columnas no declaradas en el esquema: {extra}")

    n = len(frame)
    X = np.empty((n, schema.width), dtype=float)
    for j, a in enumerate(schema.attributes):
        raw = frame[a.name]
        if a.is_numeric:
            parsed = pd.to_numeric(raw, errors="coerce").to_numpy(dtype=float)
            bad = np.flatnonzero(~np.isfinite(parsed))
            if len(bad):
                i = int(bad[0])
                raise DatasetParseError(
                    f"valor no numérico '{raw.iloc[i]}'", row=i + 1, attribute=a.name
                )
            X[:, j] = parsed
        else:
            lookup = {c: k for k, c in enumerate(a.categories)}
            for i, token in enumerate(raw):
                if token not in lookup:
                    raise DatasetParseError(
                        f"categoría desconocida '{token}'", row=i + 1, attribute=a.name
                    )
                X[i, j] = lookup[token]

    label_lookup = {c: k for k, c in enumerate(schema.labels)}
    y = np.empty(n, dtype=int)
    for i, token in enumerate(frame[schema.label_name]):
        if token not in label_lookup:
            raise DatasetParseError(
                f"clase desconocida '{token}'", row=i + 1, attribute=schema.label_name
            )
        y[i] = label_lookup[token]

    provenance = None
    if PROVENANCE_COLUMN in frame.columns:
        provenance = []
        for i, token in enumerate(frame[PROVENANCE_COLUMN]):
            try:
                provenance.append(Provenance.from_token(token))
            except ValueError as e:
                raise DatasetParseError(str(e), row=i + 1, attribute=PROVENANCE_COLUMN) from None

    log.debug(f"{csv_path}: {n} filas leídas")
    return Dataset(schema, X, y, provenance)


def to_frame(d: Dataset, with_provenance: bool = True) -> pd.DataFrame:
    columns = {}
    for j, a in enumerate(d.schema.attributes):
        col = d.X[:, j]
        columns[a.name] = col.tolist() if a.is_numeric else [a.token(v) for v in col]
    columns[d.schema.label_name] = d.label_tokens()
    if with_provenance:
        columns[PROVENANCE_COLUMN] = [p.to_token() for p in d.provenance]
    return pd.DataFrame(columns, columns=list(columns))


def save_dataset(d: Dataset, path: Union[str, Path], with_provenance: bool = True):
    to_frame(d, with_provenance).to_csv(path, index=False, encoding="utf-8")


def format_number(value: float) -> str:
    """Número legible y reversible (enteros sin '.0')"""
    value = float(value)
    if math.isfinite(value) and value.is_integer() and abs(value) < 1e15:
        return str(int(value))
    return repr(value)
