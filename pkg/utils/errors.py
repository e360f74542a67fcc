"""
Jerarquía de errores del toolkit
"""

from typing import Optional


class FroteError(Exception):
    """Error base de todo el paquete"""


# ── Errores de validación (exit code 2) ─────────────────────


class ValidationError(FroteError, ValueError):
    """Entrada inválida: esquema, CSV, reglas o configuración"""


class SchemaError(ValidationError):
    pass


class DatasetParseError(ValidationError):
    """Fallo al leer un CSV. Guarda la fila (1-based) y el atributo."""

    def __init__(self, message: str, row: Optional[int] = None, attribute: Optional[str] = None):
        self.row = row
        self.attribute = attribute
        where = []
        if row is not None:
            where.append(f"fila {row}")
        if attribute is not None:
            where.append(f"atributo '{attribute}'")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(f"{prefix}{message}")


class RuleSyntaxError(ValidationError):
    """Error de sintaxis en el DSL de reglas, con línea y columna"""

    def __init__(self, message: str, line: int, column: int):
        self.line = line
        self.column = column
        super().__init__(f"línea {line}, columna {column}: {message}")


class RuleTypeError(ValidationError):
    """Predicado incompatible con el esquema (operador, categoría, etiqueta)"""


class DistributionError(ValidationError):
    """Distribución de etiquetas inválida"""


class ConfigError(ValidationError):
    pass


class RuleConflictError(ValidationError):
    """El conjunto de reglas tiene conflictos sin resolver"""


class PoolError(ValidationError):
    """No se pudo armar un conjunto de reglas sin conflictos"""


# ── Errores de ejecución (exit code 3) ──────────────────────


class FroteRuntimeError(FroteError, RuntimeError):
    pass


class TrainerError(FroteRuntimeError):
    """Fallo del algoritmo de entrenamiento, con contexto de iteración"""

    def __init__(self, message: str, iteration: Optional[int] = None):
        self.iteration = iteration
        ctx = f"iteración {iteration}: " if iteration is not None else ""
        super().__init__(f"{ctx}{message}")


class GenerationError(FroteRuntimeError):
    pass


class NeighborError(FroteRuntimeError):
    """La población base no tiene k+1 miembros"""


class SchemaMismatchError(FroteRuntimeError):
    pass
