"""
Configuración centralizada del toolkit
"""

import os
from dotenv import load_dotenv

load_dotenv()


def _env_int(name: str, default: int) -> int:
    raw = os.getenv(f"FROTE_{name}")
    if raw is None:
        return default
    try:
        return int(raw)
    except ValueError:
        raise ValueError(f"❌ FROTE_{name} debe ser un entero, no '{raw}'") from None


def _env_float(name: str, default: float) -> float:
    raw = os.getenv(f"FROTE_{name}")
    if raw is None:
        return default
    try:
        return float(raw)
    except ValueError:
        raise ValueError(f"❌ FROTE_{name} debe ser un número, no '{raw}'") from None


class Config:
    """Valores por defecto del toolkit (sobrescribibles con FROTE_<NOMBRE> en .env)"""

    # Logs
    LOG_DIR = os.getenv("FROTE_LOG_DIR", "logs")
    LOG_LEVEL = os.getenv("FROTE_LOG_LEVEL", "INFO").upper()

    # Bucle de aumentación
    DEFAULT_TAU = _env_int("DEFAULT_TAU", 200)
    DEFAULT_Q = _env_float("DEFAULT_Q", 0.5)
    DEFAULT_K = _env_int("DEFAULT_K", 5)
    DEFAULT_SEED = _env_int("DEFAULT_SEED", 42)
    DEFAULT_SELECTOR = os.getenv("FROTE_DEFAULT_SELECTOR", "random")
    DEFAULT_STRATEGY = os.getenv("FROTE_DEFAULT_STRATEGY", "relabel")

    # Pesos de selección (borderline / resto)
    WEIGHT_NEIGHBORS = _env_int("WEIGHT_NEIGHBORS", 10)
    BORDERLINE_WEIGHT = _env_float("BORDERLINE_WEIGHT", 3.0)
    DEFAULT_WEIGHT = _env_float("DEFAULT_WEIGHT", 1.0)
    REJECTED_WEIGHT_DECAY = _env_float("REJECTED_WEIGHT_DECAY", 0.25)

    # Experimentos
    POOL_ATTEMPT_FACTOR = _env_int("POOL_ATTEMPT_FACTOR", 100)
    FRS_DRAW_ATTEMPTS = _env_int("FRS_DRAW_ATTEMPTS", 1000)
    OUTSIDE_TRAIN_FRAC = _env_float("OUTSIDE_TRAIN_FRAC", 0.8)
    COVERAGE_BOUNDS = (
        _env_float("COVERAGE_LO", 0.05),
        _env_float("COVERAGE_HI", 0.25),
    )

    # Modelos
    LR_ITERATIONS = _env_int("LR_ITERATIONS", 500)
    LR_LEARNING_RATE = _env_float("LR_LEARNING_RATE", 0.5)
    FOREST_TREES = _env_int("FOREST_TREES", 10)
    FOREST_MAX_DEPTH = _env_int("FOREST_MAX_DEPTH", 3)
    TREE_MAX_DEPTH = _env_int("TREE_MAX_DEPTH", 3)

    # Emojis
    EMOJI_SUCCESS = "✅"
    EMOJI_ERROR = "❌"
    EMOJI_WARNING = "⚠️"
    EMOJI_INFO = "ℹ️"
    EMOJI_LOADING = "⏳"
    EMOJI_RULES = "📜"
    EMOJI_CHART = "📈"


# ── Validaciones al iniciar ──────────────────────────────────
if Config.DEFAULT_TAU < 1:
    raise ValueError("❌ FROTE_DEFAULT_TAU debe ser ≥ 1")

if Config.DEFAULT_Q <= 0:
    raise ValueError("❌ FROTE_DEFAULT_Q debe ser > 0")

if Config.DEFAULT_K < 1:
    raise ValueError("❌ FROTE_DEFAULT_K debe ser ≥ 1")

if Config.DEFAULT_SELECTOR not in ("random", "ip"):
    raise ValueError(f"❌ selector desconocido: {Config.DEFAULT_SELECTOR}")

if Config.DEFAULT_STRATEGY not in ("none", "relabel", "drop"):
    raise ValueError(f"❌ estrategia desconocida: {Config.DEFAULT_STRATEGY}")

if not 0.0 <= Config.OUTSIDE_TRAIN_FRAC <= 1.0:
    raise ValueError("❌ FROTE_OUTSIDE_TRAIN_FRAC debe estar en [0,1]")

if not 0.0 <= Config.COVERAGE_BOUNDS[0] < Config.COVERAGE_BOUNDS[1] <= 1.0:
    raise ValueError(f"❌ cotas de cobertura inválidas: {Config.COVERAGE_BOUNDS}")

if not 0.0 < Config.REJECTED_WEIGHT_DECAY <= 1.0:
    raise ValueError("❌ FROTE_REJECTED_WEIGHT_DECAY debe estar en (0,1]")

if Config.BORDERLINE_WEIGHT <= Config.DEFAULT_WEIGHT:
    print("⚠️ BORDERLINE_WEIGHT no supera a DEFAULT_WEIGHT: la selección IP pierde su preferencia.")
