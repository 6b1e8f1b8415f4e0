import os
from dotenv import load_dotenv
from pydantic import BaseModel, Field, ValidationError

from app.core.errors import ConfigError

load_dotenv()

DEFAULT_CAP_N = 4096
DEFAULT_TOL = 1e-9
DEFAULT_MAX_ITER = 100_000
DEFAULT_EPS_LIST = (0.1, 0.05, 0.02, 0.01, 0.005)


class Settings(BaseModel):
    cap_n: int = Field(DEFAULT_CAP_N, ge=8)
    tol: float = Field(DEFAULT_TOL, gt=0)
    max_iter: int = Field(DEFAULT_MAX_ITER, ge=1)
    seed: int = 0
    log_level: str = "WARNING"


def get_settings() -> Settings:
    """Read MONGE1D_* variables (environment or .env) at call time."""
    raw = {
        "cap_n": os.getenv("MONGE1D_CAP_N", DEFAULT_CAP_N),
        "tol": os.getenv("MONGE1D_TOL", DEFAULT_TOL),
        "max_iter": os.getenv("MONGE1D_MAX_ITER", DEFAULT_MAX_ITER),
        "seed": os.getenv("MONGE1D_SEED", 0),
        "log_level": os.getenv("MONGE1D_LOG_LEVEL", "WARNING").upper(),
    }
    try:
        return Settings(**raw)
    except ValidationError as e:
        field = e.errors()[0]["loc"][0]
        raise ConfigError(f"invalid MONGE1D_{str(field).upper()}: {raw[field]!r}")
