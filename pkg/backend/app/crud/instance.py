import json
import math
from pathlib import Path

import numpy as np
import pandas as pd
from pydantic import BaseModel, ValidationError

from app.core.errors import InstanceError, InstanceParseError
from app.models.measures import Measure1D, from_piecewise, from_samples
from app.schemas import InstanceFile, MeasureSpec


# ---------------- Instances ----------------
def load_instance(path):
    """Parse an instance file into (InstanceFile, mu, nu)."""
    path = Path(path)
    if not path.is_file():
        raise InstanceParseError(f"{path}: no such file")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise InstanceParseError(f"{path}: malformed JSON ({e.msg} at line {e.lineno})")
    try:
        instance = InstanceFile.model_validate(raw)
    except ValidationError as e:
        first = e.errors()[0]
        field = ".".join(str(p) for p in first["loc"]) or "<root>"
        raise InstanceParseError(f"{path}: invalid field '{field}': {first['msg']}")
    mu = build_measure(instance.mu, "mu", path.parent)
    nu = build_measure(instance.nu, "nu", path.parent)
    return instance, mu, nu


def build_measure(spec: MeasureSpec, name: str, base: Path = Path(".")) -> Measure1D:
    try:
        if spec.breakpoints is not None:
            return from_piecewise(spec.breakpoints, spec.densities, normalize=spec.normalize)
        samples = spec.samples if spec.samples is not None else read_samples(base / spec.samples_file)
        return from_samples(samples, spec.bin_count)
    except InstanceError as e:
        raise type(e)(f"{name}: {e.detail}") from e


def read_samples(path) -> np.ndarray:
    """One real per line; '#' starts a comment."""
    path = Path(path)
    if not path.is_file():
        raise InstanceParseError(f"{path}: no such samples file")
    try:
        frame = pd.read_csv(path, header=None, comment="#")
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise InstanceParseError(f"{path}: unreadable samples ({e})")
    values = pd.to_numeric(frame.iloc[:, 0], errors="coerce")
    if values.isna().any():
        raise InstanceParseError(f"{path}: non-numeric sample on line {int(values.isna().idxmax()) + 1}")
    return values.to_numpy(dtype=float)


# ---------------- Reports ----------------
def _format(value, indent: int) -> str:
    pad = "  " * (indent + 1)
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isnan(value):
            return "NaN"
        if math.isinf(value):
            return "Infinity" if value > 0 else "-Infinity"
        text = format(value, ".17g")
        return text if any(c in text for c in ".en") else text + ".0"
    if isinstance(value, str):
        return json.dumps(value, ensure_ascii=False)
    if isinstance(value, dict):
        if not value:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_format(v, indent + 1)}" for k, v in value.items()]
        return "{\n" + ",\n".join(items) + "\n" + "  " * indent + "}"
    if isinstance(value, (list, tuple)):
        if not value:
            return "[]"
        if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
            return "[" + ", ".join(_format(v, indent) for v in value) + "]"
        return "[\n" + ",\n".join(pad + _format(v, indent + 1) for v in value) + "\n" + "  " * indent + "]"
    raise TypeError(f"cannot serialize {type(value).__name__}")


def dumps_report(model: BaseModel) -> str:
    """Deterministic JSON: fields in declaration order, floats with 17 significant digits."""
    return _format(model.model_dump(), 0) + "\n"


def write_report(model: BaseModel, path=None) -> str:
    text = dumps_report(model)
    if path is not None:
        Path(path).write_text(text)
    return text


def load_report(path, model_cls):
    return model_cls.model_validate(json.loads(Path(path).read_text()))


# ---------------- CSV tables ----------------
def write_plan_csv(plan, path):
    """Row-major mass matrix under a `# n=<n> hull=<lo>,<hi>` header."""
    grid = plan.grid
    with open(path, "w", newline="") as fh:
        fh.write(f"# n={grid.n} hull={_format(grid.hull.lo, 0)},{_format(grid.hull.hi, 0)}\n")
        pd.DataFrame(plan.masses).to_csv(fh, header=False, index=False, float_format="%.17g")


def read_plan_csv(path):
    """Inverse of write_plan_csv: (masses, n, (lo, hi))."""
    with open(path) as fh:
        header = fh.readline().strip()
    fields = dict(part.split("=", 1) for part in header.lstrip("# ").split())
    lo, hi = (float(v) for v in fields["hull"].split(","))
    masses = pd.read_csv(path, header=None, skiprows=1).to_numpy(dtype=float)
    return masses, int(fields["n"]), (lo, hi)


SWEEP_COLUMNS = ["eps", "n", "j_min", "r", "tv", "iters"]


def write_sweep_csv(summaries, path):
    """Sweep table; a `label` column is added when several instances are written."""
    frames = []
    for s in summaries:
        frame = pd.DataFrame([row.model_dump() for row in s.records], columns=SWEEP_COLUMNS)
        if len(summaries) > 1:
            frame.insert(0, "label", s.label or "")
        frames.append(frame)
    pd.concat(frames, ignore_index=True).to_csv(path, index=False, float_format="%.17g")
