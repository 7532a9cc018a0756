"""Annotation files, run configuration and reproducibility manifests.

Annotation files are JSON Lines, one hand per line::

    {"id": "rhd/00017_L", "side": "left",
     "kp2d": [[u, v], ...21], "kp3d": [[x, y, z], ...21] or null,
     "vis": [true, ...21], "intrinsics": {"fx":..,"fy":..,"cx":..,"cy":..} or null}

Units are pixels for ``kp2d`` and millimetres for ``kp3d``.  Joint order is
canonical unless a source order (``rhd`` or ``stb``) is named at ingestion;
the remap tables live in ``data/remap.json``.  In the ``stb`` table the palm
centre takes the WRIST slot.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import os
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .anatomy import LossConfig
from .errors import ConfigError, ParseError, SchemaViolation
from .hand_model import NUM_JOINTS, HandPose, HandSample, HandSide, Intrinsics

ENV_PREFIX = "HANDGEOM_"


def remap_tables() -> dict:
    text = resources.files("handgeom").joinpath("data/remap.json").read_text()
    return {k: v for k, v in json.loads(text).items() if not k.startswith("_")}


def _array(value, shape, what, line):
    if not isinstance(value, list) or len(value) != shape[0]:
        n = len(value) if isinstance(value, list) else type(value).__name__
        raise SchemaViolation(f"{what} must have {shape[0]} entries, got {n}", line)
    try:
        arr = np.array(value, dtype=float)
    except (TypeError, ValueError):
        raise SchemaViolation(f"{what} contains non-numeric values", line) from None
    if arr.shape != shape:
        raise SchemaViolation(f"{what} must have shape {shape}, got {arr.shape}", line)
    if not np.all(np.isfinite(arr)):
        raise SchemaViolation(f"{what} contains non-finite values", line)
    return arr


def parse_record(obj, line: Optional[int] = None, order: str = "canonical") -> HandSample:
    if not isinstance(obj, dict):
        raise SchemaViolation("record must be a JSON object", line)
    sid = obj.get("id")
    if not isinstance(sid, str) or not sid:
        raise SchemaViolation("id must be a non-empty string", line)
    side = obj.get("side")
    if side not in ("left", "right"):
        raise SchemaViolation(f"side must be 'left' or 'right', got {side!r}", line)
    kp2d = _array(obj.get("kp2d"), (NUM_JOINTS, 2), "kp2d", line)
    raw3d = obj.get("kp3d")
    kp3d = None if raw3d is None else _array(raw3d, (NUM_JOINTS, 3), "kp3d", line)
    vis_raw = obj.get("vis", [True] * NUM_JOINTS)
    if (not isinstance(vis_raw, list) or len(vis_raw) != NUM_JOINTS
            or not all(isinstance(v, bool) for v in vis_raw)):
        raise SchemaViolation("vis must be 21 booleans", line)
    vis = np.array(vis_raw, bool)
    intr = obj.get("intrinsics")
    intrinsics = None
    if intr is not None:
        try:
            vals = [float(intr[k]) for k in ("fx", "fy", "cx", "cy")]
        except (TypeError, KeyError, ValueError):
            raise SchemaViolation("intrinsics needs numeric fx, fy, cx, cy", line) from None
        if not all(math.isfinite(v) for v in vals):
            raise SchemaViolation("intrinsics contains non-finite values", line)
        intrinsics = Intrinsics(*vals)

    perm = remap_tables()[order]
    kp2d, vis = kp2d[perm], vis[perm]
    if kp3d is not None:
        kp3d = kp3d[perm]
    pose = HandPose(HandSide(side), kp3d if kp3d is not None else np.zeros((NUM_JOINTS, 3)), kp2d, vis)
    return HandSample(sid, pose, intrinsics, kp3d is not None)


def ingest(path, order: str = "canonical") -> list[HandSample]:
    """Read and validate an annotation file; errors carry the 1-based line number."""
    if order not in remap_tables():
        raise ConfigError(f"unknown joint order {order!r}")
    samples = []
    with open(path, encoding="utf-8") as fh:
        for lineno, text in enumerate(fh, 1):
            if not text.strip():
                continue
            try:
                obj = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON: {exc.msg}", lineno) from None
            samples.append(parse_record(obj, lineno, order))
    return samples


def sample_to_record(sample: HandSample) -> dict:
    pose = sample.pose
    rec = {
        "id": sample.id,
        "side": pose.side.value,
        "kp2d": pose.joints2d.tolist(),
        "kp3d": pose.joints3d.tolist() if sample.has_3d else None,
        "vis": [bool(v) for v in pose.visibility],
        "intrinsics": dataclasses.asdict(sample.intrinsics) if sample.intrinsics else None,
    }
    return rec


def write_samples(samples: Iterable[HandSample], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in samples:
            fh.write(json.dumps(sample_to_record(s)) + "\n")


def write_jsonl(rows: Iterable[dict], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in rows:
            fh.write(json.dumps(r) + "\n")


# ---------------------------------------------------------------------------
# run configuration


@dataclass
class RunConfig:
    loss: LossConfig = field(default_factory=LossConfig)
    seed: int = 0
    threads: int = 1
    box_pad: float = 0.1
    out_w: int = 64
    out_h: int = 64

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self.loss)
        d.update(seed=self.seed, threads=self.threads, box_pad=self.box_pad,
                 out_w=self.out_w, out_h=self.out_h)
        return d

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()


_RUN_KEYS = {"seed": int, "threads": int, "box_pad": float, "out_w": int, "out_h": int}


def _field_types() -> dict:
    types = dict(_RUN_KEYS)
    for f in dataclasses.fields(LossConfig):
        types[f.name] = {"float": float, "int": int, "bool": bool}[f.type if isinstance(f.type, str) else f.type.__name__]
    return types


def _convert(key, raw, typ):
    raw = raw.strip()
    try:
        if typ is bool:
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        return typ(raw)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None


def parse_config_text(text: str) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    types = _field_types()
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected key=value")
        key, raw = (p.strip() for p in line.split("=", 1))
        if key not in types:
            raise ConfigError(f"config line {lineno}: unknown key {key!r}")
        values[key] = _convert(key, raw, types[key])
    return values


def load_config(path=None, env=None, overrides: Optional[dict] = None) -> RunConfig:
    """Defaults, then the config file, then ``HANDGEOM_*`` variables, then overrides."""
    types = _field_types()
    values = {}
    if path is not None:
        values.update(parse_config_text(Path(path).read_text(encoding="utf-8")))
    env = os.environ if env is None else env
    for name, raw in env.items():
        if not name.startswith(ENV_PREFIX):
            continue
        key = name[len(ENV_PREFIX):].lower()
        if key not in types:
            raise ConfigError(f"unknown config key in environment: {name}")
        values[key] = _convert(key, raw, types[key])
    for key, val in (overrides or {}).items():
        if val is None:
            continue
        if key not in types:
            raise ConfigError(f"unknown config key {key!r}")
        values[key] = val
    loss = LossConfig(**{k: v for k, v in values.items() if k not in _RUN_KEYS})
    run = RunConfig(loss, **{k: v for k, v in values.items() if k in _RUN_KEYS})
    if run.threads < 1:
        raise ConfigError("threads must be >= 1")
    if run.out_w < 2 or run.out_h < 2:
        raise ConfigError("output size must be at least 2x2")
    if run.box_pad < 0:
        raise ConfigError("box_pad must be >= 0")
    return run


# ---------------------------------------------------------------------------
# manifests


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(path, command: str, argv, config: RunConfig, inputs=(), outputs=()) -> dict:
    from . import __version__

    manifest = {
        "command": command,
        "argv": list(argv),
        "package_version": __version__,
        "python": sys.version.split()[0],
        "numpy": np.__version__,
        "seed": config.seed,
        "config": config.to_dict(),
        "config_sha256": config.digest(),
        "inputs": {str(p): file_digest(p) for p in inputs},
        "outputs": {str(p): file_digest(p) for p in outputs if Path(p).is_file()},
    }
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return manifest
