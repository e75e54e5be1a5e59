"""Run records: canonical JSON, content hashes, reproducibility manifests.

Every CLI command resolves its inputs to a plain config dict, writes its
outputs, and drops a manifest listing those outputs with their hashes.
Feeding the manifest's config back through the same command must
reproduce the output bytes exactly; the manifest itself (which carries a
wall-clock timestamp) is the only file excluded from that comparison.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .errors import ConfigError

CODE_VERSION = "0.1.0"
MANIFEST_NAME = "manifest.json"


def jsonable(obj):
    """Plain JSON types from nested dicts/sequences/numpy values."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if obj is None or isinstance(obj, (bool, int, float, str)):
        return obj
    raise ConfigError(f"cannot serialize value of type {type(obj).__name__}")


def dump_json(obj) -> str:
    """Canonical JSON text: sorted keys, newline-terminated.

    Floats go through repr, which emits the shortest digit string that
    round-trips (17 significant digits where needed).
    """
    return json.dumps(jsonable(obj), indent=2, sort_keys=True) + "\n"


def write_json(path, obj) -> None:
    Path(path).write_text(dump_json(obj))


def read_json(path) -> dict:
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path} must hold a JSON object")
    return raw


def fmt_float(v) -> str:
    """17 significant digits: round-trips any double."""
    return "%.17g" % float(v)


def write_csv(path, header, rows) -> None:
    """CSV whose float cells round-trip (17 significant digits)."""
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_cell(v) for v in row) + "\n")


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return fmt_float(v)
    return str(v)


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    """What ran, with what inputs, and the hashes of what it wrote."""

    command: str
    config: dict
    seed: int
    version: str = CODE_VERSION
    created: str = ""
    outputs: list = field(default_factory=list)  # [{"path", "sha256"}]

    def __post_init__(self):
        for entry in self.outputs:
            if not isinstance(entry, dict) or not entry.get("path") \
                    or not entry.get("sha256"):
                raise ConfigError("every manifest output needs a path and "
                                  "a sha256 hash")

    @classmethod
    def collect(cls, out_dir, command: str, config: dict, seed: int,
                outputs) -> "RunManifest":
        """Hash the named files (relative to out_dir) into a manifest."""
        root = Path(out_dir)
        entries = [{"path": name, "sha256": sha256_file(root / name)}
                   for name in sorted(str(n) for n in outputs)]
        return cls(command=command, config=jsonable(config), seed=int(seed),
                   created=datetime.now(timezone.utc).isoformat(
                       timespec="seconds"),
                   outputs=entries)

    def write(self, out_dir) -> Path:
        path = Path(out_dir) / MANIFEST_NAME
        write_json(path, asdict(self))
        return path

    @classmethod
    def load(cls, path) -> "RunManifest":
        raw = read_json(path)
        missing = [k for k in ("command", "config", "seed", "outputs")
                   if k not in raw]
        if missing:
            raise ConfigError(f"manifest missing field(s) {missing}")
        if not isinstance(raw["config"], dict):
            raise ConfigError("manifest 'config' must be an object")
        return cls(command=str(raw["command"]), config=raw["config"],
                   seed=int(raw["seed"]), version=str(raw.get("version", "")),
                   created=str(raw.get("created", "")),
                   outputs=list(raw["outputs"]))

    def hash_map(self) -> dict:
        return {e["path"]: e["sha256"] for e in self.outputs}

    def diff_outputs(self, other: "RunManifest") -> list:
        """Output names missing from or hashed differently in other."""
        theirs = other.hash_map()
        return sorted(name for name, digest in self.hash_map().items()
                      if theirs.get(name) != digest)
