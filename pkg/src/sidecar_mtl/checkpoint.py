"""Checkpoints: one SDTN blob per named parameter plus a JSON manifest.

Layout::

    <dir>/manifest.json
    <dir>/params/<module>.<parameter name>.sdtn

The manifest records both configs, the frozen flag, and a SHA-256 per blob
so a corrupted or hand-edited file is caught on load.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

from . import tensor as T
from .backbone import Backbone, BackboneConfig
from .sidecar import Sidecar, SidecarConfig

FORMAT = "sidecar-mtl-checkpoint/1"


class CheckpointError(ValueError):
    pass


def _modules(backbone: Backbone, sidecar: Sidecar | None):
    yield "backbone", backbone
    if sidecar is not None:
        yield "sidecar", sidecar


def save_checkpoint(directory, backbone: Backbone, sidecar: Sidecar | None = None) -> Path:
    directory = Path(directory)
    (directory / "params").mkdir(parents=True, exist_ok=True)
    entries = []
    for prefix, module in _modules(backbone, sidecar):
        for name, p in module.named_parameters():
            blob = T.dumps(p.data)
            rel = Path("params") / f"{prefix}.{name}.sdtn"
            (directory / rel).write_bytes(blob)
            entries.append({"name": f"{prefix}.{name}", "file": str(rel), "shape": list(p.shape),
                            "sha256": hashlib.sha256(blob).hexdigest()})
    manifest = {
        "format": FORMAT,
        "backbone_config": backbone.config.to_dict(),
        "backbone_frozen": bool(backbone.frozen),
        "backbone_hash": backbone.parameter_hash(),
        "sidecar_config": sidecar.config.to_dict() if sidecar is not None else None,
        "parameters": entries,
    }
    path = directory / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2) + "\n")
    return path


def read_manifest(directory) -> dict:
    path = Path(directory) / "manifest.json"
    if not path.exists():
        raise FileNotFoundError(f"checkpoint manifest not found: {path}")
    manifest = json.loads(path.read_text())
    if manifest.get("format") != FORMAT:
        raise CheckpointError(f"{path}: unknown checkpoint format {manifest.get('format')!r}")
    return manifest


def load_checkpoint(directory) -> tuple[Backbone, Sidecar | None]:
    """Rebuild the backbone (and Sidecar, if saved) with bit-identical parameters."""
    directory = Path(directory)
    manifest = read_manifest(directory)
    backbone = Backbone(BackboneConfig(**manifest["backbone_config"]))
    sc_cfg = manifest.get("sidecar_config")
    sidecar = Sidecar(SidecarConfig(**sc_cfg)) if sc_cfg else None
    states: dict[str, dict] = {"backbone": {}, "sidecar": {}}
    for entry in manifest["parameters"]:
        blob = (directory / entry["file"]).read_bytes()
        if hashlib.sha256(blob).hexdigest() != entry["sha256"]:
            raise CheckpointError(f"hash mismatch for {entry['file']}")
        prefix, name = entry["name"].split(".", 1)
        states[prefix][name] = T.loads(blob)
    for prefix, module in _modules(backbone, sidecar):
        module.load_state_dict(states[prefix])
    if manifest.get("backbone_frozen"):
        backbone.requires_grad_(False)
        backbone.frozen = True
    return backbone, sidecar
