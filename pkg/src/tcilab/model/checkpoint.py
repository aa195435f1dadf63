"""JSON tensor checkpoints with a manifest; byte-stable and bit-exact on reload."""
from __future__ import annotations

import base64
import hashlib
import json
from pathlib import Path

import numpy as np
import torch

CHECKPOINT_VERSION = 1


def state_hash(state: dict[str, torch.Tensor]) -> str:
    h = hashlib.sha256()
    for name in sorted(state):
        arr = state[name].detach().cpu().contiguous().numpy()
        h.update(name.encode())
        h.update(str(arr.dtype).encode())
        h.update(str(arr.shape).encode())
        h.update(arr.tobytes())
    return h.hexdigest()


def module_hash(module: torch.nn.Module) -> str:
    return state_hash(module.state_dict())


def dumps(state: dict[str, torch.Tensor], manifest: dict) -> str:
    tensors = {}
    for name in sorted(state):
        arr = state[name].detach().cpu().contiguous().numpy()
        tensors[name] = {
            "dtype": str(arr.dtype),
            "shape": list(arr.shape),
            "data": base64.b64encode(arr.tobytes()).decode("ascii"),
        }
    doc = {"version": CHECKPOINT_VERSION, "manifest": manifest, "tensor_hash": state_hash(state),
           "tensors": tensors}
    return json.dumps(doc, sort_keys=True)


def loads(text: str) -> tuple[dict[str, torch.Tensor], dict]:
    doc = json.loads(text)
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {doc.get('version')!r}")
    state = {}
    for name, t in doc["tensors"].items():
        arr = np.frombuffer(base64.b64decode(t["data"]), dtype=np.dtype(t["dtype"])).reshape(t["shape"])
        state[name] = torch.from_numpy(arr.copy())
    if state_hash(state) != doc["tensor_hash"]:
        raise ValueError("checkpoint tensor hash mismatch")
    return state, doc["manifest"]


def save_checkpoint(module: torch.nn.Module, path, manifest: dict) -> str:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    manifest = dict(manifest)
    manifest.setdefault("architecture", module.architecture())
    path.write_text(dumps(module.state_dict(), manifest))
    return module_hash(module)


def load_checkpoint(path) -> tuple[dict[str, torch.Tensor], dict]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    return loads(path.read_text())


def build_encoder(manifest: dict):
    from .encoder import Encoder

    arch = manifest["architecture"]
    return Encoder(hidden=arch["hidden"], width=arch["width"], variant=arch["variant"],
                   dropout=arch["dropout"], k=arch["k"], input_dim=arch["input_dim"])


def build_decoder(manifest: dict):
    from .decoder import Decoder

    arch = manifest["architecture"]
    return Decoder(psi_width=arch["psi_width"], width=arch["width"], variant=arch["variant"],
                   hidden=arch["hidden"], dropout=arch["dropout"], k=arch["k"])


def load_model(path, dtype=torch.float32):
    state, manifest = load_checkpoint(path)
    kind = manifest["architecture"]["kind"]
    model = build_encoder(manifest) if kind == "encoder" else build_decoder(manifest)
    model.load_state_dict(state)
    model.to(dtype)
    model.eval()
    return model, manifest
