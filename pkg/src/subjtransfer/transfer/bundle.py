"""Versioned on-disk format for trained transfer models.

``<dir>/manifest.json`` describes architecture, training config and the
layout of ``<dir>/params.f32`` (little-endian float32 blobs, one per
parameter tensor, in manifest order). ``<dir>/loss_history.csv`` holds the
per-iteration losses.
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np
import torch

from .training import GanTrainConfig, LossRecord, TransferModelBundle, config_dict, init_bundle

FORMAT_VERSION = 1
PARAMS_FILE = "params.f32"
MANIFEST_FILE = "manifest.json"
HISTORY_FILE = "loss_history.csv"


class BundleError(ValueError):
    pass


def _param_blob(bundle: TransferModelBundle) -> tuple[bytes, list[dict]]:
    layout, chunks, offset = [], [], 0
    for module_name, module in bundle.modules().items():
        for name, tensor in module.state_dict().items():
            arr = tensor.detach().cpu().numpy().astype("<f4")
            layout.append({"module": module_name, "name": name, "shape": list(arr.shape), "offset": offset})
            chunks.append(arr.tobytes(order="C"))
            offset += arr.size
    return b"".join(chunks), layout


def bundle_hash(bundle: TransferModelBundle) -> str:
    blob, _ = _param_blob(bundle)
    return hashlib.sha256(blob).hexdigest()


def write_loss_history(history: list[LossRecord], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "adv", "gp", "cyc", "total"])
        for r in history:
            w.writerow([r.iteration, repr(r.adv), repr(r.gp), repr(r.cyc), repr(r.total)])


def read_loss_history(path: str | Path) -> list[LossRecord]:
    with open(path, newline="") as fh:
        return [
            LossRecord(int(row["iteration"]), float(row["adv"]), float(row["gp"]), float(row["cyc"]), float(row["total"]))
            for row in csv.DictReader(fh)
        ]


def save_bundle(bundle: TransferModelBundle, path: str | Path) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    blob, layout = _param_blob(bundle)
    manifest = {
        "format_version": FORMAT_VERSION,
        "arch": bundle.arch(),
        "config": config_dict(bundle.config),
        "params": layout,
        "n_values": len(blob) // 4,
        "sha256": hashlib.sha256(blob).hexdigest(),
        "iterations_completed": len(bundle.loss_history),
    }
    (path / PARAMS_FILE).write_bytes(blob)
    (path / MANIFEST_FILE).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    write_loss_history(bundle.loss_history, path / HISTORY_FILE)
    return path


def load_bundle(path: str | Path) -> TransferModelBundle:
    path = Path(path)
    try:
        manifest = json.loads((path / MANIFEST_FILE).read_text())
        blob = (path / PARAMS_FILE).read_bytes()
    except FileNotFoundError as exc:
        raise BundleError(f"missing bundle file: {exc.filename}") from None
    if manifest.get("format_version") != FORMAT_VERSION:
        raise BundleError(f"unsupported bundle format {manifest.get('format_version')!r}")
    if len(blob) != 4 * manifest["n_values"] or hashlib.sha256(blob).hexdigest() != manifest["sha256"]:
        raise BundleError("parameter blob does not match manifest (size or checksum)")
    cfg_d = dict(manifest["config"])
    cfg_d["adam_betas"] = tuple(cfg_d["adam_betas"])
    cfg = GanTrainConfig(**cfg_d)
    arch = manifest["arch"]
    bundle = init_bundle(arch["n_channels"], arch["n_samples"], cfg)
    values = np.frombuffer(blob, dtype="<f4")
    modules = bundle.modules()
    states: dict[str, dict[str, torch.Tensor]] = {k: {} for k in modules}
    for entry in manifest["params"]:
        n = int(np.prod(entry["shape"], dtype=np.int64))
        arr = values[entry["offset"] : entry["offset"] + n].reshape(entry["shape"])
        states[entry["module"]][entry["name"]] = torch.from_numpy(arr.copy())
    for name, module in modules.items():
        module.load_state_dict(states[name])
    history_path = path / HISTORY_FILE
    if history_path.exists():
        bundle.loss_history = read_loss_history(history_path)
    return bundle
