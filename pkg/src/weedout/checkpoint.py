"""Checkpoint I/O: networks and optional embedded masks, bit-exact round trips.

The container is a .npz archive holding a JSON metadata record (layer stack,
input shape, init seed, mask identity) plus the raw float64 parameter arrays.
Embedded masks store their per-layer arrays redundantly; on load they are
re-derived from ``(spec, eta, mode, sample_seed)`` and compared, so a
tampered or stale file fails loudly.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import ChecksumError, FormatError
from .network import LayerParams, LayerSpec, Network
from .sparsity import MaskSet, resample_mask

FORMAT_NAME = "weedout-checkpoint"
FORMAT_VERSION = 1


def _spec_to_dict(layer: LayerSpec) -> dict:
    return {"kind": layer.kind, "width": layer.width,
            "kernel_size": layer.kernel_size, "stride": layer.stride,
            "maskable": layer.maskable}


def _spec_from_dict(d: dict) -> LayerSpec:
    return LayerSpec(kind=d["kind"], width=d["width"], kernel_size=d["kernel_size"],
                     stride=d["stride"], maskable=d["maskable"])


def save_checkpoint(path, net: Network, mask: MaskSet | None = None) -> None:
    """Write ``net`` (and optionally a sampled ``mask``) to ``path``."""
    meta = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "input_shape": list(net.input_shape),
        "init_seed": net.init_seed,
        "layers": [_spec_to_dict(layer) for layer in net.spec],
        "mask": None if mask is None else {
            "mode": mask.mode,
            "eta": mask.eta,
            "sample_seed": mask.sample_seed,
        },
    }
    arrays: dict[str, np.ndarray] = {"meta": np.frombuffer(
        json.dumps(meta, sort_keys=True).encode("utf-8"), dtype=np.uint8)}
    for i, p in enumerate(net.params):
        if p is not None:
            arrays[f"w{i}"] = p.weight
            arrays[f"b{i}"] = p.bias
    if mask is not None:
        for i, m in mask.masks.items():
            arrays[f"mask{i}"] = m.astype(np.uint8)
    np.savez(path, **arrays)


def load_checkpoint(path) -> tuple[Network, MaskSet | None]:
    """Load a checkpoint; verifies embedded mask arrays against their seed."""
    path = Path(path)
    with np.load(path) as data:
        if "meta" not in data:
            raise FormatError(f"{path}: not a {FORMAT_NAME} file (missing metadata)")
        meta = json.loads(bytes(data["meta"]).decode("utf-8"))
        if meta.get("format") != FORMAT_NAME:
            raise FormatError(f"{path}: unexpected format {meta.get('format')!r}")
        if meta.get("version") != FORMAT_VERSION:
            raise FormatError(f"{path}: unsupported version {meta.get('version')!r}")
        spec = [_spec_from_dict(d) for d in meta["layers"]]
        input_shape = tuple(meta["input_shape"])
        params: list[LayerParams | None] = []
        for i, layer in enumerate(spec):
            if layer.kind in ("dense", "conv2d"):
                params.append(LayerParams(np.array(data[f"w{i}"], dtype=np.float64),
                                          np.array(data[f"b{i}"], dtype=np.float64)))
            else:
                params.append(None)
        net = Network(spec, input_shape, params, int(meta["init_seed"]))
        mask_meta = meta.get("mask")
        if mask_meta is None:
            return net, None
        stored = {i: np.array(data[f"mask{i}"], dtype=np.float64)
                  for i, layer in enumerate(spec)
                  if layer.kind in ("dense", "conv2d") and layer.maskable}
    mask = resample_mask(spec, input_shape, mask_meta["mode"],
                         mask_meta["eta"], mask_meta["sample_seed"])
    for i, m in mask.masks.items():
        if i not in stored or not np.array_equal(m, stored[i]):
            raise ChecksumError(
                f"{path}: stored mask for layer {i} does not match its recorded "
                f"(mode, eta, sample_seed) derivation")
    return net, mask
