"""Single-file binary checkpoints.

Layout (all little endian): magic ``TCCA``, u32 format version, u32 record
count, then per record a u32-length-prefixed utf-8 name, u32 ndim, u32 dims
and the row-major float64 payload. Non-float payloads (config JSON, hashes,
RNG state bytes) are stored as byte values widened to float64, which the
format round-trips exactly.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
import torch

from .config import RunConfig, config_from_dict, config_hash, config_json

MAGIC = b"TCCA"
FORMAT_VERSION = 1


def _bytes_to_array(data: bytes) -> np.ndarray:
    return np.frombuffer(data, dtype=np.uint8).astype(np.float64)


def _array_to_bytes(arr: np.ndarray) -> bytes:
    return arr.astype(np.uint8).tobytes()


def write_records(path: Path, records: dict[str, np.ndarray]) -> None:
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", FORMAT_VERSION, len(records)))
        for name in sorted(records):
            arr = np.ascontiguousarray(records[name], dtype="<f8")
            encoded = name.encode()
            fh.write(struct.pack("<I", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<I", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.tobytes())


def read_records(path: Path) -> dict[str, np.ndarray]:
    with open(path, "rb") as fh:
        if fh.read(4) != MAGIC:
            raise ValueError("not a checkpoint file")
        version, count = struct.unpack("<II", fh.read(8))
        if version != FORMAT_VERSION:
            raise ValueError(f"unsupported checkpoint format {version}")
        records = {}
        for _ in range(count):
            (name_len,) = struct.unpack("<I", fh.read(4))
            name = fh.read(name_len).decode()
            (ndim,) = struct.unpack("<I", fh.read(4))
            shape = struct.unpack(f"<{ndim}I", fh.read(4 * ndim)) if ndim else ()
            size = int(np.prod(shape)) if ndim else 1
            data = np.frombuffer(fh.read(8 * size), dtype="<f8")
            records[name] = data.reshape(shape).copy()
    return records


def save_checkpoint(
    path: Path,
    model: torch.nn.Module,
    optimizer: torch.optim.Optimizer | None,
    epoch: int,
    cfg: RunConfig,
    data_hash: str,
) -> None:
    records: dict[str, np.ndarray] = {}
    for name, tensor in model.state_dict().items():
        records[f"param/{name}"] = tensor.detach().cpu().numpy().astype(np.float64)
    if optimizer is not None:
        param_names = [n for n, _ in model.named_parameters()]
        state = optimizer.state_dict()["state"]
        for idx, pname in enumerate(param_names):
            if idx not in state:
                continue
            for key, value in state[idx].items():
                value = value.detach().cpu().numpy() if torch.is_tensor(value) else np.asarray(value)
                records[f"opt/{pname}/{key}"] = value.astype(np.float64)
    records["meta/epoch"] = np.asarray(float(epoch))
    records["meta/config_json"] = _bytes_to_array(config_json(cfg).encode())
    records["meta/config_hash"] = _bytes_to_array(bytes.fromhex(config_hash(cfg)))
    records["meta/data_hash"] = _bytes_to_array(bytes.fromhex(data_hash))
    records["meta/torch_rng"] = torch.get_rng_state().numpy().astype(np.float64)
    write_records(path, records)


def stored_config(records: dict[str, np.ndarray]) -> RunConfig:
    import json

    return config_from_dict(json.loads(_array_to_bytes(records["meta/config_json"]).decode()))


def stored_data_hash(records: dict[str, np.ndarray]) -> str:
    return _array_to_bytes(records["meta/data_hash"]).hex()


def load_model_state(model: torch.nn.Module, records: dict[str, np.ndarray]) -> None:
    state = {}
    for name, current in model.state_dict().items():
        arr = records[f"param/{name}"]
        state[name] = torch.as_tensor(arr).to(current.dtype).reshape(current.shape)
    model.load_state_dict(state)


def restore_optimizer(
    optimizer: torch.optim.Optimizer, model: torch.nn.Module, records: dict[str, np.ndarray]
) -> None:
    param_names = [n for n, _ in model.named_parameters()]
    params = [p for _, p in model.named_parameters()]
    state_dict = optimizer.state_dict()
    for idx, (pname, param) in enumerate(zip(param_names, params)):
        entries = {
            key.split("/")[-1]: value
            for key, value in records.items()
            if key.startswith(f"opt/{pname}/")
        }
        if not entries:
            continue
        state_dict["state"][idx] = {
            key: torch.as_tensor(value).to(param.dtype if key != "step" else torch.float32)
            for key, value in entries.items()
        }
    optimizer.load_state_dict(state_dict)


def restore_rng(records: dict[str, np.ndarray]) -> None:
    torch.set_rng_state(torch.as_tensor(records["meta/torch_rng"].astype(np.uint8)))
