"""Weight container ("TMS1") and JSON config sidecar.

Binary layout, all integers little-endian::

    b"TMS1"                      magic
    u32  format version (1)
    u32  number of arrays
    per array:
        u32  name length, name bytes (utf-8)
        u32  ndim, then ndim x u64 dims
        f64 x prod(dims)         values, C order
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"TMS1"
FORMAT_VERSION = 1
WEIGHTS_FILE = "weights.tms"
SIDECAR_FILE = "config.json"


class CheckpointError(ValueError):
    pass


def write_weights(path, arrays: dict[str, np.ndarray]) -> None:
    chunks = [MAGIC, struct.pack("<II", FORMAT_VERSION, len(arrays))]
    for name, arr in arrays.items():
        arr = np.asarray(arr, dtype="<f8")  # ascontiguousarray would promote 0-d to 1-d
        raw = name.encode("utf-8")
        chunks.append(struct.pack("<I", len(raw)))
        chunks.append(raw)
        chunks.append(struct.pack("<I", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        chunks.append(arr.tobytes(order="C"))
    Path(path).write_bytes(b"".join(chunks))


def read_weights(path) -> dict[str, np.ndarray]:
    buf = Path(path).read_bytes()
    if buf[:4] != MAGIC:
        raise CheckpointError(f"{path}: not a TMS1 weight file")
    version, count = struct.unpack_from("<II", buf, 4)
    if version != FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported format version {version}")
    off = 12
    out: dict[str, np.ndarray] = {}
    try:
        for _ in range(count):
            (n,) = struct.unpack_from("<I", buf, off)
            off += 4
            name = buf[off:off + n].decode("utf-8")
            off += n
            (ndim,) = struct.unpack_from("<I", buf, off)
            off += 4
            shape = struct.unpack_from(f"<{ndim}Q", buf, off)
            off += 8 * ndim
            size = int(np.prod(shape, dtype=np.int64))
            arr = np.frombuffer(buf, dtype="<f8", count=size, offset=off).reshape(shape)
            off += 8 * size
            out[name] = arr.astype(np.float64)
    except (struct.error, ValueError) as exc:
        raise CheckpointError(f"{path}: truncated or corrupt ({exc})") from None
    if off != len(buf):
        raise CheckpointError(f"{path}: {len(buf) - off} trailing bytes")
    return out


def save_checkpoint(directory, model, sidecar: dict) -> Path:
    """Write ``weights.tms`` and ``config.json`` into ``directory``."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    write_weights(d / WEIGHTS_FILE, model.state_dict())
    meta = dict(sidecar)
    meta["model"] = model.config.to_dict()
    meta["format"] = {"weights": WEIGHTS_FILE, "magic": MAGIC.decode(), "version": FORMAT_VERSION}
    (d / SIDECAR_FILE).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return d


def load_checkpoint(directory):
    """Returns (model, sidecar dict)."""
    from .model import DualViewModel, ModelConfig

    d = Path(directory)
    try:
        meta = json.loads((d / SIDECAR_FILE).read_text())
    except FileNotFoundError:
        raise CheckpointError(f"{d}: missing {SIDECAR_FILE}") from None
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"{d / SIDECAR_FILE}: {exc}") from None
    try:
        model = DualViewModel(ModelConfig.from_dict(meta["model"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"{d}: bad model config ({exc})") from None
    try:
        model.load_state_dict(read_weights(d / WEIGHTS_FILE))
    except FileNotFoundError:
        raise CheckpointError(f"{d}: missing {WEIGHTS_FILE}") from None
    except (KeyError, ValueError) as exc:
        raise CheckpointError(f"{d}: weights do not match config ({exc})") from None
    return model, meta
