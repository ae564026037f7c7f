"""Single-file little-endian checkpoint with length-prefixed named segments.

Layout::

    b"FFDCKPT\\0"  u32 version
    u32 len, JSON metadata (config, optimizer step, rng state)
    u32 segment count, then per segment:
        u16 len, utf-8 name; u8 ndim; u32 × ndim dims; float32 payload

Segment names: parameters as ``backbone.*``/``head.*``, batch-norm buffers as
``buffer/<name>`` and Adam moments as ``adam.m/<name>``, ``adam.v/<name>``.
"""

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import DataError

MAGIC = b"FFDCKPT\0"
VERSION = 1


@dataclass
class Checkpoint:
    config: dict
    params: dict                      # name -> float32 array
    buffers: dict = field(default_factory=dict)
    adam_m: dict = field(default_factory=dict)
    adam_v: dict = field(default_factory=dict)
    step: int = 0
    rng_state: Optional[dict] = None

    def segments(self):
        segs = list(self.params.items())
        segs += [(f"buffer/{k}", v) for k, v in self.buffers.items()]
        segs += [(f"adam.m/{k}", v) for k, v in self.adam_m.items()]
        segs += [(f"adam.v/{k}", v) for k, v in self.adam_v.items()]
        return segs

    def to_bytes(self):
        meta = json.dumps({"config": self.config, "step": int(self.step),
                           "rng_state": self.rng_state}, sort_keys=True,
                          separators=(",", ":")).encode()
        parts = [MAGIC, struct.pack("<I", VERSION), struct.pack("<I", len(meta)), meta]
        segs = self.segments()
        parts.append(struct.pack("<I", len(segs)))
        for name, arr in segs:
            arr = np.ascontiguousarray(arr, dtype="<f4")
            raw = name.encode()
            parts.append(struct.pack("<H", len(raw)) + raw)
            parts.append(struct.pack("<B", arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape))
            parts.append(arr.tobytes())
        return b"".join(parts)

    def save(self, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(self.to_bytes())
        return path

    @classmethod
    def from_bytes(cls, buf):
        view = memoryview(buf)
        if bytes(view[:8]) != MAGIC:
            raise DataError("not an FFD checkpoint (bad magic)")
        pos = 8

        def take(fmt):
            nonlocal pos
            vals = struct.unpack_from(fmt, view, pos)
            pos += struct.calcsize(fmt)
            return vals

        (version,) = take("<I")
        if version != VERSION:
            raise DataError(f"unsupported checkpoint version {version}")
        (meta_len,) = take("<I")
        meta = json.loads(bytes(view[pos:pos + meta_len]))
        pos += meta_len
        (n_seg,) = take("<I")
        ck = cls(meta["config"], {}, step=meta.get("step", 0), rng_state=meta.get("rng_state"))
        for _ in range(n_seg):
            (name_len,) = take("<H")
            name = bytes(view[pos:pos + name_len]).decode()
            pos += name_len
            (ndim,) = take("<B")
            shape = take(f"<{ndim}I") if ndim else ()
            count = int(np.prod(shape)) if shape else 1
            arr = np.frombuffer(view, dtype="<f4", count=count, offset=pos).reshape(shape)
            arr = arr.astype(np.float32)
            pos += 4 * count
            if name.startswith("buffer/"):
                ck.buffers[name[7:]] = arr
            elif name.startswith("adam.m/"):
                ck.adam_m[name[7:]] = arr
            elif name.startswith("adam.v/"):
                ck.adam_v[name[7:]] = arr
            else:
                ck.params[name] = arr
        if pos != len(view):
            raise DataError("trailing bytes after the last checkpoint segment")
        return ck

    @classmethod
    def load(cls, path):
        path = Path(path)
        if not path.exists():
            raise DataError(f"checkpoint {path} does not exist")
        try:
            return cls.from_bytes(path.read_bytes())
        except (struct.error, ValueError, KeyError) as exc:
            raise DataError(f"corrupt checkpoint {path}: {exc}") from exc


def checkpoint_from_model(model, config, optimizer=None, rng_state=None):
    ck = Checkpoint(config.to_dict(),
                    {k: t.data.copy() for k, t in model.parameters().items()},
                    {k: v.copy() for k, v in model.buffers().items()},
                    rng_state=rng_state)
    if optimizer is not None:
        ck.adam_m = {k: v.copy() for k, v in optimizer.m.items()}
        ck.adam_v = {k: v.copy() for k, v in optimizer.v.items()}
        ck.step = optimizer.step_count
    return ck


def model_from_checkpoint(ck):
    """Rebuild (config, Detector) from a checkpoint."""
    from .config import config_from_dict
    from .model import Detector

    cfg = config_from_dict(ck.config)
    model = Detector.build(cfg.model, cfg.seed)
    params = model.parameters()
    if set(params) != set(ck.params):
        missing = sorted(set(params) ^ set(ck.params))[:5]
        raise DataError(f"checkpoint parameters do not match the model: {missing}")
    for name, t in params.items():
        if t.shape != ck.params[name].shape:
            raise DataError(f"shape mismatch for {name}: {t.shape} vs {ck.params[name].shape}")
        t.data[...] = ck.params[name]
    for name, buf in model.buffers().items():
        if name in ck.buffers:
            buf[...] = ck.buffers[name]
    return cfg, model
