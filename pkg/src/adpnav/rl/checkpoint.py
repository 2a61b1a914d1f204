"""Binary checkpoint format.

Layout::

    b"ADPCKPT 1\\n"
    <one JSON line: {"config": ..., "step": ..., "extra": ..., "nets": [names]}>
    for each net, in the order listed:
        u32 layer_count
        u32 sizes[layer_count + 1]
        u8  activation tag per layer (0 relu, 1 tanh, 2 identity)
        f32 parameters, layer by layer: weights row-major (out, in), then biases

All integers and floats are little-endian.
"""

from __future__ import annotations

import io
import json
import struct
from pathlib import Path

import numpy as np

from ..errors import ConfigError
from .mlp import ACTIVATIONS, Mlp

MAGIC = b"ADPCKPT 1\n"


def _write_net(buf: io.BytesIO, net: Mlp) -> None:
    sizes = net.sizes
    buf.write(struct.pack("<I", len(net.weights)))
    buf.write(struct.pack(f"<{len(sizes)}I", *sizes))
    buf.write(bytes(ACTIVATIONS.index(a) for a in net.activations))
    for w, b in zip(net.weights, net.biases):
        buf.write(np.ascontiguousarray(w, dtype="<f4").tobytes())
        buf.write(np.ascontiguousarray(b, dtype="<f4").tobytes())


def _read_net(buf: io.BytesIO) -> Mlp:
    (n_layers,) = struct.unpack("<I", buf.read(4))
    sizes = struct.unpack(f"<{n_layers + 1}I", buf.read(4 * (n_layers + 1)))
    acts = [ACTIVATIONS[t] for t in buf.read(n_layers)]
    weights, biases = [], []
    for n_in, n_out in zip(sizes[:-1], sizes[1:]):
        w = np.frombuffer(buf.read(4 * n_in * n_out), dtype="<f4").reshape(n_out, n_in)
        b = np.frombuffer(buf.read(4 * n_out), dtype="<f4")
        weights.append(w.astype(np.float64))
        biases.append(b.astype(np.float64))
    return Mlp(weights, biases, acts)


def dumps_checkpoint(nets: dict[str, Mlp], config: dict, step: int, extra: dict | None = None) -> bytes:
    buf = io.BytesIO()
    buf.write(MAGIC)
    header = {"config": config, "step": int(step), "extra": extra or {}, "nets": list(nets)}
    buf.write(json.dumps(header, sort_keys=True).encode() + b"\n")
    for net in nets.values():
        _write_net(buf, net)
    return buf.getvalue()


def loads_checkpoint(data: bytes) -> tuple[dict[str, Mlp], dict]:
    buf = io.BytesIO(data)
    if buf.readline() != MAGIC:
        raise ConfigError("not an ADPCKPT 1 checkpoint")
    header = json.loads(buf.readline())
    nets = {name: _read_net(buf) for name in header["nets"]}
    return nets, header


def save_checkpoint(path: str | Path, nets: dict[str, Mlp], config: dict, step: int, extra: dict | None = None) -> None:
    Path(path).write_bytes(dumps_checkpoint(nets, config, step, extra))


def load_checkpoint(path: str | Path) -> tuple[dict[str, Mlp], dict]:
    return loads_checkpoint(Path(path).read_bytes())
