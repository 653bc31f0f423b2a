"""Binary checkpoint of a network config and its weights.

Layout: ASCII header lines terminated by ``end\\n``, then for each layer
with parameters its weight tensor followed by its bias vector, C order,
as little-endian IEEE-754 doubles::

    LINKSIGHT-NN 1
    byteorder little
    dtype float64
    config {...json...}
    end
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .config import LayerSpec, NetworkConfig
from .network import NetworkState, param_shapes

MAGIC = "LINKSIGHT-NN"
VERSION = 1


class CheckpointError(ValueError):
    pass


def config_to_dict(config: NetworkConfig) -> dict:
    return {
        "input_size": config.input_size,
        "num_classes": config.num_classes,
        "channels": config.channels,
        "layers": [
            {
                "kind": l.kind,
                "filters": l.filters,
                "kernel": list(l.kernel),
                "stride": list(l.stride),
                "padding": list(l.padding),
                "units": l.units,
                "activation": l.activation,
            }
            for l in config.layers
        ],
    }


def config_from_dict(d: dict) -> NetworkConfig:
    layers = [
        LayerSpec(
            kind=l["kind"],
            filters=l["filters"],
            kernel=tuple(l["kernel"]),
            stride=tuple(l["stride"]),
            padding=tuple(l["padding"]),
            units=l["units"],
            activation=l["activation"],
        )
        for l in d["layers"]
    ]
    return NetworkConfig(d["input_size"], tuple(layers), d["num_classes"], d.get("channels", 1))


def dumps(state: NetworkState, config: NetworkConfig) -> bytes:
    header = (
        f"{MAGIC} {VERSION}\n"
        "byteorder little\n"
        f"dtype {np.dtype(state.dtype).name}\n"
        f"config {json.dumps(config_to_dict(config), sort_keys=True)}\n"
        "end\n"
    ).encode("ascii")
    chunks = [header]
    for w, b in zip(state.weights, state.biases):
        if w is None:
            continue
        chunks.append(np.ascontiguousarray(w, dtype="<f8").tobytes())
        chunks.append(np.ascontiguousarray(b, dtype="<f8").tobytes())
    return b"".join(chunks)


def loads(data: bytes) -> tuple[NetworkState, NetworkConfig]:
    fields = {}
    pos = 0
    first = True
    while True:
        nl = data.find(b"\n", pos)
        if nl < 0:
            raise CheckpointError("truncated header")
        line = data[pos:nl].decode("ascii")
        pos = nl + 1
        if first:
            magic, _, version = line.partition(" ")
            if magic != MAGIC:
                raise CheckpointError("not a linksight checkpoint")
            if int(version) != VERSION:
                raise CheckpointError(f"unsupported checkpoint version {version}")
            first = False
            continue
        if line == "end":
            break
        key, _, val = line.partition(" ")
        fields[key] = val
    if fields.get("byteorder") != "little":
        raise CheckpointError(f"unsupported byte order {fields.get('byteorder')!r}")
    config = config_from_dict(json.loads(fields["config"]))
    dtype = np.dtype(fields.get("dtype", "float64"))
    weights, biases = [], []
    for shapes in param_shapes(config):
        if shapes is None:
            weights.append(None)
            biases.append(None)
            continue
        arrs = []
        for shape in shapes:
            count = int(np.prod(shape))
            end = pos + 8 * count
            if end > len(data):
                raise CheckpointError("truncated weight data")
            arrs.append(np.frombuffer(data[pos:end], dtype="<f8").reshape(shape).astype(dtype))
            pos = end
        weights.append(arrs[0])
        biases.append(arrs[1])
    if pos != len(data):
        raise CheckpointError("trailing bytes after weight data")
    return NetworkState(weights, biases), config


def save(path, state: NetworkState, config: NetworkConfig) -> None:
    Path(path).write_bytes(dumps(state, config))


def load(path) -> tuple[NetworkState, NetworkConfig]:
    return loads(Path(path).read_bytes())
