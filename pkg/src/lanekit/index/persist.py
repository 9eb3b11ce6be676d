"""Binary index container.

Layout (little-endian)::

    8 bytes   magic  b"LANEKIT\\0"
    u32       format version
    u32       header length H
    H bytes   UTF-8 JSON header: family, metric, d, N, params, seed, sections
    ...       raw section payloads, in header order

Each section entry in the header records name, dtype and shape.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from lanekit.index.base import Dataset
from lanekit.index.brute import BruteForceIndex
from lanekit.index.hnsw import HnswLiteIndex
from lanekit.index.ivf import IvfFlatIndex

MAGIC = b"LANEKIT\x00"
FORMAT_VERSION = 1


class IndexFormatError(ValueError):
    pass


def _sections(idx) -> tuple[dict, dict[str, np.ndarray]]:
    ds = idx.dataset
    if isinstance(idx, HnswLiteIndex):
        params = dict(idx.params, entry_point=idx.entry_point, max_level=idx.max_level)
        arrays = {"vectors": ds.vectors, "levels": idx.levels, "links": idx.links, "counts": idx.counts}
        seed = idx.seed
    elif isinstance(idx, IvfFlatIndex):
        params = idx.params
        arrays = {"vectors": ds.vectors, "centroids": idx.centroids, "assignment": idx.assignment}
        seed = idx.seed
    elif isinstance(idx, BruteForceIndex):
        params, arrays, seed = {}, {"vectors": ds.vectors}, 0
    else:
        raise TypeError(f"cannot persist {type(idx).__name__}")
    header = {
        "family": idx.family,
        "metric": ds.metric.value,
        "d": ds.d,
        "N": ds.N,
        "params": params,
        "seed": seed,
    }
    return header, arrays


def save_index(idx, path: str | Path) -> Path:
    header, arrays = _sections(idx)
    header["sections"] = [
        {"name": name, "dtype": np.dtype(a.dtype).newbyteorder("<").str, "shape": list(a.shape)}
        for name, a in arrays.items()
    ]
    blob = json.dumps(header, sort_keys=True).encode()
    path = Path(path)
    with path.open("wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", FORMAT_VERSION, len(blob)))
        fh.write(blob)
        for name, a in arrays.items():
            fh.write(np.ascontiguousarray(a, dtype=np.dtype(a.dtype).newbyteorder("<")).tobytes())
    return path


def read_header(path: str | Path) -> dict:
    with Path(path).open("rb") as fh:
        return _read_header(fh)


def _read_header(fh) -> dict:
    magic = fh.read(len(MAGIC))
    if magic != MAGIC:
        raise IndexFormatError(f"not a lanekit index (magic {magic!r})")
    raw = fh.read(8)
    if len(raw) != 8:
        raise IndexFormatError("truncated index header")
    version, hlen = struct.unpack("<II", raw)
    if version != FORMAT_VERSION:
        raise IndexFormatError(f"index format version {version}, this build reads {FORMAT_VERSION}")
    blob = fh.read(hlen)
    if len(blob) != hlen:
        raise IndexFormatError("truncated index header")
    return json.loads(blob)


def load_index(path: str | Path):
    with Path(path).open("rb") as fh:
        header = _read_header(fh)
        arrays = {}
        for sec in header["sections"]:
            dt = np.dtype(sec["dtype"])
            count = int(np.prod(sec["shape"], dtype=np.int64))
            buf = fh.read(count * dt.itemsize)
            if len(buf) != count * dt.itemsize:
                raise IndexFormatError(f"section {sec['name']!r} is truncated")
            arrays[sec["name"]] = np.frombuffer(buf, dtype=dt).reshape(sec["shape"]).astype(dt.newbyteorder("="))
    ds = Dataset(arrays["vectors"], header["metric"])
    p = header["params"]
    family = header["family"]
    if family == "hnsw":
        return HnswLiteIndex(
            ds, arrays["links"], arrays["counts"], arrays["levels"], p["entry_point"],
            p["max_level"], p["graph_degree"], p["ef_construction"], header["seed"],
        )
    if family == "ivf":
        return IvfFlatIndex(ds, arrays["centroids"], arrays["assignment"], p["train_sample_size"], header["seed"])
    if family == "brute":
        return BruteForceIndex(ds)
    raise IndexFormatError(f"unknown index family {family!r}")
