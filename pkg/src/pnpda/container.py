"""Binary container shared by checkpoints, datasets and trajectories.

Layout::

    PNPDA-CONTAINER\\n
    <header byte length, ASCII decimal>\\n
    <UTF-8 JSON header>\\n
    <little-endian float64 blob>

The header's ``arrays`` entry lists ``{"name", "shape"}`` in blob order;
each array is stored row-major (C order).  Everything else in the header
is free-form metadata.
"""

import json

import numpy as np

MAGIC = b"PNPDA-CONTAINER\n"
FORMAT_VERSION = 1


def write_container(path, header, arrays):
    """Write ``arrays`` (a list of ``(name, ndarray)``) after a JSON header."""
    header = dict(header)
    header["format_version"] = FORMAT_VERSION
    header["arrays"] = [
        {"name": name, "shape": list(np.shape(a))} for name, a in arrays
    ]
    text = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(f"{len(text)}\n".encode("ascii"))
        fh.write(text)
        fh.write(b"\n")
        for _, a in arrays:
            fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def read_container(path):
    """Return ``(header, {name: ndarray})``."""
    with open(path, "rb") as fh:
        if fh.readline() != MAGIC:
            raise ValueError(f"{path}: not a pnpda container")
        n = int(fh.readline().decode("ascii"))
        header = json.loads(fh.read(n).decode("utf-8"))
        if fh.read(1) != b"\n":
            raise ValueError(f"{path}: corrupt header")
        blob = fh.read()
    if header.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported format version {header.get('format_version')}")
    arrays = {}
    off = 0
    for entry in header["arrays"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape, dtype=np.int64))
        arrays[entry["name"]] = (
            np.frombuffer(blob, dtype="<f8", count=count, offset=off)
            .astype(np.float64)
            .reshape(shape)
        )
        off += 8 * count
    if off != len(blob):
        raise ValueError(f"{path}: blob length mismatch")
    return header, arrays
