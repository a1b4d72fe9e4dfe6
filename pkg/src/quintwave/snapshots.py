"""Binary snapshot files for field states, with a JSON sidecar.

Layout (little-endian): 8-byte magic b"QWSNAP01", uint64 node count,
float64 dr, float64 t, then u and v as float64 arrays.  The sidecar
<path>.json repeats the header fields for tooling that cannot parse
the binary.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .exceptions import DomainError
from .grid import FieldState, RadialGrid

MAGIC = b"QWSNAP01"
_HEADER = struct.Struct("<8sQdd")


def save_state(path, state: FieldState) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, state.grid.n_nodes, state.grid.dr, state.t))
        fh.write(np.ascontiguousarray(state.u, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(state.v, dtype="<f8").tobytes())
    sidecar = {
        "format": MAGIC.decode(),
        "n_nodes": state.grid.n_nodes,
        "dr": state.grid.dr,
        "t": state.t,
        "r_max": state.grid.r_max,
    }
    with open(path.with_suffix(path.suffix + ".json"), "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def load_state(path, grid: RadialGrid | None = None) -> FieldState:
    path = Path(path)
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
        if len(raw) != _HEADER.size:
            raise DomainError(f"{path}: truncated snapshot header")
        magic, n_nodes, dr, t = _HEADER.unpack(raw)
        if magic != MAGIC:
            raise DomainError(f"{path}: not a {MAGIC.decode()} snapshot")
        body = np.frombuffer(fh.read(), dtype="<f8")
    if body.size != 2 * n_nodes:
        raise DomainError(f"{path}: payload size does not match node count")
    if grid is None:
        grid = RadialGrid(dr=dr, n_cells=int(n_nodes) - 1)
    elif grid.n_nodes != n_nodes or abs(grid.dr - dr) > 1e-14 * dr:
        raise DomainError(f"{path}: snapshot grid does not match supplied grid")
    return FieldState(t=t, u=body[:n_nodes].copy(), v=body[n_nodes:].copy(), grid=grid)
