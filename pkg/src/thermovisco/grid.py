"""Periodic 2-D collocated grid with centred-difference operators.

Fields are plain numpy arrays with the cell index first and the component
indices last::

    scalar   (nx, ny)
    vector   (nx, ny, 2)
    matrix   (nx, ny, 2, 2)        M[..., i, j]
    tensor3  (nx, ny, 2, 2, 2)     H[..., i, j, k]

The centred periodic difference is exactly skew-adjoint with respect to the
cell-sum inner product, so every ``div`` below is minus the adjoint of the
matching ``grad`` (discrete summation by parts).
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

SNAPSHOT_MAGIC = "thermovisco-snapshot v1"


@dataclass(frozen=True)
class Grid:
    nx: int
    ny: int
    Lx: float = 1.0
    Ly: float = 1.0

    def __post_init__(self):
        if self.nx < 4 or self.ny < 4:
            raise ValueError(f"grid needs nx, ny >= 4, got {self.nx} x {self.ny}")
        if not (self.Lx > 0 and self.Ly > 0):
            raise ValueError("domain lengths must be positive")

    @property
    def dx(self) -> float:
        return self.Lx / self.nx

    @property
    def dy(self) -> float:
        return self.Ly / self.ny

    @property
    def cell_area(self) -> float:
        return self.dx * self.dy

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    def coords(self):
        """Cell-centre coordinates ``(X, Y)``, each of shape ``(nx, ny)``."""
        x = (np.arange(self.nx) + 0.5) * self.dx
        y = (np.arange(self.ny) + 0.5) * self.dy
        return np.meshgrid(x, y, indexing="ij")

    # -- derivatives -------------------------------------------------------------
    def ddx(self, q):
        return (np.roll(q, -1, axis=0) - np.roll(q, 1, axis=0)) / (2.0 * self.dx)

    def ddy(self, q):
        return (np.roll(q, -1, axis=1) - np.roll(q, 1, axis=1)) / (2.0 * self.dy)

    def grad(self, q):
        """Gradient appended as a trailing axis: ``grad(q)[..., k] = d_k q``.

        Applied to a vector field this gives ``(grad v)[..., i, j] = d_j v_i``.
        """
        return np.stack([self.ddx(q), self.ddy(q)], axis=-1)

    def grad_vec(self, v):
        return self.grad(v)

    def second_grad(self, v):
        """``(grad^2 v)[..., i, j, k] = d_k d_j v_i``."""
        return self.grad(self.grad(v))

    def div(self, w):
        """Contract the trailing axis with the derivative: ``sum_k d_k w[..., k]``."""
        return self.ddx(w[..., 0]) + self.ddy(w[..., 1])

    def div_mat(self, M):
        return self.div(M)

    def div_div(self, H):
        """``sum_{j,k} d_j d_k H[..., i, j, k]``, the adjoint of :meth:`second_grad`."""
        return self.div(self.div(H))

    def laplacian(self, s):
        return self.div(self.grad(s))

    def advect(self, q, v):
        """``(v . grad) q`` for a field of any rank."""
        extra = q.ndim - 2
        vx = v[..., 0].reshape(self.shape + (1,) * extra)
        vy = v[..., 1].reshape(self.shape + (1,) * extra)
        return vx * self.ddx(q) + vy * self.ddy(q)

    def integrate(self, q):
        """Midpoint quadrature over the two cell axes (components are kept)."""
        return np.sum(q, axis=(0, 1)) * self.cell_area

    def curl_rows(self, M):
        """Row-wise scalar curl ``d_x M[i, 1] - d_y M[i, 0]``; shape ``(nx, ny, 2)``."""
        return self.ddx(M[..., 1]) - self.ddy(M[..., 0])


# -- snapshots -------------------------------------------------------------------

_RANKS = {0: (), 1: (2,), 2: (2, 2), 3: (2, 2, 2)}


def write_snapshot(path, name: str, field: np.ndarray, t: float) -> Path:
    """One field, text header then flat row-major little-endian float64 values."""
    field = np.asarray(field, dtype=float)
    nx, ny = field.shape[:2]
    rank = field.ndim - 2
    if rank not in _RANKS or field.shape[2:] != _RANKS[rank]:
        raise ValueError(f"unsupported field shape {field.shape}")
    header = (
        f"{SNAPSHOT_MAGIC}\nname={name}\nrank={rank}\nnx={nx}\nny={ny}\nt={float(t)!r}\nend\n"
    )
    path = Path(path)
    try:
        with open(path, "wb") as fh:
            fh.write(header.encode("ascii"))
            fh.write(np.ascontiguousarray(field).astype("<f8").tobytes(order="C"))
    except OSError as exc:
        raise OSError(f"cannot write snapshot {path}: {exc}") from exc
    return path


def read_snapshot(path):
    """Returns ``(name, t, field)``."""
    raw = Path(path).read_bytes()
    stream = io.BytesIO(raw)
    if stream.readline().decode("ascii").strip() != SNAPSHOT_MAGIC:
        raise ValueError(f"{path}: not a snapshot file")
    meta = {}
    while True:
        line = stream.readline().decode("ascii").strip()
        if line == "end":
            break
        if not line:
            raise ValueError(f"{path}: truncated header")
        key, _, value = line.partition("=")
        meta[key] = value
    rank, nx, ny = int(meta["rank"]), int(meta["nx"]), int(meta["ny"])
    shape = (nx, ny, *_RANKS[rank])
    data = np.frombuffer(stream.read(), dtype="<f8")
    if data.size != np.prod(shape):
        raise ValueError(f"{path}: expected {np.prod(shape)} values, found {data.size}")
    return meta["name"], float(meta["t"]), data.reshape(shape).astype(float)


def write_slice_csv(path, grid: Grid, field: np.ndarray, axis: str = "x", index: int | None = None):
    """A 1-D cut through a scalar field as CSV (``x,value`` or ``y,value``)."""
    X, Y = grid.coords()
    if axis == "x":
        j = grid.ny // 2 if index is None else index
        coord, vals = X[:, j], field[:, j]
    else:
        i = grid.nx // 2 if index is None else index
        coord, vals = Y[i, :], field[i, :]
    lines = [f"{axis},value"] + [f"{c:.17g},{v:.17g}" for c, v in zip(coord, vals)]
    Path(path).write_text("\n".join(lines) + "\n")
