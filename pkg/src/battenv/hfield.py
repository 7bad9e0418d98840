"""Height-field terrain and bilinear sampling."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _kernels as K
from .errors import ModelSpecError

_MODES = {
    "world": K.MODE_WORLD,
    "none": K.MODE_WORLD,
    "yaw": K.MODE_YAW,
    "body": K.MODE_BODY,
    "full": K.MODE_BODY,
}


def parse_mode(mode: str) -> int:
    try:
        return _MODES[mode]
    except KeyError:
        raise ValueError(f"unknown alignment mode {mode!r}; expected one of {sorted(_MODES)}") from None


@dataclass(eq=False)
class HeightField:
    """Grid of normalized elevations.

    ``data[r, c]``: row r runs along +y, column c along +x.  ``size`` is
    (half-x, half-y, elevation scale, base thickness); the base thickness is
    kept for completeness and never used by sampling.
    """

    data: np.ndarray
    size: tuple[float, float, float, float] = (1.0, 1.0, 1.0, 0.1)
    center: tuple[float, float] = (0.0, 0.0)
    z0: float = 0.0

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.float64)

    @property
    def nrow(self) -> int:
        return self.data.shape[0]

    @property
    def ncol(self) -> int:
        return self.data.shape[1]

    def validate(self) -> None:
        if self.data.ndim != 2 or self.nrow < 2 or self.ncol < 2:
            raise ModelSpecError(f"height field needs at least 2x2 samples, got {self.data.shape}")
        if np.any(self.data < 0) or np.any(self.data > 1):
            raise ModelSpecError("height field data must lie in [0, 1]")
        sx, sy, sz = self.size[:3]
        if not (sx > 0 and sy > 0 and sz > 0):
            raise ModelSpecError(f"height field size must be positive, got {self.size}")

    def _kfield(self) -> K.KHField:
        return K.KHField(
            adr=np.zeros((1, 1), dtype=np.int64),
            nrow=np.full((1, 1), self.nrow, dtype=np.int64),
            ncol=np.full((1, 1), self.ncol, dtype=np.int64),
            size=np.asarray(self.size, dtype=np.float64).reshape(1, 1, 4),
            center=np.asarray(self.center, dtype=np.float64).reshape(1, 1, 2),
            z0=np.full((1, 1), float(self.z0)),
            data=self.data.ravel(),
        )


def pack_hfields(per_env: list[list[HeightField]], dedupe: bool = False) -> K.KHField:
    """Flatten every env's height fields into one kernel record.

    With ``dedupe`` a grid object that appears for several envs is stored once.
    """
    n = len(per_env)
    nh = len(per_env[0]) if n else 0
    adr = np.zeros((n, nh), dtype=np.int64)
    nrow = np.zeros((n, nh), dtype=np.int64)
    ncol = np.zeros((n, nh), dtype=np.int64)
    size = np.zeros((n, nh, 4))
    center = np.zeros((n, nh, 2))
    z0 = np.zeros((n, nh))
    chunks = []
    seen = {}
    cursor = 0
    for e, fields in enumerate(per_env):
        for h, hf in enumerate(fields):
            key = id(hf.data)
            if dedupe and key in seen:
                adr[e, h] = seen[key]
            else:
                adr[e, h] = seen[key] = cursor
                chunks.append(hf.data.ravel())
                cursor += hf.data.size
            nrow[e, h], ncol[e, h] = hf.data.shape
            size[e, h] = hf.size
            center[e, h] = hf.center
            z0[e, h] = hf.z0
    data = np.concatenate(chunks) if chunks else np.zeros(0)
    return K.KHField(adr, nrow, ncol, size, center, z0, data)


def sample_height(hf: HeightField, wx: float, wy: float) -> float:
    """World-frame terrain height at (wx, wy); points off the grid clamp to its edge."""
    return K.hfield_height(hf._kfield(), 0, 0, float(wx), float(wy))


def sample_points(
    hf: HeightField,
    frame_pos,
    frame_rot,
    offsets,
    mode: str = "yaw",
    return_clearance: bool = False,
) -> np.ndarray:
    """Sample terrain at XY offsets attached to a frame.

    ``mode`` selects how offsets rotate with the frame: ``world``/``none``
    (not at all), ``yaw`` (heading only) or ``body``/``full`` (the XY block of
    the frame rotation).  With ``return_clearance`` the result is
    ``frame_z - terrain_z`` instead of the terrain height.
    """
    offsets = np.ascontiguousarray(offsets, dtype=np.float64).reshape(-1, 2)
    out = np.empty(offsets.shape[0])
    K.hfield_points(
        hf._kfield(),
        0,
        0,
        np.ascontiguousarray(frame_pos, dtype=np.float64),
        np.ascontiguousarray(frame_rot, dtype=np.float64),
        offsets,
        parse_mode(mode),
        bool(return_clearance),
        out,
    )
    return out


def stairs(nrow: int = 64, ncol: int = 64, nsteps: int = 8, *, size=(4.0, 4.0, 0.8, 0.1),
           center=(0.0, 0.0), z0: float = 0.0) -> HeightField:
    """Terrain that rises in ``nsteps`` equal treads along +x."""
    cols = np.arange(ncol)
    level = np.floor(cols * nsteps / ncol) / max(nsteps - 1, 1)
    data = np.tile(np.minimum(level, 1.0), (nrow, 1))
    return HeightField(data=data, size=tuple(size), center=tuple(center), z0=z0)


def load_grid(path: str | Path) -> np.ndarray:
    """Read an elevation grid from a comma- or whitespace-separated text file."""
    text = Path(path).read_text()
    delimiter = "," if "," in text else None
    return np.loadtxt(path, delimiter=delimiter, ndmin=2)


def grid_to_rows(data: np.ndarray) -> list[list[float]]:
    return [[float(x) for x in row] for row in np.asarray(data)]


__all__ = [
    "HeightField",
    "sample_height",
    "sample_points",
    "stairs",
    "load_grid",
    "pack_hfields",
    "parse_mode",
]
