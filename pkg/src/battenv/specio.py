"""JSON documents for ChainSpec.

Layout::

    {
      "floating_base": false,
      "timestep": 0.01,
      "gravity": [0, 0, -9.81],
      "armature": 0.0, "damping": 0.0, "friction": 0.0,   # scalar or length nv
      "kp": 0.0, "kd": 0.0,                                # scalar or length nu
      "qpos0": null,                                       # or length nq
      "base_body": {"mass": 1, "inertia_diag": [..3], "ipos": [..3]},
      "joints": [{"axis": [..3], "offset": [..3], "parent": null}],
      "bodies": [{"mass": 1, "inertia_diag": [..3], "ipos": [..3]}],
      "sites":  [{"body": 0, "pos": [..3]}],
      "hfields": [{"data": [[...]] | "data_csv": "grid.csv",
                   "size": [sx, sy, sz, base], "center": [x, y], "z0": 0}]
    }

``data_csv`` paths are resolved relative to the document.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import ModelSpecError
from .hfield import HeightField, grid_to_rows, load_grid
from .model import BodySpec, ChainSpec, JointSpec, SiteSpec


def _floats(v):
    if v is None:
        return None
    arr = np.asarray(v, dtype=np.float64)
    return float(arr) if arr.ndim == 0 else [float(x) for x in arr.ravel()]


def _body(b: BodySpec) -> dict:
    return {"mass": float(b.mass), "inertia_diag": _floats(b.inertia_diag), "ipos": _floats(b.ipos)}


def spec_to_dict(spec: ChainSpec) -> dict:
    return {
        "floating_base": bool(spec.floating_base),
        "timestep": float(spec.timestep),
        "gravity": _floats(spec.gravity),
        "armature": _floats(spec.armature),
        "damping": _floats(spec.damping),
        "friction": _floats(spec.friction),
        "kp": _floats(spec.kp),
        "kd": _floats(spec.kd),
        "qpos0": _floats(spec.qpos0),
        "base_body": _body(spec.base_body),
        "joints": [
            {"axis": _floats(j.axis), "offset": _floats(j.offset), "parent": j.parent}
            for j in spec.joints
        ],
        "bodies": [_body(b) for b in spec.bodies],
        "sites": [{"body": int(s.body), "pos": _floats(s.pos)} for s in spec.sites],
        "hfields": [
            {
                "data": grid_to_rows(h.data),
                "size": _floats(h.size),
                "center": _floats(h.center),
                "z0": float(h.z0),
            }
            for h in spec.hfields
        ],
    }


def spec_from_dict(doc: dict, base_dir: Path | None = None) -> ChainSpec:
    try:
        hfields = []
        for h in doc.get("hfields", []):
            if "data_csv" in h:
                path = Path(h["data_csv"])
                if base_dir is not None and not path.is_absolute():
                    path = base_dir / path
                data = load_grid(path)
            else:
                data = np.asarray(h["data"], dtype=np.float64)
            hfields.append(
                HeightField(
                    data=data,
                    size=tuple(h.get("size", (1.0, 1.0, 1.0, 0.1))),
                    center=tuple(h.get("center", (0.0, 0.0))),
                    z0=float(h.get("z0", 0.0)),
                )
            )
        return ChainSpec(
            floating_base=bool(doc.get("floating_base", False)),
            timestep=float(doc.get("timestep", 0.002)),
            gravity=tuple(doc.get("gravity", (0.0, 0.0, -9.81))),
            armature=doc.get("armature", 0.0),
            damping=doc.get("damping", 0.0),
            friction=doc.get("friction", 0.0),
            kp=doc.get("kp", 0.0),
            kd=doc.get("kd", 0.0),
            qpos0=doc.get("qpos0"),
            base_body=BodySpec(**doc.get("base_body", {})),
            joints=[JointSpec(**j) for j in doc["joints"]],
            bodies=[BodySpec(**b) for b in doc["bodies"]],
            sites=[SiteSpec(**s) for s in doc.get("sites", [])],
            hfields=hfields,
        )
    except (KeyError, TypeError) as exc:
        raise ModelSpecError(f"malformed model document: {exc}") from exc


def dumps_spec(spec: ChainSpec) -> str:
    return json.dumps(spec_to_dict(spec), indent=2) + "\n"


def save_spec(spec: ChainSpec, path: str | Path) -> None:
    Path(path).write_text(dumps_spec(spec))


def load_spec(path: str | Path) -> ChainSpec:
    path = Path(path)
    return spec_from_dict(json.loads(path.read_text()), base_dir=path.parent)
