"""Model record, state packing, patchable-field registry and chain builder."""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import NamedTuple, Sequence

import numpy as np

from . import _kernels as K
from .errors import ModelSpecError, ShapeError, UnknownFieldError
from .hfield import HeightField

AXIS_TOL = 1e-12


@dataclass
class JointSpec:
    """A revolute joint.

    ``parent`` is the index of the parent joint; ``None`` means the previous
    joint (a serial chain) and ``-1`` attaches to the base (or the world when
    the base is fixed).
    """

    axis: Sequence[float]
    offset: Sequence[float] = (0.0, 0.0, 0.0)
    parent: int | None = None


@dataclass
class BodySpec:
    mass: float = 1.0
    inertia_diag: Sequence[float] = (0.0, 0.0, 0.0)
    ipos: Sequence[float] = (0.0, 0.0, 0.0)


@dataclass
class SiteSpec:
    body: int
    pos: Sequence[float] = (0.0, 0.0, 0.0)


@dataclass
class ChainSpec:
    """Plain description of an articulated chain (or tree).

    With ``floating_base`` the base body has four dofs (x, y, z, yaw) and is
    body 0; otherwise the base is the world and ``base_body`` is ignored.
    Per-dof arrays (armature, damping, friction) have length nv, per-actuator
    arrays (kp, kd) length nu; scalars broadcast.
    """

    joints: list[JointSpec]
    bodies: list[BodySpec]
    floating_base: bool = False
    base_body: BodySpec = field(default_factory=BodySpec)
    sites: list[SiteSpec] = field(default_factory=list)
    hfields: list[HeightField] = field(default_factory=list)
    timestep: float = 0.002
    gravity: Sequence[float] = (0.0, 0.0, -9.81)
    armature: Sequence[float] | float = 0.0
    damping: Sequence[float] | float = 0.0
    friction: Sequence[float] | float = 0.0
    kp: Sequence[float] | float = 0.0
    kd: Sequence[float] | float = 0.0
    qpos0: Sequence[float] | None = None

    @property
    def nbody(self) -> int:
        return len(self.joints) + int(self.floating_base)

    @property
    def nv(self) -> int:
        return len(self.joints) + 4 * int(self.floating_base)


class FieldInfo(NamedTuple):
    shape: tuple
    requires_set_const: bool

    def resolve(self, m: "SimModel") -> tuple[int, ...]:
        return tuple(getattr(m, d) if isinstance(d, str) else d for d in self.shape)


FIELD_REGISTRY = MappingProxyType(
    {
        "body_mass": FieldInfo(("nbody",), True),
        "body_inertia": FieldInfo(("nbody", 3), True),
        "body_ipos": FieldInfo(("nbody", 3), True),
        "dof_armature": FieldInfo(("nv",), True),
        "gravity": FieldInfo((3,), False),
        "kp": FieldInfo(("nu",), False),
        "kd": FieldInfo(("nu",), False),
        "dof_damping": FieldInfo(("nv",), False),
        "dof_friction": FieldInfo(("nv",), False),
    }
)


def field_info(name: str) -> FieldInfo:
    try:
        return FIELD_REGISTRY[name]
    except KeyError:
        raise UnknownFieldError(
            f"unknown field {name!r}; registered: {', '.join(FIELD_REGISTRY)}"
        ) from None


# Array attributes of SimModel in kernel order; all float64 except the two
# index arrays.
_ARRAYS = K.KModel._fields
_INT_ARRAYS = ("body_parent", "site_bodyid")


@dataclass(eq=False)
class SimModel:
    """Per-environment model.

    Sizes are derived from the array shapes.  ``timestep`` and
    ``total_mass`` are stored as 0-d arrays so that views into a pool's
    stacked storage stay live; read them through the float properties.
    """

    body_parent: np.ndarray
    body_pos: np.ndarray
    body_axis: np.ndarray
    body_ipos: np.ndarray
    body_mass: np.ndarray
    body_inertia: np.ndarray
    site_bodyid: np.ndarray
    site_pos: np.ndarray
    dof_armature: np.ndarray
    dof_damping: np.ndarray
    dof_friction: np.ndarray
    kp: np.ndarray
    kd: np.ndarray
    gravity: np.ndarray
    timestep_: np.ndarray
    qpos0: np.ndarray
    subtree_mass: np.ndarray
    total_mass_: np.ndarray
    dof_M: np.ndarray
    hfields: list[HeightField] = field(default_factory=list)

    @property
    def timestep(self) -> float:
        return float(self.timestep_)

    @property
    def total_mass(self) -> float:
        return float(self.total_mass_)

    @property
    def nbody(self) -> int:
        return self.body_mass.shape[0]

    @property
    def nv(self) -> int:
        return self.dof_M.shape[0]

    @property
    def nq(self) -> int:
        return self.nv

    @property
    def floating_base(self) -> bool:
        return self.nv != self.nbody

    @property
    def nu(self) -> int:
        return self.kp.shape[0]

    @property
    def nsite(self) -> int:
        return self.site_pos.shape[0]

    @property
    def nsensordata(self) -> int:
        return self.nq + self.nv + 3 * self.nsite

    @property
    def nstate(self) -> int:
        return 1 + self.nq + self.nv

    @property
    def nhfield(self) -> int:
        return len(self.hfields)

    def arrays(self) -> dict[str, np.ndarray]:
        return {name: self._array(name) for name in _ARRAYS}

    def _array(self, name: str) -> np.ndarray:
        if name in ("timestep", "total_mass"):
            return getattr(self, name + "_")
        return getattr(self, name)

    def _kmodel(self) -> K.KModel:
        # a batch of one: shares memory with this model
        return K.KModel(*(self._array(n).reshape((1,) + self._array(n).shape) for n in _ARRAYS))

    def sizes(self) -> tuple[int, ...]:
        return (self.nq, self.nv, self.nu, self.nbody, self.nsite, self.nsensordata, self.nhfield)

    @classmethod
    def _from_arrays(cls, arrays: dict[str, np.ndarray], hfields: list[HeightField]) -> "SimModel":
        kw = {(n + "_" if n in ("timestep", "total_mass") else n): a for n, a in arrays.items()}
        return cls(**kw, hfields=hfields)


def compatible(a: SimModel, b: SimModel) -> bool:
    """Models are compatible when all sizes (and hfield count) agree."""
    return a.sizes() == b.sizes()


@dataclass
class StateVector:
    time: float
    qpos: np.ndarray
    qvel: np.ndarray


def pack_state(s: StateVector) -> np.ndarray:
    qpos = np.asarray(s.qpos, dtype=np.float64).ravel()
    qvel = np.asarray(s.qvel, dtype=np.float64).ravel()
    return np.concatenate(([float(s.time)], qpos, qvel))


def unpack_state(v, nq: int, nv: int | None = None) -> StateVector:
    nv = nq if nv is None else nv
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.shape[0] != 1 + nq + nv:
        raise ShapeError(f"state vector has shape {v.shape}, expected ({1 + nq + nv},)")
    return StateVector(float(v[0]), v[1 : 1 + nq].copy(), v[1 + nq :].copy())


def _per(value, n: int, what: str) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    if arr.ndim == 0:
        return np.full(n, float(arr))
    if arr.shape != (n,):
        raise ModelSpecError(f"{what} must have length {n}, got shape {arr.shape}")
    return arr.copy()


def _vec3(value, what: str) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    if arr.shape != (3,):
        raise ModelSpecError(f"{what} must be a 3-vector, got shape {arr.shape}")
    return arr


def build_chain_model(spec: ChainSpec) -> SimModel:
    """Compile a ChainSpec into a SimModel with derived constants computed."""
    fl = bool(spec.floating_base)
    nj = len(spec.joints)
    if len(spec.bodies) != nj:
        raise ModelSpecError(f"{nj} joints but {len(spec.bodies)} bodies")
    if not spec.timestep > 0:
        raise ModelSpecError(f"timestep must be positive, got {spec.timestep}")
    nbody = nj + int(fl)
    nv = nj + 4 * int(fl)
    if nbody == 0:
        raise ModelSpecError("model has no bodies")

    bodies = ([spec.base_body] if fl else []) + list(spec.bodies)
    body_parent = np.full(nbody, -1, dtype=np.int64)
    body_pos = np.zeros((nbody, 3))
    body_axis = np.zeros((nbody, 3))
    if fl:
        body_axis[0, 2] = 1.0
    for j, js in enumerate(spec.joints):
        b = j + int(fl)
        axis = _vec3(js.axis, f"joint {j} axis")
        if abs(np.linalg.norm(axis) - 1.0) > AXIS_TOL:
            raise ModelSpecError(f"joint {j} axis {axis.tolist()} is not unit length")
        pj = j - 1 if js.parent is None else int(js.parent)
        if not -1 <= pj < j:
            raise ModelSpecError(f"joint {j} parent {pj} must be in [-1, {j})")
        body_parent[b] = (pj + int(fl)) if pj >= 0 else (0 if fl else -1)
        body_axis[b] = axis
        body_pos[b] = _vec3(js.offset, f"joint {j} offset")

    body_mass = np.empty(nbody)
    body_inertia = np.empty((nbody, 3))
    body_ipos = np.empty((nbody, 3))
    for b, bs in enumerate(bodies):
        if not bs.mass > 0:
            raise ModelSpecError(f"body {b} mass must be positive, got {bs.mass}")
        body_mass[b] = bs.mass
        body_inertia[b] = _vec3(bs.inertia_diag, f"body {b} inertia")
        if np.any(body_inertia[b] < 0):
            raise ModelSpecError(f"body {b} inertia must be non-negative")
        body_ipos[b] = _vec3(bs.ipos, f"body {b} ipos")

    site_bodyid = np.empty(len(spec.sites), dtype=np.int64)
    site_pos = np.zeros((len(spec.sites), 3))
    for k, ss in enumerate(spec.sites):
        if not 0 <= int(ss.body) < nbody:
            raise ModelSpecError(f"site {k} body {ss.body} out of range [0, {nbody})")
        site_bodyid[k] = int(ss.body)
        site_pos[k] = _vec3(ss.pos, f"site {k} pos")

    qpos0 = np.zeros(nv) if spec.qpos0 is None else _per(spec.qpos0, nv, "qpos0")
    m = SimModel(
        body_parent=body_parent,
        body_pos=body_pos,
        body_axis=body_axis,
        body_ipos=body_ipos,
        body_mass=body_mass,
        body_inertia=body_inertia,
        site_bodyid=site_bodyid,
        site_pos=site_pos,
        dof_armature=_per(spec.armature, nv, "armature"),
        dof_damping=_per(spec.damping, nv, "damping"),
        dof_friction=_per(spec.friction, nv, "friction"),
        kp=_per(spec.kp, nj, "kp"),
        kd=_per(spec.kd, nj, "kd"),
        gravity=_vec3(spec.gravity, "gravity").copy(),
        timestep_=np.array(float(spec.timestep)),
        qpos0=qpos0,
        subtree_mass=np.zeros(nbody),
        total_mass_=np.array(0.0),
        dof_M=np.zeros(nv),
        hfields=[copy.deepcopy(h) for h in spec.hfields],
    )
    for h in m.hfields:
        h.validate()
    set_const(m)
    bad = np.flatnonzero(m.dof_M <= 0.0)
    if bad.size:
        raise ModelSpecError(f"dofs {bad.tolist()} have zero inertia; add armature or body inertia")
    return m


def copy_model(m: SimModel) -> SimModel:
    """Deep, independent copy (own arrays, own height-field grids)."""
    arrays = {n: np.array(a, copy=True) for n, a in m.arrays().items()}
    return SimModel._from_arrays(arrays, [copy.deepcopy(h) for h in m.hfields])


def set_const(m: SimModel) -> None:
    """Refresh subtree_mass, total_mass and dof_M in place."""
    from .kernel import Workspace

    K.set_const(m._kmodel(), 0, Workspace.for_model(m).k)


def patch_field(m: SimModel, name: str, values) -> None:
    """Overwrite registered parameter ``name``; derived arrays are left stale."""
    info = field_info(name)
    values = np.asarray(values, dtype=np.float64)
    shape = info.resolve(m)
    if values.shape != shape:
        raise ShapeError(f"{name} expects shape {shape}, got {values.shape}")
    getattr(m, name)[...] = values
