"""Articulated-chain physics on a single environment.

Thin wrappers over the jitted routines in ``_kernels``; the pool and the
rollout oracle call the same compiled code, one environment at a time.
Applied forces (``applied``, 6 values per body: world-frame force at the body
origin, then torque) play the role of ``xfrc_applied``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .errors import ShapeError
from .model import SimModel, StateVector, pack_state, unpack_state


@dataclass(eq=False)
class Workspace:
    """Scratch buffers for one worker; never shared between concurrent calls."""

    k: K.KWork

    @classmethod
    def for_model(cls, m: SimModel) -> "Workspace":
        return cls.for_sizes(m.nbody, m.nv, m.nsite)

    @classmethod
    def for_sizes(cls, nbody: int, nv: int, nsite: int) -> "Workspace":
        return cls(
            K.KWork(
                xpos=np.zeros((nbody, 3)),
                xmat=np.zeros((nbody, 3, 3)),
                xcom=np.zeros((nbody, 3)),
                dof_anchor=np.zeros((nv, 3)),
                dof_axis=np.zeros((nv, 3)),
                site_xpos=np.zeros((nsite, 3)),
                sensordata=np.zeros(2 * nv + 3 * nsite),
                qfrc=np.zeros(nv),
                qpos=np.zeros(nv),
            )
        )

    def __getattr__(self, name):
        # expose xpos, xmat, site_xpos, sensordata, ... directly
        try:
            return getattr(self.__dict__["k"], name)
        except (KeyError, AttributeError):
            raise AttributeError(name) from None


def _qpos(m: SimModel, qpos) -> np.ndarray:
    q = np.ascontiguousarray(qpos, dtype=np.float64)
    if q.shape != (m.nq,):
        raise ShapeError(f"qpos has shape {q.shape}, expected ({m.nq},)")
    return q


def kinematics(m: SimModel, qpos, ws: Workspace) -> None:
    """Fill body poses, COMs, dof anchors/axes and site positions in ``ws``."""
    K.kinematics(m._kmodel(), 0, _qpos(m, qpos), ws.k)


def forward(m: SimModel, state: StateVector, ws: Workspace) -> np.ndarray:
    """Sensor data ``[qpos | qvel | site_xpos]`` for ``state`` (cached in ``ws``)."""
    s = pack_state(state)
    if s.shape != (m.nstate,):
        raise ShapeError(f"state has length {s.shape[0]}, expected {m.nstate}")
    K.forward(m._kmodel(), 0, s, ws.k)
    return ws.k.sensordata.copy()


def control_row(m: SimModel, ctrl=None, applied=None) -> tuple[np.ndarray, int, int]:
    """Pack ctrl and applied forces into one row plus their offsets (-1 = absent)."""
    parts, ctrl_adr, xfrc_adr, n = [], -1, -1, 0
    if ctrl is not None:
        c = np.asarray(ctrl, dtype=np.float64).ravel()
        if c.shape != (m.nu,):
            raise ShapeError(f"ctrl has shape {c.shape}, expected ({m.nu},)")
        parts.append(c)
        ctrl_adr, n = 0, m.nu
    if applied is not None:
        a = np.asarray(applied, dtype=np.float64).ravel()
        if a.shape != (6 * m.nbody,):
            raise ShapeError(f"applied force has {a.size} values, expected {6 * m.nbody}")
        parts.append(a)
        xfrc_adr = n
    row = np.concatenate(parts) if parts else np.zeros(0)
    return row, ctrl_adr, xfrc_adr


def step_packed(m: SimModel, s: np.ndarray, row: np.ndarray, ctrl_adr: int, xfrc_adr: int,
                ws: Workspace) -> None:
    """Advance packed state ``s`` in place by one step."""
    K.step(m._kmodel(), 0, s, row, ctrl_adr, xfrc_adr, ws.k)


def step(m: SimModel, state: StateVector, ctrl=None, applied=None,
         ws: Workspace | None = None) -> StateVector:
    """One semi-implicit Euler step; a missing ``ctrl`` means zero targets."""
    ws = Workspace.for_model(m) if ws is None else ws
    s = pack_state(state)
    if s.shape != (m.nstate,):
        raise ShapeError(f"state has length {s.shape[0]}, expected {m.nstate}")
    row, ca, xa = control_row(m, ctrl, applied)
    K.step(m._kmodel(), 0, s, row, ca, xa, ws.k)
    return unpack_state(s, m.nq, m.nv)


def site_jacobian(m: SimModel, state: StateVector, site_id: int,
                  ws: Workspace) -> tuple[np.ndarray, np.ndarray]:
    """Translational and rotational Jacobians (each 3 x nv) of a site."""
    if not 0 <= site_id < m.nsite:
        raise IndexError(f"site id {site_id} out of range [0, {m.nsite})")
    km = m._kmodel()
    K.kinematics(km, 0, _qpos(m, state.qpos), ws.k)
    jacp = np.zeros((3, m.nv))
    jacr = np.zeros((3, m.nv))
    K.site_jacobian(km, 0, int(site_id), ws.k, jacp, jacr, True, True)
    return jacp, jacr
