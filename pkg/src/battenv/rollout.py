"""Open-loop full-trajectory generation.

Stateless counterpart of :meth:`BatchEnvPool.step`: every call takes models,
initial states and controls and returns the whole trajectory.  The loop is a
plain per-environment, per-step iteration of :func:`kernel.step_packed`, so
it doubles as the parity oracle for the pool.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernel
from .errors import ShapeError
from .pool import CTRL, check_models, control_layout


@dataclass
class Trajectory:
    states: np.ndarray  # (N, T, nstate); states[:, t] is the state after step t + 1
    sensordata: np.ndarray  # (N, T, nsensordata); sensors from before each step's integration


def rollout(models, initial_state, nstep: int, control=None, control_spec=(CTRL,)) -> Trajectory:
    initial_state = np.asarray(initial_state, dtype=np.float64)
    if initial_state.ndim != 2:
        raise ShapeError(f"initial_state must be 2-D, got shape {initial_state.shape}")
    n = initial_state.shape[0]
    models = check_models(models, n)
    ref = models[0]
    if initial_state.shape[1] != ref.nstate:
        raise ShapeError(f"initial_state has shape {initial_state.shape}, expected ({n}, {ref.nstate})")
    nstep = int(nstep)
    if nstep < 1:
        raise ValueError(f"nstep must be >= 1, got {nstep}")
    if control is None:
        ctrl_adr = xfrc_adr = -1
    else:
        ncontrol, ctrl_adr, xfrc_adr = control_layout(ref, control_spec)
        control = np.ascontiguousarray(control, dtype=np.float64)
        if control.shape != (n, nstep, ncontrol):
            raise ShapeError(f"control has shape {control.shape}, expected ({n}, {nstep}, {ncontrol})")

    states = np.empty((n, nstep, ref.nstate))
    sensordata = np.empty((n, nstep, ref.nsensordata))
    ws = kernel.Workspace.for_model(ref)
    no_control = np.zeros(0)
    for e in range(n):
        m = models[e] if len(models) > 1 else ref
        s = initial_state[e].copy()
        for t in range(nstep):
            row = no_control if control is None else control[e, t]
            kernel.step_packed(m, s, row, ctrl_adr, xfrc_adr, ws)
            states[e, t] = s
            sensordata[e, t] = ws.sensordata
    return Trajectory(states, sensordata)
