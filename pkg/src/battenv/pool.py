"""Stateful batched environment pool.

A :class:`BatchEnvPool` owns one model copy per environment (stored as rows
of stacked arrays), one workspace per worker and a fixed thread pool.  Every
call fans contiguous chunks of environment indices out to the workers and
returns once all of them are done.  The jitted chunk loops release the GIL.
"""

from __future__ import annotations

import enum
import math
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from typing import Sequence

import numpy as np

from . import _kernels as K
from .errors import (
    IncompatibleModelError,
    PoolBusyError,
    PoolDisposedError,
    ShapeError,
)
from .hfield import HeightField, pack_hfields, parse_mode
from .kernel import Workspace
from .model import SimModel, compatible, field_info


class ControlItem(enum.Enum):
    CTRL = "ctrl"
    APPLIED_FORCE = "xfrc_applied"


CTRL = ControlItem.CTRL
APPLIED_FORCE = ControlItem.APPLIED_FORCE


def control_layout(m: SimModel, control_spec) -> tuple[int, int, int]:
    """(ncontrol, ctrl offset, applied-force offset); absent items get -1."""
    items = [ControlItem(c) for c in control_spec]
    if not items:
        raise ValueError("control_spec is empty")
    if len(set(items)) != len(items):
        raise ValueError(f"control_spec has repeated items: {control_spec}")
    n, ctrl_adr, xfrc_adr = 0, -1, -1
    for item in items:
        if item is CTRL:
            ctrl_adr, n = n, n + m.nu
        else:
            xfrc_adr, n = n, n + 6 * m.nbody
    return n, ctrl_adr, xfrc_adr


def chunks(n: int, nworkers: int) -> list[tuple[int, int]]:
    """Contiguous [lo, hi) ranges of size ceil(n / nworkers); empty ranges dropped."""
    if n == 0:
        return []
    size = math.ceil(n / nworkers)
    return [(lo, min(n, lo + size)) for lo in range(0, n, size)]


def _as_models(model) -> list[SimModel]:
    if isinstance(model, SimModel):
        return [model]
    if isinstance(model, ModelView):
        return [model._model]
    models = [m._model if isinstance(m, ModelView) else m for m in model]
    if not all(isinstance(m, SimModel) for m in models):
        raise TypeError("model must be a SimModel or a sequence of SimModel")
    return models


def check_models(model, nbatch: int) -> list[SimModel]:
    """Validate a model or model sequence against ``nbatch``."""
    if nbatch < 1:
        raise ValueError(f"nbatch must be >= 1, got {nbatch}")
    models = _as_models(model)
    if len(models) not in (1, nbatch):
        raise ValueError(f"model sequence has length {len(models)}; expected 1 or nbatch={nbatch}")
    ref = models[0]
    for i, m in enumerate(models[1:], 1):
        if not compatible(ref, m):
            raise IncompatibleModelError(
                f"model {i} sizes {m.sizes()} differ from model 0 sizes {ref.sizes()}"
            )
    return models


class ModelView:
    """Read-only, non-owning view of one pool model.

    Arrays come back with ``writeable=False``; once the pool is closed any
    access raises :class:`PoolDisposedError`.
    """

    __slots__ = ("_pool", "_model")

    def __init__(self, pool: "BatchEnvPool", model: SimModel):
        object.__setattr__(self, "_pool", pool)
        object.__setattr__(self, "_model", model)

    def __getattr__(self, name):
        if self._pool._disposed:
            raise PoolDisposedError("model view used after the pool was closed")
        value = getattr(self._model, name)
        if isinstance(value, np.ndarray):
            value = value.view()
            value.flags.writeable = False
        elif name == "hfields":
            value = tuple(value)
        return value

    def __setattr__(self, name, value):
        raise AttributeError("pool model views are read-only")

    def __repr__(self):
        return f"ModelView(sizes={self._model.sizes()})"


class BatchEnvPool:
    """Pool of ``nbatch`` environments driven through batched calls.

    ``model`` is one SimModel (copied ``nbatch`` times) or a sequence of
    compatible models of length 1 or ``nbatch``.  ``nthread=None`` uses every
    available core; ``nthread=0`` runs all work on the calling thread.  The
    pool stores no per-env state: every call takes the full state explicitly.
    """

    def __init__(self, model, *, nbatch: int, nthread: int | None = None):
        models = check_models(model, nbatch)
        if nthread is None:
            nthread = os.cpu_count() or 1
        if nthread < 0:
            raise ValueError(f"nthread must be >= 0, got {nthread}")
        self.nbatch = int(nbatch)
        self.nthread = int(nthread)
        ref = models[0]

        stacked = {n: np.empty((self.nbatch,) + a.shape, dtype=a.dtype) for n, a in ref.arrays().items()}
        if len(models) == 1:
            for n, a in ref.arrays().items():
                stacked[n][...] = a
        else:
            for e, m in enumerate(models):
                for n, a in m.arrays().items():
                    stacked[n][e] = a
        self._k = K.KModel(**stacked)

        # Height fields are never patched, so envs built from the same source
        # model share one private, read-only copy of its grids.
        sources = models if len(models) > 1 else models[:1] * self.nbatch
        grids = {}
        for src in sources:
            if id(src) not in grids:
                grids[id(src)] = []
                for hf in src.hfields:
                    data = hf.data.copy()
                    data.flags.writeable = False
                    grids[id(src)].append(HeightField(data, tuple(hf.size), tuple(hf.center), float(hf.z0)))
        self._models = []
        for e in range(self.nbatch):
            rows = {
                n: (a[e : e + 1].reshape(()) if a.ndim == 1 else a[e])
                for n, a in stacked.items()
            }
            self._models.append(SimModel._from_arrays(rows, list(grids[id(sources[e])])))
        self._h = pack_hfields([m.hfields for m in self._models], dedupe=True)

        self.nq, self.nv, self.nu = ref.nq, ref.nv, ref.nu
        self.nbody, self.nsite = ref.nbody, ref.nsite
        self.nsensordata, self.nstate = ref.nsensordata, ref.nstate
        self.nhfield = ref.nhfield

        self._nworkers = max(self.nthread, 1)
        self._work = [Workspace.for_model(ref).k for _ in range(self._nworkers)]
        self._executor = (
            ThreadPoolExecutor(max_workers=self.nthread, thread_name_prefix="battenv")
            if self.nthread > 0
            else None
        )
        self._lock = threading.Lock()
        self._disposed = False

    # -- lifecycle -----------------------------------------------------------

    def close(self) -> None:
        """Release workers and models; later calls raise PoolDisposedError."""
        if self._disposed:
            return
        with self._lock:
            self._disposed = True
            if self._executor is not None:
                self._executor.shutdown(wait=True)
            self._models = []
            self._work = []

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    @property
    def closed(self) -> bool:
        return self._disposed

    @contextmanager
    def _call(self):
        if self._disposed:
            raise PoolDisposedError("pool is closed")
        if not self._lock.acquire(blocking=False):
            raise PoolBusyError("BatchEnvPool does not support concurrent callers")
        try:
            if self._disposed:
                raise PoolDisposedError("pool is closed")
            yield
        finally:
            self._lock.release()

    def _run(self, n: int, fn, *args) -> None:
        # fn(lo, hi, workspace, *args) per chunk; synchronous fan-out/fan-in
        ranges = chunks(n, self._nworkers)
        if self._executor is None or len(ranges) <= 1:
            for w, (lo, hi) in enumerate(ranges):
                fn(lo, hi, self._work[w], *args)
            return
        futures = [
            self._executor.submit(fn, lo, hi, self._work[w], *args)
            for w, (lo, hi) in enumerate(ranges)
        ]
        for f in futures:
            f.result()

    # -- validation ----------------------------------------------------------

    def _state(self, state, n: int | None = None) -> np.ndarray:
        n = self.nbatch if n is None else n
        s = np.array(state, dtype=np.float64, order="C", copy=True)
        if s.shape != (n, self.nstate):
            raise ShapeError(f"state has shape {s.shape}, expected ({n}, {self.nstate})")
        return s

    # -- primitives ----------------------------------------------------------

    def step(self, initial_state, nstep: int, control=None, *, control_spec=(CTRL,),
             return_sensor: bool = False, post_step_forward_sensor: bool = False):
        """Advance every environment ``nstep`` steps and return only final states.

        ``control`` has shape (N, nstep, ncontrol) laid out per
        ``control_spec``; without it every step uses zero ctrl and no applied
        force.  With ``return_sensor`` the final-step sensors are returned too:
        by default the values cached before the last integration, or freshly
        computed on the final state with ``post_step_forward_sensor``.
        """
        with self._call():
            nstep = int(nstep)
            if nstep < 1:
                raise ValueError(f"nstep must be >= 1, got {nstep}")
            state = self._state(initial_state)
            if control is None:
                ctrl = np.zeros((self.nbatch, nstep, 0))
                ctrl_adr = xfrc_adr = -1
            else:
                ncontrol, ctrl_adr, xfrc_adr = control_layout(self._models[0], control_spec)
                ctrl = np.ascontiguousarray(control, dtype=np.float64)
                if ctrl.shape != (self.nbatch, nstep, ncontrol):
                    raise ShapeError(
                        f"control has shape {ctrl.shape}, expected ({self.nbatch}, {nstep}, {ncontrol})"
                    )
            sensor = np.zeros((self.nbatch, self.nsensordata if return_sensor else 0))
            km = self._k
            self._run(
                self.nbatch,
                lambda lo, hi, w: K.step_chunk(
                    km, lo, hi, state, nstep, ctrl, ctrl_adr, xfrc_adr, w,
                    sensor, bool(return_sensor), bool(post_step_forward_sensor),
                ),
            )
            return (state, sensor) if return_sensor else state

    def forward(self, initial_state) -> np.ndarray:
        """Sensor data (N, nsensordata) for the given states without stepping."""
        with self._call():
            state = self._state(initial_state)
            sensor = np.empty((self.nbatch, self.nsensordata))
            km = self._k
            self._run(self.nbatch, lambda lo, hi, w: K.forward_chunk(km, lo, hi, state, w, sensor))
            return sensor

    def reset(self, env_ids, initial_state, randomization: dict | None = None):
        """Reset only ``env_ids``, optionally patching their models first.

        ``randomization`` maps registered field names to float64 arrays with
        leading dimension ``len(env_ids)``.  Patched fields that need derived
        constants trigger one refresh per reset env.  Returns the states and
        fresh sensor data of the reset environments.
        """
        with self._call():
            ids = np.array(env_ids, dtype=np.int64).reshape(-1)
            n = ids.shape[0]
            if n and (ids.min() < 0 or ids.max() >= self.nbatch):
                raise IndexError(f"env_ids must lie in [0, {self.nbatch})")
            if np.unique(ids).shape[0] != n:
                raise ValueError("env_ids contains duplicates")
            state = self._state(initial_state, n)
            patches = []
            refresh = False
            for name, values in (randomization or {}).items():
                info = field_info(name)
                shape = (n,) + info.resolve(self._models[0])
                v = np.asarray(values, dtype=np.float64)
                if v.shape != shape:
                    raise ShapeError(f"randomization[{name!r}] has shape {v.shape}, expected {shape}")
                patches.append((name, v))
                refresh = refresh or info.requires_set_const
            for name, v in patches:
                getattr(self._k, name)[ids] = v
            sensor = np.empty((n, self.nsensordata))
            km = self._k
            self._run(
                n,
                lambda lo, hi, w: K.reset_chunk(km, lo, hi, ids, state, refresh, w, sensor),
            )
            return state, sensor

    def compute_site_jacobians(self, state, site_ids, *, jacp: bool = True, jacr: bool = True):
        """Site Jacobians of shape (N, K, 3, nv); a scalar site id drops K.

        Returns ``(jacp, jacr)`` with ``None`` in place of an unrequested one.
        """
        with self._call():
            if not (jacp or jacr):
                raise ValueError("request at least one of jacp, jacr")
            scalar = np.ndim(site_ids) == 0
            sites = np.array(site_ids, dtype=np.int64).reshape(-1)
            if sites.size == 0:
                raise ValueError("site_ids is empty")
            if sites.min() < 0 or sites.max() >= self.nsite:
                raise IndexError(f"site ids must lie in [0, {self.nsite})")
            s = self._state(state)
            nk = sites.shape[0]
            full = (self.nbatch, nk, 3, self.nv)
            empty = (self.nbatch, nk, 0, 0)
            jp = np.empty(full if jacp else empty)
            jr = np.empty(full if jacr else empty)
            km = self._k
            self._run(
                self.nbatch,
                lambda lo, hi, w: K.jacobian_chunk(km, lo, hi, s, sites, w, jp, jr, bool(jacp), bool(jacr)),
            )
            out = [jp if jacp else None, jr if jacr else None]
            if scalar:
                out = [None if a is None else a[:, 0] for a in out]
            return tuple(out)

    def sample_hfield_height(self, state, hfield_id: int, offsets, frame_body: int, *,
                             mode: str = "yaw", return_clearance: bool = False) -> np.ndarray:
        """Terrain height (or frame clearance) at offsets around ``frame_body``; (N, P)."""
        with self._call():
            if not 0 <= hfield_id < self.nhfield:
                raise IndexError(f"hfield id {hfield_id} out of range [0, {self.nhfield})")
            if not 0 <= frame_body < self.nbody:
                raise IndexError(f"frame body {frame_body} out of range [0, {self.nbody})")
            code = parse_mode(mode)
            off = np.ascontiguousarray(offsets, dtype=np.float64)
            if off.ndim != 2 or off.shape[1] != 2:
                raise ShapeError(f"offsets must have shape (P, 2), got {off.shape}")
            if not np.all(np.isfinite(off)):
                raise ValueError("offsets must be finite")
            s = self._state(state)
            out = np.empty((self.nbatch, off.shape[0]))
            km, kh = self._k, self._h
            self._run(
                self.nbatch,
                lambda lo, hi, w: K.hfield_chunk(
                    km, kh, lo, hi, s, int(hfield_id), off, int(frame_body), code,
                    bool(return_clearance), w, out,
                ),
            )
            return out

    # -- model access --------------------------------------------------------

    def get_model(self, i: int) -> ModelView:
        if self._disposed:
            raise PoolDisposedError("pool is closed")
        if not 0 <= i < self.nbatch:
            raise IndexError(f"env index {i} out of range [0, {self.nbatch})")
        return ModelView(self, self._models[i])

    def get_all_models(self) -> list[ModelView]:
        if self._disposed:
            raise PoolDisposedError("pool is closed")
        return [ModelView(self, m) for m in self._models]


def env_ids_for_fraction(nbatch: int, fraction: float) -> np.ndarray:
    """Evenly spread env ids covering ``fraction`` of the pool."""
    k = max(1, int(round(fraction * nbatch)))
    return np.linspace(0, nbatch - 1, k).round().astype(np.int64) if k < nbatch else np.arange(nbatch)


__all__: Sequence[str] = [
    "BatchEnvPool",
    "ControlItem",
    "CTRL",
    "APPLIED_FORCE",
    "ModelView",
    "chunks",
    "control_layout",
    "check_models",
    "env_ids_for_fraction",
]
