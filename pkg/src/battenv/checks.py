"""Numerical parity and oracle checks run by ``battenv parity``."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from . import kernel
from .hfield import HeightField, sample_height, sample_points
from .model import SimModel, StateVector, build_chain_model
from .pool import APPLIED_FORCE, CTRL, BatchEnvPool
from .presets import get_preset, random_chain
from .rollout import rollout


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


def random_states(m: SimModel, n: int, rng: np.random.Generator, scale: float = 0.3) -> np.ndarray:
    s = np.zeros((n, m.nstate))
    s[:, 0] = rng.uniform(0.0, 1.0, n)
    s[:, 1 : 1 + m.nq] = m.qpos0 + rng.normal(0.0, scale, (n, m.nq))
    s[:, 1 + m.nq :] = rng.normal(0.0, scale, (n, m.nv))
    return s


def random_control(m: SimModel, n: int, nstep: int, rng: np.random.Generator) -> tuple[np.ndarray, tuple]:
    spec = (CTRL, APPLIED_FORCE)
    return rng.normal(0.0, 0.5, (n, nstep, m.nu + 6 * m.nbody)), spec


def serial_forward(models: list[SimModel], state: np.ndarray) -> np.ndarray:
    ws = kernel.Workspace.for_model(models[0])
    out = np.empty((state.shape[0], models[0].nsensordata))
    for e in range(state.shape[0]):
        m = models[e] if len(models) > 1 else models[0]
        nq = m.nq
        st = StateVector(state[e, 0], state[e, 1 : 1 + nq], state[e, 1 + nq :])
        out[e] = kernel.forward(m, st, ws)
    return out


def fd_jacobian(m: SimModel, qpos: np.ndarray, site: int, h: float = 1e-6) -> np.ndarray:
    """Central differences of site position with respect to qpos."""
    ws = kernel.Workspace.for_model(m)
    jac = np.empty((3, m.nv))
    for i in range(m.nv):
        qp, qm = qpos.copy(), qpos.copy()
        qp[i] += h
        qm[i] -= h
        kernel.kinematics(m, qp, ws)
        xp = ws.site_xpos[site].copy()
        kernel.kinematics(m, qm, ws)
        jac[:, i] = (xp - ws.site_xpos[site]) / (2 * h)
    return jac


def bilinear_oracle(hf: HeightField, wx: float, wy: float) -> float:
    """Direct four-corner weighted sum, written independently of the kernel."""
    sx, sy, sz = hf.size[:3]
    cx, cy = hf.center
    gx = (wx - (cx - sx)) / (2 * sx) * (hf.ncol - 1)
    gy = (wy - (cy - sy)) / (2 * sy) * (hf.nrow - 1)
    gx = min(max(gx, 0.0), hf.ncol - 1)
    gy = min(max(gy, 0.0), hf.nrow - 1)
    c0 = min(int(gx), hf.ncol - 2)
    r0 = min(int(gy), hf.nrow - 2)
    tx, ty = gx - c0, gy - r0
    total = 0.0
    for dr, wr in ((0, 1 - ty), (1, ty)):
        for dc, wc in ((0, 1 - tx), (1, tx)):
            total += wr * wc * hf.data[r0 + dr, c0 + dc]
    return hf.z0 + sz * total


def _digest(*arrays) -> str:
    h = hashlib.sha256()
    for a in arrays:
        h.update(np.ascontiguousarray(a).tobytes())
    return h.hexdigest()[:16]


def check_step_parity(presets, nbatches, nsteps, seeds, nthread) -> tuple[CheckResult, str]:
    worst, count, digests = None, 0, []
    for name in presets:
        m = build_chain_model(get_preset(name))
        for seed in seeds:
            rng = np.random.default_rng(seed)
            for n in nbatches:
                with BatchEnvPool(m, nbatch=n, nthread=nthread) as pool:
                    for nstep in nsteps:
                        s0 = random_states(m, n, rng)
                        ctrl, spec = random_control(m, n, nstep, rng)
                        fs, sd = pool.step(s0, nstep, ctrl, control_spec=spec, return_sensor=True)
                        tr = rollout(m, s0, nstep, ctrl, spec)
                        count += 1
                        digests.append(_digest(fs, sd))
                        if not (np.array_equal(fs, tr.states[:, -1]) and np.array_equal(sd, tr.sensordata[:, -1])):
                            worst = f"{name} seed={seed} N={n} nstep={nstep}"
    ok = worst is None
    return CheckResult("step vs rollout (bitwise)", ok, f"{count} cases" if ok else f"mismatch at {worst}"), _digest(
        np.frombuffer("".join(digests).encode(), dtype=np.uint8)
    )


def check_forward_parity(presets, nbatches, seeds, nthread) -> tuple[CheckResult, str]:
    bad, count, digests = None, 0, []
    for name in presets:
        m = build_chain_model(get_preset(name))
        for seed in seeds:
            rng = np.random.default_rng(seed)
            for n in nbatches:
                s0 = random_states(m, n, rng)
                with BatchEnvPool(m, nbatch=n, nthread=nthread) as pool:
                    got = pool.forward(s0)
                count += 1
                digests.append(_digest(got))
                if not np.array_equal(got, serial_forward([m], s0)):
                    bad = f"{name} seed={seed} N={n}"
    return CheckResult("forward vs serial loop (bitwise)", bad is None,
                       f"{count} cases" if bad is None else f"mismatch at {bad}"), "".join(digests)


def pool_outputs(m: SimModel, n: int, nthread: int, seed: int) -> dict[str, np.ndarray]:
    """Outputs of all five primitives for one deterministic input set."""
    rng = np.random.default_rng(seed)
    s0 = random_states(m, n, rng)
    ctrl, spec = random_control(m, n, 5, rng)
    ids = np.sort(rng.choice(n, size=max(1, n // 3), replace=False))
    rand = {
        "body_mass": m.body_mass * rng.uniform(0.8, 1.2, (ids.size, m.nbody)),
        "kp": np.broadcast_to(m.kp, (ids.size, m.nu)) * 1.1,
        "gravity": np.tile([0.0, 0.0, -9.0], (ids.size, 1)),
    }
    offsets = np.stack(np.meshgrid(np.linspace(-0.3, 0.3, 4), np.linspace(-0.3, 0.3, 4)), -1).reshape(-1, 2)
    out = {}
    with BatchEnvPool(m, nbatch=n, nthread=nthread) as pool:
        out["step"], out["step_sensor"] = pool.step(s0, 5, ctrl, control_spec=spec, return_sensor=True)
        out["forward"] = pool.forward(s0)
        out["reset_state"], out["reset_sensor"] = pool.reset(ids, s0[ids], rand)
        out["after_reset_dof_M"] = np.stack([v.dof_M for v in pool.get_all_models()])
        out["jacp"], out["jacr"] = pool.compute_site_jacobians(s0, list(range(m.nsite)))
        if m.nhfield:
            out["hfield"] = pool.sample_hfield_height(s0, 0, offsets, 0, mode="body", return_clearance=True)
    return out


def check_thread_invariance(presets, nbatch=257, threads=(0, 1, 4, 8), seed=0) -> CheckResult:
    for name in presets:
        m = build_chain_model(get_preset(name))
        ref = pool_outputs(m, nbatch, threads[0], seed)
        for t in threads[1:]:
            got = pool_outputs(m, nbatch, t, seed)
            for key in ref:
                if not np.array_equal(ref[key], got[key]):
                    return CheckResult("thread-count invariance", False, f"{name}: {key} differs at nthread={t}")
    return CheckResult("thread-count invariance", True, f"nthread in {list(threads)}, N={nbatch}")


def check_jacobians(presets, nstates=100, seed=0, tol=1e-6) -> CheckResult:
    rng = np.random.default_rng(seed)
    models = [build_chain_model(get_preset(p)) for p in presets]
    models += [build_chain_model(random_chain(rng, k, floating=bool(k % 2), tree=k > 3)) for k in range(1, 9)]
    worst = 0.0
    axis_err = 0.0
    for m in models:
        ws = kernel.Workspace.for_model(m)
        for _ in range(nstates):
            q = m.qpos0 + rng.uniform(-np.pi, np.pi, m.nq)
            st = StateVector(0.0, q, np.zeros(m.nv))
            for site in range(m.nsite):
                jacp, jacr = kernel.site_jacobian(m, st, site, ws)
                worst = max(worst, float(np.abs(jacp - fd_jacobian(m, q, site)).max()))
                nz = np.abs(jacr).sum(0) > 0
                cols = np.flatnonzero(nz)
                axis_err = max(axis_err, float(np.abs(jacr[:, cols] - ws.dof_axis[cols].T).max(initial=0.0)))
    ok = worst <= tol and axis_err <= 1e-12
    return CheckResult("site Jacobian vs finite differences", ok,
                       f"max |jacp - fd| = {worst:.2e}, max jacr axis error = {axis_err:.1e}")


def check_hfield(seed=0, npoints=1000) -> CheckResult:
    rng = np.random.default_rng(seed)
    hf = HeightField(rng.uniform(0, 1, (8, 8)), size=(1.5, 2.0, 0.7, 0.1), center=(0.3, -0.4), z0=0.2)
    sx, sy = hf.size[:2]
    pts = rng.uniform([-sx, -sy], [sx, sy], (npoints, 2)) + hf.center
    err = max(abs(sample_height(hf, x, y) - bilinear_oracle(hf, x, y)) for x, y in pts)
    node_err = 0.0
    for r in range(hf.nrow):
        for c in range(hf.ncol):
            x = hf.center[0] - sx + 2 * sx * c / (hf.ncol - 1)
            y = hf.center[1] - sy + 2 * sy * r / (hf.nrow - 1)
            node_err = max(node_err, abs(sample_height(hf, x, y) - (hf.z0 + hf.data[r, c] * hf.size[2])))
    offsets = rng.uniform(-1, 1, (16, 2))
    fpos = np.array([0.1, 0.2, 1.0])
    modes = [sample_points(hf, fpos, np.eye(3), offsets, mode) for mode in ("world", "yaw", "body")]
    same = all(np.array_equal(modes[0], z) for z in modes[1:])
    ok = err <= 1e-12 and node_err <= 1e-15 and same
    return CheckResult("hfield vs four-corner oracle", ok,
                       f"max err {err:.1e}, node err {node_err:.1e}, modes coincide={same}")


def run_parity(presets=("pendulum", "go1-18"), nbatches=(1, 7, 64), nsteps=(1, 3, 100),
               seeds=(0, 1), nthread=0) -> tuple[list[CheckResult], str]:
    results = []
    step_res, step_hash = check_step_parity(presets, nbatches, nsteps, seeds, nthread)
    results.append(step_res)
    fwd_res, fwd_hash = check_forward_parity(presets, nbatches, seeds, nthread)
    results.append(fwd_res)
    results.append(check_thread_invariance(list(presets) + ["terrain-walker"]))
    results.append(check_jacobians(presets))
    results.append(check_hfield())
    return results, _digest(np.frombuffer((step_hash + fwd_hash).encode(), dtype=np.uint8))
