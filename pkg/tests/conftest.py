import numpy as np
import pytest
from scipy.spatial.transform import Rotation

import battenv as bv

_criteria = []


def pytest_runtest_logreport(report):
    props = dict(report.user_properties)
    if "criterion" not in props:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _criteria.append((props["criterion"], report.outcome, props.get("measured", "")))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome, measured in _criteria:
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"{status}  {name}  {measured}".rstrip())


@pytest.fixture
def pendulum():
    return bv.build_chain_model(bv.get_preset("pendulum"))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def state_of(m, qpos=None, qvel=None, time=0.0):
    qpos = np.zeros(m.nq) if qpos is None else np.asarray(qpos, float)
    qvel = np.zeros(m.nv) if qvel is None else np.asarray(qvel, float)
    return bv.StateVector(time, qpos, qvel)


def fk_oracle(m, qpos):
    """Forward kinematics written with scipy rotations, independent of the kernel."""
    fl = m.floating_base
    xpos = np.zeros((m.nbody, 3))
    xmat = np.zeros((m.nbody, 3, 3))
    axes, anchors = {}, {}
    for b in range(m.nbody):
        if fl and b == 0:
            xpos[0] = qpos[:3]
            xmat[0] = Rotation.from_euler("z", qpos[3]).as_matrix()
            for d in range(3):
                axes[d] = np.eye(3)[d]
            axes[3], anchors[3] = np.array([0.0, 0.0, 1.0]), xpos[0].copy()
            continue
        d = b + 3 if fl else b
        p = m.body_parent[b]
        ppos, pmat = (np.zeros(3), np.eye(3)) if p < 0 else (xpos[p], xmat[p])
        xpos[b] = ppos + pmat @ m.body_pos[b]
        xmat[b] = pmat @ Rotation.from_rotvec(m.body_axis[b] * qpos[d]).as_matrix()
        axes[d], anchors[d] = pmat @ m.body_axis[b], xpos[b].copy()
    xcom = xpos + np.einsum("bij,bj->bi", xmat, m.body_ipos)
    site = np.array([xpos[b] + xmat[b] @ m.site_pos[k] for k, b in enumerate(m.site_bodyid)]).reshape(-1, 3)
    return dict(xpos=xpos, xmat=xmat, xcom=xcom, site_xpos=site, axes=axes, anchors=anchors)


def ancestors(m, b):
    out = []
    while b >= 0:
        out.append(b)
        b = m.body_parent[b]
    return out


def body_dofs(m, b):
    if m.floating_base:
        return [0, 1, 2, 3] if b == 0 else [b + 3]
    return [b]


def set_const_oracle(m):
    """dof_M at qpos0 from the closed-form sum, plus subtree masses."""
    fk = fk_oracle(m, m.qpos0)
    sub = np.array([sum(m.body_mass[c] for c in range(m.nbody) if b in ancestors(m, c)) for b in range(m.nbody)])
    total = float(np.sum(m.body_mass))
    dof_m = np.array(m.dof_armature, dtype=float)
    for d in range(m.nv):
        if m.floating_base and d < 3:
            dof_m[d] += total
            continue
        owner = 0 if (m.floating_base and d == 3) else (d - 3 if m.floating_base else d)
        a, p = fk["axes"][d], fk["anchors"][d]
        for c in range(m.nbody):
            if owner in ancestors(m, c):
                r = fk["xcom"][c] - p
                R = fk["xmat"][c]
                dof_m[d] += m.body_mass[c] * np.sum(np.cross(a, r) ** 2) + a @ R @ np.diag(m.body_inertia[c]) @ R.T @ a
    return sub, total, dof_m
