"""Jitted per-environment routines shared by the kernel, pool and rollout.

Every routine takes batch-shaped model arrays plus an environment index, so a
standalone model (viewed as a batch of one) and a pool row go through the
exact same compiled arithmetic.  Nothing here allocates in the hot loops.

Body/dof layout: with a floating base, body 0 is the base and owns dofs 0..3
(x, y, z, yaw); body b >= 1 owns dof b + 3.  With a fixed base the world is
implicit and body b owns dof b.  Actuator j drives the dof of body
j + floating.
"""

from collections import namedtuple

import numpy as np
from numba import njit

JIT = dict(nogil=True, cache=True)

KModel = namedtuple(
    "KModel",
    [
        "body_parent",
        "body_pos",
        "body_axis",
        "body_ipos",
        "body_mass",
        "body_inertia",
        "site_bodyid",
        "site_pos",
        "dof_armature",
        "dof_damping",
        "dof_friction",
        "kp",
        "kd",
        "gravity",
        "timestep",
        "qpos0",
        "subtree_mass",
        "total_mass",
        "dof_M",
    ],
)

KWork = namedtuple(
    "KWork",
    ["xpos", "xmat", "xcom", "dof_anchor", "dof_axis", "site_xpos", "sensordata", "qfrc", "qpos"],
)

KHField = namedtuple("KHField", ["adr", "nrow", "ncol", "size", "center", "z0", "data"])

MODE_WORLD = 0
MODE_YAW = 1
MODE_BODY = 2


@njit(**JIT)
def floating_base(M):
    return M.dof_M.shape[1] != M.body_mass.shape[1]


@njit(**JIT)
def kinematics(M, e, qpos, W):
    nbody = M.body_mass.shape[1]
    fl = floating_base(M)
    xpos, xmat = W.xpos, W.xmat
    for b in range(nbody):
        if fl and b == 0:
            c = np.cos(qpos[3])
            s = np.sin(qpos[3])
            for i in range(3):
                xpos[0, i] = qpos[i]
            xmat[0, 0, 0] = c
            xmat[0, 0, 1] = -s
            xmat[0, 0, 2] = 0.0
            xmat[0, 1, 0] = s
            xmat[0, 1, 1] = c
            xmat[0, 1, 2] = 0.0
            xmat[0, 2, 0] = 0.0
            xmat[0, 2, 1] = 0.0
            xmat[0, 2, 2] = 1.0
            for d in range(4):
                for i in range(3):
                    W.dof_anchor[d, i] = qpos[i]
                    W.dof_axis[d, i] = 0.0
            W.dof_axis[0, 0] = 1.0
            W.dof_axis[1, 1] = 1.0
            W.dof_axis[2, 2] = 1.0
            W.dof_axis[3, 2] = 1.0
        else:
            d = b + 3 if fl else b
            ax, ay, az = M.body_axis[e, b, 0], M.body_axis[e, b, 1], M.body_axis[e, b, 2]
            th = qpos[d]
            c = np.cos(th)
            s = np.sin(th)
            t = 1.0 - c
            # Rodrigues: c*I + s*[a]x + (1 - c)*a a^T
            r00 = c + t * ax * ax
            r01 = t * ax * ay - s * az
            r02 = t * ax * az + s * ay
            r10 = t * ay * ax + s * az
            r11 = c + t * ay * ay
            r12 = t * ay * az - s * ax
            r20 = t * az * ax - s * ay
            r21 = t * az * ay + s * ax
            r22 = c + t * az * az
            p = M.body_parent[e, b]
            if p < 0:
                for i in range(3):
                    xpos[b, i] = M.body_pos[e, b, i]
                    W.dof_axis[d, i] = M.body_axis[e, b, i]
                xmat[b, 0, 0] = r00
                xmat[b, 0, 1] = r01
                xmat[b, 0, 2] = r02
                xmat[b, 1, 0] = r10
                xmat[b, 1, 1] = r11
                xmat[b, 1, 2] = r12
                xmat[b, 2, 0] = r20
                xmat[b, 2, 1] = r21
                xmat[b, 2, 2] = r22
            else:
                ox, oy, oz = M.body_pos[e, b, 0], M.body_pos[e, b, 1], M.body_pos[e, b, 2]
                for i in range(3):
                    m0, m1, m2 = xmat[p, i, 0], xmat[p, i, 1], xmat[p, i, 2]
                    xpos[b, i] = xpos[p, i] + (m0 * ox + m1 * oy + m2 * oz)
                    W.dof_axis[d, i] = m0 * ax + m1 * ay + m2 * az
                    xmat[b, i, 0] = m0 * r00 + m1 * r10 + m2 * r20
                    xmat[b, i, 1] = m0 * r01 + m1 * r11 + m2 * r21
                    xmat[b, i, 2] = m0 * r02 + m1 * r12 + m2 * r22
            for i in range(3):
                W.dof_anchor[d, i] = xpos[b, i]
        ix, iy, iz = M.body_ipos[e, b, 0], M.body_ipos[e, b, 1], M.body_ipos[e, b, 2]
        for i in range(3):
            W.xcom[b, i] = xpos[b, i] + (xmat[b, i, 0] * ix + xmat[b, i, 1] * iy + xmat[b, i, 2] * iz)
    for k in range(M.site_pos.shape[1]):
        b = M.site_bodyid[e, k]
        sx, sy, sz = M.site_pos[e, k, 0], M.site_pos[e, k, 1], M.site_pos[e, k, 2]
        for i in range(3):
            W.site_xpos[k, i] = xpos[b, i] + (xmat[b, i, 0] * sx + xmat[b, i, 1] * sy + xmat[b, i, 2] * sz)


@njit(**JIT)
def forward(M, e, s, W):
    """Kinematics plus sensor evaluation on packed state ``s``; fills W.sensordata."""
    nv = M.dof_M.shape[1]
    qpos = s[1 : 1 + nv]
    kinematics(M, e, qpos, W)
    sd = W.sensordata
    for i in range(nv):
        sd[i] = s[1 + i]
        sd[nv + i] = s[1 + nv + i]
    base = 2 * nv
    for k in range(W.site_xpos.shape[0]):
        for i in range(3):
            sd[base + 3 * k + i] = W.site_xpos[k, i]


@njit(**JIT)
def _accumulate_point_force(M, e, W, fl, b, px, py, pz, fx, fy, fz, tx, ty, tz, out):
    # out[d] += jacp_d(point)^T f + jacr_d^T tau over every dof on the root->b path
    k = b
    while k >= 0:
        if fl and k == 0:
            out[0] += fx
            out[1] += fy
            out[2] += fz
            d0 = 3
        else:
            d0 = k + 3 if fl else k
        d = d0
        ax, ay, az = W.dof_axis[d, 0], W.dof_axis[d, 1], W.dof_axis[d, 2]
        rx = px - W.dof_anchor[d, 0]
        ry = py - W.dof_anchor[d, 1]
        rz = pz - W.dof_anchor[d, 2]
        cx = ay * rz - az * ry
        cy = az * rx - ax * rz
        cz = ax * ry - ay * rx
        out[d] += (cx * fx + cy * fy + cz * fz) + (ax * tx + ay * ty + az * tz)
        k = M.body_parent[e, k]


@njit(**JIT)
def step(M, e, s, ctrl_row, ctrl_adr, xfrc_adr, W):
    """One semi-implicit Euler step on packed state ``s`` (updated in place).

    ``ctrl_adr`` / ``xfrc_adr`` are offsets into ``ctrl_row`` or -1 when the
    item is absent.  Sensors cached in W are the pre-integration values.
    """
    nbody = M.body_mass.shape[1]
    nv = M.dof_M.shape[1]
    fl = floating_base(M)
    forward(M, e, s, W)
    qfrc = W.qfrc
    for d in range(nv):
        qfrc[d] = 0.0
    gx, gy, gz = M.gravity[e, 0], M.gravity[e, 1], M.gravity[e, 2]
    for b in range(nbody):
        m = M.body_mass[e, b]
        _accumulate_point_force(
            M, e, W, fl, b, W.xcom[b, 0], W.xcom[b, 1], W.xcom[b, 2],
            m * gx, m * gy, m * gz, 0.0, 0.0, 0.0, qfrc,
        )
    if xfrc_adr >= 0:
        for b in range(nbody):
            o = xfrc_adr + 6 * b
            _accumulate_point_force(
                M, e, W, fl, b, W.xpos[b, 0], W.xpos[b, 1], W.xpos[b, 2],
                ctrl_row[o], ctrl_row[o + 1], ctrl_row[o + 2],
                ctrl_row[o + 3], ctrl_row[o + 4], ctrl_row[o + 5], qfrc,
            )
    nu = M.kp.shape[1]
    off = 4 if fl else 0
    for j in range(nu):
        d = j + off
        u = ctrl_row[ctrl_adr + j] if ctrl_adr >= 0 else 0.0
        qfrc[d] += M.kp[e, j] * (u - s[1 + d]) - M.kd[e, j] * s[1 + nv + d]
    dt = M.timestep[e]
    for d in range(nv):
        v = s[1 + nv + d]
        sgn = 1.0 if v > 0.0 else (-1.0 if v < 0.0 else 0.0)
        f = qfrc[d] - M.dof_damping[e, d] * v - M.dof_friction[e, d] * sgn
        qfrc[d] = f
        v = v + dt * (f / M.dof_M[e, d])
        s[1 + nv + d] = v
        s[1 + d] = s[1 + d] + dt * v
    s[0] = s[0] + dt


@njit(**JIT)
def site_jacobian(M, e, site, W, jacp, jacr, want_p, want_r):
    """Fill jacp/jacr (3 x nv) for ``site``; kinematics must be current in W."""
    nv = M.dof_M.shape[1]
    fl = floating_base(M)
    for i in range(3):
        for d in range(nv):
            if want_p:
                jacp[i, d] = 0.0
            if want_r:
                jacr[i, d] = 0.0
    px, py, pz = W.site_xpos[site, 0], W.site_xpos[site, 1], W.site_xpos[site, 2]
    k = M.site_bodyid[e, site]
    while k >= 0:
        if fl and k == 0:
            if want_p:
                jacp[0, 0] = 1.0
                jacp[1, 1] = 1.0
                jacp[2, 2] = 1.0
            d = 3
        else:
            d = k + 3 if fl else k
        ax, ay, az = W.dof_axis[d, 0], W.dof_axis[d, 1], W.dof_axis[d, 2]
        if want_p:
            rx = px - W.dof_anchor[d, 0]
            ry = py - W.dof_anchor[d, 1]
            rz = pz - W.dof_anchor[d, 2]
            jacp[0, d] = ay * rz - az * ry
            jacp[1, d] = az * rx - ax * rz
            jacp[2, d] = ax * ry - ay * rx
        if want_r:
            jacr[0, d] = ax
            jacr[1, d] = ay
            jacr[2, d] = az
        k = M.body_parent[e, k]


@njit(**JIT)
def set_const(M, e, W):
    """Recompute subtree_mass, total_mass and diagonal dof_M at qpos0."""
    nbody = M.body_mass.shape[1]
    nv = M.dof_M.shape[1]
    fl = floating_base(M)
    for i in range(nv):
        W.qpos[i] = M.qpos0[e, i]
    kinematics(M, e, W.qpos, W)

    st = M.subtree_mass[e]
    for b in range(nbody):
        st[b] = M.body_mass[e, b]
    for b in range(nbody - 1, -1, -1):
        p = M.body_parent[e, b]
        if p >= 0:
            st[p] += st[b]
    total = 0.0
    for b in range(nbody):
        if M.body_parent[e, b] < 0:
            total += st[b]
    M.total_mass[e] = total

    dm = M.dof_M[e]
    for d in range(nv):
        dm[d] = M.dof_armature[e, d]
    if fl:
        for d in range(3):
            dm[d] += total
    for b in range(nbody):
        m = M.body_mass[e, b]
        cx, cy, cz = W.xcom[b, 0], W.xcom[b, 1], W.xcom[b, 2]
        k = b
        while k >= 0:
            d = (k + 3 if k > 0 else 3) if fl else k
            ax, ay, az = W.dof_axis[d, 0], W.dof_axis[d, 1], W.dof_axis[d, 2]
            rx = cx - W.dof_anchor[d, 0]
            ry = cy - W.dof_anchor[d, 1]
            rz = cz - W.dof_anchor[d, 2]
            vx = ay * rz - az * ry
            vy = az * rx - ax * rz
            vz = ax * ry - ay * rx
            rot = 0.0
            for i in range(3):
                # (R^T a)_i
                w = W.xmat[b, 0, i] * ax + W.xmat[b, 1, i] * ay + W.xmat[b, 2, i] * az
                rot += M.body_inertia[e, b, i] * w * w
            dm[d] += m * (vx * vx + vy * vy + vz * vz) + rot
            k = M.body_parent[e, k]


# -- height fields ----------------------------------------------------------


@njit(**JIT)
def hfield_height(H, e, h, wx, wy):
    adr = H.adr[e, h]
    nrow = H.nrow[e, h]
    ncol = H.ncol[e, h]
    sx, sy, sz = H.size[e, h, 0], H.size[e, h, 1], H.size[e, h, 2]
    u = (wx - H.center[e, h, 0] + sx) / (2.0 * sx) * (ncol - 1)
    v = (wy - H.center[e, h, 1] + sy) / (2.0 * sy) * (nrow - 1)
    u = min(max(u, 0.0), ncol - 1.0)
    v = min(max(v, 0.0), nrow - 1.0)
    i = min(int(np.floor(u)), ncol - 2)
    j = min(int(np.floor(v)), nrow - 2)
    fu = u - i
    fv = v - j
    row0 = adr + j * ncol + i
    row1 = row0 + ncol
    d = H.data
    z = ((1.0 - fu) * (1.0 - fv) * d[row0] + fu * (1.0 - fv) * d[row0 + 1]
         + (1.0 - fu) * fv * d[row1] + fu * fv * d[row1 + 1])
    return H.z0[e, h] + z * sz


@njit(**JIT)
def hfield_points(H, e, h, fpos, fmat, offsets, mode, clearance, out):
    fx, fy = fpos[0], fpos[1]
    if mode == MODE_YAW:
        c = fmat[0, 0]
        s = fmat[1, 0]
        if fmat[2, 0] != 0.0:
            n = np.hypot(c, s)
            if n > 0.0:
                c /= n
                s /= n
        if c == 0.0 and s == 0.0:
            c = 1.0
        m00, m01, m10, m11 = c, -s, s, c
    elif mode == MODE_BODY:
        m00, m01, m10, m11 = fmat[0, 0], fmat[0, 1], fmat[1, 0], fmat[1, 1]
    else:
        m00, m01, m10, m11 = 1.0, 0.0, 0.0, 1.0
    for k in range(offsets.shape[0]):
        ox, oy = offsets[k, 0], offsets[k, 1]
        if mode == MODE_WORLD:
            qx = fx + ox
            qy = fy + oy
        else:
            qx = fx + (m00 * ox + m01 * oy)
            qy = fy + (m10 * ox + m11 * oy)
        z = hfield_height(H, e, h, qx, qy)
        out[k] = fpos[2] - z if clearance else z


# -- chunk loops run by pool workers ----------------------------------------


@njit(**JIT)
def step_chunk(M, lo, hi, state, nstep, control, ctrl_adr, xfrc_adr, W, sensor, want_sensor, post_forward):
    # absent control arrives as an (N, nstep, 0) array
    for e in range(lo, hi):
        s = state[e]
        for t in range(nstep):
            step(M, e, s, control[e, t], ctrl_adr, xfrc_adr, W)
        if want_sensor:
            if post_forward:
                forward(M, e, s, W)
            sensor[e, :] = W.sensordata


@njit(**JIT)
def forward_chunk(M, lo, hi, state, W, sensor):
    for e in range(lo, hi):
        forward(M, e, state[e], W)
        sensor[e, :] = W.sensordata


@njit(**JIT)
def reset_chunk(M, lo, hi, env_ids, state, refresh, W, sensor):
    for k in range(lo, hi):
        e = env_ids[k]
        if refresh:
            set_const(M, e, W)
        forward(M, e, state[k], W)
        sensor[k, :] = W.sensordata


@njit(**JIT)
def jacobian_chunk(M, lo, hi, state, site_ids, W, jacp, jacr, want_p, want_r):
    nv = M.dof_M.shape[1]
    for e in range(lo, hi):
        kinematics(M, e, state[e, 1 : 1 + nv], W)
        for k in range(site_ids.shape[0]):
            site_jacobian(M, e, site_ids[k], W, jacp[e, k], jacr[e, k], want_p, want_r)


@njit(**JIT)
def hfield_chunk(M, H, lo, hi, state, h, offsets, body, mode, clearance, W, out):
    nv = M.dof_M.shape[1]
    for e in range(lo, hi):
        kinematics(M, e, state[e, 1 : 1 + nv], W)
        hfield_points(H, e, h, W.xpos[body], W.xmat[body], offsets, mode, clearance, out[e])
