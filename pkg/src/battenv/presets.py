"""Built-in chain models.

The robot presets only match the degree-of-freedom counts of the robots they
are named after (Franka 9, Allegro 16, Go1 18, CMU humanoid 56); link
geometry and mass distribution are made up.  Site 0 is always the
end-effector (or first foot) site used by the Jacobian benchmark.
"""

from __future__ import annotations

import numpy as np

from .hfield import stairs
from .model import BodySpec, ChainSpec, JointSpec, SiteSpec

X, Y, Z = (1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0)
NY = (0.0, -1.0, 0.0)

# PD gains and joint padding shared by the robot presets; armature keeps the
# diagonal inertia of light distal links away from zero.
_GAINS = dict(kp=20.0, kd=1.0)
_ARMATURE = 0.05
_DAMPING = 0.1


def _link(length, mass, axis_dir=Z):
    d = np.asarray(axis_dir, dtype=float) * length / 2
    r = 0.03
    i_long = 0.5 * mass * r * r
    i_perp = mass * (3 * r * r + length * length) / 12
    inertia = tuple(i_long if abs(a) > 0.5 else i_perp for a in axis_dir)
    return BodySpec(mass=mass, inertia_diag=inertia, ipos=tuple(d))


def _dof_arrays(nj, floating):
    base = [0.0, 0.0, 0.0, _ARMATURE] if floating else []
    arm = base + [_ARMATURE] * nj
    damp = ([0.0] * 4 if floating else []) + [_DAMPING] * nj
    return dict(armature=arm, damping=damp)


def pendulum() -> ChainSpec:
    """Point-mass pendulum: 1 kg at 1 m, hinge about +y, dt = 0.01."""
    return ChainSpec(
        joints=[JointSpec(axis=Y, offset=(0.0, 0.0, 0.0))],
        bodies=[BodySpec(mass=1.0, inertia_diag=(0.0, 0.0, 0.0), ipos=(1.0, 0.0, 0.0))],
        sites=[SiteSpec(body=0, pos=(1.0, 0.0, 0.0))],
        timestep=0.01,
        gravity=(0.0, 0.0, -9.81),
    )


def franka9() -> ChainSpec:
    axes = [Z, Y, Z, NY, Z, NY, Z]
    offsets = [(0, 0, 0.333), (0, 0, 0), (0, 0, 0.316), (0.0825, 0, 0),
               (-0.0825, 0, 0.384), (0, 0, 0), (0.088, 0, 0)]
    lens = [0.333, 0.1, 0.316, 0.1, 0.384, 0.1, 0.107]
    masses = [4.0, 3.0, 3.0, 2.5, 2.5, 1.5, 0.7]
    joints = [JointSpec(axis=a, offset=o) for a, o in zip(axes, offsets)]
    bodies = [_link(lv, mv) for lv, mv in zip(lens, masses)]
    # two fingers branch off the flange
    joints += [JointSpec(axis=Y, offset=(0, 0.02, 0.107), parent=6),
               JointSpec(axis=NY, offset=(0, -0.02, 0.107), parent=6)]
    bodies += [_link(0.05, 0.1), _link(0.05, 0.1)]
    sites = [SiteSpec(6, (0, 0, 0.107)), SiteSpec(7, (0, 0, 0.05)), SiteSpec(8, (0, 0, 0.05))]
    return ChainSpec(joints=joints, bodies=bodies, sites=sites, timestep=0.002,
                     **_dof_arrays(9, False), **_GAINS)


def allegro16() -> ChainSpec:
    joints, bodies, sites = [], [], []
    roots = [(0.0, 0.045, 0.095), (0.0, 0.0, 0.1), (0.0, -0.045, 0.095), (-0.027, 0.005, 0.04)]
    lens = [0.0164, 0.054, 0.0384, 0.0267]
    for f, root in enumerate(roots):
        first = len(joints)
        thumb = f == 3
        axes = [X, Z, Y, Y] if thumb else [Z, Y, Y, Y]
        for k in range(4):
            offset = root if k == 0 else (0.0, 0.0, lens[k - 1])
            joints.append(JointSpec(axis=axes[k], offset=offset, parent=-1 if k == 0 else first + k - 1))
            bodies.append(_link(lens[k], 0.05))
        sites.append(SiteSpec(first + 3, (0.0, 0.0, lens[3])))
    return ChainSpec(joints=joints, bodies=bodies, sites=sites, timestep=0.002,
                     **_dof_arrays(16, False), kp=2.0, kd=0.1)


def _legs(joints, bodies, sites, hips, segs):
    for hx, hy in hips:
        side = 1.0 if hy > 0 else -1.0
        first = len(joints)
        for k, (axis, offset, length, mass) in enumerate(segs(side)):
            joints.append(JointSpec(axis=axis, offset=(hx, hy, 0.0) if k == 0 else offset,
                                    parent=-1 if k == 0 else first + k - 1))
            bodies.append(_link(length, mass, axis_dir=(0.0, 0.0, -1.0)))
        sites.append(SiteSpec(len(bodies), (0.0, 0.0, -segs(side)[-1][2])))


def go1_18() -> ChainSpec:
    joints, bodies, sites = [], [], []

    def segs(side):
        return [(X, None, 0.05, 0.7), (Y, (0.0, side * 0.08, 0.0), 0.21, 1.0),
                (Y, (0.0, 0.0, -0.21), 0.21, 0.2)]

    _legs(joints, bodies, sites, [(0.19, 0.05), (0.19, -0.05), (-0.19, 0.05), (-0.19, -0.05)], segs)
    joints += [JointSpec(axis=Z, offset=(0.25, 0.0, 0.05), parent=-1), JointSpec(axis=Y, offset=(0.0, 0.0, 0.03))]
    bodies += [_link(0.03, 0.2), _link(0.05, 0.3)]
    sites.append(SiteSpec(len(bodies), (0.05, 0.0, 0.0)))
    return ChainSpec(
        floating_base=True,
        base_body=BodySpec(mass=5.0, inertia_diag=(0.02, 0.06, 0.07), ipos=(0.0, 0.0, 0.0)),
        joints=joints, bodies=bodies, sites=sites, timestep=0.002,
        qpos0=[0.0, 0.0, 0.3, 0.0] + [0.0] * 14,
        **_dof_arrays(14, True), **_GAINS,
    )


def humanoid56() -> ChainSpec:
    joints, bodies, sites = [], [], []

    def limb(offset0, direction, axes, seg_len, mass, parent=-1):
        first = len(joints)
        step = tuple(seg_len * d for d in direction)
        for k, axis in enumerate(axes):
            joints.append(JointSpec(axis=axis, offset=offset0 if k == 0 else step,
                                    parent=parent if k == 0 else first + k - 1))
            bodies.append(_link(seg_len, mass, axis_dir=direction))
        # body of joint j is j + 1 (floating base)
        sites.append(SiteSpec(first + len(axes), step))
        return first + len(axes) - 1

    cycle = [X, Y, Z]
    top = limb((0.0, 0.0, 0.1), Z, [cycle[k % 3] for k in range(3)], 0.12, 3.0)
    limb((0.0, 0.0, 0.12), Z, [cycle[k % 3] for k in range(3)], 0.06, 1.0, parent=top)
    for side in (1.0, -1.0):
        limb((0.0, side * 0.18, 0.1), (0.0, side, 0.0),
             [cycle[k % 3] for k in range(11)], 0.06, 0.4, parent=top)
    for side in (1.0, -1.0):
        limb((0.0, side * 0.09, -0.05), (0.0, 0.0, -1.0),
             [cycle[k % 3] for k in range(12)], 0.08, 0.8, parent=-1)
    return ChainSpec(
        floating_base=True,
        base_body=BodySpec(mass=8.0, inertia_diag=(0.1, 0.1, 0.05), ipos=(0.0, 0.0, 0.0)),
        joints=joints, bodies=bodies, sites=sites, timestep=0.002,
        qpos0=[0.0, 0.0, 1.0, 0.0] + [0.0] * 52,
        **_dof_arrays(52, True), **_GAINS,
    )


def terrain_walker() -> ChainSpec:
    joints, bodies, sites = [], [], []

    def segs(side):
        return [(Y, None, 0.2, 0.5), (Y, (0.0, 0.0, -0.2), 0.2, 0.3)]

    _legs(joints, bodies, sites, [(0.2, 0.1), (0.2, -0.1), (-0.2, 0.1), (-0.2, -0.1)], segs)
    return ChainSpec(
        floating_base=True,
        base_body=BodySpec(mass=4.0, inertia_diag=(0.02, 0.05, 0.06)),
        joints=joints, bodies=bodies, sites=sites, timestep=0.002,
        hfields=[stairs(64, 64, 8, size=(4.0, 4.0, 0.8, 0.1))],
        qpos0=[0.0, 0.0, 0.6, 0.0] + [0.0] * 8,
        **_dof_arrays(8, True), **_GAINS,
    )


PRESETS = {
    "pendulum": pendulum,
    "franka9": franka9,
    "allegro16": allegro16,
    "go1-18": go1_18,
    "humanoid56": humanoid56,
    "terrain-walker": terrain_walker,
}
ALIASES = {"chain18": "go1-18"}


def preset_names() -> list[str]:
    return list(PRESETS)


def get_preset(name: str) -> ChainSpec:
    key = ALIASES.get(name, name)
    try:
        return PRESETS[key]()
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}") from None


def random_chain(rng: np.random.Generator, njoint: int, *, floating: bool = False,
                 nsite: int = 2, tree: bool = False) -> ChainSpec:
    """Random chain (or tree) with unit axes, positive masses and armature."""
    joints, bodies = [], []
    for j in range(njoint):
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        parent = int(rng.integers(-1, j)) if (tree and j > 0) else None
        joints.append(JointSpec(axis=tuple(axis), offset=tuple(rng.uniform(-0.3, 0.3, 3)), parent=parent))
        bodies.append(BodySpec(mass=float(rng.uniform(0.2, 2.0)),
                               inertia_diag=tuple(rng.uniform(0.0, 0.02, 3)),
                               ipos=tuple(rng.uniform(-0.15, 0.15, 3))))
    nbody = njoint + int(floating)
    sites = [SiteSpec(int(rng.integers(0, nbody)), tuple(rng.uniform(-0.2, 0.2, 3))) for _ in range(nsite)]
    nv = njoint + 4 * int(floating)
    return ChainSpec(
        floating_base=floating,
        base_body=BodySpec(mass=float(rng.uniform(1.0, 3.0)), inertia_diag=tuple(rng.uniform(0.01, 0.05, 3)),
                           ipos=tuple(rng.uniform(-0.05, 0.05, 3))),
        joints=joints, bodies=bodies, sites=sites,
        timestep=0.002,
        armature=list(rng.uniform(0.05, 0.2, nv)),
        damping=list(rng.uniform(0.0, 0.2, nv)),
        kp=list(rng.uniform(0.0, 10.0, njoint)),
        kd=list(rng.uniform(0.0, 0.5, njoint)),
        qpos0=list(rng.uniform(-0.5, 0.5, nv)),
    )
