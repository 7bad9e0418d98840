"""Batched, stateful environment pool over an articulated-chain physics kernel."""

from .errors import (
    BattenvError,
    IncompatibleModelError,
    ModelSpecError,
    PoolBusyError,
    PoolDisposedError,
    ShapeError,
    UnknownFieldError,
)
from .hfield import HeightField, sample_height, sample_points, stairs
from .kernel import Workspace
from .model import (
    FIELD_REGISTRY,
    BodySpec,
    ChainSpec,
    JointSpec,
    SimModel,
    SiteSpec,
    StateVector,
    build_chain_model,
    copy_model,
    pack_state,
    patch_field,
    set_const,
    unpack_state,
)
from .pool import APPLIED_FORCE, CTRL, BatchEnvPool, ControlItem, ModelView
from .presets import get_preset, preset_names, random_chain
from .rollout import Trajectory, rollout

__version__ = "0.1.0"
