from .core import (
    FLOOR_COLOR,
    N_ACTIONS,
    TASKS,
    Action,
    Color,
    Dir,
    DoorState,
    EnvError,
    EnvSpec,
    EpisodeOver,
    GenerationError,
    GridWorld,
    Obj,
    observe,
    render_ascii,
    state_id,
    step,
)
from .env import Env, StepResult
from .layouts import default_max_steps, generate
from .modifiers import apply_noise, hide_obstacles, normalize_obs
from .solver import solve

__all__ = [
    "FLOOR_COLOR",
    "N_ACTIONS",
    "TASKS",
    "Action",
    "Color",
    "Dir",
    "DoorState",
    "Env",
    "EnvError",
    "EnvSpec",
    "EpisodeOver",
    "GenerationError",
    "GridWorld",
    "Obj",
    "StepResult",
    "apply_noise",
    "default_max_steps",
    "generate",
    "hide_obstacles",
    "normalize_obs",
    "observe",
    "render_ascii",
    "solve",
    "state_id",
    "step",
]
