# Grid-world state machine with MiniGrid-compatible cell encoding and
# egocentric partial observations.
from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np


class Obj(IntEnum):
    UNSEEN = 0
    EMPTY = 1
    WALL = 2
    FLOOR = 3
    DOOR = 4
    KEY = 5
    BALL = 6
    BOX = 7
    GOAL = 8
    AGENT = 10  # index 9 (lava) unused, kept for encoding compatibility


class Color(IntEnum):
    RED = 0
    GREEN = 1
    BLUE = 2
    PURPLE = 3
    YELLOW = 4
    GREY = 5


class DoorState(IntEnum):
    OPEN = 0
    CLOSED = 1
    LOCKED = 2


class Dir(IntEnum):
    EAST = 0
    SOUTH = 1
    WEST = 2
    NORTH = 3


class Action(IntEnum):
    TURN_LEFT = 0
    TURN_RIGHT = 1
    FORWARD = 2
    PICKUP = 3
    DROP = 4
    TOGGLE = 5
    DONE = 6


N_ACTIONS = 7
FLOOR_COLOR = Color.BLUE  # used when obstacles are hidden

DIR_VEC = {
    Dir.EAST: (1, 0),
    Dir.SOUTH: (0, 1),
    Dir.WEST: (-1, 0),
    Dir.NORTH: (0, -1),
}

TASKS = (
    "FourRooms",
    "MultiRoomN2S4",
    "MultiRoomN4S5",
    "MultiRoomN6",
    "MultiRoomN30",
    "DoorKey8",
    "DoorKey16",
)


class EnvError(Exception):
    pass


class GenerationError(EnvError):
    """Layout retry budget exhausted."""


class EpisodeOver(EnvError):
    """step() called on a terminal world."""


@dataclass
class EnvSpec:
    task: str
    view_size: int = 7
    noise_mu: float = 0.0
    noise_sigma: float = 0.0
    invisible_obstacles: bool = False
    max_steps: int | None = None  # None -> task default
    time_penalty_coef: float = 0.9

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}")
        if self.view_size not in (3, 7):
            raise ValueError("view_size must be 3 or 7")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if self.max_steps is not None and self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if not 0.0 <= self.time_penalty_coef <= 1.0:
            raise ValueError("time_penalty_coef must be in [0, 1]")


@dataclass
class GridWorld:
    """Mutable full state: object/color/state planes plus the agent."""

    width: int
    height: int
    obj: np.ndarray  # (w, h) uint8
    color: np.ndarray  # (w, h) uint8
    state: np.ndarray  # (w, h) uint8
    agent_pos: tuple[int, int]
    agent_dir: Dir
    max_steps: int
    carried: tuple[int, int] | None = None  # (object, color)
    step_count: int = 0
    done: bool = False

    @classmethod
    def empty(cls, width, height, max_steps):
        obj = np.full((width, height), Obj.EMPTY, dtype=np.uint8)
        obj[0, :] = obj[-1, :] = Obj.WALL
        obj[:, 0] = obj[:, -1] = Obj.WALL
        color = np.full((width, height), Color.GREY, dtype=np.uint8)
        state = np.zeros((width, height), dtype=np.uint8)
        return cls(width, height, obj, color, state, (1, 1), Dir.EAST, max_steps)

    def set_cell(self, x, y, obj, color=Color.GREY, state=0):
        self.obj[x, y] = obj
        self.color[x, y] = color
        self.state[x, y] = state

    def clear_cell(self, x, y):
        self.set_cell(x, y, Obj.EMPTY, Color.GREY, 0)

    def is_walkable(self, x, y):
        if not (0 <= x < self.width and 0 <= y < self.height):
            return False
        o = self.obj[x, y]
        if o in (Obj.EMPTY, Obj.FLOOR, Obj.GOAL):
            return True
        return o == Obj.DOOR and self.state[x, y] == DoorState.OPEN

    def copy(self) -> "GridWorld":
        return GridWorld(
            self.width, self.height, self.obj.copy(), self.color.copy(),
            self.state.copy(), self.agent_pos, self.agent_dir, self.max_steps,
            self.carried, self.step_count, self.done,
        )


def step(world: GridWorld, action: Action, time_penalty_coef: float = 0.9):
    """Advance the world one action. Returns (reward, done)."""
    if world.done:
        raise EpisodeOver("step() after terminal")
    world.step_count += 1
    x, y = world.agent_pos
    dx, dy = DIR_VEC[world.agent_dir]
    fx, fy = x + dx, y + dy
    reward = 0.0

    if action == Action.TURN_LEFT:
        world.agent_dir = Dir((world.agent_dir - 1) % 4)
    elif action == Action.TURN_RIGHT:
        world.agent_dir = Dir((world.agent_dir + 1) % 4)
    elif action == Action.FORWARD:
        if world.is_walkable(fx, fy):
            world.agent_pos = (fx, fy)
            if world.obj[fx, fy] == Obj.GOAL:
                world.done = True
                reward = 1.0 - time_penalty_coef * (
                    world.step_count / world.max_steps
                )
    elif action == Action.PICKUP:
        if (
            world.carried is None
            and world.obj[fx, fy] in (Obj.KEY, Obj.BALL, Obj.BOX)
        ):
            world.carried = (int(world.obj[fx, fy]), int(world.color[fx, fy]))
            world.clear_cell(fx, fy)
    elif action == Action.DROP:
        if world.carried is not None and world.obj[fx, fy] == Obj.EMPTY:
            world.set_cell(fx, fy, world.carried[0], world.carried[1])
            world.carried = None
    elif action == Action.TOGGLE:
        if world.obj[fx, fy] == Obj.DOOR:
            st = world.state[fx, fy]
            if st == DoorState.OPEN:
                world.state[fx, fy] = DoorState.CLOSED
            elif st == DoorState.CLOSED:
                world.state[fx, fy] = DoorState.OPEN
            elif st == DoorState.LOCKED:
                if world.carried == (int(Obj.KEY), int(world.color[fx, fy])):
                    world.state[fx, fy] = DoorState.OPEN
    elif action == Action.DONE:
        pass
    else:
        raise ValueError(f"invalid action {action}")

    if not world.done and world.step_count >= world.max_steps:
        world.done = True
    return reward, world.done


# ---------------------------------------------------------------------------
# Egocentric observation

VIEW = 7
_ANCHOR = (3, 6)  # agent cell in the 7x7 agent frame (center bottom)


def _view_offsets():
    """Per-direction (7,7,2) world-coordinate offsets for the agent frame."""
    out = {}
    vx, vy = np.meshgrid(np.arange(VIEW), np.arange(VIEW), indexing="ij")
    lateral = vx - _ANCHOR[0]
    forward = _ANCHOR[1] - vy
    for d, (dx, dy) in DIR_VEC.items():
        rx, ry = -dy, dx  # right-hand vector
        out[d] = np.stack(
            [forward * dx + lateral * rx, forward * dy + lateral * ry], axis=-1
        )
    return out

_OFFSETS = _view_offsets()


def _see_behind(obj, state):
    if obj == Obj.WALL or obj == Obj.UNSEEN:
        return False
    if obj == Obj.DOOR and state != DoorState.OPEN:
        return False
    return True


def _visibility(obj, state):
    """MiniGrid-style light flood from the agent anchor, row by row."""
    mask = np.zeros((VIEW, VIEW), dtype=bool)
    mask[_ANCHOR] = True
    for j in range(VIEW - 1, -1, -1):
        for i in range(0, VIEW - 1):
            if not mask[i, j] or not _see_behind(obj[i, j], state[i, j]):
                continue
            mask[i + 1, j] = True
            if j > 0:
                mask[i + 1, j - 1] = True
                mask[i, j - 1] = True
        for i in range(VIEW - 1, 0, -1):
            if not mask[i, j] or not _see_behind(obj[i, j], state[i, j]):
                continue
            mask[i - 1, j] = True
            if j > 0:
                mask[i - 1, j - 1] = True
                mask[i, j - 1] = True
    return mask


def observe(world: GridWorld, spec: EnvSpec) -> np.ndarray:
    """Egocentric (view, view, 3) uint8 observation.

    Always rendered at 7x7 with the agent center-bottom; the reduced view
    is a 3x3 crop around the agent so its cells match the 7x7 rendering.
    """
    ax, ay = world.agent_pos
    coords = _OFFSETS[world.agent_dir] + (ax, ay)
    cx = coords[..., 0]
    cy = coords[..., 1]
    inside = (cx >= 0) & (cx < world.width) & (cy >= 0) & (cy < world.height)
    cxc = np.clip(cx, 0, world.width - 1)
    cyc = np.clip(cy, 0, world.height - 1)

    obj = np.where(inside, world.obj[cxc, cyc], Obj.UNSEEN)
    color = np.where(inside, world.color[cxc, cyc], 0)
    state = np.where(inside, world.state[cxc, cyc], 0)

    mask = _visibility(obj, state)
    obj = np.where(mask, obj, Obj.UNSEEN)
    color = np.where(mask, color, 0)
    state = np.where(mask, state, 0)

    # anchor cell shows the carried object, or empty floor
    if world.carried is not None:
        obj[_ANCHOR], color[_ANCHOR] = world.carried
        state[_ANCHOR] = 0
    else:
        obj[_ANCHOR], color[_ANCHOR], state[_ANCHOR] = Obj.EMPTY, 0, 0

    out = np.stack([obj, color, state], axis=-1).astype(np.uint8)
    if spec.view_size == 3:
        x0, y0 = _ANCHOR[0] - 1, _ANCHOR[1] - 2
        out = out[x0 : x0 + 3, y0 : y0 + 3]
    return out


def state_id(world: GridWorld) -> bytes:
    """Fingerprint of the full state, step-count independent.

    Covers agent pose, carried item, every door's state, and the position
    of every movable object; built by direct field packing, so equal ids
    imply equal states.
    """
    parts = [
        bytes(
            (
                world.agent_pos[0],
                world.agent_pos[1],
                int(world.agent_dir),
                0 if world.carried is None else world.carried[0],
                0 if world.carried is None else world.carried[1] + 1,
            )
        )
    ]
    doors = np.argwhere(world.obj == Obj.DOOR)
    for x, y in doors:
        parts.append(bytes((int(x), int(y), int(world.state[x, y]))))
    movable = np.argwhere(
        (world.obj == Obj.KEY) | (world.obj == Obj.BALL) | (world.obj == Obj.BOX)
    )
    for x, y in movable:
        parts.append(
            bytes((int(x), int(y), int(world.obj[x, y]), int(world.color[x, y])))
        )
    return b"".join(parts)


_GLYPHS = {
    int(Obj.EMPTY): ".",
    int(Obj.WALL): "#",
    int(Obj.FLOOR): "_",
    int(Obj.KEY): "k",
    int(Obj.BALL): "o",
    int(Obj.BOX): "b",
    int(Obj.GOAL): "G",
    int(Obj.UNSEEN): "?",
}
_AGENT_GLYPHS = {Dir.EAST: ">", Dir.SOUTH: "v", Dir.WEST: "<", Dir.NORTH: "^"}


def render_ascii(world: GridWorld) -> str:
    rows = []
    for y in range(world.height):
        row = []
        for x in range(world.width):
            if (x, y) == world.agent_pos:
                row.append(_AGENT_GLYPHS[world.agent_dir])
            elif world.obj[x, y] == Obj.DOOR:
                st = world.state[x, y]
                row.append({0: "/", 1: "+", 2: "L"}[int(st)])
            else:
                row.append(_GLYPHS.get(int(world.obj[x, y]), "?"))
        rows.append("".join(row))
    return "\n".join(rows)
