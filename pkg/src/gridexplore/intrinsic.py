"""Episodic novelty bonus from a discriminative transition model.

The bonus for reaching o_{t+1} is the minimum over the episode's memory of

    dist^2(e_obs_i, e_obs_{t+1}) / (dist(e_traj_i, e_traj_t) + eps)

where e_obs is a CNN observation embedding and e_traj a GRU trajectory
embedding. The denominator discounts observation novelty that is not
matched by trajectory novelty, which is what makes the bonus robust to
observation noise. The discriminator that trains the embeddings tells
genuine transitions (o_t, a_t, o_{t+1}) from fakes whose third element is
drawn from a queue of recent novel observations.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .nn import GruCell, Mlp, Module, Tensor, CnnEncoder, concat

EPSILON = 1e-6


class EpisodicMemory:
    """Per-worker store of (e_obs, e_traj) pairs, cleared at episode end."""

    def __init__(self, dim_obs: int, dim_traj: int, capacity: int):
        self._obs = np.empty((capacity, dim_obs), dtype=np.float32)
        self._traj = np.empty((capacity, dim_traj), dtype=np.float32)
        self.count = 0

    def __len__(self):
        return self.count

    @property
    def obs(self):
        return self._obs[: self.count]

    @property
    def traj(self):
        return self._traj[: self.count]

    def append(self, e_obs, e_traj):
        if self.count >= self._obs.shape[0]:
            raise ValueError("episodic memory capacity exceeded")
        self._obs[self.count] = e_obs
        self._traj[self.count] = e_traj
        self.count += 1

    def clear(self):
        self.count = 0


def intrinsic_reward(
    e_obs_next,
    e_traj_t,
    memory: EpisodicMemory,
    terminal: bool,
    epsilon: float = EPSILON,
) -> float:
    """Novelty bonus for the transition ending in e_obs_next.

    Empty memory gives 0, so the first step of every episode earns
    nothing. Afterwards the query pair is appended to the memory, or the
    memory is cleared when the transition was terminal.
    """
    if memory.count == 0:
        r = 0.0
    else:
        d_obs = ((memory.obs - e_obs_next) ** 2).sum(axis=1)
        d_traj = np.sqrt(((memory.traj - e_traj_t) ** 2).sum(axis=1))
        r = float((d_obs / (d_traj + epsilon)).min())
    if terminal:
        memory.clear()
    else:
        memory.append(e_obs_next, e_traj_t)
    return r


def novelty_reward(e_obs_next, memory: EpisodicMemory, terminal: bool) -> float:
    """Numerator-only ablation: min squared distance over the memory."""
    if memory.count == 0:
        r = 0.0
    else:
        r = float(((memory.obs - e_obs_next) ** 2).sum(axis=1).min())
    if terminal:
        memory.clear()
    else:
        memory.append(e_obs_next, np.zeros_like(memory._traj[0]))
    return r


# ---------------------------------------------------------------------------
# Negative-example observation queue


class ObservationQueue:
    """Bounded FIFO of recent novel observations (the negative pool).

    Each entry is an (integer_obs, network_obs) pair: equality against a
    candidate positive is tested on the integer observation, while the
    network observation (normalized, possibly noisy) is what the
    discriminator consumes.
    """

    def __init__(self, max_size: int = 100_000, smoothing: float = 0.9):
        self.max_size = max_size
        self.smoothing = smoothing
        self.running_avg = 0.0
        self._items = [None] * max_size
        self._start = 0
        self.count = 0

    def __len__(self):
        return self.count

    def __getitem__(self, i):
        if not 0 <= i < self.count:
            raise IndexError(i)
        return self._items[(self._start + i) % self.max_size]

    def _push(self, item):
        if self.count < self.max_size:
            self._items[(self._start + self.count) % self.max_size] = item
            self.count += 1
        else:  # evict oldest
            self._items[self._start] = item
            self._start = (self._start + 1) % self.max_size


def update_queue(q: ObservationQueue, obs, net_obs, r_i: float) -> None:
    """Fold r_i into the queue's running average, then insert the
    observation iff the queue is empty or r_i is at least that average."""
    s = q.smoothing
    q.running_avg = s * q.running_avg + (1.0 - s) * r_i
    if q.count == 0 or r_i >= q.running_avg:
        q._push((obs, net_obs))


def sample_negative(q: ObservationQueue, true_next, rng):
    """Up to two uniform draws; first whose integer obs differs from
    true_next wins. None when the queue is empty or both draws collide."""
    for _ in range(2):
        if q.count == 0:
            return None
        item = q[int(rng.integers(q.count))]
        if not np.array_equal(item[0], true_next):
            return item
    return None


# ---------------------------------------------------------------------------
# Reward normalization


@dataclass
class IRNormState:
    mean: float = 0.0
    std: float = 1.0
    momentum: float = 0.9


def normalize_ir(raw: np.ndarray, state: IRNormState) -> np.ndarray:
    """(r - mu)/sigma with EMA statistics; updates the state afterwards
    from this batch's raw rewards."""
    out = (raw - state.mean) / max(state.std, 1e-8)
    m = state.momentum
    state.mean = m * state.mean + (1.0 - m) * float(raw.mean())
    state.std = m * state.std + (1.0 - m) * float(raw.std())
    return out


# ---------------------------------------------------------------------------
# Discriminative transition model


class DiscModel(Module):
    """Shared CNN encoder, GRU trajectory embedding, and an MLP that
    scores (e_traj_t, e_traj_x, one-hot action) as genuine-vs-fake."""

    def __init__(self, view_size, n_actions, rng, embed_dim=64, hidden=128,
                 channels=(32, 64, 64), norm="batch"):
        super().__init__()
        self.n_actions = n_actions
        self.embed_dim = embed_dim
        self.encoder = CnnEncoder(view_size, embed_dim, rng,
                                  norm=norm, channels=channels)
        self.gru = GruCell(embed_dim, embed_dim, rng)
        self.head = Mlp([2 * embed_dim + n_actions, hidden, hidden, 1],
                        rng, norm=norm, out_gain=1.0)

    def embed(self, obs: Tensor, h_prev: Tensor):
        """(e_obs, e_traj): e_traj doubles as the next GRU hidden state."""
        e_obs = self.encoder(obs)
        e_traj = self.gru(e_obs, h_prev)
        return e_obs, e_traj

    def logits(self, obs_t: Tensor, act_onehot: Tensor, obs_x: Tensor,
               h_prev: Tensor) -> Tensor:
        e_t = self.encoder(obs_t)
        traj_t = self.gru(e_t, h_prev)
        e_x = self.encoder(obs_x)
        traj_x = self.gru(e_x, traj_t)
        return self.head(concat([traj_t, traj_x, act_onehot], axis=1))


def disc_loss(model: DiscModel, batch) -> Tensor:
    """Mean binary cross-entropy of the discriminator on a sample batch."""
    logits = model.logits(
        Tensor(batch["obs_t"]),
        Tensor(batch["action"]),
        Tensor(batch["obs_x"]),
        Tensor(batch["h_prev"]),
    )
    return logits.reshape(-1).bce_with_logits(batch["label"])


def build_disc_batch(positives, q: ObservationQueue, size: int, rng):
    """Half genuine transitions, half with o_x swapped for a queue draw.

    `positives` supplies aligned arrays obs_t, action (one-hot), obs_next
    (network form), clean_next (integer form), h_prev. Transitions whose
    negative draw fails are redrawn a bounded number of times; if the
    queue cannot supply enough negatives the batch shrinks with a warning.
    """
    n = positives["obs_t"].shape[0]
    half = size // 2
    pos_idx = rng.integers(n, size=half)
    neg_rows = []
    attempts = 0
    while len(neg_rows) < half and attempts < 4 * half:
        attempts += 1
        i = int(rng.integers(n))
        neg = sample_negative(q, positives["clean_next"][i], rng)
        if neg is not None:
            neg_rows.append((i, neg[1]))
    if len(neg_rows) < half:
        warnings.warn(
            f"negative pool too small: {len(neg_rows)}/{half} negatives",
            RuntimeWarning,
        )
    neg_idx = np.array([i for i, _ in neg_rows], dtype=np.int64)
    idx = np.concatenate([pos_idx, neg_idx]).astype(np.int64)
    obs_x_pos = positives["obs_next"][pos_idx]
    if neg_rows:
        obs_x_neg = np.stack([o for _, o in neg_rows])
        obs_x = np.concatenate([obs_x_pos, obs_x_neg])
    else:
        obs_x = obs_x_pos
    label = np.concatenate(
        [np.ones(half, dtype=np.float64),
         np.zeros(len(neg_rows), dtype=np.float64)]
    )
    return {
        "obs_t": positives["obs_t"][idx],
        "action": positives["action"][idx],
        "obs_x": obs_x,
        "h_prev": positives["h_prev"][idx],
        "label": label,
    }
