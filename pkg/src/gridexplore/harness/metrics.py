"""Exploration-efficiency metrics over full-state fingerprints."""
from __future__ import annotations

from dataclasses import dataclass, fields


@dataclass
class MetricRow:
    frames: int
    mean_return: float
    episodic_eff: float
    lifelong_eff: float
    policy_loss: float
    value_loss: float
    entropy: float
    clip_fraction: float
    approx_kl: float
    model_loss: float
    raw_ir_mean: float
    episodes: int

    @classmethod
    def columns(cls):
        return [f.name for f in fields(cls)]


def exploration_metrics(stream, episode_starts, lifetime, episode_seen=None):
    """Fractions of steps landing on states never seen before.

    stream: sequence of state fingerprints, one per step.
    episode_starts: aligned booleans; True resets the in-episode set
    before the step is counted (every first step is therefore fresh).
    lifetime: set persisting across calls/episodes, updated in place.

    Returns (episodic_eff, lifelong_eff, episode_seen) so a caller can
    carry the in-episode set across chunk boundaries.
    """
    if len(stream) != len(episode_starts):
        raise ValueError("stream and episode_starts lengths differ")
    if episode_seen is None:
        episode_seen = set()
    fresh_episode = 0
    fresh_ever = 0
    for sid, start in zip(stream, episode_starts):
        if start:
            episode_seen = set()
        if sid not in episode_seen:
            fresh_episode += 1
            episode_seen.add(sid)
        if sid not in lifetime:
            fresh_ever += 1
            lifetime.add(sid)
    n = len(stream)
    if n == 0:
        return 0.0, 0.0, episode_seen
    return fresh_episode / n, fresh_ever / n, episode_seen


class ExplorationTracker:
    """Streaming per-worker wrapper around exploration_metrics."""

    def __init__(self, n_workers):
        self.lifetime = set()
        self._episode_seen = [set() for _ in range(n_workers)]
        self._fresh_start = [False] * n_workers

    def update(self, states, dones):
        """states: per-step list of per-worker fingerprints; dones: array
        (n_steps, n_workers). Returns rollout (episodic_eff, lifelong_eff)."""
        n_workers = len(self._episode_seen)
        ep_total = 0.0
        life_total = 0.0
        steps = len(states)
        for w in range(n_workers):
            stream = [states[t][w] for t in range(steps)]
            starts = [False] * steps
            starts[0] = self._fresh_start[w]
            for t in range(1, steps):
                starts[t] = bool(dones[t - 1][w])
            ep, life, seen = exploration_metrics(
                stream, starts, self.lifetime, self._episode_seen[w]
            )
            self._episode_seen[w] = seen
            self._fresh_start[w] = bool(dones[steps - 1][w])
            ep_total += ep * steps
            life_total += life * steps
        total = steps * n_workers
        return ep_total / total, life_total / total
