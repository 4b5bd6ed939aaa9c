"""Recurrent PPO: rollout buffer, GAE, EMA advantage normalization, and
clipped-surrogate updates that re-run the GRU over worker-contiguous
segments from stored hidden states."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .nn import (
    CnnEncoder,
    GruCell,
    Mlp,
    Module,
    Tensor,
    clip_grad_norm,
    concat,
    no_grad,
)


class BufferError(Exception):
    pass


class ActorCritic(Module):
    """CNN -> GRU -> separate policy and value MLP heads."""

    def __init__(self, view_size, n_actions, rng, embed_dim=64, hidden=128,
                 channels=(32, 64, 64), norm="batch"):
        super().__init__()
        self.n_actions = n_actions
        self.embed_dim = embed_dim
        self.encoder = CnnEncoder(view_size, embed_dim, rng,
                                  norm=norm, channels=channels)
        self.gru = GruCell(embed_dim, embed_dim, rng)
        self.policy = Mlp([embed_dim, hidden, n_actions], rng,
                          norm=norm, out_gain=0.01)
        self.value = Mlp([embed_dim, hidden, 1], rng, norm=norm, out_gain=1.0)

    def act(self, obs: Tensor, h: Tensor):
        """(logits, value, next_hidden) for a batch of workers."""
        traj = self.gru(self.encoder(obs), h)
        return self.policy(traj), self.value(traj), traj


@dataclass
class RolloutBuffer:
    """(n_steps, n_workers)-shaped transition storage."""

    n_steps: int
    n_workers: int
    obs: np.ndarray
    obs_next: np.ndarray
    clean_next: np.ndarray
    actions: np.ndarray
    log_probs: np.ndarray
    values: np.ndarray
    ext_rewards: np.ndarray
    raw_ir: np.ndarray
    dones: np.ndarray
    policy_h: np.ndarray  # hidden before the step
    disc_h: np.ndarray  # bonus model hidden before the step
    bootstrap: np.ndarray
    states: list = field(default_factory=list)  # per-step state fingerprints
    advantages: np.ndarray | None = None
    returns: np.ndarray | None = None
    consumed: bool = False

    @classmethod
    def empty(cls, n_steps, n_workers, obs_shape, hidden, disc_hidden):
        z = np.zeros
        return cls(
            n_steps=n_steps,
            n_workers=n_workers,
            obs=z((n_steps, n_workers) + obs_shape, np.float32),
            obs_next=z((n_steps, n_workers) + obs_shape, np.float32),
            clean_next=z((n_steps, n_workers) + obs_shape, np.uint8),
            actions=z((n_steps, n_workers), np.int64),
            log_probs=z((n_steps, n_workers), np.float64),
            values=z((n_steps, n_workers), np.float64),
            ext_rewards=z((n_steps, n_workers), np.float64),
            raw_ir=z((n_steps, n_workers), np.float64),
            dones=z((n_steps, n_workers), bool),
            policy_h=z((n_steps, n_workers, hidden), np.float32),
            disc_h=z((n_steps, n_workers, disc_hidden), np.float32),
            bootstrap=z(n_workers, np.float64),
        )

    def flat_positives(self):
        """Aligned flat views used for bonus-model training batches."""
        n = self.n_steps * self.n_workers
        eye = np.eye(7, dtype=np.float32)
        return {
            "obs_t": self.obs.reshape((n,) + self.obs.shape[2:]),
            "obs_next": self.obs_next.reshape((n,) + self.obs.shape[2:]),
            "clean_next": self.clean_next.reshape((n,) + self.clean_next.shape[2:]),
            "action": eye[self.actions.reshape(n)],
            "h_prev": self.disc_h.reshape(n, self.disc_h.shape[2]),
        }


def combine_rewards(r_ext, r_int_norm, coef_ext, beta):
    return coef_ext * r_ext + beta * r_int_norm


def compute_gae(rewards, values, dones, bootstrap, gamma, lam):
    """delta_t = r_t + g*V_{t+1}*(1-d_t) - V_t; A accumulates with g*lam."""
    if not (rewards.shape == values.shape == dones.shape):
        raise ValueError("reward/value/done shapes differ")
    T = rewards.shape[0]
    adv = np.zeros_like(rewards, dtype=np.float64)
    last = np.zeros_like(bootstrap, dtype=np.float64)
    next_value = bootstrap.astype(np.float64)
    for t in range(T - 1, -1, -1):
        live = 1.0 - dones[t].astype(np.float64)
        delta = rewards[t] + gamma * next_value * live - values[t]
        last = delta + gamma * lam * live * last
        adv[t] = last
        next_value = values[t]
    return adv, adv + values


@dataclass
class AdvNormState:
    mean: float = 0.0
    std: float = 1.0
    momentum: float = 0.9


def normalize_advantages(adv: np.ndarray, state: AdvNormState) -> np.ndarray:
    """EMA-standardize a rollout's advantages.

    The EMA absorbs this rollout's batch statistics first, so momentum 0
    degenerates to plain per-batch standardization.
    """
    m = state.momentum
    state.mean = m * state.mean + (1.0 - m) * float(adv.mean())
    state.std = m * state.std + (1.0 - m) * float(adv.std())
    return (adv - state.mean) / max(state.std, 1e-8)


# ---------------------------------------------------------------------------
# Update


def _segment_forward(model, obs, h0, done_prev):
    """Re-run CNN+GRU over a (B, L) segment batch; returns the (L*B, E)
    trajectory embeddings in time-major order."""
    B, L = obs.shape[0], obs.shape[1]
    flat = obs.reshape((B * L,) + obs.shape[2:])
    e = model.encoder(Tensor(flat)).reshape(B, L, model.embed_dim)
    h = Tensor(h0)
    outs = []
    for t in range(L):
        if t > 0:
            # a done at t-1 means this step starts a fresh episode
            mask = (1.0 - done_prev[:, t - 1].astype(np.float64))[:, None]
            h = h * Tensor(mask)
        h = model.gru(e[:, t, :], h)
        outs.append(h)
    return concat(outs, axis=0)


def ppo_update(model, optimizer, buffer: RolloutBuffer, rng, clip=0.2,
               ent_coef=1e-2, value_coef=0.5, epochs=4, minibatch=512,
               bptt_len=16, max_grad_norm=0.5):
    """Clipped-surrogate update; returns averaged loss statistics."""
    if buffer.consumed:
        raise BufferError("rollout buffer already consumed")
    buffer.consumed = True
    T, W = buffer.n_steps, buffer.n_workers
    if T % bptt_len:
        raise ValueError("n_steps must be divisible by bptt_len")
    segs = [(w, t0) for w in range(W) for t0 in range(0, T, bptt_len)]
    per_mb = max(1, minibatch // bptt_len)
    stats = {k: 0.0 for k in ("policy_loss", "value_loss", "entropy",
                              "clip_fraction", "approx_kl")}
    n_updates = 0
    model.train()
    for _ in range(epochs):
        order = rng.permutation(len(segs))
        for start in range(0, len(segs), per_mb):
            chosen = [segs[i] for i in order[start : start + per_mb]]
            L = bptt_len
            obs = np.stack([buffer.obs[t0 : t0 + L, w] for w, t0 in chosen])
            h0 = np.stack([buffer.policy_h[t0, w] for w, t0 in chosen])
            done_prev = np.stack(
                [buffer.dones[t0 : t0 + L, w] for w, t0 in chosen]
            )

            def tmaj(arr):
                sel = np.stack([arr[t0 : t0 + L, w] for w, t0 in chosen])
                return sel.T.reshape(-1)  # (B, L) -> time-major flat

            actions = tmaj(buffer.actions)
            logp_old = tmaj(buffer.log_probs)
            adv = tmaj(buffer.advantages)
            ret = tmaj(buffer.returns)

            traj = _segment_forward(model, obs, h0, done_prev)
            logits = model.policy(traj)
            logp_all = logits.log_softmax()
            logp = logp_all.take_rows(actions)
            ratio = (logp - Tensor(logp_old)).exp()
            surr1 = ratio * Tensor(adv)
            surr2 = ratio.clip(1.0 - clip, 1.0 + clip) * Tensor(adv)
            policy_obj = surr1.minimum(surr2).mean()

            v = model.value(traj).reshape(-1)
            v_err = v - Tensor(ret)
            value_loss = (v_err * v_err).mean()

            probs = logp_all.exp()
            entropy = (probs * logp_all).sum(axis=1).mean() * -1.0

            loss = (policy_obj * -1.0 + value_loss * value_coef
                    + entropy * -ent_coef)
            model.zero_grad()
            loss.backward()
            clip_grad_norm(model.parameters(), max_grad_norm)
            optimizer.step()

            with np.errstate(over="ignore"):
                r = np.exp(logp.data - logp_old)
            stats["policy_loss"] += -float(policy_obj.data)
            stats["value_loss"] += float(value_loss.data)
            stats["entropy"] += float(entropy.data)
            stats["clip_fraction"] += float(np.mean(np.abs(r - 1.0) > clip))
            stats["approx_kl"] += float(np.mean(logp_old - logp.data))
            n_updates += 1
    model.eval()
    return {k: v / max(n_updates, 1) for k, v in stats.items()}


# ---------------------------------------------------------------------------
# Collection


class Collector:
    """Steps N environments in lockstep and fills rollout buffers.

    Persists mid-episode state (current observations, hidden states)
    between rollouts; hidden states reset to zero at episode boundaries.
    """

    def __init__(self, envs, policy: ActorCritic, method, rng):
        self.envs = envs
        self.policy = policy
        self.method = method
        self.rng = rng
        self.n_workers = len(envs)
        first = [env.reset() for env in envs]
        self.cur_obs = np.stack([r.net_obs for r in first])
        self.cur_states = [r.state for r in first]
        self.policy_hidden = np.zeros(
            (self.n_workers, policy.embed_dim), np.float32
        )
        self.method.start(self.cur_obs)
        # episode bookkeeping for metrics
        self.episode_returns = [0.0] * self.n_workers
        self.episode_lengths = [0] * self.n_workers
        self.finished_episodes = deque(maxlen=100)  # (return, length)
        self.total_episodes = 0

    def collect(self, n_steps) -> RolloutBuffer:
        policy, method = self.policy, self.method
        buf = RolloutBuffer.empty(
            n_steps, self.n_workers, self.cur_obs.shape[1:],
            policy.embed_dim, method.hidden_dim,
        )
        policy.eval()
        with no_grad():
            for t in range(n_steps):
                logits, value, h_next = policy.act(
                    Tensor(self.cur_obs), Tensor(self.policy_hidden)
                )
                logp_all = logits.log_softmax().data
                probs = np.exp(logp_all)
                probs /= probs.sum(axis=1, keepdims=True)
                actions = np.array(
                    [self.rng.choice(policy.n_actions, p=p) for p in probs]
                )
                results = [
                    env.step(int(a)) for env, a in zip(self.envs, actions)
                ]

                buf.obs[t] = self.cur_obs
                buf.policy_h[t] = self.policy_hidden
                buf.actions[t] = actions
                buf.log_probs[t] = logp_all[np.arange(self.n_workers), actions]
                buf.values[t] = value.data.reshape(-1)
                buf.ext_rewards[t] = [r.reward for r in results]
                buf.dones[t] = [r.done for r in results]
                buf.obs_next[t] = np.stack([r.net_obs for r in results])
                buf.clean_next[t] = np.stack([r.obs for r in results])
                buf.states.append([r.state for r in results])

                buf.disc_h[t] = method.h_prev()
                buf.raw_ir[t] = method.step(buf.obs_next[t], actions,
                                            buf.clean_next[t], buf.dones[t])

                next_obs = buf.obs_next[t].copy()
                self.policy_hidden = h_next.data.astype(np.float32)
                for w, res in enumerate(results):
                    self.episode_returns[w] += res.reward
                    self.episode_lengths[w] += 1
                    if res.done:
                        self.finished_episodes.append(
                            (self.episode_returns[w], self.episode_lengths[w])
                        )
                        self.total_episodes += 1
                        self.episode_returns[w] = 0.0
                        self.episode_lengths[w] = 0
                        fresh = self.envs[w].reset()
                        next_obs[w] = fresh.net_obs
                        self.policy_hidden[w] = 0.0
                        method.on_reset(w, fresh.net_obs)
                self.cur_obs = next_obs
            _, value, _ = policy.act(
                Tensor(self.cur_obs), Tensor(self.policy_hidden)
            )
            buf.bootstrap[:] = value.data.reshape(-1)
        return buf
