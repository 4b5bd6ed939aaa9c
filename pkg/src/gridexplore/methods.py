"""Exploration-bonus methods behind a single collector-facing interface.

A method owns its model(s), per-worker recurrent state and episodic
memories, computes raw per-step bonuses during collection, and trains its
model(s) from the finished rollout buffer.
"""
from __future__ import annotations

import numpy as np

from .baselines import ForwardModel, InverseModel, RndModel
from .intrinsic import (
    DiscModel,
    EpisodicMemory,
    ObservationQueue,
    build_disc_batch,
    disc_loss,
    intrinsic_reward,
    novelty_reward,
    update_queue,
)
from .nn import Adam, Tensor, no_grad

METHODS = ("DEIR", "PlainNovelty", "ForwardError", "InverseDriven", "RND",
           "NoIntrinsic")

_EYE7 = np.eye(7, dtype=np.float32)


def _minibatches(n, size, rng):
    order = rng.permutation(n)
    for start in range(0, n - size + 1, size):
        yield order[start : start + size]


class NoIntrinsic:
    """Pure PPO: zero bonus, nothing to train."""

    name = "NoIntrinsic"
    hidden_dim = 1

    def __init__(self, n_workers, **_):
        self.n_workers = n_workers

    def start(self, obs):
        pass

    def h_prev(self):
        return np.zeros((self.n_workers, 1), np.float32)

    def step(self, obs_next, actions, clean_next, dones):
        return np.zeros(len(dones))

    def on_reset(self, w, net_obs):
        pass

    def update(self, buffer, rng, epochs, minibatch):
        return {}

    def modules(self):
        return {}

    def optimizers(self):
        return {}

    def extra_arrays(self):
        return {}

    def load_extra(self, arrays, meta):
        pass

    def extra_meta(self):
        return {}


class _RecurrentMethod(NoIntrinsic):
    """Shared plumbing for methods with a CNN+GRU embedding model."""

    def __init__(self, n_workers, model, lr, adam_eps, memory_capacity):
        self.n_workers = n_workers
        self.model = model
        self.hidden_dim = model.embed_dim
        self.opt = Adam(model.parameters(), lr=lr, eps=adam_eps)
        self.h = np.zeros((n_workers, model.embed_dim), np.float32)
        self._h_before = np.zeros_like(self.h)
        self.memories = [
            EpisodicMemory(model.embed_dim, model.embed_dim, memory_capacity)
            for _ in range(n_workers)
        ]
        self.model.eval()

    def start(self, obs):
        self.h[:] = 0.0
        self._h_before[:] = 0.0
        with no_grad():
            _, traj = self.model.embed(Tensor(obs), Tensor(self.h))
        self.h = traj.data.astype(np.float32)

    def h_prev(self):
        return self._h_before.copy()

    def on_reset(self, w, net_obs):
        self._h_before[w] = 0.0
        with no_grad():
            _, traj = self.model.embed(
                Tensor(net_obs[None]), Tensor(np.zeros((1, self.hidden_dim),
                                                       np.float32))
            )
        self.h[w] = traj.data[0]

    def modules(self):
        return {"bonus_model": self.model}

    def optimizers(self):
        return {"bonus_opt": self.opt}

    def extra_arrays(self):
        out = {"h": self.h, "h_before": self._h_before}
        for w, mem in enumerate(self.memories):
            out[f"mem{w}_obs"] = mem.obs.copy()
            out[f"mem{w}_traj"] = mem.traj.copy()
        return out

    def load_extra(self, arrays, meta):
        self.h = arrays["h"].astype(np.float32)
        self._h_before = arrays["h_before"].astype(np.float32)
        for w, mem in enumerate(self.memories):
            obs = arrays[f"mem{w}_obs"]
            mem.clear()
            for i in range(obs.shape[0]):
                mem.append(obs[i], arrays[f"mem{w}_traj"][i])


class _QueueMethod(_RecurrentMethod):
    """Adds the negative-example observation queue and its checkpointing."""

    def __init__(self, n_workers, model, lr, adam_eps, memory_capacity,
                 queue_size, queue_smoothing):
        super().__init__(n_workers, model, lr, adam_eps, memory_capacity)
        self.queue = ObservationQueue(queue_size, queue_smoothing)

    def _embed_next(self, obs_next):
        with no_grad():
            e_obs, e_traj = self.model.embed(Tensor(obs_next), Tensor(self.h))
        return e_obs.data, e_traj.data.astype(np.float32)

    def update(self, buffer, rng, epochs, minibatch):
        pos = buffer.flat_positives()
        n = pos["obs_t"].shape[0]
        self.model.train()
        total, count = 0.0, 0
        for _ in range(epochs):
            for _start in range(0, n, minibatch):
                if _start + minibatch > n:
                    break
                batch = build_disc_batch(pos, self.queue, minibatch, rng)
                if batch["label"].size < 4:
                    continue
                self.model.zero_grad()
                loss = disc_loss(self.model, batch)
                loss.backward()
                self.opt.step()
                total += float(loss.data)
                count += 1
        self.model.eval()
        return {"model_loss": total / max(count, 1)}

    def extra_arrays(self):
        out = super().extra_arrays()
        if len(self.queue):
            out["queue_clean"] = np.stack(
                [self.queue[i][0] for i in range(len(self.queue))]
            ).astype(np.float32)
            out["queue_net"] = np.stack(
                [self.queue[i][1] for i in range(len(self.queue))]
            )
        return out

    def load_extra(self, arrays, meta):
        super().load_extra(arrays, meta)
        self.queue.running_avg = meta["queue_running_avg"]
        self.queue._start = 0
        self.queue.count = 0
        if "queue_clean" in arrays:
            clean = arrays["queue_clean"].astype(np.uint8)
            net = arrays["queue_net"]
            for i in range(clean.shape[0]):
                self.queue._push((clean[i], net[i]))

    def extra_meta(self):
        return {"queue_running_avg": self.queue.running_avg}


class Deir(_QueueMethod):
    """Discriminative episodic bonus: observation novelty scaled down by
    trajectory similarity."""

    name = "DEIR"

    def step(self, obs_next, actions, clean_next, dones):
        e_obs, e_traj = self._embed_next(obs_next)
        r = np.zeros(self.n_workers)
        for w in range(self.n_workers):
            r[w] = intrinsic_reward(
                e_obs[w].astype(np.float32), self.h[w],
                self.memories[w], bool(dones[w]),
            )
            update_queue(self.queue, clean_next[w].copy(),
                         obs_next[w].copy(), r[w])
        self._h_before = self.h
        self.h = e_traj
        return r


class PlainNovelty(_QueueMethod):
    """Ablation: same discriminator, numerator-only bonus."""

    name = "PlainNovelty"

    def step(self, obs_next, actions, clean_next, dones):
        e_obs, e_traj = self._embed_next(obs_next)
        r = np.zeros(self.n_workers)
        for w in range(self.n_workers):
            r[w] = novelty_reward(
                e_obs[w].astype(np.float32), self.memories[w], bool(dones[w])
            )
            update_queue(self.queue, clean_next[w].copy(),
                         obs_next[w].copy(), r[w])
        self._h_before = self.h
        self.h = e_traj
        return r


class ForwardError(_RecurrentMethod):
    """Bonus = squared next-embedding prediction error of a forward model."""

    name = "ForwardError"

    def __init__(self, n_workers, model: ForwardModel, lr, adam_eps,
                 memory_capacity):
        super().__init__(n_workers, model, lr, adam_eps, memory_capacity)
        self.e_cur = np.zeros((n_workers, model.embed_dim), np.float32)

    def start(self, obs):
        super().start(obs)
        with no_grad():
            e, _ = self.model.embed(Tensor(obs), Tensor(self.h))
        self.e_cur = e.data.astype(np.float32)

    def on_reset(self, w, net_obs):
        super().on_reset(w, net_obs)
        with no_grad():
            e = self.model.encoder(Tensor(net_obs[None]))
        self.e_cur[w] = e.data[0]

    def step(self, obs_next, actions, clean_next, dones):
        with no_grad():
            e_obs, e_traj = self.model.embed(Tensor(obs_next), Tensor(self.h))
            pred = self.model.predict(Tensor(self.e_cur), Tensor(_EYE7[actions]))
        r = ((pred.data - e_obs.data) ** 2).sum(axis=-1)
        self._h_before = self.h
        self.h = e_traj.data.astype(np.float32)
        self.e_cur = e_obs.data.astype(np.float32)
        return r

    def update(self, buffer, rng, epochs, minibatch):
        pos = buffer.flat_positives()
        n = pos["obs_t"].shape[0]
        self.model.train()
        total, count = 0.0, 0
        for _ in range(epochs):
            for idx in _minibatches(n, minibatch, rng):
                batch = {k: pos[k][idx] for k in ("obs_t", "obs_next", "action")}
                self.model.zero_grad()
                loss = self.model.loss(batch)
                loss.backward()
                self.opt.step()
                total += float(loss.data)
                count += 1
        self.model.eval()
        return {"model_loss": total / max(count, 1)}

    def extra_arrays(self):
        out = super().extra_arrays()
        out["e_cur"] = self.e_cur
        return out

    def load_extra(self, arrays, meta):
        super().load_extra(arrays, meta)
        self.e_cur = arrays["e_cur"].astype(np.float32)


class InverseDriven(_RecurrentMethod):
    """Episodic novelty ratio on embeddings trained by action prediction."""

    name = "InverseDriven"

    def step(self, obs_next, actions, clean_next, dones):
        with no_grad():
            e_obs, e_traj = self.model.embed(Tensor(obs_next), Tensor(self.h))
        e_obs = e_obs.data
        r = np.zeros(self.n_workers)
        for w in range(self.n_workers):
            r[w] = intrinsic_reward(
                e_obs[w].astype(np.float32), self.h[w],
                self.memories[w], bool(dones[w]),
            )
        self._h_before = self.h
        self.h = e_traj.data.astype(np.float32)
        return r

    def update(self, buffer, rng, epochs, minibatch):
        pos = buffer.flat_positives()
        n = pos["obs_t"].shape[0]
        self.model.train()
        total, count = 0.0, 0
        for _ in range(epochs):
            for idx in _minibatches(n, minibatch, rng):
                batch = {
                    k: pos[k][idx]
                    for k in ("obs_t", "obs_next", "action", "h_prev")
                }
                self.model.zero_grad()
                loss = self.model.loss(batch)
                loss.backward()
                self.opt.step()
                total += float(loss.data)
                count += 1
        self.model.eval()
        return {"model_loss": total / max(count, 1)}


class Rnd(NoIntrinsic):
    """Random network distillation: predictor-vs-frozen-target gap."""

    name = "RND"
    hidden_dim = 1

    def __init__(self, n_workers, model: RndModel, lr, adam_eps):
        self.n_workers = n_workers
        self.model = model
        self.opt = Adam(model.predictor.parameters(), lr=lr, eps=adam_eps)
        self.model.eval()

    def step(self, obs_next, actions, clean_next, dones):
        with no_grad():
            return self.model.bonus(obs_next)

    def update(self, buffer, rng, epochs, minibatch):
        pos = buffer.flat_positives()
        n = pos["obs_t"].shape[0]
        self.model.train()
        total, count = 0.0, 0
        for _ in range(epochs):
            for idx in _minibatches(n, minibatch, rng):
                self.model.zero_grad()
                loss = self.model.loss({"obs_next": pos["obs_next"][idx]})
                loss.backward()
                self.opt.step()
                total += float(loss.data)
                count += 1
        self.model.eval()
        return {"model_loss": total / max(count, 1)}

    def modules(self):
        return {"bonus_model": self.model}

    def optimizers(self):
        return {"bonus_opt": self.opt}


def make_method(name, n_workers, view_size, n_actions, rng, embed_dim,
                hidden, channels, norm, lr, adam_eps, memory_capacity,
                queue_size, queue_smoothing):
    if name == "NoIntrinsic":
        return NoIntrinsic(n_workers)
    if name == "RND":
        return Rnd(n_workers,
                   RndModel(view_size, rng, embed_dim, channels),
                   lr, adam_eps)
    if name in ("DEIR", "PlainNovelty"):
        model = DiscModel(view_size, n_actions, rng, embed_dim, hidden,
                          channels, norm)
        cls = Deir if name == "DEIR" else PlainNovelty
        return cls(n_workers, model, lr, adam_eps, memory_capacity,
                   queue_size, queue_smoothing)
    if name == "ForwardError":
        return ForwardError(
            n_workers,
            ForwardModel(view_size, n_actions, rng, embed_dim, hidden,
                         channels, norm),
            lr, adam_eps, memory_capacity,
        )
    if name == "InverseDriven":
        return InverseDriven(
            n_workers,
            InverseModel(view_size, n_actions, rng, embed_dim, hidden,
                         channels, norm),
            lr, adam_eps, memory_capacity,
        )
    raise ValueError(f"unknown method {name!r}")
