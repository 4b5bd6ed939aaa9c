"""Training orchestration: wires environments, policy, bonus method,
normalizers, metrics, CSV output, and exact-resume checkpoints."""
from __future__ import annotations

import os
import time

import numpy as np

from ..envs import Dir, Env, default_max_steps
from ..intrinsic import IRNormState, normalize_ir
from ..methods import make_method
from ..nn import Adam
from ..ppo import (
    ActorCritic,
    AdvNormState,
    Collector,
    combine_rewards,
    compute_gae,
    normalize_advantages,
    ppo_update,
)
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .config import ExperimentConfig, config_lines
from .metrics import ExplorationTracker, MetricRow
from .outputs import aggregate_csv, write_csv


def _rng(seed, stream):
    return np.random.default_rng(np.random.SeedSequence([seed, stream]))


class Trainer:
    """One (config, seed) training process."""

    def __init__(self, config: ExperimentConfig, seed: int):
        config.validate()
        self.config = config
        self.seed = seed
        cfg = config
        spec = cfg.env_spec()
        init_rng = _rng(seed, 1)
        self.policy = ActorCritic(
            spec.view_size, 7, init_rng, embed_dim=cfg.embed_dim,
            hidden=cfg.hidden, channels=cfg.channels, norm=cfg.norm,
        )
        self.policy.eval()
        self.opt = Adam(self.policy.parameters(), lr=cfg.lr, eps=cfg.adam_eps)
        memory_capacity = (cfg.max_steps or default_max_steps(cfg.task)) + 2
        self.method = make_method(
            cfg.method, cfg.workers, spec.view_size, 7, _rng(seed, 2),
            embed_dim=cfg.embed_dim, hidden=cfg.hidden,
            channels=cfg.channels, norm=cfg.norm, lr=cfg.method_lr,
            adam_eps=cfg.adam_eps, memory_capacity=memory_capacity,
            queue_size=cfg.queue_size, queue_smoothing=cfg.queue_smoothing,
        )
        envs = [Env(spec, seed * 100_000 + w) for w in range(cfg.workers)]
        self.collector = Collector(envs, self.policy, self.method,
                                   _rng(seed, 3))
        self.update_rng = _rng(seed, 4)
        self.method_rng = _rng(seed, 5)
        self.ir_state = IRNormState(momentum=cfg.ir_momentum)
        self.adv_state = AdvNormState(momentum=cfg.adv_momentum)
        self.tracker = ExplorationTracker(cfg.workers)
        self.beta = 0.0 if cfg.method == "NoIntrinsic" else cfg.beta
        self.frames = 0
        self.iteration = 0
        self.rows: list[MetricRow] = []

    # -- one collect/update cycle -----------------------------------------

    def train_iteration(self) -> MetricRow:
        cfg = self.config
        buf = self.collector.collect(cfg.rollout_steps)
        raw = buf.raw_ir
        norm_ir = normalize_ir(raw.reshape(-1), self.ir_state).reshape(raw.shape)
        rewards = combine_rewards(buf.ext_rewards, norm_ir,
                                  cfg.ext_coef, self.beta)
        adv, ret = compute_gae(rewards, buf.values, buf.dones, buf.bootstrap,
                               cfg.gamma, cfg.gae_lambda)
        buf.advantages = normalize_advantages(adv, self.adv_state)
        buf.returns = ret
        stats = ppo_update(
            self.policy, self.opt, buf, self.update_rng, clip=cfg.clip,
            ent_coef=cfg.entropy_coef, value_coef=cfg.value_coef,
            epochs=cfg.ppo_epochs, minibatch=cfg.minibatch,
            bptt_len=cfg.bptt_len, max_grad_norm=cfg.max_grad_norm,
        )
        mstats = self.method.update(buf, self.method_rng,
                                    epochs=cfg.model_epochs,
                                    minibatch=cfg.model_minibatch)
        ep_eff, life_eff = self.tracker.update(buf.states, buf.dones)

        self.frames += cfg.rollout_steps * cfg.workers
        self.iteration += 1
        window = list(self.collector.finished_episodes)
        mean_return = (sum(r for r, _ in window) / len(window)) if window else 0.0
        row = MetricRow(
            frames=self.frames,
            mean_return=mean_return,
            episodic_eff=ep_eff,
            lifelong_eff=life_eff,
            policy_loss=stats["policy_loss"],
            value_loss=stats["value_loss"],
            entropy=stats["entropy"],
            clip_fraction=stats["clip_fraction"],
            approx_kl=stats["approx_kl"],
            model_loss=mstats.get("model_loss", 0.0),
            raw_ir_mean=float(raw.mean()),
            episodes=self.collector.total_episodes,
        )
        self.rows.append(row)
        return row

    def run(self, frames=None, csv_path=None, checkpoint_path=None,
            progress=False):
        cfg = self.config
        frames = frames if frames is not None else cfg.frames
        per_iter = cfg.rollout_steps * cfg.workers
        start = time.monotonic()
        while self.frames + per_iter <= frames:
            row = self.train_iteration()
            if progress and self.iteration % cfg.log_every == 0:
                elapsed = time.monotonic() - start
                print(
                    f"frames={row.frames} return={row.mean_return:.3f} "
                    f"life_eff={row.lifelong_eff:.4f} wall={elapsed:.0f}s",
                    flush=True,
                )
            if (checkpoint_path and cfg.checkpoint_every
                    and self.iteration % cfg.checkpoint_every == 0):
                self.save(checkpoint_path)
        if csv_path:
            write_csv(csv_path, self.rows)
        if checkpoint_path:
            self.save(checkpoint_path)
        return self.rows

    # -- exact-resume checkpointing ---------------------------------------

    def _env_meta(self, env):
        w = env.world
        return {
            "agent_pos": list(w.agent_pos),
            "agent_dir": int(w.agent_dir),
            "carried": list(w.carried) if w.carried else None,
            "step_count": w.step_count,
            "done": w.done,
            "max_steps": w.max_steps,
            "width": w.width,
            "height": w.height,
            "layout_rng": env._layout_rng.bit_generator.state,
            "noise_rng": env._noise_rng.bit_generator.state,
        }

    def _restore_env(self, env, meta, arrays, prefix):
        w = env.world
        if w is None or (w.width, w.height) != (meta["width"], meta["height"]):
            raise CheckpointError("environment shape mismatch")
        for plane in ("obj", "color", "state"):
            getattr(w, plane)[:] = arrays[prefix + plane].astype(np.uint8)
        w.agent_pos = tuple(meta["agent_pos"])
        w.agent_dir = Dir(meta["agent_dir"])
        w.carried = tuple(meta["carried"]) if meta["carried"] else None
        w.step_count = meta["step_count"]
        w.done = meta["done"]
        w.max_steps = meta["max_steps"]
        env._layout_rng.bit_generator.state = meta["layout_rng"]
        env._noise_rng.bit_generator.state = meta["noise_rng"]

    def save(self, path):
        c = self.collector
        meta = {
            "config": config_lines(self.config),
            "seed": self.seed,
            "frames": self.frames,
            "iteration": self.iteration,
            "total_episodes": c.total_episodes,
            "episode_returns": c.episode_returns,
            "episode_lengths": c.episode_lengths,
            "finished_episodes": list(c.finished_episodes),
            "lifetime_states": sorted(s.hex() for s in self.tracker.lifetime),
            "episode_states": [
                sorted(s.hex() for s in seen)
                for seen in self.tracker._episode_seen
            ],
            "fresh_starts": list(self.tracker._fresh_start),
            "collector_rng": c.rng.bit_generator.state,
            "update_rng": self.update_rng.bit_generator.state,
            "method_rng": self.method_rng.bit_generator.state,
            "ir_state": [self.ir_state.mean, self.ir_state.std],
            "adv_state": [self.adv_state.mean, self.adv_state.std],
            "method_meta": self.method.extra_meta(),
            "envs": [self._env_meta(env) for env in c.envs],
        }
        arrays = {}
        for name, arr in self.policy.state_arrays().items():
            arrays["policy." + name] = arr
        arrays.update(self.opt.state_arrays("popt."))
        for mname, module in self.method.modules().items():
            for name, arr in module.state_arrays().items():
                arrays[f"m.{mname}.{name}"] = arr
        for oname, opt in self.method.optimizers().items():
            arrays.update(opt.state_arrays(f"mo.{oname}."))
        for name, arr in self.method.extra_arrays().items():
            arrays["mx." + name] = arr
        arrays["collector.cur_obs"] = c.cur_obs
        arrays["collector.policy_hidden"] = c.policy_hidden
        for w, env in enumerate(c.envs):
            world = env.world
            for plane in ("obj", "color", "state"):
                arrays[f"env{w}.{plane}"] = getattr(world, plane).astype(
                    np.float32
                )
        save_checkpoint(path, meta, arrays)

    # run-control keys may legitimately change on resume (extending the
    # frame budget, new output dir); everything else must match exactly
    _RESUMABLE = ("run.frames = ", "run.out = ", "run.checkpoint_every = ",
                  "run.log_every = ")

    def load(self, path):
        meta, arrays = load_checkpoint(path)

        def essential(lines):
            return [l for l in lines if not l.startswith(self._RESUMABLE)]

        if essential(meta["config"]) != essential(config_lines(self.config)):
            raise CheckpointError("checkpoint config differs from current")
        if meta["seed"] != self.seed:
            raise CheckpointError("checkpoint seed differs from current")

        def sub(prefix):
            n = len(prefix)
            return {k[n:]: v for k, v in arrays.items() if k.startswith(prefix)}

        try:
            self.policy.load_state(sub("policy."))
            self.opt.load_state(arrays, "popt.")
            for mname, module in self.method.modules().items():
                module.load_state(sub(f"m.{mname}."))
            for oname, opt in self.method.optimizers().items():
                opt.load_state(arrays, f"mo.{oname}.")
        except KeyError as exc:
            raise CheckpointError(f"missing checkpoint array {exc}") from exc
        self.method.load_extra(sub("mx."), meta["method_meta"])

        c = self.collector
        c.cur_obs = arrays["collector.cur_obs"].astype(np.float32)
        c.policy_hidden = arrays["collector.policy_hidden"].astype(np.float32)
        c.episode_returns = list(meta["episode_returns"])
        c.episode_lengths = list(meta["episode_lengths"])
        c.finished_episodes.clear()
        c.finished_episodes.extend(tuple(e) for e in meta["finished_episodes"])
        c.total_episodes = meta["total_episodes"]
        self.tracker.lifetime = {
            bytes.fromhex(s) for s in meta["lifetime_states"]
        }
        self.tracker._episode_seen = [
            {bytes.fromhex(s) for s in seen} for seen in meta["episode_states"]
        ]
        self.tracker._fresh_start = list(meta["fresh_starts"])
        c.rng.bit_generator.state = meta["collector_rng"]
        self.update_rng.bit_generator.state = meta["update_rng"]
        self.method_rng.bit_generator.state = meta["method_rng"]
        self.ir_state.mean, self.ir_state.std = meta["ir_state"]
        self.adv_state.mean, self.adv_state.std = meta["adv_state"]
        for w, env in enumerate(c.envs):
            self._restore_env(env, meta["envs"][w], arrays, f"env{w}.")
        self.frames = meta["frames"]
        self.iteration = meta["iteration"]
        # metric rows before the checkpoint are not replayed; resumed rows
        # continue from the checkpointed frame count
        self.rows = []
        return self


def run_experiment(config: ExperimentConfig, out_dir=None, progress=False):
    """Train every seed in the config; emit per-seed and aggregate CSVs."""
    out_dir = out_dir or config.out
    os.makedirs(out_dir, exist_ok=True)
    seed_paths = []
    all_rows = {}
    for seed in config.seeds:
        trainer = Trainer(config, seed)
        csv_path = os.path.join(out_dir, f"seed{seed}.csv")
        ckpt = os.path.join(out_dir, f"seed{seed}.ckpt")
        rows = trainer.run(csv_path=csv_path, checkpoint_path=ckpt,
                           progress=progress)
        seed_paths.append(csv_path)
        all_rows[seed] = rows
    aggregate_csv(os.path.join(out_dir, "aggregate.csv"), seed_paths)
    return all_rows
