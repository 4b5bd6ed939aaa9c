"""Experiment harness: metrics, config parsing, CSV output, checkpoints,
the training loop's determinism/resume contract, and embedding probes."""
import dataclasses
import os

import numpy as np
import pytest

from gridexplore.envs import EnvSpec
from gridexplore.harness import (
    CheckpointError,
    ConfigError,
    ExperimentConfig,
    ExplorationTracker,
    MetricRow,
    PROBE_TASKS,
    Trainer,
    aggregate_csv,
    collect_probe_dataset,
    exploration_metrics,
    load_checkpoint,
    load_config,
    parse_overrides,
    probe_embeddings,
    run_experiment,
    save_checkpoint,
    write_csv,
)
from gridexplore.harness.config import config_lines
from gridexplore.harness.outputs import OutputError
from gridexplore.harness.probes import embed_dataset
from gridexplore.intrinsic import DiscModel


# ---------------------------------------------------------------------------
# exploration metrics
# ---------------------------------------------------------------------------


def test_metrics_five_unique_states_held_two_steps():
    # 10 steps over 5 fresh states, each held for 2 steps
    stream = [b"a", b"a", b"b", b"b", b"c", b"c", b"d", b"d", b"e", b"e"]
    starts = [True] + [False] * 9
    life = set()
    ep, ll, _ = exploration_metrics(stream, starts, life)
    assert ep == 0.5
    assert ll == 0.5


def test_metrics_replayed_episode_lifelong_zero():
    stream = [b"a", b"a", b"b", b"b", b"c", b"c", b"d", b"d", b"e", b"e"]
    starts = [True] + [False] * 9
    life = set()
    exploration_metrics(stream, starts, life)
    ep, ll, _ = exploration_metrics(stream, starts, life)
    assert ep == 0.5
    assert ll == 0.0


def test_metrics_single_step_episode():
    ep, ll, _ = exploration_metrics([b"z"], [True], set())
    assert ep == 1.0
    assert ll == 1.0


def test_metrics_empty_stream():
    assert exploration_metrics([], [], set())[:2] == (0.0, 0.0)


def test_metrics_length_mismatch():
    with pytest.raises(ValueError):
        exploration_metrics([b"a"], [], set())


def test_metrics_episode_boundary_resets_in_episode_set():
    # second episode revisits the same states: episodic counts them fresh
    stream = [b"a", b"b", b"a", b"b"]
    starts = [True, False, True, False]
    ep, ll, _ = exploration_metrics(stream, starts, set())
    assert ep == 1.0
    assert ll == 0.5


def test_metrics_hand_counted_streams():
    # 20 constructed streams; oracle recounts both fractions directly and
    # checks lifelong <= episodic on each
    rng = np.random.default_rng(7)
    for case in range(20):
        n = int(rng.integers(1, 40))
        stream = [bytes([rng.integers(5)]) for _ in range(n)]
        starts = [bool(rng.random() < 0.2) for _ in range(n)]
        starts[0] = True
        life_before = {bytes([v]) for v in rng.integers(5, size=3)}

        seen_ep, life = set(), set(life_before)
        fresh_ep = fresh_life = 0
        for sid, st in zip(stream, starts):
            if st:
                seen_ep = set()
            if sid not in seen_ep:
                fresh_ep += 1
                seen_ep.add(sid)
            if sid not in life:
                fresh_life += 1
                life.add(sid)

        ep, ll, _ = exploration_metrics(stream, starts, set(life_before))
        assert ep == fresh_ep / n
        assert ll == fresh_life / n
        assert ll <= ep
        assert 0.0 <= ll <= ep <= 1.0


def test_tracker_matches_direct_metrics_across_chunks():
    # feeding one worker's stream in two chunks equals one big call
    stream = [b"a", b"b", b"a", b"c", b"c", b"b", b"d", b"a"]
    dones = [0, 0, 1, 0, 0, 0, 1, 0]

    tracker = ExplorationTracker(1)
    states1 = [[s] for s in stream[:4]]
    states2 = [[s] for s in stream[4:]]
    d1 = np.array(dones[:4]).reshape(-1, 1)
    d2 = np.array(dones[4:]).reshape(-1, 1)
    ep1, ll1 = tracker.update(states1, d1)
    ep2, ll2 = tracker.update(states2, d2)

    starts = [False] + [bool(d) for d in dones[:-1]]
    ep_a, ll_a, seen = exploration_metrics(stream[:4], starts[:4], life := set())
    ep_b, ll_b, _ = exploration_metrics(stream[4:], starts[4:], life, seen)
    assert (ep1, ll1) == (ep_a, ll_a)
    assert (ep2, ll2) == (ep_b, ll_b)


def test_tracker_averages_over_workers():
    tracker = ExplorationTracker(2)
    states = [[b"a", b"x"], [b"a", b"y"]]
    dones = np.zeros((2, 2))
    ep, ll = tracker.update(states, dones)
    # worker 0: 1 fresh of 2; worker 1: 2 fresh of 2
    assert ep == pytest.approx(0.75)
    assert ll == pytest.approx(0.75)


def test_metric_row_columns_order():
    cols = MetricRow.columns()
    assert cols[0] == "frames"
    assert "episodic_eff" in cols and "lifelong_eff" in cols
    assert len(cols) == len(set(cols))


# ---------------------------------------------------------------------------
# config
# ---------------------------------------------------------------------------


def test_config_defaults_match_reference_hyperparameters():
    cfg = ExperimentConfig()
    assert cfg.gamma == 0.99
    assert cfg.gae_lambda == 0.95
    assert cfg.rollout_steps == 512
    assert cfg.workers == 16
    assert cfg.ppo_epochs == 4
    assert cfg.model_epochs == 4
    assert cfg.minibatch == 512
    assert cfg.entropy_coef == 1e-2
    assert cfg.lr == 3e-4
    assert cfg.adam_eps == 1e-5
    assert cfg.beta == 1e-2
    assert cfg.ext_coef == 1.0
    assert cfg.queue_size == 100_000
    assert cfg.queue_smoothing == 0.9


def test_load_config_file_and_overrides(tmp_path):
    path = tmp_path / "exp.cfg"
    path.write_text(
        "# comment line\n"
        "env.task = DoorKey8\n"
        "env.noise_sigma = 0.1   # trailing comment\n"
        "ppo.workers = 4\n"
        "ppo.channels = 8,16,16\n"
        "run.seeds = 5 6 7\n"
        "env.invisible_obstacles = true\n"
    )
    cfg = load_config(str(path), parse_overrides(["ppo.workers=2"]))
    assert cfg.task == "DoorKey8"
    assert cfg.noise_sigma == 0.1
    assert cfg.workers == 2  # override wins over file
    assert cfg.channels == (8, 16, 16)
    assert cfg.seeds == (5, 6, 7)
    assert cfg.invisible_obstacles is True


def test_load_config_rejects_unknown_key(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("ppo.learning_rate = 1e-3\n")
    with pytest.raises(ConfigError):
        load_config(str(path))


def test_load_config_rejects_bad_value(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("ppo.workers = many\n")
    with pytest.raises(ConfigError):
        load_config(str(path))


def test_parse_overrides_requires_equals():
    with pytest.raises(ConfigError):
        parse_overrides(["ppo.workers"])


def test_validate_rejects_unknown_task_and_method():
    with pytest.raises(ConfigError):
        ExperimentConfig(task="Nowhere").validate()
    with pytest.raises(ConfigError):
        ExperimentConfig(method="Magic").validate()


def test_validate_rejects_indivisible_bptt():
    with pytest.raises(ConfigError):
        ExperimentConfig(rollout_steps=100, bptt_len=16).validate()


def test_config_lines_round_trip(tmp_path):
    cfg = ExperimentConfig(task="FourRooms", workers=3, channels=(4, 8, 8),
                           seeds=(9,))
    path = tmp_path / "echo.cfg"
    path.write_text("\n".join(config_lines(cfg)) + "\n")
    again = load_config(str(path))
    assert again == cfg


def test_env_spec_translation():
    cfg = ExperimentConfig(task="FourRooms", max_steps=0)
    spec = cfg.env_spec()
    assert isinstance(spec, EnvSpec)
    assert spec.max_steps is None  # 0 means task default
    assert ExperimentConfig(max_steps=50).env_spec().max_steps == 50


# ---------------------------------------------------------------------------
# CSV outputs
# ---------------------------------------------------------------------------


def _row(frames, mean_return):
    return MetricRow(frames=frames, mean_return=mean_return, episodic_eff=0.5,
                     lifelong_eff=0.25, policy_loss=0.1, value_loss=0.2,
                     entropy=1.9, clip_fraction=0.05, approx_kl=0.01,
                     model_loss=0.7, raw_ir_mean=0.3, episodes=4)


def test_write_csv_and_header(tmp_path):
    path = tmp_path / "seed0.csv"
    write_csv(str(path), [_row(8192, 0.5), _row(16384, 0.75)])
    lines = path.read_text().strip().splitlines()
    assert lines[0].split(",") == MetricRow.columns()
    assert lines[1].split(",")[0] == "8192"
    assert len(lines) == 3


def test_write_csv_empty_errors(tmp_path):
    with pytest.raises(OutputError):
        write_csv(str(tmp_path / "x.csv"), [])


def test_aggregate_stderr_hand_value(tmp_path):
    # returns {0.8, 0.9, 1.0} at one bucket: mean 0.9, sample std 0.1,
    # stderr 0.1/sqrt(3) = 0.0577
    paths = []
    for i, r in enumerate((0.8, 0.9, 1.0)):
        p = tmp_path / f"seed{i}.csv"
        write_csv(str(p), [_row(8192, r)])
        paths.append(str(p))
    out = tmp_path / "aggregate.csv"
    aggregate_csv(str(out), paths)
    header, data = out.read_text().strip().splitlines()
    cols = dict(zip(header.split(","), data.split(",")))
    assert float(cols["mean_return_mean"]) == pytest.approx(0.9)
    assert float(cols["mean_return_stderr"]) == pytest.approx(0.0577, abs=1e-4)


def test_aggregate_single_seed_zero_stderr(tmp_path):
    p = tmp_path / "seed0.csv"
    write_csv(str(p), [_row(8192, 0.5)])
    out = tmp_path / "agg.csv"
    aggregate_csv(str(out), [str(p)])
    header, data = out.read_text().strip().splitlines()
    cols = dict(zip(header.split(","), data.split(",")))
    assert float(cols["mean_return_mean"]) == pytest.approx(0.5)
    assert float(cols["mean_return_stderr"]) == 0.0
    # mean column within [min, max] trivially: equals the sole value


def test_aggregate_no_seeds_errors(tmp_path):
    with pytest.raises(OutputError):
        aggregate_csv(str(tmp_path / "agg.csv"), [])


def test_aggregate_mean_within_seed_range(tmp_path):
    rng = np.random.default_rng(3)
    paths = []
    tables = []
    for i in range(4):
        rows = [_row(8192 * (j + 1), float(rng.random())) for j in range(3)]
        p = tmp_path / f"seed{i}.csv"
        write_csv(str(p), rows)
        paths.append(str(p))
        tables.append([r.mean_return for r in rows])
    out = tmp_path / "agg.csv"
    aggregate_csv(str(out), paths)
    lines = out.read_text().strip().splitlines()
    idx = lines[0].split(",").index("mean_return_mean")
    for j, line in enumerate(lines[1:]):
        mean = float(line.split(",")[idx])
        vals = [t[j] for t in tables]
        assert min(vals) - 1e-6 <= mean <= max(vals) + 1e-6


# ---------------------------------------------------------------------------
# checkpoint container
# ---------------------------------------------------------------------------


def test_checkpoint_round_trip(tmp_path):
    path = str(tmp_path / "run.ckpt")
    arrays = {
        "w": np.arange(6, dtype=np.float32).reshape(2, 3),
        "stats": np.array([1.25, -0.5], dtype=np.float64),
    }
    save_checkpoint(path, {"frames": 512}, arrays)
    meta, back = load_checkpoint(path)
    assert meta["frames"] == 512
    assert back["w"].dtype == np.float32
    assert back["stats"].dtype == np.float64
    np.testing.assert_array_equal(back["w"], arrays["w"])
    np.testing.assert_array_equal(back["stats"], arrays["stats"])


def test_checkpoint_bad_magic(tmp_path):
    path = tmp_path / "bad.ckpt"
    path.write_bytes(b"NOPE" + b"\x00" * 32)
    with pytest.raises(CheckpointError):
        load_checkpoint(str(path))


def test_checkpoint_truncated(tmp_path):
    path = str(tmp_path / "trunc.ckpt")
    save_checkpoint(path, {"a": 1}, {"w": np.ones(8, np.float32)})
    data = open(path, "rb").read()
    open(path, "wb").write(data[:-7])
    with pytest.raises(CheckpointError):
        load_checkpoint(path)


def test_checkpoint_corrupt_metadata(tmp_path):
    path = str(tmp_path / "corrupt.ckpt")
    save_checkpoint(path, {"a": 1}, {"w": np.ones(4, np.float32)})
    data = bytearray(open(path, "rb").read())
    data[14] ^= 0xFF  # flip a byte inside the JSON payload
    open(path, "wb").write(bytes(data))
    with pytest.raises(CheckpointError):
        load_checkpoint(path)


def test_checkpoint_atomic_leaves_no_temp(tmp_path):
    path = str(tmp_path / "run.ckpt")
    save_checkpoint(path, {}, {"w": np.ones(2, np.float32)})
    save_checkpoint(path, {}, {"w": np.zeros(2, np.float32)})
    assert sorted(os.listdir(tmp_path)) == ["run.ckpt"]
    _, arrays = load_checkpoint(path)
    np.testing.assert_array_equal(arrays["w"], np.zeros(2, np.float32))


# ---------------------------------------------------------------------------
# trainer determinism / exact resume
# ---------------------------------------------------------------------------


def _tiny_config(**kw):
    base = dict(task="MultiRoomN2S4", workers=2, rollout_steps=32,
                minibatch=64, model_minibatch=64, embed_dim=8, hidden=16,
                channels=(4, 8, 8), frames=64, seeds=(1,), method="DEIR")
    base.update(kw)
    return ExperimentConfig(**base)


def _tuples(rows):
    return [dataclasses.astuple(r) for r in rows]


def test_trainer_rerun_bit_identical():
    cfg = _tiny_config()
    rows_a = [Trainer(cfg, 3).train_iteration() for _ in range(1)]
    t1 = Trainer(cfg, 3)
    t2 = Trainer(cfg, 3)
    rows_1 = [t1.train_iteration() for _ in range(3)]
    rows_2 = [t2.train_iteration() for _ in range(3)]
    assert _tuples(rows_1) == _tuples(rows_2)
    assert _tuples(rows_1[:1]) == _tuples(rows_a)


def test_trainer_resume_reproduces_next_rows(tmp_path):
    cfg = _tiny_config()
    ref = Trainer(cfg, 1)
    ref_rows = [ref.train_iteration() for _ in range(5)]

    t = Trainer(cfg, 1)
    t.train_iteration()
    t.train_iteration()
    path = str(tmp_path / "mid.ckpt")
    t.save(path)

    resumed = Trainer(cfg, 1).load(path)
    rows = [resumed.train_iteration() for _ in range(3)]
    assert _tuples(rows) == _tuples(ref_rows[2:])


def test_trainer_load_rejects_config_and_seed_mismatch(tmp_path):
    cfg = _tiny_config()
    t = Trainer(cfg, 1)
    t.train_iteration()
    path = str(tmp_path / "run.ckpt")
    t.save(path)
    with pytest.raises(CheckpointError):
        Trainer(cfg, 2).load(path)
    with pytest.raises(CheckpointError):
        Trainer(_tiny_config(method="RND"), 1).load(path)


def test_trainer_metric_rows_monotone_frames():
    cfg = _tiny_config()
    t = Trainer(cfg, 4)
    rows = [t.train_iteration() for _ in range(3)]
    frames = [r.frames for r in rows]
    assert frames == sorted(set(frames))
    assert frames[0] == cfg.rollout_steps * cfg.workers
    for r in rows:
        assert 0.0 <= r.lifelong_eff <= r.episodic_eff <= 1.0


def test_run_experiment_emits_csvs(tmp_path):
    cfg = _tiny_config(seeds=(1, 2), frames=64)
    out = str(tmp_path / "runs")
    all_rows = run_experiment(cfg, out)
    assert set(all_rows) == {1, 2}
    for seed in (1, 2):
        assert os.path.exists(os.path.join(out, f"seed{seed}.csv"))
        assert os.path.exists(os.path.join(out, f"seed{seed}.ckpt"))
    assert os.path.exists(os.path.join(out, "aggregate.csv"))


def test_run_experiment_csvs_bit_identical(tmp_path):
    cfg = _tiny_config(seeds=(1,), frames=64)
    out_a, out_b = str(tmp_path / "a"), str(tmp_path / "b")
    run_experiment(cfg, out_a)
    run_experiment(cfg, out_b)
    for name in ("seed1.csv", "aggregate.csv"):
        a = open(os.path.join(out_a, name), "rb").read()
        b = open(os.path.join(out_b, name), "rb").read()
        assert a == b


def test_no_intrinsic_forces_zero_beta():
    cfg = _tiny_config(method="NoIntrinsic")
    t = Trainer(cfg, 1)
    assert t.beta == 0.0
    row = t.train_iteration()
    assert row.raw_ir_mean == 0.0


# ---------------------------------------------------------------------------
# embedding probes
# ---------------------------------------------------------------------------


def test_probe_dataset_and_heads_smoke():
    spec = EnvSpec(task="DoorKey8")
    data = collect_probe_dataset(spec, seed=0, episodes=8)
    assert all(obs.shape[1:] == (7, 7, 3) for obs, _ in data)
    assert all(labels.shape[1] == 5 for _, labels in data)
    for _, labels in data:
        assert np.all((labels >= 0.0) & (labels <= 1.0))

    rng = np.random.default_rng(0)
    model = DiscModel(7, 7, rng, embed_dim=8, hidden=16, channels=(4, 8, 8))
    emb, labels = embed_dataset(model, data)
    assert emb.shape[0] == labels.shape[0] >= 200
    losses = probe_embeddings(emb, labels, np.random.default_rng(1), epochs=2)
    assert set(losses) == {name for name, _ in PROBE_TASKS}
    assert all(np.isfinite(v) for v in losses.values())
