"""Experiment configuration, ablation switching, and the CLI surface."""

import dataclasses
import json

import numpy as np
import pytest

from quadparkour.cli import (
    git_blob_sha1,
    main,
    network_shape,
    run_experiment,
)
from quadparkour.config import (
    ABLATABLE_REWARDS,
    AblationConfig,
    ExperimentConfig,
    NetworkConfig,
    RNG_STREAMS,
    TrainBlock,
    ablation_table,
    config_delta,
    parse_config,
    serialize_config,
)
from quadparkour.errors import ConfigError
from quadparkour.models import Policy, load_checkpoint
from quadparkour.rewards import REWARD_TERMS
from quadparkour.terrain import ObstacleSpec, generate, load_heightfield
from quadparkour.trainer import MASKABLE_INPUTS

TINY = """\
seed = 7

[network]
elevation_code = 8
history_code = 6
hidden = [16, 16]

[train]
total_iterations = 4
pretrain_iterations = 2
n_agents = 4
horizon = 3
epochs = 1
minibatches = 2
checkpoint_every = 2
"""


@pytest.fixture(scope="module")
def tiny_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("cfg") / "tiny.toml"
    path.write_text(TINY)
    return path


@pytest.fixture(scope="module")
def experiment(tiny_path, tmp_path_factory):
    out = tmp_path_factory.mktemp("exp")
    config = parse_config(str(tiny_path))
    report = run_experiment(config, out, source=tiny_path.read_bytes())
    return config, report, out


# ----------------------------------------------------------------------
# config parsing and round-trips

def test_round_trip_default():
    config = ExperimentConfig()
    assert parse_config(serialize_config(config)) == config


def test_round_trip_modified():
    rewards = dict(ExperimentConfig().rewards)
    rewards["trotting"] = 0.3
    config = ExperimentConfig(
        seed=11,
        network=NetworkConfig(elevation_code=16, history_code=8,
                              hidden=(64, 32)),
        train=TrainBlock(total_iterations=100, pretrain_iterations=10,
                         n_agents=8, learning_rate=1e-3),
        ablation=AblationConfig(input_masks=("joints_vel",),
                                reward_disables=("trotting",),
                                std_clip=False, pretrain=False),
        rewards=rewards)
    assert parse_config(serialize_config(config)) == config


def test_empty_file_is_default_config(tmp_path):
    path = tmp_path / "empty.toml"
    path.write_text("")
    assert parse_config(str(path)) == ExperimentConfig()


def test_unknown_key_reports_dotted_path():
    with pytest.raises(ConfigError, match="train.bogus"):
        parse_config("[train]\nbogus = 1\n")
    with pytest.raises(ConfigError, match="ablation.std_cap"):
        parse_config("[ablation]\nstd_cap = false\n")


def test_unknown_top_level_key_rejected():
    with pytest.raises(ConfigError, match="bogus"):
        parse_config("bogus = 1\n")


def test_malformed_toml_is_config_error():
    with pytest.raises(ConfigError):
        parse_config("seed = [unclosed\n")


def test_history_mask_reaches_training_config():
    config = parse_config('[ablation]\ninput_masks = ["history"]\n')
    assert config.to_train_config().masked_inputs == ("history",)


def test_zero_agents_rejected():
    with pytest.raises(ConfigError):
        parse_config("[train]\nn_agents = 0\n")


def test_unknown_reward_name_rejected():
    with pytest.raises(ConfigError):
        parse_config("[rewards]\nbogus_term = 1.0\n")
    with pytest.raises(ConfigError):
        parse_config('[ablation]\nreward_disables = ["goal_tracking"]\n')


def test_hash_deterministic_and_sensitive():
    a, b = ExperimentConfig(), ExperimentConfig()
    assert a.hash() == b.hash()
    assert len(a.hash()) == 16
    assert ExperimentConfig(seed=1).hash() != a.hash()


def test_rng_streams_are_named_and_stable():
    streams = ExperimentConfig(seed=3).rng_streams()
    assert tuple(streams) == RNG_STREAMS
    again = ExperimentConfig(seed=3).rng_streams()
    for name in RNG_STREAMS:
        assert streams[name].integers(0, 1 << 30) == \
            again[name].integers(0, 1 << 30)
    draws = {name: g.integers(0, 1 << 30) for name, g in streams.items()}
    assert len(set(draws.values())) == len(draws)


# ----------------------------------------------------------------------
# ablation matrix: every row is one config delta from the base

def test_ablation_tables_are_single_deltas():
    base = ExperimentConfig()
    expected = {
        "input": (8, "ablation.input_masks"),
        "reward": (11, "ablation.reward_disables"),
        "design": (3, None),
    }
    for table, (count, path) in expected.items():
        rows = ablation_table(table)
        assert len(rows) == count
        for name, config in rows.items():
            delta = config_delta(base, config)
            assert len(delta) == 1, (table, name, delta)
            if path is not None:
                assert delta == [path]


def test_input_rows_cover_every_maskable_input():
    rows = ablation_table("input")
    masked = {config.ablation.input_masks for config in rows.values()}
    assert masked == {(name,) for name in MASKABLE_INPUTS}


def test_reward_rows_cover_every_ablatable_term():
    rows = ablation_table("reward")
    disabled = {config.ablation.reward_disables for config in rows.values()}
    assert disabled == {(name,) for name in ABLATABLE_REWARDS}
    assert "goal_tracking" not in rows and "velocity_tracking" not in rows


def test_design_rows_materialize():
    rows = ablation_table("design")
    assert rows["std_clipping"].to_train_config().std_cap is False
    assert rows["pretraining"].to_train_config().pretrain_iterations == 0
    assert rows["batch_size_512"].to_train_config().n_agents == 512


def test_ablation_table_respects_base(tiny_path):
    base = parse_config(str(tiny_path))
    rows = ablation_table("input", base)
    for config in rows.values():
        assert config.seed == 7
        assert config.train.total_iterations == 4


def test_unknown_table_rejected():
    with pytest.raises(ConfigError):
        ablation_table("hardware")


# ----------------------------------------------------------------------
# experiment orchestration

def test_git_blob_hash_matches_git():
    # frozen oracles: the well-known git blob ids for "" and "hello\n"
    assert git_blob_sha1(b"") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391"
    assert git_blob_sha1(b"hello\n") == \
        "ce013625030ba8dba906f756967f9e9ca394464a"


def test_network_shape_applies_config_widths():
    config = ExperimentConfig(network=NetworkConfig(
        elevation_code=8, history_code=6, hidden=(16, 16)))
    shape = network_shape(config)
    assert shape.elev_code == 8
    assert shape.hist_code == 6
    assert shape.hidden == (16, 16)
    assert shape.proprio_dim == 51 and shape.n_actions == 12


def test_experiment_artifacts(experiment):
    config, report, out = experiment
    for name in ("config.toml", "metrics.csv", "metrics.digest",
                 "report.json", "checkpoint_final.bin"):
        assert (out / name).exists(), name
    assert report["config_hash"] == config.hash()
    assert report["iterations"] == 4
    assert report["input_blob"] == git_blob_sha1(TINY.encode())
    on_disk = json.loads((out / "report.json").read_text())
    assert on_disk["metrics_digest"] == report["metrics_digest"]
    assert parse_config(str(out / "config.toml")) == config


def test_checkpoint_embeds_config_hash(experiment):
    config, report, out = experiment
    policy = Policy(network_shape(config), seed=config.seed)
    tag = load_checkpoint(out / "checkpoint_final.bin", policy)
    assert tag == f"{config.hash()}|iteration=4"


def test_experiment_deterministic(experiment, tmp_path):
    config, report, _ = experiment
    again = run_experiment(config, tmp_path / "again")
    assert again["metrics_digest"] == report["metrics_digest"]
    assert again["config_hash"] == report["config_hash"]


# ----------------------------------------------------------------------
# CLI verbs and exit codes

def test_cli_train_and_resume(tiny_path, tmp_path):
    out = tmp_path / "run"
    assert main(["train", str(tiny_path), "--out", str(out)]) == 0
    rows = (out / "metrics.csv").read_text().strip().splitlines()
    assert len(rows) == 1 + 4
    ckpt = out / "checkpoint_000002.bin"
    assert ckpt.exists()
    assert main(["train", str(tiny_path), "--out", str(out),
                 "--resume", str(ckpt)]) == 0
    rows = (out / "metrics.csv").read_text().strip().splitlines()
    # resuming from the iteration-2 checkpoint appends iterations 2 and 3
    assert len(rows) == 1 + 4 + 2
    appended = [int(r.split(",")[0]) for r in rows[5:]]
    assert appended == [2, 3]


def test_cli_resume_rejects_other_config(tiny_path, tmp_path, experiment):
    _, _, out = experiment
    other = tmp_path / "other.toml"
    other.write_text(TINY.replace("seed = 7", "seed = 8"))
    code = main(["train", str(other), "--out", str(tmp_path / "r"),
                 "--resume", str(out / "checkpoint_final.bin")])
    assert code == 2


def test_cli_exit_code_bad_config(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text("bogus = 1\n")
    assert main(["train", str(bad), "--out", str(tmp_path / "x")]) == 2
    assert main(["train", str(tmp_path / "missing.toml")]) == 2


def test_cli_exit_code_runtime_fault(tmp_path):
    code = main(["eval", "barkour", "--checkpoint",
                 str(tmp_path / "missing.bin"), "--runs", "1"])
    assert code == 3


def test_cli_usage_error(capsys):
    with pytest.raises(SystemExit) as err:
        main(["not-a-verb"])
    assert err.value.code == 2
    capsys.readouterr()


def test_cli_terrain_gen_round_trip(tmp_path, monkeypatch):
    monkeypatch.setenv("QUADPARKOUR_OUT", str(tmp_path))
    assert main(["terrain", "gen", "--category", "Steps", "--level", "10",
                 "--seed", "3"]) == 0
    path = tmp_path / "steps_l10_s3.hf"
    assert path.exists()
    loaded = load_heightfield(path)
    direct = generate(ObstacleSpec("Steps", 10), seed=3)
    assert np.array_equal(loaded.heights, direct.heights)
    assert loaded.resolution == np.float32(direct.resolution)
    assert np.allclose(loaded.goal_waypoints, direct.goal_waypoints)
    assert loaded.category == "Steps"


def test_cli_terrain_gen_bad_level(tmp_path):
    code = main(["terrain", "gen", "--category", "Steps", "--level", "20",
                 "--out", str(tmp_path / "x.hf")])
    assert code == 2


def test_cli_ablate_writes_all_rows(tmp_path):
    out = tmp_path / "abl"
    assert main(["ablate", "--table", "reward", "--out", str(out)]) == 0
    index = json.loads((out / "index.json").read_text())
    assert len(index) == 11
    base = ExperimentConfig()
    for entry in index:
        config = parse_config(str(out / entry["config"]))
        assert config_delta(base, config) == entry["delta"]
        assert config.hash() == entry["config_hash"]


def test_cli_eval_barkour_outputs(experiment, tiny_path, tmp_path):
    _, _, run_dir = experiment
    out = tmp_path / "bark"
    code = main(["eval", "barkour",
                 "--checkpoint", str(run_dir / "checkpoint_final.bin"),
                 "--config", str(tiny_path), "--runs", "1",
                 "--out", str(out)])
    assert code == 0
    report = json.loads((out / "barkour.json").read_text())
    assert len(report["runs"]) == 1
    rows = (out / "barkour_runs.csv").read_text().strip().splitlines()
    assert rows[0].startswith("run,completed,t_run")
    assert len(rows) == 2


def test_cli_replay_csv(experiment, tiny_path, tmp_path):
    _, _, run_dir = experiment
    out = tmp_path / "rep"
    code = main(["replay",
                 "--checkpoint", str(run_dir / "checkpoint_final.bin"),
                 "--config", str(tiny_path), "--out", str(out)])
    assert code == 0
    rows = (out / "replay_s0.csv").read_text().strip().splitlines()
    assert rows[0] == "time,x,y,stumble"
    assert len(rows) > 10
    first = rows[1].split(",")
    assert float(first[0]) == pytest.approx(0.02)


def test_cli_sweep_bad_grid(experiment, tiny_path):
    _, _, run_dir = experiment
    code = main(["eval", "sweep",
                 "--checkpoint", str(run_dir / "checkpoint_final.bin"),
                 "--config", str(tiny_path), "--category", "Flat",
                 "--grid", "0.1,oops"])
    assert code == 2
