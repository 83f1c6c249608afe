"""
Long training runs; deselect with -m "not slow"
"""
from __future__ import annotations
import math
import time
import numpy as np
import pytest
from pokelab.dynamics.trainer import latent_norm_trace, train
from pokelab.evaluation.experiment import run_experiment, training_set
from pokelab.evaluation.summary import paired_sign_test
from pokelab.model import ArenaParams, ExperimentConfig, GlobalConfig, PlannerConfig, TrainConfig
from pokelab.planner import model_policy
from pokelab.sim.physics import random_pose

pytestmark = pytest.mark.slow


@pytest.fixture(scope="module")
def inverse_run():
    config = GlobalConfig(experiment=ExperimentConfig(data_seed=7))
    return train(training_set(20_000, config), config.train, tag="inverse")


def test_inverse_model_beats_chance(inverse_run):
    final = inverse_run.log[-1]
    assert final.heldout_loc_acc >= 5 / 400
    assert final.heldout_angle_acc >= 3 / 36
    assert final.heldout_len_acc >= 2 / 11
    assert inverse_run.log[5].train_loss < inverse_run.log[0].train_loss


def test_poke_direction_follows_goal(inverse_run):
    arena = ArenaParams()
    rng = np.random.Generator(np.random.PCG64(99))
    rightward = 0
    trials = 0
    while trials < 100:
        init = random_pose(arena, rng)
        if init.cx + 20 > 45:
            continue
        goal = init.translated(20.0, 0.0)
        poke = model_policy(inverse_run.model, goal, arena, PlannerConfig())(init)
        trials += 1
        if not poke.is_nopoke and math.cos(poke.motion_angle) > 0:
            rightward += 1
    assert rightward >= 80


def collapse_data():
    arena = ArenaParams(arena_size=36)
    return training_set(2_000, GlobalConfig(arena=arena))


def test_forward_loss_alone_collapses_features():
    config = TrainConfig(inverse_weight=0.0, detach_target=False, lambda_=1.0, learning_rate=1e-3, latent_dim=32)
    trace = latent_norm_trace(collapse_data(), config, steps=2_000)
    assert trace[-1] < 0.01 * trace[0]


def test_joint_training_keeps_features():
    config = TrainConfig(learning_rate=1e-3, latent_dim=32)
    trace = latent_norm_trace(collapse_data(), config, steps=2_000)
    assert trace[-1] > 0.1 * trace[0]


def headline_errors(rows, model):
    return {r.episode: r.rel_loc_err[min(5, r.pokes)] for r in rows if r.model == model}


def compare_joint_and_inverse(size: int):
    config = GlobalConfig(experiment=ExperimentConfig(train_sizes=[size], models=["joint", "inverse"]),
                          planner=PlannerConfig(max_pokes=10))
    rows = run_experiment(config, jobs=4)
    joint, inverse = headline_errors(rows, "joint"), headline_errors(rows, "inverse")
    episodes = sorted(joint)
    assert len(episodes) >= 200
    a, b = [joint[e] for e in episodes], [inverse[e] for e in episodes]
    wins, losses, _, p = paired_sign_test(a, b)
    return float(np.mean(a)), float(np.mean(b)), wins, losses, p


@pytest.mark.parametrize("size", [10_000, 20_000])
def test_joint_model_wins_with_little_data(size):
    joint, inverse, wins, losses, p = compare_joint_and_inverse(size)
    assert joint < inverse
    assert wins > losses
    assert p < 0.05


def test_models_reach_parity_with_plenty_of_data():
    *_, p = compare_joint_and_inverse(50_000)
    assert p >= 0.05


def test_smoke_configuration_finishes_quickly():
    config = GlobalConfig(experiment=ExperimentConfig(train_sizes=[2_000, 5_000], episodes=50))
    started = time.perf_counter()
    rows = run_experiment(config, jobs=4)
    elapsed = time.perf_counter() - started
    assert len(rows) == 2 * 3 * 50
    assert all(r.rel_loc_err[0] == 1.0 and r.pokes <= 10 for r in rows)
    assert elapsed <= 15 * 60
