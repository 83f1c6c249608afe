from __future__ import annotations
import math
import numpy as np
import pytest
from pokelab.dynamics.actions import (ANGLE_BINS, LEN_BINS, LOC_BINS, NOPOKE_BIN, DiscretizedAction, discretize,
                                      encode_poke, targets_from_rows, undiscretize)
from pokelab.dynamics.diagnostics import check_joint_gradients
from pokelab.dynamics.network import (ENCODER_LAYERS, FORWARD_LAYERS, INVERSE_LAYERS, LAYER_ORDER, ModelParams,
                                      PokeModel, joint_loss, make_batch)
from pokelab.dynamics.trainer import Trainer, split_indices, train, with_nopokes, write_training_log
from pokelab.exceptions import CheckpointError, DivergenceError, NonFiniteError, ShapeError
from pokelab.model import TrainConfig
from pokelab.nn.checkpoint import save_checkpoint
from pokelab.nn.gradcheck import grad_check
from pokelab.nn.losses import softmax
from pokelab.sim.geometry import Pose, Poke
from pokelab.sim.render import render


class TestDiscretize:
    def test_location_grid_is_row_major(self, arena):
        assert discretize(Poke(px=0.5, py=0.5, theta=0, length=8), arena).loc_bin == 0
        assert discretize(Poke(px=63.9, py=63.9, theta=0, length=8), arena).loc_bin == LOC_BINS - 1
        assert discretize(Poke(px=10, py=20, theta=0, length=8), arena).loc_bin == 6 * 20 + 3

    def test_angle_and_length_bins(self, arena):
        a = discretize(Poke(px=5, py=5, theta=0.05, length=arena.l_min), arena)
        assert (a.angle_bin, a.len_bin) == (0, 0)
        b = discretize(Poke(px=5, py=5, theta=2 * math.pi - 0.01, length=arena.l_max), arena)
        assert (b.angle_bin, b.len_bin) == (ANGLE_BINS - 1, 9)
        assert discretize(Poke(px=5, py=5, theta=1.0, length=12.0), arena).len_bin == 5

    def test_nopoke_round_trip(self, arena):
        action = discretize(Poke.nopoke(), arena)
        assert action.len_bin == NOPOKE_BIN
        assert action.is_nopoke
        assert undiscretize(action, arena).is_nopoke

    def test_undiscretize_stays_within_half_a_bin(self, arena, rng):
        for _ in range(100):
            poke = Poke(px=rng.uniform(0, 64), py=rng.uniform(0, 64), theta=rng.uniform(0, 2 * math.pi),
                        length=rng.uniform(arena.l_min, arena.l_max))
            back = undiscretize(discretize(poke, arena), arena)
            assert abs(back.px - poke.px) <= 1.6 + 1e-9
            assert abs(back.py - poke.py) <= 1.6 + 1e-9
            assert abs(back.theta - poke.theta) <= math.pi / 36 + 1e-9
            assert abs(back.length - poke.length) <= 0.8 + 1e-9
            assert 0 <= back.px <= 64 and 0 <= back.py <= 64

    def test_vectorised_targets_agree(self, tiny_dataset):
        rows = tiny_dataset.rows()
        targets = targets_from_rows(rows, tiny_dataset.params)
        for i in range(len(tiny_dataset)):
            a = discretize(tiny_dataset.read_record(i).poke, tiny_dataset.params)
            assert tuple(targets[i]) == (a.loc_bin, a.angle_bin, a.len_bin)

    def test_action_encoding(self, arena):
        u = encode_poke(Poke(px=64, py=0, theta=0, length=arena.l_max), arena)
        np.testing.assert_allclose(u, [1.0, -1.0, 1.0, 0.0, 1.0])
        np.testing.assert_array_equal(encode_poke(Poke.nopoke(), arena), [0, 0, 0, 0, -1])


class TestNetwork:
    def test_output_shapes(self, random_model, small_arena):
        x = random_model.encode(render(Pose(cx=18, cy=18, theta=0.4), small_arena))
        assert x.shape == (16,)
        loc, ang, ln = random_model.inverse_predict(x, x)
        assert (loc.shape, ang.shape, ln.shape) == ((LOC_BINS,), (ANGLE_BINS,), (LEN_BINS,))
        assert random_model.forward_predict(x, Poke(px=18, py=18, theta=0, length=8)).shape == (16,)

    def test_encoder_sees_translation(self, random_model, small_arena):
        pose = Pose(cx=16, cy=18, theta=0.4)
        x = random_model.encode(render(pose, small_arena))
        shifted = random_model.encode(render(pose.translated(4, 0), small_arena))
        np.testing.assert_array_equal(x, random_model.encode(render(pose, small_arena)))
        assert not np.allclose(x, shifted)

    def test_zero_heads_give_uniform_logits(self, small_arena, rng):
        model = PokeModel.create(small_arena, latent_dim=16, seed=1)
        for name in INVERSE_LAYERS[1:]:
            model.params[name].weights[:] = 0.0
            model.params[name].biases[:] = 0.0
        x = rng.normal(size=16)
        for logits, k in zip(model.inverse_predict(x, x), (LOC_BINS, ANGLE_BINS, LEN_BINS)):
            np.testing.assert_allclose(softmax(logits)[0], 1.0 / k)

    def test_angle_logits_follow_location_conditioning(self, random_model, rng):
        x_t, x_g = rng.normal(size=16), rng.normal(size=16)
        _, ang_a, len_a = random_model.inverse_predict(x_t, x_g, loc_bin=3, angle_bin=0)
        _, ang_b, len_b = random_model.inverse_predict(x_t, x_g, loc_bin=250, angle_bin=0)
        assert not np.allclose(ang_a, ang_b)
        assert not np.allclose(len_a, len_b)

    def test_zero_forward_head_predicts_zero(self, small_arena, rng):
        model = PokeModel.create(small_arena, latent_dim=16, seed=1)
        for name in FORWARD_LAYERS:
            model.params[name].weights[:] = 0.0
            model.params[name].biases[:] = 0.0
        x_hat = model.forward_predict(rng.normal(size=16), Poke(px=18, py=18, theta=1.0, length=10))
        np.testing.assert_array_equal(x_hat, np.zeros(16))

    def test_image_size_mismatch(self, random_model):
        with pytest.raises(ShapeError):
            random_model.encode(np.zeros((64, 64)))

    def test_argmax_prediction_is_deterministic(self, random_model, rng):
        x_t, x_g = rng.normal(size=16), rng.normal(size=16)
        a = random_model.predict_action(x_t, x_g)
        b = random_model.predict_action(x_t, x_g)
        assert a == b
        assert isinstance(a, DiscretizedAction)

    def test_sampled_prediction_follows_seed(self, random_model, rng):
        x_t, x_g = rng.normal(size=16), rng.normal(size=16)
        draws = [random_model.predict_action(x_t, x_g, selection="sample",
                                             rng=np.random.Generator(np.random.PCG64(3))) for _ in range(2)]
        assert draws[0] == draws[1]

    def test_loss_is_additive_in_lambda(self, random_model, tiny_dataset):
        batch = make_batch(tiny_dataset.rows()[:100], tiny_dataset.params)
        with_fwd = joint_loss(random_model.params, batch, 0.1, backward=False)
        inverse_only = joint_loss(random_model.params, batch, 0.0, backward=False)
        assert with_fwd.total - inverse_only.total == pytest.approx(0.1 * with_fwd.forward, rel=1e-10)
        assert inverse_only.total == pytest.approx(inverse_only.loc_ce + inverse_only.angle_ce + inverse_only.len_ce)

    def test_nopoke_rows_only_train_length(self, random_model, tiny_dataset, rng):
        rows = with_nopokes(tiny_dataset.rows()[:4], 1.0, rng)
        parts = joint_loss(random_model.params, make_batch(rows, tiny_dataset.params), 0.1, backward=False)
        assert parts.loc_ce == 0.0
        assert parts.angle_ce == 0.0
        assert parts.len_ce > 0.0

    def test_chunked_gradient_matches_single_pass(self, tiny_dataset):
        batch = make_batch(tiny_dataset.rows()[:12], tiny_dataset.params)
        grads = []
        for jobs in (1, 3):
            model = PokeModel.create(tiny_dataset.params, latent_dim=16, seed=0)
            with Trainer(model, TrainConfig(jobs=jobs, latent_dim=16)) as trainer:
                trainer.gradient(batch)
            grads.append([g.copy() for p in model.params.ordered() for g in p.grads()])
        for a, b in zip(*grads):
            np.testing.assert_allclose(a, b, rtol=1e-9, atol=1e-12)

    def test_joint_gradients(self, small_arena):
        result = check_joint_gradients(small_arena, latent_dim=8, batch_size=3, fraction=0.02)
        assert set(result.by_name()) >= {"conv1.weights", "inv_len.biases", "fwd_out.weights"}
        assert result.worst < 1e-4

    @pytest.mark.parametrize("seed", [0, 3, 7])
    def test_joint_gradients_full_size(self, arena, seed):
        result = check_joint_gradients(arena, seed=seed)
        assert len(result.per_array) == 2 * len(LAYER_ORDER)
        assert all(n > 0 for n in result.checked)
        assert result.worst < 1e-4

    def test_target_branch_gradient(self, small_arena, tiny_dataset):
        batch = make_batch(tiny_dataset.rows()[:4], tiny_dataset.params)
        params = ModelParams.initialize(small_arena.arena_size, 8, np.random.Generator(np.random.PCG64(2)))

        def forward_only(detach: bool):
            def objective(backward: bool):
                parts = joint_loss(params, batch, 1.0, backward=backward, detach_target=detach,
                                   inverse_weight=0.0, record_pattern=True)
                return parts.total, parts.pattern
            return objective

        encoder = params.ordered(ENCODER_LAYERS)
        attached = grad_check(forward_only(False), encoder, np.random.Generator(np.random.PCG64(5)), fraction=0.1)
        detached = grad_check(forward_only(True), encoder, np.random.Generator(np.random.PCG64(5)), fraction=0.1)
        assert attached.worst < 1e-4
        assert detached.worst > 1e-2

    def test_save_and_load(self, random_model, temp_dir, rng):
        path = temp_dir / "m.pokm"
        random_model.save(path)
        loaded = PokeModel.load(path)
        assert loaded.meta == random_model.meta
        x_t, x_g = rng.normal(size=16), rng.normal(size=16)
        assert loaded.predict_action(x_t, x_g) == random_model.predict_action(x_t, x_g)
        for a, b in zip(loaded.params.named_arrays(), random_model.params.named_arrays()):
            np.testing.assert_array_equal(a[1], b[1])

    def test_load_rejects_foreign_checkpoint(self, temp_dir):
        path = temp_dir / "other.pokm"
        save_checkpoint(path, {"format": "something-else"}, [])
        with pytest.raises(CheckpointError):
            PokeModel.load(path)


class TestTrainer:
    def test_heldout_split_is_stable(self):
        train_a, held_a = split_indices(1000)
        train_b, held_b = split_indices(1000)
        np.testing.assert_array_equal(held_a, held_b)
        assert 50 <= len(held_a) <= 150
        assert len(train_a) + len(held_a) == 1000
        assert not set(train_a) & set(held_a)

    def test_nopoke_augmentation(self, tiny_dataset, rng):
        rows = tiny_dataset.rows()[:20]
        assert with_nopokes(rows, 0.0, rng) is rows
        out = with_nopokes(rows, 1.0, rng)
        np.testing.assert_array_equal(out[:, 8:11], out[:, 0:3])
        assert np.all(out[:, 7] == 1.0)
        assert np.all(rows[:, 7] == 0.0)

    def test_train_logs_every_epoch(self, tiny_dataset, temp_dir):
        config = TrainConfig(epochs=2, batch_size=16, latent_dim=16, learning_rate=1e-3)
        seen = []
        result = train(tiny_dataset, config, on_epoch=seen.append)
        assert [s.epoch for s in result.log] == [0, 1, 2]
        assert seen == result.log
        assert all(np.isfinite(s.train_loss) for s in result.log)
        assert result.model.meta.train_size == len(tiny_dataset)
        path = temp_dir / "log.csv"
        write_training_log(path, result.log, '{"a":1}')
        lines = path.read_text().splitlines()
        assert lines[0] == '# config: {"a":1}'
        assert lines[1].startswith("epoch,train_loss,heldout_loss")
        assert len(lines) == 2 + 3

    def test_training_is_deterministic(self, tiny_dataset):
        config = TrainConfig(epochs=1, batch_size=16, latent_dim=16, seed=4)
        a = train(tiny_dataset, config).model
        b = train(tiny_dataset, config).model
        for (_, x), (_, y) in zip(a.params.named_arrays(), b.params.named_arrays()):
            np.testing.assert_array_equal(x, y)

    def test_inverse_tag_forces_zero_lambda(self, tiny_dataset):
        config = TrainConfig(epochs=1, batch_size=32, latent_dim=16)
        model = train(tiny_dataset, config, tag="inverse").model
        assert model.meta.lambda_ == 0.0
        assert model.meta.tag == "inverse"

    def test_divergence_reports_epoch(self, tiny_dataset, monkeypatch):
        def exploding(*args, **kwargs):
            raise NonFiniteError("non-finite joint loss: nan")

        monkeypatch.setattr("pokelab.dynamics.trainer.joint_loss", exploding)
        with pytest.raises(DivergenceError) as exc:
            train(tiny_dataset, TrainConfig(epochs=1, latent_dim=16))
        assert exc.value.epoch == 0
