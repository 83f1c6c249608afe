"""Siamese encoder with an inverse head (three chained classifiers) and a
forward head predicting the next latent state, trained jointly on
L_inv + λ·L_fwd."""
from __future__ import annotations
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple
import numpy as np
from pydantic import BaseModel, ConfigDict
from ..exceptions import CheckpointError, NonFiniteError, ShapeError
from ..model import ArenaParams
from ..nn import checkpoint as ckpt
from ..nn.layers import (LayerParams, conv2d, conv2d_backward, conv_output_size, dense, dense_backward,
                         init_conv, init_dense, relu, relu_backward)
from ..nn.losses import l1_loss, softmax, softmax_cross_entropy
from ..sim.geometry import Poke
from ..sim.render import render_batch
from ..types import Selection
from .actions import (ACTION_DIM, ANGLE_BINS, LEN_BINS, LOC_BINS, NOPOKE_BIN, DiscretizedAction,
                      encode_poke, encode_rows, targets_from_rows, undiscretize)

# name, out_channels, kernel, stride
ENCODER_CONVS = (("conv1", 16, 8, 4), ("conv2", 32, 4, 2), ("conv3", 32, 3, 1))
TRUNK_WIDTH = 128
FORWARD_WIDTH = 128
LAYER_ORDER = ("conv1", "conv2", "conv3", "enc_fc",
               "inv_trunk", "inv_loc", "inv_angle", "inv_len",
               "fwd_hidden", "fwd_out")
ENCODER_LAYERS = LAYER_ORDER[:4]
INVERSE_LAYERS = LAYER_ORDER[4:8]
FORWARD_LAYERS = LAYER_ORDER[8:]


def encoder_flat_size(image_size: int) -> int:
    size, channels = image_size, 1
    for _, out_ch, k, stride in ENCODER_CONVS:
        if size < k:
            raise ShapeError(f"image size {image_size} too small for the encoder")
        size = conv_output_size(size, k, stride)
        channels = out_ch
    return channels * size * size


@dataclass
class ModelParams:
    layers: Dict[str, LayerParams]

    @classmethod
    def initialize(cls, image_size: int, latent_dim: int, rng: np.random.Generator) -> "ModelParams":
        layers: Dict[str, LayerParams] = {}
        in_ch = 1
        for name, out_ch, k, _ in ENCODER_CONVS:
            layers[name] = init_conv(in_ch, out_ch, k, rng)
            in_ch = out_ch
        layers["enc_fc"] = init_dense(encoder_flat_size(image_size), latent_dim, rng)
        layers["inv_trunk"] = init_dense(2 * latent_dim, TRUNK_WIDTH, rng)
        layers["inv_loc"] = init_dense(TRUNK_WIDTH, LOC_BINS, rng)
        layers["inv_angle"] = init_dense(TRUNK_WIDTH + LOC_BINS, ANGLE_BINS, rng)
        layers["inv_len"] = init_dense(TRUNK_WIDTH + LOC_BINS + ANGLE_BINS, LEN_BINS, rng)
        layers["fwd_hidden"] = init_dense(latent_dim + ACTION_DIM, FORWARD_WIDTH, rng)
        layers["fwd_out"] = init_dense(FORWARD_WIDTH, latent_dim, rng)
        return cls(layers)

    def __getitem__(self, name: str) -> LayerParams:
        return self.layers[name]

    def ordered(self, names=LAYER_ORDER) -> List[LayerParams]:
        return [self.layers[n] for n in names]

    @property
    def latent_dim(self) -> int:
        return self.layers["enc_fc"].weights.shape[0]

    def zero_grad(self) -> None:
        for p in self.layers.values():
            p.zero_grad()

    def shadow(self) -> "ModelParams":
        return ModelParams({n: p.shadow() for n, p in self.layers.items()})

    def accumulate(self, other: "ModelParams", scale: float = 1.0) -> None:
        for n in LAYER_ORDER:
            self.layers[n].grad_weights += scale * other.layers[n].grad_weights
            self.layers[n].grad_biases += scale * other.layers[n].grad_biases

    def copy(self) -> "ModelParams":
        return ModelParams({n: LayerParams(p.weights.copy(), p.biases.copy()) for n, p in self.layers.items()})

    def named_arrays(self) -> List[Tuple[str, np.ndarray]]:
        out = []
        for n in LAYER_ORDER:
            out.append((f"{n}.weights", self.layers[n].weights))
            out.append((f"{n}.biases", self.layers[n].biases))
        return out


# ---------------------------------------------------------------- encoder

def _as_nchw(images: np.ndarray) -> np.ndarray:
    images = np.asarray(images, dtype=np.float64)
    if images.ndim == 2:
        images = images[None]
    if images.ndim == 3:
        images = images[:, None]
    return images


def encode_forward(params: ModelParams, images: np.ndarray):
    x = _as_nchw(images)
    caches = []
    for name, _, _, stride in ENCODER_CONVS:
        x, c_conv = conv2d(x, params[name], stride)
        x, c_relu = relu(x)
        caches.append((c_conv, c_relu))
    conv_shape = x.shape
    z, c_fc = dense(x.reshape(x.shape[0], -1), params["enc_fc"])
    return z, (caches, conv_shape, c_fc)


def encode_backward(params: ModelParams, dz: np.ndarray, cache) -> None:
    caches, conv_shape, c_fc = cache
    dx = dense_backward(dz, c_fc, params["enc_fc"]).reshape(conv_shape)
    for (name, _, _, _), (c_conv, c_relu) in zip(reversed(ENCODER_CONVS), reversed(caches)):
        dx = relu_backward(dx, c_relu)
        dx = conv2d_backward(dx, c_conv, params[name])


# ------------------------------------------------------------ inverse head

def _one_hot(indices: np.ndarray, k: int, active: Optional[np.ndarray] = None) -> np.ndarray:
    out = np.zeros((len(indices), k))
    out[np.arange(len(indices)), indices] = 1.0
    if active is not None:
        out[~active] = 0.0
    return out


def inverse_forward(params: ModelParams, x_t: np.ndarray, x_t1: np.ndarray,
                    loc_cond: np.ndarray, angle_cond: np.ndarray):
    """Logits for the three heads given the conditioning one-hots."""
    d = params.latent_dim
    if x_t.shape[-1] != d or x_t1.shape[-1] != d:
        raise ShapeError(f"latents must have length {d}")
    h, c_trunk = dense(np.concatenate([x_t, x_t1], axis=1), params["inv_trunk"])
    h, c_relu = relu(h)
    loc, c_loc = dense(h, params["inv_loc"])
    ang, c_ang = dense(np.concatenate([h, loc_cond], axis=1), params["inv_angle"])
    ln, c_len = dense(np.concatenate([h, loc_cond, angle_cond], axis=1), params["inv_len"])
    return (loc, ang, ln), (c_trunk, c_relu, c_loc, c_ang, c_len)


def inverse_backward(params: ModelParams, dloc, dang, dlen, cache) -> Tuple[np.ndarray, np.ndarray]:
    c_trunk, c_relu, c_loc, c_ang, c_len = cache
    dh = dense_backward(dloc, c_loc, params["inv_loc"])
    dh = dh + dense_backward(dang, c_ang, params["inv_angle"])[:, :TRUNK_WIDTH]
    dh = dh + dense_backward(dlen, c_len, params["inv_len"])[:, :TRUNK_WIDTH]
    dcat = dense_backward(relu_backward(dh, c_relu), c_trunk, params["inv_trunk"])
    d = params.latent_dim
    return dcat[:, :d], dcat[:, d:]


def _choose(logits: np.ndarray, selection: Selection, temperature: float,
            rng: Optional[np.random.Generator]) -> int:
    if selection == "argmax":
        return int(np.argmax(logits))
    if rng is None:
        raise ValueError("sampled selection needs an rng")
    probs = softmax(logits, temperature)[0]
    return int(rng.choice(len(probs), p=probs))


def inverse_predict(params: ModelParams, x_t: np.ndarray, x_t1: np.ndarray,
                    loc_bin: Optional[int] = None, angle_bin: Optional[int] = None,
                    selection: Selection = "argmax", temperature: float = 1.0,
                    rng: Optional[np.random.Generator] = None) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(400, 36, 11) logits for one pair of latents.

    Angle logits are conditioned on `loc_bin` and length logits on both bins;
    bins left as None are chosen from the previous head (argmax or sampled).
    """
    logits, _ = _predict_chain(params, x_t, x_t1, loc_bin, angle_bin, selection, temperature, rng)
    return logits


def predict_action(params: ModelParams, x_t: np.ndarray, x_t1: np.ndarray,
                   selection: Selection = "argmax", temperature: float = 1.0,
                   rng: Optional[np.random.Generator] = None) -> DiscretizedAction:
    """Location, then angle given location, then length given both."""
    _, bins = _predict_chain(params, x_t, x_t1, None, None, selection, temperature, rng, choose_len=True)
    return DiscretizedAction(loc_bin=bins[0], angle_bin=bins[1], len_bin=bins[2])


def _predict_chain(params, x_t, x_t1, loc_bin, angle_bin, selection, temperature, rng, choose_len=False):
    x_t = np.asarray(x_t, dtype=np.float64).reshape(1, -1)
    x_t1 = np.asarray(x_t1, dtype=np.float64).reshape(1, -1)
    zeros_loc, zeros_ang = np.zeros((1, LOC_BINS)), np.zeros((1, ANGLE_BINS))
    (loc, _, _), _ = inverse_forward(params, x_t, x_t1, zeros_loc, zeros_ang)
    if loc_bin is None:
        loc_bin = _choose(loc, selection, temperature, rng)
    loc_cond = _one_hot(np.array([loc_bin]), LOC_BINS)
    (_, ang, _), _ = inverse_forward(params, x_t, x_t1, loc_cond, zeros_ang)
    if angle_bin is None:
        angle_bin = _choose(ang, selection, temperature, rng)
    (_, _, ln), _ = inverse_forward(params, x_t, x_t1, loc_cond, _one_hot(np.array([angle_bin]), ANGLE_BINS))
    len_bin = _choose(ln, selection, temperature, rng) if choose_len else None
    return (loc[0], ang[0], ln[0]), (loc_bin, angle_bin, len_bin)


# ------------------------------------------------------------ forward head

def forward_forward(params: ModelParams, x_t: np.ndarray, actions: np.ndarray):
    h, c_hidden = dense(np.concatenate([x_t, actions], axis=1), params["fwd_hidden"])
    h, c_relu = relu(h)
    x_hat, c_out = dense(h, params["fwd_out"])
    return x_hat, (c_hidden, c_relu, c_out)


def forward_backward(params: ModelParams, dx_hat: np.ndarray, cache) -> np.ndarray:
    c_hidden, c_relu, c_out = cache
    dh = relu_backward(dense_backward(dx_hat, c_out, params["fwd_out"]), c_relu)
    return dense_backward(dh, c_hidden, params["fwd_hidden"])[:, :params.latent_dim]


def forward_predict(params: ModelParams, x_t: np.ndarray, poke: Poke, arena: ArenaParams) -> np.ndarray:
    u = encode_poke(poke, arena).reshape(1, -1)
    x_hat, _ = forward_forward(params, np.asarray(x_t, dtype=np.float64).reshape(1, -1), u)
    return x_hat[0]


# ------------------------------------------------------------- joint loss

@dataclass
class Batch:
    images_t: np.ndarray
    images_t1: np.ndarray
    actions: np.ndarray
    targets: np.ndarray

    def __len__(self) -> int:
        return self.images_t.shape[0]

    def slice(self, start: int, stop: int) -> "Batch":
        return Batch(self.images_t[start:stop], self.images_t1[start:stop],
                     self.actions[start:stop], self.targets[start:stop])


def make_batch(rows: np.ndarray, arena: ArenaParams) -> Batch:
    """Render both poses of every (N, 11) record row and discretize its poke."""
    rows = np.asarray(rows, dtype=np.float64).reshape(-1, 11)
    return Batch(
        images_t=render_batch(rows[:, 0:3], arena)[:, None],
        images_t1=render_batch(rows[:, 8:11], arena)[:, None],
        actions=encode_rows(rows, arena),
        targets=targets_from_rows(rows, arena),
    )


@dataclass
class LossParts:
    total: float
    inverse: float
    forward: float
    loc_ce: float = 0.0
    angle_ce: float = 0.0
    len_ce: float = 0.0
    latents_t: Optional[np.ndarray] = field(default=None, repr=False)
    logits: Optional[Tuple[np.ndarray, np.ndarray, np.ndarray]] = field(default=None, repr=False)
    pattern: Optional[np.ndarray] = field(default=None, repr=False)


def activation_pattern(enc_cache, inv_cache, fwd_cache, l1_grad: np.ndarray) -> np.ndarray:
    """Every ReLU mask and L1 sign of one evaluation, flattened to int8."""
    caches, _, _ = enc_cache
    masks = [c_relu["mask"] for _, c_relu in caches] + [inv_cache[1]["mask"], fwd_cache[1]["mask"]]
    parts = [m.reshape(-1).astype(np.int8) for m in masks]
    parts.append(np.sign(l1_grad).reshape(-1).astype(np.int8))
    return np.concatenate(parts)


def joint_loss(params: ModelParams, batch: Batch, lam: float, *, backward: bool = True,
               detach_target: bool = True, inverse_weight: float = 1.0, scale: float = 1.0,
               record_pattern: bool = False) -> LossParts:
    """L = inverse_weight·(CE_loc + CE_angle + CE_len) + λ·L1(x̂_{t+1}, x_{t+1}).

    Heads are teacher-forced with the ground-truth bins. No-poke rows train only
    the length head. With `detach_target` the x_{t+1} branch receives no forward
    loss gradient. Gradients (multiplied by `scale`) accumulate into `params`.
    """
    n = len(batch)
    z, enc_cache = encode_forward(params, np.concatenate([batch.images_t, batch.images_t1], axis=0))
    x_t, x_t1 = z[:n], z[n:]

    loc_t, ang_t, len_t = batch.targets[:, 0], batch.targets[:, 1], batch.targets[:, 2]
    poked = len_t != NOPOKE_BIN
    loc_cond = _one_hot(loc_t, LOC_BINS, poked)
    ang_cond = _one_hot(ang_t, ANGLE_BINS, poked)
    (loc, ang, ln), inv_cache = inverse_forward(params, x_t, x_t1, loc_cond, ang_cond)
    mask = poked.astype(np.float64)
    ce_loc, g_loc = softmax_cross_entropy(loc, loc_t, mask)
    ce_ang, g_ang = softmax_cross_entropy(ang, ang_t, mask)
    ce_len, g_len = softmax_cross_entropy(ln, len_t)
    l_inv = ce_loc + ce_ang + ce_len

    x_hat, fwd_cache = forward_forward(params, x_t, batch.actions)
    l_fwd, g_fwd = l1_loss(x_hat, x_t1)
    total = inverse_weight * l_inv + lam * l_fwd
    if not np.isfinite(total):
        raise NonFiniteError(f"non-finite joint loss: {total}")

    if backward:
        iw = inverse_weight * scale
        dx_t, dx_t1 = inverse_backward(params, iw * g_loc, iw * g_ang, iw * g_len, inv_cache)
        dx_t = dx_t + forward_backward(params, lam * scale * g_fwd, fwd_cache)
        if not detach_target:
            dx_t1 = dx_t1 - lam * scale * g_fwd
        encode_backward(params, np.concatenate([dx_t, dx_t1], axis=0), enc_cache)

    return LossParts(total=total, inverse=l_inv, forward=l_fwd, loc_ce=ce_loc, angle_ce=ce_ang,
                     len_ce=ce_len, latents_t=x_t, logits=(loc, ang, ln),
                     pattern=activation_pattern(enc_cache, inv_cache, fwd_cache, g_fwd) if record_pattern else None)


# ------------------------------------------------------------------ model

class ModelMeta(BaseModel):
    model_config = ConfigDict(frozen=True)

    tag: str = "joint"
    lambda_: float = 0.1
    latent_dim: int = 128
    arena: ArenaParams = ArenaParams()
    seed: int = 0
    train_size: int = 0
    config_json: str = "{}"


class PokeModel:
    """Trained parameters plus the arena they were trained for."""

    def __init__(self, params: ModelParams, meta: ModelMeta) -> None:
        self.params = params
        self.meta = meta

    @classmethod
    def create(cls, arena: ArenaParams, latent_dim: int = 128, seed: int = 0, tag: str = "joint",
               lambda_: float = 0.1) -> "PokeModel":
        rng = np.random.Generator(np.random.PCG64(seed))
        params = ModelParams.initialize(arena.arena_size, latent_dim, rng)
        return cls(params, ModelMeta(tag=tag, lambda_=lambda_, latent_dim=latent_dim, arena=arena, seed=seed))

    @property
    def arena(self) -> ArenaParams:
        return self.meta.arena

    def check_image(self, image: np.ndarray) -> None:
        size = self.arena.arena_size
        if image.shape[-2:] != (size, size):
            raise ShapeError(f"image must be {size}x{size}, got {image.shape[-2:]}")

    def encode(self, image: np.ndarray) -> np.ndarray:
        image = np.asarray(image, dtype=np.float64)
        self.check_image(image)
        z, _ = encode_forward(self.params, image)
        return z[0]

    def inverse_predict(self, x_t, x_t1, **kwargs):
        return inverse_predict(self.params, x_t, x_t1, **kwargs)

    def forward_predict(self, x_t, poke: Poke) -> np.ndarray:
        return forward_predict(self.params, x_t, poke, self.arena)

    def predict_action(self, x_t, x_goal, selection: Selection = "argmax", temperature: float = 1.0,
                       rng: Optional[np.random.Generator] = None) -> DiscretizedAction:
        return predict_action(self.params, x_t, x_goal, selection, temperature, rng)

    def predict_poke(self, x_t, x_goal, **kwargs) -> Poke:
        return undiscretize(self.predict_action(x_t, x_goal, **kwargs), self.arena)

    def save(self, path: str | Path) -> None:
        descriptor = {
            "format": "pokelab-model",
            "meta": self.meta.model_dump(mode="json"),
            "layers": [[n, list(self.params[n].weights.shape), list(self.params[n].biases.shape)]
                       for n in LAYER_ORDER],
        }
        ckpt.save_checkpoint(path, descriptor, self.params.named_arrays())

    @classmethod
    def load(cls, path: str | Path) -> "PokeModel":
        descriptor, arrays = ckpt.load_checkpoint(path)
        if descriptor.get("format") != "pokelab-model":
            raise CheckpointError("not a pokelab model checkpoint")
        try:
            layers = {n: LayerParams(arrays[f"{n}.weights"].copy(), arrays[f"{n}.biases"].copy())
                      for n in LAYER_ORDER}
        except KeyError as e:
            raise CheckpointError(f"missing parameter array {e}") from e
        return cls(ModelParams(layers), ModelMeta.model_validate(descriptor["meta"]))
