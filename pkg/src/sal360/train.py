"""Reduced-scale training loop for the attention stream.

Runs the full-topology network at 1/8 channel width on small frames
(default 80x160) with the composite KL + NSS + mask-KL objective and Adam.
"""

import os

import numpy as np

from . import attention, losses
from . import tensor as T
from .imageio import load_grid
from .weights import Adam, save_weights

TOY_HW = (80, 160)
TOY_WIDTH_DIV = 8


def load_training_dir(data_dir, height, width):
    """Load (frame, saliency, fixation) triples from frames/, saliency/,
    fixation/ subdirectories matched by filename."""
    dirs = {k: os.path.join(data_dir, k) for k in ("frames", "saliency", "fixation")}
    for k, d in dirs.items():
        if not os.path.isdir(d):
            raise ValueError(f"training dir missing {k}/ subdirectory")
    names = sorted(
        set(os.listdir(dirs["frames"]))
        & set(os.listdir(dirs["saliency"]))
        & set(os.listdir(dirs["fixation"]))
    )
    names = [n for n in names if n.endswith((".pgm", ".f32"))]
    pairs = []
    for name in names:
        frame = load_grid(os.path.join(dirs["frames"], name))
        q1 = load_grid(os.path.join(dirs["saliency"], name))
        fix = (load_grid(os.path.join(dirs["fixation"], name)) > 0.5).astype(float)
        if frame.shape != (height, width):
            raise ValueError(
                f"{name}: expected {height}x{width} frames, got {frame.shape}")
        pairs.append((name, frame, q1, fix))
    return pairs


def _make_pack(model, out, q1, fix, q2):
    return losses.SupervisionPack(
        y1=out.saliency,
        mask=out.mask,
        fix=fix[None, None],
        q1=q1[None, None],
        q2=q2[None, None],
    )


def train(data_dir, out_weights_path, steps, lr=1e-5,
          loss_weights=losses.DEFAULT_WEIGHTS, eps=losses.DEFAULT_EPS,
          seed=0, height=TOY_HW[0], width=TOY_HW[1], log=None):
    """Train the toy attention model; returns (initial_loss, final_loss)."""
    pairs = load_training_dir(data_dir, height, width)
    if not pairs:
        raise ValueError("empty training dataset")
    model = attention.build_model((height, width), width_div=TOY_WIDTH_DIV)
    rng = np.random.default_rng(seed)
    store = model.init_weights(rng)
    lh, lw = model.latent_hw
    prepared = []
    for name, frame, q1, fix in pairs:
        x = T.Tensor(np.repeat(frame[None], 3, axis=0)[None])
        q2 = losses.area_downsample(q1, lh, lw)
        prepared.append((name, x, q1, fix, q2))

    def dataset_loss():
        with T.no_grad():
            vals = []
            for _, x, q1, fix, q2 in prepared:
                out = attention.forward_attention(x, store, model)
                pack = _make_pack(model, out, q1, fix, q2)
                vals.append(losses.total_loss(pack, loss_weights, eps).item())
        return float(np.mean(vals))

    initial = dataset_loss()
    opt = Adam(lr=lr)
    for step in range(steps):
        name, x, q1, fix, q2 = prepared[step % len(prepared)]
        for t in store.values():
            t.zero_grad()
        out = attention.forward_attention(x, store, model)
        pack = _make_pack(model, out, q1, fix, q2)
        loss = losses.total_loss(pack, loss_weights, eps)
        loss.backward()
        grads = {k: t.grad for k, t in store.items()}
        opt.step(store, grads)
        if log is not None:
            log(f"step {step + 1}/{steps} loss {loss.item():.6f} ({name})")
    final = dataset_loss() if steps > 0 else initial
    save_weights(store, out_weights_path)
    return initial, final
