"""Composite attention-stream objective: epsilon-regularized KL divergence,
negative NSS, and a mask-supervision KL term, all with analytic gradients
on the autodiff tape."""

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .errors import DegenerateMapError
from .tensor import Tensor, _result

DEFAULT_EPS = 1e-7
DEFAULT_WEIGHTS = (0.8, 0.2, 0.2)  # (alpha1, alpha2, beta)


def _as_array(x):
    return x.data if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)


def sum_normalize(x):
    """x / sum(x) as a tape op (gradient includes the normalization chain)."""
    s = x.data.sum(dtype=np.float64)
    if s <= 0:
        raise DegenerateMapError("cannot sum-normalize a map with sum <= 0")
    out = x.data / s

    def make_backward(res):
        def backward():
            if x.requires_grad:
                g = res.grad
                x._accumulate(g / s - (g * out).sum() / s)

        return backward

    return _result(out, [x], make_backward)


def kl_loss(p, q, eps=DEFAULT_EPS):
    """sum_i q_i * log(eps + q_i / (eps + p_i)) for sum-normalized inputs."""
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    p_t = p if isinstance(p, Tensor) else Tensor(np.asarray(p, dtype=np.float64))
    qa = _as_array(q)
    if p_t.shape != qa.shape:
        raise ValueError(f"kl_loss: shape mismatch {p_t.shape} vs {qa.shape}")
    pa = p_t.data
    if (pa < 0).any() or (qa < 0).any():
        raise ValueError("kl_loss: inputs must be nonnegative")
    ratio = eps + qa / (eps + pa)
    val = np.array((qa * np.log(ratio)).sum(dtype=np.float64)).reshape(1, 1, 1, 1)

    def make_backward(res):
        def backward():
            if p_t.requires_grad:
                g = res.grad.reshape(())
                dp = -qa * qa / ((eps + pa) ** 2 * ratio)
                p_t._accumulate(g * dp)

        return backward

    return _result(val, [p_t], make_backward)


def nss_loss(y1, fix):
    """Negative mean standardized saliency at fixation pixels (population sigma)."""
    y_t = y1 if isinstance(y1, Tensor) else Tensor(np.asarray(y1, dtype=np.float64))
    f = _as_array(fix)
    if y_t.shape != f.shape:
        raise ValueError(f"nss_loss: shape mismatch {y_t.shape} vs {f.shape}")
    n_fix = f.sum(dtype=np.float64)
    if n_fix < 1:
        raise DegenerateMapError("nss requires at least one fixation")
    y = y_t.data
    mu = y.mean(dtype=np.float64)
    sigma = y.std(dtype=np.float64)
    if sigma == 0:
        raise DegenerateMapError("nss undefined for a constant saliency map")
    m_fix = (y * f).sum(dtype=np.float64) / n_fix
    loss = -(m_fix - mu) / sigma
    val = np.array(loss).reshape(1, 1, 1, 1)

    def make_backward(res):
        def backward():
            if y_t.requires_grad:
                g = res.grad.reshape(())
                n = y.size
                dy = (-(f / n_fix - 1.0 / n) / sigma
                      + (m_fix - mu) * (y - mu) / (n * sigma**3))
                y_t._accumulate(g * dy)

        return backward

    return _result(val, [y_t], make_backward)


@dataclass
class SupervisionPack:
    """One training sample: prediction, mask, and normalized targets."""

    y1: Tensor          # predicted saliency, 1x1xHxW
    mask: Tensor        # latent attention gate, 1x1xhxw
    fix: np.ndarray     # binary fixation grid, same shape as y1
    q1: np.ndarray      # ground-truth saliency density, same shape as y1
    q2: np.ndarray      # down-sampled density at mask resolution


def total_loss(pack, weights=DEFAULT_WEIGHTS, eps=DEFAULT_EPS):
    """alpha1 * KL(Y1, Q1) + alpha2 * NSS(Y1, F) + beta * KL(M, Q2).

    Prediction and mask are sum-normalized on the tape before the KL terms;
    the target densities are normalized eagerly.
    """
    alpha1, alpha2, beta = weights
    q1 = _as_array(pack.q1)
    q2 = _as_array(pack.q2)
    q1 = q1 / q1.sum(dtype=np.float64)
    q2 = q2 / q2.sum(dtype=np.float64)
    loss = T.scale(kl_loss(sum_normalize(pack.y1), q1, eps), alpha1)
    loss = loss + T.scale(nss_loss(pack.y1, pack.fix), alpha2)
    if beta != 0.0:
        loss = loss + T.scale(kl_loss(sum_normalize(pack.mask), q2, eps), beta)
    return loss


def area_downsample(grid, out_h, out_w):
    """Block-mean downsample; input extents must be multiples of the output."""
    h, w = grid.shape
    if h % out_h or w % out_w:
        raise ValueError(f"area_downsample: {h}x{w} not divisible by {out_h}x{out_w}")
    return grid.reshape(out_h, h // out_h, out_w, w // out_w).mean(axis=(1, 3))
