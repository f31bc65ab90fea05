"""Global attention stream: modified VGG-16 encoder, the attention module
that rescales the latent features, and the mirrored decoder.

Shapes follow the internal (rows, cols) convention: the full-scale frame is
1x3x320x640 and the latent block 1x512x20x40.
"""

from dataclasses import dataclass

import numpy as np

from . import network as N
from . import tensor as T

VGG_BLOCKS = ((64, 2), (128, 2), (256, 3), (512, 3), (512, 3))

FULL_INPUT_HW = (320, 640)


def _div(c, width_div):
    return max(1, c // width_div)


def build_encoder_spec(width_div=1, pool3_kernel=4):
    """VGG-16 conv stack with pool4/pool5 removed and pool3 widened to k4 s4."""
    layers = []
    cin = 3
    for block_idx, (ch, n_convs) in enumerate(VGG_BLOCKS):
        ch = _div(ch, width_div)
        for _ in range(n_convs):
            layers.append(N.conv(cin, ch))
            layers.append(N.RELU)
            cin = ch
        if block_idx == 2:
            layers.append(N.maxpool(pool3_kernel))
        elif block_idx < 2:
            layers.append(N.maxpool(2))
    return N.NetworkSpec("encoder", layers)


def build_vgg16_stock_spec():
    """Unmodified VGG-16 conv stack through pool5 (receptive-field baseline)."""
    layers = []
    cin = 3
    for ch, n_convs in VGG_BLOCKS:
        for _ in range(n_convs):
            layers.append(N.conv(cin, ch))
            layers.append(N.RELU)
            cin = ch
        layers.append(N.maxpool(2))
    return N.NetworkSpec("vgg16-stock", layers)


def build_attention_spec(width_div=1, second_pool=True):
    """Attention module over the latent block: two pooled conv pairs, a 1x1
    projection, x4 upsampling back to latent resolution, sigmoid gate."""
    cin = _div(512, width_div)
    c64 = _div(64, width_div)
    c128 = _div(128, width_div)
    layers = [
        N.maxpool(2),
        N.conv(cin, c64), N.RELU,
        N.conv(c64, c128), N.RELU,
    ]
    if second_pool:
        layers.append(N.maxpool(2))
    layers += [
        N.conv(c128, c64), N.RELU,
        N.conv(c64, c128), N.RELU,
        N.conv(c128, 1, k=1, p=0),
        N.up(4 if second_pool else 2),
        N.SIGMOID,
    ]
    return N.NetworkSpec("attention", layers)


def build_decoder_spec(width_div=1):
    """Mirror of the encoder: conv blocks 512-512-256-128-64 with bilinear
    upsampling between them (x4 where the encoder's pool3 sat), 1x1 head."""
    c512 = _div(512, width_div)
    c256 = _div(256, width_div)
    c128 = _div(128, width_div)
    c64 = _div(64, width_div)
    layers = [
        N.conv(c512, c512), N.RELU, N.conv(c512, c512), N.RELU,
        N.up(4),
        N.conv(c512, c256), N.RELU, N.conv(c256, c256), N.RELU,
        N.up(2),
        N.conv(c256, c128), N.RELU, N.conv(c128, c128), N.RELU,
        N.up(2),
        N.conv(c128, c64), N.RELU, N.conv(c64, c64), N.RELU,
        N.conv(c64, 1, k=1, p=0),
        N.SIGMOID,
    ]
    return N.NetworkSpec("decoder", layers)


@dataclass
class AttentionOutput:
    saliency: T.Tensor  # 1x1xHxW, sigmoid range
    mask: T.Tensor      # 1x1xhxw latent-resolution gate
    latent: T.Tensor    # pre-enhancement encoder features


@dataclass
class AttentionModel:
    encoder: N.NetworkSpec
    attention: N.NetworkSpec
    decoder: N.NetworkSpec
    input_hw: tuple
    latent_hw: tuple

    def init_weights(self, rng):
        store = {}
        store.update(N.init_weights(self.encoder, "encoder/", rng))
        store.update(N.init_weights(self.attention, "attention/", rng))
        store.update(N.init_weights(self.decoder, "decoder/", rng))
        return store


def build_model(input_hw=FULL_INPUT_HW, width_div=1):
    """Assemble encoder/attention/decoder specs for a given frame size.

    At 320x640 this is the full-scale architecture. Smaller frames keep the
    same layer kinds; the attention module drops its second pool when the
    latent block is too small to pool twice, and the forward pass resizes
    the mask and the decoder output to the exact target shapes (a no-op at
    full scale).
    """
    encoder = build_encoder_spec(width_div)
    h, w = input_hw
    _, lh, lw = N.output_shape(encoder, (3, h, w))
    second_pool = (lh - 2) // 2 + 1 >= 2 and (lw - 2) // 2 + 1 >= 2
    attention = build_attention_spec(width_div, second_pool=second_pool)
    decoder = build_decoder_spec(width_div)
    return AttentionModel(encoder, attention, decoder, (h, w), (lh, lw))


_FULL_MODEL = None


def full_model():
    global _FULL_MODEL
    if _FULL_MODEL is None:
        _FULL_MODEL = build_model()
    return _FULL_MODEL


def forward_attention(frame, weights, model=None, mask_override=None):
    """Frame -> AttentionOutput. The latent features are enhanced by
    (1 + mask) per channel before decoding; `mask_override` replaces the
    computed mask (test hook)."""
    if model is None:
        model = full_model()
    h, w = model.input_hw
    if frame.shape[2:] != (h, w):
        raise N.ShapeError(
            f"frame spatial dims {frame.shape[2:]} != model input {(h, w)}")
    z1 = N.forward(model.encoder, frame, weights, "encoder/")
    lh, lw = z1.shape[2], z1.shape[3]
    if mask_override is not None:
        mask = mask_override if isinstance(mask_override, T.Tensor) \
            else T.Tensor(np.asarray(mask_override, dtype=np.float64))
    else:
        mask = N.forward(model.attention, z1, weights, "attention/",
                         upsample_to=(lh, lw))
    z = T.elementwise(z1, T.add_scalar(mask, 1.0), "mul")
    y1 = N.forward(model.decoder, z, weights, "decoder/")
    if y1.shape[2:] != (h, w):
        y1 = T.resize_bilinear(y1, h, w)
    return AttentionOutput(saliency=y1, mask=mask, latent=z1)


def receptive_field_report():
    """(title, rows) receptive-field tables for the stock VGG-16 baseline,
    the modified encoder, and the encoder chained with the attention module."""
    stock = N.receptive_field(build_vgg16_stock_spec())
    encoder_spec = build_encoder_spec()
    enc = N.receptive_field(encoder_spec)
    rf, jump = 1, 1.0
    for _, rf, jump in enc:
        pass
    att = N.receptive_field(build_attention_spec(), rf=rf, jump=jump)
    return [
        ("stock VGG-16 (through pool5)", stock),
        ("modified encoder", enc),
        ("encoder + attention module", att),
    ]
