import numpy as np
import pytest

from sal360 import attention as A
from sal360 import network as N
from sal360 import tensor as T


def toy_model():
    return A.build_model(input_hw=(80, 160), width_div=8)


def toy_forward(rng, mask_override=None, model=None, weights=None):
    model = model or toy_model()
    weights = weights or model.init_weights(rng)
    h, w = model.input_hw
    frame = T.Tensor(rng.uniform(0, 1, (1, 3, h, w)))
    with T.no_grad():
        out = A.forward_attention(frame, weights, model,
                                  mask_override=mask_override)
    return out, frame, model, weights


class TestParameterCounts:
    def test_attention_module_per_layer(self):
        counts = [c for c in N.per_layer_parameters(A.build_attention_spec())
                  if c]
        assert counts == [294976, 73856, 73792, 73856, 129]

    def test_attention_module_total(self):
        assert N.count_parameters(A.build_attention_spec()) == 516609


class TestReceptiveFields:
    def test_report_values(self):
        report = A.receptive_field_report()
        titles = [t for t, _ in report]
        assert len(report) == 3
        stock, enc, att = (rows for _, rows in report)
        assert stock[-1][1] == 212
        assert enc[-1][1] == 244
        # fourth conv inside the attention module
        conv_rows = [r for r in att if r[0].startswith("conv")]
        assert conv_rows[3][1] == 676

    def test_encoder_total_stride(self):
        enc = N.receptive_field(A.build_encoder_spec())
        assert enc[-1][2] == 16.0


class TestShapes:
    def test_full_scale_latent(self):
        model = A.full_model()
        assert model.latent_hw == (20, 40)
        assert N.output_shape(model.encoder, (3, 320, 640)) == (512, 20, 40)

    def test_attention_mask_shape_full_scale(self):
        spec = A.build_attention_spec()
        assert N.output_shape(spec, (512, 20, 40)) == (1, 20, 40)

    def test_decoder_restores_input_resolution(self):
        spec = A.build_decoder_spec()
        assert N.output_shape(spec, (512, 20, 40)) == (1, 320, 640)

    def test_toy_latent_and_outputs(self, rng):
        out, frame, model, _ = toy_forward(rng)
        assert model.latent_hw == (5, 10)
        assert out.saliency.shape == (1, 1, 80, 160)
        assert out.mask.shape == (1, 1, 5, 10)
        assert out.latent.shape == (1, 64, 5, 10)

    def test_tiny_latent_drops_second_pool(self):
        model = A.build_model(input_hw=(40, 80), width_div=8)
        assert model.latent_hw == (2, 5)
        pools = [l for l in model.attention.layers if l.kind == "maxpool"]
        assert len(pools) == 1

    def test_wrong_frame_size_rejected(self, rng):
        model = toy_model()
        weights = model.init_weights(rng)
        frame = T.Tensor(np.zeros((1, 3, 40, 80)))
        with pytest.raises(N.ShapeError):
            A.forward_attention(frame, weights, model)


class TestEnhancement:
    """The latent rescaling z = (1 + M) * z1 checked through the mask hook."""

    def test_zero_mask_is_identity_path(self, rng):
        model = toy_model()
        weights = model.init_weights(rng)
        lh, lw = model.latent_hw
        zero = np.zeros((1, 1, lh, lw))
        out0, frame, _, _ = toy_forward(rng, mask_override=zero,
                                        model=model, weights=weights)
        # identical to decoding the raw latent: rerun decoder directly
        with T.no_grad():
            y = N.forward(model.decoder, out0.latent, weights, "decoder/")
        assert np.allclose(out0.saliency.data, y.data, atol=1e-14)

    def test_full_mask_doubles_latent(self, rng):
        model = toy_model()
        weights = model.init_weights(rng)
        lh, lw = model.latent_hw
        ones = np.ones((1, 1, lh, lw))
        out1, frame, _, _ = toy_forward(rng, mask_override=ones,
                                        model=model, weights=weights)
        with T.no_grad():
            z1 = N.forward(model.encoder, frame, weights, "encoder/")
            doubled = T.Tensor(2.0 * z1.data)
            y = N.forward(model.decoder, doubled, weights, "decoder/")
        assert np.allclose(out1.saliency.data, y.data, atol=1e-14)

    def test_mask_applied_per_channel(self, rng):
        model = toy_model()
        weights = model.init_weights(rng)
        lh, lw = model.latent_hw
        gen = np.random.default_rng(7)
        m = gen.uniform(0, 1, (1, 1, lh, lw))
        out, frame, _, _ = toy_forward(rng, mask_override=m,
                                       model=model, weights=weights)
        with T.no_grad():
            z1 = N.forward(model.encoder, frame, weights, "encoder/")
        # recompute the enhanced latent by broadcasting over all channels
        enhanced = z1.data * (1.0 + m)
        z = T.elementwise(out.latent, T.add_scalar(
            T.Tensor(m), 1.0), "mul")
        assert np.allclose(z.data, enhanced, atol=1e-14)

    def test_computed_mask_in_sigmoid_range(self, rng):
        out, _, _, _ = toy_forward(rng)
        assert np.all((out.mask.data > 0) & (out.mask.data < 1))
        assert np.all((out.saliency.data > 0) & (out.saliency.data < 1))


class TestDeterminism:
    def test_same_seed_same_output(self):
        outs = []
        for _ in range(2):
            gen = np.random.default_rng(99)
            out, _, _, _ = toy_forward(gen)
            outs.append(out.saliency.data.copy())
        assert np.array_equal(outs[0], outs[1])
