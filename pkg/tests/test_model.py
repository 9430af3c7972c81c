import numpy as np
import pytest

from sidecar_mtl import tensor as T
from sidecar_mtl.backbone import (Backbone, BackboneConfig, alibi_slopes, attention_scores, freeze,
                                  greedy_decode)
from sidecar_mtl.layers import GlobalLayerNorm
from sidecar_mtl.mixer import make_corpus
from sidecar_mtl.objectives import combined_loss
from sidecar_mtl.optim import Adam, TriStageSchedule
from sidecar_mtl.sidecar import (MultiTalkerModel, Sidecar, SidecarConfig, diar_activity, param_report,
                                 sidecar_counts)
from sidecar_mtl.tensor import ShapeError, Tape, Tensor
from sidecar_mtl.train import OptimConfig, TrainingDivergence, pretrain_single_talker, train_sidecar


@pytest.fixture(scope="module")
def backbone():
    return Backbone(BackboneConfig(), seed=0)


def test_config_validation():
    with pytest.raises(ValueError):
        BackboneConfig(insertion_layer=0)
    with pytest.raises(ValueError):
        BackboneConfig(insertion_layer=4)
    with pytest.raises(ValueError):
        BackboneConfig(extractor_spec=((10, 5, 32), (8, 16, 64)))
    with pytest.raises(ValueError):
        BackboneConfig(vocab=("a", "<b>"))
    assert BackboneConfig().hop == 160
    with pytest.raises(ValueError):
        SidecarConfig(n_speakers=1)


def test_frame_counts(backbone):
    assert backbone.extract_features(np.zeros(8000)).shape[2] == 50
    # 7992 samples: floor(7992 / 5) = 1598, floor(1598 / 32) = 49
    assert backbone.extract_features(np.zeros(7992)).shape[2] == 49 == backbone.num_frames(7992)
    out = backbone.extract_features(np.zeros(8000)).data
    assert np.all(np.isfinite(out))
    with pytest.raises(ValueError):
        backbone.extract_features(np.zeros(100))


def test_encoder_shapes_and_composition(backbone):
    rng = np.random.default_rng(0)
    feats = backbone.extract_features(rng.normal(size=(2, 1600)))
    low = backbone.encode_lower(feats)
    assert low.shape == (2, 64, 10)
    assert np.array_equal(low.data, backbone.encode_lower(feats).data)
    up = backbone.encode_upper(low)
    assert up.shape == low.shape
    mono = backbone.forward_monolithic(feats)
    assert np.max(np.abs(mono.data - up.data)) < 1e-12
    logits = backbone.decode(Tensor(rng.uniform(-10, 10, size=(2, 64, 7))))
    assert logits.shape == (2, 7, len(backbone.config.vocab))
    assert np.all(np.isfinite(logits.data))
    with pytest.raises(ShapeError):
        backbone.encode_upper(Tensor(np.zeros((2, 64, 0))))
    with pytest.raises(ShapeError):
        backbone.encode_upper(Tensor(np.zeros((2, 32, 5))))


def test_distance_bias_toggle():
    assert alibi_slopes(8)[7] == 2.0 ** -8
    rng = np.random.default_rng(1)
    q, k = Tensor(rng.normal(size=(1, 8, 5, 4))), Tensor(rng.normal(size=(1, 8, 5, 4)))
    plain = attention_scores(q, k, False).data
    np.testing.assert_allclose(plain, q.data @ k.data.transpose(0, 1, 3, 2) / 2.0, atol=1e-14)
    biased = attention_scores(q, k, True).data
    diff = plain - biased
    np.testing.assert_allclose(np.diagonal(diff, axis1=2, axis2=3), 0.0, atol=1e-15)
    np.testing.assert_allclose(diff[0, 7, 0, 3], 3 * 2.0 ** -8, atol=1e-15)
    off = Backbone(BackboneConfig(distance_bias=False), seed=0)
    on = Backbone(BackboneConfig(distance_bias=True), seed=0)
    feats = off.extract_features(rng.normal(size=1600))
    assert not np.allclose(off.encode_lower(feats).data, on.encode_lower(feats).data)


def test_greedy_decode_collapses():
    z = np.eye(3)[[1, 1, 0, 1, 2, 2, 0]]
    assert greedy_decode(z) == [1, 1, 2]


def test_pretrain_zero_steps_and_determinism():
    data = make_corpus("single", 8, seed=1)
    bb = Backbone(seed=3)
    before = bb.parameter_hash()
    _, losses = pretrain_single_talker(bb, data, OptimConfig(steps=0))
    assert losses == [] and bb.parameter_hash() == before
    a, la = pretrain_single_talker(Backbone(seed=3), data, OptimConfig(lr=1e-3, steps=3, batch_size=2))
    b, lb = pretrain_single_talker(Backbone(seed=3), data, OptimConfig(lr=1e-3, steps=3, batch_size=2))
    assert la == lb and a.parameter_hash() == b.parameter_hash() != before


def test_divergence_reports_step():
    data = make_corpus("single", 4, seed=1)
    bb = Backbone(seed=0)
    bb.decoder.bias.data = np.full_like(bb.decoder.bias.data, np.nan)
    with pytest.raises(TrainingDivergence) as info, np.errstate(invalid="ignore"):
        pretrain_single_talker(bb, data, OptimConfig(steps=2, batch_size=2))
    assert info.value.step == 0


# -- sidecar -----------------------------------------------------------------


def tiny_sidecar(C=4, S=2, seed=0):
    return Sidecar(SidecarConfig(io_channels=C, bottleneck_channels=3, hidden_channels=5, blocks=2, repeats=2,
                                 n_speakers=S), seed=seed)


def test_separate_shapes_and_nonnegativity():
    sc = tiny_sidecar()
    for seed in range(10):
        x = Tensor(np.random.default_rng(seed).normal(size=(2, 4, 5)))
        masks, sep = sc.separate(x)
        assert masks.shape == (4, 4, 5) and sep.shape == (4, 4, 5)
        assert masks.data.min() >= 0
    with pytest.raises(ShapeError):
        sc.separate(Tensor(np.zeros((2, 3, 5))))
    with pytest.raises(ShapeError):
        sc.separate(Tensor(np.zeros((2, 4, 0))))


def test_zero_mask_conv_gives_out_conv_of_zeros():
    sc = tiny_sidecar()
    sc.mask_conv.weight.data = np.zeros_like(sc.mask_conv.weight.data)
    masks, sep = sc.separate(Tensor(np.random.default_rng(0).normal(size=(2, 4, 5))))
    assert not masks.data.any()
    np.testing.assert_array_equal(sep.data, sc.out_conv(Tensor(np.zeros((4, 4, 5)))).data)
    D = sc.diar_activity(masks, 2)
    np.testing.assert_array_equal(D.data, 0.5)


def test_speaker_major_ordering():
    sc = tiny_sidecar(S=3)
    x = np.random.default_rng(2).normal(size=(2, 4, 6))
    masks, sep = sc.separate(Tensor(x))
    filtered = sc.in_conv(Tensor(x)).data
    for b in range(2):
        for s in range(3):
            expect = sc.out_conv(Tensor((masks.data[b * 3 + s] * filtered[b])[None])).data[0]
            np.testing.assert_allclose(sep.data[b * 3 + s], expect, atol=1e-12)


def test_diar_activity_examples():
    masks = np.zeros((6, 4, 5))
    assert diar_activity(Tensor(masks), np.ones(4), 3, 2).shape == (3, 2, 5)
    np.testing.assert_array_equal(diar_activity(Tensor(masks), np.ones(4), 3, 2).data, 0.5)
    masks[0, 0, 0] = 4.0
    D = diar_activity(Tensor(masks), np.array([1.0, 0, 0, 0]), 3, 2).data
    assert D[0, 0, 0] == pytest.approx(0.9820138, abs=1e-7)
    with pytest.raises(ShapeError):
        diar_activity(Tensor(masks), np.ones(4), 2, 2)


def test_diar_activity_linear_before_sigmoid():
    rng = np.random.default_rng(3)
    sc = tiny_sidecar()
    sc.branch.weight.data = rng.normal(size=sc.branch.weight.shape)
    m = rng.random((4, 4, 7))
    a = sc.branch.logits(Tensor(m), 2, 2).data
    b = sc.branch.logits(Tensor(2.5 * m), 2, 2).data
    np.testing.assert_allclose(b, 2.5 * a, rtol=1e-14)
    assert sc.branch.num_parameters() == 4


class _Identity:
    def __call__(self, x):
        return x


def test_receptive_field():
    cfg = SidecarConfig.toy(io_channels=8)
    sc = Sidecar(cfg, seed=0)
    # linearise: unit PReLU slopes, identity norms
    for name, p in sc.named_parameters():
        if name.endswith("slope"):
            p.data = np.ones_like(p.data)
    sc.norm = _Identity()
    for block in sc.blocks:
        block.norm1 = block.norm2 = _Identity()
    reach = 1 + sum(cfg.dilations)
    assert reach == 16
    rng = np.random.default_rng(0)
    x = rng.normal(size=(1, 8, 101))
    t = 50
    bumped = x.copy()
    bumped[0, :, t] += 1.0
    base, moved = sc.masks(sc.in_conv(Tensor(x))).data, sc.masks(sc.in_conv(Tensor(bumped))).data
    changed = np.flatnonzero(np.abs(moved - base).max(axis=(0, 1)) > 0)
    assert changed.min() >= t - reach and changed.max() <= t + reach
    assert t in changed


def test_batch_independence(backbone):
    sc = Sidecar(SidecarConfig.toy(), seed=1)
    model = MultiTalkerModel(backbone, sc)
    wav = np.random.default_rng(5).normal(size=(3, 1600))
    logits, D = model(wav)
    for b in range(3):
        lb, Db = model(wav[b:b + 1])
        assert np.array_equal(lb.data[0], logits.data[b])
        assert np.array_equal(Db.data[0], D.data[b])


def test_gradient_flow_and_freeze(backbone):
    bb = freeze(Backbone(seed=0))
    assert freeze(bb) is bb and bb.frozen
    sc = Sidecar(SidecarConfig.toy(), seed=0)
    sc.branch.weight.data = np.full(sc.branch.weight.shape, 0.1)
    model = MultiTalkerModel(bb, sc)
    mixes = make_corpus("left-aligned", 2, seed=0)
    emb = model.embed_batch([model.embed(m.waveform) for m in mixes])
    with Tape() as tape:
        logits, D = model.from_embedding(emb)
        ref = np.zeros(D.shape)
        for i, m in enumerate(mixes):
            ref[i, :, :m.n_frames] = m.activity
        loss, _, _ = combined_loss(logits, [m.transcripts for m in mixes], D, ref, 0.01)
    tape.backward(loss)
    assert all(p.grad is not None for p in sc.parameters())
    assert all(p.grad is None for p in bb.parameters())


def test_sidecar_training_leaves_backbone_untouched():
    bb = freeze(Backbone(seed=0))
    before = bb.parameter_hash()
    sc = Sidecar(SidecarConfig.toy(), seed=0)
    sc_before = sc.parameter_hash()
    model = MultiTalkerModel(bb, sc)
    hist = train_sidecar(model, make_corpus("left-aligned", 4, seed=0), 0.01, OptimConfig(steps=2, batch_size=2))
    assert len(hist) == 2 and set(hist[0]) == {"step", "loss", "ctc", "diar"}
    assert bb.parameter_hash() == before
    assert sc.parameter_hash() != sc_before
    with pytest.raises(ValueError):
        train_sidecar(MultiTalkerModel(Backbone(seed=0), sc), [], 0.01)
    with pytest.raises(ValueError):
        train_sidecar(model, make_corpus("left-aligned", 1, n_speakers=3), 0.01)


def test_param_report_paper_scale():
    bb = BackboneConfig.paper_scale()
    two = param_report(SidecarConfig(), bb)
    three = param_report(SidecarConfig(n_speakers=3), bb)
    assert two["diar_branch"] == 768
    assert three["trainable"] - two["trainable"] == 128 * 768 == 98_304
    assert param_report(SidecarConfig(), bb)["trainable"] == two["trainable"]
    assert 0.05 < two["trainable_ratio"] < 0.12


def test_param_report_matches_instantiated_modules():
    cfg = SidecarConfig.toy()
    sc = Sidecar(cfg, seed=0)
    counts = sidecar_counts(cfg)
    assert sum(counts.values()) == sc.num_parameters()
    assert counts["diar_branch"] == sc.branch.num_parameters() == 64
    rep = param_report(cfg, BackboneConfig())
    assert rep["backbone"] == Backbone(seed=0).num_parameters()
    assert all(v > 0 for v in rep.values())


def test_global_layer_norm_statistics():
    x = Tensor(np.random.default_rng(0).normal(3, 2, size=(2, 4, 9)))
    y = GlobalLayerNorm(4)(x).data
    np.testing.assert_allclose(y.mean(axis=(1, 2)), 0, atol=1e-12)
    np.testing.assert_allclose(y.std(axis=(1, 2)), 1, atol=1e-6)


def test_tri_stage_schedule():
    s = TriStageSchedule(peak_lr=1.0, total_steps=100)
    assert s(0) == pytest.approx(0.01)
    assert s(10) == s(49) == 1.0
    assert s(50) == 1.0 and s(100) == pytest.approx(0.05)
    assert s(75) == pytest.approx(1 - 0.95 * 0.5)


def test_adam_first_step_magnitude_and_no_in_place():
    p = Tensor(np.array([1.0, -2.0]), requires_grad=True)
    frozen = Tensor(np.array([5.0]))
    opt = Adam([p, frozen], lr=0.1)
    assert opt.params == [p]
    old = p.data
    p.grad = np.array([0.5, -3.0])
    opt.step()
    np.testing.assert_allclose(p.data, [0.9, -1.9], atol=1e-7)
    assert old is not p.data and old.tolist() == [1.0, -2.0]


def test_state_dict_round_trip():
    a, b = Sidecar(SidecarConfig.toy(), 0), Sidecar(SidecarConfig.toy(), 1)
    assert a.parameter_hash() != b.parameter_hash()
    b.load_state_dict(a.state_dict())
    assert a.parameter_hash() == b.parameter_hash()
    with pytest.raises((KeyError, ValueError)):
        b.load_state_dict({"nope": np.zeros(1)})
