import numpy as np
import pytest

from textcomp import ctc as ctc_mod
from textcomp import diffcore as dc
from textcomp import synthesis as syn
from textcomp.model import Model, ModelConfig, TrainConfig, checkpoint, evaluate, lr_at, train
from textcomp.model.layers import ParamStore
from textcomp.model.network import KernLSTM

CODEC = ctc_mod.Codec("0123456789")

TINY = ModelConfig(encoder_channels=(8, 12, 16), decoder_channels=(8, 6, 4),
                   klstm_hidden=16, rec_adapt=12, rec_hidden=32,
                   stn_channels=(4, 6, 8), stn_fc=24, stn_iters=1)


def quads_for(batch):
    q = np.array([(100.0, 10.0), (400.0, 12.0), (398.0, 45.0), (98.0, 44.0)])
    return np.tile(q, (batch, 1, 1))


def test_default_config_shapes(rng):
    m = Model(ModelConfig(), CODEC, rng)
    scenes = rng.random((2, 64, 512)).astype(np.float32)
    with dc.no_grad():
        crop, _ = m.rectify(scenes, quads_for(2))
        feats = m.encode(crop)
        out = m.forward(scenes, quads_for(2))
    assert crop.shape == (2, 1, 32, 256)
    assert feats.shape == (2, 64, 4, 32)           # stride 8 both axes
    assert out["logp"].shape == (2, 32, CODEC.size)
    assert out["recon"].shape == (2, 32, 256)
    rows = np.exp(out["logp"].data.astype(np.float64)).sum(axis=2)
    assert np.abs(rows - 1.0).max() <= 1e-6
    assert out["recon"].data.min() > 0.0 and out["recon"].data.max() < 1.0


def test_encoder_zero_input_zero_features(rng):
    m = Model(TINY, CODEC, rng)
    # zero weights/biases make the encoder linear at zero
    for name, p in m.params.items():
        if name.startswith("encoder"):
            p.data = np.zeros_like(p.data)
    x = dc.constant(np.zeros((1, 1, 32, 256), dtype=np.float32))
    with dc.no_grad():
        feats = m.enc3(dc.avgpool2(m.enc2(dc.avgpool2(m.enc1(dc.avgpool2(x))))))
    assert not feats.data.any()


def test_icstn_zero_regressor_is_plain_crop(rng):
    sample = syn.synthesize("012", syn.ParamRanges(), seed=3)
    scenes = sample.scene[None].astype(np.float32)
    quads = sample.quad.corners[None]
    m1 = Model(ModelConfig(use_stn=False, **{}), CODEC, np.random.default_rng(0))
    cfg2 = ModelConfig(stn_iters=2)
    m2 = Model(cfg2, CODEC, np.random.default_rng(0))
    # zero the whole regressor: every update is the identity
    for name, p in m2.params.items():
        if name.startswith("stn"):
            p.data = np.zeros_like(p.data)
    cfg1 = ModelConfig(stn_iters=1)
    m1b = Model(cfg1, CODEC, np.random.default_rng(0))
    for name, p in m1b.params.items():
        if name.startswith("stn"):
            p.data = np.zeros_like(p.data)
    with dc.no_grad():
        crop_plain, _ = m1.rectify(scenes, quads)
        crop_k2, _ = m2.rectify(scenes, quads)
        crop_k1, _ = m1b.rectify(scenes, quads)
    assert np.allclose(crop_plain.data, crop_k2.data, atol=1e-5)
    assert np.array_equal(crop_k1.data, crop_k2.data)


def test_icstn_gradient_reaches_regressor(rng):
    m = Model(ModelConfig(encoder_channels=(2, 3, 4), decoder_channels=(3, 2, 2),
                          klstm_hidden=4, rec_adapt=2, rec_hidden=3,
                          stn_channels=(2, 2, 2), stn_fc=4, stn_iters=2),
              CODEC, rng, dtype=np.float64)
    m.params["stn.fc2.w"].data = rng.normal(0, 0.01, m.params["stn.fc2.w"].data.shape)
    sample = syn.synthesize("012", syn.ParamRanges(), seed=3)
    quad = syn.perturb_quad(sample.quad, syn.PerturbationParams(0.05, 0.05), 1)
    with dc.tape():
        loss, _ = m.loss(sample.scene[None], quad.corners[None],
                         [CODEC.encode("012")], sample.template.image[None])
        grads = dc.backward(loss, params=list(m.params.values()))
    stn_l1 = sum(float(np.abs(grads[id(p)]).sum())
                 for n, p in m.params.items() if n.startswith("stn"))
    assert stn_l1 > 0


def test_klstm_window_construction(rng):
    store = ParamStore(np.float64)
    k = KernLSTM(store, "k", 3, 4, rng)
    cols = dc.constant(rng.normal(size=(1, 5, 3)))
    win = k._windows(cols).data
    assert win.shape == (1, 5, 6)
    # window t = (col[t-1], col[t]), left-replicated at t=0
    assert np.array_equal(win[0, 0], np.concatenate([cols.data[0, 0], cols.data[0, 0]]))
    for t in range(1, 5):
        assert np.array_equal(win[0, t], np.concatenate([cols.data[0, t - 1], cols.data[0, t]]))
    # 31 true adjacent pairs for 32 columns; one replicated pad window
    cols32 = dc.constant(rng.normal(size=(1, 32, 3)))
    win32 = k._windows(cols32).data
    true_pairs = sum(
        1 for t in range(1, 32)
        if np.array_equal(win32[0, t, :3], cols32.data[0, t - 1])
    )
    assert true_pairs == 31


def test_klstm_zero_weights_zero_output(rng):
    store = ParamStore(np.float64)
    k = KernLSTM(store, "k", 3, 4, rng)
    for p in store.params.values():
        p.data = np.zeros_like(p.data)
    out = k(dc.constant(rng.normal(size=(2, 6, 3))))
    assert not out.data.any()


def test_klstm_mirror_symmetry(rng):
    store = ParamStore(np.float64)
    k = KernLSTM(store, "k", 3, 4, rng)
    x = rng.normal(size=(2, 7, 3))
    out = k(dc.constant(x)).data
    # swap direction parameters
    store2 = ParamStore(np.float64)
    k2 = KernLSTM(store2, "k", 3, 4, np.random.default_rng(0))
    for name in ("wx", "wh", "b"):
        store2.params[f"k.fwd.{name}"].data = store.params[f"k.bwd.{name}"].data.copy()
        store2.params[f"k.bwd.{name}"].data = store.params[f"k.fwd.{name}"].data.copy()
    out2 = k2(dc.constant(x[:, ::-1].copy())).data
    h = 4
    swapped = np.concatenate([out2[..., h:], out2[..., :h]], axis=-1)
    assert np.allclose(swapped[:, ::-1], out, atol=1e-12)


def test_mse_closed_forms(rng):
    tmpl = rng.random((2, 32, 256)).astype(np.float32)
    s = dc.constant(np.zeros((2, 32, 256), dtype=np.float32))
    t = dc.constant(tmpl)
    d = dc.sub(s, t)
    mse = dc.mean_all(dc.mul(d, d))
    assert abs(float(mse.data) - float((tmpl.astype(np.float64) ** 2).mean())) <= 1e-6
    zero = dc.mean_all(dc.mul(dc.sub(t, t), dc.sub(t, t)))
    assert float(zero.data) == 0.0


def test_total_loss_lambda_zero_is_pure_ctc(rng):
    m = Model(ModelConfig(lambda_recon=0.0, encoder_channels=(4, 6, 8),
                          klstm_hidden=8, rec_adapt=6, rec_hidden=8,
                          stn_channels=(2, 3, 4), stn_fc=8), CODEC, rng)
    sample = syn.synthesize("42", syn.ParamRanges(), seed=4)
    with dc.no_grad():
        pass
    with dc.tape():
        loss, parts = m.loss(sample.scene[None].astype(np.float32),
                             sample.quad.corners[None],
                             [CODEC.encode("42")],
                             sample.template.image[None].astype(np.float32))
    assert parts["mse"] == 0.0
    assert abs(parts["total"] - parts["ctc"]) <= 1e-9
    assert m.forward(sample.scene[None].astype(np.float32),
                     sample.quad.corners[None])["recon"] is None


def test_ablation_reduction_matches_plain_pipeline(rng):
    base_cfg = ModelConfig(use_stn=False, use_klstm=False, lambda_recon=0.0,
                           encoder_channels=(4, 6, 8), rec_adapt=6, rec_hidden=8)
    m = Model(base_cfg, CODEC, np.random.default_rng(5))
    sample = syn.synthesize("31", syn.ParamRanges(), seed=6)
    scenes = sample.scene[None].astype(np.float32)
    quads = sample.quad.corners[None]
    with dc.no_grad():
        out = m.forward(scenes, quads)
        # plain pipeline by hand from the same weights
        crop, _ = m.rectify(scenes, quads)
        logp = m.recognize(m.encode(crop))
    assert np.array_equal(out["logp"].data, logp.data)
    assert out["recon"] is None


def test_lr_schedules():
    cfg = TrainConfig(lr=1e-4, schedule="exp", decay_factor=0.9, decay_every=5000)
    assert lr_at(cfg, 0) == 1e-4
    assert abs(lr_at(cfg, 5000) - 1e-4 * 0.9) <= 1e-20
    assert abs(lr_at(cfg, 10000) - 1e-4 * 0.81) <= 1e-20
    st = TrainConfig(lr=5e-4, schedule="stage", steps=100, stage_fractions=(0.2, 0.4, 0.7))
    assert lr_at(st, 0) == 5e-4
    assert abs(lr_at(st, 20) - 5e-5) <= 1e-20
    assert abs(lr_at(st, 70) - 5e-7) <= 1e-18


@pytest.fixture(scope="module")
def micro_dataset(tmp_path_factory):
    d = tmp_path_factory.mktemp("micro")
    syn.gen_dataset(["31", "502"], 4, syn.ParamRanges(noise_hi=0.01, blur_hi=0.3),
                    seed=5, out_dir=d, alphabet="0123456789")
    return syn.load_dataset(d)


def test_checkpoint_round_trip_bit_exact(tmp_path, micro_dataset, rng):
    m = Model(TINY, CODEC, np.random.default_rng(3))
    tc = TrainConfig(batch_size=2, steps=3, lr=1e-3, seed=2, sigma_p=0.0, sigma_t=0.0)
    state, _ = train(m, micro_dataset, tc, tmp_path / "run")
    path = tmp_path / "run" / "ckpt_final.bin"
    m2, state2, step2 = checkpoint.load(path)
    assert step2 == 3
    for name, p in m.params.items():
        assert np.array_equal(p.data, m2.params[name].data), name
        assert np.array_equal(state.m[name], state2.m[name])
        assert np.array_equal(state.v[name], state2.v[name])
    assert state2.t == state.t
    # saving the loaded model reproduces the file bit for bit
    checkpoint.save(tmp_path / "again.bin", m2, state2, step2)
    assert (tmp_path / "again.bin").read_bytes() == path.read_bytes()


def test_checkpoint_codec_mismatch_rejected(tmp_path, micro_dataset):
    m = Model(TINY, ctc_mod.Codec("01234"), np.random.default_rng(3))
    state = dc.AdamState()
    checkpoint.save(tmp_path / "c.bin", m, state, 0)
    m2, _, _ = checkpoint.load(tmp_path / "c.bin")
    with pytest.raises(checkpoint.CheckpointError):
        evaluate(m2, micro_dataset)


def test_resume_matches_uninterrupted_run(tmp_path, micro_dataset):
    tc = TrainConfig(batch_size=2, steps=10, lr=1e-3, seed=4, sigma_p=0.02, sigma_t=0.02,
                     checkpoint_every=5)
    m_full = Model(TINY, CODEC, np.random.default_rng(9))
    train(m_full, micro_dataset, tc, tmp_path / "full")

    m_half = Model(TINY, CODEC, np.random.default_rng(9))
    tc_half = TrainConfig(**{**tc.__dict__, "steps": 5})
    state_half, _ = train(m_half, micro_dataset, tc_half, tmp_path / "half")
    m_res, state_res, step = checkpoint.load(tmp_path / "half" / "ckpt_final.bin")
    assert step == 5
    train(m_res, micro_dataset, tc, tmp_path / "resumed", state=state_res, start_step=5)
    for name, p in m_full.params.items():
        assert np.array_equal(p.data, m_res.params[name].data), name


def test_train_aborts_on_nonfinite_and_dumps_batch(tmp_path, micro_dataset):
    m = Model(TINY, CODEC, np.random.default_rng(3))
    m.params["encoder.pair1.conv1.w"].data[0, 0, 0, 0] = np.nan
    tc = TrainConfig(batch_size=2, steps=2, seed=0, sigma_p=0.0, sigma_t=0.0)
    with pytest.raises(dc.NonFiniteError):
        train(m, micro_dataset, tc, tmp_path / "boom")
    assert (tmp_path / "boom" / "nonfinite_batch.json").exists()


def test_one_sample_overfit(tmp_path):
    syn.gen_dataset(["31"], 1, syn.ParamRanges(noise_hi=0.01, blur_hi=0.3), seed=5,
                    out_dir=tmp_path / "d", alphabet="0123456789")
    ds = syn.load_dataset(tmp_path / "d")
    cfg = ModelConfig(**{**TINY.to_json(), "lambda_recon": 0.0})
    m = Model(cfg, CODEC, np.random.default_rng(2))
    tc = TrainConfig(batch_size=1, steps=500, lr=2e-3, sigma_p=0.0, sigma_t=0.0, seed=1)
    _, rows = train(m, ds, tc, tmp_path / "run")
    final_ctc = float(rows[-1][1])
    assert final_ctc < 0.01
    res = evaluate(m, ds, "greedy")
    assert res["word_acc"] == 1.0 and res["cer"] == 0.0


def test_evaluate_metrics_and_order_invariance(micro_dataset):
    m = Model(TINY, CODEC, np.random.default_rng(3))
    r1 = evaluate(m, micro_dataset, "greedy")
    # permuting the dataset leaves the aggregate metrics unchanged
    import copy

    shuffled = copy.copy(micro_dataset)
    perm = [2, 0, 3, 1]
    shuffled.scenes = micro_dataset.scenes[perm]
    shuffled.templates = micro_dataset.templates[perm]
    shuffled.quads = micro_dataset.quads[perm]
    shuffled.transcripts = [micro_dataset.transcripts[i] for i in perm]
    r2 = evaluate(m, shuffled, "greedy")
    assert r1["word_acc"] == r2["word_acc"] and abs(r1["cer"] - r2["cer"]) <= 1e-12


def test_cer_single_substitution_is_point_two():
    assert ctc_mod.levenshtein("abcde", "abXde") / 5 == 0.2
