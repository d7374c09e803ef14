import json
import math

import numpy as np
import pytest

import hdrgan


def test_tonemap_endpoints_and_inverse():
    t = hdrgan.mu_tonemap(np.array([0.0, 1.0, 0.25]))
    assert t[0] == 0.0 and t[1] == 1.0
    assert abs(t[2] - math.log1p(5000 * 0.25) / math.log1p(5000)) < 1e-12
    back = hdrgan.mu_inverse(t)
    np.testing.assert_allclose(back, [0.0, 1.0, 0.25], atol=1e-12)
    with pytest.raises(hdrgan.DomainError):
        hdrgan.mu_tonemap(np.array([-1.0]))


def test_synthesis_matches_numpy_oracle():
    h = hdrgan.make_toy_scene(3, 32)
    assert h.shape == (32, 32, 3) and h.dtype == np.float32
    z = hdrgan.synthesize_ldr(h, 2.0)
    want = np.clip((h.astype(np.float64) * 2.0) ** (1 / 2.2), 0, 1)
    np.testing.assert_allclose(z, want, atol=1e-6)


def test_mask_and_dilation():
    ldr = np.zeros((8, 8, 3), np.float32)
    ldr[4, 4, 1] = 1.0
    m = hdrgan.threshold_mask(ldr)
    assert m.dtype == np.uint8 and m.sum() == 1 and m[4, 4] == 1
    assert hdrgan.dilate_mask(m, 1).sum() == 9


def test_metrics():
    a = np.full((16, 16, 3), 0.1)
    assert abs(hdrgan.psnr(a, np.zeros_like(a)) - 20.0) < 1e-9
    assert hdrgan.ssim(a, a) == pytest.approx(1.0)


def test_schedule_defaults():
    assert hdrgan.lr_at(0) == pytest.approx(2e-4)
    assert hdrgan.lr_at(149) == pytest.approx(1e-4)
    assert hdrgan.lr_at(199) == 0.0


def test_train_then_infer_is_deterministic(tmp_path):
    cfg = json.loads(hdrgan.default_train_config())
    cfg.update(image_size=32, epochs_const=1, epochs_decay=0, checkpoint_every=0, perceptual_channels=[4, 4],
               perceptual_taps=[0, 1])
    cfg["arch"].update(base_filters=2, depth=3, dropout=0.0)
    cfg["disc"].update(base_filters=2)
    pairs = []
    for s in range(2):
        h = hdrgan.make_toy_scene(s, 32)
        pairs.append((hdrgan.synthesize_ldr(h, 4.0), h))
    ckpt, losses = hdrgan.train(pairs, json.dumps(cfg), tmp_path)
    assert len(losses) == 2 and all(math.isfinite(r["loss_total"]) for r in losses)
    g = hdrgan.Generator.load(ckpt)
    a = g.infer(pairs[0][0])
    b = g.infer(pairs[0][0])
    assert a["hdr"].shape == (32, 32, 3)
    assert a["hdr"].tobytes() == b["hdr"].tobytes()
    assert (a["hdr"] >= 0).all()


def test_io_round_trip(tmp_path):
    h = hdrgan.make_toy_scene(1, 16)
    hdrgan.save_hdr(h, tmp_path / "x.pfm")
    np.testing.assert_array_equal(hdrgan.load_hdr(tmp_path / "x.pfm"), h)
    with pytest.raises(hdrgan.IoError):
        hdrgan.load_hdr(tmp_path / "missing.pfm")
