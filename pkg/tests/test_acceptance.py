"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines; every criterion asserts its stated tolerance and runtime budget.
"""

import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
import torch

from conftest import toy_train_config
from oracles import (
    finite_diff_grad,
    relative_grad_error,
    sap_bruteforce,
    vectorize_lines,
)
from wfrender.datasets import batch_to_tensors
from wfrender.joint_gan import JointGanConfig, JointGanTrainer, consistency_loss
from wfrender.losses import (
    ConvFeatureExtractor,
    IdentityExtractor,
    gen_loss,
    hist_loss,
    ms_ssim,
    perceptual_distance,
    rec_loss,
)
from wfrender.metrics import FeatureStats, LineSet, fid, inception_score, sap, sap_pooled
from wfrender.model import (
    DiscriminatorConfig,
    PatchDiscriminator,
    RendererConfig,
    WireframeRenderer,
)
from wfrender.toydata import make_toy_samples
from wfrender.training import Trainer


def _report(name: str, elapsed: float, limit: float) -> None:
    print(f"\n[ACCEPTANCE] {name}: PASS ({elapsed:.1f}s, limit {limit:.0f}s)")
    assert elapsed < limit, f"{name} exceeded its runtime budget: {elapsed:.1f}s >= {limit}s"


def test_loss_identity_suite():
    start = time.time()
    x = torch.from_numpy(
        np.random.default_rng(0).uniform(-1, 1, (2, 1, 256, 256))
    ).float()
    y = torch.from_numpy(
        np.random.default_rng(1).uniform(-1, 1, (2, 3, 256, 256))
    ).float()
    ext = ConvFeatureExtractor()
    assert float(rec_loss(x, x)[0]) == pytest.approx(0.0, abs=1e-6)
    assert float(gen_loss(y, y, ext)[0]) == pytest.approx(0.0, abs=1e-6)
    assert float(perceptual_distance(y, y, ext)) == pytest.approx(0.0, abs=1e-6)
    h = torch.rand(2, 256, 3)
    assert float(hist_loss(h, h)) == pytest.approx(0.0, abs=1e-6)
    assert float(ms_ssim(x, x)) == pytest.approx(1.0, abs=1e-6)
    assert float(ms_ssim(y, y)) == pytest.approx(1.0, abs=1e-6)
    _report("loss identity suite", time.time() - start, 10.0)


def test_gradient_suite():
    start = time.time()
    rng = np.random.default_rng(0)

    a_np = rng.uniform(-0.8, 0.8, (1, 1, 8, 8))
    b_np = rng.uniform(-0.8, 0.8, (1, 1, 8, 8))

    def f_ms(arr):
        return float(
            ms_ssim(torch.from_numpy(arr).double(), torch.from_numpy(b_np).double(),
                    scales=2, win_size=3)
        )

    a = torch.from_numpy(a_np.copy()).double().requires_grad_(True)
    ms_ssim(a, torch.from_numpy(b_np).double(), scales=2, win_size=3).backward()
    err_ms = relative_grad_error(a.grad.numpy(), finite_diff_grad(f_ms, a_np.copy()))
    assert err_ms < 1e-3

    y_np = rng.uniform(-0.8, 0.8, (1, 3, 8, 8))
    t_np = rng.uniform(-0.8, 0.8, (1, 3, 8, 8))
    ext = IdentityExtractor(unit_normalize=True).double()

    def f_pd(arr):
        return float(
            perceptual_distance(torch.from_numpy(t_np).double(), torch.from_numpy(arr).double(), ext)
        )

    yv = torch.from_numpy(y_np.copy()).double().requires_grad_(True)
    perceptual_distance(torch.from_numpy(t_np).double(), yv, ext).backward()
    err_pd = relative_grad_error(yv.grad.numpy(), finite_diff_grad(f_pd, y_np.copy()))
    assert err_pd < 1e-3
    _report(
        f"gradient suite (ms-ssim rel {err_ms:.2e}, perceptual rel {err_pd:.2e})",
        time.time() - start,
        60.0,
    )


def test_metric_oracle_suite():
    start = time.time()

    # FID closed forms
    a = FeatureStats(np.array([0.0]), np.array([[1.0]]), 10)
    b = FeatureStats(np.array([1.0]), np.array([[1.0]]), 10)
    assert fid(a, b) == pytest.approx(1.0, abs=1e-8)
    rng = np.random.default_rng(3)
    mu_a, mu_b = rng.normal(size=2), rng.normal(size=2)
    var_a, var_b = rng.uniform(0.5, 2.0, 2), rng.uniform(0.5, 2.0, 2)
    diag = fid(
        FeatureStats(mu_a, np.diag(var_a), 10), FeatureStats(mu_b, np.diag(var_b), 10)
    )
    closed = sum(
        (mu_a[i] - mu_b[i]) ** 2 + (np.sqrt(var_a[i]) - np.sqrt(var_b[i])) ** 2
        for i in range(2)
    )
    assert diag == pytest.approx(closed, abs=1e-8)

    # sAP vs the brute-force matcher on randomized 5-line instances
    rng = np.random.default_rng(7)
    for trial in range(24):
        gt = np.concatenate(
            [rng.uniform(0, 128, (5, 4)), np.ones((5, 1))], axis=1
        )
        n_pred = int(rng.integers(1, 9))
        pred = np.concatenate(
            [rng.uniform(0, 128, (n_pred, 4)), rng.uniform(0, 1, (n_pred, 1))], axis=1
        )
        k = min(5, n_pred)
        pred[:k, :4] = gt[:k, :4] + rng.normal(0, 1.5, (k, 4))
        got, _, _ = sap(LineSet(pred), LineSet(gt), 10.0)
        assert got == sap_bruteforce(pred, gt, 10.0)

        aps = [sap(LineSet(pred), LineSet(gt), t)[0] for t in (5.0, 10.0, 15.0)]
        assert aps[0] <= aps[1] <= aps[2]

    # inception score closed forms
    assert inception_score(np.tile([0.25, 0.75], (6, 1))) == pytest.approx(1.0, abs=1e-12)
    assert inception_score(np.eye(7)) == pytest.approx(7.0, abs=1e-9)
    _report("metric oracle suite", time.time() - start, 60.0)


def test_architecture_suite():
    start = time.time()

    # full-size shape chain
    model = WireframeRenderer(RendererConfig.build(base_channels=64, seed=0)).eval()
    with torch.no_grad():
        e = model.encode(torch.zeros(1, 1, 256, 256))
        assert tuple(e.shape) == (1, 512, 16, 16)
        xw = model.decode_wireframe(e)
        ys = model.decode_scene(e)
    assert tuple(xw.shape) == (1, 1, 256, 256)
    assert tuple(ys.shape) == (1, 3, 256, 256)
    for t in (xw, ys):
        assert float(t.min()) >= -1.0 and float(t.max()) <= 1.0

    disc = PatchDiscriminator(DiscriminatorConfig(base_channels=64)).eval()
    with torch.no_grad():
        scores = disc(xw, ys)
    assert tuple(scores.shape) == (1, 1, 30, 30)

    # partition + gradient reach on a small instance
    trainer = Trainer(
        toy_train_config(input_size=64, base_channels=4, batch_size=2, msssim_scales=2)
    )
    x, y = batch_to_tensors(make_toy_samples(2, seed=0, size=64))
    trainer.model.train()
    e = trainer.model.encode(x)
    x_hat = trainer.model.decode_wireframe(e)
    y_hat = trainer.model.decode_scene(e)

    # d-step leaves generator parameters fixed
    import hashlib

    def digest(module):
        h = hashlib.sha256()
        for name, p in sorted(module.named_parameters()):
            h.update(p.detach().numpy().tobytes())
        return h.hexdigest()

    g_before = digest(trainer.model)
    real = trainer.discriminator(x, y)
    fake = trainer.discriminator(x_hat.detach(), y_hat.detach())
    from wfrender.losses import adversarial_losses

    d_loss, _ = adversarial_losses(real, fake)
    trainer.opt_d.zero_grad()
    d_loss.backward()
    trainer.opt_d.step()
    assert digest(trainer.model) == g_before
    assert all(p.grad is None for p in trainer.model.parameters())

    # g_adv reaches encoder, wireframe decoder, and scene decoder parameters
    _, g_adv = adversarial_losses(real.detach(), trainer.discriminator(x_hat, y_hat))
    g_adv.backward()
    for group in (
        trainer.model.encoder_parameters(),
        trainer.model.wireframe_decoder_parameters(),
        trainer.model.scene_decoder_parameters(),
    ):
        assert sum(float(p.grad.abs().sum()) for p in group if p.grad is not None) > 0
    _report("architecture suite", time.time() - start, 120.0)


@pytest.fixture(scope="session")
def overfit_timing(overfit_run):
    return overfit_run


def test_overfit_smoke(overfit_run, toy_samples128):
    # session fixture trains 500 full-batch steps on the 8-room toy set
    start = time.time()
    trainer, samples, last_report = overfit_run
    assert last_report.rec_l1 < 0.05, f"rec_l1 {last_report.rec_l1}"
    assert last_report.gen_l1 < 0.10, f"gen_l1 {last_report.gen_l1}"

    x, _ = batch_to_tensors(samples)
    trainer.model.eval()
    with torch.no_grad():
        x_hat = trainer.model.decode_wireframe(trainer.model.encode(x))
    ious = []
    for i in range(len(samples)):
        pred = x_hat[i, 0].numpy() > 0
        gt = x[i, 0].numpy() > 0
        ious.append(np.logical_and(pred, gt).sum() / max(np.logical_or(pred, gt).sum(), 1))
    mean_iou = float(np.mean(ious))
    assert mean_iou > 0.8, f"IoU {mean_iou}"
    _report(
        f"overfit smoke (rec_l1 {last_report.rec_l1:.3f}, gen_l1 {last_report.gen_l1:.3f}, "
        f"IoU {mean_iou:.3f})",
        time.time() - start,
        7200.0,
    )


def test_sap_directionality(overfit_run):
    start = time.time()
    trainer, samples, _ = overfit_run
    x, _ = batch_to_tensors(samples)

    def pooled(model_trainer):
        model_trainer.model.eval()
        with torch.no_grad():
            x_hat = model_trainer.model.decode_wireframe(model_trainer.model.encode(x))
        pairs = []
        for i, s in enumerate(samples):
            pred = vectorize_lines(x_hat[i, 0].numpy() > 0)
            pairs.append((LineSet(pred), LineSet.from_wireframe(s.wireframe)))
        return sap_pooled(pairs, 10.0)

    trained = pooled(trainer)
    control = pooled(Trainer(toy_train_config(seed=123)))
    assert trained >= 0.5, f"trained sAP10 {trained}"
    assert control < 0.05, f"untrained control sAP10 {control}"
    _report(
        f"sAP directionality (trained {trained:.3f}, control {control:.3f})",
        time.time() - start,
        600.0,
    )


def test_joint_gan_suite():
    start = time.time()

    # trivial-zero cases, exact
    zeros_w = [torch.zeros(2, 1, 8, 8), torch.zeros(2, 1, 16, 16)]
    zeros_s = [torch.zeros(2, 3, 8, 8), torch.zeros(2, 3, 16, 16)]
    assert float(consistency_loss(zeros_w, zeros_s)) == 0.0
    flat_lo = torch.full((2, 1, 8, 8), 0.25)
    flat_hi = torch.full((2, 1, 16, 16), 0.25)
    s_lo = torch.full((2, 3, 8, 8), -0.5)
    s_hi = torch.full((2, 3, 16, 16), -0.5)
    assert float(
        consistency_loss([flat_lo, flat_hi], [s_lo, s_hi], lambda1=1.0, lambda2=5.0)
    ) == pytest.approx(0.0, abs=1e-12)

    # 64-step training on 16 synthetic samples, losses finite
    cfg = JointGanConfig(noise_dim=16, scales=(8, 16, 32), base_channels=8, batch_size=8, seed=0)
    trainer = JointGanTrainer(cfg)
    x, y = batch_to_tensors(make_toy_samples(16, seed=0, size=32))
    rng = np.random.default_rng(0)
    for _ in range(64):
        idx = rng.permutation(16)[:8]
        pair_idx = rng.permutation(16)[:8]
        rep = trainer.train_step(x[idx], y[pair_idx], torch.randn(8, 16))
        assert np.isfinite([rep.g_total, rep.g_adv, rep.g_con, *rep.d_losses]).all()

    # unpaired-shuffle invariance of the discriminator losses
    z = torch.randn(8, 16)
    perm = torch.randperm(8)
    all_losses = []
    for scenes in (y[:8], y[:8][perm]):
        probe = JointGanTrainer(cfg)
        fake = probe.generator(z)
        reals_w = probe._scale_pyramid(x[:8], cfg.scales)
        reals_s = probe._scale_pyramid(scenes, cfg.scales)
        vals = []
        with torch.no_grad():
            for i in range(len(cfg.scales)):
                for disc, real, fake_out in (
                    (probe.disc_w[i], reals_w[i], fake["wireframe"][i]),
                    (probe.disc_s[i], reals_s[i], fake["scene"][i]),
                ):
                    vals.append(
                        float(
                            torch.nn.functional.softplus(-disc(real)).mean()
                            + torch.nn.functional.softplus(disc(fake_out)).mean()
                        )
                    )
        all_losses.append(vals)
    np.testing.assert_allclose(all_losses[0], all_losses[1], rtol=1e-5)
    _report("joint-GAN suite", time.time() - start, 300.0)


def test_service_contract(quick_ckpt):
    from fastapi.testclient import TestClient

    from wfrender.service import create_app

    start = time.time()
    app = create_app(quick_ckpt, max_inflight=4)
    wf = {"size": [256, 256], "junctions": [[0, 0], [255, 255]], "segments": [[0, 1]]}
    with TestClient(app) as client:
        health = client.get("/v1/health")
        assert health.status_code == 200
        assert health.json()["status"] == "ok"

        ok = client.post("/v1/render", json={"wireframe": wf})
        assert ok.status_code == 200
        import base64
        import io

        from PIL import Image

        for key in ("scene", "reconstructed_wireframe"):
            img = Image.open(io.BytesIO(base64.b64decode(ok.json()[key])))
            assert img.size == (256, 256)

        bad = dict(wf, segments=[[0, 5]])
        assert client.post("/v1/render", json={"wireframe": bad}).status_code == 422

        def hit(_):
            r = client.post("/v1/render", json={"wireframe": wf})
            assert r.status_code == 200
            return r.json()["scene"]

        with ThreadPoolExecutor(max_workers=16) as pool:
            payloads = list(pool.map(hit, range(16)))
        assert len(set(payloads)) == 1
    _report("service contract", time.time() - start, 120.0)
