import hashlib
import json

import numpy as np
import pytest
from click.testing import CliRunner

from wfrender.cli import main


@pytest.fixture()
def runner():
    return CliRunner()


def test_usage_error_exits_2(runner):
    assert runner.invoke(main, ["train", "--no-such-flag"]).exit_code == 2


def test_make_toy_and_dataset_check(runner, tmp_path):
    out = tmp_path / "data"
    r = runner.invoke(main, ["make-toy", "--out", str(out), "--n", "3", "--size", "64"])
    assert r.exit_code == 0, r.output
    r = runner.invoke(main, ["dataset-check", str(out)])
    assert r.exit_code == 0
    assert "3 samples" in r.output


def test_dataset_check_reports_orphans(runner, tmp_path):
    out = tmp_path / "data"
    runner.invoke(main, ["make-toy", "--out", str(out), "--n", "2", "--size", "64"])
    victims = sorted((out / "annotations").iterdir())
    victims[0].unlink()
    r = runner.invoke(main, ["dataset-check", str(out)])
    assert r.exit_code == 1
    assert victims[0].stem in r.output


def test_train_one_epoch_writes_checkpoint(runner, tmp_path):
    data = tmp_path / "data"
    runner.invoke(main, ["make-toy", "--out", str(data), "--n", "4", "--size", "64"])
    work = tmp_path / "run"
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "input_size": 64, "base_channels": 4, "batch_size": 4, "max_epochs": 1,
        "augment": False, "msssim_scales": 2, "checkpoint_every": 1, "lr": 5e-4,
    }))
    r = runner.invoke(main, [
        "train", "--config", str(cfg), "--dataset", str(data), "--out", str(work),
    ])
    assert r.exit_code == 0, r.output
    assert (work / "ckpt_e0001.bin").is_file()
    assert (work / "metrics.jsonl").is_file()


def test_train_loss_weight_flags_reach_config(runner, tmp_path):
    data = tmp_path / "data"
    runner.invoke(main, ["make-toy", "--out", str(data), "--n", "2", "--size", "64"])
    work = tmp_path / "run"
    r = runner.invoke(main, [
        "train", "--dataset", str(data), "--out", str(work),
        "--input-size", "64", "--base-channels", "4", "--batch-size", "2",
        "--max-epochs", "1", "--no-augment", "--msssim-scales", "2",
        "--checkpoint-every", "1", "--lr", "5e-4", "--alpha-s", "7.5", "--lam", "0.25",
    ])
    assert r.exit_code == 0, r.output
    sidecar = json.loads((work / "ckpt_e0001.bin.json").read_text())
    assert sidecar["train_config"]["weights"]["alpha_s"] == 7.5
    assert sidecar["train_config"]["weights"]["lam"] == 0.25


def test_train_missing_dataset_exits_1_naming_path(runner, tmp_path):
    r = runner.invoke(main, ["train", "--dataset", str(tmp_path / "nowhere")])
    assert r.exit_code == 1
    assert "nowhere" in r.output


def test_train_config_file_toml(runner, tmp_path):
    data = tmp_path / "data"
    runner.invoke(main, ["make-toy", "--out", str(data), "--n", "2", "--size", "64"])
    cfg = tmp_path / "cfg.toml"
    cfg.write_text(
        'input_size = 64\nbase_channels = 4\nbatch_size = 2\nmax_epochs = 1\n'
        'augment = false\nmsssim_scales = 2\nlr = 5e-4\n'
    )
    r = runner.invoke(main, [
        "train", "--config", str(cfg), "--dataset", str(data), "--out", str(tmp_path / "run"),
    ])
    assert r.exit_code == 0, r.output


def test_train_lr_zero_leaves_weights_unchanged(runner, tmp_path):
    import torch

    data = tmp_path / "data"
    runner.invoke(main, ["make-toy", "--out", str(data), "--n", "2", "--size", "64"])
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "input_size": 64, "base_channels": 4, "batch_size": 2, "max_epochs": 1,
        "augment": False, "msssim_scales": 2, "checkpoint_every": 1, "seed": 0,
    }))
    work = tmp_path / "run"
    r = runner.invoke(main, [
        "train", "--config", str(cfg), "--dataset", str(data), "--out", str(work), "--lr", "0",
    ])
    assert r.exit_code == 0, r.output
    blob = torch.load(work / "ckpt_e0001.bin", weights_only=True)

    from wfrender.model import WireframeRenderer
    from wfrender.training import TrainConfig

    fresh = WireframeRenderer(TrainConfig.from_dict(json.loads(cfg.read_text())).renderer_config())

    def digest(sd):
        h = hashlib.sha256()
        for k in sorted(sd):
            h.update(k.encode())
            h.update(np.ascontiguousarray(sd[k].detach().numpy()).tobytes())
        return h.hexdigest()

    trained = {k: v for k, v in blob["model"].items() if "running" not in k and "batches" not in k}
    init = {k: v for k, v in fresh.state_dict().items() if "running" not in k and "batches" not in k}
    assert digest(trained) == digest(init)


class TestRender:
    def test_render_writes_two_256_pngs(self, runner, tmp_path, quick_ckpt):
        from PIL import Image

        wf_path = tmp_path / "wf.json"
        wf_path.write_text(
            '{"size":[256,256],"junctions":[[0,0],[255,255]],"segments":[[0,1]]}'
        )
        out = tmp_path / "renders"
        r = runner.invoke(main, [
            "render", "--checkpoint", str(quick_ckpt), "--wireframe", str(wf_path),
            "--out", str(out),
        ])
        assert r.exit_code == 0, r.output
        scene = Image.open(out / "wf_scene.png")
        rec = Image.open(out / "wf_wireframe.png")
        assert scene.size == (256, 256)
        assert rec.size == (256, 256)

    def test_render_twice_bitwise_identical(self, runner, tmp_path, quick_ckpt):
        wf_path = tmp_path / "wf.json"
        wf_path.write_text(
            '{"size":[256,256],"junctions":[[10,10],[200,200]],"segments":[[0,1]]}'
        )
        digests = []
        for sub in ("a", "b"):
            out = tmp_path / sub
            r = runner.invoke(main, [
                "render", "--checkpoint", str(quick_ckpt), "--wireframe", str(wf_path),
                "--out", str(out),
            ])
            assert r.exit_code == 0, r.output
            digests.append(hashlib.sha256((out / "wf_scene.png").read_bytes()).hexdigest())
        assert digests[0] == digests[1]

    def test_guided_render_differs_between_references(self, runner, tmp_path, guided_run):
        from PIL import Image

        _, _, _, ckpt = guided_run
        wf_path = tmp_path / "wf.json"
        wf_path.write_text(
            '{"size":[128,128],"junctions":[[0,0],[127,127]],"segments":[[0,1]]}'
        )
        outs = []
        for i, color in enumerate([(220, 40, 40), (40, 40, 220)]):
            ref = tmp_path / f"ref{i}.png"
            Image.new("RGB", (32, 32), color).save(ref)
            out = tmp_path / f"guided{i}"
            r = runner.invoke(main, [
                "render", "--checkpoint", str(ckpt), "--wireframe", str(wf_path),
                "--reference", str(ref), "--out", str(out),
            ])
            assert r.exit_code == 0, r.output
            outs.append(np.asarray(Image.open(out / "wf_scene.png")).astype(int))
        assert np.abs(outs[0] - outs[1]).sum() > 0

    def test_guided_checkpoint_requires_reference(self, runner, tmp_path, guided_run):
        _, _, _, ckpt = guided_run
        wf_path = tmp_path / "wf.json"
        wf_path.write_text(
            '{"size":[128,128],"junctions":[[0,0],[127,127]],"segments":[[0,1]]}'
        )
        r = runner.invoke(main, [
            "render", "--checkpoint", str(ckpt), "--wireframe", str(wf_path),
            "--out", str(tmp_path / "x"),
        ])
        assert r.exit_code == 1
        assert "reference" in r.output


def test_evaluate_matches_direct_metrics_call(runner, tmp_path):
    from wfrender.datasets import write_dataset
    from wfrender.metrics import LineSet, evaluate_run
    from wfrender.toydata import make_toy_samples

    samples = make_toy_samples(3, seed=0, size=128)
    write_dataset(samples, tmp_path / "root")
    gen = tmp_path / "gen"
    gen.mkdir()
    for p in (tmp_path / "root" / "images").iterdir():
        (gen / p.name).write_bytes(p.read_bytes())
    det = tmp_path / "det"
    det.mkdir()
    for s in samples:
        (det / f"{s.id}.json").write_text(LineSet.from_wireframe(s.wireframe).to_json(s.id))

    r = runner.invoke(main, [
        "evaluate", "--gen-dir", str(gen), "--real-dir", str(tmp_path / "root" / "images"),
        "--annotations", str(tmp_path / "root" / "annotations"),
        "--detector-dir", str(det), "--out", str(tmp_path / "report"),
    ])
    assert r.exit_code == 0, r.output
    cli_report = json.loads((tmp_path / "report" / "report.json").read_text())
    direct = evaluate_run(
        gen, tmp_path / "root" / "images", tmp_path / "root" / "annotations", det
    )
    for key, value in direct.items():
        assert cli_report[key] == pytest.approx(value, rel=1e-9)


def test_joint_train_smoke_and_sample(runner, tmp_path):
    data = tmp_path / "data"
    runner.invoke(main, ["make-toy", "--out", str(data), "--n", "8", "--size", "32"])
    work = tmp_path / "joint"
    r = runner.invoke(main, [
        "joint-train", "--dataset", str(data), "--out", str(work),
        "--steps", "2", "--batch-size", "4", "--base-channels", "8", "--noise-dim", "16",
    ])
    assert r.exit_code == 0, r.output
    assert (work / "generator.bin").is_file()
    grid = tmp_path / "grid.png"
    r = runner.invoke(main, [
        "joint-sample", "--generator", str(work / "generator.bin"),
        "--out", str(grid), "--n", "2",
    ])
    assert r.exit_code == 0, r.output
    from PIL import Image

    im = Image.open(grid)
    # n columns at the top scale (128), scene row above wireframe row
    assert im.size == (2 * 128, 2 * 128)
