import json
import math
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dhmamba.dhnet import PRESETS, DHMamba, ModelConfig, init_params, parameter_count
from dhmamba.harness import (
    AdamW,
    Checkpoint,
    TrainConfig,
    conv_control,
    cosine_lr,
    count_cost,
    dump_config,
    erf_map,
    evaluate,
    load_checkpoint,
    load_config,
    make_pairs,
    save_checkpoint,
    support,
    train,
)
from dhmamba.harness.cli import main
from dhmamba.harness.cost import conv_cost
from dhmamba.harness.optim import decays
from dhmamba.harness.report import RunReport, read_csv, read_pgm
from dhmamba.harness.train import TrainingDiverged
from dhmamba.tensor import parameter

TINY_MODEL = ModelConfig(groups=1, blocks=1, channels=4, state_size=2, cab_ratio=2)
TINY = TrainConfig(model=TINY_MODEL, steps=3, batch_size=2, n_train=4, size=16)


# -------------------------------------------------------------------- config
def test_lr_schedule_endpoints():
    assert cosine_lr(0, 100, 1e-3, 1e-5) == 1e-3
    assert cosine_lr(100, 100, 1e-3, 1e-5) == 1e-5
    assert abs(cosine_lr(50, 100, 1e-3, 1e-5) - (1e-3 + 1e-5) / 2) < 1e-18


@given(st.integers(0, 500), st.integers(1, 500))
def test_lr_schedule_bounded_monotone(step, total):
    a = cosine_lr(step, total, 2e-3, 1e-5)
    b = cosine_lr(step + 1, total, 2e-3, 1e-5)
    assert 1e-5 <= b <= a <= 2e-3


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(lr_init=1e-5, lr_final=1e-3)
    with pytest.raises(ValueError):
        TrainConfig(lr_final=0.0)
    with pytest.raises(ValueError):
        TrainConfig(steps=-1)


def test_config_file_roundtrip(tmp_path):
    cfg = TrainConfig(model=ModelConfig(channels=8), steps=7, lr_init=1e-3)
    path = tmp_path / "c.json"
    path.write_text(dump_config(cfg))
    assert load_config(path) == cfg
    path.write_text(json.dumps({"train": {"stepz": 3}}))
    with pytest.raises(ValueError, match="stepz"):
        load_config(path)
    path.write_text(json.dumps({"model": {"chanels": 3}}))
    with pytest.raises(ValueError, match="chanels"):
        load_config(path)


def test_paper_hyperparameters_in_defaults():
    cfg = TrainConfig()
    assert (cfg.beta1, cfg.beta2, cfg.weight_decay) == (0.9, 0.99, 0.05)


# --------------------------------------------------------------------- optim
def test_adamw_first_step_and_decay():
    w = parameter(np.array([[1.0, -2.0]]))
    b = parameter(np.array([0.5]))
    opt = AdamW({"w": w, "b": b}, weight_decay=0.1)
    w.grad = np.array([[0.3, -0.1]])
    b.grad = np.array([2.0])
    opt.step(0.01)
    # first Adam step moves each entry by lr * sign(g) (bias-corrected), decay on matrices only
    np.testing.assert_allclose(w.data, np.array([[1.0, -2.0]]) * (1 - 0.001) - 0.01 * np.array([[1, -1]]), atol=1e-8)
    np.testing.assert_allclose(b.data, [0.5 - 0.01], atol=1e-8)


def test_decay_selection():
    assert decays("g0.conv.w", parameter(np.zeros((2, 2, 3, 3))))
    assert not decays("g0.conv.b", parameter(np.zeros(2)))
    assert not decays("g0.b0.dhm.img.hr.A_log", parameter(np.zeros((2, 2))))


# ------------------------------------------------------------------ training
def test_zero_steps_equals_initialization():
    ckpt, rep = train(TINY.with_(steps=0))
    init = init_params(TINY_MODEL)
    assert ckpt.step == 0 and not rep.losses
    assert all(np.array_equal(ckpt.weights[k], init[k].data) for k in init)


def test_training_deterministic(tmp_path):
    _, a = train(TINY, tmp_path / "a")
    _, b = train(TINY, tmp_path / "b")
    assert (tmp_path / "a" / "losses.csv").read_text() == (tmp_path / "b" / "losses.csv").read_text()
    assert len(a.losses) == 3
    rows = read_csv(tmp_path / "a" / "losses.csv")
    assert list(rows[0]) == ["step", "lr", "loss", "grad_norm"]
    assert float(rows[0]["lr"]) == TINY.lr_init


def test_training_writes_outputs(tmp_path):
    ckpt, _ = train(TINY, tmp_path)
    assert {"model.ckpt", "losses.csv", "config.json"} <= {p.name for p in tmp_path.iterdir()}
    again = load_checkpoint(tmp_path / "model.ckpt")
    assert again.step == 3 and again.config == TINY
    assert again.rng_state == ckpt.rng_state
    assert "m:shallow.w" in again.optimizer


def test_nan_loss_aborts():
    data = make_pairs(2, 8, "cartesian", 4, 0, "train")
    data.inputs[0, 0, 0, 0] = np.nan
    cfg = TINY.with_(n_train=2, size=8, batch_size=2)
    with pytest.raises(TrainingDiverged, match="step 0"):
        train(cfg, data=data)


def test_checkpoint_roundtrip_bit_identical(tmp_path):
    cfg = TrainConfig(model=ModelConfig(), steps=0)
    m = DHMamba.create(cfg.model)
    for t in m.params.values():  # make sure non-trivial values survive
        t.data += 1e-3 * np.sin(np.arange(t.size)).reshape(t.shape)
    x = np.random.default_rng(0).normal(size=(2, 2, 16, 16))
    save_checkpoint(tmp_path / "m.ckpt", Checkpoint.from_model(cfg, m, step=5))
    m2 = load_checkpoint(tmp_path / "m.ckpt").model()
    assert np.array_equal(m(x).data, m2(x).data)


def test_checkpoint_mismatch(tmp_path):
    cfg = TrainConfig(model=TINY_MODEL, steps=0)
    ck = Checkpoint.from_model(cfg, DHMamba.create(TINY_MODEL))
    ck.config = cfg.with_(model=TINY_MODEL.with_(channels=8))
    with pytest.raises(ValueError):
        ck.model()
    with pytest.raises(ValueError):
        evaluate(ck, 1)
    (tmp_path / "junk").write_bytes(b"hello")
    with pytest.raises(ValueError):
        load_checkpoint(tmp_path / "junk")


# ---------------------------------------------------------------- evaluation
def test_evaluate_untrained_identity_mask():
    ck, _ = train(TINY.with_(steps=0))
    data = make_pairs(3, 16, "random", 1, 0, "test")  # AF=1: input equals target
    rep = evaluate(ck, data=data)
    assert len(rep.rows) == 3
    assert all(r.zf_psnr == 100 and r.zf_ssim > 1 - 1e-9 for r in rep.rows)
    assert all(math.isfinite(r.model_psnr) for r in rep.rows)


def test_zero_filled_baseline_model_independent():
    a, _ = train(TINY.with_(steps=0))
    b, _ = train(TINY.with_(steps=2))
    ra, rb = evaluate(a, 3), evaluate(b, 3)
    assert [r.zf_psnr for r in ra.rows] == [r.zf_psnr for r in rb.rows]
    assert [r.model_psnr for r in ra.rows] != [r.model_psnr for r in rb.rows]


def test_report_aggregates_match_rows(tmp_path):
    ck, _ = train(TINY.with_(steps=0))
    rep = evaluate(ck, 4)
    path = tmp_path / "m.csv"
    path.write_text(rep.metrics_csv())
    rows = read_csv(path)
    assert len(rows) == 4
    for col, (mean, std) in rep.aggregate().items():
        vals = np.array([float(r[col]) for r in rows])
        assert abs(vals.mean() - mean) < 1e-12 and abs(vals.std() - std) < 1e-12
    assert "±" in rep.summary()


def test_train_and_eval_splits_disjoint():
    tr = make_pairs(8, 16, "cartesian", 4, 0, "train")
    te = make_pairs(8, 16, "cartesian", 4, 0, "test")
    assert not set(tr.seeds) & set(te.seeds)


# ----------------------------------------------------------------------- erf
def test_erf_conv_control_support():
    img = np.random.default_rng(0).normal(size=(2, 12, 12))
    m = erf_map(conv_control(), img, (5, 6))
    assert support(m) == 9
    assert np.all(m[4:7, 5:8] > 0)
    assert np.all(m >= 0)


def test_erf_edge_center_and_bounds():
    img = np.zeros((2, 8, 8))
    assert support(erf_map(conv_control(), img, (0, 0))) == 4
    with pytest.raises(ValueError):
        erf_map(conv_control(), img, (8, 0))


def test_erf_untrained_dhmamba_is_global():
    m = DHMamba.create(TINY_MODEL)
    e = erf_map(m, np.random.default_rng(1).normal(size=(2, 16, 16)), (8, 8))
    assert np.all(e >= 0)
    assert support(e) >= 0.95 * e.size


# ---------------------------------------------------------------------- cost
def test_single_conv_closed_form():
    params, macs = conv_cost(2, 16, 3, 32, 32)
    assert params == 2 * 16 * 9 + 16 == 304
    assert macs == 2 * 16 * 9 * 32 * 32


@pytest.mark.parametrize(
    "cfg",
    [ModelConfig(), ModelConfig(n_lr=0), ModelConfig(n_lr=4, stride=3), ModelConfig(expand=2, dt_rank=2, shuffle=2),
     TINY_MODEL],
)
def test_cost_params_match_init(cfg):
    assert count_cost(cfg, 17, 20).params == parameter_count(init_params(cfg))


def test_cost_decreases_with_lr_paths():
    for cfg in (ModelConfig(), PRESETS["paper"]):
        macs = [count_cost(cfg.with_(n_lr=n), 64, 64).macs for n in range(4)]
        assert all(a > b for a, b in zip(macs, macs[1:]))


def test_cost_csv_total_row():
    rep = count_cost(ModelConfig(), 32, 32)
    total = rep.csv_rows()[-1]
    assert total[0] == "total" and total[2] == rep.params and total[3] == rep.macs


# ----------------------------------------------------------------------- cli
def test_cli_mask_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.pgm", tmp_path / "b.pgm"
    for p in (a, b):
        assert main(["mask", "--kind", "cartesian", "--af", "4", "--w", "100", "--seed", "7", "--out", str(p)]) == 0
    assert a.read_bytes() == b.read_bytes()
    m = read_pgm(a)
    assert m.shape == (100, 100) and set(np.unique(m)) <= {0, 1}


def test_cli_cost_total_matches(tmp_path):
    out = tmp_path / "cost.csv"
    assert main(["cost", "--preset", "paper", "--out", str(out)]) == 0
    rows = read_csv(out)
    rep = count_cost(PRESETS["paper"], 256, 256)
    assert rows[-1]["layer"] == "total"
    assert int(rows[-1]["params"]) == rep.params and int(rows[-1]["macs"]) == rep.macs
    assert sum(int(r["macs"]) for r in rows[:-1]) == rep.macs


def test_cli_scan_dump(capsys):
    assert main(["scan-dump", "--family", "circular", "--index", "2", "--w", "3"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "t,i,j,ring" and lines[1] == "0,1,1,0" and len(lines) == 10


def test_cli_phantom_and_plot(tmp_path):
    out = tmp_path / "ph.pgm"
    assert main(["phantom", "--w", "16", "--seed", "3", "--out", str(out), "--plot",
                 "--complex-out", str(tmp_path / "ph.tensors")]) == 0
    assert read_pgm(out).shape == (16, 16)
    assert (tmp_path / "ph.png").read_bytes()[:4] == b"\x89PNG"
    assert (tmp_path / "ph.tensors").exists()


def test_cli_train_eval_erf(tmp_path, capsys):
    run = tmp_path / "run"
    args = ["train", "--steps", "2", "--batch-size", "2", "--n-train", "2", "--size", "8", "--groups", "1",
            "--blocks", "1", "--channels", "4", "--state-size", "2", "--out", str(run), "--eval", "2"]
    assert main(args) == 0
    assert (run / "metrics.csv").exists() and (run / "summary.txt").exists()
    assert main(["eval", "--ckpt", str(run / "model.ckpt"), "--n-images", "2", "--out", str(tmp_path / "ev")]) == 0
    assert len(read_csv(tmp_path / "ev" / "metrics.csv")) == 2
    assert main(["erf", "--ckpt", str(run / "model.ckpt"), "--out", str(tmp_path / "erf")]) == 0
    assert read_pgm(tmp_path / "erf" / "erf.pgm").shape == (8, 8)
    assert main(["erf", "--control", "--size", "10", "--out", str(tmp_path / "ctl")]) == 0
    assert "support 9/100" in capsys.readouterr().out


def test_cli_env_seed(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("DHMAMBA_SEED", "42")
    assert main(["train", "--dry-run", "--out", str(tmp_path)]) == 0
    cfg = json.loads(capsys.readouterr().out)
    assert cfg["train"]["seed"] == 42 and cfg["model"]["seed"] == 42


def test_cli_unknown_flag_exit_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["mask", "--bogus"])
    assert exc.value.code == 2
    assert "usage" in capsys.readouterr().err


def test_cli_selftest_subprocess():
    env = dict(os.environ)
    proc = subprocess.run([sys.executable, "-m", "dhmamba.harness.cli", "selftest", "--quiet"],
                          capture_output=True, text=True, env=env, timeout=300)
    assert proc.returncode == 0, proc.stdout + proc.stderr


def test_loss_csv_reloads_exactly():
    rep = RunReport(losses=[{"step": 0, "lr": 0.1, "loss": 1 / 3, "grad_norm": 2.0}])
    line = rep.loss_csv().splitlines()[1]
    assert float(line.split(",")[2]) == 1 / 3


def test_gradient_clip_rescales_to_cap():
    w = parameter(np.array([[3.0, 4.0]]))
    w.grad = np.array([[3.0, 4.0]])
    opt = AdamW({"w": w})
    assert opt.clip(1.0) == 5.0
    np.testing.assert_allclose(w.grad, [[0.6, 0.8]])
    assert opt.clip(10.0) == 1.0
    np.testing.assert_allclose(w.grad, [[0.6, 0.8]])
    with pytest.raises(ValueError):
        TrainConfig(grad_clip=0.0)
