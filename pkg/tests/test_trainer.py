"""Trainer tests: the warm-up/decay schedule, Adam against a hand-rolled
reference, loop determinism, checkpoint/metrics artifacts, and the
common-unit update cadence."""
import numpy as np
import pytest

from ckstn.data_io import SynthSpec, synth_generate
from ckstn.errors import NumericError, ValidationError
from ckstn.model import CkstnParams, toy_config
from ckstn.trainer import (METRICS_HEADER, AdamConfig, AdamState, TrainConfig,
                           adam_step, batch_losses, lr_at, train)


def tiny_corpus(pairs=8, seed=3):
    return synth_generate(SynthSpec(pairs=pairs, seed=seed))


def quick_cfg(**overrides):
    base = dict(epochs=2, batch_size=4, lr_low=1e-4, lr_high=1e-3,
                warmup_epochs=1, seed=5)
    base.update(overrides)
    return TrainConfig(**base)


# -- learning-rate schedule ------------------------------------------------------

def test_lr_schedule_piecewise_linear():
    cfg = TrainConfig(epochs=30, warmup_epochs=10, lr_low=1e-5, lr_high=1e-4)
    assert lr_at(0, cfg) == pytest.approx(1e-5)
    assert lr_at(10, cfg) == pytest.approx(1e-4)
    assert lr_at(30, cfg) == pytest.approx(1e-5)
    assert lr_at(5, cfg) == pytest.approx(5.5e-5)    # halfway up
    assert lr_at(20, cfg) == pytest.approx(5.5e-5)   # halfway down
    # continuity at the corner
    assert lr_at(10 - 1e-9, cfg) == pytest.approx(lr_at(10 + 1e-9, cfg))


def test_lr_schedule_no_warmup_and_bad_epoch():
    cfg = TrainConfig(epochs=10, warmup_epochs=0, lr_low=1e-5, lr_high=1e-4)
    assert lr_at(0, cfg) == pytest.approx(1e-4)  # starts at the peak
    assert lr_at(10, cfg) == pytest.approx(1e-5)
    with pytest.raises(ValidationError):
        lr_at(-1, cfg)
    with pytest.raises(ValidationError):
        lr_at(11, cfg)


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(lr_low=1e-3, lr_high=1e-4)
    with pytest.raises(ValueError):
        TrainConfig(epochs=5, warmup_epochs=5)
    with pytest.raises(ValueError):
        TrainConfig(margin=-0.1)


# -- Adam -------------------------------------------------------------------------

def hand_adam(theta, grads, lr, b1=0.9, b2=0.999, eps=1e-8):
    """Reference Adam trajectory for one coordinate over a list of grads."""
    m = v = 0.0
    for t, g in enumerate(grads, start=1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        theta = theta - lr * (m / (1 - b1 ** t)) / (np.sqrt(v / (1 - b2 ** t)) + eps)
    return theta


def test_adam_matches_hand_reference():
    p = CkstnParams(toy_config())
    p._add("w", np.array([[2.0]]))
    state = AdamState(p)
    grads = [0.5, -1.0, 0.25]
    for g in grads:
        p["w"].grad = np.array([[g]])
        adam_step(p, state, lr=0.1, cfg=AdamConfig())
    want = hand_adam(2.0, grads, lr=0.1)
    assert abs(p["w"].data[0, 0] - want) < 1e-14
    assert state.t == 3


def test_adam_skips_missing_grads_and_validates():
    p = CkstnParams(toy_config())
    p._add("w", np.array([[1.0]]))
    state = AdamState(p)
    adam_step(p, state, lr=0.1, cfg=AdamConfig())  # no grad: untouched
    assert p["w"].data[0, 0] == 1.0
    with pytest.raises(ValidationError):
        adam_step(p, state, lr=0.0, cfg=AdamConfig())
    p["w"].grad = np.array([[np.nan]])
    with pytest.raises(NumericError):
        adam_step(p, state, lr=0.1, cfg=AdamConfig())


# -- loop behavior -----------------------------------------------------------------

def test_train_writes_metrics_and_checkpoints(tmp_path):
    fs = tiny_corpus()
    result = train(fs, None, toy_config(), quick_cfg(), tmp_path / "run")
    lines = result.metrics_path.read_text().strip().split("\n")
    assert lines[0] == METRICS_HEADER
    assert len(lines) == 3  # header + one row per epoch
    assert (result.final_checkpoint / "weights.bin").exists()
    assert (result.best_checkpoint / "weights.bin").exists()
    loaded, units = CkstnParams.load(result.final_checkpoint)
    assert sorted(loaded.paths()) == sorted(result.params.paths())
    assert units is not None
    assert result.initial_l_all == result.metrics[0].l_all
    assert result.final_l_all == result.metrics[-1].l_all
    assert result.best_rsum == max(m.rsum for m in result.metrics)


def test_train_is_deterministic(tmp_path):
    fs = tiny_corpus()
    r1 = train(fs, None, toy_config(), quick_cfg(), tmp_path / "a")
    r2 = train(fs, None, toy_config(), quick_cfg(), tmp_path / "b")
    assert r1.metrics_path.read_text() == r2.metrics_path.read_text()
    assert (r1.final_checkpoint / "weights.bin").read_bytes() == \
        (r2.final_checkpoint / "weights.bin").read_bytes()


def test_unit_update_cadence(tmp_path):
    fs = tiny_corpus()
    # 8 pairs, batch 4 -> 2 batches/epoch, 2 epochs
    per_batch = train(fs, None, toy_config(),
                      quick_cfg(unit_update="per-batch"), tmp_path / "b")
    assert per_batch.units.t == 4
    per_pair = train(fs, None, toy_config(),
                     quick_cfg(unit_update="per-pair"), tmp_path / "p")
    assert per_pair.units.t == 16
    off = train(fs, None, toy_config(), quick_cfg(unit_update="off"),
                tmp_path / "o")
    assert off.units.t == 0


def test_zero_epoch_run_saves_initial_state(tmp_path):
    fs = tiny_corpus()
    result = train(fs, None, toy_config(), quick_cfg(epochs=0, warmup_epochs=0),
                   tmp_path / "zero")
    assert result.metrics == []
    assert (result.final_checkpoint / "weights.bin").exists()
    assert (result.best_checkpoint / "weights.bin").exists()
    assert np.isnan(result.final_l_all)


def test_batch_losses_are_consistent():
    fs = tiny_corpus()
    cfg = toy_config()
    params = CkstnParams.initialize(cfg, 1)
    units = params.init_common_units(2)
    loss, values, outputs = batch_losses(fs.pairings[:4], fs, params, units,
                                         cfg, quick_cfg())
    assert len(outputs) == 4
    assert values.l_con == pytest.approx(values.l_i2t + values.l_t2i, abs=1e-12)
    assert values.l_all == pytest.approx(values.l_con + values.l_kl, abs=1e-12)
    assert loss.item() == pytest.approx(values.l_all, abs=1e-12)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergent_run_aborts(tmp_path):
    # unclamped gates at an absurd learning rate overflow within two epochs
    fs = tiny_corpus(pairs=4)
    cfg = toy_config(gate_clamp=False)
    wild = quick_cfg(epochs=2, batch_size=2, lr_low=1e4, lr_high=1e5)
    with pytest.raises(NumericError):
        train(fs, None, cfg, wild, tmp_path / "blow")


def test_nonfinite_loss_writes_diagnostic(tmp_path, monkeypatch):
    import ckstn.trainer as trainer_mod
    from ckstn.losses import LossValues

    real = trainer_mod.batch_losses

    def poisoned(pairs, fs, params, units, cfg, train_cfg):
        loss, values, outputs = real(pairs, fs, params, units, cfg, train_cfg)
        bad = LossValues(l_i2t=values.l_i2t, l_t2i=values.l_t2i,
                         l_con=values.l_con, l_kl=values.l_kl,
                         l_all=float("nan"))
        return loss, bad, outputs

    monkeypatch.setattr(trainer_mod, "batch_losses", poisoned)
    fs = tiny_corpus(pairs=4)
    with pytest.raises(NumericError):
        train(fs, None, toy_config(), quick_cfg(epochs=1, batch_size=2,
                                                warmup_epochs=0), tmp_path / "d")
    dump = tmp_path / "d" / "diagnostic.json"
    assert dump.exists()
    text = dump.read_text()
    assert "epoch" in text and "pairs" in text


def test_train_without_adapter_runs(tmp_path):
    fs = tiny_corpus()
    result = train(fs, None, toy_config(m=0), quick_cfg(), tmp_path / "plain")
    assert result.units is None
    loaded, units = CkstnParams.load(result.final_checkpoint)
    assert units is None
