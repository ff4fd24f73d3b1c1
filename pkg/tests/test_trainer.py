"""Loss, optimizer, schedule, config parsing, and the training loop."""

import io
import math

import numpy as np
import pytest

from oracles import adamw_reference, central_difference, focal_reference
from slskit.errors import DataError, NumericError, UsageError
from slskit.featstore import FixtureSpec, InMemoryStacks, Manifest, TrialRecord, synth_stacks
from slskit.trainer import (
    AdamState,
    TrainConfig,
    adamw_step,
    cosine_lr,
    focal_loss,
    load_config,
    train,
    write_history_csv,
)


# ---------------------------------------------------------------------------
# focal loss


def test_focal_frozen_values():
    # gamma 0, alpha 1/2 halves plain cross-entropy: loss(0) = ln(2)/2
    loss, d = focal_loss(0.0, 1, gamma=0.0, alpha=0.5)
    assert loss == pytest.approx(0.5 * math.log(2.0), abs=1e-16)
    assert d == pytest.approx(-0.25, abs=1e-16)
    # recipe defaults at score 0: 0.25 * (1/2)^2 * ln 2
    loss, d = focal_loss(0.0, 1, gamma=2.0, alpha=0.25)
    assert loss == pytest.approx(0.25 * 0.25 * math.log(2.0), abs=1e-16)
    assert d == pytest.approx(-0.0625 * (math.log(2.0) + 0.5), abs=1e-16)


def test_focal_matches_naive_reference_at_moderate_scores():
    for score in (-6.0, -1.3, 0.0, 0.4, 2.0, 7.5):
        for label in (0, 1):
            loss, _ = focal_loss(score, label, gamma=2.0, alpha=0.25)
            assert loss == pytest.approx(focal_reference(score, label, 2.0, 0.25), rel=1e-12)


def test_focal_derivative_matches_finite_differences():
    for score in (-3.0, -0.2, 0.0, 1.1, 4.0):
        for label in (0, 1):
            for gamma in (0.0, 1.0, 2.0):
                _, d = focal_loss(score, label, gamma, 0.25)
                fd = central_difference(
                    lambda v: focal_loss(float(v[0]), label, gamma, 0.25)[0],
                    np.array([score]),
                    h=1e-6,
                )[0]
                assert d == pytest.approx(fd, rel=1e-7, abs=1e-10)


def test_focal_well_classified_examples_vanish():
    loss, d = focal_loss(30.0, 1, gamma=2.0, alpha=0.25)
    assert 0.0 <= loss < 1e-12
    assert abs(d) < 1e-12


def test_focal_stable_at_extreme_scores():
    for score in (-500.0, 500.0):
        for label in (0, 1):
            loss, d = focal_loss(score, label, gamma=2.0, alpha=0.25)
            assert math.isfinite(loss) and math.isfinite(d)
    # confidently wrong: loss is linear in |score|, slope alpha_t
    loss, d = focal_loss(500.0, 0, gamma=2.0, alpha=0.25)
    assert loss == pytest.approx(0.75 * 500.0, rel=1e-12)
    assert d == pytest.approx(0.75, rel=1e-12)


def test_focal_rejects_bad_inputs():
    with pytest.raises(UsageError):
        focal_loss(0.0, 2, 2.0, 0.25)
    with pytest.raises(NumericError):
        focal_loss(float("nan"), 1, 2.0, 0.25)


# ---------------------------------------------------------------------------
# optimizer


def test_adamw_matches_reference_over_ten_steps():
    rng = np.random.default_rng(0)  # oracle comparison only, not a product path
    params = rng.normal(size=6)
    state = AdamState.fresh(6)
    ref_p, ref_m, ref_v, ref_t = params.tolist(), [0.0] * 6, [0.0] * 6, 0
    for _ in range(10):
        grads = rng.normal(size=6)
        params, state = adamw_step(params, grads, state, 1e-3, 1e-2)
        ref_p, ref_m, ref_v, ref_t = adamw_reference(ref_p, grads, ref_m, ref_v, ref_t, 1e-3, 1e-2)
        assert params == pytest.approx(ref_p, rel=1e-14)
    assert state.t == ref_t == 10


def test_adamw_single_step_analytic():
    # by hand: m=0.05, v=2.5e-4, m_hat=0.5, v_hat=0.25
    params, state = adamw_step(np.array([1.0]), np.array([0.5]), AdamState.fresh(1), 0.1, 0.0)
    expected = 1.0 - 0.1 * 0.5 / (0.5 + 1e-8)
    assert params[0] == pytest.approx(expected, abs=1e-15)
    assert state.m[0] == pytest.approx(0.05) and state.v[0] == pytest.approx(2.5e-4)


def test_adamw_decay_is_decoupled():
    # zero gradient: the moment path is inert, only decay moves params
    params, _ = adamw_step(np.array([2.0]), np.array([0.0]), AdamState.fresh(1), 0.1, 0.01)
    assert params[0] == pytest.approx(2.0 - 0.1 * 0.01 * 2.0, abs=1e-15)


def test_adamw_rejects_nonfinite_gradient():
    with pytest.raises(NumericError, match="non-finite gradient"):
        adamw_step(np.zeros(2), np.array([1.0, np.inf]), AdamState.fresh(2), 1e-3, 0.0)


def test_adamw_functional_state():
    state = AdamState.fresh(1)
    adamw_step(np.array([1.0]), np.array([1.0]), state, 1e-3, 0.0)
    assert state.t == 0 and state.m[0] == 0.0  # input state untouched


# ---------------------------------------------------------------------------
# schedule


def test_cosine_pinned_values():
    cfg = TrainConfig()  # lr 1e-5, eta_min 1e-6, t_max 10
    assert cosine_lr(0, cfg) == 1e-5
    assert cosine_lr(5, cfg) == 5.5e-6
    assert cosine_lr(10, cfg) == 1e-6


def test_cosine_is_periodic_and_monotone_within_cycle():
    cfg = TrainConfig()
    values = [cosine_lr(t, cfg) for t in range(11)]
    assert all(a > b for a, b in zip(values, values[1:]))
    assert cosine_lr(15, cfg) == cosine_lr(5, cfg)
    assert cosine_lr(20, cfg) == cosine_lr(10, cfg)


def test_cosine_degenerate_flat_schedule():
    cfg = TrainConfig(learning_rate=1e-6, eta_min=1e-6)
    assert cosine_lr(0, cfg) == cosine_lr(7, cfg) == 1e-6


def test_config_validation():
    with pytest.raises(UsageError):
        TrainConfig(learning_rate=1e-7).validate()  # below eta_min
    with pytest.raises(UsageError):
        TrainConfig(batch_size=0).validate()
    with pytest.raises(UsageError):
        TrainConfig(focal_alpha=1.0).validate()
    with pytest.raises(UsageError):
        TrainConfig(t_max=0).validate()
    TrainConfig().validate()


# ---------------------------------------------------------------------------
# config files


def test_load_config_overrides_and_types():
    text = "# run settings\nlearning_rate = 2e-5\nepochs = 3\n\nseed = 9\n"
    cfg = load_config(io.StringIO(text))
    assert cfg.learning_rate == 2e-5
    assert cfg.epochs == 3
    assert cfg.seed == 9
    assert cfg.batch_size == 5  # untouched default


def test_load_config_rejects_unknown_and_repeated_keys():
    with pytest.raises(DataError, match="line 1.*unknown"):
        load_config(io.StringIO("learning = 1\n"))
    with pytest.raises(DataError, match="line 2.*repeated"):
        load_config(io.StringIO("epochs = 1\nepochs = 2\n"))
    with pytest.raises(DataError, match="integer"):
        load_config(io.StringIO("epochs = 2.5\n"))
    with pytest.raises(DataError, match="key = value"):
        load_config(io.StringIO("epochs: 5\n"))


# ---------------------------------------------------------------------------
# training loop


def tiny_dataset(delta=4.0, count=10, seed=0):
    spec = FixtureSpec(
        count_per_class=count, layers=2, frames=6, feature_dim=8,
        class_separation=delta, seed=seed, id_prefix=f"t{seed}",
    )
    pairs = synth_stacks(spec)
    manifest = Manifest(records=tuple(r for _, r in pairs))
    stacks = InMemoryStacks({s.utterance_id: s.as_float64() for s, _ in pairs})
    return manifest, stacks


def test_train_is_deterministic():
    manifest, stacks = tiny_dataset()
    cfg = TrainConfig(epochs=3, seed=5)
    a = train(manifest, stacks, cfg)
    b = train(manifest, stacks, cfg)
    assert a.params.to_vector().tobytes() == b.params.to_vector().tobytes()
    assert a.history == b.history


def test_train_seed_changes_the_run():
    manifest, stacks = tiny_dataset()
    a = train(manifest, stacks, TrainConfig(epochs=2, seed=5))
    b = train(manifest, stacks, TrainConfig(epochs=2, seed=6))
    assert a.params.to_vector().tobytes() != b.params.to_vector().tobytes()


def test_train_loss_decreases_on_average():
    manifest, stacks = tiny_dataset(count=15)
    result = train(manifest, stacks, TrainConfig(epochs=8, seed=0))
    losses = [h.mean_loss for h in result.history]
    assert losses[-1] < losses[0]


def test_train_history_columns():
    manifest, stacks = tiny_dataset(count=4)
    dev_manifest, dev_stacks = tiny_dataset(count=3, seed=1)
    result = train(manifest, stacks, TrainConfig(epochs=2, seed=0),
                   dev_manifest=dev_manifest, dev_features=dev_stacks)
    assert [h.epoch for h in result.history] == [1, 2]
    assert result.history[0].lr == 1e-5  # cosine at step 0
    assert all(h.dev_eer is not None for h in result.history)
    assert 1 <= result.best_epoch <= 2
    best = min(h.dev_eer for h in result.history)
    assert result.history[result.best_epoch - 1].dev_eer == best
    # earliest epoch wins ties
    first_hit = next(h.epoch for h in result.history if h.dev_eer == best)
    assert result.best_epoch == first_hit


def test_train_without_dev_keeps_final_epoch():
    manifest, stacks = tiny_dataset(count=4)
    result = train(manifest, stacks, TrainConfig(epochs=3, seed=0))
    assert result.best_epoch == 3
    assert all(h.dev_eer is None for h in result.history)


def test_train_aborts_on_missing_features():
    manifest, _ = tiny_dataset(count=3)
    incomplete = InMemoryStacks({})
    with pytest.raises(DataError, match=manifest.ids[0]):
        train(manifest, incomplete, TrainConfig(epochs=1))


def test_train_requires_both_classes():
    manifest, stacks = tiny_dataset(count=3)
    bona_only = Manifest(records=tuple(r for r in manifest if r.label == 1))
    with pytest.raises(DataError, match="both"):
        train(bona_only, stacks, TrainConfig(epochs=1))


def test_train_numeric_failure_names_epoch_and_batch():
    manifest, _ = tiny_dataset(count=3)
    huge = InMemoryStacks(
        {uid: np.full((2, 6, 8), 1e308) for uid in manifest.ids}
    )
    with np.errstate(over="ignore", invalid="ignore"):
        with pytest.raises(NumericError, match=r"epoch 1, batch 1"):
            train(manifest, huge, TrainConfig(epochs=1))


def test_batch_partition_keeps_short_tail():
    # 7 samples at batch 5: gradients from both batches must move params;
    # compare against batch 7 (single batch) to prove two updates happened
    manifest, stacks = tiny_dataset(count=7)
    # slice across the class boundary: fixtures list all bonafide first
    seven = Manifest(records=manifest.records[:4] + manifest.records[7:10])
    a = train(seven, stacks, TrainConfig(epochs=1, seed=2, batch_size=5))
    b = train(seven, stacks, TrainConfig(epochs=1, seed=2, batch_size=7))
    assert a.params.to_vector().tobytes() != b.params.to_vector().tobytes()


def test_history_csv_format():
    from slskit.trainer import EpochStats

    rows = [
        EpochStats(epoch=1, lr=1e-5, mean_loss=0.125, train_eer=0.5, dev_eer=0.25),
        EpochStats(epoch=2, lr=5.5e-6, mean_loss=0.0625, train_eer=0.0, dev_eer=None),
    ]
    buf = io.StringIO()
    write_history_csv(buf, rows)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "epoch,lr,mean_loss,train_eer,dev_eer"
    assert lines[1] == "1,1.0000000000000001e-05,0.125,0.5,0.25"
    assert lines[2] == "2,5.4999999999999999e-06,0.0625,0,"
