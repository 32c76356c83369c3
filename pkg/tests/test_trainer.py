"""Optimizer, negative sampling and training-loop behavior."""

import csv

import numpy as np
import pytest

from gvqa.model import ModelConfig, init_params
from gvqa.synth import SynthConfig, generate, split_by_video
from gvqa.trainer import (
    HISTORY_COLUMNS,
    Adam,
    ConfigError,
    InsufficientPool,
    NegativePool,
    NonFiniteLoss,
    TrainConfig,
    sample_negatives,
    train,
    write_history_csv,
)

# small world shared by the loop tests: 3 answers so 2 negatives suffice
SCFG = SynthConfig(n_episodes=80, n_answers=3, seed=13)
MCFG = ModelConfig(d_v=SCFG.d_v, d_t=SCFG.d_t, width=32)


@pytest.fixture(scope="module")
def world():
    eps = generate(SCFG)
    train_eps, val_eps = split_by_video(eps, 0.2, seed=0)
    return eps, train_eps, val_eps


def fresh_params(seed=1):
    return init_params(MCFG, seed=seed)


# --- config ----------------------------------------------------------------------

def test_config_validation():
    for kwargs in (
        {"objective": "nope"},
        {"objective": "ng", "stages": 2},
        {"stages": 3, "objective": "ng+"},
        {"epochs": 0},
        {"batch": 0},
        {"patience": 0},
        {"lr": -1e-3},
        {"p_same_video": 1.5},
        {"p_pos_swap": -0.1},
        {"gamma": 0.0},
        {"val_fraction": 0.0},
    ):
        with pytest.raises(ConfigError):
            TrainConfig(**kwargs)


# --- Adam ------------------------------------------------------------------------

def test_adam_matches_reference_updates():
    w = np.array([1.0, 2.0])
    opt = Adam({"w": w}, lr=0.1)
    grads = [np.array([1.0, -1.0]), np.array([0.5, 0.5]), np.array([-2.0, 0.0])]

    ref = np.array([1.0, 2.0])
    m = np.zeros(2)
    v = np.zeros(2)
    for t, g in enumerate(grads, start=1):
        opt.step({"w": g})
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        ref -= 0.1 * (m / (1 - 0.9**t)) / (np.sqrt(v / (1 - 0.999**t)) + 1e-8)
        assert np.allclose(w, ref, atol=1e-12)


def test_adam_zero_grad_is_noop():
    w = np.array([3.0])
    opt = Adam({"w": w}, lr=0.1)
    for _ in range(4):
        opt.step({"w": np.zeros(1)})
    assert w[0] == 3.0


# --- negative sampling -------------------------------------------------------------

def test_sample_negatives_distinct_and_counted(world):
    eps, train_eps, _ = world
    pool = NegativePool(train_eps)
    rng = np.random.default_rng(0)
    for ep in train_eps[:20]:
        negs = sample_negatives(pool, ep, 2, 0.3, rng)
        assert len(negs) == 2
        assert not np.array_equal(negs[0], negs[1])
        for q in negs:
            assert not np.array_equal(q, ep.question)


def test_same_video_rate_monte_carlo(world):
    """Each negative slot picks a same-video question with the configured
    probability; measured over 10^4 draws."""
    _, train_eps, _ = world
    pool = NegativePool(train_eps)
    rng = np.random.default_rng(42)
    ep = train_eps[0]
    sib_bytes = {q.tobytes() for qid, q in pool.by_video[ep.video_id]
                 if qid != ep.question_id}
    same = 0
    total = 0
    for _ in range(5000):
        for q in sample_negatives(pool, ep, 2, 0.3, rng):
            same += q.tobytes() in sib_bytes
            total += 1
    assert total == 10_000
    assert abs(same / total - 0.3) < 0.02


def test_exhaustion_falls_back_with_warning(world):
    _, train_eps, _ = world
    pool = NegativePool(train_eps)
    ep = train_eps[0]
    rng = np.random.default_rng(1)
    # 3 siblings available but 5 slots forced to same-video
    with pytest.warns(InsufficientPool):
        negs = sample_negatives(pool, ep, 5, 1.0, rng)
    assert len(negs) == 5
    seen = {q.tobytes() for q in negs}
    assert len(seen) == 5


def test_pools_exhausted_raises(world):
    eps, _, _ = world
    two = eps[:2]  # same video, one candidate each
    pool = NegativePool(two)
    with pytest.raises(ConfigError):
        sample_negatives(pool, two[0], 3, 0.0, np.random.default_rng(0))


def test_empty_pool_rejected():
    with pytest.raises(ConfigError):
        NegativePool([])


def test_descriptive_ids_excluded(world):
    _, train_eps, _ = world
    drop = frozenset(ep.question_id for ep in train_eps[:4])
    pool = NegativePool(train_eps, descriptive_ids=drop)
    assert all(qid not in drop for qid, _, _ in pool.entries)
    kept_bytes = {e.question.tobytes() for e in train_eps if e.question_id not in drop}
    rng = np.random.default_rng(3)
    for _ in range(50):
        for q in sample_negatives(pool, train_eps[5], 2, 0.5, rng):
            assert q.tobytes() in kept_bytes


# --- training loop ---------------------------------------------------------------

def test_lr_zero_keeps_params(world):
    _, train_eps, val_eps = world
    params = fresh_params()
    before = {k: v.copy() for k, v in params.arrays.items()}
    cfg = TrainConfig(objective="ng", epochs=2, lr=0.0, patience=10, seed=0)
    best, hist = train(params, train_eps, cfg, val_episodes=val_eps)
    for k, v in before.items():
        assert np.array_equal(best.arrays[k], v)


def test_flat_validation_stops_within_patience(world):
    _, train_eps, val_eps = world
    params = fresh_params()
    cfg = TrainConfig(objective="ng", epochs=50, lr=0.0, patience=5, seed=0)
    _, hist = train(params, train_eps, cfg, val_episodes=val_eps)
    # best at epoch 0, then exactly `patience` non-improving epochs
    assert len(hist) == 6


def test_single_episode_overfits(world):
    eps, _, _ = world
    one = [eps[0]]
    params = fresh_params()
    cfg = TrainConfig(objective="ng", epochs=150, lr=2e-3, patience=150, seed=0)
    _, hist = train(params, one, cfg, val_episodes=one)
    assert hist[-1]["loss"] < 0.01
    assert hist[-1]["acc_qa"] == 1.0


def test_seed_reproducibility(world):
    _, train_eps, val_eps = world
    cfg = TrainConfig(objective="ng+", stages=2, epochs=4, lr=1e-3, patience=10, seed=9)
    best1, hist1 = train(fresh_params(), train_eps, cfg, val_episodes=val_eps)
    best2, hist2 = train(fresh_params(), train_eps, cfg, val_episodes=val_eps)
    assert hist1 == hist2
    for k in best1.arrays:
        assert np.array_equal(best1.arrays[k], best2.arrays[k])

    cfg_other = TrainConfig(objective="ng+", stages=2, epochs=4, lr=1e-3, patience=10, seed=10)
    _, hist3 = train(fresh_params(), train_eps, cfg_other, val_episodes=val_eps)
    assert hist3 != hist1


def test_two_stage_plan_and_answer_freeze(world):
    """Stage one trains only the grounding term: the answer projection must
    stay at its initial value until the joint stage begins."""
    _, train_eps, val_eps = world
    params = fresh_params()
    w_a_init = params.arrays["W_a"].copy()
    snaps = []

    def on_epoch(row):
        snaps.append((row["stage"], np.array_equal(params.arrays["W_a"], w_a_init)))

    cfg = TrainConfig(objective="ng+", stages=2, epochs=4, lr=1e-3, patience=10, seed=2)
    _, hist = train(params, train_eps, cfg, val_episodes=val_eps, on_epoch=on_epoch)
    stages = [r["stage"] for r in hist]
    assert stages == ["ground", "ground", "ng+", "ng+"]
    assert snaps[0] == ("ground", True)
    assert snaps[1] == ("ground", True)
    assert snaps[2][0] == "ng+" and not snaps[2][1]


def test_single_stage_ngplus(world):
    _, train_eps, val_eps = world
    cfg = TrainConfig(objective="ng+", stages=1, epochs=2, lr=1e-3, patience=10, seed=2)
    _, hist = train(fresh_params(), train_eps, cfg, val_episodes=val_eps)
    assert [r["stage"] for r in hist] == ["ng+", "ng+"]


def test_auto_split_when_no_val_given(world):
    eps, _, _ = world
    cfg = TrainConfig(objective="ng", epochs=1, lr=1e-3, patience=5, seed=0,
                      val_fraction=0.2)
    best, hist = train(fresh_params(), eps, cfg)
    assert len(hist) == 1
    assert 0.0 <= hist[0]["acc_qa"] <= 1.0


def test_empty_episodes_rejected():
    with pytest.raises(ConfigError):
        train(fresh_params(), [], TrainConfig())


def test_non_finite_loss_aborts(world):
    _, train_eps, val_eps = world
    params = fresh_params()
    params.arrays["W_v"][:] = np.nan
    cfg = TrainConfig(objective="ng", epochs=1, seed=0)
    with pytest.raises(NonFiniteLoss):
        train(params, train_eps, cfg, val_episodes=val_eps)


def test_history_csv_roundtrip(tmp_path, world):
    _, train_eps, val_eps = world
    cfg = TrainConfig(objective="ng", epochs=2, lr=1e-3, patience=5, seed=0)
    _, hist = train(fresh_params(), train_eps, cfg, val_episodes=val_eps)
    path = tmp_path / "history.csv"
    write_history_csv(path, hist)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == list(HISTORY_COLUMNS)
    assert len(rows) == 1 + len(hist)
    for got, row in zip(rows[1:], hist):
        assert int(got[0]) == row["epoch"]
        assert float(got[1]) == pytest.approx(row["loss"], abs=1e-6)
        assert float(got[2]) == pytest.approx(row["acc_qa"], abs=1e-6)
