"""Training loop: Adam updates, negative sampling, two-stage schedule.

Supports the answer-only objective and the joint objective with a question
grounding term. The joint objective can run in two stages: grounding-term
pretraining followed by joint finetuning. Early stopping watches validation
Acc@GQA; the returned parameters are the best-validation snapshot.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .metrics import GQA_IOP_THRESHOLD
from .model import Episode, ModelParams, loss_and_gradients, predict_episode
from .synth import split_by_video
from .temporal import iop, iou


class ConfigError(ValueError):
    """Training configuration violates its preconditions."""


class NonFiniteLoss(RuntimeError):
    """A batch produced NaN or infinity; training aborted."""


class InsufficientPool(UserWarning):
    """Same-video negatives exhausted; fell back to cross-video draws."""


@dataclass(frozen=True)
class TrainConfig:
    objective: str = "ng"           # "ng" or "ng+"
    stages: int = 1                 # ng+ only: 2 = grounding pretrain, then joint
    epochs: int = 10
    lr: float = 1e-3
    batch: int = 64
    alpha: float = 1.0
    p_same_video: float = 0.3
    p_pos_swap: float = 0.3
    patience: int = 5
    seed: int = 0
    gamma: float = 1.0              # window multiplier for validation metrics
    val_fraction: float = 0.15

    def __post_init__(self) -> None:
        if self.objective not in ("ng", "ng+"):
            raise ConfigError(f"objective must be 'ng' or 'ng+', got {self.objective!r}")
        if self.stages not in (1, 2):
            raise ConfigError("stages must be 1 or 2")
        if self.objective == "ng" and self.stages != 1:
            raise ConfigError("the answer-only objective has no grounding pretrain stage")
        if self.epochs < 1 or self.batch < 1 or self.patience < 1:
            raise ConfigError("epochs, batch and patience must be >= 1")
        if self.lr < 0:
            raise ConfigError("lr must be non-negative")
        for name in ("p_same_video", "p_pos_swap"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1]")
        if self.gamma <= 0:
            raise ConfigError("gamma must be positive")
        if not 0.0 < self.val_fraction < 1.0:
            raise ConfigError("val_fraction must be in (0, 1)")


class Adam:
    """Standard Adam over a dict of named arrays, updated in place."""

    def __init__(self, arrays: Mapping[str, np.ndarray], lr: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> None:
        self.arrays = arrays
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in arrays.items()}
        self.v = {k: np.zeros_like(v) for k, v in arrays.items()}

    def step(self, grads: Mapping[str, np.ndarray]) -> None:
        self.t += 1
        b1t = 1.0 - self.beta1**self.t
        b2t = 1.0 - self.beta2**self.t
        for name, g in grads.items():
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            self.arrays[name] -= self.lr * (m / b1t) / (np.sqrt(v / b2t) + self.eps)


# --- negative sampling ------------------------------------------------------

class NegativePool:
    """Question vectors grouped by video for hard-negative draws.

    descriptive_ids lists question ids to exclude from all pools (questions
    whose style makes them useless as grounding negatives).
    """

    def __init__(self, episodes: Sequence[Episode],
                 descriptive_ids: frozenset[str] = frozenset()) -> None:
        self.by_video: dict[str, list[tuple[str, np.ndarray]]] = {}
        self.entries: list[tuple[str, str, np.ndarray]] = []
        for ep in episodes:
            if ep.question_id in descriptive_ids:
                continue
            self.by_video.setdefault(ep.video_id, []).append((ep.question_id, ep.question))
            self.entries.append((ep.question_id, ep.video_id, ep.question))
        if not self.entries:
            raise ConfigError("negative pool is empty")


def sample_negatives(
    pool: NegativePool,
    episode: Episode,
    count: int,
    p_same_video: float,
    rng: np.random.Generator,
) -> list[np.ndarray]:
    """Draw `count` distinct negative questions for one episode.

    Each slot comes from the episode's own video with probability
    p_same_video, otherwise from other videos. When the chosen sub-pool has
    no unused entries left the draw falls back to the other one (same-video
    exhaustion additionally warns, since it silently changes hardness).
    """
    picked: set[str] = set()
    out: list[np.ndarray] = []
    same_all = pool.by_video.get(episode.video_id, [])
    warned = False
    for _ in range(count):
        same = [e for e in same_all if e[0] != episode.question_id and e[0] not in picked]
        cross = [e for e in pool.entries
                 if e[1] != episode.video_id and e[0] not in picked]
        want_same = rng.random() < p_same_video
        if want_same and not same and not warned:
            # constant text so the default warning filter prints it once, not
            # once per episode
            warnings.warn(
                "same-video negatives exhausted; drawing cross-video",
                InsufficientPool,
                stacklevel=2,
            )
            warned = True
        if want_same and same:
            qid, q = same[int(rng.integers(len(same)))]
        elif cross:
            qid, _, q = cross[int(rng.integers(len(cross)))]
        elif same:
            qid, q = same[int(rng.integers(len(same)))]
        else:
            raise ConfigError("negative pools exhausted; need more episodes")
        picked.add(qid)
        out.append(q)
    return out


# --- training loop -------------------------------------------------------------

def _validate(params: ModelParams, episodes: Sequence[Episode], gamma: float) -> dict:
    """Grounded-QA metrics against the episodes' own moments, as fractions."""
    n = len(episodes)
    correct = 0
    gqa = 0
    iop_sum = 0.0
    iou_sum = 0.0
    n_moments = 0
    for ep in episodes:
        pred = predict_episode(params, ep, gamma=gamma)
        is_right = pred.answer_index == ep.correct
        correct += is_right
        if ep.gt_moment is not None:
            n_moments += 1
            p_iop = iop(pred.window, ep.gt_moment)
            iop_sum += p_iop
            iou_sum += iou(pred.window, ep.gt_moment)
            gqa += is_right and p_iop >= GQA_IOP_THRESHOLD
    return {
        "acc_qa": correct / n,
        "acc_gqa": gqa / n if n_moments else 0.0,
        "m_iop": iop_sum / n_moments if n_moments else 0.0,
        "m_iou": iou_sum / n_moments if n_moments else 0.0,
    }


def _stage_plan(config: TrainConfig) -> list[tuple[str, int]]:
    if config.objective == "ng":
        return [("ng", config.epochs)]
    if config.stages == 1:
        return [("ng+", config.epochs)]
    pre = config.epochs // 2
    post = config.epochs - pre
    plan = []
    if pre:
        plan.append(("ground", pre))
    plan.append(("ng+", post))
    return plan


def train(
    params: ModelParams,
    episodes: Sequence[Episode],
    config: TrainConfig,
    val_episodes: Sequence[Episode] | None = None,
    on_epoch: Callable[[dict], None] | None = None,
) -> tuple[ModelParams, list[dict]]:
    """Optimize params on the episode set; returns (best_params, history).

    Early stopping triggers after `patience` epochs without a validation
    Acc@GQA improvement, counted within the final stage. History rows carry
    epoch, stage, train loss and validation metrics as fractions.
    """
    if not episodes:
        raise ConfigError("no training episodes")
    if val_episodes is None:
        episodes, val_episodes = split_by_video(
            episodes, config.val_fraction, seed=config.seed
        )
        if not episodes:
            raise ConfigError("validation split swallowed all episodes")

    rng = np.random.default_rng(config.seed)
    adam = Adam(params.trainable(), lr=config.lr)
    pool = NegativePool(episodes) if config.objective == "ng+" else None
    need = episodes[0].n_answers - 1

    history: list[dict] = []
    best = {"acc_gqa": -1.0, "params": params.copy(), "epoch": -1}
    plan = _stage_plan(config)
    final_stage = len(plan) - 1
    epoch = 0
    for stage_idx, (objective, n_epochs) in enumerate(plan):
        since_best = 0
        for _ in range(n_epochs):
            order = rng.permutation(len(episodes))
            loss_sum = 0.0
            for lo in range(0, len(order), config.batch):
                batch = [episodes[i] for i in order[lo:lo + config.batch]]
                acc_grads = {k: np.zeros_like(v) for k, v in params.arrays.items()}
                batch_loss = 0.0
                for ep in batch:
                    negs = None
                    pos = None
                    if objective in ("ground", "ng+"):
                        negs = sample_negatives(pool, ep, need, config.p_same_video, rng)
                        if ep.pos_variants and rng.random() < config.p_pos_swap:
                            pos = ep.pos_variants[int(rng.integers(len(ep.pos_variants)))]
                    loss, grads = loss_and_gradients(
                        params, ep, objective=objective, alpha=config.alpha,
                        pos_question=pos, neg_questions=negs,
                    )
                    batch_loss += loss
                    for k, g in grads.items():
                        acc_grads[k] += g
                if not math.isfinite(batch_loss):
                    raise NonFiniteLoss(
                        f"non-finite loss at epoch {epoch}, batch starting {lo} "
                        f"(objective {objective})"
                    )
                scale = 1.0 / len(batch)
                adam.step({k: g * scale for k, g in acc_grads.items()})
                loss_sum += batch_loss
            val = _validate(params, val_episodes, config.gamma)
            row = {"epoch": epoch, "stage": objective,
                   "loss": loss_sum / len(episodes), **val}
            history.append(row)
            if on_epoch is not None:
                on_epoch(row)
            if val["acc_gqa"] > best["acc_gqa"]:
                best = {"acc_gqa": val["acc_gqa"], "params": params.copy(), "epoch": epoch}
                since_best = 0
            else:
                since_best += 1
            epoch += 1
            if stage_idx == final_stage and since_best >= config.patience:
                return best["params"], history
    return best["params"], history


HISTORY_COLUMNS = ("epoch", "loss", "acc_qa", "m_iop", "m_iou")


def write_history_csv(path: str | Path, history: Sequence[dict]) -> None:
    """Per-epoch curve file (metrics as fractions, loss in nats)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(HISTORY_COLUMNS)
        for row in history:
            writer.writerow([row["epoch"]] + [f"{row[k]:.6f}" for k in HISTORY_COLUMNS[1:]])
