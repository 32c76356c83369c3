"""Synthetic planted-moment episodes with exact grounding oracles.

Each synthetic video is a shared background of unit-norm noise frames; four
sibling episodes (questions) share that background. An episode plants a
question/answer signal on the frames inside its ground-truth moment and a
wrong-answer distractor signal outside it, so only a learner that looks at
the right frames can answer reliably. A configurable fraction of questions
leak the answer through the question vector itself (language shortcut),
mirroring the confound that blind QA models exploit.

Also provides the diagnostic scorers used to carve evaluation subsets:
a question-only bilinear scorer and a frames+question scorer that can be
restricted to moment-only or outside-moment frames.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .metrics import GroundingLabel
from .model import Episode
from .temporal import TemporalSegment, VideoExtent

SIBLINGS_PER_VIDEO = 4


class ConfigError(ValueError):
    """Generator configuration violates its preconditions."""


class NotSynthetic(ValueError):
    """Episode carries no planted moment."""


@dataclass(frozen=True)
class SynthConfig:
    n_episodes: int = 2000
    n_frames: int = 32
    d_v: int = 24
    d_t: int = 16
    n_answers: int = 5
    moment_ratio: float = 0.2
    noise_std: float = 0.5
    signal_gain: float = 1.0
    out_gain: float = 0.7
    shortcut_rate: float = 0.3
    shortcut_gain: float = 1.0
    n_pos_variants: int = 3
    variant_noise: float = 0.15
    duration_lo: float = 25.0
    duration_hi: float = 55.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_episodes < 1:
            raise ConfigError("n_episodes must be >= 1")
        if self.n_answers < 2:
            raise ConfigError("n_answers must be >= 2")
        if not 0.0 < self.moment_ratio < 1.0:
            raise ConfigError("moment_ratio must be in (0, 1)")
        if not 0.0 <= self.shortcut_rate <= 1.0:
            raise ConfigError("shortcut_rate must be in [0, 1]")
        if self.noise_std < 0 or self.out_gain < 0 or self.signal_gain <= 0:
            raise ConfigError("gains must be non-negative (signal_gain positive)")
        if self.n_frames < 2:
            raise ConfigError("n_frames must be >= 2")
        if not 0 < self.duration_lo <= self.duration_hi:
            raise ConfigError("need 0 < duration_lo <= duration_hi")


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def _unit_rows(m: np.ndarray) -> np.ndarray:
    return m / np.linalg.norm(m, axis=1, keepdims=True)


def generate(config: SynthConfig) -> list[Episode]:
    """Deterministic episode set for a config; same config, same bytes.

    Episodes come in sibling groups of four sharing one background and video
    id. neg_questions is prefilled with exactly n_answers - 1 entries:
    sibling questions first, then questions from other videos.
    """
    n_videos = math.ceil(config.n_episodes / SIBLINGS_PER_VIDEO)
    ss = np.random.SeedSequence(config.seed)
    world_seed, wiring_seed, *video_seeds = ss.spawn(2 + n_videos)

    world_rng = np.random.default_rng(world_seed)
    # world maps carry text-space vectors into video feature space
    M_q = world_rng.normal(size=(config.d_t, config.d_v))
    M_a = world_rng.normal(size=(config.d_t, config.d_v))

    episodes: list[Episode] = []
    for vi in range(n_videos):
        rng = np.random.default_rng(video_seeds[vi])
        vid = f"v{vi:05d}"
        duration = float(rng.uniform(config.duration_lo, config.duration_hi))
        extent = VideoExtent(duration)
        background = config.noise_std * _unit_rows(
            rng.normal(size=(config.n_frames, config.d_v))
        )
        centers = (np.arange(config.n_frames) + 0.5) / config.n_frames * duration

        group: list[Episode] = []
        n_here = min(SIBLINGS_PER_VIDEO, config.n_episodes - len(episodes))
        for j in range(n_here):
            question = _unit(rng.normal(size=config.d_t))
            answers = _unit_rows(rng.normal(size=(config.n_answers, config.d_t)))
            correct = int(rng.integers(config.n_answers))
            shortcut = bool(rng.random() < config.shortcut_rate)
            if shortcut:
                question = _unit(question + config.shortcut_gain * answers[correct])

            m_len = config.moment_ratio * duration
            m_start = float(rng.uniform(0.0, duration - m_len))
            moment = TemporalSegment(m_start, m_start + m_len)
            inside = (centers >= moment.start) & (centers <= moment.end)
            if not inside.any():
                # tiny ratios can slip between frame centers; snap to nearest
                inside[int(np.argmin(np.abs(centers - (m_start + m_len / 2))))] = True

            signal = config.signal_gain * _unit(question @ M_q + answers[correct] @ M_a)
            wrong = int(rng.choice([a for a in range(config.n_answers) if a != correct]))
            distractor = config.out_gain * _unit(answers[wrong] @ M_a)

            frames = background.copy()
            frames[inside] += signal
            frames[~inside] += distractor

            variants = [
                _unit(question + config.variant_noise * rng.normal(size=config.d_t))
                for _ in range(config.n_pos_variants)
            ]
            group.append(
                Episode(
                    frames=frames,
                    question=question,
                    answers=answers,
                    correct=correct,
                    extent=extent,
                    neg_questions=[],
                    pos_variants=variants,
                    gt_moment=moment,
                    question_id=f"{vid}_q{j}",
                    video_id=vid,
                )
            )
        # sibling questions become each other's first hard negatives
        for j, ep in enumerate(group):
            ep.neg_questions = [sib.question for i, sib in enumerate(group) if i != j]
        episodes.extend(group)

    # top up negative lists from other videos so every episode has A - 1
    wiring_rng = np.random.default_rng(wiring_seed)
    need = config.n_answers - 1
    multi_video = len({ep.video_id for ep in episodes}) > 1
    for ep in episodes:
        ep.neg_questions = ep.neg_questions[:need]
        seen: set[int] = set()
        attempts = 0
        while len(ep.neg_questions) < need:
            if not multi_video or attempts > 100 * need:
                raise ConfigError(
                    f"cannot assemble {need} negatives for {ep.question_id}; "
                    "generate more episodes or fewer answers"
                )
            attempts += 1
            k = int(wiring_rng.integers(len(episodes)))
            if episodes[k].video_id == ep.video_id or k in seen:
                continue
            seen.add(k)
            ep.neg_questions.append(episodes[k].question)
    return episodes


def oracle_grounding(episode: Episode) -> TemporalSegment:
    """The planted moment, exactly."""
    if episode.gt_moment is None:
        raise NotSynthetic(f"episode {episode.question_id or '<anon>'} has no planted moment")
    return episode.gt_moment


def episodes_to_labels(episodes: Iterable[Episode]) -> dict[str, GroundingLabel]:
    """Grounding labels keyed by question id, for the metrics protocol."""
    labels = {}
    for ep in episodes:
        labels[ep.question_id] = GroundingLabel(
            question_id=ep.question_id,
            video_id=ep.video_id,
            extent=ep.extent,
            segments=(oracle_grounding(ep),),
            answer_index=ep.correct,
        )
    return labels


def split_by_video(
    episodes: Sequence[Episode], val_fraction: float = 0.15, seed: int = 0
) -> tuple[list[Episode], list[Episode]]:
    """Train/val split keeping sibling groups together."""
    if not 0.0 < val_fraction < 1.0:
        raise ConfigError("val_fraction must be in (0, 1)")
    vids = sorted({ep.video_id for ep in episodes})
    rng = np.random.default_rng(seed)
    rng.shuffle(vids)
    n_val = max(1, int(round(val_fraction * len(vids))))
    val_vids = set(vids[:n_val])
    train = [ep for ep in episodes if ep.video_id not in val_vids]
    val = [ep for ep in episodes if ep.video_id in val_vids]
    return train, val


# --- archive -----------------------------------------------------------------

ARCHIVE_VERSION = 1


def save_episodes(path: str | Path, episodes: Sequence[Episode]) -> None:
    """Pack an episode list into a single npz archive."""
    if not episodes:
        raise ValueError("no episodes to save")
    n_neg = len(episodes[0].neg_questions)
    n_var = len(episodes[0].pos_variants)
    for ep in episodes:
        if len(ep.neg_questions) != n_neg or len(ep.pos_variants) != n_var:
            raise ValueError("episodes must share negative/variant counts to archive")
        if ep.gt_moment is None:
            raise NotSynthetic("archives require planted moments")
    meta = {"version": ARCHIVE_VERSION, "n_neg": n_neg, "n_var": n_var}
    np.savez_compressed(
        path,
        __meta__=np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8),
        frames=np.stack([ep.frames for ep in episodes]),
        questions=np.stack([ep.question for ep in episodes]),
        answers=np.stack([ep.answers for ep in episodes]),
        correct=np.array([ep.correct for ep in episodes], dtype=np.int64),
        moments=np.array(
            [[ep.gt_moment.start, ep.gt_moment.end] for ep in episodes], dtype=float
        ),
        durations=np.array([ep.extent.duration for ep in episodes], dtype=float),
        question_ids=np.array([ep.question_id for ep in episodes]),
        video_ids=np.array([ep.video_id for ep in episodes]),
        negatives=np.stack([np.stack(ep.neg_questions) for ep in episodes])
        if n_neg else np.zeros((len(episodes), 0, episodes[0].question.shape[0])),
        variants=np.stack([np.stack(ep.pos_variants) for ep in episodes])
        if n_var else np.zeros((len(episodes), 0, episodes[0].question.shape[0])),
    )


def load_episodes(path: str | Path) -> list[Episode]:
    with np.load(path) as blob:
        meta = json.loads(bytes(blob["__meta__"]).decode("utf-8"))
        if meta.get("version") != ARCHIVE_VERSION:
            raise ValueError(f"unsupported archive version {meta.get('version')}")
        episodes = []
        for i in range(blob["frames"].shape[0]):
            episodes.append(
                Episode(
                    frames=blob["frames"][i],
                    question=blob["questions"][i],
                    answers=blob["answers"][i],
                    correct=int(blob["correct"][i]),
                    extent=VideoExtent(float(blob["durations"][i])),
                    neg_questions=list(blob["negatives"][i]),
                    pos_variants=list(blob["variants"][i]),
                    gt_moment=TemporalSegment(*blob["moments"][i]),
                    question_id=str(blob["question_ids"][i]),
                    video_id=str(blob["video_ids"][i]),
                )
            )
    return episodes


# --- diagnostic scorers ----------------------------------------------------------

def _softmax_rows(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def moment_frame_mask(episode: Episode) -> np.ndarray:
    """Boolean per-frame mask of centers inside the planted moment.

    Mirrors the generator, including its snap-to-nearest fallback for moments
    shorter than the frame spacing.
    """
    moment = oracle_grounding(episode)
    centers = (np.arange(episode.n_frames) + 0.5) / episode.n_frames * episode.extent.duration
    mask = (centers >= moment.start) & (centers <= moment.end)
    if not mask.any():
        mask[int(np.argmin(np.abs(centers - (moment.start + moment.end) / 2)))] = True
    return mask


@dataclass
class QuestionOnlyScorer:
    """Bilinear question-to-answer scorer; sees no frames at all."""

    W: np.ndarray | None = None

    def fit(self, episodes: Sequence[Episode], epochs: int = 150, lr: float = 0.5) -> None:
        Q = np.stack([ep.question for ep in episodes])
        A = np.stack([ep.answers for ep in episodes])
        y = np.array([ep.correct for ep in episodes])
        d_t = Q.shape[1]
        self.W = np.zeros((d_t, d_t))
        onehot = np.zeros((len(episodes), A.shape[1]))
        onehot[np.arange(len(episodes)), y] = 1.0
        for _ in range(epochs):
            scores = np.einsum("ed,df,eaf->ea", Q, self.W, A)
            p = _softmax_rows(scores)
            grad = np.einsum("ed,ea,eaf->df", Q, p - onehot, A) / len(episodes)
            self.W -= lr * grad

    def scores(self, episode: Episode) -> np.ndarray:
        if self.W is None:
            raise ValueError("scorer not fitted")
        return (episode.question @ self.W) @ episode.answers.T

    def predict(self, episode: Episode) -> int:
        return int(np.argmax(self.scores(episode)))

    def accuracy(self, episodes: Sequence[Episode]) -> float:
        hits = sum(self.predict(ep) == ep.correct for ep in episodes)
        return hits / len(episodes)


@dataclass
class FramesQuestionScorer:
    """Linear scorer over mean-pooled frames plus a bilinear question term.

    The frame pool is chosen at fit time ("all", "moment", "outside") and
    becomes the default for prediction; training on moment-only or
    outside-only frames is how the per-subset diagnostic models are built.
    """

    U: np.ndarray | None = None
    W: np.ndarray | None = None
    subset: str = "all"

    @staticmethod
    def _pool(episode: Episode, frame_subset: str) -> np.ndarray:
        if frame_subset == "all":
            rows = episode.frames
        else:
            mask = moment_frame_mask(episode)
            if frame_subset == "moment":
                rows = episode.frames[mask]
            elif frame_subset == "outside":
                rows = episode.frames[~mask]
            else:
                raise ValueError(f"unknown frame_subset {frame_subset!r}")
        if rows.shape[0] == 0:
            return np.zeros(episode.frames.shape[1])
        return rows.mean(axis=0)

    def fit(
        self,
        episodes: Sequence[Episode],
        frame_subset: str = "all",
        epochs: int = 150,
        lr: float = 0.5,
    ) -> None:
        self.subset = frame_subset
        V = np.stack([self._pool(ep, frame_subset) for ep in episodes])
        Q = np.stack([ep.question for ep in episodes])
        A = np.stack([ep.answers for ep in episodes])
        y = np.array([ep.correct for ep in episodes])
        self.U = np.zeros((V.shape[1], A.shape[2]))
        self.W = np.zeros((Q.shape[1], A.shape[2]))
        onehot = np.zeros((len(episodes), A.shape[1]))
        onehot[np.arange(len(episodes)), y] = 1.0
        for _ in range(epochs):
            scores = np.einsum("ed,df,eaf->ea", V, self.U, A)
            scores += np.einsum("ed,df,eaf->ea", Q, self.W, A)
            delta = _softmax_rows(scores) - onehot
            self.U -= lr * np.einsum("ed,ea,eaf->df", V, delta, A) / len(episodes)
            self.W -= lr * np.einsum("ed,ea,eaf->df", Q, delta, A) / len(episodes)

    def scores(self, episode: Episode, frame_subset: str | None = None) -> np.ndarray:
        if self.U is None or self.W is None:
            raise ValueError("scorer not fitted")
        v = self._pool(episode, frame_subset or self.subset)
        return (v @ self.U + episode.question @ self.W) @ episode.answers.T

    def predict(self, episode: Episode, frame_subset: str | None = None) -> int:
        return int(np.argmax(self.scores(episode, frame_subset)))

    def accuracy(self, episodes: Sequence[Episode], frame_subset: str | None = None) -> float:
        hits = sum(self.predict(ep, frame_subset) == ep.correct for ep in episodes)
        return hits / len(episodes)


@dataclass(frozen=True)
class DiagnosticSplit:
    """Question-id subsets for confound-aware evaluation."""

    vqa: frozenset[str]
    gdqa: frozenset[str]


def fit_diagnostics(
    train_episodes: Sequence[Episode],
) -> tuple[QuestionOnlyScorer, FramesQuestionScorer, FramesQuestionScorer]:
    """Train the three subset probes: blind, moment-only, outside-moment."""
    blind = QuestionOnlyScorer()
    blind.fit(train_episodes)
    pos = FramesQuestionScorer()
    pos.fit(train_episodes, frame_subset="moment")
    neg = FramesQuestionScorer()
    neg.fit(train_episodes, frame_subset="outside")
    return blind, pos, neg


def split_diagnostic(
    episodes: Sequence[Episode],
    blind: QuestionOnlyScorer,
    pos: FramesQuestionScorer,
    neg: FramesQuestionScorer,
) -> DiagnosticSplit:
    """VQA: blind scorer fails. GDQA: additionally, the outside-moment probe
    fails while the moment-only probe succeeds."""
    vqa = set()
    gdqa = set()
    for ep in episodes:
        if blind.predict(ep) == ep.correct:
            continue
        vqa.add(ep.question_id)
        neg_right = neg.predict(ep, "outside") == ep.correct
        pos_right = pos.predict(ep, "moment") == ep.correct
        if pos_right and not neg_right:
            gdqa.add(ep.question_id)
    return DiagnosticSplit(vqa=frozenset(vqa), gdqa=frozenset(gdqa))
