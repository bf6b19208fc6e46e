"""Synthetic candidate streams and the detect, smooth, push, retrain loop.

Each synthetic frame offers a handful of candidates: one carries the
true target's feature (drifting over time, observed with noise), the
rest are distractors blended toward the target's current appearance.
The tracking loop scores candidates with the latest published one-class
model, smooths the chosen center with a Kalman filter, pushes the
chosen feature into a coreset tree, and retrains from a bounded sample
whenever a new leaf completes.  The first n frames are an oracle
bootstrap: the true candidate is taken on trust to seed the model.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, fields, replace
from typing import Sequence

import numpy as np

from .blocks import DataBlock
from .kalman import KalmanState, NoiseParams, em_fit, kalman_predict, kalman_update
from .sampling import SampleSet, hierarchical_sample, random_sample, root_sample, subsample
from .svm import LinearModel, TrainParams, decisions, train_one_class
from .tree import CoresetTree

SAMPLER_MODES = ("hierarchical", "root", "random", "subsample")


@dataclass(frozen=True)
class SyntheticStreamConfig:
    """Knobs for the synthetic candidate generator.

    drift_rate moves the target's unit feature vector per frame;
    noise_scale is additive observation noise on every feature;
    distractor_similarity in [0, 1) blends distractor features toward
    the target's current appearance.  Motion runs at constant velocity
    with process noise inside a square arena, and spacing is the
    minimum distance between the target and any distractor, which also
    serves as the default suppression radius.  jitter_copies adds that
    many perturbed copies of each bootstrap feature to enrich the
    initial model.
    """

    dim: int = 16
    frames: int = 200
    drift_rate: float = 0.02
    noise_scale: float = 0.02
    distractor_count: int = 8
    distractor_similarity: float = 0.5
    arena: float = 100.0
    speed: float = 2.0
    process_noise: float = 0.2
    spacing: float = 5.0
    jitter_copies: int = 0
    jitter_scale: float = 0.02
    seed: int = 0

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")
        if self.frames < 1:
            raise ValueError(f"frames must be >= 1, got {self.frames}")
        if self.drift_rate < 0 or self.noise_scale < 0:
            raise ValueError("drift_rate and noise_scale must be >= 0")
        if self.distractor_count < 0:
            raise ValueError(f"distractor_count must be >= 0, got {self.distractor_count}")
        if not 0.0 <= self.distractor_similarity < 1.0:
            raise ValueError(
                f"distractor_similarity must be in [0, 1), got {self.distractor_similarity}"
            )
        if self.arena <= 0 or self.spacing <= 0:
            raise ValueError("arena and spacing must be > 0")
        if self.spacing * 2 >= self.arena:
            raise ValueError("arena must be larger than twice the spacing")
        if self.jitter_copies < 0:
            raise ValueError(f"jitter_copies must be >= 0, got {self.jitter_copies}")


def config_from_dict(raw: dict) -> SyntheticStreamConfig:
    """Build a config from parsed JSON, rejecting unknown keys."""
    known = {f.name for f in fields(SyntheticStreamConfig)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ValueError(f"unknown config keys: {', '.join(unknown)}")
    return SyntheticStreamConfig(**raw)


@dataclass(frozen=True, eq=False)
class Frame:
    """One frame of candidates plus the ground truth that produced it."""

    index: int
    positions: np.ndarray
    features: np.ndarray
    truth_index: int
    truth_position: np.ndarray
    truth_feature: np.ndarray


@dataclass(frozen=True, eq=False)
class Detection:
    """The winning candidate of one frame."""

    index: int
    position: np.ndarray
    feature: np.ndarray
    score: float


@dataclass(frozen=True)
class DetectParams:
    """Detection-side knobs.

    threshold None means use the model's trained threshold.  radius
    None means use the stream's candidate spacing.  tolerance is the
    distance within which a chosen center still counts as correct;
    None means half the spacing.
    """

    threshold: float | None = None
    radius: float | None = None
    tolerance: float | None = None


@dataclass(frozen=True)
class TrackerParams:
    """Loop-side knobs: leaf size, sampler choice and EM cadence."""

    n: int = 20
    sampler: str = "hierarchical"
    em_every: int = 1
    em_iterations: int = 8

    def __post_init__(self) -> None:
        if self.n < 2:
            raise ValueError(f"leaf size n must be >= 2, got {self.n}")
        if self.sampler not in SAMPLER_MODES:
            raise ValueError(
                f"unknown sampler {self.sampler!r}, expected one of {SAMPLER_MODES}"
            )
        if self.em_every < 1:
            raise ValueError(f"em_every must be >= 1, got {self.em_every}")
        if self.em_iterations < 1:
            raise ValueError(f"em_iterations must be >= 1, got {self.em_iterations}")


@dataclass(frozen=True)
class FrameRecord:
    """Outcome of one frame.

    chosen is the picked candidate index, -1 when nothing cleared the
    threshold (score is then nan and the estimate coasts on the motion
    model).  model_points counts the stream rows behind the model that
    scored this frame, -1 during bootstrap, and never exceeds the frame
    index: the scorer never saw data from its own future.
    """

    index: int
    chosen: int
    score: float
    estimate: tuple[float, float]
    correct: bool
    model_points: int


@dataclass(frozen=True, eq=False)
class TrackRun:
    """Full outcome of one tracking run."""

    records: tuple[FrameRecord, ...]
    bootstrap_frames: int
    sampler: str
    success_rate: float


def _unit(v: np.ndarray) -> np.ndarray:
    norm = float(np.linalg.norm(v))
    return v / norm if norm > 0 else v


def _unit_nonneg(v: np.ndarray) -> np.ndarray:
    # Appearance-style descriptors are nonnegative; keeping synthetic
    # features in that orthant also keeps the orientation of compressed
    # spectral rows aligned with the raw data, exactly as it is for
    # real descriptor streams.
    return _unit(np.abs(v))


def generate_stream(config: SyntheticStreamConfig) -> list[Frame]:
    """Deterministic synthetic candidate stream for one seed.

    Features are unit vectors in the nonnegative orthant, mirroring
    real appearance descriptors.
    """
    rng = np.random.default_rng(config.seed)
    d = config.dim
    feature = _unit_nonneg(rng.standard_normal(d))
    margin = config.spacing
    low, high = margin, config.arena - margin
    pos = rng.uniform(low, high, size=2)
    heading = rng.uniform(0.0, 2.0 * math.pi)
    vel = config.speed * np.array([math.cos(heading), math.sin(heading)])
    frames: list[Frame] = []
    for t in range(config.frames):
        m = 1 + config.distractor_count
        positions = np.zeros((m, 2))
        features = np.zeros((m, d))
        positions[0] = pos
        features[0] = feature + config.noise_scale * rng.standard_normal(d)
        for j in range(1, m):
            while True:
                p = rng.uniform(0.0, config.arena, size=2)
                if float(np.linalg.norm(p - pos)) >= config.spacing:
                    break
            positions[j] = p
            blend = config.distractor_similarity
            raw = blend * feature + (1.0 - blend) * _unit_nonneg(rng.standard_normal(d))
            features[j] = _unit(raw) + config.noise_scale * rng.standard_normal(d)
        order = rng.permutation(m)
        truth_index = int(np.where(order == 0)[0][0])
        frames.append(
            Frame(
                index=t,
                positions=positions[order],
                features=features[order],
                truth_index=truth_index,
                truth_position=pos.copy(),
                truth_feature=feature.copy(),
            )
        )
        # Advance the target: feature drift on the unit sphere, then
        # noisy constant-velocity motion reflected at the walls.
        if config.drift_rate > 0:
            step = config.drift_rate * _unit(rng.standard_normal(d))
            feature = _unit_nonneg(feature + step)
        vel = vel + config.process_noise * rng.standard_normal(2)
        pos = pos + vel
        for axis in range(2):
            if pos[axis] < low:
                pos[axis] = 2 * low - pos[axis]
                vel[axis] = -vel[axis]
            elif pos[axis] > high:
                pos[axis] = 2 * high - pos[axis]
                vel[axis] = -vel[axis]
            pos[axis] = min(max(pos[axis], low), high)
    return frames


def suppress(
    positions: np.ndarray, scores: np.ndarray, threshold: float, radius: float
) -> list[int]:
    """Greedy non-maximum suppression.

    Candidates scoring below the threshold are discarded; survivors are
    visited best-first and each keeper removes later candidates within
    radius of it.  Returns kept indices in descending score order,
    index order breaking ties.
    """
    order = np.argsort(-scores, kind="stable")
    kept: list[int] = []
    for idx in order:
        if scores[idx] < threshold:
            continue
        pos = positions[idx]
        if any(float(np.linalg.norm(pos - positions[k])) < radius for k in kept):
            continue
        kept.append(int(idx))
    return kept


def detect(
    model: LinearModel, frame: Frame, threshold: float, radius: float
) -> Detection | None:
    """Best surviving candidate of a frame, or None if all score below
    the threshold."""
    scores = decisions(model, frame.features)
    kept = suppress(frame.positions, scores, threshold, radius)
    if not kept:
        return None
    best = kept[0]
    return Detection(
        index=best,
        position=frame.positions[best].copy(),
        feature=frame.features[best].copy(),
        score=float(scores[best]),
    )


def _initial_kalman(centers: Sequence[np.ndarray]) -> KalmanState:
    last = centers[-1]
    vel = centers[-1] - centers[-2] if len(centers) >= 2 else np.zeros(2)
    return KalmanState(x=np.concatenate([last, vel]), P=np.eye(4))


# A sampled row survives for training only if its norm reaches this
# fraction of the strongest norm among rows with the same provenance
# level.  A compressed node's leading row is an appearance prototype of
# its window; the trailing rows describe how the window varied around
# it, and treating those variation directions as appearances drags the
# model off target.  Half the peak norm means a quarter of the peak
# energy: below that a row is variation, not appearance.
REL_ENERGY_FLOOR = 0.5


def _as_directions(sample: SampleSet) -> SampleSet:
    """Rescale sampled rows to unit length before appearance training.

    Summary rows scale with the mass of data they stand for, so a row
    from an old, heavy node would otherwise dominate the hinge loss by
    norm alone.  The appearance model cares about directions; mass
    already had its say in which rows the sampler picked.  Rows far
    weaker than the strongest row of their own provenance group are
    variation modes rather than appearances and are dropped instead of
    being blown up to full strength.
    """
    values = sample.rows.values
    norms = np.linalg.norm(values, axis=1)
    group_max: dict[int, float] = {}
    for tag, norm in zip(sample.tags, norms):
        group_max[tag.level] = max(group_max.get(tag.level, 0.0), float(norm))
    keep = [
        i
        for i, tag in enumerate(sample.tags)
        if norms[i] >= REL_ENERGY_FLOOR * group_max[tag.level] and norms[i] > 0
    ]
    if not keep:
        return sample
    units = values[keep] / norms[keep, None]
    return SampleSet(
        rows=DataBlock(units),
        tags=tuple(sample.tags[i] for i in keep),
        n=sample.n,
        points_seen=sample.points_seen,
    )


class _Trainer:
    """Builds the training sample for one sampler mode and retrains.

    Whatever the mode, sampled rows are normalized to directions (see
    _as_directions) before the one-class fit; the trainer is the layer
    that knows summary row norms encode represented mass rather than
    appearance strength."""

    def __init__(
        self,
        mode: str,
        tree: CoresetTree,
        history: list[np.ndarray],
        train_params: TrainParams,
        seed: int,
    ):
        self.mode = mode
        self.tree = tree
        self.history = history
        self.train_params = train_params
        self.seed = seed
        self.trainings = 0

    def sample(self) -> SampleSet:
        if self.mode == "hierarchical":
            return hierarchical_sample(self.tree.snapshot())
        if self.mode == "root":
            return root_sample(self.tree.snapshot())
        block = DataBlock(np.vstack(self.history))
        if self.mode == "subsample":
            return subsample(block, self.tree.n)
        draw_seed = int(
            np.random.SeedSequence((self.seed, self.trainings)).generate_state(1)[0]
        )
        return random_sample(block, self.tree.n, draw_seed)

    def retrain(self) -> tuple[LinearModel, int]:
        sample = self.sample()
        self.trainings += 1
        model = train_one_class(_as_directions(sample), self.train_params)
        return model, sample.points_seen


def track_stream(
    frames: Sequence[Frame],
    config: SyntheticStreamConfig,
    tracker: TrackerParams | None = None,
    train_params: TrainParams | None = None,
    detect_params: DetectParams | None = None,
) -> TrackRun:
    """Run the full loop over a synthetic stream.

    Stages run strictly in order within each frame: score candidates
    with the last published model, smooth the chosen center, push the
    chosen feature, then retrain and publish if that push completed a
    leaf.  A frame whose candidates all score below the threshold
    contributes nothing to the tree and the estimate coasts on the
    motion model.  Deterministic for a given stream and configuration.
    """
    tracker = tracker or TrackerParams()
    train_params = train_params or TrainParams()
    dp = detect_params or DetectParams()
    radius = dp.radius if dp.radius is not None else config.spacing
    tolerance = dp.tolerance if dp.tolerance is not None else config.spacing / 2.0
    n = tracker.n

    tree = CoresetTree(n, config.dim)
    history: list[np.ndarray] = []
    trainer = _Trainer(tracker.sampler, tree, history, train_params, config.seed)
    jitter_rng = np.random.default_rng(np.random.SeedSequence((config.seed, 0x0B007)))

    model: LinearModel | None = None
    model_points = -1
    noise = NoiseParams.default()
    state: KalmanState | None = None
    centers: deque[np.ndarray] = deque(maxlen=n)
    records: list[FrameRecord] = []
    bootstrap_frames = 0

    def push_rows(rows: list[np.ndarray]) -> bool:
        leaf = False
        for row in rows:
            history.append(np.asarray(row, dtype=float))
            if tree.push_point(row).leaf_formed:
                leaf = True
        return leaf

    def on_leaf() -> None:
        nonlocal model, model_points, noise
        if tree.leaves_seen % tracker.em_every == 0 and len(centers) >= 4:
            noise = em_fit(np.vstack(centers), tracker.em_iterations)
        model, model_points = trainer.retrain()

    for frame in frames:
        if model is None:
            bootstrap_frames = frame.index + 1
            truth_feat = frame.features[frame.truth_index]
            rows = [truth_feat]
            for _ in range(config.jitter_copies):
                rows.append(truth_feat + config.jitter_scale * jitter_rng.standard_normal(config.dim))
            centers.append(frame.truth_position.copy())
            leaf = push_rows(rows)
            records.append(
                FrameRecord(
                    index=frame.index,
                    chosen=frame.truth_index,
                    score=float("nan"),
                    estimate=(float(frame.truth_position[0]), float(frame.truth_position[1])),
                    correct=True,
                    model_points=-1,
                )
            )
            if leaf:
                on_leaf()
                state = _initial_kalman(list(centers))
            continue

        threshold = dp.threshold if dp.threshold is not None else model.threshold
        found = detect(model, frame, threshold, radius)
        points_behind = model_points
        state = kalman_predict(state, noise, 1.0)
        if found is None:
            records.append(
                FrameRecord(
                    index=frame.index,
                    chosen=-1,
                    score=float("nan"),
                    estimate=(float(state.position[0]), float(state.position[1])),
                    correct=False,
                    model_points=points_behind,
                )
            )
            continue
        state = kalman_update(state, found.position, noise)
        centers.append(found.position.copy())
        correct = found.index == frame.truth_index or (
            float(np.linalg.norm(found.position - frame.truth_position)) <= tolerance
        )
        records.append(
            FrameRecord(
                index=frame.index,
                chosen=found.index,
                score=found.score,
                estimate=(float(state.position[0]), float(state.position[1])),
                correct=correct,
                model_points=points_behind,
            )
        )
        if push_rows([found.feature]):
            on_leaf()

    run = TrackRun(
        records=tuple(records),
        bootstrap_frames=bootstrap_frames,
        sampler=tracker.sampler,
        success_rate=0.0,
    )
    return replace(run, success_rate=evaluate(run))


def evaluate(run: TrackRun) -> float:
    """Fraction of post-bootstrap frames whose chosen candidate was
    correct.  A run with no post-bootstrap frames scores 0.0."""
    if not run.records:
        raise ValueError("cannot evaluate an empty run")
    scored = run.records[run.bootstrap_frames :]
    if not scored:
        return 0.0
    return float(sum(1 for r in scored if r.correct)) / len(scored)
