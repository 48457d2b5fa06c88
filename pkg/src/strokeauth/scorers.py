"""Comparators that turn two drawn samples into one similarity score.

Every scorer follows the same two-phase shape: prepare(sample) runs the
shared pipeline (uniform resampling, time-function extraction, per-
channel normalization) once per sample, and score(a, b) compares two
prepared representations. Scores share one polarity — higher means more
likely the same writer — so fusion and error-rate code never branch on
scorer type. Distance-based scorers negate their normalized distance at
this boundary.
"""

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .align import DtwConfig, apply_path, dtw, sw_dtw
from .errors import InvalidInputError
from .features import extract_time_functions, prepared_channels
from .rnn.model import PairExample, SiameseModel
from .strokes import StrokeSample, resample_uniform

DEFAULT_RATE_HZ = 100.0
SCORER_NAMES = ("dtw", "sw_dtw", "rnn", "ta_rnn")


def prepare_sample(sample: StrokeSample, rate_hz: float = DEFAULT_RATE_HZ) -> np.ndarray:
    """Resample, extract the 21 time functions, normalize per channel."""
    return prepared_channels(extract_time_functions(resample_uniform(sample, rate_hz)))


def pad_to_match(a: np.ndarray, b: np.ndarray):
    """Zero-pad the shorter sequence so both share the longer length."""
    if a.shape[0] != b.shape[0]:
        raise InvalidInputError(
            f"channel mismatch: {a.shape[0]} vs {b.shape[0]}"
        )
    n = max(a.shape[1], b.shape[1])
    out = []
    for seq in (a, b):
        if seq.shape[1] == n:
            out.append(seq)
        else:
            padded = np.zeros((seq.shape[0], n), dtype=seq.dtype)
            padded[:, : seq.shape[1]] = seq
            out.append(padded)
    return out[0], out[1]


@dataclass
class _PreparedScorer:
    rate_hz: float = DEFAULT_RATE_HZ

    def prepare(self, sample: StrokeSample) -> np.ndarray:
        return prepare_sample(sample, self.rate_hz)

    def make_example(self, a, b, label: int) -> PairExample:
        raise InvalidInputError(f"{self.name} scorer does not train on pair examples")

    def score_many(self, pairs) -> np.ndarray:
        """Scores for a list of (prepared_a, prepared_b), in order."""
        return np.array([self.score(a, b) for a, b in pairs])


@dataclass
class DtwScorer(_PreparedScorer):
    """Negated normalized elastic-alignment distance."""

    config: DtwConfig = field(default_factory=DtwConfig)
    name: str = "dtw"

    def score(self, a: np.ndarray, b: np.ndarray) -> float:
        return -dtw(a, b, self.config).normalized_distance


@dataclass
class SwDtwScorer(_PreparedScorer):
    """Negated normalized sliding-window alignment distance."""

    config: DtwConfig = field(default_factory=DtwConfig)
    name: str = "sw_dtw"

    def score(self, a: np.ndarray, b: np.ndarray) -> float:
        return -sw_dtw(a, b, self.config).normalized_distance


@dataclass
class RnnScorer(_PreparedScorer):
    """Learned comparator on zero-padded, unaligned channel sequences."""

    model: SiameseModel = None
    name: str = "rnn"

    def __post_init__(self):
        if self.model is None:
            raise InvalidInputError(f"{self.name} scorer needs a model")

    def make_example(self, a, b, label: int) -> PairExample:
        pa, pb = pad_to_match(a, b)
        return PairExample(pa, pb, label)

    def score(self, a: np.ndarray, b: np.ndarray) -> float:
        return self.model.score_pair(self.make_example(a, b, 1))

    def score_many(self, pairs) -> np.ndarray:
        examples = [self.make_example(a, b, 1) for a, b in pairs]
        return self.model.score_examples(examples)


@dataclass
class TaRnnScorer(_PreparedScorer):
    """Learned comparator on pre-aligned sequences: a sliding-window
    alignment warps both inputs onto a common time axis first, so the
    network spends its capacity on shape, not time-axis slack."""

    model: SiameseModel = None
    align_config: DtwConfig = field(default_factory=DtwConfig)
    name: str = "ta_rnn"

    def __post_init__(self):
        if self.model is None:
            raise InvalidInputError(f"{self.name} scorer needs a model")

    def make_example(self, a, b, label: int) -> PairExample:
        path = sw_dtw(a, b, self.align_config)
        ga, gb = apply_path(a, b, path)
        return PairExample(ga, gb, label)

    def score(self, a: np.ndarray, b: np.ndarray) -> float:
        return self.model.score_pair(self.make_example(a, b, 1))

    def score_many(self, pairs) -> np.ndarray:
        examples = [self.make_example(a, b, 1) for a, b in pairs]
        return self.model.score_examples(examples)


def get_scorer(name: str, model: SiameseModel = None, rate_hz: float = DEFAULT_RATE_HZ):
    """Factory keyed by the scorer names used in configs and reports."""
    if name == "dtw":
        return DtwScorer(rate_hz=rate_hz)
    if name == "sw_dtw":
        return SwDtwScorer(rate_hz=rate_hz)
    if name == "rnn":
        return RnnScorer(rate_hz=rate_hz, model=model)
    if name == "ta_rnn":
        return TaRnnScorer(rate_hz=rate_hz, model=model)
    raise InvalidInputError(f"unknown scorer {name!r}; available: {SCORER_NAMES}")


# -- training pair construction ---------------------------------------------


def enumerate_training_pairs(
    dataset,
    seed: int = 0,
    max_genuine_per_cell: int = None,
    impostors_per_genuine: float = 1.0,
):
    """Deterministic (sample, sample, label) triples for comparator training.

    Genuine pairs combine two samples of the same writer and character
    (any sessions); impostor pairs combine samples of different writers
    drawing the same character. Impostor count tracks the genuine count
    per character via impostors_per_genuine."""
    if impostors_per_genuine <= 0:
        raise InvalidInputError("impostors_per_genuine must be positive")
    rng = np.random.default_rng(seed)
    triples = []
    for label in dataset.labels():
        by_user = {}
        for user in dataset.users():
            cell = dataset.filter(user_id=user, label=label)
            if cell:
                by_user[user] = sorted(cell, key=lambda s: (s.session, s.repetition))
        genuine = []
        for user, cell in by_user.items():
            pairs = list(combinations(cell, 2))
            if max_genuine_per_cell is not None and len(pairs) > max_genuine_per_cell:
                picked = rng.choice(len(pairs), size=max_genuine_per_cell, replace=False)
                pairs = [pairs[k] for k in sorted(picked)]
            genuine.extend(pairs)
        triples.extend((a, b, 1) for a, b in genuine)

        users = list(by_user)
        if len(users) < 2:
            continue
        n_impostor = int(round(impostors_per_genuine * len(genuine)))
        for _ in range(n_impostor):
            ua, ub = rng.choice(len(users), size=2, replace=False)
            cell_a, cell_b = by_user[users[ua]], by_user[users[ub]]
            a = cell_a[int(rng.integers(len(cell_a)))]
            b = cell_b[int(rng.integers(len(cell_b)))]
            triples.append((a, b, 0))
    return triples


def pairs_to_examples(triples, scorer, cache: dict = None):
    """Prepare each distinct sample once, then build the scorer's pair
    examples (padded or pre-aligned, matching how it scores)."""
    if cache is None:
        cache = {}
    examples = []
    for a, b, label in triples:
        for s in (a, b):
            if s.key not in cache:
                cache[s.key] = scorer.prepare(s)
        examples.append(scorer.make_example(cache[a.key], cache[b.key], label))
    return examples
