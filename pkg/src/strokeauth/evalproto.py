"""Enrollment/verification protocol, error rates, and fusion.

Scores flow one way: each test attempt is compared against Z enrolled
samples and averaged (score_zvs1), per-character scores for a password
attempt are summed (fuse_password), and score pools become an equal
error rate via an explicit threshold sweep (compute_eer). run_protocol
wires these together over a dataset and emits a report whose canonical
serialization is byte-stable: same dataset, config, and seed give the
same bytes.
"""

import csv
import io
import json
from dataclasses import dataclass, replace

import numpy as np

from .errors import InvalidInputError, ProtocolError
from .strokes import StrokeSample

REPORT_VERSION = 1


# -- score aggregation ------------------------------------------------------


def score_zvs1(enrolled, test, scorer) -> float:
    """Mean of the Z one-to-one comparisons against the enrolled set.

    Accepts raw samples (prepared here) or already-prepared inputs."""
    if not enrolled:
        raise InvalidInputError("enrollment set must be non-empty")

    def prep(x):
        return scorer.prepare(x) if isinstance(x, StrokeSample) else x

    t = prep(test)
    return float(np.mean([scorer.score(prep(e), t) for e in enrolled]))


def fuse_password(per_character_scores) -> float:
    """Sum rule over one score per password character."""
    scores = list(per_character_scores)
    if not scores:
        raise InvalidInputError("cannot fuse an empty score list")
    return float(np.sum(scores))


# -- error rates ------------------------------------------------------------


def _score_arrays(genuine, impostor):
    g = np.asarray(list(genuine), dtype=np.float64)
    i = np.asarray(list(impostor), dtype=np.float64)
    if g.size == 0 or i.size == 0:
        raise InvalidInputError("genuine and impostor score lists must be non-empty")
    if not (np.all(np.isfinite(g)) and np.all(np.isfinite(i))):
        raise InvalidInputError("scores must be finite")
    return g, i


def _sweep(genuine, impostor):
    """FAR/FRR at every distinct score, thresholds ascending.

    At threshold t: accept when score >= t, so FAR counts impostor
    scores >= t and FRR counts genuine scores < t."""
    g, i = _score_arrays(genuine, impostor)
    thresholds = np.unique(np.concatenate([g, i]))
    g_sorted = np.sort(g)
    i_sorted = np.sort(i)
    far = (i.size - np.searchsorted(i_sorted, thresholds, side="left")) / i.size
    frr = np.searchsorted(g_sorted, thresholds, side="left") / g.size
    return thresholds, far, frr


def compute_eer(genuine, impostor):
    """Equal error rate and its threshold.

    Returns (eer, threshold) where eer = (FAR + FRR) / 2 at the swept
    threshold minimizing |FAR - FRR|; ties go to the lower threshold."""
    thresholds, far, frr = _sweep(genuine, impostor)
    k = int(np.argmin(np.abs(far - frr)))
    return float((far[k] + frr[k]) / 2.0), float(thresholds[k])


def det_curve(genuine, impostor, points: int = 0):
    """(FAR, FRR) pairs along the sweep, thresholds ascending, so FAR is
    nonincreasing and FRR nondecreasing along the output.

    points > 0 downsamples evenly but always keeps the endpoints and the
    equal-error point."""
    thresholds, far, frr = _sweep(genuine, impostor)
    k_eer = int(np.argmin(np.abs(far - frr)))
    n = thresholds.size
    if points and points < n:
        if points < 2:
            raise InvalidInputError("points must be >= 2 when downsampling")
        idx = np.unique(
            np.concatenate(
                [np.round(np.linspace(0, n - 1, points)).astype(int), [k_eer]]
            )
        )
    else:
        idx = np.arange(n)
    return [(float(far[k]), float(frr[k])) for k in idx]


# -- protocol ---------------------------------------------------------------


@dataclass(frozen=True)
class ProtocolConfig:
    """What to compare against what.

    Z samples per character from enroll_sessions form the template; the
    test session supplies genuine attempts. Impostor attempts borrow one
    genuine test-session sample from every other evaluation user — the
    informed-attacker model where the password itself is no secret, and
    only the drawing style is."""

    enroll_count: int = 4
    enroll_sessions: tuple = (1,)
    test_session: int = 2
    scorer: str = "dtw"
    password: tuple = ()
    split: str = ""
    seed: int = 0
    allow_same_session: bool = False
    impostor_selection: str = "first"
    det_points: int = 64

    def __post_init__(self):
        object.__setattr__(self, "enroll_sessions", tuple(self.enroll_sessions))
        object.__setattr__(self, "password", tuple(self.password))
        if self.enroll_count < 1:
            raise InvalidInputError("enroll_count must be >= 1")
        if not self.enroll_sessions:
            raise InvalidInputError("enroll_sessions must be non-empty")
        if any(s < 1 for s in self.enroll_sessions) or self.test_session < 1:
            raise InvalidInputError("session indices start at 1")
        if self.test_session in self.enroll_sessions and not self.allow_same_session:
            raise InvalidInputError(
                f"test_session {self.test_session} overlaps enroll_sessions "
                "(set allow_same_session to permit)"
            )
        if self.impostor_selection not in ("first", "random"):
            raise InvalidInputError("impostor_selection must be 'first' or 'random'")
        if self.det_points < 0:
            raise InvalidInputError("det_points must be >= 0")

    def to_dict(self) -> dict:
        return {
            "enroll_count": self.enroll_count,
            "enroll_sessions": list(self.enroll_sessions),
            "test_session": self.test_session,
            "scorer": self.scorer,
            "password": list(self.password),
            "split": self.split,
            "seed": self.seed,
            "allow_same_session": self.allow_same_session,
            "impostor_selection": self.impostor_selection,
            "det_points": self.det_points,
        }


@dataclass
class ProtocolReport:
    """Everything a verification run produced, JSON-stable.

    per_character maps label -> {genuine, impostor, eer, threshold, det};
    fused maps password length (as a string key, JSON-friendly) ->
    {eer, threshold}; metadata holds deterministic run facts only, so
    serializing the same run twice gives identical bytes."""

    config: dict
    per_character: dict
    fused: dict
    fused_det: list
    ranking: list
    metadata: dict
    version: int = REPORT_VERSION

    def to_json(self) -> str:
        payload = {
            "version": self.version,
            "config": self.config,
            "per_character": self.per_character,
            "fused": self.fused,
            "fused_det": self.fused_det,
            "ranking": self.ranking,
            "metadata": self.metadata,
        }
        return json.dumps(payload, sort_keys=True, separators=(",", ":"), allow_nan=False)

    @classmethod
    def from_json(cls, text: str) -> "ProtocolReport":
        payload = json.loads(text)
        if payload.get("version") != REPORT_VERSION:
            raise InvalidInputError(
                f"report version {payload.get('version')} unsupported"
            )
        return cls(
            config=payload["config"],
            per_character=payload["per_character"],
            fused=payload["fused"],
            fused_det=payload["fused_det"],
            ranking=payload["ranking"],
            metadata=payload["metadata"],
        )

    def to_csv(self) -> str:
        """Flat score table (character, kind, index, score) for plotting."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["character", "kind", "index", "score"])
        for label in sorted(self.per_character):
            entry = self.per_character[label]
            for kind in ("genuine", "impostor"):
                for k, s in enumerate(entry[kind]):
                    writer.writerow([label, kind, k, repr(s)])
        return buf.getvalue()


def _pools(dataset, config):
    """Per (user, character) enrollment and test sample pools, with a
    single error listing every deficiency up front."""
    users = dataset.users()
    if len(users) < 2:
        raise ProtocolError("protocol needs at least 2 evaluation users")
    enroll_set = set(config.enroll_sessions)
    enroll, test = {}, {}
    problems = []
    for user in users:
        for label in config.password:
            cell = sorted(
                dataset.filter(user_id=user, label=label),
                key=lambda s: (s.session, s.repetition),
            )
            e = [s for s in cell if s.session in enroll_set]
            t = [s for s in cell if s.session == config.test_session]
            if len(e) < config.enroll_count:
                problems.append(
                    f"user {user} character {label!r}: "
                    f"{len(e)} enrollment samples, need {config.enroll_count}"
                )
            if not t:
                problems.append(
                    f"user {user} character {label!r}: "
                    f"no samples in test session {config.test_session}"
                )
            enroll[(user, label)] = e[: config.enroll_count]
            test[(user, label)] = t
    if problems:
        raise ProtocolError(
            "dataset cannot support this protocol: " + "; ".join(problems)
        )
    return users, enroll, test


def run_protocol(dataset, scorer, config: ProtocolConfig) -> ProtocolReport:
    """Score every evaluation user against every other, per character,
    then fuse across password prefixes.

    Genuine attempts: each test-session sample of the target user.
    Impostor attempts: one test-session sample from each other user
    (the first by session order, or seed-chosen when configured)."""
    if not config.password:
        raise InvalidInputError("password must contain at least one character")
    users, enroll, test = _pools(dataset, config)
    rng = np.random.default_rng(config.seed)

    prepared = {}

    def prep(sample):
        if sample.key not in prepared:
            prepared[sample.key] = scorer.prepare(sample)
        return prepared[sample.key]

    # Impostor donors chosen before scoring so the random stream depends
    # only on config + dataset layout, never on scorer internals.
    donors = {}
    for label in config.password:
        for user in users:
            pool = test[(user, label)]
            if config.impostor_selection == "first":
                donors[(user, label)] = pool[0]
            else:
                donors[(user, label)] = pool[int(rng.integers(len(pool)))]

    # All one-to-one comparisons for a character go through score_many in
    # one flat batch (scorers may vectorize), then collapse back to the
    # Z-vs-1 means. Each attempt's Z comparisons are contiguous slices.
    genuine = {}  # (user, label) -> list of scores, one per test attempt
    impostor = {}  # (user, label) -> list of scores, one per other user
    for label in config.password:
        flat = []
        g_slices = {user: [] for user in users}
        i_slices = {user: [] for user in users}
        for user in users:
            enrolled = [prep(s) for s in enroll[(user, label)]]
            for t in test[(user, label)]:
                tp = prep(t)
                start = len(flat)
                flat.extend((e, tp) for e in enrolled)
                g_slices[user].append((start, len(flat)))
            for other in users:
                if other == user:
                    continue
                dp = prep(donors[(other, label)])
                start = len(flat)
                flat.extend((e, dp) for e in enrolled)
                i_slices[user].append((start, len(flat)))
        scores = np.asarray(scorer.score_many(flat), dtype=np.float64)
        for user in users:
            genuine[(user, label)] = [
                float(np.mean(scores[a:b])) for a, b in g_slices[user]
            ]
            impostor[(user, label)] = [
                float(np.mean(scores[a:b])) for a, b in i_slices[user]
            ]

    per_character = {}
    for label in config.password:
        g = [s for user in users for s in genuine[(user, label)]]
        i = [s for user in users for s in impostor[(user, label)]]
        eer, threshold = compute_eer(g, i)
        per_character[label] = {
            "genuine": g,
            "impostor": i,
            "eer": eer,
            "threshold": threshold,
            "det": [list(p) for p in det_curve(g, i, config.det_points)],
        }

    fused = {}
    fused_det = []
    for length in range(1, len(config.password) + 1):
        prefix = config.password[:length]
        fg, fi = [], []
        for user in users:
            attempts = min(len(genuine[(user, label)]) for label in prefix)
            for k in range(attempts):
                fg.append(fuse_password(genuine[(user, label)][k] for label in prefix))
            opponents = len(impostor[(user, prefix[0])])
            for j in range(opponents):
                fi.append(fuse_password(impostor[(user, label)][j] for label in prefix))
        eer, threshold = compute_eer(fg, fi)
        fused[str(length)] = {"eer": eer, "threshold": threshold}
        if length == len(config.password):
            fused_det = [list(p) for p in det_curve(fg, fi, config.det_points)]

    report = ProtocolReport(
        config={**config.to_dict(), "scorer": getattr(scorer, "name", config.scorer)},
        per_character=per_character,
        fused=fused,
        fused_det=fused_det,
        ranking=[],
        metadata={
            "users": len(users),
            "characters": len(config.password),
            "genuine_per_character": len(per_character[config.password[0]]["genuine"]),
            "impostor_per_character": len(per_character[config.password[0]]["impostor"]),
        },
    )
    report.ranking = rank_characters(report)
    return report


def rank_characters(report: ProtocolReport) -> list:
    """Characters by ascending equal error rate, label breaking ties."""
    if not report.per_character:
        return []
    return [
        label
        for label, _ in sorted(
            ((label, entry["eer"]) for label, entry in report.per_character.items()),
            key=lambda item: (item[1], item[0]),
        )
    ]


# -- session studies --------------------------------------------------------


def template_update_schemes(max_session: int = 6):
    """Enrollment windows against the final session: growing windows
    starting at session 1, then suffix windows ending at the penultimate
    session. Names like '1-3vs6' list enrollment range then test session."""
    last = max_session
    schemes = []
    for k in range(1, last):
        sessions = tuple(range(1, k + 1))
        schemes.append((_scheme_name(sessions, last), sessions, last))
    for k in range(2, last):
        sessions = tuple(range(k, last))
        schemes.append((_scheme_name(sessions, last), sessions, last))
    return schemes


def intra_user_schemes(max_session: int = 6):
    """Adjacent-session pairings: enroll on k, test on k+1."""
    return [
        (_scheme_name((k,), k + 1), (k,), k + 1) for k in range(1, max_session)
    ]


def _scheme_name(enroll_sessions, test_session) -> str:
    if len(enroll_sessions) == 1:
        left = str(enroll_sessions[0])
    else:
        left = f"{enroll_sessions[0]}-{enroll_sessions[-1]}"
    return f"{left}vs{test_session}"


def run_session_study(dataset, scorer, base_config: ProtocolConfig, schemes) -> dict:
    """One protocol run per (name, enroll_sessions, test_session) scheme;
    returns name -> ProtocolReport in scheme order."""
    results = {}
    for name, enroll_sessions, test_session in schemes:
        cfg = replace(
            base_config,
            enroll_sessions=tuple(enroll_sessions),
            test_session=test_session,
        )
        results[name] = run_protocol(dataset, scorer, cfg)
    return results
