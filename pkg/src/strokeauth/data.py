"""Dataset container, canonical on-disk format, importers, and splits.

The canonical format is line-delimited JSON: a header line identifying
the format and version, then one sample per line with nested stroke
point arrays (units: pixels and milliseconds). It round-trips every
field losslessly, diffs cleanly, and streams.
"""

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DatasetError, StrokeAuthError
from .strokes import StrokeSample, validate_sample

FORMAT_NAME = "stroke-dataset"
FORMAT_VERSION = 1


@dataclass
class Dataset:
    """Immutable-by-convention collection of samples with a unique-key index."""

    samples: list
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self._index = {}
        for sample in self.samples:
            key = sample.key
            if key in self._index:
                raise DatasetError(f"duplicate sample key {key}")
            self._index[key] = sample

    def __len__(self) -> int:
        return len(self.samples)

    def users(self) -> list:
        return sorted({s.user_id for s in self.samples}, key=_id_sort_key)

    def labels(self) -> list:
        return sorted({s.label for s in self.samples})

    def sessions_of(self, user_id: str) -> list:
        return sorted({s.session for s in self.samples if s.user_id == user_id})

    def get(self, user_id: str, label: str, session: int, repetition: int = 0) -> StrokeSample:
        try:
            return self._index[(user_id, label, session, repetition)]
        except KeyError:
            raise DatasetError(
                f"no sample for user={user_id} label={label!r} "
                f"session={session} repetition={repetition}"
            ) from None

    def filter(self, user_id=None, label=None, session=None) -> list:
        """Samples matching every given criterion, in stored order."""
        out = []
        for s in self.samples:
            if user_id is not None and s.user_id != user_id:
                continue
            if label is not None and s.label != label:
                continue
            if session is not None and s.session != session:
                continue
            out.append(s)
        return out

    def restrict_users(self, user_ids) -> "Dataset":
        keep = set(user_ids)
        return Dataset(
            samples=[s for s in self.samples if s.user_id in keep],
            provenance=dict(self.provenance),
        )


def _id_sort_key(user_id: str):
    """Sort ids numerically when they embed numbers: u2 before u10."""
    parts = re.split(r"(\d+)", user_id)
    return tuple(int(p) if p.isdigit() else p for p in parts)


# -- canonical format -------------------------------------------------------


def _sample_to_record(sample: StrokeSample) -> dict:
    return {
        "user": sample.user_id,
        "session": sample.session,
        "label": sample.label,
        "repetition": sample.repetition,
        "source": sample.source,
        "strokes": [np.asarray(s, dtype=np.float64).tolist() for s in sample.strokes],
    }


def _record_to_sample(rec: dict) -> StrokeSample:
    return StrokeSample(
        user_id=rec["user"],
        session=int(rec["session"]),
        label=rec["label"],
        repetition=int(rec.get("repetition", 0)),
        source=rec.get("source", "imported"),
        strokes=[np.asarray(s, dtype=np.float64) for s in rec["strokes"]],
    )


def export_dataset(dataset: Dataset, path) -> None:
    """Write the canonical line-delimited format (header, then samples)."""
    header = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "provenance": dataset.provenance,
        "count": len(dataset),
    }
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for sample in dataset.samples:
            fh.write(json.dumps(_sample_to_record(sample), sort_keys=True) + "\n")


@dataclass
class ImportResult:
    """Outcome of an import: valid samples plus quarantined rejects.

    parsed_count == len(dataset) + len(quarantined) always; nothing is
    silently dropped."""

    dataset: Dataset
    quarantined: list  # (source reference, reason) pairs
    parsed_count: int

    @property
    def imported_count(self) -> int:
        return len(self.dataset)


def _quarantine_reason(exc: Exception) -> str:
    msg = str(exc)
    if "increasing" in msg or "starts at t=" in msg or "ordered by first timestamp" in msg:
        return f"timestamp disorder: {msg}"
    return f"malformed sample: {msg}"


def import_canonical(path) -> ImportResult:
    """Read the canonical format back; quarantine invalid samples with reasons."""
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"no such file: {path}")
    samples = []
    quarantined = []
    parsed = 0
    with open(path, encoding="utf-8") as fh:
        header_line = fh.readline()
        if not header_line:
            raise DatasetError(f"{path}: empty file, expected a header line")
        try:
            header = json.loads(header_line)
        except json.JSONDecodeError as exc:
            raise DatasetError(f"{path}: unreadable header: {exc}") from exc
        if header.get("format") != FORMAT_NAME:
            raise DatasetError(f"{path}: not a {FORMAT_NAME} file")
        if header.get("version") != FORMAT_VERSION:
            raise DatasetError(
                f"{path}: format version {header.get('version')} unsupported"
            )
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            parsed += 1
            ref = f"{path.name}:{lineno}"
            try:
                sample = _record_to_sample(json.loads(line))
                validate_sample(sample)
            except StrokeAuthError as exc:
                quarantined.append((ref, _quarantine_reason(exc)))
                continue
            except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
                quarantined.append((ref, f"unparseable record: {exc}"))
                continue
            samples.append(sample)
    provenance = dict(header.get("provenance", {}))
    provenance.setdefault("imported_from", str(path))
    return ImportResult(
        dataset=Dataset(samples=samples, provenance=provenance),
        quarantined=quarantined,
        parsed_count=parsed,
    )


# Best-effort column/filename mappings for the published releases; the
# on-disk layout is configuration, not contract — verify on first import
# and adjust via a custom mapping dict if a release differs.
IMPORT_PRESETS = {
    "ebiodigit": {
        "kind": "table",
        "columns": {"x": 0, "y": 1, "t": 2},
        "filename_pattern": r"u(?P<user>\d+)_s(?P<session>\d+)_digit(?P<label>\d)_(?P<repetition>\d+)\.txt$",
        "delimiter": None,  # any whitespace
        "stroke_gap_ms": 50.0,
    },
    "mobiletouch": {
        "kind": "table",
        "columns": {"x": 0, "y": 1, "t": 2, "stroke": 3},
        "filename_pattern": r"u(?P<user>\d+)_s(?P<session>\d+)_char(?P<label>[^_]+)_(?P<repetition>\d+)\.txt$",
        "delimiter": None,
        "stroke_gap_ms": None,
    },
}


def _split_strokes(points: np.ndarray, stroke_col, gap_ms):
    """Group a flat point table into strokes, by explicit stroke ids when
    present, otherwise by timestamp gaps larger than gap_ms."""
    if stroke_col is not None:
        ids = points[:, stroke_col]
        bounds = np.flatnonzero(np.diff(ids) != 0) + 1
    elif gap_ms is not None:
        bounds = np.flatnonzero(np.diff(points[:, 2]) > gap_ms) + 1
    else:
        bounds = np.array([], dtype=int)
    return [seg[:, :3] for seg in np.split(points, bounds)]


def import_dataset(path, format_spec="canonical") -> ImportResult:
    """Import a canonical file or a directory of per-sample tables.

    format_spec is "canonical", a preset name from IMPORT_PRESETS, or a
    mapping dict in the same shape as the presets."""
    if format_spec == "canonical":
        return import_canonical(path)
    if isinstance(format_spec, str):
        if format_spec not in IMPORT_PRESETS:
            raise DatasetError(
                f"unknown import preset {format_spec!r}; "
                f"available: {sorted(IMPORT_PRESETS)} or 'canonical'"
            )
        format_spec = IMPORT_PRESETS[format_spec]
    root = Path(path)
    if not root.is_dir():
        raise DatasetError(f"not a directory: {root}")

    pattern = re.compile(format_spec["filename_pattern"])
    columns = format_spec["columns"]
    needed = max(columns.values()) + 1
    samples = []
    quarantined = []
    parsed = 0
    for file in sorted(root.rglob("*")):
        if not file.is_file():
            continue
        match = pattern.search(file.name)
        if not match:
            continue
        parsed += 1
        ref = str(file.relative_to(root))
        try:
            table = np.loadtxt(file, delimiter=format_spec.get("delimiter"), ndmin=2)
        except (ValueError, OSError) as exc:
            quarantined.append((ref, f"unreadable table: {exc}"))
            continue
        if table.shape[1] < needed:
            quarantined.append((ref, f"expected >= {needed} columns, found {table.shape[1]}"))
            continue
        ordered = table[:, [columns["x"], columns["y"], columns["t"]]]
        if "stroke" in columns:
            ordered = np.column_stack([ordered, table[:, columns["stroke"]]])
        fields = match.groupdict()
        sample = StrokeSample(
            user_id=fields["user"],
            session=int(fields.get("session", 1)),
            label=fields["label"],
            repetition=int(fields.get("repetition", 0)),
            source="imported",
            strokes=_split_strokes(
                ordered,
                3 if "stroke" in columns else None,
                format_spec.get("stroke_gap_ms"),
            ),
        )
        try:
            validate_sample(sample)
        except StrokeAuthError as exc:
            quarantined.append((ref, _quarantine_reason(exc)))
            continue
        samples.append(sample)
    return ImportResult(
        dataset=Dataset(
            samples=samples,
            provenance={"imported_from": str(root), "format": "table"},
        ),
        quarantined=quarantined,
        parsed_count=parsed,
    )


# -- splitting --------------------------------------------------------------


@dataclass(frozen=True)
class SplitSpec:
    """How to carve users into development and evaluation groups.

    kind "first_n": the first dev_count users (numeric-aware id order)
    develop, the rest evaluate. kind "fraction": the first
    round(dev_fraction * n) users develop. Evaluation users must own
    every session in required_sessions when that is set.
    """

    kind: str = "fraction"
    dev_count: int = 0
    dev_fraction: float = 0.8
    val_fraction: float = 0.2
    required_sessions: tuple = None

    def __post_init__(self):
        if self.kind not in ("first_n", "fraction"):
            raise DatasetError(f"unknown split kind {self.kind!r}")
        if self.kind == "first_n" and self.dev_count < 1:
            raise DatasetError("first_n split needs dev_count >= 1")
        if not (0.0 < self.dev_fraction < 1.0) or not (0.0 <= self.val_fraction < 1.0):
            raise DatasetError("fractions must lie in (0, 1)")


@dataclass
class Split:
    dev_train: Dataset
    dev_val: Dataset
    eval: Dataset


def make_split(dataset: Dataset, spec: SplitSpec, seed: int = 0) -> Split:
    """User-disjoint three-way split, deterministic given seed.

    Development users are taken from the front of the id-ordered user
    list; the train/validation subdivision shuffles them with the seed.
    Evaluation keeps only users owning all required sessions."""
    users = dataset.users()
    if len(users) < 2:
        raise DatasetError(f"need at least 2 users to split, have {len(users)}")
    if spec.kind == "first_n":
        if spec.dev_count >= len(users):
            raise DatasetError(
                f"dev_count {spec.dev_count} leaves no evaluation users (have {len(users)})"
            )
        dev_users = users[: spec.dev_count]
    else:
        n_dev = max(1, min(len(users) - 1, round(spec.dev_fraction * len(users))))
        dev_users = users[:n_dev]
    eval_users = [u for u in users if u not in set(dev_users)]
    if spec.required_sessions:
        required = set(spec.required_sessions)
        eval_users = [u for u in eval_users if required.issubset(dataset.sessions_of(u))]
    if not eval_users:
        raise DatasetError("no evaluation users own the required sessions")

    rng = np.random.default_rng(seed)
    order = list(rng.permutation(len(dev_users)))
    n_val = int(round(spec.val_fraction * len(dev_users)))
    n_val = min(max(n_val, 1 if spec.val_fraction > 0 else 0), len(dev_users) - 1)
    val_users = [dev_users[k] for k in order[:n_val]]
    train_users = [dev_users[k] for k in order[n_val:]]

    return Split(
        dev_train=dataset.restrict_users(train_users),
        dev_val=dataset.restrict_users(val_users),
        eval=dataset.restrict_users(eval_users),
    )
