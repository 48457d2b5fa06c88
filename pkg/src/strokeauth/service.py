"""HTTP verification service backing the drawing demo.

Users register a password (an ordered list of character labels), enroll
by submitting drawn samples per character, and verify by drawing the
whole password again. Scoring follows the evaluation pipeline: each
attempt is compared against the enrolled templates (enrolled sample
first in every pair), per-character scores are summed, and the fused
score is thresholded.

Privacy: the store persists extracted time-function templates only.
Raw stroke points never touch disk unless the store was explicitly
built with keep_attempt_strokes=True (debugging aid, off by default).
"""

import json
import threading
import time
from pathlib import Path
from typing import Optional

import numpy as np
from fastapi import FastAPI
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .errors import InvalidInputError, StrokeAuthError
from .evalproto import compute_eer
from .features import extract_time_functions, prepared_channels, TimeFunctionSet
from .rnn.model import SiameseModel
from .scorers import get_scorer
from .strokes import StrokeSample, resample_uniform

STORE_VERSION = 1
DEFAULT_ENROLL_COUNT = 1


class CreateUserRequest(BaseModel):
    user_id: str
    password: list


class AttemptBody(BaseModel):
    label: str
    strokes: list


class VerifyRequest(BaseModel):
    user_id: str
    attempts: list  # of {label, strokes}
    threshold: Optional[float] = None


class EnrollmentStore:
    """Single-file JSON store of enrollment records.

    Mutations are serialized behind one lock and written atomically
    (temp file + replace); scoring only reads."""

    def __init__(self, path):
        self.path = Path(path)
        self._lock = threading.Lock()
        if self.path.exists():
            data = json.loads(self.path.read_text())
            if data.get("version") != STORE_VERSION:
                raise InvalidInputError(
                    f"store version {data.get('version')} unsupported"
                )
            self._users = data["users"]
        else:
            self._users = {}

    def _flush(self):
        tmp = self.path.with_suffix(self.path.suffix + ".tmp")
        tmp.write_text(
            json.dumps({"version": STORE_VERSION, "users": self._users}, sort_keys=True)
        )
        tmp.replace(self.path)

    def create_user(self, user_id: str, password, enroll_count: int) -> bool:
        with self._lock:
            if user_id in self._users:
                return False
            self._users[user_id] = {
                "password": list(password),
                "enroll_count": enroll_count,
                "templates": {label: [] for label in password},
                "created_at": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
            }
            self._flush()
            return True

    def get(self, user_id: str):
        return self._users.get(user_id)

    def add_template(self, user_id: str, label: str, tfs: TimeFunctionSet) -> int:
        """Returns how many more samples the label still needs."""
        with self._lock:
            record = self._users[user_id]
            record["templates"][label].append(
                {
                    "channels": tfs.channels.tolist(),
                    "timestamps": tfs.timestamps.tolist(),
                }
            )
            self._flush()
            return max(record["enroll_count"] - len(record["templates"][label]), 0)


def _template_tfs(entry) -> TimeFunctionSet:
    return TimeFunctionSet(
        channels=np.asarray(entry["channels"], dtype=np.float64),
        timestamps=np.asarray(entry["timestamps"], dtype=np.float64),
    )


def _error(status: int, detail: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"detail": detail})


def build_app(
    store_path,
    checkpoint=None,
    scorer_name: str = "dtw",
    threshold: Optional[float] = None,
    calibration_report=None,
    enroll_count: int = DEFAULT_ENROLL_COUNT,
    rate_hz: float = 100.0,
) -> FastAPI:
    """Wire the service against a store file and a scorer.

    threshold beats the calibration file; without either, the decision
    threshold defaults to 0.0 (callers should calibrate for real use)."""
    model = SiameseModel.load(checkpoint) if checkpoint else None
    scorer = get_scorer(scorer_name, model=model)
    store = EnrollmentStore(store_path)

    calibration = None
    if calibration_report is not None:
        payload = json.loads(Path(calibration_report).read_text())
        if "genuine" not in payload or "impostor" not in payload:
            raise InvalidInputError(
                "calibration file must hold 'genuine' and 'impostor' score lists"
            )
        eer, thr = compute_eer(payload["genuine"], payload["impostor"])
        g = np.asarray(payload["genuine"], dtype=np.float64)
        i = np.asarray(payload["impostor"], dtype=np.float64)
        calibration = {
            "threshold": thr,
            "eer": eer,
            "far": float(np.mean(i >= thr)),
            "frr": float(np.mean(g < thr)),
        }

    if threshold is not None:
        default_threshold = threshold
    elif calibration is not None:
        default_threshold = calibration["threshold"]
    else:
        default_threshold = 0.0

    app = FastAPI(title="strokeauth", version="1")

    def prepare_attempt(user_id: str, label: str, strokes):
        sample = StrokeSample(
            user_id=user_id,
            session=1,
            label=label,
            strokes=[np.asarray(s, dtype=np.float64) for s in strokes],
            source="live",
        )
        tfs = extract_time_functions(resample_uniform(sample, rate_hz))
        return tfs

    @app.post("/api/users")
    def create_user(body: CreateUserRequest):
        if not body.user_id:
            return _error(400, "user_id must be non-empty")
        if not body.password:
            return _error(400, "password must list at least one character label")
        if not all(isinstance(label, str) and label for label in body.password):
            return _error(400, "password labels must be non-empty strings")
        if not store.create_user(body.user_id, body.password, enroll_count):
            return _error(409, f"user {body.user_id} already exists")
        return JSONResponse(
            status_code=201,
            content={
                "user_id": body.user_id,
                "password": list(body.password),
                "enroll_count": enroll_count,
            },
        )

    @app.post("/api/users/{user_id}/enroll")
    def enroll(user_id: str, body: AttemptBody):
        record = store.get(user_id)
        if record is None:
            return _error(404, f"unknown user {user_id}")
        if body.label not in record["password"]:
            return _error(
                422, f"label {body.label!r} is not part of this user's password"
            )
        try:
            tfs = prepare_attempt(user_id, body.label, body.strokes)
        except (StrokeAuthError, ValueError) as exc:
            return _error(422, f"malformed strokes: {exc}")
        remaining = store.add_template(user_id, body.label, tfs)
        complete = all(
            len(record["templates"][label]) >= record["enroll_count"]
            for label in record["password"]
        )
        return {
            "label": body.label,
            "remaining": remaining,
            "enrollment_complete": complete,
        }

    @app.post("/api/verify")
    def verify(body: VerifyRequest):
        record = store.get(body.user_id)
        if record is None:
            return _error(404, f"unknown user {body.user_id}")
        incomplete = [
            label
            for label in record["password"]
            if len(record["templates"][label]) < record["enroll_count"]
        ]
        if incomplete:
            return _error(
                409, "enrollment incomplete for labels: " + ", ".join(incomplete)
            )
        attempt_labels = [a.get("label") for a in body.attempts]
        if attempt_labels != record["password"]:
            return _error(
                422,
                f"attempts must cover the password in order {record['password']}, "
                f"got {attempt_labels}",
            )
        per_character = []
        for attempt in body.attempts:
            try:
                tfs = prepare_attempt(body.user_id, attempt["label"], attempt["strokes"])
            except (StrokeAuthError, ValueError, TypeError, KeyError) as exc:
                return _error(422, f"malformed strokes: {exc}")
            attempt_prep = prepared_channels(tfs)
            enrolled = [
                prepared_channels(_template_tfs(entry))
                for entry in record["templates"][attempt["label"]][
                    : record["enroll_count"]
                ]
            ]
            score = float(
                np.mean([scorer.score(e, attempt_prep) for e in enrolled])
            )
            per_character.append({"label": attempt["label"], "score": score})
        fused = float(np.sum([c["score"] for c in per_character]))
        active_threshold = (
            body.threshold if body.threshold is not None else default_threshold
        )
        return {
            "user_id": body.user_id,
            "per_character_scores": per_character,
            "fused_score": fused,
            "threshold": active_threshold,
            "decision": "accept" if fused >= active_threshold else "reject",
        }

    @app.get("/api/calibration")
    def get_calibration():
        if calibration is None:
            return _error(404, "no calibration file configured")
        return calibration

    return app
