"""Service state backed by an append-only, hash-chained JSON-lines log.

Every state change (team registration, phase configuration, key upload,
submission) is one log record. State is rebuilt by replaying the log,
optionally starting from the latest snapshot.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import secrets
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable

from ..errors import FameError
from ..submission import BundleLayout, ScoringKeys, config_name, score_archive
from .config import PHASES, PhaseConfig, check_phase, format_time, parse_time

log = logging.getLogger(__name__)

GENESIS = "0" * 64
LOG_NAME = "records.jsonl"
SNAPSHOT_NAME = "snapshot.json"


class AuthError(FameError):
    pass


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _sha256(data) -> str:
    if isinstance(data, str):
        data = data.encode("utf-8")
    return hashlib.sha256(data).hexdigest()


def _now() -> datetime:
    return datetime.now(timezone.utc)


@dataclass(frozen=True)
class TeamRecord:
    team_id: str
    display_name: str
    credential_hash: str


@dataclass(frozen=True)
class SubmissionRecord:
    submission_id: str
    team_id: str
    received_at: str
    phase: str | None
    archive_digest: str
    status: str  # "scored" | "rejected"
    counted: bool
    reason: str | None = None
    report: dict | None = None

    def to_dict(self) -> dict:
        return {"submission_id": self.submission_id, "team_id": self.team_id,
                "received_at": self.received_at, "phase": self.phase,
                "archive_digest": self.archive_digest, "status": self.status,
                "counted": self.counted, "reason": self.reason, "report": self.report}

    @classmethod
    def from_dict(cls, d: dict) -> "SubmissionRecord":
        return cls(**d)


@dataclass
class _State:
    teams: dict = field(default_factory=dict)
    phases: dict = field(default_factory=dict)
    keys_meta: dict = field(default_factory=dict)
    submissions: list = field(default_factory=list)
    seq: int = 0
    head: str = GENESIS

    def to_dict(self) -> dict:
        return {
            "teams": {k: vars(v) for k, v in sorted(self.teams.items())},
            "phases": {k: v.to_dict() for k, v in sorted(self.phases.items())},
            "keys": dict(sorted(self.keys_meta.items())),
            "submissions": [s.to_dict() for s in self.submissions],
            "seq": self.seq,
            "head": self.head,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "_State":
        return cls(
            teams={k: TeamRecord(**v) for k, v in d["teams"].items()},
            phases={k: PhaseConfig.from_dict(k, v) for k, v in d["phases"].items()},
            keys_meta=dict(d["keys"]),
            submissions=[SubmissionRecord.from_dict(s) for s in d["submissions"]],
            seq=d["seq"], head=d["head"],
        )


class PhaseService:
    """Thread-safe core of the scoring service.

    All writes go through one lock, so quota checks and log appends are
    atomic. ``clock`` returns the current UTC time and is injectable.
    """

    def __init__(self, data_dir, admin_token: str | None = None, phases: dict | None = None,
                 clock: Callable[[], datetime] = _now, snapshot_every: int = 50):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.admin_hash = _sha256(admin_token) if admin_token else None
        self.clock = clock
        self.snapshot_every = snapshot_every
        self._lock = threading.Lock()
        self._keys: dict[str, tuple[BundleLayout, ScoringKeys]] = {}
        self._state = self._recover()
        self._log = open(self.data_dir / LOG_NAME, "a", encoding="utf-8")
        for name, cfg in (phases or {}).items():
            current = self._state.phases.get(name)
            if current is None or current.to_dict() != cfg.to_dict():
                self.set_phase_config(cfg, admin_token=None, _trusted=True)

    # -- persistence ---------------------------------------------------------

    @property
    def log_path(self) -> Path:
        return self.data_dir / LOG_NAME

    def _read_log(self) -> list[dict]:
        if not self.log_path.exists():
            return []
        raw = self.log_path.read_bytes()
        records, good_bytes = [], 0
        for line in raw.splitlines(keepends=True):
            if not line.endswith(b"\n"):
                break  # torn final write
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError:
                break
            good_bytes += len(line)
        if good_bytes != len(raw):
            log.warning("truncating %d trailing bytes of a torn log write", len(raw) - good_bytes)
            with open(self.log_path, "r+b") as fh:
                fh.truncate(good_bytes)
        return records

    def _recover(self) -> _State:
        records = self._read_log()
        state, start = _State(), 0
        snap_path = self.data_dir / SNAPSHOT_NAME
        if snap_path.exists():
            try:
                snap = _State.from_dict(json.loads(snap_path.read_text(encoding="utf-8")))
                if 0 < snap.seq <= len(records) and records[snap.seq - 1]["hash"] == snap.head:
                    state, start = snap, snap.seq
            except (ValueError, KeyError, TypeError):
                log.warning("ignoring unreadable snapshot")
        prev = state.head
        for rec in records[start:]:
            body = {"seq": rec["seq"], "type": rec["type"], "data": rec["data"]}
            expected = _sha256(prev + _canonical(body))
            if rec["prev"] != prev or rec["hash"] != expected or rec["seq"] != state.seq + 1:
                raise RuntimeError(f"audit log corrupted at record {rec.get('seq')}")
            self._apply(state, rec["type"], rec["data"])
            state.seq, state.head = rec["seq"], rec["hash"]
            prev = rec["hash"]
        for phase, meta in state.keys_meta.items():
            self._keys[phase] = self._load_keys_files(phase, meta)
        return state

    def _append(self, type_: str, data: dict) -> None:
        state = self._state
        body = {"seq": state.seq + 1, "type": type_, "data": data}
        digest = _sha256(state.head + _canonical(body))
        line = _canonical(dict(body, prev=state.head, hash=digest)) + "\n"
        self._log.write(line)
        self._log.flush()
        os.fsync(self._log.fileno())
        self._apply(state, type_, data)
        state.seq, state.head = body["seq"], digest
        if self.snapshot_every and state.seq % self.snapshot_every == 0:
            self._write_snapshot()

    def _write_snapshot(self) -> None:
        tmp = self.data_dir / (SNAPSHOT_NAME + ".tmp")
        tmp.write_text(_canonical(self._state.to_dict()), encoding="utf-8")
        os.replace(tmp, self.data_dir / SNAPSHOT_NAME)

    @staticmethod
    def _apply(state: _State, type_: str, data: dict) -> None:
        if type_ == "team":
            state.teams[data["team_id"]] = TeamRecord(**data)
        elif type_ == "phase":
            state.phases[data["phase"]] = PhaseConfig.from_dict(data["phase"], data)
        elif type_ == "keys":
            state.keys_meta[data["phase"]] = data
        elif type_ == "submission":
            state.submissions.append(SubmissionRecord.from_dict(data))
        else:
            raise RuntimeError(f"unknown log record type {type_!r}")

    def close(self) -> None:
        with self._lock:
            self._log.close()

    # -- auth ----------------------------------------------------------------

    def _check_admin(self, token) -> None:
        if self.admin_hash is None or token is None or not secrets.compare_digest(
                _sha256(token), self.admin_hash):
            raise AuthError("admin credential required")

    def team_for(self, credential) -> TeamRecord:
        if credential:
            digest = _sha256(credential)
            for team in list(self._state.teams.values()):
                if secrets.compare_digest(team.credential_hash, digest):
                    return team
        raise AuthError("unknown team credential")

    # -- admin operations ------------------------------------------------------

    def register_team(self, team_id: str, display_name: str, admin_token, token: str | None = None) -> str:
        self._check_admin(admin_token)
        if not team_id or any(ch.isspace() for ch in team_id):
            raise ValueError("team_id must be a non-empty token")
        token = token or secrets.token_urlsafe(24)
        with self._lock:
            if team_id in self._state.teams:
                raise ValueError(f"team {team_id!r} already exists")
            self._append("team", {"team_id": team_id, "display_name": display_name,
                                  "credential_hash": _sha256(token)})
        return token

    def set_phase_config(self, cfg: PhaseConfig, admin_token, _trusted: bool = False) -> None:
        if not _trusted:
            self._check_admin(admin_token)
        with self._lock:
            self._append("phase", cfg.to_dict())

    def _keys_dir(self, phase: str) -> Path:
        return self.data_dir / "keys" / phase

    def _load_keys_files(self, phase: str, meta: dict):
        layout = BundleLayout(tuple(meta["languages"]))
        path = self._keys_dir(phase) / f"{meta['digest']}.json"
        raw = path.read_text(encoding="utf-8")
        if _sha256(raw) != meta["digest"]:
            raise RuntimeError(f"stored keys for {phase} do not match the logged digest")
        return layout, ScoringKeys.from_texts(json.loads(raw), layout)

    def load_keys(self, phase: str, keys: ScoringKeys, layout: BundleLayout, admin_token) -> str:
        self._check_admin(admin_token)
        phase = check_phase(phase)
        raw = _canonical(keys.to_texts())
        digest = _sha256(raw)
        directory = self._keys_dir(phase)
        directory.mkdir(parents=True, exist_ok=True)
        tmp = directory / f"{digest}.json.tmp"
        tmp.write_text(raw, encoding="utf-8")
        os.replace(tmp, directory / f"{digest}.json")
        with self._lock:
            self._append("keys", {"phase": phase, "languages": list(layout.languages), "digest": digest})
            self._keys[phase] = (layout, keys)
        return digest

    # -- submissions -----------------------------------------------------------

    def active_phase(self, now: datetime) -> PhaseConfig | None:
        for name in PHASES:
            cfg = self._state.phases.get(name)
            if cfg is not None and cfg.contains(now):
                return cfg
        return None

    def _counted(self, team_id: str, phase: str):
        return [s for s in self._state.submissions
                if s.team_id == team_id and s.phase == phase and s.counted]

    def submit(self, credential, archive: bytes, now: datetime | None = None) -> SubmissionRecord:
        team = self.team_for(credential)
        digest = _sha256(archive)
        with self._lock:
            now = parse_time(now) if now is not None else self.clock()
            seq = self._state.seq + 1
            sub_id = f"sub-{seq:06d}-{digest[:8]}"
            base = {"submission_id": sub_id, "team_id": team.team_id,
                    "received_at": format_time(now), "archive_digest": digest}
            phase = self.active_phase(now)
            if phase is None:
                record = SubmissionRecord(**base, phase=None, status="rejected", counted=False,
                                          reason="outside_window")
            else:
                record = self._admit(base, phase, team.team_id, now, archive)
            self._append("submission", record.to_dict())
            return record

    def _admit(self, base, phase: PhaseConfig, team_id, now, archive) -> SubmissionRecord:
        counted = self._counted(team_id, phase.phase)
        reject = None
        if len(counted) >= phase.max_total:
            reject = "total_limit"
        elif phase.max_per_day is not None:
            today = now.date()
            n_today = sum(1 for s in counted if parse_time(s.received_at).date() == today)
            if n_today >= phase.max_per_day:
                reject = "daily_limit"
        if reject is None and phase.phase not in self._keys:
            reject = "keys_not_loaded"
        if reject is not None:
            return SubmissionRecord(**base, phase=phase.phase, status="rejected", counted=False,
                                    reason=reject)
        layout, keys = self._keys[phase.phase]
        try:
            report = score_archive(archive, layout, keys)
        except FameError as exc:
            # invalid bundles do not use up quota
            return SubmissionRecord(**base, phase=phase.phase, status="rejected", counted=False,
                                    reason=f"invalid: {exc}")
        return SubmissionRecord(**base, phase=phase.phase, status="scored", counted=True,
                                report=report.to_dict())

    def get_submission(self, submission_id: str, credential=None, admin_token=None) -> SubmissionRecord:
        record = next((s for s in self._state.submissions if s.submission_id == submission_id), None)
        if admin_token is not None:
            self._check_admin(admin_token)
        else:
            team = self.team_for(credential)
            if record is not None and record.team_id != team.team_id:
                record = None
        if record is None:
            raise KeyError(submission_id)
        return record

    # -- reads -----------------------------------------------------------------

    def quotas(self) -> dict:
        submissions = list(self._state.submissions)
        out: dict = {}
        for s in submissions:
            if not s.counted:
                continue
            team = out.setdefault(s.team_id, {})
            entry = team.setdefault(s.phase, {"total": 0, "per_day": {}})
            entry["total"] += 1
            day = s.received_at[:10]
            entry["per_day"][day] = entry["per_day"].get(day, 0) + 1
        return out

    def leaderboard(self, phase: str, now: datetime | None = None) -> dict:
        phase = check_phase(phase)
        now = parse_time(now) if now is not None else self.clock()
        cfg = self._state.phases.get(phase)
        if cfg is not None and cfg.hide_until_end and now <= cfg.end:
            return {"phase": phase, "hidden": True, "entries": []}
        best: dict = {}
        counts: dict = {}
        for s in list(self._state.submissions):
            if s.phase != phase or not s.counted or s.report is None:
                continue
            counts[s.team_id] = counts.get(s.team_id, 0) + 1
            key = (s.report["overall_full"], parse_time(s.received_at), s.submission_id)
            if s.team_id not in best or key < best[s.team_id][0]:
                best[s.team_id] = (key, s)
        ranked = sorted(best.items(), key=lambda kv: kv[1][0])
        entries = []
        for rank, (team_id, (_, s)) in enumerate(ranked, start=1):
            entries.append({"rank": rank, "team_id": team_id,
                            "display_name": self._state.teams[team_id].display_name,
                            "best_overall": s.report["overall"],
                            "best_overall_display": s.report["overall_display"],
                            "best_submission_id": s.submission_id,
                            "best_submitted_at": s.received_at,
                            "n_submissions": counts[team_id]})
        return {"phase": phase, "hidden": False, "entries": entries}

    def export_audit(self, admin_token) -> dict:
        self._check_admin(admin_token)
        with self._lock:
            records = self._read_log()
            state = self._state
            return {
                "head": state.head,
                "n_records": state.seq,
                "submissions": [s.to_dict() for s in state.submissions],
                "log": records,
                "quotas": self.quotas(),
                "leaderboards": {p: self.leaderboard(p, now=datetime.max.replace(tzinfo=timezone.utc))
                                 for p in PHASES},
            }

    def phase_configs(self) -> dict:
        return {k: v.to_dict() for k, v in self._state.phases.items()}

    def keys_summary(self) -> dict:
        return {phase: {"languages": list(layout.languages),
                        "configurations": [config_name(l, c) for l, c in layout.configurations]}
                for phase, (layout, _) in self._keys.items()}
