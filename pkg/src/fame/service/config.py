from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path

PHASES = ("progress", "evaluation")
PHASE_DEFAULTS = {
    "progress": {"max_total": 100, "max_per_day": 10, "hide_until_end": False},
    "evaluation": {"max_total": 5, "max_per_day": None, "hide_until_end": True},
}


def parse_time(value) -> datetime:
    if isinstance(value, datetime):
        dt = value
    else:
        text = str(value).strip()
        if text.endswith("Z"):
            text = text[:-1] + "+00:00"
        dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


def format_time(dt: datetime) -> str:
    dt = dt.astimezone(timezone.utc)
    return dt.strftime("%Y-%m-%dT%H:%M:%S") + (f".{dt.microsecond:06d}" if dt.microsecond else "") + "Z"


def check_phase(name: str) -> str:
    name = str(name).lower()
    if name not in PHASES:
        raise ValueError(f"phase must be one of {PHASES}, got {name!r}")
    return name


@dataclass(frozen=True)
class PhaseConfig:
    phase: str
    start: datetime
    end: datetime
    max_total: int
    max_per_day: int | None = None
    hide_until_end: bool = False

    def __post_init__(self):
        object.__setattr__(self, "phase", check_phase(self.phase))
        object.__setattr__(self, "start", parse_time(self.start))
        object.__setattr__(self, "end", parse_time(self.end))
        if self.end < self.start:
            raise ValueError("phase window ends before it starts")
        if self.max_total < 0 or (self.max_per_day is not None and self.max_per_day < 0):
            raise ValueError("submission limits must be non-negative")

    @classmethod
    def from_dict(cls, phase: str, data: dict) -> "PhaseConfig":
        phase = check_phase(phase)
        merged = dict(PHASE_DEFAULTS[phase])
        merged.update({k: v for k, v in data.items() if k != "phase"})
        return cls(phase=phase, **merged)

    def contains(self, now: datetime) -> bool:
        return self.start <= now <= self.end

    def to_dict(self) -> dict:
        return {"phase": self.phase, "start": format_time(self.start), "end": format_time(self.end),
                "max_total": self.max_total, "max_per_day": self.max_per_day,
                "hide_until_end": self.hide_until_end}


@dataclass(frozen=True)
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8000
    data_dir: Path = Path("fame-data")
    admin_token: str | None = None
    snapshot_every: int = 50
    phases: dict = field(default_factory=dict)


def load_config(path=None, env=None) -> ServiceConfig:
    """Read the JSON config (``"service"`` section or top level) then apply
    ``FAME_PORT``, ``FAME_DATA_DIR`` and ``FAME_ADMIN_TOKEN``."""
    env = os.environ if env is None else env
    data = {}
    if path is not None:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        data = doc.get("service", doc)
    phases = {name: PhaseConfig.from_dict(name, spec) for name, spec in data.get("phases", {}).items()}
    cfg = ServiceConfig(
        host=data.get("host", "127.0.0.1"),
        port=int(data.get("port", 8000)),
        data_dir=Path(data.get("data_dir", "fame-data")),
        admin_token=data.get("admin_token"),
        snapshot_every=int(data.get("snapshot_every", 50)),
        phases=phases,
    )
    if env.get("FAME_PORT"):
        cfg = replace(cfg, port=int(env["FAME_PORT"]))
    if env.get("FAME_DATA_DIR"):
        cfg = replace(cfg, data_dir=Path(env["FAME_DATA_DIR"]))
    if env.get("FAME_ADMIN_TOKEN"):
        cfg = replace(cfg, admin_token=env["FAME_ADMIN_TOKEN"])
    return cfg
