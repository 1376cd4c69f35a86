"""Machine-readable security report."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path

import jsonschema

from . import __version__

TIMESTAMP_FIELDS = ("started_at", "ended_at")


def utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="milliseconds")


@dataclass
class SecurityReport:
    target_base_url: str
    spec_path: str
    seed: int
    started_at: str = ""
    ended_at: str = ""
    tool_version: str = __version__
    strategies_run: list = field(default_factory=list)
    settings: dict = field(default_factory=dict)
    findings: list = field(default_factory=list)  # SecurityFinding objects
    verdicts: dict = field(default_factory=dict)
    trace_files: dict = field(default_factory=dict)  # trace label -> file name
    skipped: list = field(default_factory=list)

    def to_dict(self) -> dict:
        findings = []
        for f in self.findings:
            entry = f.to_dict()
            entry["trace_file"] = self.trace_files.get(f.trace)
            findings.append(entry)
        return {
            "tool_version": self.tool_version,
            "target_base_url": self.target_base_url,
            "spec_path": self.spec_path,
            "seed": self.seed,
            "started_at": self.started_at,
            "ended_at": self.ended_at,
            "strategies_run": list(self.strategies_run),
            "settings": self.settings,
            "findings": findings,
            "verdicts": self.verdicts,
            "trace_files": sorted(self.trace_files.values()),
            "skipped": list(self.skipped),
        }


def report_schema() -> dict:
    text = resources.files("authprobe").joinpath("schemas/report.schema.json").read_text(
        encoding="utf-8")
    return json.loads(text)


def validate_report(data: dict) -> None:
    """Raise ``jsonschema.ValidationError`` when ``data`` breaks the report schema."""
    jsonschema.validate(data, report_schema())


def write_report(report: SecurityReport, path) -> dict:
    data = report.to_dict()
    validate_report(data)
    Path(path).write_text(json.dumps(data, indent=2, ensure_ascii=False) + "\n",
                          encoding="utf-8")
    return data


def strip_timestamps(data: dict) -> dict:
    return {k: v for k, v in data.items() if k not in TIMESTAMP_FIELDS}
