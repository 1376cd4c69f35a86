import json

import pytest

from authprobe.lab import LabConfig, start_lab

ACCEPTANCE_LINES = []


@pytest.fixture
def lab():
    with start_lab(LabConfig()) as handle:
        yield handle


@pytest.fixture
def write_spec(tmp_path):
    """Write an OpenAPI document (dict) to a temp file and return its path."""

    def _write(doc, name="openapi.json"):
        path = tmp_path / name
        path.write_text(json.dumps(doc), encoding="utf-8")
        return path

    return _write


def minimal_doc(paths, **extra):
    doc = {"openapi": "3.0.3", "info": {"title": "t", "version": "1"},
           "servers": [{"url": "http://api.test"}], "paths": paths}
    doc.update(extra)
    return doc


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
