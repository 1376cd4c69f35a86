import json

import pytest
import requests

from authprobe.api_model import load_specification
from authprobe.errors import BindError
from authprobe.lab import BAD_TOKEN, OPERATIONS, TOO_MANY, TRY_LATER, WRONG_CREDENTIALS, \
    LabConfig, main as lab_main, start_lab
from authprobe.token_mutator import mutate

import random


def bad_login(lab, n):
    with requests.Session() as s:
        return [s.post(lab.base_url + "/login", json={"username": f"u{i}", "password": "x"})
                for i in range(n)]


def test_no_lockout_identical_401s(lab):
    responses = bad_login(lab, 100)
    assert {r.status_code for r in responses} == {401}
    assert {r.content for r in responses} == {json.dumps({"error": WRONG_CREDENTIALS}).encode()}


def test_rate_limit_after_threshold():
    with start_lab(LabConfig(lockout_mode="rate_limit_429")) as lab:
        codes = [r.status_code for r in bad_login(lab, 7)]
        assert codes == [401] * 5 + [429, 429]
        assert bad_login(lab, 1)[0].json() == {"error": TOO_MANY}


def test_message_rotation_after_threshold():
    with start_lab(LabConfig(lockout_mode="message_rotation", lockout_threshold=3)) as lab:
        bodies = [r.json()["error"] for r in bad_login(lab, 5)]
        assert bodies == [WRONG_CREDENTIALS] * 3 + [TRY_LATER] * 2


def test_valid_login_returns_token(lab):
    r = requests.post(lab.base_url + "/login",
                      json={"username": "alice", "password": "correct-horse-battery"})
    assert r.status_code == 200 and r.json() == {"token": lab.config.valid_token}


def test_token_policies(lab):
    token = lab.config.valid_token
    bad = mutate(token, "alter_char", random.Random(0)).mutated_token
    url = lab.base_url
    assert requests.get(url + "/items/1", headers={"Authorization": "Bearer " + bad}
                        ).status_code == 401
    assert requests.get(url + "/items/1", headers={"Authorization": "Bearer " + bad}
                        ).json() == {"error": BAD_TOKEN}
    assert requests.get(url + "/profile", headers={"Authorization": "Bearer " + bad}
                        ).status_code == 200
    assert requests.get(url + "/profile").status_code == 401
    assert requests.get(url + "/health").status_code == 200
    created = requests.post(url + "/items", json={"name": "n", "price": 1.5},
                            headers={"Authorization": "Bearer " + token})
    assert created.status_code == 201
    item = created.json()
    assert requests.get(f"{url}/items/{item['id']}",
                        headers={"Authorization": "Bearer " + token}).json() == item


def test_reset_endpoint_clears_lockout():
    with start_lab(LabConfig(lockout_mode="rate_limit_429", lockout_threshold=3)) as lab:
        assert bad_login(lab, 4)[-1].status_code == 429
        assert requests.post(lab.base_url + "/_lab/reset").status_code == 204
        assert bad_login(lab, 1)[0].status_code == 401


def test_reset_hidden_from_document(lab):
    assert "/_lab/reset" not in lab.document["paths"]


def test_bind_error(lab):
    with pytest.raises(BindError):
        start_lab(LabConfig(listen_port=lab.port))


def test_document_round_trips(lab):
    spec = load_specification(lab.spec_path)
    assert {op.operation_id for op in spec.operations} == set(OPERATIONS)
    assert spec.base_url == lab.base_url


def test_public_operations_declared_public(lab):
    spec = load_specification(lab.spec_path)
    declared = {op.operation_id for op in spec.operations if not op.requires_auth_declared}
    assert declared == lab.config.operations_with("public")


def test_request_id_suffix():
    with start_lab(LabConfig(append_request_id=True)) as lab:
        msg = bad_login(lab, 1)[0].json()["error"]
        prefix, digits = msg.rsplit(" ", 1)
        assert prefix == WRONG_CREDENTIALS + " request id"
        assert len(digits) == 6 and digits.isdigit()


def test_config_validation(tmp_path):
    with pytest.raises(ValueError):
        LabConfig(lockout_mode="captcha")
    with pytest.raises(ValueError):
        LabConfig(token_policy={"GET /nowhere": "lax"})
    path = tmp_path / "lab.json"
    path.write_text(json.dumps({"lockout_mode": "rate_limit_429", "lockout_threshold": 3}))
    cfg = LabConfig.from_file(path)
    assert cfg.lockout_threshold == 3 and cfg.token_policy["GET /profile"] == "lax"


def test_lab_cli_reports_bind_failure(lab, capsys, tmp_path):
    assert lab_main(["--port", str(lab.port), "--spec-out", str(tmp_path / "x.json")]) == 1
    assert "cannot listen" in capsys.readouterr().out
