import json

import pytest
import yaml

from authprobe.api_model import ApiOperation, ApiParameter, flatten_body_parameters, \
    load_specification, response_leaf_names
from authprobe.errors import MissingServerError, ParseError, UnsupportedSpecError
from authprobe.lab import LabConfig, openapi_document

from .conftest import minimal_doc

LOGIN_BODY = {
    "required": True,
    "content": {"application/json": {"schema": {
        "type": "object",
        "properties": {"username": {"type": "string"}, "password": {"type": "string"}},
    }}},
}


def test_minimal_login_spec(write_spec):
    spec = load_specification(write_spec(minimal_doc({"/login": {"post": {
        "requestBody": LOGIN_BODY, "responses": {"200": {"description": "ok"}}}}})))
    assert len(spec.operations) == 1
    op = spec.operations[0]
    assert op.method == "POST"
    assert op.operation_id == "POST /login"
    assert spec.base_url == "http://api.test"


def test_undeclared_path_placeholder_is_parse_error(write_spec):
    doc = minimal_doc({"/users/{id}": {"get": {"responses": {"200": {"description": "ok"}}}}})
    with pytest.raises(ParseError):
        load_specification(write_spec(doc))


def test_lab_document_has_nine_unique_operations(write_spec):
    doc = openapi_document(LabConfig(), "http://127.0.0.1:9")
    expected = sum(1 for item in doc["paths"].values() for _ in item)
    spec = load_specification(write_spec(doc))
    assert expected == 9
    assert len(spec.operations) == 9
    assert len({op.operation_id for op in spec.operations}) == 9


def test_yaml_and_refs(write_spec):
    doc = minimal_doc(
        {"/items/{itemId}/": {"get": {
            "operationId": "getItem",
            "parameters": [{"$ref": "#/components/parameters/ItemId"}],
            "security": [{"bearer": []}],
            "responses": {"200": {"description": "ok", "content": {"application/json": {
                "schema": {"$ref": "#/components/schemas/Item"}}}}},
        }}},
        components={
            "parameters": {"ItemId": {"name": "itemId", "in": "path", "required": True,
                                      "schema": {"type": "integer"}}},
            "schemas": {"Item": {"type": "object", "properties": {
                "itemId": {"type": "integer"}, "owner": {"$ref": "#/components/schemas/User"}}},
                "User": {"type": "object", "properties": {"email": {"type": "string"}}}},
            "securitySchemes": {"bearer": {"type": "http", "scheme": "bearer"}},
        },
    )
    path = write_spec({}, "unused.json").with_name("spec.yaml")
    path.write_text(yaml.safe_dump(doc), encoding="utf-8")
    spec = load_specification(path)
    op = spec.operations[0]
    assert op.path == "/items/{itemId}"  # trailing slash normalized
    assert op.operation_id == "getItem"
    assert op.parameters[0].value_type == "integer"
    assert op.requires_auth_declared
    assert response_leaf_names(op) == {"itemId", "email"}
    assert spec.default_scheme().kind == "http-bearer"


def test_swagger2_rejected(write_spec):
    with pytest.raises(UnsupportedSpecError):
        load_specification(write_spec({"swagger": "2.0", "paths": {}}))


def test_missing_paths_rejected(write_spec):
    with pytest.raises(UnsupportedSpecError):
        load_specification(write_spec({"openapi": "3.0.0", "info": {}}))


def test_malformed_document(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json", encoding="utf-8")
    with pytest.raises(ParseError):
        load_specification(path)


def test_missing_server_needs_override(write_spec):
    doc = minimal_doc({"/health": {"get": {"responses": {}}}})
    del doc["servers"]
    path = write_spec(doc)
    with pytest.raises(MissingServerError):
        load_specification(path)
    assert load_specification(path, "http://localhost:1/").base_url == "http://localhost:1"


def test_first_server_wins(write_spec):
    doc = minimal_doc({"/h": {"get": {"responses": {}}}},
                      servers=[{"url": "https://a.test/v1"}, {"url": "https://b.test"}])
    assert load_specification(write_spec(doc)).base_url == "https://a.test/v1"


def test_remote_ref_rejected(write_spec):
    doc = minimal_doc({"/h": {"get": {"parameters": [{"$ref": "http://x/p.json"}],
                                      "responses": {}}}})
    with pytest.raises(ParseError):
        load_specification(write_spec(doc))


def test_public_operation_not_auth_declared(write_spec):
    doc = minimal_doc({"/h": {"get": {"security": [], "responses": {}}}},
                      security=[{"k": []}])
    doc["paths"]["/p"] = {"get": {"responses": {}}}
    spec = load_specification(write_spec(doc))
    assert not spec.operation("GET /h").requires_auth_declared
    assert spec.operation("GET /p").requires_auth_declared


def test_round_trip_operation_count(write_spec):
    doc = minimal_doc({
        "/a": {"get": {"responses": {}}, "post": {"responses": {}}, "summary": "x",
               "parameters": []},
        "/b/{x}": {"parameters": [{"name": "x", "in": "path", "required": True}],
                   "delete": {"responses": {}}, "patch": {"responses": {}}},
    })
    spec = load_specification(write_spec(doc))
    assert sorted(op.key for op in spec.operations) == [
        ("DELETE", "/b/{x}"), ("GET", "/a"), ("PATCH", "/b/{x}"), ("POST", "/a")]


# --- flatten_body_parameters ---------------------------------------------


def _op_with_body(schema, params=()):
    return ApiOperation("op", "POST", "/x", tuple(params), request_body_schema=schema)


def test_flatten_simple_body():
    op = _op_with_body({"type": "object", "properties": {
        "username": {"type": "string"}, "password": {"type": "string"}}})
    flat = flatten_body_parameters(op)
    assert [(p.name, p.location) for p in flat] == [
        ("username", "body-field"), ("password", "body-field")]


def test_flatten_nested_body_uses_dotted_names():
    op = _op_with_body({"type": "object", "properties": {
        "credentials": {"type": "object", "properties": {"user": {"type": "string"}}}}})
    assert [p.name for p in flatten_body_parameters(op)] == ["credentials.user"]


def test_flatten_without_body_is_identity():
    q = ApiParameter("page", "query", "integer")
    op = ApiOperation("op", "GET", "/x", (q,))
    assert flatten_body_parameters(op) == [q]


def test_flatten_never_yields_objects_and_keeps_arrays():
    op = _op_with_body({"type": "object", "properties": {
        "tags": {"type": "array", "items": {"type": "string"}},
        "meta": {"type": "object", "properties": {
            "deep": {"type": "object", "properties": {"leaf": {"type": "boolean"}}}}},
        "free": {"type": "object"},
    }})
    flat = flatten_body_parameters(op)
    assert {p.name: p.value_type for p in flat} == {"tags": "array", "meta.deep.leaf": "boolean"}
    assert flat[0].item_type == "string"


def test_enum_must_conform():
    with pytest.raises(ParseError):
        ApiParameter("n", "query", "integer", enum_values=("a",))


def test_empty_name_rejected():
    with pytest.raises(ParseError):
        ApiParameter("", "query")
