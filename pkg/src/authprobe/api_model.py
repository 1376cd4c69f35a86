"""Normalized in-memory model of an OpenAPI 3.x document."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional
from urllib.parse import urlparse

import yaml

from .errors import MissingServerError, ParseError, UnsupportedSpecError

HTTP_METHODS = ("GET", "POST", "PUT", "PATCH", "DELETE", "HEAD", "OPTIONS")
VALUE_TYPES = ("string", "number", "integer", "boolean", "array", "object")
LOCATIONS = ("path", "query", "header", "cookie", "body-field")

_PLACEHOLDER = re.compile(r"\{([^}]+)\}")


@dataclass(frozen=True)
class ApiParameter:
    name: str
    location: str
    value_type: str = "string"
    required: bool = False
    example_values: tuple = ()
    enum_values: tuple = ()
    default_value: Any = None
    format: Optional[str] = None
    item_type: Optional[str] = None

    def __post_init__(self):
        if not self.name:
            raise ParseError("parameter name must be non-empty")
        if self.location not in LOCATIONS:
            raise ParseError(f"unknown parameter location {self.location!r}")
        for value in self.enum_values:
            if not conforms(value, self.value_type):
                raise ParseError(
                    f"enum value {value!r} of {self.name!r} is not a {self.value_type}"
                )

    @property
    def leaf_name(self) -> str:
        return self.name.rsplit(".", 1)[-1]


@dataclass(frozen=True)
class SecurityScheme:
    name: str
    kind: str
    carrier: str = "header"
    carrier_name: str = "Authorization"

    def __post_init__(self):
        if not self.carrier_name:
            raise ParseError(f"security scheme {self.name!r} has no carrier name")


@dataclass(frozen=True)
class ApiOperation:
    operation_id: str
    method: str
    path: str
    parameters: tuple = ()
    request_body_schema: Optional[dict] = field(default=None, compare=False)
    response_schemas: dict = field(default_factory=dict, compare=False)
    requires_auth_declared: bool = False

    def __post_init__(self):
        if self.method not in HTTP_METHODS:
            raise ParseError(f"unsupported HTTP method {self.method!r}")
        if not self.operation_id:
            raise ParseError("operation_id must be non-empty")
        declared = {p.name for p in self.parameters if p.location == "path"}
        for placeholder in _PLACEHOLDER.findall(self.path):
            if placeholder not in declared:
                raise ParseError(
                    f"{self.method} {self.path}: placeholder {{{placeholder}}} "
                    "has no path parameter"
                )

    @property
    def key(self) -> tuple[str, str]:
        return (self.method, self.path)


@dataclass(frozen=True)
class ApiSpecification:
    base_url: str
    operations: tuple = ()
    security_schemes: tuple = ()
    source_path: Optional[Path] = None

    def __post_init__(self):
        parsed = urlparse(self.base_url)
        if parsed.scheme not in ("http", "https") or not parsed.netloc:
            raise ParseError(f"base URL must be absolute http(s): {self.base_url!r}")
        seen_keys, seen_ids = set(), set()
        for op in self.operations:
            if op.key in seen_keys:
                raise ParseError(f"duplicate operation {op.method} {op.path}")
            if op.operation_id in seen_ids:
                raise ParseError(f"duplicate operation_id {op.operation_id!r}")
            seen_keys.add(op.key)
            seen_ids.add(op.operation_id)

    def operation(self, operation_id: str) -> ApiOperation:
        for op in self.operations:
            if op.operation_id == operation_id:
                return op
        raise KeyError(operation_id)

    def default_scheme(self) -> SecurityScheme:
        """Scheme used to carry a user-supplied token (bearer when none is declared)."""
        for scheme in self.security_schemes:
            if scheme.kind in ("http-bearer", "api-key", "oauth2"):
                return scheme
        return SecurityScheme(name="bearer", kind="http-bearer")


def conforms(value: Any, value_type: str) -> bool:
    if value_type == "string":
        return isinstance(value, str)
    if value_type == "integer":
        return isinstance(value, int) and not isinstance(value, bool)
    if value_type == "number":
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if value_type == "boolean":
        return isinstance(value, bool)
    if value_type == "array":
        return isinstance(value, list)
    if value_type == "object":
        return isinstance(value, dict)
    return False


# --- document loading -----------------------------------------------------


def _read_document(path: Path) -> dict:
    try:
        text = path.read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"{path}: not UTF-8") from exc
    try:
        if path.suffix.lower() == ".json":
            doc = json.loads(text)
        else:
            # YAML is a superset of JSON, so unknown suffixes go through it.
            doc = yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ParseError(f"{path}: top level must be a mapping")
    return doc


def _resolve_refs(node: Any, root: dict, stack: tuple = ()) -> Any:
    if isinstance(node, dict):
        ref = node.get("$ref")
        if isinstance(ref, str):
            if not ref.startswith("#/"):
                raise ParseError(f"only local references are supported: {ref!r}")
            if ref in stack:
                # Recursive schema: cut the cycle with an opaque object.
                return {"type": "object"}
            target: Any = root
            for part in ref[2:].split("/"):
                part = part.replace("~1", "/").replace("~0", "~")
                if not isinstance(target, dict) or part not in target:
                    raise ParseError(f"unresolvable reference {ref!r}")
                target = target[part]
            return _resolve_refs(target, root, stack + (ref,))
        return {k: _resolve_refs(v, root, stack) for k, v in node.items()}
    if isinstance(node, list):
        return [_resolve_refs(v, root, stack) for v in node]
    return node


def schema_type(schema: Optional[dict]) -> str:
    if not schema:
        return "string"
    declared = schema.get("type")
    if isinstance(declared, list):
        declared = next((t for t in declared if t != "null"), None)
    if declared in VALUE_TYPES:
        return declared
    if "properties" in schema:
        return "object"
    if "items" in schema:
        return "array"
    for combinator in ("allOf", "oneOf", "anyOf"):
        if schema.get(combinator):
            return schema_type(schema[combinator][0])
    return "string"


def _examples(spec_param: dict, schema: dict) -> tuple:
    values = []
    if "example" in spec_param:
        values.append(spec_param["example"])
    for ex in (spec_param.get("examples") or {}).values():
        if isinstance(ex, dict) and "value" in ex:
            values.append(ex["value"])
    if "example" in schema:
        values.append(schema["example"])
    if isinstance(schema.get("examples"), list):
        values.extend(schema["examples"])
    return tuple(values)


def _make_parameter(name: str, location: str, schema: dict, required: bool,
                    raw: Optional[dict] = None) -> ApiParameter:
    schema = schema or {}
    value_type = schema_type(schema)
    items = schema.get("items") if value_type == "array" else None
    enum = tuple(v for v in schema.get("enum") or () if v is not None)
    return ApiParameter(
        name=name,
        location=location,
        value_type=value_type,
        required=required,
        example_values=_examples(raw or {}, schema),
        enum_values=enum,
        default_value=schema.get("default"),
        format=schema.get("format"),
        item_type=schema_type(items) if isinstance(items, dict) else None,
    )


def _json_schema_of(content: Optional[dict]) -> Optional[dict]:
    if not content:
        return None
    for media_type, body in content.items():
        if "json" in media_type and isinstance(body, dict):
            return body.get("schema")
    first = next(iter(content.values()))
    return first.get("schema") if isinstance(first, dict) else None


def _normalize_path(path: str) -> str:
    if len(path) > 1 and path.endswith("/"):
        return path.rstrip("/") or "/"
    return path


def _security_schemes(doc: dict) -> tuple:
    schemes = []
    raw = (doc.get("components") or {}).get("securitySchemes") or {}
    for name, s in raw.items():
        kind, carrier, carrier_name = "other", "header", "Authorization"
        s_type = str(s.get("type", "")).lower()
        if s_type == "http":
            kind = {"bearer": "http-bearer", "basic": "http-basic"}.get(
                str(s.get("scheme", "")).lower(), "other"
            )
        elif s_type == "apikey":
            kind = "api-key"
            carrier = s.get("in", "header")
            carrier_name = s.get("name") or "X-API-Key"
        elif s_type in ("oauth2", "openidconnect"):
            kind = "oauth2"
        schemes.append(SecurityScheme(name, kind, carrier, carrier_name))
    return tuple(schemes)


def _base_url(doc: dict, override: Optional[str]) -> str:
    if override:
        return override.rstrip("/")
    servers = doc.get("servers") or []
    if not servers:
        raise MissingServerError("document lists no servers and no base URL override was given")
    url = servers[0].get("url", "")
    for var, spec in (servers[0].get("variables") or {}).items():
        url = url.replace("{" + var + "}", str(spec.get("default", "")))
    if not urlparse(url).scheme:
        raise MissingServerError(f"server URL {url!r} is relative; pass a base URL override")
    return url.rstrip("/")


def load_specification(path, base_url_override: Optional[str] = None) -> ApiSpecification:
    """Parse an OpenAPI 3.x JSON/YAML document into an :class:`ApiSpecification`."""
    path = Path(path)
    doc = _read_document(path)
    if "swagger" in doc:
        raise UnsupportedSpecError("Swagger 2.0 documents are not supported")
    version = str(doc.get("openapi", ""))
    if not version.startswith("3."):
        raise UnsupportedSpecError(f"not an OpenAPI 3.x document (openapi={version!r})")
    if not isinstance(doc.get("paths"), dict):
        raise UnsupportedSpecError("document has no paths section")

    doc = _resolve_refs(doc, doc)
    global_security = doc.get("security")
    operations = []
    for raw_path, item in doc["paths"].items():
        if not isinstance(item, dict):
            raise ParseError(f"path item {raw_path!r} must be a mapping")
        path_params = item.get("parameters") or []
        for method_lc, spec_op in item.items():
            method = method_lc.upper()
            if method not in HTTP_METHODS:
                continue
            merged: dict[tuple, dict] = {}
            for p in list(path_params) + list(spec_op.get("parameters") or []):
                merged[(p.get("name"), p.get("in"))] = p
            params = [
                _make_parameter(
                    p.get("name", ""), p.get("in", "query"), p.get("schema") or {},
                    bool(p.get("required")) or p.get("in") == "path", raw=p,
                )
                for p in merged.values()
            ]
            body = spec_op.get("requestBody") or {}
            responses = {
                str(code): _json_schema_of(resp.get("content")) or {}
                for code, resp in (spec_op.get("responses") or {}).items()
                if isinstance(resp, dict)
            }
            norm_path = _normalize_path(raw_path)
            security = spec_op.get("security", global_security)
            operations.append(ApiOperation(
                operation_id=spec_op.get("operationId") or f"{method} {norm_path}",
                method=method,
                path=norm_path,
                parameters=tuple(params),
                request_body_schema=_json_schema_of(body.get("content")),
                response_schemas=responses,
                requires_auth_declared=bool(security) and not any(r == {} for r in security),
            ))
    return ApiSpecification(
        base_url=_base_url(doc, base_url_override),
        operations=tuple(operations),
        security_schemes=_security_schemes(doc),
        source_path=path,
    )


def _flatten_schema(schema: dict, prefix: str, required: bool, out: list) -> None:
    props = schema.get("properties") or {}
    needed = set(schema.get("required") or ())
    for name, sub in props.items():
        sub = sub or {}
        dotted = f"{prefix}.{name}" if prefix else name
        if schema_type(sub) == "object" and sub.get("properties"):
            _flatten_schema(sub, dotted, required and name in needed, out)
        elif schema_type(sub) == "object":
            # Free-form object without declared leaves: nothing to address.
            continue
        else:
            out.append(_make_parameter(dotted, "body-field", sub, required and name in needed))


def flatten_body_parameters(op: ApiOperation) -> list[ApiParameter]:
    """Return the operation's parameters plus one body-field parameter per body leaf."""
    params = list(op.parameters)
    schema = op.request_body_schema
    if schema and schema_type(schema) == "object":
        _flatten_schema(schema, "", True, params)
    return params


def response_leaf_names(op: ApiOperation) -> set[str]:
    """Leaf field names appearing in the operation's 2xx response schemas."""
    names: set[str] = set()

    def walk(schema: Any) -> None:
        if not isinstance(schema, dict):
            return
        kind = schema_type(schema)
        if kind == "object":
            for name, sub in (schema.get("properties") or {}).items():
                if schema_type(sub) in ("object", "array"):
                    walk(sub)
                else:
                    names.add(name)
        elif kind == "array":
            walk(schema.get("items"))

    for code, schema in op.response_schemas.items():
        if code.startswith("2") or code.upper() == "2XX":
            walk(schema)
    return names
