"""Input values for non-credential parameters.

Values are drawn, in priority order, from documented examples, enum values,
the schema default, the dictionary of values observed in earlier
interactions, and finally a typed random fallback.
"""

from __future__ import annotations

import json
import random
import string
import time
from dataclasses import dataclass, field
from typing import Any
from urllib.parse import parse_qsl, urlsplit

from .api_model import ApiParameter, conforms
from .auth_locator import normalize_name

LOWER_ALNUM = string.ascii_lowercase + string.digits


@dataclass(frozen=True)
class Observation:
    value: Any
    source: str  # "request" or "response"
    timestamp: float


@dataclass
class ObservedDictionary:
    entries: dict = field(default_factory=dict)

    def add(self, name: str, value: Any, source: str) -> None:
        key = normalize_name(name)
        if not key:
            return
        self.entries.setdefault(key, []).append(Observation(value, source, time.monotonic()))

    def latest(self, name: str):
        values = self.entries.get(normalize_name(name))
        return values[-1] if values else None


def random_string(rng: random.Random, low: int = 8, high: int = 16) -> str:
    return "".join(rng.choice(LOWER_ALNUM) for _ in range(rng.randint(low, high)))


def random_email(rng: random.Random, local_length: int | None = None) -> str:
    local = (
        "".join(rng.choice(LOWER_ALNUM) for _ in range(local_length))
        if local_length else random_string(rng)
    )
    return f"{local}@{random_string(rng, 5, 8)}.com"


def random_value(value_type: str, rng: random.Random, fmt: str | None = None,
                 item_type: str | None = None) -> Any:
    if value_type == "integer":
        return rng.randint(0, 100)
    if value_type == "number":
        return rng.random()
    if value_type == "boolean":
        return rng.random() < 0.5
    if value_type == "array":
        return [random_value(item_type or "string", rng)]
    if value_type == "object":
        return {}
    if fmt == "email":
        return random_email(rng)
    return random_string(rng)


def _coerce(value: Any, param: ApiParameter) -> Any:
    """Best-effort conversion of an observed value to the parameter's type."""
    if conforms(value, param.value_type):
        return value
    try:
        if param.value_type == "string" and isinstance(value, (int, float)) \
                and not isinstance(value, bool):
            return str(value)
        if param.value_type == "integer" and isinstance(value, str):
            return int(value)
        if param.value_type == "number" and isinstance(value, str):
            return float(value)
    except ValueError:
        pass
    return None


def provide_value(param: ApiParameter, dictionary: ObservedDictionary,
                  rng: random.Random) -> Any:
    for source in (param.example_values, param.enum_values):
        usable = [v for v in source if conforms(v, param.value_type)]
        if usable:
            return rng.choice(usable)
    if param.default_value is not None and conforms(param.default_value, param.value_type):
        return param.default_value
    observed = dictionary.latest(param.leaf_name)
    if observed is not None:
        value = _coerce(observed.value, param)
        if value is not None:
            return value
    return random_value(param.value_type, rng, param.format, param.item_type)


def _leaves(node: Any, name: str | None = None):
    if isinstance(node, dict):
        for key, value in node.items():
            yield from _leaves(value, key)
    elif isinstance(node, list):
        for item in node:
            yield from _leaves(item, name)
    elif name is not None:
        yield name, node


def _query_value(raw: str) -> Any:
    return int(raw) if raw.isdigit() else raw


def _json_body(body: bytes):
    if not body:
        return None
    try:
        return json.loads(body)
    except (ValueError, UnicodeDecodeError):
        return None


def record_interaction(dictionary: ObservedDictionary, interaction) -> ObservedDictionary:
    """Append request leaves and, for 2xx responses, response leaves to ``dictionary``."""
    request = interaction.request
    for name, raw in parse_qsl(urlsplit(request.url).query):
        dictionary.add(name, _query_value(raw), "request")
    for name, value in _leaves(_json_body(request.body)):
        dictionary.add(name, value, "request")
    response = interaction.response
    if response is not None and 200 <= response.status < 300:
        for name, value in _leaves(_json_body(response.body)):
            dictionary.add(name, value, "response")
    return dictionary
