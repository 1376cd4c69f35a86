"""Request construction, paced dispatch, and execution traces."""

from __future__ import annotations

import base64
import json
import logging
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from http.cookiejar import DefaultCookiePolicy
from pathlib import Path
from typing import Any, Iterable, Optional
from urllib.parse import parse_qsl, quote, urlencode, urlsplit, urlunsplit

import requests

from .api_model import ApiOperation, SecurityScheme, flatten_body_parameters
from .errors import FormatError, MissingRequiredParameterError

log = logging.getLogger(__name__)

PHASES = ("nominal", "stuffing", "brute_force", "mutated_token", "no_token")
DEFAULT_TIMEOUT_MS = 5000


def now_ms() -> float:
    return time.monotonic() * 1000.0


@dataclass(frozen=True)
class HttpRequest:
    operation_id: str
    method: str
    url: str
    headers: dict = field(default_factory=dict)
    body: bytes = b""


@dataclass(frozen=True)
class HttpResponse:
    status: int
    headers: dict = field(default_factory=dict)
    body: bytes = b""

    def text(self) -> str:
        return self.body.decode("utf-8", errors="replace")


@dataclass
class HttpInteraction:
    sequence_index: int
    operation_id: str
    request: HttpRequest
    response: Optional[HttpResponse] = None
    sent_at: float = 0.0
    received_at: Optional[float] = None
    annotation: dict = field(default_factory=dict)
    transport_error: Optional[str] = None

    @property
    def status(self) -> Optional[int]:
        return self.response.status if self.response is not None else None

    @property
    def succeeded(self) -> bool:
        return self.response is not None and 200 <= self.response.status < 300


@dataclass
class ExecutionTrace:
    phase: str
    interactions: list = field(default_factory=list)
    started_at: float = 0.0
    ended_at: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.phase not in PHASES:
            raise ValueError(f"unknown phase {self.phase!r}")
        for i, interaction in enumerate(self.interactions):
            if interaction.sequence_index != i:
                raise ValueError(
                    f"sequence_index {interaction.sequence_index} at position {i}"
                )

    def __len__(self) -> int:
        return len(self.interactions)

    def operation_sequence(self) -> list[str]:
        return [i.operation_id for i in self.interactions]


@dataclass(frozen=True)
class PacingPolicy:
    total_requests: int
    window_ms: int
    mode: str = "even"

    def __post_init__(self):
        if self.total_requests <= 0 or self.window_ms <= 0:
            raise ValueError("total_requests and window_ms must be positive")
        if self.mode not in ("even", "burst"):
            raise ValueError(f"unknown pacing mode {self.mode!r}")

    @property
    def interval_ms(self) -> float:
        return self.window_ms / self.total_requests if self.mode == "even" else 0.0

    def offset_ms(self, index: int) -> float:
        return index * self.interval_ms


# --- request construction -------------------------------------------------


def _nest(flat: dict) -> dict:
    body: dict = {}
    for dotted, value in flat.items():
        parts = dotted.split(".")
        node = body
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = value
    return body


def _scalar(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (list, dict)):
        return json.dumps(value, separators=(",", ":"))
    return str(value)


def _set_cookie(headers: dict, name: str, value: str) -> None:
    cookies = [c for c in headers.get("Cookie", "").split("; ") if c and
               not c.startswith(name + "=")]
    cookies.append(f"{name}={value}")
    headers["Cookie"] = "; ".join(cookies)


def _drop_cookie(headers: dict, name: str) -> None:
    cookies = [c for c in headers.get("Cookie", "").split("; ") if c and
               not c.startswith(name + "=")]
    if cookies:
        headers["Cookie"] = "; ".join(cookies)
    else:
        headers.pop("Cookie", None)


def apply_auth(request: HttpRequest, scheme: SecurityScheme,
               token: Optional[str]) -> HttpRequest:
    """Return ``request`` with the scheme's carrier set to ``token``.

    ``token=None`` removes the carrier entirely (no empty header is left).
    """
    headers = {k: v for k, v in request.headers.items()}
    url = request.url
    if scheme.kind == "api-key" and scheme.carrier == "query":
        parts = urlsplit(url)
        query = [(k, v) for k, v in parse_qsl(parts.query, keep_blank_values=True)
                 if k != scheme.carrier_name]
        if token is not None:
            query.append((scheme.carrier_name, token))
        url = urlunsplit(parts._replace(query=urlencode(query)))
    elif scheme.kind == "api-key" and scheme.carrier == "cookie":
        if token is None:
            _drop_cookie(headers, scheme.carrier_name)
        else:
            _set_cookie(headers, scheme.carrier_name, token)
    else:
        name = scheme.carrier_name if scheme.kind == "api-key" else "Authorization"
        for existing in [k for k in headers if k.lower() == name.lower()]:
            del headers[existing]
        if token is not None:
            if scheme.kind == "api-key":
                headers[name] = token
            elif scheme.kind == "http-basic":
                headers[name] = f"Basic {token}"
            else:
                headers[name] = f"Bearer {token}"
    return replace(request, url=url, headers=headers)


def build_request(op: ApiOperation, assignments: dict, auth=None,
                  base_url: str = "") -> HttpRequest:
    """Assemble a concrete request for ``op``.

    ``assignments`` maps parameter names (dotted for nested body fields) to
    values; ``auth`` is an optional ``(SecurityScheme, token)`` pair.
    """
    params = flatten_body_parameters(op)
    for p in params:
        if p.required and p.name not in assignments:
            raise MissingRequiredParameterError(
                f"{op.operation_id}: no value for required parameter {p.name!r}"
            )
    path = op.path
    query, headers, body_fields = [], {}, {}
    for p in params:
        if p.name not in assignments:
            continue
        value = assignments[p.name]
        if p.location == "path":
            path = path.replace("{" + p.name + "}", quote(_scalar(value), safe=""))
        elif p.location == "query":
            if isinstance(value, list):
                query.extend((p.name, _scalar(v)) for v in value)
            else:
                query.append((p.name, _scalar(value)))
        elif p.location == "header":
            headers[p.name] = _scalar(value)
        elif p.location == "cookie":
            _set_cookie(headers, p.name, _scalar(value))
        else:
            body_fields[p.name] = value
    url = base_url.rstrip("/") + path
    if query:
        url += "?" + urlencode(query)
    body = b""
    if body_fields:
        body = json.dumps(_nest(body_fields), separators=(",", ":")).encode("utf-8")
        headers["Content-Type"] = "application/json"
    request = HttpRequest(op.operation_id, op.method, url, headers, body)
    if auth is not None:
        scheme, token = auth
        request = apply_auth(request, scheme, token)
    return request


# --- dispatch -------------------------------------------------------------


class HttpEngine:
    """Sends requests for one scenario run and assembles traces in dispatch order."""

    def __init__(self, timeout_ms: int = DEFAULT_TIMEOUT_MS, reuse_connections: bool = True,
                 max_in_flight: int = 32):
        self.timeout_ms = timeout_ms
        self.reuse_connections = reuse_connections
        self.max_in_flight = max_in_flight
        self._local = threading.local()
        self._sessions: list[requests.Session] = []
        self._lock = threading.Lock()

    def _session(self) -> requests.Session:
        session = getattr(self._local, "session", None)
        if session is None:
            session = requests.Session()
            # Never carry server-set cookies from one request into the next.
            session.cookies.set_policy(DefaultCookiePolicy(allowed_domains=[]))
            session.trust_env = False
            self._local.session = session
            with self._lock:
                self._sessions.append(session)
        return session

    def send(self, request: HttpRequest, index: int = 0) -> HttpInteraction:
        headers = dict(request.headers)
        if not self.reuse_connections:
            headers["Connection"] = "close"
        interaction = HttpInteraction(index, request.operation_id, request)
        interaction.sent_at = now_ms()
        try:
            resp = self._session().request(
                request.method, request.url, headers=headers,
                data=request.body or None, allow_redirects=False,
                timeout=self.timeout_ms / 1000.0,
            )
            interaction.response = HttpResponse(resp.status_code, dict(resp.headers),
                                                resp.content)
        except requests.RequestException as exc:
            interaction.transport_error = f"{type(exc).__name__}: {exc}"
        interaction.received_at = now_ms()
        return interaction

    def execute_sequence(self, reqs: Iterable[HttpRequest],
                         pacing: Optional[PacingPolicy] = None, *, phase: str,
                         seed: int = 0) -> ExecutionTrace:
        """Dispatch ``reqs`` in order.

        With a pacing policy, request *i* leaves at ``start + i * interval``
        and responses are collected concurrently. Without one, each request
        waits for the previous response.
        """
        batch = list(reqs)
        started = now_ms()
        if pacing is None:
            interactions = [self.send(r, i) for i, r in enumerate(batch)]
        else:
            interactions = self._paced(batch, pacing, started)
        return ExecutionTrace(phase, interactions, started, now_ms(), seed)

    def _paced(self, batch, pacing, started) -> list[HttpInteraction]:
        workers = max(1, min(self.max_in_flight, len(batch)))
        futures = []
        previous = None
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for i, request in enumerate(batch):
                due = started + pacing.offset_ms(i)
                if previous is not None:
                    # A late dispatch pushes the next one back rather than
                    # squeezing the gap below the interval.
                    due = max(due, previous + pacing.interval_ms)
                delay = (due - now_ms()) / 1000.0
                if delay > 0:
                    time.sleep(delay)
                previous = now_ms()
                futures.append(pool.submit(self.send, request, i))
            return [f.result() for f in futures]

    def close(self) -> None:
        with self._lock:
            for session in self._sessions:
                session.close()
            self._sessions.clear()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def execute_sequence(reqs: Iterable[HttpRequest], pacing: Optional[PacingPolicy],
                     timeout_ms: int = DEFAULT_TIMEOUT_MS, *, phase: str = "stuffing",
                     seed: int = 0) -> ExecutionTrace:
    with HttpEngine(timeout_ms=timeout_ms) as engine:
        return engine.execute_sequence(reqs, pacing, phase=phase, seed=seed)


# --- trace files ----------------------------------------------------------


def _b64(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


def _interaction_to_json(i: HttpInteraction) -> dict:
    return {
        "sequence_index": i.sequence_index,
        "operation_id": i.operation_id,
        "request": {
            "method": i.request.method,
            "url": i.request.url,
            "headers": i.request.headers,
            "body": _b64(i.request.body),
        },
        "response": None if i.response is None else {
            "status": i.response.status,
            "headers": i.response.headers,
            "body": _b64(i.response.body),
        },
        "sent_at": i.sent_at,
        "received_at": i.received_at,
        "annotation": i.annotation,
        "transport_error": i.transport_error,
    }


def _interaction_from_json(obj: dict) -> HttpInteraction:
    try:
        req = obj["request"]
        request = HttpRequest(obj["operation_id"], req["method"], req["url"],
                              dict(req["headers"]), base64.b64decode(req["body"],
                                                                     validate=True))
        resp = obj["response"]
        response = None if resp is None else HttpResponse(
            int(resp["status"]), dict(resp["headers"]),
            base64.b64decode(resp["body"], validate=True),
        )
        return HttpInteraction(
            sequence_index=obj["sequence_index"],
            operation_id=obj["operation_id"],
            request=request,
            response=response,
            sent_at=obj["sent_at"],
            received_at=obj["received_at"],
            annotation=dict(obj["annotation"]),
            transport_error=obj["transport_error"],
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed interaction record: {exc!r}") from exc


def persist_trace(trace: ExecutionTrace, path) -> None:
    header = {"phase": trace.phase, "seed": trace.seed,
              "started_at": trace.started_at, "ended_at": trace.ended_at}
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header) + "\n")
        for interaction in trace.interactions:
            fh.write(json.dumps(_interaction_to_json(interaction)) + "\n")


def load_trace(path) -> ExecutionTrace:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise FormatError(f"{path}: empty trace file")
    try:
        header = json.loads(lines[0])
        records = [json.loads(line) for line in lines[1:] if line.strip()]
        interactions = [_interaction_from_json(r) for r in records]
        return ExecutionTrace(header["phase"], interactions, header["started_at"],
                              header["ended_at"], header["seed"])
    except FormatError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}: {exc}") from exc
