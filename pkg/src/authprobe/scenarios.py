"""The three broken-authentication testing strategies, end to end."""

from __future__ import annotations

import heapq
import logging
import random
import re
import string
from dataclasses import dataclass, field
from typing import Optional

from .api_model import ApiOperation, ApiParameter, ApiSpecification, flatten_body_parameters, \
    response_leaf_names
from .auth_locator import LoginCandidate, locate_login, normalize_name
from .errors import NoLoginOperationError
from .http_engine import DEFAULT_TIMEOUT_MS, ExecutionTrace, HttpEngine, PacingPolicy, \
    apply_auth, build_request, now_ms
from .oracles import DEFAULT_THRESHOLD, UNEXPECTED_SUCCESS, SecurityFinding, \
    lockout_oracle, token_oracle
from .token_mutator import mutation_plan
from .value_providers import ObservedDictionary, provide_value, record_interaction

log = logging.getLogger(__name__)

STRATEGIES = ("credential_stuffing", "password_brute_force", "unchecked_token")
CREDENTIAL_LENGTH = 12
PASSWORD_SYMBOLS = "!@#$%^&*-_"
_METHOD_RANK = {"POST": 0, "GET": 1, "PUT": 2, "PATCH": 2, "DELETE": 3}


@dataclass
class ScenarioConfig:
    strategy: str
    request_count: int = 100
    window_ms: int = 10_000
    similarity_threshold: float = DEFAULT_THRESHOLD
    valid_token: Optional[str] = None
    fixed_user_id: Optional[str] = None
    seed: int = 0
    timeout_ms: int = DEFAULT_TIMEOUT_MS
    reuse_connections: bool = True

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.request_count < 3:
            raise ValueError("request_count must be at least 3")
        if not 0.0 <= self.similarity_threshold <= 1.0:
            raise ValueError("similarity_threshold must lie in [0, 1]")
        if self.strategy == "unchecked_token" and not self.valid_token:
            raise ValueError("unchecked_token strategy needs a valid token")


@dataclass
class ScenarioResult:
    strategy: str
    traces: dict = field(default_factory=dict)  # label -> ExecutionTrace
    findings: list = field(default_factory=list)
    verdicts: dict = field(default_factory=dict)  # label -> verdict summary


def trace_label(strategy: str, operation_id: str) -> str:
    slug = re.sub(r"[^A-Za-z0-9]+", "_", operation_id).strip("_")
    return f"{strategy}-{slug}"


# --- credential generation ------------------------------------------------


def _looks_like_email(param: ApiParameter) -> bool:
    return param.format == "email" or "mail" in normalize_name(param.name)


def random_user(param: ApiParameter, rng: random.Random):
    if param.value_type == "integer":
        return rng.randrange(10 ** (CREDENTIAL_LENGTH - 1), 10 ** CREDENTIAL_LENGTH)
    if param.value_type == "number":
        return float(rng.randrange(10 ** (CREDENTIAL_LENGTH - 1), 10 ** CREDENTIAL_LENGTH))
    local = "".join(rng.choice(string.ascii_lowercase + string.digits)
                    for _ in range(CREDENTIAL_LENGTH))
    return f"{local}@example.com" if _looks_like_email(param) else local


def random_password(param: ApiParameter, rng: random.Random):
    if param.value_type in ("integer", "number"):
        return rng.randrange(10 ** (CREDENTIAL_LENGTH - 1), 10 ** CREDENTIAL_LENGTH)
    classes = (string.ascii_lowercase, string.ascii_uppercase, string.digits, PASSWORD_SYMBOLS)
    chars = [rng.choice(c) for c in classes]
    everything = "".join(classes)
    chars += [rng.choice(everything) for _ in range(CREDENTIAL_LENGTH - len(chars))]
    rng.shuffle(chars)
    return "".join(chars)


def _distinct(generate, count: int) -> list:
    values, seen = [], set()
    while len(values) < count:
        v = generate()
        if v not in seen:
            seen.add(v)
            values.append(v)
    return values


def _fill_params(params, dictionary: ObservedDictionary, rng: random.Random) -> dict:
    """Required parameters always get a value; optional ones only from known sources."""
    assignments = {}
    for p in params:
        known = p.example_values or p.enum_values or p.default_value is not None \
            or dictionary.latest(p.leaf_name) is not None
        if p.required or known:
            assignments[p.name] = provide_value(p, dictionary, rng)
    return assignments


# --- login strategies -----------------------------------------------------


def _login_requests(spec: ApiSpecification, candidate: LoginCandidate, users: list,
                    passwords: list, rng: random.Random) -> list:
    dictionary = ObservedDictionary()
    batch = []
    for user, password in zip(users, passwords):
        assignments = _fill_params(candidate.other_params, dictionary, rng)
        if candidate.user_param is not None:
            assignments[candidate.user_param.name] = user
        if candidate.password_param is not None:
            assignments[candidate.password_param.name] = password
        batch.append(build_request(candidate.operation, assignments, None, spec.base_url))
    return batch


def _run_login_strategy(spec: ApiSpecification, cfg: ScenarioConfig, strategy: str,
                        phase: str, engine: Optional[HttpEngine]) -> ScenarioResult:
    candidates = locate_login(spec)
    if not candidates:
        raise NoLoginOperationError("no operation matches the login heuristics")
    result = ScenarioResult(strategy)
    own_engine = engine is None
    engine = engine or HttpEngine(cfg.timeout_ms, cfg.reuse_connections)
    pacing = PacingPolicy(cfg.request_count, cfg.window_ms, "even")
    try:
        for candidate in candidates:
            op_id = candidate.operation.operation_id
            rng = random.Random(f"{cfg.seed}:{strategy}:{op_id}")
            n = cfg.request_count
            user_param, password_param = candidate.user_param, candidate.password_param
            if strategy == "password_brute_force":
                if cfg.fixed_user_id is not None:
                    fixed = cfg.fixed_user_id
                else:
                    fixed = random_user(user_param, rng) if user_param else None
                users = [fixed] * n
            else:
                users = (_distinct(lambda: random_user(user_param, rng), n)
                         if user_param else [None] * n)
            passwords = (_distinct(lambda: random_password(password_param, rng), n)
                         if password_param else [None] * n)
            batch = _login_requests(spec, candidate, users, passwords, rng)
            log.info("%s: %d requests to %s over %d ms", strategy, n, op_id, cfg.window_ms)
            trace = engine.execute_sequence(batch, pacing, phase=phase, seed=cfg.seed)
            for interaction in trace.interactions:
                interaction.annotation["phase"] = phase
                if interaction.succeeded:
                    interaction.annotation["outcome"] = UNEXPECTED_SUCCESS
            verdict = lockout_oracle(trace, cfg.similarity_threshold)
            label = trace_label(strategy, op_id)
            result.traces[label] = trace
            result.verdicts[label] = verdict.to_dict()
            if verdict.vulnerable:
                result.findings.append(SecurityFinding(
                    strategy, op_id, verdict.to_dict(), list(verdict.evidence), label))
    finally:
        if own_engine:
            engine.close()
    return result


def run_credential_stuffing(spec: ApiSpecification, cfg: ScenarioConfig,
                            engine: Optional[HttpEngine] = None) -> ScenarioResult:
    """Fresh random user and password on every attempt, evenly paced."""
    return _run_login_strategy(spec, cfg, "credential_stuffing", "stuffing", engine)


def run_password_brute_force(spec: ApiSpecification, cfg: ScenarioConfig,
                             engine: Optional[HttpEngine] = None) -> ScenarioResult:
    """One user identifier for the whole run; fresh random password each attempt."""
    return _run_login_strategy(spec, cfg, "password_brute_force", "brute_force", engine)


# --- token strategy -------------------------------------------------------


def order_operations(spec: ApiSpecification) -> list[ApiOperation]:
    """Producer-consumer order over the API's operations.

    A precedes B when a 2xx response leaf of A shares a normalized name with
    a parameter of B (and A does not itself consume that name). Ready
    operations are taken POST, GET, PUT/PATCH, DELETE, then in document
    order; a dependency cycle is broken at the highest-ranked remaining op.
    """
    ops = list(spec.operations)
    consumes = [{normalize_name(p.leaf_name) for p in flatten_body_parameters(op)}
                for op in ops]
    produces = [{normalize_name(n) for n in response_leaf_names(op)} for op in ops]
    preds: list[set] = [set() for _ in ops]
    for a in range(len(ops)):
        for b in range(len(ops)):
            if a != b and (produces[a] - consumes[a]) & consumes[b]:
                preds[b].add(a)

    def rank(i: int):
        return (_METHOD_RANK.get(ops[i].method, 4), i)

    remaining = set(range(len(ops)))
    order = []
    while remaining:
        ready = [rank(i) for i in remaining if not (preds[i] & remaining)]
        if not ready:
            ready = [rank(i) for i in remaining]
        heapq.heapify(ready)
        _, chosen = heapq.heappop(ready)
        order.append(ops[chosen])
        remaining.discard(chosen)
    return order


def run_nominal_session(spec: ApiSpecification, token: str, cfg: ScenarioConfig,
                        engine: Optional[HttpEngine] = None,
                        dictionary: Optional[ObservedDictionary] = None) -> ExecutionTrace:
    if not token:
        raise ValueError("nominal session needs a non-empty token")
    dictionary = dictionary if dictionary is not None else ObservedDictionary()
    rng = random.Random(f"{cfg.seed}:nominal")
    scheme = spec.default_scheme()
    own_engine = engine is None
    engine = engine or HttpEngine(cfg.timeout_ms, cfg.reuse_connections)
    trace = engine.execute_sequence([], None, phase="nominal", seed=cfg.seed)
    try:
        for op in order_operations(spec):
            assignments = _fill_params(flatten_body_parameters(op), dictionary, rng)
            request = build_request(op, assignments, (scheme, token), spec.base_url)
            interaction = engine.send(request, len(trace.interactions))
            interaction.annotation["phase"] = "nominal"
            record_interaction(dictionary, interaction)
            trace.interactions.append(interaction)
    finally:
        if own_engine:
            engine.close()
    trace.ended_at = now_ms()
    return trace


def _replay(nominal: ExecutionTrace, scheme, tokens: list, phase: str,
            annotations: list, engine: HttpEngine, seed: int) -> ExecutionTrace:
    batch = [apply_auth(i.request, scheme, t) for i, t in zip(nominal.interactions, tokens)]
    trace = engine.execute_sequence(batch, None, phase=phase, seed=seed)
    for interaction, note in zip(trace.interactions, annotations):
        interaction.annotation.update(note, phase=phase)
    return trace


def run_unchecked_token(spec: ApiSpecification, cfg: ScenarioConfig,
                        engine: Optional[HttpEngine] = None) -> ScenarioResult:
    """Nominal session, then a mutated-token replay, then a no-token replay."""
    if not cfg.valid_token:
        raise ValueError("unchecked_token strategy needs a valid token")
    result = ScenarioResult("unchecked_token")
    own_engine = engine is None
    engine = engine or HttpEngine(cfg.timeout_ms, cfg.reuse_connections)
    scheme = spec.default_scheme()
    try:
        nominal = run_nominal_session(spec, cfg.valid_token, cfg, engine)
        n = len(nominal)
        plan = mutation_plan(cfg.valid_token, n, random.Random(f"{cfg.seed}:mutations")) \
            if n else []
        mutated = _replay(
            nominal, scheme, [m.mutated_token for m in plan], "mutated_token",
            [{"mutation": f"{m.operator}@{m.position}", "mutated_token": m.mutated_token}
             for m in plan],
            engine, cfg.seed,
        )
        no_token = _replay(nominal, scheme, [None] * n, "no_token", [{}] * n, engine,
                           cfg.seed)
    finally:
        if own_engine:
            engine.close()
    verdict = token_oracle(mutated, no_token)
    labels = {phase: trace_label("unchecked_token", phase)
              for phase in ("nominal", "mutated_token", "no_token")}
    result.traces = {labels["nominal"]: nominal, labels["mutated_token"]: mutated,
                     labels["no_token"]: no_token}
    for finding in verdict.findings:
        finding.trace = labels["mutated_token"]
    result.findings = verdict.findings
    result.verdicts[labels["mutated_token"]] = {
        "accepted_with_mutated_token": sorted(verdict.accepted_with_mutated_token),
        "accepted_without_token": sorted(verdict.accepted_without_token),
        "vulnerable": sorted(verdict.vulnerable),
    }
    return result
