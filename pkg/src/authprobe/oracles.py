"""Verdicts over recorded traces.

The lockout oracle flags a login operation when no request was rate limited
(no 429) and the error messages never changed in substance. Two messages are
the same error when their stemmed token sets overlap by at least the
similarity threshold. The token oracle flags operations that accepted a
mutated token, minus those that also work with no token at all.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from statistics import mean
from typing import Optional

from .errors import InsufficientDataError, TraceMismatchError
from .http_engine import ExecutionTrace
from .stemmer import porter_stem

DEFAULT_THRESHOLD = 0.70
RATE_LIMIT_STATUS = 429
UNEXPECTED_SUCCESS = "unexpected-success"

_SPLIT = re.compile(r"[^a-z0-9]+")

SEVERITY = {
    "credential_stuffing": "high",
    "password_brute_force": "high",
    "unchecked_token_authenticity": "critical",
}


@dataclass(frozen=True)
class MessageFingerprint:
    raw: str
    tokens: frozenset


@dataclass
class OracleVerdict:
    vulnerable: bool
    property1_rate_limit_absent: bool
    property2_messages_static: bool
    evidence: list = field(default_factory=list)
    min_similarity: Optional[float] = None
    mean_similarity: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "vulnerable": self.vulnerable,
            "property1_rate_limit_absent": self.property1_rate_limit_absent,
            "property2_messages_static": self.property2_messages_static,
            "evidence": list(self.evidence),
            "similarity_summary": {"min": self.min_similarity, "mean": self.mean_similarity},
        }


@dataclass
class SecurityFinding:
    vulnerability: str
    operation_id: str
    verdict_details: dict
    evidence_indexes: list
    trace: str = ""

    @property
    def severity(self) -> str:
        return SEVERITY[self.vulnerability]

    def to_dict(self) -> dict:
        return {
            "vulnerability": self.vulnerability,
            "operation_id": self.operation_id,
            "severity": self.severity,
            "trace": self.trace,
            "evidence_indexes": list(self.evidence_indexes),
            "verdict_details": self.verdict_details,
        }


@dataclass
class TokenVerdict:
    accepted_with_mutated_token: set
    accepted_without_token: set
    vulnerable: set
    findings: list

    # tuple-style unpacking: W, N, V, findings = token_oracle(...)
    def __iter__(self):
        return iter((self.accepted_with_mutated_token, self.accepted_without_token,
                     self.vulnerable, self.findings))


def fingerprint(message: str) -> MessageFingerprint:
    tokens = set()
    for token in _SPLIT.split(message.lower()):
        if not token or token.isdigit():
            continue
        tokens.add(porter_stem(token))
    return MessageFingerprint(message, frozenset(tokens))


def similarity(a: MessageFingerprint, b: MessageFingerprint) -> float:
    """Shared tokens over the size of the larger token set."""
    if not a.tokens and not b.tokens:
        return 1.0
    if not a.tokens or not b.tokens:
        return 0.0
    return len(a.tokens & b.tokens) / max(len(a.tokens), len(b.tokens))


def lockout_oracle(trace: ExecutionTrace, threshold: float = DEFAULT_THRESHOLD) -> OracleVerdict:
    completed = [i for i in trace.interactions if i.response is not None]
    if len(completed) < 3:
        raise InsufficientDataError(
            f"lockout oracle needs >= 3 completed interactions, got {len(completed)}"
        )
    rate_limited = [i.sequence_index for i in completed if i.status == RATE_LIMIT_STATUS]
    property1 = not rate_limited

    errors = [
        i for i in completed
        if not i.succeeded and i.status != RATE_LIMIT_STATUS
        and i.annotation.get("outcome") != UNEXPECTED_SUCCESS
    ]
    scores = []
    if errors:
        anchor = fingerprint(errors[0].response.text())
        scores = [similarity(anchor, fingerprint(i.response.text())) for i in errors]
    property2 = all(s >= threshold for s in scores)
    evidence = [i.sequence_index for i in errors] + rate_limited
    return OracleVerdict(
        vulnerable=property1 and property2,
        property1_rate_limit_absent=property1,
        property2_messages_static=property2,
        evidence=sorted(evidence),
        min_similarity=round(min(scores), 6) if scores else None,
        mean_similarity=round(mean(scores), 6) if scores else None,
    )


def token_oracle(mutated_trace: ExecutionTrace, no_token_trace: ExecutionTrace) -> TokenVerdict:
    if mutated_trace.operation_sequence() != no_token_trace.operation_sequence():
        raise TraceMismatchError("mutated and no-token traces cover different operations")
    accepted = {i.operation_id for i in mutated_trace.interactions if i.succeeded}
    public = {i.operation_id for i in no_token_trace.interactions if i.succeeded}
    vulnerable = accepted - public
    findings = []
    for op_id in sorted(vulnerable, key=mutated_trace.operation_sequence().index):
        evidence = [i.sequence_index for i in mutated_trace.interactions
                    if i.operation_id == op_id and i.succeeded]
        details = {
            "accepted_with_mutated_token": sorted(accepted),
            "accepted_without_token": sorted(public),
            "vulnerable": sorted(vulnerable),
            "mutations": [
                mutated_trace.interactions[k].annotation.get("mutation", "") for k in evidence
            ],
        }
        findings.append(SecurityFinding("unchecked_token_authenticity", op_id, details,
                                        evidence))
    return TokenVerdict(accepted, public, vulnerable, findings)
