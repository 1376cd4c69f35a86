"""Keyword heuristics that find login operations and their credential parameters."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .api_model import ApiOperation, ApiParameter, ApiSpecification, flatten_body_parameters

LOGIN_METHODS = ("POST", "GET")
LOGIN_KEYWORDS = ("login", "signin")
USER_KEYWORDS = ("username", "email", "login", "user", "phone", "mail", "id")
CREDENTIAL_TYPES = ("string", "number", "integer")

_NON_ALPHA = re.compile(r"[^a-z]")
_NON_ALNUM = re.compile(r"[^a-z0-9]")


@dataclass(frozen=True)
class LoginCandidate:
    operation: ApiOperation
    user_param: Optional[ApiParameter] = None
    password_param: Optional[ApiParameter] = None
    other_params: tuple = field(default=())


def normalize_path(path: str) -> str:
    """Lowercase ``path`` and drop every non-alphabetic character."""
    return _NON_ALPHA.sub("", path.lower())


def normalize_name(name: str) -> str:
    """Lowercase ``name`` and drop every non-alphanumeric character."""
    return _NON_ALNUM.sub("", name.lower())


def is_login_operation(op: ApiOperation) -> bool:
    if op.method not in LOGIN_METHODS:
        return False
    flat = normalize_path(op.path)
    return any(k in flat for k in LOGIN_KEYWORDS)


def _eligible(params: Iterable[ApiParameter], exclude=None) -> list[ApiParameter]:
    return [p for p in params if p.value_type in CREDENTIAL_TYPES and p != exclude]


def rank_password_parameter(params: Iterable[ApiParameter]) -> Optional[ApiParameter]:
    candidates = _eligible(params)
    for keyword in ("password", "pass"):
        for p in candidates:
            if keyword in normalize_name(p.name):
                return p
    return None


def rank_user_parameter(params: Iterable[ApiParameter],
                        exclude: Optional[ApiParameter] = None) -> Optional[ApiParameter]:
    candidates = _eligible(params, exclude)
    for keyword in USER_KEYWORDS:
        for p in candidates:
            if keyword in normalize_name(p.name):
                return p
    return None


def locate_login(spec: ApiSpecification) -> list[LoginCandidate]:
    found = []
    for op in spec.operations:
        if not is_login_operation(op):
            continue
        params = flatten_body_parameters(op)
        password = rank_password_parameter(params)
        user = rank_user_parameter(params, exclude=password)
        others = tuple(p for p in params if p is not user and p is not password)
        found.append(LoginCandidate(op, user, password, others))
    return found
