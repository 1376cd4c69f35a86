"""Character-level mutations that turn a valid token into an invalid look-alike."""

from __future__ import annotations

import random
import string
from dataclasses import dataclass

from .errors import EmptyTokenError, ExhaustedMutationsError, NoEligiblePositionError

OPERATORS = ("alter_char", "remove_char", "add_char")
BASE64URL = string.ascii_letters + string.digits + "-_"
ALPHANUMERIC = string.ascii_letters + string.digits
MAX_ATTEMPTS = 100


@dataclass(frozen=True)
class TokenMutation:
    operator: str
    position: int
    original_token: str
    mutated_token: str
    rng_seed: int


def detect_token_shape(token: str) -> str:
    if not token:
        raise EmptyTokenError("token must be non-empty")
    segments = token.split(".")
    if len(segments) == 3 and all(s and all(c in BASE64URL for c in s) for s in segments):
        return "jwt"
    return "opaque"


def alphabet_for(token: str) -> str:
    return BASE64URL if detect_token_shape(token) == "jwt" else ALPHANUMERIC


def _eligible_positions(token: str, operator: str, shape: str) -> list[int]:
    if operator == "add_char":
        # Insertion slots; inserting next to a dot keeps it a separator.
        return list(range(len(token) + 1))
    if shape != "jwt":
        positions = list(range(len(token)))
        if operator == "remove_char" and len(token) == 1:
            return []  # removal would leave no token at all
        return positions
    positions = [i for i, c in enumerate(token) if c != "."]
    if operator == "remove_char":
        # Keep every JWT segment non-empty.
        segment_len = {}
        start = 0
        for seg in token.split("."):
            for i in range(start, start + len(seg)):
                segment_len[i] = len(seg)
            start += len(seg) + 1
        positions = [i for i in positions if segment_len[i] > 1]
    return positions


def _apply(token: str, operator: str, rng: random.Random) -> tuple[int, str]:
    shape = detect_token_shape(token)
    positions = _eligible_positions(token, operator, shape)
    if not positions:
        raise NoEligiblePositionError(f"{operator} has no eligible position in {token!r}")
    alphabet = BASE64URL if shape == "jwt" else ALPHANUMERIC
    pos = rng.choice(positions)
    if operator == "alter_char":
        replacement = rng.choice([c for c in alphabet if c != token[pos]])
        return pos, token[:pos] + replacement + token[pos + 1:]
    if operator == "remove_char":
        return pos, token[:pos] + token[pos + 1:]
    return pos, token[:pos] + rng.choice(alphabet) + token[pos:]


def mutate(token: str, operator: str, rng: random.Random) -> TokenMutation:
    """Apply one mutation operator at a uniformly chosen eligible position.

    A fresh sub-seed is drawn from ``rng`` and stored on the result, so each
    mutation can be regenerated on its own with ``random.Random(rng_seed)``.
    """
    if not token:
        raise EmptyTokenError("token must be non-empty")
    if operator not in OPERATORS:
        raise ValueError(f"unknown mutation operator {operator!r}")
    seed = rng.getrandbits(32)
    position, mutated = _apply(token, operator, random.Random(seed))
    return TokenMutation(operator, position, token, mutated, seed)


def mutation_plan(token: str, count: int, rng: random.Random) -> list[TokenMutation]:
    """Return ``count`` pairwise-distinct mutations cycling alter, remove, add."""
    if count < 1:
        raise ValueError("count must be >= 1")
    plan: list[TokenMutation] = []
    seen: set[str] = set()
    for slot in range(count):
        operator = OPERATORS[slot % len(OPERATORS)]
        for _ in range(MAX_ATTEMPTS):
            candidate = mutate(token, operator, rng)
            if candidate.mutated_token not in seen:
                break
        else:
            raise ExhaustedMutationsError(
                f"could not find a fresh {operator} mutation of {token!r} "
                f"for slot {slot} after {MAX_ATTEMPTS} attempts"
            )
        seen.add(candidate.mutated_token)
        plan.append(candidate)
    return plan
