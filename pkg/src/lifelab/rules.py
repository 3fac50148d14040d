"""Parsing, formatting, and enumeration of Life-like rule definitions.

A rule names the neighbor counts at which a dead cell is born and a live
cell survives, written ``B<digits>/S<digits>`` with digits drawn from 0-8
(Moore neighborhood).  ``B3/S23`` is Conway's Life.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator


class MalformedRule(ValueError):
    """Raised when a rule string does not match ``B<digits>/S<digits>``."""


@dataclass(frozen=True)
class RuleSet:
    """Birth/survival neighbor-count sets defining one Life-like universe.

    Digit sets are stored deduplicated and sorted ascending so that equal
    rules compare equal and serialize identically.
    """

    birth: tuple[int, ...]
    survival: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "birth", _canonical(self.birth))
        object.__setattr__(self, "survival", _canonical(self.survival))

    def __str__(self) -> str:
        return format_rule_string(self)


def _canonical(digits) -> tuple[int, ...]:
    out = tuple(sorted(set(int(d) for d in digits)))
    for d in out:
        if not 0 <= d <= 8:
            raise MalformedRule(f"neighbor count {d} outside 0..8")
    return out


def parse_rule_string(s: str) -> RuleSet:
    """Parse ``B<digits>/S<digits>`` (case-insensitive, digits 0-8).

    Duplicate digits collapse and order is free; ``parse("B33/S32")``
    equals ``parse("B3/S23")``.
    """
    if not isinstance(s, str):
        raise MalformedRule(f"expected a string, got {type(s).__name__}")
    parts = s.split("/")
    if len(parts) != 2:
        raise MalformedRule(f"expected one '/' in rule string: {s!r}")
    bpart, spart = parts
    if not bpart[:1].upper() == "B":
        raise MalformedRule(f"birth part must start with 'B': {s!r}")
    if not spart[:1].upper() == "S":
        raise MalformedRule(f"survival part must start with 'S': {s!r}")
    return RuleSet(_parse_digits(bpart[1:], s), _parse_digits(spart[1:], s))


def _parse_digits(text: str, whole: str) -> tuple[int, ...]:
    digits = []
    for ch in text:
        if ch not in "012345678":
            raise MalformedRule(f"invalid character {ch!r} in rule string {whole!r}")
        digits.append(int(ch))
    return tuple(digits)


def format_rule_string(r: RuleSet) -> str:
    """Canonical serialization: uppercase markers, ascending digits."""
    return "B{}/S{}".format(
        "".join(str(d) for d in r.birth),
        "".join(str(d) for d in r.survival),
    )


def rule_space_size() -> int:
    """Number of distinct Life-like rules: 2^9 birth subsets x 2^9 survival."""
    return 2 ** 9 * 2 ** 9


def all_rules() -> Iterator[RuleSet]:
    """Enumerate every Life-like rule exactly once."""
    for bmask in range(2 ** 9):
        birth = tuple(d for d in range(9) if bmask >> d & 1)
        for smask in range(2 ** 9):
            survival = tuple(d for d in range(9) if smask >> d & 1)
            yield RuleSet(birth, survival)


CONWAY_LIFE = parse_rule_string("B3/S23")
