"""Pattern file I/O: run-length-encoded (.rle) and plaintext (.cells).

RLE: header line ``x = <w>, y = <h>, rule = <rulestring>``, body of
run-length tokens (``b`` dead, ``o`` alive, ``$`` end-of-row, ``!`` end),
body lines at most 70 characters.  Plaintext: ``.`` dead, ``O`` alive,
``!`` comment lines.  Both round-trip bit-exactly.
"""
from __future__ import annotations

import re

import numpy as np

from .rules import RuleSet, format_rule_string, parse_rule_string


class PatternError(ValueError):
    """Raised on malformed pattern files."""


_HEADER_RE = re.compile(
    r"^\s*x\s*=\s*(\d+)\s*,\s*y\s*=\s*(\d+)\s*(?:,\s*rule\s*=\s*(\S+)\s*)?$",
    re.IGNORECASE,
)


def parse_rle(text: str) -> tuple[np.ndarray, RuleSet | None]:
    """Decode RLE text into a (h, w) uint8 grid and its rule, if named."""
    lines = text.splitlines()
    header = None
    body_lines = []
    for line in lines:
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if header is None:
            m = _HEADER_RE.match(stripped)
            if not m:
                raise PatternError(f"bad RLE header: {stripped!r}")
            header = m
        else:
            body_lines.append(stripped)
    if header is None:
        raise PatternError("missing RLE header line")
    w, h = int(header.group(1)), int(header.group(2))
    rule = parse_rule_string(header.group(3)) if header.group(3) else None

    cells = np.zeros((h, w), np.uint8)
    r = c = 0
    count = 0
    done = False
    for ch in "".join(body_lines):
        if done:
            break
        if ch.isdigit():
            count = count * 10 + int(ch)
            continue
        run = count if count else 1
        count = 0
        if ch in "bB":
            c += run
        elif ch in "oO":
            if r >= h or c + run > w:
                raise PatternError("RLE body exceeds declared extent")
            cells[r, c:c + run] = 1
            c += run
        elif ch == "$":
            r += run
            c = 0
        elif ch == "!":
            done = True
        elif ch.isspace():
            continue
        else:
            raise PatternError(f"unexpected RLE token {ch!r}")
    if not done:
        raise PatternError("RLE body missing terminating '!'")
    return cells, rule


def format_rle(cells: np.ndarray, rule: RuleSet | None = None) -> str:
    """Encode a (h, w) grid as canonical RLE (trailing dead cells elided)."""
    h, w = cells.shape
    header = f"x = {w}, y = {h}"
    if rule is not None:
        header += f", rule = {format_rule_string(rule)}"

    tokens: list[str] = []
    pending_rows = 0
    for r in range(h):
        row = cells[r]
        live = np.flatnonzero(row)
        if live.size == 0:
            pending_rows += 1
            continue
        if pending_rows:
            tokens.append("$" if pending_rows == 1 else f"{pending_rows}$")
            pending_rows = 0
        end = live[-1] + 1
        c = 0
        while c < end:
            v = row[c]
            run = 1
            while c + run < end and row[c + run] == v:
                run += 1
            sym = "o" if v else "b"
            tokens.append(sym if run == 1 else f"{run}{sym}")
            c += run
        pending_rows = 1
    tokens.append("!")

    body_lines = []
    line = ""
    for tok in tokens:
        if len(line) + len(tok) > 70:
            body_lines.append(line)
            line = ""
        line += tok
    if line:
        body_lines.append(line)
    return "\n".join([header] + body_lines) + "\n"


def parse_plaintext(text: str) -> np.ndarray:
    """Decode plaintext (``.``/``O``, ``!`` comments) into a (h, w) grid."""
    rows = []
    for line in text.splitlines():
        if line.startswith("!"):
            continue
        rows.append(line.rstrip("\r"))
    while rows and not rows[-1].strip():
        rows.pop()
    if not rows:
        raise PatternError("plaintext pattern has no rows")
    w = max(len(r) for r in rows)
    cells = np.zeros((len(rows), w), np.uint8)
    for i, row in enumerate(rows):
        for j, ch in enumerate(row):
            if ch == "O":
                cells[i, j] = 1
            elif ch != ".":
                raise PatternError(f"unexpected plaintext character {ch!r}")
    return cells


def format_plaintext(cells: np.ndarray, comment: str | None = None) -> str:
    """Encode a grid as full-width plaintext rows."""
    lines = []
    if comment:
        lines.append(f"! {comment}")
    for row in cells:
        lines.append("".join("O" if v else "." for v in row))
    return "\n".join(lines) + "\n"


def load_pattern(path: str) -> tuple[np.ndarray, RuleSet | None]:
    """Read a pattern file, dispatching on extension (.rle vs plaintext)."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    if path.lower().endswith(".rle"):
        return parse_rle(text)
    return parse_plaintext(text), None


def save_pattern(path: str, cells: np.ndarray, rule: RuleSet | None = None,
                 fmt: str | None = None) -> None:
    """Write a pattern file; format from `fmt` or the extension."""
    fmt = fmt or ("rle" if path.lower().endswith(".rle") else "plaintext")
    if fmt == "rle":
        text = format_rle(cells, rule)
    elif fmt == "plaintext":
        text = format_plaintext(cells)
    else:
        raise PatternError(f"unknown pattern format {fmt!r}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
