"""Finite tables ``q -> psi(q)`` with exact values in ``[0, 1/2]``.

File format::

    Q <limit>
    1 1/2
    2 1/3
    ...

Every ``q`` from 1 to the limit must appear exactly once.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Callable, Mapping

from .arithmetic import sieve

HALF = Fraction(1, 2)

_RATIONAL = re.compile(r"^-?\d+(/\d+)?$")


class PsiFormatError(ValueError):
    pass


def parse_rational(text: str) -> Fraction:
    """Parse ``a/b`` or an integer; decimals are rejected so values stay exact."""
    text = text.strip()
    if not _RATIONAL.match(text):
        raise PsiFormatError(f"not an exact rational: {text!r}")
    try:
        return Fraction(text)
    except ZeroDivisionError:
        raise PsiFormatError(f"zero denominator in {text!r}") from None


@dataclass(frozen=True, eq=True)
class PsiFunction:
    """``values[q - 1] = psi(q)`` for ``1 <= q <= limit``."""

    values: tuple[Fraction, ...]

    def __post_init__(self):
        if not self.values:
            raise ValueError("empty psi table")
        for q, v in enumerate(self.values, 1):
            if not isinstance(v, Fraction):
                raise TypeError(f"psi({q}) must be a Fraction")
            if not 0 <= v <= HALF:
                raise ValueError(f"psi({q}) = {v} outside [0, 1/2]")

    @property
    def limit(self) -> int:
        return len(self.values)

    def __call__(self, q: int) -> Fraction:
        if not 1 <= q <= len(self.values):
            raise IndexError(f"q={q} outside psi table 1..{len(self.values)}")
        return self.values[q - 1]

    __getitem__ = __call__

    def truncate(self, Q: int) -> "PsiFunction":
        self(Q)
        return PsiFunction(self.values[:Q])

    def support(self) -> list[int]:
        return [q for q, v in enumerate(self.values, 1) if v]

    @classmethod
    def from_mapping(cls, table: Mapping[int, Fraction], limit: int | None = None) -> "PsiFunction":
        limit = max(table) if limit is None else limit
        missing = [q for q in range(1, limit + 1) if q not in table]
        if missing:
            raise PsiFormatError(f"psi table misses q={missing[0]}")
        return cls(tuple(Fraction(table[q]) for q in range(1, limit + 1)))

    @classmethod
    def from_function(cls, fn: Callable[[int], Fraction], limit: int) -> "PsiFunction":
        return cls(tuple(Fraction(fn(q)) for q in range(1, limit + 1)))

    # -- serialization --------------------------------------------------
    def dumps(self) -> str:
        lines = [f"Q {self.limit}"]
        lines += [f"{q} {v.numerator}/{v.denominator}" for q, v in enumerate(self.values, 1)]
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "PsiFunction":
        lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
        if not lines:
            raise PsiFormatError("empty psi file")
        head = lines[0].split()
        if len(head) != 2 or head[0] != "Q" or not head[1].isdigit() or int(head[1]) < 1:
            raise PsiFormatError(f"bad header line {lines[0]!r}; expected 'Q <integer>'")
        limit = int(head[1])
        table: dict[int, Fraction] = {}
        for ln in lines[1:]:
            parts = ln.split()
            if len(parts) != 2 or not parts[0].isdigit():
                raise PsiFormatError(f"bad line {ln!r}")
            q = int(parts[0])
            if not 1 <= q <= limit:
                raise PsiFormatError(f"q={q} outside 1..{limit}")
            if q in table:
                raise PsiFormatError(f"duplicate q={q}")
            table[q] = parse_rational(parts[1])
        try:
            return cls.from_mapping(table, limit)
        except ValueError as exc:
            raise PsiFormatError(str(exc)) from exc

    def save(self, path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def load(cls, path) -> "PsiFunction":
        return cls.loads(Path(path).read_text())


# ---------------------------------------------------------------------------
# generator families


def _value(text: str) -> Fraction:
    v = parse_rational(text)
    if not 0 <= v <= HALF:
        raise PsiFormatError(f"psi value {v} outside [0, 1/2]")
    return v


def reciprocal_log(q: int) -> Fraction:
    # ceil(log2(q + 1)) == q.bit_length() for q >= 1
    return min(HALF, Fraction(1, q.bit_length()))


def generate_psi(spec: str, Q: int) -> PsiFunction:
    """Build a total table on ``[1, Q]`` from a generator spec.

    ``constant:<v>``, ``reciprocal-log``, ``prime-support:<v>``,
    ``smooth-support:<v>:<B>`` or ``file:<path>``.
    """
    if Q < 1:
        raise ValueError("Q must be positive")
    kind, _, rest = spec.partition(":")
    if kind == "constant":
        v = _value(rest)
        return PsiFunction((v,) * Q)
    if kind == "reciprocal-log":
        if rest:
            raise PsiFormatError("reciprocal-log takes no argument")
        return PsiFunction.from_function(reciprocal_log, Q)
    if kind == "prime-support":
        v = _value(rest)
        spf = sieve(Q).spf
        return PsiFunction.from_function(lambda q: v if q >= 2 and spf[q] == q else Fraction(0), Q)
    if kind == "smooth-support":
        parts = rest.split(":")
        if len(parts) != 2 or not parts[1].isdigit():
            raise PsiFormatError(f"smooth-support needs <value>:<B>, got {rest!r}")
        v, B = _value(parts[0]), int(parts[1])
        s = sieve(Q)
        return PsiFunction.from_function(
            lambda q: v if all(p <= B for p, _ in s.factor(q)) else Fraction(0), Q
        )
    if kind == "file":
        table = PsiFunction.load(rest)
        if table.limit < Q:
            raise PsiFormatError(f"psi file covers 1..{table.limit}, need {Q}")
        return table.truncate(Q)
    raise PsiFormatError(f"unknown psi generator {spec!r}")


FAMILIES = ("constant:1/2", "prime-support:1/2", "reciprocal-log")
