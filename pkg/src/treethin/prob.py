"""Probabilities carried either as exact rationals or as log-domain floats."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational

MODES = ("exact", "log")


def as_fraction(x) -> Fraction:
    """Exact value of ``x``; floats are read by their shortest decimal repr.

    ``as_fraction(0.999) == Fraction(999, 1000)`` rather than the binary
    expansion of the double.
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, Rational)):
        return Fraction(x)
    if isinstance(x, float):
        return Fraction(repr(x))
    return Fraction(str(x))


def check_p(p) -> Fraction:
    q = as_fraction(p)
    if not 0 < q < 1:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    return q


def check_mode(mode: str) -> str:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    return mode


def logaddexp(a: float, b: float) -> float:
    if a == -math.inf:
        return b
    if b == -math.inf:
        return a
    if a < b:
        a, b = b, a
    return a + math.log1p(math.exp(b - a))


def safe_log(x: float) -> float:
    return math.log(x) if x > 0 else -math.inf


@dataclass(frozen=True)
class Prob:
    """A probability in one of two representations.

    ``mode == "exact"``: ``value`` is a non-negative :class:`~fractions.Fraction`.
    ``mode == "log"``: ``value`` is the natural log (``-inf`` for zero).

    Quotients of probabilities share the type, so values above 1 are allowed.
    """

    mode: str
    value: Fraction | float

    def __post_init__(self):
        if self.mode == "exact":
            if not isinstance(self.value, Fraction):
                object.__setattr__(self, "value", Fraction(self.value))
            if self.value < 0:
                raise ValueError("negative probability")
        elif self.mode == "log":
            if math.isnan(self.value):
                raise ValueError("log probability is NaN")
            object.__setattr__(self, "value", float(self.value))
        else:
            raise ValueError(f"unknown mode {self.mode!r}")

    @classmethod
    def exact(cls, value) -> Prob:
        return cls("exact", as_fraction(value))

    @classmethod
    def from_log(cls, logp: float) -> Prob:
        return cls("log", logp)

    @classmethod
    def of(cls, value, mode: str) -> Prob:
        """Wrap a number given in linear scale, in the requested mode."""
        if mode == "exact":
            return cls.exact(value)
        return cls.from_log(safe_log(float(value)))

    @property
    def is_exact(self) -> bool:
        return self.mode == "exact"

    def log(self) -> float:
        if self.mode == "log":
            return self.value
        if self.value <= 0:
            return -math.inf if self.value == 0 else math.nan
        # big rationals overflow float(); take logs of numerator/denominator
        return _log_int(self.value.numerator) - _log_int(self.value.denominator)

    def __float__(self) -> float:
        if self.mode == "log":
            return math.exp(self.value)
        return float(self.value)

    def to_mode(self, mode: str) -> Prob:
        if mode == self.mode:
            return self
        if mode == "log":
            return Prob.from_log(self.log())
        raise ValueError("cannot convert a log-domain value to an exact rational")

    def _pair(self, other):
        if not isinstance(other, Prob):
            other = Prob.exact(other) if self.is_exact else Prob.of(other, "log")
        return other

    def __mul__(self, other) -> Prob:
        other = self._pair(other)
        if self.is_exact and other.is_exact:
            return Prob.exact(self.value * other.value)
        return Prob.from_log(self.log() + other.log())

    def __truediv__(self, other) -> Prob:
        other = self._pair(other)
        if self.is_exact and other.is_exact:
            return Prob("exact", self.value / other.value)
        return Prob.from_log(self.log() - other.log())

    def _cmp_key(self, other):
        other = self._pair(other)
        if self.is_exact and other.is_exact:
            return self.value, other.value
        return self.log(), other.log()

    def __lt__(self, other):
        a, b = self._cmp_key(other)
        return a < b

    def __le__(self, other):
        a, b = self._cmp_key(other)
        return a <= b

    def __gt__(self, other):
        a, b = self._cmp_key(other)
        return a > b

    def __ge__(self, other):
        a, b = self._cmp_key(other)
        return a >= b

    def rel_err(self, other) -> float:
        """Relative discrepancy |a - b| / |b|, exact when both are rational."""
        other = self._pair(other)
        if self.is_exact and other.is_exact:
            if other.value == 0:
                return 0.0 if self.value == 0 else math.inf
            return float(abs(self.value - other.value) / other.value)
        la, lb = self.log(), other.log()
        if lb == -math.inf:
            return 0.0 if la == -math.inf else math.inf
        return abs(math.expm1(la - lb))

    def __str__(self) -> str:
        return format_value(self)


def _log_int(n: int) -> float:
    bits = n.bit_length()
    if bits < 1000:
        return math.log(n)
    shift = bits - 64
    return math.log(n >> shift) + shift * math.log(2)


def format_value(x) -> str:
    """Report formatting: rationals as ``num/den``, floats with 15 significant digits."""
    if isinstance(x, Prob):
        if x.is_exact:
            return f"{x.value.numerator}/{x.value.denominator}"
        return format(float(x), ".15g")
    if isinstance(x, Fraction):
        return f"{x.numerator}/{x.denominator}"
    if isinstance(x, bool) or x is None:
        return {True: "true", False: "false", None: ""}[x]
    if isinstance(x, float):
        return format(x, ".15g")
    return str(x)
