"""Signal temporal logic formulas and quantitative robustness monitoring.

Formulas are evaluated over uniformly sampled traces with the standard
discrete-time quantitative semantics: atoms measure the signed margin to their
threshold, conjunction is min, disjunction is max, ``always``/``eventually``
are min/max over the sampled instants of their window, and ``until`` is the
usual max-min combination.  No interpolation happens between samples.

Grammar (ASCII, whitespace-insensitive)::

    atom     := NAME (< | <= | > | >=) NUMBER
    formula  := 'not' formula
              | 'always[a,b]' formula
              | 'eventually[a,b]' formula
              | formula 'until[a,b]' formula
              | formula 'and' formula | formula 'or' formula
              | formula '->' formula
              | '(' formula ')'

Unbounded temporal operators are rejected at parse time.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

__all__ = ["Formula", "Atom", "Not", "And", "Or", "Implies", "Always",
           "Eventually", "Until", "Trace", "parse", "robustness", "verdict",
           "ParseError"]


# ---------------------------------------------------------------------------
# AST

class Formula:
    """Base class for STL formula nodes."""

    def horizon(self) -> float:
        """Largest look-ahead (sum of nested interval upper bounds)."""
        raise NotImplementedError

    def __str__(self):
        raise NotImplementedError


@dataclass(frozen=True)
class Atom(Formula):
    signal: str
    op: str  # one of < <= > >=
    bound: float

    def __post_init__(self):
        if self.op not in ("<", "<=", ">", ">="):
            raise ValueError(f"bad comparator {self.op!r}")

    def horizon(self):
        return 0.0

    def __str__(self):
        return f"{self.signal} {self.op} {_fmt_num(self.bound)}"


@dataclass(frozen=True)
class Not(Formula):
    child: Formula

    def horizon(self):
        return self.child.horizon()

    def __str__(self):
        return f"not ({self.child})"


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula

    def horizon(self):
        return max(self.left.horizon(), self.right.horizon())

    def __str__(self):
        return f"({self.left}) and ({self.right})"


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula

    def horizon(self):
        return max(self.left.horizon(), self.right.horizon())

    def __str__(self):
        return f"({self.left}) or ({self.right})"


@dataclass(frozen=True)
class Implies(Formula):
    left: Formula
    right: Formula

    def horizon(self):
        return max(self.left.horizon(), self.right.horizon())

    def __str__(self):
        return f"({self.left}) -> ({self.right})"


def _check_interval(a, b):
    if not (0 <= a <= b):
        raise ValueError(f"malformed interval [{a}, {b}]")


@dataclass(frozen=True)
class Always(Formula):
    a: float
    b: float
    child: Formula

    def __post_init__(self):
        _check_interval(self.a, self.b)

    def horizon(self):
        return self.b + self.child.horizon()

    def __str__(self):
        return f"always[{_fmt_num(self.a)},{_fmt_num(self.b)}] ({self.child})"


@dataclass(frozen=True)
class Eventually(Formula):
    a: float
    b: float
    child: Formula

    def __post_init__(self):
        _check_interval(self.a, self.b)

    def horizon(self):
        return self.b + self.child.horizon()

    def __str__(self):
        return f"eventually[{_fmt_num(self.a)},{_fmt_num(self.b)}] ({self.child})"


@dataclass(frozen=True)
class Until(Formula):
    a: float
    b: float
    left: Formula
    right: Formula

    def __post_init__(self):
        _check_interval(self.a, self.b)

    def horizon(self):
        return self.b + max(self.left.horizon(), self.right.horizon())

    def __str__(self):
        return (f"({self.left}) until[{_fmt_num(self.a)},{_fmt_num(self.b)}] "
                f"({self.right})")


def _fmt_num(x: float) -> str:
    return repr(float(x)) if float(x) != int(x) else str(int(x))


# ---------------------------------------------------------------------------
# Traces

@dataclass(frozen=True)
class Trace:
    """Uniformly sampled multivariate record of one simulation."""

    times: np.ndarray
    channels: dict[str, np.ndarray]

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1 or len(t) < 2:
            raise ValueError("times must be a 1-D vector with >= 2 samples")
        if t[0] != 0:
            raise ValueError("times must start at 0")
        steps = np.diff(t)
        if np.any(steps <= 0):
            raise ValueError("times must be strictly increasing")
        if not np.allclose(steps, steps[0], rtol=1e-9, atol=1e-12):
            raise ValueError("sampling step must be uniform")
        chans = {}
        for name, v in self.channels.items():
            v = np.asarray(v, dtype=float)
            if v.shape != t.shape:
                raise ValueError(f"channel {name!r} length {v.shape} != times {t.shape}")
            if not np.all(np.isfinite(v)):
                raise ValueError(f"channel {name!r} contains non-finite values")
            v.setflags(write=False)
            chans[name] = v
        t.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "channels", chans)

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def end(self) -> float:
        return float(self.times[-1])

    def channel(self, name: str) -> np.ndarray:
        try:
            return self.channels[name]
        except KeyError:
            raise KeyError(f"unknown channel {name!r}; trace has {sorted(self.channels)}")


# ---------------------------------------------------------------------------
# Parsing

class ParseError(ValueError):
    """Syntax error in an STL formula, with character position."""

    def __init__(self, msg, pos):
        super().__init__(f"{msg} (at position {pos})")
        self.pos = pos


_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>-?\d+(?:\.\d+)?(?:[eE][-+]?\d+)?)"
    r"|(?P<op><=|>=|<|>|->)"
    r"|(?P<name>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<punct>[\[\](),]))"
)

_KEYWORDS = {"not", "and", "or", "always", "eventually", "until"}


def _tokenize(text):
    pos, out = 0, []
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            stripped = text[pos:].lstrip()
            if not stripped:
                break
            raise ParseError(f"unexpected character {stripped[0]!r}", pos)
        kind = m.lastgroup
        out.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    out.append(("end", "", len(text)))
    return out


class _Parser:
    def __init__(self, text):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def next(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, kind, value=None):
        k, v, p = self.next()
        if k != kind or (value is not None and v != value):
            raise ParseError(f"expected {value or kind}, got {v or 'end of input'}", p)
        return v

    def interval(self):
        self.expect("punct", "[")
        k, v, p = self.next()
        if k != "num":
            raise ParseError("expected interval lower bound", p)
        a = float(v)
        self.expect("punct", ",")
        k, v, p = self.next()
        if k != "num":
            raise ParseError("expected interval upper bound", p)
        b = float(v)
        self.expect("punct", "]")
        if not 0 <= a <= b:
            raise ParseError(f"malformed interval [{a},{b}]", p)
        return a, b

    # precedence: -> lowest, then or, and, until, unary
    def formula(self):
        lhs = self.or_expr()
        if self.peek()[:2] == ("op", "->"):
            self.next()
            return Implies(lhs, self.formula())
        return lhs

    def or_expr(self):
        lhs = self.and_expr()
        while self.peek()[:2] == ("name", "or"):
            self.next()
            lhs = Or(lhs, self.and_expr())
        return lhs

    def and_expr(self):
        lhs = self.until_expr()
        while self.peek()[:2] == ("name", "and"):
            self.next()
            lhs = And(lhs, self.until_expr())
        return lhs

    def until_expr(self):
        lhs = self.unary()
        if self.peek()[:2] == ("name", "until"):
            _, _, p = self.next()
            if self.peek()[:2] != ("punct", "["):
                raise ParseError("until requires a bounded interval", p)
            a, b = self.interval()
            return Until(a, b, lhs, self.unary())
        return lhs

    def unary(self):
        kind, value, p = self.peek()
        if kind == "name" and value == "not":
            self.next()
            return Not(self.unary())
        if kind == "name" and value in ("always", "eventually"):
            self.next()
            if self.peek()[:2] != ("punct", "["):
                raise ParseError(f"{value} requires a bounded interval", p)
            a, b = self.interval()
            node = Always if value == "always" else Eventually
            return node(a, b, self.unary())
        if kind == "punct" and value == "(":
            self.next()
            inner = self.formula()
            self.expect("punct", ")")
            return inner
        return self.atom()

    def atom(self):
        kind, name, p = self.next()
        if kind != "name" or name in _KEYWORDS:
            raise ParseError(f"expected atom, got {name or 'end of input'!r}", p)
        kind, op, p = self.next()
        if kind != "op" or op == "->":
            raise ParseError(f"expected comparator after {name!r}", p)
        kind, num, p = self.next()
        if kind != "num":
            raise ParseError(f"expected number after {name} {op}", p)
        return Atom(name, op, float(num))


def parse(text: str) -> Formula:
    """Parse an ASCII STL formula; parse(str(parse(x))) is a fixed point."""
    p = _Parser(text)
    phi = p.formula()
    kind, value, pos = p.peek()
    if kind != "end":
        raise ParseError(f"trailing input {value!r}", pos)
    return phi


# ---------------------------------------------------------------------------
# Robustness

def _window_indices(a, b, dt):
    ia = int(round(a / dt))
    ib = int(round(b / dt))
    return ia, ib


def _window_reduce(x, ia, ib, pad, reducer):
    """reducer over x[i+ia : i+ib+1] for every i, padding past the end."""
    n = len(x)
    width = ib - ia + 1
    padded = np.concatenate([x, np.full(ib + 1, pad)])
    win = np.lib.stride_tricks.sliding_window_view(padded, width)
    return reducer(win[ia : ia + n], axis=1)


def _rho(phi: Formula, trace: Trace) -> np.ndarray:
    """Robustness of phi at every sample instant (clipped past the tail)."""
    if isinstance(phi, Atom):
        s = trace.channel(phi.signal)
        if phi.op in (">", ">="):
            return s - phi.bound
        return phi.bound - s
    if isinstance(phi, Not):
        return -_rho(phi.child, trace)
    if isinstance(phi, And):
        return np.minimum(_rho(phi.left, trace), _rho(phi.right, trace))
    if isinstance(phi, Or):
        return np.maximum(_rho(phi.left, trace), _rho(phi.right, trace))
    if isinstance(phi, Implies):
        return np.maximum(-_rho(phi.left, trace), _rho(phi.right, trace))
    if isinstance(phi, Always):
        ia, ib = _window_indices(phi.a, phi.b, trace.dt)
        return _window_reduce(_rho(phi.child, trace), ia, ib, np.inf, np.min)
    if isinstance(phi, Eventually):
        ia, ib = _window_indices(phi.a, phi.b, trace.dt)
        return _window_reduce(_rho(phi.child, trace), ia, ib, -np.inf, np.max)
    if isinstance(phi, Until):
        ia, ib = _window_indices(phi.a, phi.b, trace.dt)
        rl = _rho(phi.left, trace)
        rr = _rho(phi.right, trace)
        n = len(rr)
        out = np.full(n, -np.inf)
        for i in range(n):
            best = -np.inf
            prefix = np.inf  # min of rl over [i, j), empty prefix is +inf
            for j in range(i, min(i + ib, n - 1) + 1):
                if j - i >= ia:
                    best = max(best, min(rr[j], prefix))
                prefix = min(prefix, rl[j])
            out[i] = best
        return out
    raise TypeError(f"unknown formula node {type(phi).__name__}")


def robustness(phi: Formula, trace: Trace, t0: float = 0.0) -> float:
    """Quantitative satisfaction degree of ``phi`` on ``trace`` at ``t0``.

    The trace must cover ``t0`` plus the formula's temporal horizon.
    """
    dt = trace.dt
    i0 = int(round(t0 / dt))
    if not 0 <= i0 < len(trace.times) or abs(i0 * dt - t0) > 1e-9 + 1e-6 * dt:
        raise ValueError(f"t0={t0} does not fall on a sample instant")
    if t0 + phi.horizon() > trace.end + 1e-9:
        raise ValueError(
            f"trace ends at {trace.end} but formula needs horizon "
            f"{phi.horizon()} from t0={t0}"
        )
    value = float(_rho(phi, trace)[i0])
    if not np.isfinite(value):
        raise ValueError("non-finite robustness value")
    return value


def verdict(rb: float) -> str:
    """Trace-level verdict: 'fail' iff robustness is negative, else 'pass'."""
    if not np.isfinite(rb):
        raise ValueError("robustness must be finite")
    return "fail" if rb < 0 else "pass"
