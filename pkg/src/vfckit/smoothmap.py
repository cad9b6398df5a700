"""Expression-tree smooth maps, semialgebraic regions and sampling grids.

Every section, embedding and flow in the kit is a :class:`SmoothMap` built
from a small grammar: variables, rational constants, sums, products,
non-negative integer powers and the functions sin, cos, exp, tanh.
Evaluation is exact (``fractions.Fraction``) when the inputs and the tree
allow it, and double precision otherwise.
"""
from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational

import numpy as np

KINDS = ("var", "const", "add", "mul", "pow", "sin", "cos", "exp", "tanh")
UNARY = ("sin", "cos", "exp", "tanh")

_FLOAT_FN = {"sin": math.sin, "cos": math.cos, "exp": math.exp, "tanh": math.tanh}
_NP_FN = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "tanh": np.tanh}
# value at 0 for the exact shortcut
_AT_ZERO = {"sin": Fraction(0), "cos": Fraction(1), "exp": Fraction(1), "tanh": Fraction(0)}


def to_fraction(v):
    """Exact rational for ints, Fractions, decimal strings and floats."""
    if isinstance(v, Fraction):
        return v
    if isinstance(v, (int, np.integer)):
        return Fraction(int(v))
    if isinstance(v, str):
        return Fraction(v.strip())
    if isinstance(v, (float, np.floating)):
        if not math.isfinite(v):
            raise ValueError("non-finite constant %r" % v)
        # shortest repr keeps decimal inputs like 0.1 readable and exact
        return Fraction(repr(float(v)))
    if isinstance(v, Rational):
        return Fraction(v.numerator, v.denominator)
    raise TypeError("cannot make a rational constant from %r" % (v,))


@dataclass(frozen=True, eq=True)
class Expr:
    """One node of an expression tree.

    ``kind`` is one of :data:`KINDS`; ``value`` holds the variable index, the
    rational constant or the integer exponent; ``args`` are the children.
    """

    kind: str
    args: tuple = ()
    value: object = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError("unknown node kind %r" % self.kind)
        if self.kind == "var" and (not isinstance(self.value, int) or self.value < 0):
            raise ValueError("variable index must be a non-negative int")
        if self.kind == "pow" and (not isinstance(self.value, int) or self.value < 0):
            raise ValueError("integer powers must be >= 0")

    # -- operator sugar -------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(lift(other)))

    def __rsub__(self, other):
        return add(lift(other), neg(self))

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return neg(self)

    def __pow__(self, n):
        return power(self, n)

    def __repr__(self):
        return "Expr(%s)" % to_string(self)

    @property
    def is_const(self):
        return self.kind == "const"


def var(i):
    return Expr("var", (), int(i))


def const(c):
    return Expr("const", (), to_fraction(c))


ZERO = const(0)
ONE = const(1)


def lift(e):
    return e if isinstance(e, Expr) else const(e)


def add(*terms):
    flat, c = [], Fraction(0)
    for t in terms:
        t = lift(t)
        if t.kind == "add":
            for s in t.args:
                if s.kind == "const":
                    c += s.value
                else:
                    flat.append(s)
        elif t.kind == "const":
            c += t.value
        else:
            flat.append(t)
    if c != 0 or not flat:
        flat.append(const(c))
    return flat[0] if len(flat) == 1 else Expr("add", tuple(flat))


def mul(*factors):
    flat, c = [], Fraction(1)
    for f in factors:
        f = lift(f)
        if f.kind == "mul":
            for s in f.args:
                if s.kind == "const":
                    c *= s.value
                else:
                    flat.append(s)
        elif f.kind == "const":
            c *= f.value
        else:
            flat.append(f)
    if c == 0:
        return ZERO
    if c != 1 or not flat:
        flat.insert(0, const(c))
    return flat[0] if len(flat) == 1 else Expr("mul", tuple(flat))


def neg(e):
    return mul(const(-1), e)


def power(e, n):
    e = lift(e)
    n = int(n)
    if n < 0:
        raise ValueError("integer powers must be >= 0")
    if n == 0:
        return ONE
    if n == 1:
        return e
    if e.kind == "const":
        return const(e.value ** n)
    return Expr("pow", (e,), n)


def apply_fn(name, e):
    e = lift(e)
    if e.kind == "const" and e.value == 0:
        return const(_AT_ZERO[name])
    return Expr(name, (e,))


def sin(e):
    return apply_fn("sin", e)


def cos(e):
    return apply_fn("cos", e)


def exp(e):
    return apply_fn("exp", e)


def tanh(e):
    return apply_fn("tanh", e)


# ---------------------------------------------------------------------------
# traversal helpers


def max_var(e, memo=None):
    """Largest variable index used in ``e`` (-1 for constants)."""
    memo = {} if memo is None else memo
    k = id(e)
    if k in memo:
        return memo[k]
    if e.kind == "var":
        r = e.value
    elif e.kind == "const":
        r = -1
    else:
        r = max(max_var(a, memo) for a in e.args)
    memo[k] = r
    return r


def has_transcendental(e, memo=None):
    memo = {} if memo is None else memo
    k = id(e)
    if k in memo:
        return memo[k]
    r = e.kind in UNARY or any(has_transcendental(a, memo) for a in e.args)
    memo[k] = r
    return r


def depth(e):
    if not e.args:
        return 1
    return 1 + max(depth(a) for a in e.args)


def substitute(e, repl, memo=None):
    """Replace ``var(i)`` by ``repl[i]`` everywhere in ``e``."""
    memo = {} if memo is None else memo
    k = id(e)
    if k in memo:
        return memo[k]
    if e.kind == "var":
        r = repl[e.value]
    elif e.kind == "const":
        r = e
    else:
        kids = [substitute(a, repl, memo) for a in e.args]
        if e.kind == "add":
            r = add(*kids)
        elif e.kind == "mul":
            r = mul(*kids)
        elif e.kind == "pow":
            r = power(kids[0], e.value)
        else:
            r = apply_fn(e.kind, kids[0])
    memo[k] = r
    return r


def diff(e, i, memo=None):
    """Symbolic partial derivative in variable ``i`` (used for cutoffs)."""
    memo = {} if memo is None else memo
    k = id(e)
    if k in memo:
        return memo[k]
    kind = e.kind
    if kind == "var":
        r = ONE if e.value == i else ZERO
    elif kind == "const":
        r = ZERO
    elif kind == "add":
        r = add(*[diff(a, i, memo) for a in e.args])
    elif kind == "mul":
        terms = []
        for j, a in enumerate(e.args):
            da = diff(a, i, memo)
            if da.kind == "const" and da.value == 0:
                continue
            terms.append(mul(*(e.args[:j] + (da,) + e.args[j + 1:])))
        r = add(*terms) if terms else ZERO
    elif kind == "pow":
        a = e.args[0]
        r = mul(const(e.value), power(a, e.value - 1), diff(a, i, memo))
    else:
        a = e.args[0]
        da = diff(a, i, memo)
        if kind == "sin":
            outer = cos(a)
        elif kind == "cos":
            outer = neg(sin(a))
        elif kind == "exp":
            outer = e
        else:
            outer = add(ONE, neg(power(e, 2)))
        r = mul(outer, da)
    memo[k] = r
    return r


# ---------------------------------------------------------------------------
# evaluation


def _is_exact(v):
    return isinstance(v, (int, Fraction)) and not isinstance(v, bool)


def eval_expr(e, x, memo=None):
    """Evaluate at a single point; exact when everything is rational."""
    memo = {} if memo is None else memo
    k = id(e)
    if k in memo:
        return memo[k]
    kind = e.kind
    if kind == "var":
        r = x[e.value]
    elif kind == "const":
        r = e.value
    elif kind == "add":
        r = 0
        for a in e.args:
            r = r + eval_expr(a, x, memo)
    elif kind == "mul":
        r = 1
        for a in e.args:
            r = r * eval_expr(a, x, memo)
    elif kind == "pow":
        r = eval_expr(e.args[0], x, memo) ** e.value
    else:
        a = eval_expr(e.args[0], x, memo)
        if _is_exact(a) and a == 0:
            r = _AT_ZERO[kind]
        else:
            r = _FLOAT_FN[kind](float(a))
    if isinstance(r, Fraction) or _is_exact(r):
        pass
    memo[k] = r
    return r


def eval_array(e, X, memo=None):
    """Vectorized float evaluation over the rows of ``X`` (shape N x m)."""
    memo = {} if memo is None else memo
    k = id(e)
    if k in memo:
        return memo[k]
    kind = e.kind
    if kind == "var":
        r = X[:, e.value]
    elif kind == "const":
        r = np.full(X.shape[0], float(e.value))
    elif kind == "add":
        r = eval_array(e.args[0], X, memo).copy()
        for a in e.args[1:]:
            r = r + eval_array(a, X, memo)
    elif kind == "mul":
        r = eval_array(e.args[0], X, memo).copy()
        for a in e.args[1:]:
            r = r * eval_array(a, X, memo)
    elif kind == "pow":
        r = eval_array(e.args[0], X, memo) ** e.value
    else:
        r = _NP_FN[kind](eval_array(e.args[0], X, memo))
    memo[k] = r
    return r


def dual_array(e, X, memo=None):
    """Forward-mode value and gradient over the rows of ``X``.

    Returns ``(val, grad)`` with shapes (N,) and (N, m).
    """
    memo = {} if memo is None else memo
    k = id(e)
    if k in memo:
        return memo[k]
    n, m = X.shape
    kind = e.kind
    if kind == "var":
        g = np.zeros((n, m))
        g[:, e.value] = 1.0
        r = (X[:, e.value], g)
    elif kind == "const":
        r = (np.full(n, float(e.value)), np.zeros((n, m)))
    elif kind == "add":
        v, g = dual_array(e.args[0], X, memo)
        v, g = v.copy(), g.copy()
        for a in e.args[1:]:
            va, ga = dual_array(a, X, memo)
            v = v + va
            g = g + ga
        r = (v, g)
    elif kind == "mul":
        v, g = dual_array(e.args[0], X, memo)
        for a in e.args[1:]:
            va, ga = dual_array(a, X, memo)
            g = g * va[:, None] + ga * v[:, None]
            v = v * va
        r = (v, g)
    elif kind == "pow":
        va, ga = dual_array(e.args[0], X, memo)
        p = e.value
        r = (va ** p, (p * va ** (p - 1))[:, None] * ga)
    else:
        va, ga = dual_array(e.args[0], X, memo)
        if kind == "sin":
            v, d = np.sin(va), np.cos(va)
        elif kind == "cos":
            v, d = np.cos(va), -np.sin(va)
        elif kind == "exp":
            v = np.exp(va)
            d = v
        else:
            v = np.tanh(va)
            d = 1.0 - v * v
        r = (v, d[:, None] * ga)
    memo[k] = r
    return r


def dual_exact(e, x, memo=None):
    """Forward-mode value and gradient at one point, exact if possible."""
    memo = {} if memo is None else memo
    k = id(e)
    if k in memo:
        return memo[k]
    m = len(x)
    kind = e.kind
    if kind == "var":
        g = [0] * m
        g[e.value] = 1
        r = (x[e.value], g)
    elif kind == "const":
        r = (e.value, [0] * m)
    elif kind == "add":
        v, g = 0, [0] * m
        for a in e.args:
            va, ga = dual_exact(a, x, memo)
            v = v + va
            g = [gi + gj for gi, gj in zip(g, ga)]
        r = (v, g)
    elif kind == "mul":
        v, g = 1, [0] * m
        for a in e.args:
            va, ga = dual_exact(a, x, memo)
            g = [gi * va + gj * v for gi, gj in zip(g, ga)]
            v = v * va
        r = (v, g)
    elif kind == "pow":
        va, ga = dual_exact(e.args[0], x, memo)
        p = e.value
        d = p * va ** (p - 1)
        r = (va ** p, [d * gi for gi in ga])
    else:
        va, ga = dual_exact(e.args[0], x, memo)
        if _is_exact(va) and va == 0:
            v = _AT_ZERO[kind]
            d = {"sin": 1, "cos": 0, "exp": 1, "tanh": 1}[kind]
        else:
            f = float(va)
            if kind == "sin":
                v, d = math.sin(f), math.cos(f)
            elif kind == "cos":
                v, d = math.cos(f), -math.sin(f)
            elif kind == "exp":
                v = math.exp(f)
                d = v
            else:
                v = math.tanh(f)
                d = 1.0 - v * v
        r = (v, [d * gi for gi in ga])
    memo[k] = r
    return r


# ---------------------------------------------------------------------------
# smooth maps


class SmoothMap:
    """A map R^m -> R^n given by n expression components."""

    def __init__(self, arity, components):
        comps = tuple(lift(c) for c in components)
        self.arity = int(arity)
        self.components = comps
        memo = {}
        for c in comps:
            if max_var(c, memo) >= self.arity:
                raise ValueError("variable index exceeds declared arity %d" % self.arity)

    @property
    def coarity(self):
        return len(self.components)

    def __len__(self):
        return len(self.components)

    def __eq__(self, other):
        return (isinstance(other, SmoothMap) and self.arity == other.arity
                and self.components == other.components)

    def __hash__(self):
        return hash((self.arity, self.components))

    def __repr__(self):
        return "SmoothMap(%d -> %d: [%s])" % (
            self.arity, self.coarity, ", ".join(to_string(c) for c in self.components))

    def _check(self, x):
        if len(x) != self.arity:
            raise ValueError("arity mismatch: map takes %d inputs, got %d" % (self.arity, len(x)))

    def __call__(self, x):
        return eval_map(self, x)

    def eval_array(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.arity:
            raise ValueError("arity mismatch: map takes %d inputs, got %d" % (self.arity, X.shape[1]))
        memo = {}
        out = np.empty((X.shape[0], self.coarity))
        for j, c in enumerate(self.components):
            out[:, j] = eval_array(c, X, memo)
        return out

    def jacobian_array(self, X):
        """Jacobians at the rows of X, shape (N, n, m)."""
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.arity:
            raise ValueError("arity mismatch")
        memo = {}
        out = np.empty((X.shape[0], self.coarity, self.arity))
        for j, c in enumerate(self.components):
            out[:, j, :] = dual_array(c, X, memo)[1]
        return out

    def strings(self):
        return [to_string(c) for c in self.components]


def identity_map(m):
    return SmoothMap(m, [var(i) for i in range(m)])


def constant_map(m, values):
    return SmoothMap(m, [const(v) for v in values])


def linear_map(matrix, offset=None):
    """x -> A x + b with rational coefficients."""
    A = [[to_fraction(a) for a in row] for row in matrix]
    m = len(A[0]) if A else 0
    b = [0] * len(A) if offset is None else list(offset)
    comps = []
    for row, bi in zip(A, b):
        comps.append(add(*[mul(const(a), var(j)) for j, a in enumerate(row) if a != 0], const(bi)))
    return SmoothMap(m, comps)


def _prep_point(x):
    out = []
    for v in x:
        if isinstance(v, (np.floating, float)):
            out.append(float(v))
        elif isinstance(v, (np.integer, int)):
            out.append(int(v))
        else:
            out.append(v)
    return out


def eval_map(f, x):
    """Evaluate ``f`` at ``x``; exact for rational inputs on rational trees."""
    x = _prep_point(list(x))
    f._check(x)
    memo = {}
    return tuple(eval_expr(c, x, memo) for c in f.components)


def jacobian(f, x):
    """n x m Jacobian by forward-mode differentiation of the tree."""
    x = _prep_point(list(x))
    f._check(x)
    memo = {}
    rows = [dual_exact(c, x, memo)[1] for c in f.components]
    if all(_is_exact(v) for row in rows for v in row):
        return [list(r) for r in rows]
    return np.array([[float(v) for v in r] for r in rows]).reshape(f.coarity, f.arity)


def compose(f, g):
    """The map x -> f(g(x))."""
    if g.coarity != f.arity:
        raise ValueError("arity mismatch: cannot compose %d-input map after %d-output map"
                         % (f.arity, g.coarity))
    memo = {}
    return SmoothMap(g.arity, [substitute(c, g.components, memo) for c in f.components])


def stack(*maps):
    """Concatenate the components of maps with a common arity."""
    m = maps[0].arity
    if any(h.arity != m for h in maps):
        raise ValueError("arity mismatch")
    return SmoothMap(m, [c for h in maps for c in h.components])


# ---------------------------------------------------------------------------
# printing and parsing

_PREC = {"add": 1, "mul": 2, "neg": 2, "pow": 4}


def _const_str(q):
    if q.denominator == 1:
        return str(q.numerator)
    return "%d/%d" % (q.numerator, q.denominator)


def to_string(e):
    """Infix text that :func:`parse_expr` reads back to an equal tree."""
    return _fmt(e)[0]


def _fmt(e):
    kind = e.kind
    if kind == "var":
        return "x%d" % e.value, 5
    if kind == "const":
        q = e.value
        s = _const_str(q)
        if q < 0 or q.denominator != 1:
            return "(%s)" % s, 5
        return s, 5
    if kind == "add":
        parts = []
        for a in e.args:
            s, p = _fmt(a)
            parts.append(s if p > 1 else "(%s)" % s)
        return " + ".join(parts), 1
    if kind == "mul":
        parts = []
        for a in e.args:
            s, p = _fmt(a)
            parts.append(s if p > 2 else "(%s)" % s)
        return "*".join(parts), 2
    if kind == "pow":
        s, p = _fmt(e.args[0])
        if p < 5:
            s = "(%s)" % s
        return "%s^%d" % (s, e.value), 4
    return "%s(%s)" % (kind, _fmt(e.args[0])[0]), 5


_TOKEN = re.compile(r"\s*(?:(?P<num>\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
                    r"|(?P<var>x\d+)|(?P<fn>sin|cos|exp|tanh)|(?P<op>[-+*^/()]))")


class ParseError(ValueError):
    pass


def _tokenize(text):
    pos, out = 0, []
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ParseError("unexpected input at %d in %r" % (pos, text))
        pos = m.end()
        kind = m.lastgroup
        out.append((kind, m.group(kind)))
    out.append(("end", None))
    return out


class _Parser:
    def __init__(self, text, arity):
        self.toks = _tokenize(text)
        self.i = 0
        self.arity = arity
        self.text = text

    def peek(self):
        return self.toks[self.i]

    def take(self, kind=None, val=None):
        t = self.toks[self.i]
        if (kind and t[0] != kind) or (val and t[1] != val):
            raise ParseError("expected %s in %r" % (val or kind, self.text))
        self.i += 1
        return t

    def expr(self):
        terms = [self.term()]
        while self.peek() in (("op", "+"), ("op", "-")):
            op = self.take()[1]
            t = self.term()
            terms.append(t if op == "+" else neg(t))
        return add(*terms) if len(terms) > 1 else terms[0]

    def term(self):
        fs = [self.unary()]
        while self.peek() == ("op", "*"):
            self.take()
            fs.append(self.unary())
        return mul(*fs) if len(fs) > 1 else fs[0]

    def unary(self):
        if self.peek() == ("op", "-"):
            self.take()
            return neg(self.unary())
        if self.peek() == ("op", "+"):
            self.take()
            return self.unary()
        return self.powered()

    def powered(self):
        base = self.primary()
        if self.peek() == ("op", "^"):
            self.take()
            kind, tok = self.take()
            if kind != "num" or not tok.isdigit():
                raise ParseError("exponent must be a non-negative integer literal in %r" % self.text)
            return power(base, int(tok))
        return base

    def primary(self):
        kind, tok = self.peek()
        if kind == "num":
            self.take()
            q = Fraction(tok)
            if self.peek() == ("op", "/"):
                self.take()
                k2, t2 = self.take()
                if k2 != "num":
                    raise ParseError("division is only allowed between literals in %r" % self.text)
                q = q / Fraction(t2)
            return const(q)
        if kind == "var":
            self.take()
            idx = int(tok[1:])
            if self.arity is not None and idx >= self.arity:
                raise ParseError("variable %s exceeds arity %d" % (tok, self.arity))
            return var(idx)
        if kind == "fn":
            self.take()
            self.take("op", "(")
            inner = self.expr()
            self.take("op", ")")
            return apply_fn(tok, inner)
        if (kind, tok) == ("op", "("):
            self.take()
            inner = self.expr()
            self.take("op", ")")
            return inner
        raise ParseError("unexpected token %r in %r" % (tok, self.text))


def parse_expr(text, arity=None):
    if not isinstance(text, str):
        raise ParseError("expression must be a string, got %r" % (text,))
    p = _Parser(text, arity)
    e = p.expr()
    if p.peek()[0] != "end":
        raise ParseError("trailing input in %r" % text)
    return e


def parse_map(texts, arity):
    return SmoothMap(arity, [parse_expr(t, arity) for t in texts])


# ---------------------------------------------------------------------------
# regions


class Region:
    """Closed box intersected with polynomial constraints ``g <= 0``.

    Constraints flagged open mean ``g < 0``.  ``periodic`` lists axes that are
    angle coordinates with period ``upper - lower``.
    """

    def __init__(self, lower, upper, constraints=(), periodic=()):
        if len(lower) != len(upper):
            raise ValueError("box bounds have different lengths")
        self.lower = tuple(to_fraction(v) for v in lower)
        self.upper = tuple(to_fraction(v) for v in upper)
        cons = []
        for c in constraints:
            if isinstance(c, Expr):
                c = (c, False)
            g, is_open = c
            g = parse_expr(g, len(self.lower)) if isinstance(g, str) else lift(g)
            if max_var(g) >= len(self.lower):
                raise ValueError("constraint uses a variable beyond the ambient dimension")
            cons.append((g, bool(is_open)))
        self.periodic = tuple(sorted(int(a) for a in periodic))
        kept = []
        for c in cons:
            if c in kept or (c[0], False) in kept and c[1] is False:
                continue
            if (c[0], not c[1]) in kept:
                # the open version is stronger
                kept = [k for k in kept if k[0] != c[0]] + [(c[0], True)]
                continue
            if _implied_by_box(c[0], c[1], self.lower, self.upper, self.periodic):
                continue
            kept.append(c)
        self.constraints = tuple(kept)

    @property
    def dim(self):
        return len(self.lower)

    def __repr__(self):
        return "Region(%s x %s, %d constraints)" % (
            [str(v) for v in self.lower], [str(v) for v in self.upper], len(self.constraints))

    def __eq__(self, other):
        return (isinstance(other, Region) and self.lower == other.lower and self.upper == other.upper
                and self.constraints == other.constraints and self.periodic == other.periodic)

    def __hash__(self):
        return hash((self.lower, self.upper, self.constraints, self.periodic))

    @property
    def is_compact(self):
        return not any(o for _, o in self.constraints)

    @property
    def is_empty_box(self):
        return any(lo > hi for lo, hi in zip(self.lower, self.upper))

    def periods(self):
        return {a: float(self.upper[a] - self.lower[a]) for a in self.periodic}

    def wrap(self, X):
        """Reduce periodic coordinates into [lower, upper)."""
        X = np.array(X, dtype=float, copy=True)
        for a, per in self.periods().items():
            lo = float(self.lower[a])
            X[..., a] = lo + np.mod(X[..., a] - lo, per)
        return X

    def constraint_values(self, X):
        X = np.asarray(X, dtype=float)
        if not self.constraints:
            return np.zeros((X.shape[0], 0))
        memo = {}
        return np.stack([eval_array(g, X, memo) for g, _ in self.constraints], axis=1)

    def mask(self, X, tol=1e-12, closure=False):
        """Membership of each row; open constraints become closed if ``closure``."""
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        lo = np.array([float(v) for v in self.lower])
        hi = np.array([float(v) for v in self.upper])
        ok = np.all((X >= lo - tol) & (X <= hi + tol), axis=1)
        if self.constraints and ok.any():
            vals = self.constraint_values(X)
            for j, (_, is_open) in enumerate(self.constraints):
                if is_open and not closure:
                    ok &= vals[:, j] < -tol
                else:
                    ok &= vals[:, j] <= tol
        return ok

    def contains(self, x, tol=1e-12, closure=False):
        return bool(self.mask(np.asarray(x, dtype=float)[None, :], tol, closure)[0])

    def contains_exact(self, x):
        """Exact membership for rational points on polynomial constraints."""
        x = [to_fraction(v) for v in x]
        if any(v < lo or v > hi for v, lo, hi in zip(x, self.lower, self.upper)):
            return False
        for g, is_open in self.constraints:
            val = eval_expr(g, x)
            if (is_open and not val < 0) or (not is_open and not val <= 0):
                return False
        return True

    # -- constructions --------------------------------------------------
    def with_constraints(self, extra):
        return Region(self.lower, self.upper, self.constraints + tuple(
            (c, False) if isinstance(c, Expr) else c for c in extra), self.periodic)

    def intersect(self, other):
        if other.dim != self.dim:
            raise ValueError("dimension mismatch")
        lo = [max(a, b) for a, b in zip(self.lower, other.lower)]
        hi = [min(a, b) for a, b in zip(self.upper, other.upper)]
        return Region(lo, hi, self.constraints + other.constraints,
                      sorted(set(self.periodic) | set(other.periodic)))

    def tightened(self, margin):
        """Shift every constraint by ``margin`` (g + margin <= 0)."""
        if margin == 0:
            return self
        cons = [(add(g, const(margin)), o) for g, o in self.constraints]
        return Region(self.lower, self.upper, cons, self.periodic)

    def shrunk_box(self, margin):
        """Move every non-periodic box face inward by ``margin``."""
        m = to_fraction(margin)
        lo = [v if a in self.periodic else v + m for a, v in enumerate(self.lower)]
        hi = [v if a in self.periodic else v - m for a, v in enumerate(self.upper)]
        return Region(lo, hi, self.constraints, self.periodic)

    def pullback(self, f, box_lower, box_upper, periodic=()):
        """The set ``{x in box : f(x) in self}`` as a region on the source box."""
        cons = [(substitute(g, f.components), o) for g, o in self.constraints]
        for a in range(self.dim):
            if a in self.periodic:
                continue
            fa = f.components[a]
            cons.append((add(const(self.lower[a]), neg(fa)), False))
            cons.append((add(fa, const(-self.upper[a])), False))
        # drop constraints that are constant and satisfied
        kept = []
        for g, o in cons:
            if g.kind == "const" and ((o and g.value < 0) or (not o and g.value <= 0)):
                continue
            kept.append((g, o))
        return Region(box_lower, box_upper, kept, periodic)

    def closure(self):
        return Region(self.lower, self.upper, [(g, False) for g, _ in self.constraints], self.periodic)

    # -- serialization --------------------------------------------------
    def to_json(self):
        d = {"lower": [_num_json(v) for v in self.lower],
             "upper": [_num_json(v) for v in self.upper],
             "constraints": [{"expr": to_string(g), "open": o} for g, o in self.constraints]}
        if self.periodic:
            d["periodic"] = list(self.periodic)
        return d

    @classmethod
    def from_json(cls, d, dim=None):
        allowed = {"lower", "upper", "constraints", "periodic"}
        extra = set(d) - allowed
        if extra:
            raise ParseError("unknown region keys %s" % sorted(extra))
        lo, hi = d["lower"], d["upper"]
        if dim is not None and (len(lo) != dim or len(hi) != dim):
            raise ParseError("region box has wrong dimension")
        cons = []
        for c in d.get("constraints", []):
            if isinstance(c, str):
                cons.append((parse_expr(c, len(lo)), False))
            else:
                if set(c) - {"expr", "open"}:
                    raise ParseError("unknown constraint keys %s" % sorted(set(c) - {"expr", "open"}))
                cons.append((parse_expr(c["expr"], len(lo)), bool(c.get("open", False))))
        return cls(lo, hi, cons, d.get("periodic", ()))


def _num_json(q):
    q = to_fraction(q)
    if q.denominator == 1:
        return q.numerator
    f = float(q)
    if to_fraction(f) == q:
        return f
    return "%d/%d" % (q.numerator, q.denominator)


def _implied_by_box(g, is_open, lower, upper, periodic):
    # affine constraints whose maximum over the box corners already satisfies them
    if has_transcendental(g) or any(lo > hi for lo, hi in zip(lower, upper)):
        return False
    n = len(lower)
    for i in range(n):
        d = diff(g, i)
        if d.kind != "const":
            return False
        if i in periodic and d.value != 0:
            return False
    worst = max(eval_expr(g, list(c)) for c in itertools.product(*zip(lower, upper))) if n else eval_expr(g, [])
    return worst < 0 if is_open else worst <= 0


def box(lower, upper, constraints=(), periodic=()):
    return Region(lower, upper, constraints, periodic)


def grid_axes(region, resolution):
    """Exact rational grid coordinates along each axis."""
    r = int(resolution)
    if r < 1:
        raise ValueError("resolution must be positive")
    axes = []
    for a, (lo, hi) in enumerate(zip(region.lower, region.upper)):
        if a in region.periodic:
            # periodic axes: drop the duplicated endpoint
            axes.append([lo + (hi - lo) * Fraction(i, r) for i in range(r)])
        elif r == 1:
            axes.append([(lo + hi) / 2])
        else:
            axes.append([lo + (hi - lo) * Fraction(i, r - 1) for i in range(r)])
    return axes


def sample_grid(region, resolution, boundary_probe=None):
    """Deterministic regular grid of the box, filtered by the constraints.

    Returns an array of shape (N, dim).  With ``boundary_probe = eta`` grid
    points that only fail an open constraint on its boundary are pushed
    inward by ``eta`` along the constraint gradient, so that boundary
    approach is visible to sampled checks.
    """
    if any(not math.isfinite(float(v)) for v in region.lower + region.upper):
        raise ValueError("sample_grid needs a bounded box")
    if region.is_empty_box or region.dim == 0:
        if region.dim == 0 and not region.is_empty_box:
            return np.zeros((1, 0))
        return np.zeros((0, region.dim))
    axes = grid_axes(region, resolution)
    pts = np.array(list(itertools.product(*[[float(v) for v in ax] for ax in axes])), dtype=float)
    keep = region.mask(pts)
    if boundary_probe and region.constraints:
        near = region.mask(pts, closure=True) & ~keep
        if near.any():
            moved = pts[near].copy()
            for j, (g, is_open) in enumerate(region.constraints):
                if not is_open:
                    continue
                vals, grads = dual_array(g, moved)
                hit = vals > -1e-12
                nrm = np.linalg.norm(grads, axis=1)
                step = np.where(nrm > 0, boundary_probe / np.maximum(nrm, 1e-300), 0.0)
                moved[hit] -= (step[:, None] * grads)[hit]
            ok = region.mask(moved)
            pts = np.vstack([pts[keep], moved[ok]])
            return pts
    return pts[keep]
