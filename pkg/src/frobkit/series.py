"""Exact truncated multivariate power series and matrices of them.

A TruncSeries is a polynomial with Fraction coefficients, known to be
correct up to a stated total-degree bound ``order``; everything of higher
degree has been discarded.  All arithmetic is exact on the retained part.
Matrices of series share one variable context and one order bound and are
the carriers for connection and Higgs data everywhere else in the package.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Mapping, Sequence

__all__ = [
    "Frac",
    "TruncSeries",
    "SeriesMatrix",
    "frac_from_str",
    "frac_to_str",
]

Frac = Fraction


def frac_from_str(s) -> Fraction:
    """Parse "num/den" (or a bare integer string / int) into a Fraction."""
    if isinstance(s, int):
        return Fraction(s)
    return Fraction(str(s))


def frac_to_str(x: Fraction) -> str:
    """Canonical "num/den" encoding, denominator always present."""
    return "%d/%d" % (x.numerator, x.denominator)


class SeriesError(ValueError):
    """Structural misuse: variable mismatch, unknown variable, bad shape."""


def _as_frac(c) -> Fraction:
    if isinstance(c, Fraction):
        return c
    if isinstance(c, int):
        return Fraction(c)
    raise SeriesError("coefficient must be an int or Fraction, got %r" % (c,))


class TruncSeries:
    """Formal power series in ``vars``, truncated at total degree ``order``.

    terms maps exponent tuples (one entry per variable) to nonzero
    Fractions; every stored exponent tuple has total degree <= order.
    Instances are immutable; all operations return new objects.
    """

    __slots__ = ("vars", "order", "terms")

    def __init__(self, vars: Sequence[str], order: int,
                 terms: Mapping[tuple, Fraction] | None = None):
        if order < 0:
            raise SeriesError("order bound must be >= 0")
        vars = tuple(vars)
        if len(set(vars)) != len(vars):
            raise SeriesError("duplicate variable names: %r" % (vars,))
        clean = {}
        if terms:
            nv = len(vars)
            for e, c in terms.items():
                e = tuple(e)
                if len(e) != nv or any(k < 0 for k in e):
                    raise SeriesError("bad exponent tuple %r for %d vars" % (e, nv))
                if sum(e) > order:
                    continue
                c = _as_frac(c)
                if c != 0:
                    clean[e] = c
        object.__setattr__(self, "vars", vars)
        object.__setattr__(self, "order", order)
        object.__setattr__(self, "terms", clean)

    def __setattr__(self, *a):
        raise AttributeError("TruncSeries is immutable")

    # -- constructors ------------------------------------------------------

    @classmethod
    def zero(cls, vars, order):
        return cls(vars, order)

    @classmethod
    def const(cls, vars, order, c):
        vars = tuple(vars)
        return cls(vars, order, {(0,) * len(vars): _as_frac(c)})

    @classmethod
    def one(cls, vars, order):
        return cls.const(vars, order, 1)

    @classmethod
    def var(cls, vars, order, name):
        vars = tuple(vars)
        if name not in vars:
            raise SeriesError("unknown variable %r" % name)
        e = [0] * len(vars)
        e[vars.index(name)] = 1
        return cls(vars, order, {tuple(e): Fraction(1)})

    # -- basics ------------------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    @property
    def constant_term(self) -> Fraction:
        return self.terms.get((0,) * len(self.vars), Fraction(0))

    def is_constant(self) -> bool:
        return all(sum(e) == 0 for e in self.terms)

    def __eq__(self, other):
        if not isinstance(other, TruncSeries):
            return NotImplemented
        return (self.vars == other.vars and self.order == other.order
                and self.terms == other.terms)

    def __hash__(self):
        return hash((self.vars, self.order, frozenset(self.terms.items())))

    def __repr__(self):
        if not self.terms:
            return "<0 (order %d)>" % self.order
        bits = []
        for e in sorted(self.terms):
            mono = "*".join("%s^%d" % (v, k) for v, k in zip(self.vars, e) if k)
            c = self.terms[e]
            bits.append(("%s*%s" % (c, mono)) if mono else str(c))
        return "<" + " + ".join(bits) + " (order %d)>" % self.order

    def _like(self, other: "TruncSeries"):
        if self.vars != other.vars:
            raise SeriesError("variable lists differ: %r vs %r"
                              % (self.vars, other.vars))

    # -- ring operations ---------------------------------------------------
    # Binary operations align to the smaller order bound: the result is
    # only trustworthy where both inputs are.

    def __add__(self, other):
        if isinstance(other, (int, Fraction)):
            other = TruncSeries.const(self.vars, self.order, other)
        if not isinstance(other, TruncSeries):
            return NotImplemented
        self._like(other)
        order = min(self.order, other.order)
        terms = dict()
        for e, c in self.terms.items():
            if sum(e) <= order:
                terms[e] = c
        for e, c in other.terms.items():
            if sum(e) > order:
                continue
            s = terms.get(e, Fraction(0)) + c
            if s:
                terms[e] = s
            else:
                terms.pop(e, None)
        return TruncSeries(self.vars, order, terms)

    __radd__ = __add__

    def __neg__(self):
        return TruncSeries(self.vars, self.order,
                           {e: -c for e, c in self.terms.items()})

    def __sub__(self, other):
        if isinstance(other, (int, Fraction)):
            other = TruncSeries.const(self.vars, self.order, other)
        if not isinstance(other, TruncSeries):
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            c = _as_frac(other)
            if c == 0:
                return TruncSeries(self.vars, self.order)
            return TruncSeries(self.vars, self.order,
                               {e: c * v for e, v in self.terms.items()})
        if not isinstance(other, TruncSeries):
            return NotImplemented
        self._like(other)
        order = min(self.order, other.order)
        terms: dict = {}
        for e1, c1 in self.terms.items():
            d1 = sum(e1)
            if d1 > order:
                continue
            for e2, c2 in other.terms.items():
                if d1 + sum(e2) > order:
                    continue
                e = tuple(a + b for a, b in zip(e1, e2))
                s = terms.get(e, Fraction(0)) + c1 * c2
                if s:
                    terms[e] = s
                else:
                    del terms[e]
        return TruncSeries(self.vars, order, terms)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            raise SeriesError("exponent must be a non-negative int")
        out = TruncSeries.one(self.vars, self.order)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def inverse(self) -> "TruncSeries":
        """Multiplicative inverse; requires a nonzero constant term."""
        c0 = self.constant_term
        if c0 == 0:
            raise SeriesError("series is not a unit (zero constant term)")
        inv_c0 = 1 / c0
        # Newton-free iteration: u_{k+1} picks up one degree per step.
        rest = self - c0
        out = TruncSeries.const(self.vars, self.order, inv_c0)
        power = TruncSeries.one(self.vars, self.order)
        sign = -1
        for _ in range(self.order):
            power = power * rest
            if power.is_zero():
                break
            out = out + power * (sign * inv_c0 ** (_ + 2))
            sign = -sign
        return out

    # -- calculus and structural maps --------------------------------------

    def partial(self, name: str) -> "TruncSeries":
        """Formal d/d(name).  The result bound drops to order-1."""
        if name not in self.vars:
            raise SeriesError("unknown variable %r" % name)
        i = self.vars.index(name)
        if self.order == 0:
            raise SeriesError("cannot differentiate a series of order 0")
        terms = {}
        for e, c in self.terms.items():
            if e[i] == 0:
                continue
            e2 = e[:i] + (e[i] - 1,) + e[i + 1:]
            terms[e2] = terms.get(e2, Fraction(0)) + c * e[i]
        return TruncSeries(self.vars, self.order - 1, terms)

    def mul_var(self, name: str) -> "TruncSeries":
        """Multiply by a variable, raising the order bound by 1.

        Multiplication by an exact degree-1 monomial turns degree<=k
        information into degree<=k+1 information, so the bound may grow.
        """
        if name not in self.vars:
            raise SeriesError("unknown variable %r" % name)
        i = self.vars.index(name)
        terms = {e[:i] + (e[i] + 1,) + e[i + 1:]: c for e, c in self.terms.items()}
        return TruncSeries(self.vars, self.order + 1, terms)

    def restrict_zero(self, names: Iterable[str]) -> "TruncSeries":
        """Set the listed variables to 0 and remove them from the context."""
        names = list(names)
        for nm in names:
            if nm not in self.vars:
                raise SeriesError("unknown variable %r" % nm)
        drop = [self.vars.index(nm) for nm in names]
        keep = [i for i in range(len(self.vars)) if i not in drop]
        new_vars = tuple(self.vars[i] for i in keep)
        terms = {}
        for e, c in self.terms.items():
            if any(e[i] for i in drop):
                continue
            terms[tuple(e[i] for i in keep)] = c
        return TruncSeries(new_vars, self.order, terms)

    def extend(self, new_vars: Sequence[str]) -> "TruncSeries":
        """Reinterpret in a larger (or reordered) variable context."""
        new_vars = tuple(new_vars)
        pos = []
        for v in self.vars:
            if v not in new_vars:
                raise SeriesError("variable %r missing from new context" % v)
            pos.append(new_vars.index(v))
        terms = {}
        for e, c in self.terms.items():
            e2 = [0] * len(new_vars)
            for p, k in zip(pos, e):
                e2[p] = k
            terms[tuple(e2)] = c
        return TruncSeries(new_vars, self.order, terms)

    def truncate(self, order: int) -> "TruncSeries":
        if order >= self.order:
            if order == self.order:
                return self
            raise SeriesError("cannot raise the order bound by truncation")
        return TruncSeries(self.vars, order, self.terms)

    def graded_part(self, degree: int, names: Iterable[str] | None = None,
                    weights: Mapping[str, int] | None = None) -> "TruncSeries":
        """Terms whose (weighted) degree in the listed variables equals degree.

        With names=None the total degree over all variables is used; weights
        maps variable name to a positive integer weight (default 1).
        """
        if names is None:
            idx = range(len(self.vars))
        else:
            idx = [self.vars.index(nm) for nm in names]
        wt = {}
        for i in idx:
            wt[i] = 1 if not weights else weights.get(self.vars[i], 1)
        terms = {e: c for e, c in self.terms.items()
                 if sum(e[i] * wt[i] for i in wt) == degree}
        return TruncSeries(self.vars, self.order, terms)

    def weighted_degrees(self, weights: Mapping[str, int]) -> set:
        """Set of weighted degrees of the stored monomials."""
        wt = [weights.get(v, 0) for v in self.vars]
        return {sum(k * w for k, w in zip(e, wt)) for e in self.terms}

    def compose(self, mapping: Mapping[str, "TruncSeries"]) -> "TruncSeries":
        """Substitute a series (with zero constant term) for every variable.

        All images must share one variable context and order; the result
        lives in that context.
        """
        images = [mapping[v] for v in self.vars]
        if not images:
            raise SeriesError("composition needs at least one variable")
        ctx = images[0].vars
        order = min(im.order for im in images)
        for im in images:
            if im.vars != ctx:
                raise SeriesError("composition images disagree on context")
            if im.constant_term != 0:
                raise SeriesError("composition image has nonzero constant term")
        out = TruncSeries(ctx, order)
        pow_cache: list[dict[int, TruncSeries]] = [dict() for _ in images]

        def power(i, k):
            cache = pow_cache[i]
            if k not in cache:
                if k == 0:
                    cache[k] = TruncSeries.one(ctx, order)
                else:
                    cache[k] = power(i, k - 1) * images[i]
            return cache[k]

        for e, c in self.terms.items():
            term = TruncSeries.const(ctx, order, c)
            for i, k in enumerate(e):
                if k:
                    term = term * power(i, k)
            out = out + term
        return out

    # -- serialization -----------------------------------------------------

    def to_json(self) -> dict:
        return {
            "vars": list(self.vars),
            "order": self.order,
            "terms": [[list(e), frac_to_str(self.terms[e])]
                      for e in sorted(self.terms)],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "TruncSeries":
        terms = {tuple(e): frac_from_str(c) for e, c in obj.get("terms", [])}
        return cls(obj["vars"], obj["order"], terms)


def euler_integrate(partials: Mapping[str, TruncSeries],
                    names: Sequence[str] | None = None) -> TruncSeries:
    """The unique F with F(0)=0 and dF/d(name) = partials[name].

    Termwise radial integration; callers must guarantee closedness of the
    given one-form (mixed partials of the result are asserted elsewhere).
    When ``names`` covers only part of the context, the remaining variables
    are treated as constants and F is the part vanishing at names=0.
    """
    if not partials:
        raise SeriesError("nothing to integrate")
    some = next(iter(partials.values()))
    ctx = some.vars
    order = min(p.order for p in partials.values())
    if names is None:
        names = list(partials)
    idx = {nm: ctx.index(nm) for nm in names}
    terms: dict = {}
    for nm, p in partials.items():
        if p.vars != ctx:
            raise SeriesError("partials disagree on variable context")
        i = idx[nm]
        for e, c in p.terms.items():
            if sum(e) > order:
                continue
            e2 = e[:i] + (e[i] + 1,) + e[i + 1:]
            d = sum(e2[idx[n]] for n in names)
            terms[e2] = terms.get(e2, Fraction(0)) + c / d
    return TruncSeries(ctx, order + 1, terms)


class SeriesMatrix:
    """Rectangular matrix of TruncSeries sharing one context and bound."""

    __slots__ = ("rows", "cols", "vars", "order", "entries")

    def __init__(self, entries: Sequence[Sequence[TruncSeries]]):
        entries = [list(row) for row in entries]
        if not entries or not entries[0]:
            raise SeriesError("matrix must be nonempty")
        rows, cols = len(entries), len(entries[0])
        first = entries[0][0]
        order = min(min(x.order for x in row) for row in entries)
        norm = []
        for row in entries:
            if len(row) != cols:
                raise SeriesError("ragged matrix")
            out_row = []
            for x in row:
                if x.vars != first.vars:
                    raise SeriesError("matrix entries disagree on variables")
                out_row.append(x if x.order == order else x.truncate(order))
            norm.append(out_row)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "cols", cols)
        object.__setattr__(self, "vars", first.vars)
        object.__setattr__(self, "order", order)
        object.__setattr__(self, "entries", norm)

    def __setattr__(self, *a):
        raise AttributeError("SeriesMatrix is immutable")

    # -- constructors ------------------------------------------------------

    @classmethod
    def zeros(cls, n, m, vars, order):
        z = TruncSeries.zero(vars, order)
        return cls([[z] * m for _ in range(n)])

    @classmethod
    def identity(cls, n, vars, order):
        z = TruncSeries.zero(vars, order)
        o = TruncSeries.one(vars, order)
        return cls([[o if i == j else z for j in range(n)] for i in range(n)])

    @classmethod
    def from_consts(cls, mat, vars, order):
        """Lift a rectangular array of ints/Fractions to constant series."""
        return cls([[TruncSeries.const(vars, order, c) for c in row]
                    for row in mat])

    # -- access ------------------------------------------------------------

    def __getitem__(self, ij):
        i, j = ij
        return self.entries[i][j]

    def __eq__(self, other):
        if not isinstance(other, SeriesMatrix):
            return NotImplemented
        return (self.rows == other.rows and self.cols == other.cols
                and self.vars == other.vars and self.order == other.order
                and self.entries == other.entries)

    def __repr__(self):
        return "SeriesMatrix(%dx%d over %r, order %d)" % (
            self.rows, self.cols, self.vars, self.order)

    def is_zero(self) -> bool:
        return all(x.is_zero() for row in self.entries for x in row)

    def is_constant(self) -> bool:
        return all(x.is_constant() for row in self.entries for x in row)

    def at_origin(self) -> list:
        """Constant-term matrix as a list of lists of Fractions."""
        return [[x.constant_term for x in row] for row in self.entries]

    def column(self, j) -> list:
        return [self.entries[i][j] for i in range(self.rows)]

    # -- arithmetic --------------------------------------------------------

    def _shape_like(self, other):
        if self.rows != other.rows or self.cols != other.cols:
            raise SeriesError("shape mismatch %dx%d vs %dx%d"
                              % (self.rows, self.cols, other.rows, other.cols))

    def __add__(self, other):
        self._shape_like(other)
        return SeriesMatrix([[a + b for a, b in zip(r1, r2)]
                             for r1, r2 in zip(self.entries, other.entries)])

    def __sub__(self, other):
        self._shape_like(other)
        return SeriesMatrix([[a - b for a, b in zip(r1, r2)]
                             for r1, r2 in zip(self.entries, other.entries)])

    def __neg__(self):
        return SeriesMatrix([[-a for a in row] for row in self.entries])

    def scale(self, c):
        return SeriesMatrix([[a * c for a in row] for row in self.entries])

    def scale_series(self, s: TruncSeries):
        return SeriesMatrix([[a * s for a in row] for row in self.entries])

    def __matmul__(self, other):
        if isinstance(other, SeriesMatrix):
            if self.cols != other.rows:
                raise SeriesError("shape mismatch for product")
            z = TruncSeries.zero(self.vars, min(self.order, other.order))
            out = []
            for i in range(self.rows):
                row = []
                for j in range(other.cols):
                    acc = z
                    for k in range(self.cols):
                        a = self.entries[i][k]
                        b = other.entries[k][j]
                        if a.is_zero() or b.is_zero():
                            continue
                        acc = acc + a * b
                    row.append(acc)
                out.append(row)
            return SeriesMatrix(out)
        return NotImplemented

    def commutator(self, other):
        return (self @ other) - (other @ self)

    def transpose(self):
        return SeriesMatrix([[self.entries[i][j] for i in range(self.rows)]
                             for j in range(self.cols)])

    def partial(self, name: str):
        return SeriesMatrix([[a.partial(name) for a in row]
                             for row in self.entries])

    def mul_var(self, name: str):
        return SeriesMatrix([[a.mul_var(name) for a in row]
                             for row in self.entries])

    def restrict_zero(self, names):
        return SeriesMatrix([[a.restrict_zero(names) for a in row]
                             for row in self.entries])

    def extend(self, new_vars):
        return SeriesMatrix([[a.extend(new_vars) for a in row]
                             for row in self.entries])

    def truncate(self, order):
        return SeriesMatrix([[a.truncate(order) for a in row]
                             for row in self.entries])

    def graded_part(self, degree, names=None, weights=None):
        return SeriesMatrix([[a.graded_part(degree, names, weights)
                              for a in row] for row in self.entries])

    def compose(self, mapping):
        return SeriesMatrix([[a.compose(mapping) for a in row]
                             for row in self.entries])

    def apply_const(self, vec):
        """Matrix times a constant column vector of Fractions."""
        if len(vec) != self.cols:
            raise SeriesError("vector length mismatch")
        out = []
        for i in range(self.rows):
            acc = TruncSeries.zero(self.vars, self.order)
            for k, c in enumerate(vec):
                if c:
                    acc = acc + self.entries[i][k] * c
            out.append(acc)
        return out

    def conjugate_const(self, basis, basis_inv):
        """basis_inv @ self @ basis with constant Fraction matrices."""
        n = self.rows
        b = SeriesMatrix.from_consts(basis, self.vars, self.order)
        binv = SeriesMatrix.from_consts(basis_inv, self.vars, self.order)
        if len(basis) != n:
            raise SeriesError("basis size mismatch")
        return binv @ self @ b

    def solve_series(self, rhs: "SeriesMatrix") -> "SeriesMatrix":
        """Solve self @ X = rhs; self must be square with an invertible
        constant term (pivots are chosen on unit entries only)."""
        if self.rows != self.cols:
            raise SeriesError("solve needs a square matrix")
        n = self.rows
        work = [[self.entries[i][j] for j in range(n)]
                + [rhs.entries[i][j] for j in range(rhs.cols)]
                for i in range(n)]
        m = n + rhs.cols
        for col in range(n):
            piv = None
            for r in range(col, n):
                if work[r][col].constant_term != 0:
                    piv = r
                    break
            if piv is None:
                raise SeriesError("matrix constant term is singular")
            work[col], work[piv] = work[piv], work[col]
            inv = work[col][col].inverse()
            work[col] = [x * inv for x in work[col]]
            for r in range(n):
                if r == col:
                    continue
                f = work[r][col]
                if f.is_zero():
                    continue
                work[r] = [a - f * b for a, b in zip(work[r], work[col])]
        return SeriesMatrix([[work[i][n + j] for j in range(rhs.cols)]
                             for i in range(n)])

    def inverse_series(self) -> "SeriesMatrix":
        return self.solve_series(
            SeriesMatrix.identity(self.rows, self.vars, self.order))

    # -- serialization -----------------------------------------------------

    def to_json(self) -> dict:
        return {
            "rows": self.rows,
            "cols": self.cols,
            "vars": list(self.vars),
            "order": self.order,
            "entries": [[x.to_json()["terms"] for x in row]
                        for row in self.entries],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SeriesMatrix":
        vars = obj["vars"]
        order = obj["order"]
        return cls([[TruncSeries.from_json({"vars": vars, "order": order,
                                            "terms": t})
                     for t in row] for row in obj["entries"]])
