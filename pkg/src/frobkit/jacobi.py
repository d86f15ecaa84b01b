"""Graded Jacobi algebras of weighted homogeneous polynomials.

The quotient of a polynomial ring by the partial derivatives of f is
handled degree by degree with exact rational linear algebra: each graded
piece gets a deterministic monomial basis (the lex-first independent
complement of the ideal piece) and a normal-form map onto it.  Two
reduction engines are used: a union-find engine when every ideal generator
product has at most two terms (Fermat-type and Sebastiani-Thom-type
polynomials, where pieces with 10^5 monomials stay cheap), and a sparse
echelon otherwise.

Milnor number and graded dimensions come from the Koszul Hilbert series
once the singularity has been certified isolated; materialized pieces are
checked against it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .linalg import Echelon
from .series import TruncSeries, frac_from_str, frac_to_str

__all__ = [
    "WeightSystem", "XPoly", "JacobiAlgebra", "RfClass",
    "build_jacobi", "jacobian_piece", "normal_form", "multiply_rf",
    "h2_generation_check", "NotIsolatedError", "JacobiFamily",
]


class NotIsolatedError(ValueError):
    """The singularity is not isolated; carries the witness degree."""

    def __init__(self, degree: Fraction):
        self.degree = degree
        super().__init__("graded piece at weighted degree %s is nonzero "
                         "above the socle bound" % degree)


class WeightSystem:
    """Weights w_0..w_n in (0, 1/2] with a common denominator.

    Degrees are handled internally as integers after scaling by L (the lcm
    of the weight denominators); weight(x_i) = D_i / L.
    """

    def __init__(self, weights: Sequence[Fraction]):
        weights = tuple(Fraction(w) for w in weights)
        if not weights:
            raise ValueError("need at least one weight")
        for w in weights:
            if not (0 < w <= Fraction(1, 2)):
                raise ValueError("weight %s outside (0, 1/2]" % w)
        self.weights = weights
        L = 1
        for w in weights:
            L = L * w.denominator // math.gcd(L, w.denominator)
        self.scale = L
        self.scaled = tuple(int(w * L) for w in weights)
        self._mono_cache: dict[int, list] = {}

    @classmethod
    def straight(cls, nvars: int, d: int) -> "WeightSystem":
        return cls([Fraction(1, d)] * nvars)

    @property
    def nvars(self) -> int:
        return len(self.weights)

    def degree_of(self, exps) -> Fraction:
        return Fraction(sum(e * d for e, d in zip(exps, self.scaled)),
                        self.scale)

    def scaled_degree(self, exps) -> int:
        return sum(e * d for e, d in zip(exps, self.scaled))

    def to_scaled(self, q: Fraction) -> int:
        s = Fraction(q) * self.scale
        if s.denominator != 1:
            raise ValueError("degree %s is not on the weight grid" % q)
        return int(s)

    def monomials(self, sdeg: int) -> list:
        """All exponent tuples of scaled degree sdeg, in lex order."""
        if sdeg in self._mono_cache:
            return self._mono_cache[sdeg]
        n = self.nvars
        D = self.scaled
        out = []
        exps = [0] * n

        def rec(i, rem):
            if i == n - 1:
                if rem % D[i] == 0:
                    exps[i] = rem // D[i]
                    out.append(tuple(exps))
                    exps[i] = 0
                return
            for k in range(rem // D[i] + 1):
                exps[i] = k
                rec(i + 1, rem - k * D[i])
            exps[i] = 0

        if sdeg >= 0:
            rec(0, sdeg)
        self._mono_cache[sdeg] = out
        return out

    def key_strides(self, max_sdeg: int):
        """Strides for packing exponent tuples into single integers.

        Valid for all monomials of scaled degree <= max_sdeg; sums of two
        packed keys never collide as long as the summed degree stays within
        the bound used to build the strides.
        """
        base = max_sdeg + 1
        strides = []
        s = 1
        for _ in range(self.nvars):
            strides.append(s)
            s *= base
        return tuple(strides)

    def socle_scaled(self) -> int:
        return sum(self.scale - 2 * d for d in self.scaled)

    def to_json(self):
        return [frac_to_str(w) for w in self.weights]


class XPoly:
    """Exact polynomial in x_0..x_n; coefficients Fraction or TruncSeries."""

    __slots__ = ("nvars", "terms")

    def __init__(self, nvars: int, terms=None):
        self.nvars = nvars
        self.terms = {}
        if terms:
            for e, c in dict(terms).items():
                if _nonzero(c):
                    self.terms[tuple(e)] = c

    @classmethod
    def from_json(cls, nvars, term_list):
        return cls(nvars, {tuple(e): frac_from_str(c) for e, c in term_list})

    def to_json(self):
        return [[list(e), frac_to_str(self.terms[e])] for e in sorted(self.terms)]

    @classmethod
    def monomial(cls, nvars, exps, coeff=Fraction(1)):
        return cls(nvars, {tuple(exps): coeff})

    def __add__(self, other):
        terms = dict(self.terms)
        for e, c in other.terms.items():
            s = terms.get(e)
            s = c if s is None else s + c
            if _nonzero(s):
                terms[e] = s
            else:
                terms.pop(e, None)
        return XPoly(self.nvars, terms)

    def scale(self, c):
        return XPoly(self.nvars, {e: v * c for e, v in self.terms.items()})

    def __mul__(self, other):
        terms: dict = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                s = terms.get(e)
                p = c1 * c2
                s = p if s is None else s + p
                if _nonzero(s):
                    terms[e] = s
                else:
                    terms.pop(e, None)
        return XPoly(self.nvars, terms)

    def partial(self, i: int) -> "XPoly":
        terms = {}
        for e, c in self.terms.items():
            if e[i]:
                e2 = e[:i] + (e[i] - 1,) + e[i + 1:]
                terms[e2] = c * e[i]
        return XPoly(self.nvars, terms)

    def is_zero(self):
        return not self.terms

    def __repr__(self):
        return "XPoly(%r)" % (self.terms,)


def _nonzero(c):
    if isinstance(c, TruncSeries):
        return not c.is_zero()
    return c != 0


# ---------------------------------------------------------------------------
# reduction engines for one graded piece
# ---------------------------------------------------------------------------


class _UnionFind:
    """Quotient structure when every ideal vector has <= 2 terms.

    Maintains e_i = mult[i] * e_root modulo the ideal span; dead roots mean
    the whole component is contained in the span.
    """

    def __init__(self, n):
        self.parent = list(range(n))
        self.mult = [Fraction(1)] * n
        self.dead = [False] * n

    def find(self, i):
        path = []
        while self.parent[i] != i:
            path.append(i)
            i = self.parent[i]
        m = Fraction(1)
        for j in reversed(path):
            m = m * self.mult[j]
            self.parent[j] = i
            self.mult[j] = m
        # after compression mult[j] is relative to the root i
        return i, self.mult[path[0]] if path else Fraction(1)

    def kill(self, i):
        r, _ = self.find(i)
        self.dead[r] = True

    def relate(self, i, j, ratio):
        """Impose e_i = ratio * e_j modulo the span."""
        ri, mi = self.find(i)
        rj, mj = self.find(j)
        if ri == rj:
            if mi != ratio * mj:
                self.dead[ri] = True
            return
        # e_ri = e_i / mi = (ratio * mj / mi) e_rj
        self.parent[ri] = rj
        self.mult[ri] = ratio * mj / mi
        if self.dead[ri]:
            self.dead[rj] = True


class GradedPiece:
    """One graded piece of the quotient: basis plus normal-form map.

    Monomials are packed into single integer keys (via strides) so that the
    inner loops over generator products run on int arithmetic; the key of a
    product of monomials is the sum of their keys.
    """

    def __init__(self, ws: WeightSystem, partials, sdeg: int, strides=None):
        self.sdeg = sdeg
        self.strides = strides if strides is not None else ws.key_strides(sdeg)
        self.monomials = ws.monomials(sdeg)
        st = self.strides
        self.keys = [sum(e * s for e, s in zip(m, st)) for m in self.monomials]
        self.index = {k: i for i, k in enumerate(self.keys)}
        self._build(ws, partials, sdeg)

    def _build(self, ws, partials, sdeg):
        st = self.strides
        packed = []
        simple = True
        for dfi in partials:
            if dfi.is_zero():
                continue
            gdeg = sdeg - ws.scaled_degree(next(iter(dfi.terms)))
            if gdeg < 0:
                continue
            terms = [(sum(e * s for e, s in zip(exp, st)), c)
                     for exp, c in sorted(dfi.terms.items())]
            if len(terms) > 2:
                simple = False
            packed.append((gdeg, terms))
        gkeys_cache: dict[int, list] = {}
        for gdeg, _ in packed:
            if gdeg not in gkeys_cache:
                gkeys_cache[gdeg] = [sum(e * s for e, s in zip(m, st))
                                     for m in ws.monomials(gdeg)]
        if simple:
            self._build_uf(packed, gkeys_cache)
        else:
            self._build_echelon(packed, gkeys_cache)

    def _build_uf(self, packed, gkeys_cache):
        n = len(self.monomials)
        uf = _UnionFind(n)
        index = self.index
        kill, relate = uf.kill, uf.relate
        for gdeg, terms in packed:
            gkeys = gkeys_cache[gdeg]
            if len(terms) == 1:
                k1, _ = terms[0]
                for g in gkeys:
                    kill(index[g + k1])
            else:
                (k1, c1), (k2, c2) = terms
                ratio = -c2 / c1
                for g in gkeys:
                    relate(index[g + k1], index[g + k2], ratio)
        # lex-first alive monomial of each component is the basis rep
        basis = []
        rep_of_root: dict[int, int] = {}
        find, dead = uf.find, uf.dead
        for i in range(n):
            r, _ = find(i)
            if dead[r] or r in rep_of_root:
                continue
            rep_of_root[r] = i
            basis.append(i)
        self._uf = uf
        self._rep_of_root = rep_of_root
        self._echelon = None
        self.basis = basis
        self.dim = len(basis)
        self._basis_pos = {b: k for k, b in enumerate(basis)}

    def _build_echelon(self, packed, gkeys_cache):
        ech = Echelon(pivot="max")
        index = self.index
        for gdeg, terms in packed:
            for g in gkeys_cache[gdeg]:
                vec: dict = {}
                for k, c in terms:
                    i = index[g + k]
                    s = vec.get(i, Fraction(0)) + c
                    if s:
                        vec[i] = s
                    else:
                        del vec[i]
                if vec:
                    ech.insert(vec)
        pivots = ech.pivots
        self.basis = [i for i in range(len(self.monomials)) if i not in pivots]
        self.dim = len(self.basis)
        self._echelon = ech
        self._uf = None
        self._basis_pos = {b: k for k, b in enumerate(self.basis)}

    @property
    def basis_monomials(self):
        return [self.monomials[i] for i in self.basis]

    @property
    def basis_keys(self):
        return [self.keys[i] for i in self.basis]

    def ideal_rank(self) -> int:
        return len(self.monomials) - self.dim

    def nf_index(self, i: int) -> dict:
        """Normal form of the i-th monomial: {basis position: Fraction}."""
        if self._uf is not None:
            r, m = self._uf.find(i)
            if self._uf.dead[r]:
                return {}
            b = self._rep_of_root[r]
            _, mb = self._uf.find(b)
            return {self._basis_pos[b]: m / mb}
        red = self._echelon.reduce({i: Fraction(1)})
        return {self._basis_pos[c]: x for c, x in red.items()}

    def nf_key(self, key: int, coeff=Fraction(1)) -> dict:
        i = self.index.get(key)
        if i is None:
            raise ValueError("monomial key %d not of scaled degree %d"
                             % (key, self.sdeg))
        return {k: v * coeff for k, v in self.nf_index(i).items()}

    def nf_exps(self, exps, coeff=Fraction(1)) -> dict:
        key = sum(e * s for e, s in zip(exps, self.strides))
        i = self.index.get(key)
        if i is None:
            raise ValueError("monomial %r not of scaled degree %d"
                             % (exps, self.sdeg))
        out = self.nf_index(i)
        return {k: v * coeff for k, v in out.items()}


# ---------------------------------------------------------------------------
# Jacobi algebra
# ---------------------------------------------------------------------------


@dataclass
class RfClass:
    """A homogeneous element of the quotient in basis coordinates."""

    sdeg: int
    coords: dict = field(default_factory=dict)

    def is_zero(self):
        return not self.coords


class JacobiAlgebra:
    """Quotient of C[x] by the partial derivatives of a weighted
    homogeneous f with certified isolated singularity at 0."""

    def __init__(self, f: XPoly, ws: WeightSystem):
        if f.nvars != ws.nvars:
            raise ValueError("variable count mismatch")
        if f.is_zero():
            raise ValueError("f must be nonzero")
        degs = {ws.scaled_degree(e) for e in f.terms}
        if degs != {ws.scale}:
            raise ValueError("f is not weighted homogeneous of degree 1 "
                             "(scaled degrees %r)" % sorted(degs))
        self.f = f
        self.ws = ws
        self.partials = [f.partial(i) for i in range(ws.nvars)]
        self.strides = ws.key_strides(ws.socle_scaled() + max(ws.scaled))
        self._pieces: dict[int, GradedPiece] = {}
        self._certify_isolated()
        self._hilbert = self._hilbert_coeffs()
        self.milnor = sum(self._hilbert)
        self.alpha1 = sum(ws.weights)
        self.exponents = []
        for s, d in enumerate(self._hilbert):
            self.exponents.extend([self.alpha1 + Fraction(s, ws.scale)] * d)

    # -- construction helpers ----------------------------------------------

    def _certify_isolated(self):
        B = self.ws.socle_scaled()
        top_w = max(self.ws.scaled)
        for s in range(B + 1, B + top_w + 1):
            piece = GradedPiece(self.ws, self.partials, s, self.strides)
            if piece.dim != 0:
                raise NotIsolatedError(Fraction(s, self.ws.scale))

    def _hilbert_coeffs(self):
        """Coefficients of prod (1-u^(L-D_i)) / prod (1-u^(D_i))."""
        num = [1]
        for d in self.ws.scaled:
            k = self.ws.scale - d
            new = [0] * (len(num) + k)
            for i, c in enumerate(num):
                new[i] += c
                new[i + k] -= c
            num = new
        for d in self.ws.scaled:
            # synthetic division by (1 - u^d)
            width = max(len(num) - d, 0)
            out = [0] * width
            rem = list(num)
            for i in range(width):
                out[i] = rem[i]
                rem[i + d] += rem[i]
            if any(rem[width:]):
                raise AssertionError("Hilbert series division not exact")
            num = out if out else [0]
        while num and num[-1] == 0:
            num.pop()
        if any(c < 0 for c in num):
            raise AssertionError("negative Hilbert coefficient")
        return num

    # -- graded structure ----------------------------------------------------

    def dim_scaled(self, sdeg: int) -> int:
        if sdeg < 0 or sdeg >= len(self._hilbert):
            return 0
        return self._hilbert[sdeg]

    def dim_at(self, q) -> int:
        try:
            s = self.ws.to_scaled(q)
        except ValueError:
            return 0
        return self.dim_scaled(s)

    def piece(self, sdeg: int) -> GradedPiece:
        if sdeg not in self._pieces:
            p = GradedPiece(self.ws, self.partials, sdeg, self.strides)
            if p.dim != self.dim_scaled(sdeg):
                raise AssertionError(
                    "piece dimension %d at scaled degree %d disagrees with "
                    "the Hilbert series value %d"
                    % (p.dim, sdeg, self.dim_scaled(sdeg)))
            self._pieces[sdeg] = p
        return self._pieces[sdeg]

    def top_scaled(self) -> int:
        return len(self._hilbert) - 1

    def integer_degrees(self) -> list:
        """Integer points q with L*q inside the graded range."""
        L = self.ws.scale
        return [q for q in range(0, self.top_scaled() // L + 1)]

    # -- quotient operations -------------------------------------------------

    def normal_form(self, p: XPoly) -> RfClass:
        if p.is_zero():
            return RfClass(0, {})
        degs = {self.ws.scaled_degree(e) for e in p.terms}
        if len(degs) != 1:
            raise ValueError("polynomial is not weighted homogeneous")
        s = degs.pop()
        if s > self.top_scaled():
            return RfClass(s, {})
        piece = self.piece(s)
        coords: dict = {}
        for e, c in p.terms.items():
            for k, v in piece.nf_exps(e, c).items():
                w = coords.get(k, Fraction(0)) + v
                if w:
                    coords[k] = w
                else:
                    del coords[k]
        return RfClass(s, coords)

    def class_of_monomial(self, exps) -> RfClass:
        s = self.ws.scaled_degree(exps)
        if s > self.top_scaled():
            return RfClass(s, {})
        return RfClass(s, self.piece(s).nf_exps(exps))

    def multiply(self, a: RfClass, b: RfClass) -> RfClass:
        s = a.sdeg + b.sdeg
        if s > self.top_scaled() or a.is_zero() or b.is_zero():
            return RfClass(s, {})
        ka = self.piece(a.sdeg).basis_keys
        kb = self.piece(b.sdeg).basis_keys
        target = self.piece(s)
        coords: dict = {}
        for i, ca in a.coords.items():
            for j, cb in b.coords.items():
                for k, v in target.nf_key(ka[i] + kb[j], ca * cb).items():
                    w = coords.get(k, Fraction(0)) + v
                    if w:
                        coords[k] = w
                    else:
                        del coords[k]
        return RfClass(s, coords)

    def unit(self) -> RfClass:
        return RfClass(0, {0: Fraction(1)})

    # -- reports -------------------------------------------------------------

    def report(self) -> dict:
        L = self.ws.scale
        dims = {}
        for s, d in enumerate(self._hilbert):
            if d:
                dims[frac_to_str(Fraction(s, L))] = d
        return {
            "milnor": self.milnor,
            "weights": self.ws.to_json(),
            "dims": dims,
            "integer_dims": {q: self.dim_scaled(q * L)
                             for q in self.integer_degrees()},
            "exponents": [frac_to_str(a) for a in self.exponents],
        }


def build_jacobi(f: XPoly, ws: WeightSystem) -> JacobiAlgebra:
    return JacobiAlgebra(f, ws)


def jacobian_piece(f: XPoly, ws: WeightSystem, q) -> dict:
    """Row-reduced span of {g * df/dx_i} in degree q; independent of the
    Hilbert-series route, used as its oracle.

    Returns {"dimension": ambient dim, "rank": ideal rank,
             "quotient_dim": codimension}.
    """
    degs = {ws.scaled_degree(e) for e in f.terms}
    if degs != {ws.scale}:
        raise ValueError("f is not weighted homogeneous of degree 1")
    s = ws.to_scaled(q)
    partials = [f.partial(i) for i in range(ws.nvars)]
    piece = GradedPiece(ws, partials, s)
    return {
        "dimension": len(piece.monomials),
        "rank": piece.ideal_rank(),
        "quotient_dim": piece.dim,
        "basis_monomials": piece.basis_monomials,
    }


def normal_form(algebra: JacobiAlgebra, p: XPoly) -> RfClass:
    return algebra.normal_form(p)


def multiply_rf(algebra: JacobiAlgebra, a: RfClass, b: RfClass) -> RfClass:
    return algebra.multiply(a, b)


def h2_generation_check(algebra: JacobiAlgebra) -> dict:
    """Codimension, per integer degree q >= 2, of the span of q-fold
    products of degree-1 classes; passes iff every codimension is 0.

    The span at degree q is grown incrementally: span_q = span_{q-1} *
    R^(1), with spanning vectors kept in reduced echelon form so product
    counts stay at rank * dim R^(1).
    """
    L = algebra.ws.scale
    top_int = algebra.top_scaled() // L
    report: dict[int, int] = {}
    if algebra.dim_scaled(L) == 0:
        # no degree-1 classes: every nonzero higher integer piece is missed
        for q in range(2, top_int + 1):
            report[q] = algebra.dim_scaled(q * L)
        return {"codimensions": report,
                "passes": all(v == 0 for v in report.values())}
    deg1 = algebra.piece(L)
    deg1_keys = deg1.basis_keys
    prev_keys = list(deg1_keys)
    prev_rows: list[dict] = [{k: Fraction(1)} for k in range(deg1.dim)]
    one = Fraction(1)
    for q in range(2, top_int + 1):
        s = q * L
        dim = algebra.dim_scaled(s)
        if dim == 0:
            report[q] = 0
            prev_rows = []
            prev_keys = []
            continue
        target = algebra.piece(s)
        # span of the products, tracked as coordinate lines (`seen`, the
        # common case for union-find pieces: every product of basis
        # monomials reduces to a single line) plus a general echelon.
        seen: set = set()
        ech = Echelon(pivot="min")
        nf_key = target.nf_key
        for row in prev_rows:
            items = list(row.items())
            for kj in deg1_keys:
                if len(items) == 1 and items[0][1] == 1:
                    vec = nf_key(prev_keys[items[0][0]] + kj)
                else:
                    vec = {}
                    for i, c in items:
                        for k, v in nf_key(prev_keys[i] + kj, c).items():
                            w = vec.get(k, Fraction(0)) + v
                            if w:
                                vec[k] = w
                            else:
                                del vec[k]
                vec = {k: c for k, c in vec.items() if k not in seen}
                if not vec:
                    continue
                if len(vec) == 1 and ech.rank == 0:
                    seen.add(next(iter(vec)))
                else:
                    ech.insert(vec)
        rank = len(seen) + ech.rank
        report[q] = dim - rank
        prev_rows = ([{k: one} for k in sorted(seen)]
                     + [dict(r) for r in ech.rows.values()])
        prev_keys = target.basis_keys
    return {"codimensions": report,
            "passes": all(v == 0 for v in report.values())}


# ---------------------------------------------------------------------------
# one-parameter families F_t = f + sum t_a m_a (normal forms over series)
# ---------------------------------------------------------------------------


class _SeriesEchelon:
    """Row echelon with TruncSeries entries; pivots must be units."""

    def __init__(self):
        self.rows: dict[int, dict[int, TruncSeries]] = {}

    def reduce(self, vec: dict) -> dict:
        v = {c: x for c, x in vec.items() if not x.is_zero()}
        changed = True
        while changed:
            changed = False
            for p in list(v):
                row = self.rows.get(p)
                if row is None:
                    continue
                f = v.pop(p)
                changed = True
                for c, x in row.items():
                    if c == p:
                        continue
                    s = (v.get(c) - f * x) if c in v else -(f * x)
                    if s.is_zero():
                        v.pop(c, None)
                    else:
                        v[c] = s
        return v

    def insert(self, vec: dict) -> bool:
        v = self.reduce(vec)
        if not v:
            return False
        unit_cols = [c for c, x in v.items() if x.constant_term != 0]
        if not unit_cols:
            raise AssertionError("family is not flat: row with no unit entry")
        p = max(unit_cols)
        inv = v[p].inverse()
        row = {c: x * inv for c, x in v.items()}
        for other in self.rows.values():
            f = other.get(p)
            if f is not None and not f.is_zero():
                for c, x in row.items():
                    s = (other.get(c) - f * x) if c in other else -(f * x)
                    if s.is_zero():
                        other.pop(c, None)
                    else:
                        other[c] = s
        self.rows[p] = row
        return True


class JacobiFamily:
    """F_t = f + sum_a t_a m_a over the degree-1 basis monomials m_a.

    Provides normal forms in R_{F_t} with TruncSeries coefficients, against
    the t=0 monomial basis (the family is flat, so the basis persists).
    """

    def __init__(self, algebra: JacobiAlgebra, t_vars: Sequence[str],
                 order: int):
        self.algebra = algebra
        ws = algebra.ws
        L = ws.scale
        deg1 = algebra.piece(L)
        if len(t_vars) != deg1.dim:
            raise ValueError("need one parameter per degree-1 basis class")
        self.t_vars = tuple(t_vars)
        self.order = order
        self.deg1_monomials = deg1.basis_monomials

        def lift(c):
            return TruncSeries.const(self.t_vars, order, c)

        famf = XPoly(ws.nvars, {e: lift(c) for e, c in algebra.f.terms.items()})
        for a, m in enumerate(self.deg1_monomials):
            tm = TruncSeries.var(self.t_vars, order, self.t_vars[a])
            famf = famf + XPoly(ws.nvars, {m: tm})
        self.F = famf
        self.partials = [famf.partial(i) for i in range(ws.nvars)]
        self._pieces: dict[int, _SeriesEchelon] = {}

    def _family_piece(self, sdeg: int):
        if sdeg in self._pieces:
            return self._pieces[sdeg]
        base = self.algebra.piece(sdeg)
        ws = self.algebra.ws
        st = base.strides
        zero = TruncSeries.zero(self.t_vars, self.order)
        ech = _SeriesEchelon()
        for dfi in self.partials:
            if dfi.is_zero():
                continue
            gdeg = sdeg - ws.scaled_degree(next(iter(dfi.terms)))
            if gdeg < 0:
                continue
            terms = [(sum(e * s for e, s in zip(exp, st)), c)
                     for exp, c in sorted(dfi.terms.items())]
            for g in ws.monomials(gdeg):
                gk = sum(e * s for e, s in zip(g, st))
                vec: dict = {}
                for k, c in terms:
                    i = base.index[gk + k]
                    vec[i] = vec.get(i, zero) + c
                vec = {i: v for i, v in vec.items() if not v.is_zero()}
                if vec:
                    ech.insert(vec)
        pivots = set(ech.rows)
        basis = [i for i in range(len(base.monomials)) if i not in pivots]
        if basis != base.basis:
            raise AssertionError("family basis at scaled degree %d deviates "
                                 "from the t=0 basis" % sdeg)
        self._pieces[sdeg] = ech
        return ech

    def nf_monomial(self, exps, sdeg: int) -> dict:
        """{basis position: TruncSeries} for a monomial of degree sdeg."""
        if sdeg > self.algebra.top_scaled():
            return {}
        base = self.algebra.piece(sdeg)
        ech = self._family_piece(sdeg)
        i = base.index[sum(e * s for e, s in zip(exps, base.strides))]
        red = ech.reduce({i: TruncSeries.one(self.t_vars, self.order)})
        return {base._basis_pos[c]: x for c, x in red.items()}

    def mult_matrix(self, a: int, from_sdeg: int):
        """Matrix of multiplication by the degree-1 class m_a from the
        graded piece at from_sdeg to the one at from_sdeg + L.

        Entries are TruncSeries in the family parameters; rows are indexed
        by the target basis, columns by the source basis.
        """
        ws = self.algebra.ws
        L = ws.scale
        src = self.algebra.piece(from_sdeg)
        tdeg = from_sdeg + L
        ncols = src.dim
        nrows = self.algebra.dim_scaled(tdeg)
        zero = TruncSeries.zero(self.t_vars, self.order)
        cols = []
        ma = self.deg1_monomials[a]
        for j in range(ncols):
            mj = src.basis_monomials[j]
            prod = tuple(x + y for x, y in zip(ma, mj))
            col = [zero] * nrows
            if nrows:
                for k, v in self.nf_monomial(prod, tdeg).items():
                    col[k] = v
            cols.append(col)
        return [[cols[j][i] for j in range(ncols)] for i in range(nrows)]
