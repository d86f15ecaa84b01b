"""Frobenius type structures and variations of filtrations.

A Frobenius type structure lives on a trivialized bundle over a base germ:
in the flat frame the residual connection is the plain derivative, the
Higgs field is a tuple of series matrices, the two endomorphisms are a
series matrix and a constant matrix, and the pairing is a constant
symmetric matrix.  The filtration side of the dictionary keeps the same
frame with an integer level attached to each frame vector; the connection
matrix may move a level down by one (Higgs part) or preserve it
(residual part), and the constant pairing couples complementary levels.

Conversions both ways, the one-parameter shift-operator family of
filtration examples, and the bridge from graded Jacobi algebras are all
here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from . import linalg
from .jacobi import JacobiAlgebra, JacobiFamily, h2_generation_check
from .series import (SeriesMatrix, TruncSeries, frac_from_str, frac_to_str)

__all__ = [
    "FrobeniusTypeStructure", "FiltrationData", "RejectionError",
    "check_ftype_axioms", "ftype_to_filtration", "filtration_to_ftype",
    "shift_example", "jacobi_to_filtration",
]


class RejectionError(ValueError):
    """A precondition of a conversion failed; carries a structured report."""

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report or {}


def _const_to_json(mat):
    return [[frac_to_str(Fraction(c)) for c in row] for row in mat]


def _const_from_json(obj):
    return [[frac_from_str(c) for c in row] for row in obj]


@dataclass
class FrobeniusTypeStructure:
    """(K, flat frame, C, U, V, g) over a base germ with coordinates vars.

    C has one matrix per base coordinate; V and g are constant (V is flat,
    g is flat) while U may genuinely depend on the base point.
    """

    vars: tuple
    n: int
    C: list
    U: SeriesMatrix
    V: list
    g: list
    order: int

    def __post_init__(self):
        self.vars = tuple(self.vars)
        if len(self.C) != len(self.vars):
            raise ValueError("need one Higgs matrix per base coordinate")

    def umat_is_zero(self) -> bool:
        return self.U.is_zero()

    def restrict_order(self, order):
        return FrobeniusTypeStructure(
            self.vars, self.n, [c.truncate(order) for c in self.C],
            self.U.truncate(order), self.V, self.g, order)

    def to_json(self):
        return {
            "vars": list(self.vars),
            "rank": self.n,
            "order": self.order,
            "higgs": [c.to_json() for c in self.C],
            "u_endo": self.U.to_json(),
            "v_endo": _const_to_json(self.V),
            "pairing": _const_to_json(self.g),
        }

    @classmethod
    def from_json(cls, obj):
        return cls(
            tuple(obj["vars"]), obj["rank"],
            [SeriesMatrix.from_json(c) for c in obj["higgs"]],
            SeriesMatrix.from_json(obj["u_endo"]),
            _const_from_json(obj["v_endo"]),
            _const_from_json(obj["pairing"]),
            obj["order"])


@dataclass
class FiltrationData:
    """Flat bundle with level grading, connection Gamma and pairing S.

    levels[k] is the level of the k-th frame vector; Gamma has one matrix
    per base coordinate and must move levels down by at most one; S is the
    constant (-1)^weight-symmetric pairing coupling levels p and weight-p.
    """

    vars: tuple
    n: int
    weight: int
    levels: list
    Gamma: list
    S: list
    order: int

    def __post_init__(self):
        self.vars = tuple(self.vars)
        if len(self.levels) != self.n:
            raise ValueError("need one level per frame vector")

    def to_json(self):
        return {
            "vars": list(self.vars),
            "rank": self.n,
            "weight": self.weight,
            "levels": list(self.levels),
            "order": self.order,
            "gamma": [g.to_json() for g in self.Gamma],
            "pairing": _const_to_json(self.S) if self.S is not None else None,
        }

    @classmethod
    def from_json(cls, obj):
        S = obj.get("pairing")
        return cls(
            tuple(obj["vars"]), obj["rank"], obj["weight"],
            list(obj["levels"]),
            [SeriesMatrix.from_json(g) for g in obj["gamma"]],
            _const_from_json(S) if S is not None else None,
            obj["order"])


# ---------------------------------------------------------------------------
# axiom checks
# ---------------------------------------------------------------------------


def _lift(mat, vars, order):
    return SeriesMatrix.from_consts(mat, vars, order)


def check_ftype_axioms(F: FrobeniusTypeStructure) -> list:
    """Evaluate every defining identity exactly modulo the truncation order.

    Returns a list of violation records; empty means the structure is a
    Frobenius type structure to the stated order.
    """
    out = []
    n = F.n

    def bad(name, idx, residual):
        out.append({"check": name, "indices": idx,
                    "residual": residual.to_json()
                    if isinstance(residual, SeriesMatrix) else residual})

    g = F.g
    gt = linalg.transpose(g)
    if gt != g:
        bad("pairing-symmetric", None, _const_to_json(
            [[a - b for a, b in zip(r1, r2)] for r1, r2 in zip(gt, g)]))
    try:
        linalg.mat_inverse(g)
    except ValueError:
        bad("pairing-invertible", None, "singular")

    gS = _lift(g, F.vars, F.order)
    VS = _lift(F.V, F.vars, F.order)

    for i in range(len(F.vars)):
        for j in range(i + 1, len(F.vars)):
            r = F.C[i].commutator(F.C[j])
            if not r.is_zero():
                bad("higgs-commute", (i, j), r)
            r = F.C[i].partial(F.vars[j]) - F.C[j].partial(F.vars[i])
            if not r.is_zero():
                bad("higgs-potential", (i, j), r)
    for i in range(len(F.vars)):
        r = F.C[i].commutator(F.U)
        if not r.is_zero():
            bad("u-higgs-commute", (i,), r)
        # transport of the first endomorphism along the base
        r = F.U.partial(F.vars[i]) - F.C[i].commutator(VS) + F.C[i]
        if not r.is_zero():
            bad("u-transport", (i,), r)
        r = F.C[i].transpose() @ gS - gS @ F.C[i]
        if not r.is_zero():
            bad("pairing-higgs", (i,), r)
    r = F.U.transpose() @ gS - gS @ F.U
    if not r.is_zero():
        bad("pairing-u", None, r)
    rv = [[sum(F.V[k][i] * g[k][j] for k in range(n)) +
           sum(g[i][k] * F.V[k][j] for k in range(n))
           for j in range(n)] for i in range(n)]
    if any(any(row) for row in rv):
        bad("pairing-v-skew", None, _const_to_json(rv))
    return out


def check_filtration(D: FiltrationData) -> list:
    """Level structure, flatness and pairing conditions, exactly."""
    out = []

    def bad(name, idx, residual):
        out.append({"check": name, "indices": idx, "residual": residual})

    lv = D.levels
    n = D.n
    for a, G in enumerate(D.Gamma):
        for k in range(n):
            for l in range(n):
                if G[k, l].is_zero():
                    continue
                if lv[k] not in (lv[l], lv[l] - 1):
                    bad("griffiths-transversality", (a, k, l),
                        {"from_level": lv[l], "to_level": lv[k]})
    m = len(D.vars)
    for i in range(m):
        for j in range(i + 1, m):
            r = D.Gamma[i].commutator(D.Gamma[j])
            if D.order >= 1:
                r = (D.Gamma[i].partial(D.vars[j])
                     - D.Gamma[j].partial(D.vars[i]) + r)
            if not r.is_zero():
                bad("connection-flat", (i, j), r.to_json())
    if D.S is not None:
        S = D.S
        sign = 1 if D.weight % 2 == 0 else -1
        St = linalg.transpose(S)
        if St != [[sign * c for c in row] for row in S]:
            bad("pairing-weight-symmetric", None, _const_to_json(S))
        try:
            linalg.mat_inverse(S)
        except ValueError:
            bad("pairing-invertible", None, "singular")
        for k in range(n):
            for l in range(n):
                if S[k][l] != 0 and lv[k] + lv[l] != D.weight:
                    bad("pairing-level-orthogonal", (k, l),
                        frac_to_str(S[k][l]))
        SS = _lift(S, D.vars, D.order)
        for a, G in enumerate(D.Gamma):
            r = G.transpose() @ SS + SS @ G
            if not r.is_zero():
                bad("pairing-flat", (a,), r.to_json())
    return out


# ---------------------------------------------------------------------------
# the dictionary between the two presentations
# ---------------------------------------------------------------------------


def _v_spectrum(V, w):
    """Eigen-decomposition of the constant matrix V, eigenvalues expected
    in w/2 + Z.  Returns (levels per new frame vector, basis, basis_inv)
    or raises with the observed spectrum."""
    n = len(V)
    if all(V[i][j] == 0 for i in range(n) for j in range(n) if i != j):
        # already diagonal: keep the frame order untouched
        levels = []
        for i in range(n):
            lam = Fraction(V[i][i])
            p = lam + Fraction(w, 2)
            if p.denominator != 1:
                raise RejectionError(
                    "eigenvalue %s of the flat endomorphism is not in "
                    "weight/2 + Z" % lam,
                    {"spectrum": [frac_to_str(Fraction(V[k][k]))
                                  for k in range(n)]})
            levels.append(int(p))
        return levels, linalg.identity(n), linalg.identity(n)
    bound = max(sum(abs(c) for c in row) for row in V)
    cols = []
    levels = []
    k = 0
    klo = math.floor(-bound - Fraction(w, 2))
    khi = math.ceil(bound - Fraction(w, 2))
    for step in range(klo, khi + 1):
        lam = Fraction(w, 2) + step
        A = [[V[i][j] - (lam if i == j else 0) for j in range(n)]
             for i in range(n)]
        for vec in linalg.nullspace(A):
            cols.append(vec)
            levels.append(int(lam + Fraction(w, 2)))
            k += 1
        if k == n:
            break
    if k != n:
        raise RejectionError(
            "flat endomorphism is not semisimple with eigenvalues in "
            "weight/2 + Z (found %d of %d)" % (k, n),
            {"found": k, "rank": n})
    basis = linalg.transpose(cols)
    return levels, basis, linalg.mat_inverse(basis)


def ftype_to_filtration(F: FrobeniusTypeStructure, w: int) -> FiltrationData:
    """Dictionary direction that trades (U=0, semisimple V) for levels."""
    if not F.umat_is_zero():
        raise RejectionError("first endomorphism must vanish for the "
                             "filtration dictionary")
    levels, basis, basis_inv = _v_spectrum(F.V, w)
    Gamma = [c.conjugate_const(basis, basis_inv) for c in F.C]
    gp = linalg.mat_mul(linalg.mat_mul(linalg.transpose(basis), F.g), basis)
    S = [[(-1) ** levels[k] * gp[k][l] for l in range(F.n)]
         for k in range(F.n)]
    D = FiltrationData(F.vars, F.n, w, levels, Gamma, S, F.order)
    viol = check_filtration(D)
    if viol:
        raise RejectionError("converted data violates the filtration "
                             "conditions", {"violations": viol})
    return D


def _gauge_flat_frame(Bs, vars, order, n):
    """Solve dG = -(sum B_i dt_i) G with G(0) = id, degree by degree."""
    G = SeriesMatrix.identity(n, vars, order)
    if not vars:
        return G
    for s in range(1, order + 1):
        terms = SeriesMatrix.zeros(n, n, vars, order)
        for i, v in enumerate(vars):
            rhs = (-(Bs[i] @ G)).graded_part(s - 1)
            terms = terms + rhs.mul_var(v).truncate(order).scale(
                Fraction(1, s))
        G = G + terms
    return G


def filtration_to_ftype(D: FiltrationData):
    """Split the connection into residual and Higgs parts and gauge the
    residual part away; returns (structure, gauge)."""
    if D.S is None:
        raise RejectionError("filtration data has no pairing")
    n, lv = D.n, D.levels
    lower, keep, bad = [], [], []
    zero = TruncSeries.zero(D.vars, D.order)
    for a, G in enumerate(D.Gamma):
        Lm = [[zero] * n for _ in range(n)]
        Bm = [[zero] * n for _ in range(n)]
        for k in range(n):
            for l in range(n):
                e = G[k, l]
                if e.is_zero():
                    continue
                if lv[k] == lv[l] - 1:
                    Lm[k][l] = e
                elif lv[k] == lv[l]:
                    Bm[k][l] = e
                else:
                    bad.append({"matrix": a, "entry": (k, l),
                                "from_level": lv[l], "to_level": lv[k]})
        lower.append(SeriesMatrix(Lm))
        keep.append(SeriesMatrix(Bm))
    if bad:
        raise RejectionError("connection moves levels by more than one "
                             "step down", {"violations": bad})
    if all(B.is_zero() for B in keep):
        # connection already purely level-lowering: no gauge needed and no
        # order is lost
        gauge = SeriesMatrix.identity(n, D.vars, D.order)
        C = list(lower)
    else:
        gauge = _gauge_flat_frame(keep, D.vars, D.order, n)
        ginv = gauge.inverse_series()
        C = []
        for a, G in enumerate(D.Gamma):
            full = ginv @ (G @ gauge + gauge.partial(D.vars[a]))
            # the residual (level-preserving) part must be gone now
            for k in range(n):
                for l in range(n):
                    if lv[k] == lv[l] and not full[k, l].is_zero():
                        raise AssertionError("gauge did not remove the "
                                             "level-preserving part")
            C.append(full)
    V = [[Fraction(lv[k] * 2 - D.weight, 2) if k == l else Fraction(0)
          for l in range(n)] for k in range(n)]
    g = [[(-1) ** lv[k] * D.S[k][l] for l in range(n)] for k in range(n)]
    if linalg.transpose(g) != g:
        raise RejectionError("derived metric is not symmetric")
    order = C[0].order if C else D.order
    F = FrobeniusTypeStructure(
        D.vars, n, C,
        SeriesMatrix.zeros(n, n, D.vars, order), V, g, order)
    viol = check_ftype_axioms(F)
    if viol:
        raise RejectionError("converted data violates the structure axioms",
                             {"violations": viol})
    return F, gauge


# ---------------------------------------------------------------------------
# the shift-operator family of examples
# ---------------------------------------------------------------------------


def shift_example(w: int, b_free: Sequence[TruncSeries] = (),
                order: int = 4, var: str = "t") -> FiltrationData:
    """Rank w-1 filtration over a one-dimensional base from shift data.

    The connection sends the i-th frame vector to b_i times the next one;
    b_1 = 1 and b_{w-1} = 0 are forced, the free entries b_2..b_{(w-1)//2}
    must be units, and the remaining ones mirror the free ones so that the
    antidiagonal pairing stays flat.
    """
    if w < 3:
        raise RejectionError("weight must be at least 3")
    half = (w - 1) // 2
    nfree = max(0, half - 1)
    b_free = list(b_free)
    if len(b_free) != nfree:
        raise RejectionError("need %d free coefficient functions for "
                             "weight %d, got %d" % (nfree, w, len(b_free)))
    vars = (var,)
    one = TruncSeries.one(vars, order)
    b = {1: one}
    for k, s in enumerate(b_free, start=2):
        s = s.extend(vars) if s.vars != vars else s
        if s.order < order:
            raise RejectionError("coefficient function b_%d carries too "
                                 "little precision (order %d < %d)"
                                 % (k, s.order, order))
        if s.order > order:
            s = s.truncate(order)
        if s.constant_term == 0:
            raise RejectionError("coefficient function b_%d is not a unit" % k)
        b[k] = s
    for k in range(half + 1, w - 1):
        b[k] = b[w - 1 - k]
    b[w - 1] = TruncSeries.zero(vars, order)
    n = w - 1
    zero = TruncSeries.zero(vars, order)
    Gm = [[zero] * n for _ in range(n)]
    for l in range(n - 1):
        Gm[l + 1][l] = b[l + 1]
    levels = [w - 1 - k for k in range(n)]
    S = [[Fraction(0)] * n for _ in range(n)]
    for k in range(n):
        for l in range(n):
            if (k + 1) + (l + 1) == w:
                S[k][l] = Fraction((-1) ** (k + 1))
    D = FiltrationData(vars, n, w, levels, [SeriesMatrix(Gm)], S, order)
    viol = check_filtration(D)
    if viol:
        raise AssertionError("shift example violates its own invariants: %r"
                             % viol)
    return D


# ---------------------------------------------------------------------------
# graded Jacobi algebras as variations of filtrations
# ---------------------------------------------------------------------------


def _solve_pairing(levels, w, Gammas, n):
    """Constant pairing with level orthogonality, (-1)^w symmetry and
    flatness against the given connection matrices; deterministic
    normalization of the scalar freedom."""
    sign = (-1) ** (w % 2)
    pairs = []
    pos = {}
    for k in range(n):
        for l in range(n):
            if levels[k] + levels[l] != w:
                continue
            if (l, k) in pos:
                continue
            if k == l and sign == -1:
                continue
            pos[(k, l)] = len(pairs)
            pairs.append((k, l))
    if not pairs:
        raise RejectionError("no admissible pairing support for weight %d"
                             % w)

    def entry_unknown(k, l):
        if (k, l) in pos:
            return pos[(k, l)], Fraction(1)
        if (l, k) in pos:
            return pos[(l, k)], Fraction(sign)
        return None

    rows = []
    for G in Gammas:
        for k in range(n):
            for l in range(n):
                # (G^T S + S G)_{kl} = sum_m G_{mk} S_{ml} + S_{km} G_{ml}
                acc: dict[tuple, dict] = {}
                for m in range(n):
                    for coeff_entry, uk in ((G[m, k], entry_unknown(m, l)),
                                            (G[m, l], entry_unknown(k, m))):
                        if uk is None or coeff_entry.is_zero():
                            continue
                        j, sgn = uk
                        for e, c in coeff_entry.terms.items():
                            d = acc.setdefault(e, {})
                            d[j] = d.get(j, Fraction(0)) + sgn * c
                for e, d in acc.items():
                    row = [Fraction(0)] * len(pairs)
                    nz = False
                    for j, c in d.items():
                        if c:
                            row[j] = c
                            nz = True
                    if nz:
                        rows.append(row)
    sols = linalg.nullspace(rows) if rows else [
        [Fraction(int(i == j)) for i in range(len(pairs))]
        for j in range(len(pairs))]

    def build(vec):
        S = [[Fraction(0)] * n for _ in range(n)]
        for (k, l), j in pos.items():
            S[k][l] = vec[j]
            S[l][k] = sign * vec[j]
        return S

    chosen = None
    for vec in sols + ([ [sum(v[j] for v in sols) for j in range(len(pairs))] ]
                       if len(sols) > 1 else []):
        S = build(vec)
        try:
            linalg.mat_inverse(S)
        except ValueError:
            continue
        chosen = S
        break
    if chosen is None:
        raise RejectionError("no nondegenerate flat pairing exists",
                             {"solution_space_dim": len(sols)})
    # scalar normalization: first nonzero entry in row-major order becomes
    # (-1)^(level of its row)
    for k in range(n):
        done = False
        for l in range(n):
            if chosen[k][l] != 0:
                scale = Fraction((-1) ** levels[k]) / chosen[k][l]
                chosen = [[c * scale for c in row] for row in chosen]
                done = True
                break
        if done:
            break
    return chosen, len(sols)


def jacobi_to_filtration(algebra: JacobiAlgebra, S=None, order: int = 3,
                         with_pairing: bool = True, t_prefix: str = "t"):
    """Integer-degree part of the graded quotient as a filtration variation.

    The frame is the integer-degree monomial basis; the connection in the
    degree-1 family directions is minus the multiplication by the moving
    degree-1 classes, recomputed against the deformed polynomial to the
    requested order.  Requires the straight weight system with d dividing
    the variable count and the generation condition.
    """
    ws = algebra.ws
    if len(set(ws.weights)) != 1:
        raise RejectionError("only straight weight systems give projective "
                             "hypersurfaces")
    d = ws.weights[0].denominator
    if ws.weights[0].numerator != 1:
        raise RejectionError("weights must be 1/d")
    nvars = ws.nvars          # = n + 1 ambient homogeneous coordinates
    if nvars % d != 0:
        raise RejectionError(
            "degree %d does not divide the variable count %d" % (d, nvars),
            {"degree": d, "variables": nvars})
    gen = h2_generation_check(algebra)
    if not gen["passes"]:
        failing = sorted(q for q, c in gen["codimensions"].items() if c)
        raise RejectionError(
            "generation condition fails at integer degree %d" % failing[0],
            gen)
    w = nvars + 2 - 2 * nvars // d
    L = ws.scale
    Q = algebra.top_scaled() // L
    blocks = [algebra.piece(q * L).dim for q in range(Q + 1)]
    n = sum(blocks)
    offs = [0]
    for bdim in blocks:
        offs.append(offs[-1] + bdim)
    levels = []
    for q in range(Q + 1):
        levels.extend([w - 1 - q] * blocks[q])
    m0 = blocks[1] if Q >= 1 else 0
    t_vars = tuple("%s%d" % (t_prefix, a + 1) for a in range(m0))
    fam = JacobiFamily(algebra, t_vars, order)
    zero = TruncSeries.zero(t_vars, order)
    Gamma = []
    for a in range(m0):
        Gm = [[zero] * n for _ in range(n)]
        for q in range(Q):
            block = fam.mult_matrix(a, q * L)
            for i in range(blocks[q + 1]):
                for j in range(blocks[q]):
                    x = block[i][j]
                    if not x.is_zero():
                        Gm[offs[q + 1] + i][offs[q] + j] = -x
        Gamma.append(SeriesMatrix(Gm))
    info = {"weight": w, "rank": n, "base_dim": m0,
            "block_dims": blocks}
    if S is None and with_pairing:
        S, soldim = _solve_pairing(levels, w, Gamma, n)
        info["pairing_solution_dim"] = soldim
        info["pairing_unique_up_to_scalar"] = soldim == 1
    D = FiltrationData(t_vars, n, w, levels, Gamma, S, order)
    if S is not None:
        viol = check_filtration(D)
        if viol:
            raise RejectionError("jacobi filtration data fails its "
                                 "invariants", {"violations": viol})
    return D, info
