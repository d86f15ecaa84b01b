"""Shared fixtures: the pencil corpus and the brute-force unfolding oracle."""

from fractions import Fraction

from frobkit.germ import InitialData, initial_from_filtration
from frobkit.jacobi import WeightSystem, XPoly, build_jacobi
from frobkit.pencil import (ConnectionPencil, PairingMatrix,
                            flatness_residual, structure_connection)
from frobkit.series import SeriesMatrix, TruncSeries
from frobkit.structures import (FrobeniusTypeStructure, shift_example,
                                filtration_to_ftype, jacobi_to_filtration)
from frobkit.unfold import gc_check


def F(x):
    return Fraction(x)


def consts(mat, vars, order):
    return SeriesMatrix.from_consts(mat, vars, order)


def fermat(nvars, d):
    ws = WeightSystem.straight(nvars, d)
    f = XPoly(nvars, {tuple(d if i == j else 0 for i in range(nvars)): F(1)
                      for j in range(nvars)})
    return f, ws


def fermat_cubic_algebra():
    f, ws = fermat(3, 3)
    return build_jacobi(f, ws)


def codim_one_polynomial():
    """The weight-(1,1,1,2,2,2)/9 polynomial with isolated singularity."""
    ws = WeightSystem([F("1/9")] * 3 + [F("2/9")] * 3)
    f = XPoly(6, {
        (9, 0, 0, 0, 0, 0): F(1), (0, 9, 0, 0, 0, 0): F(1),
        (0, 0, 9, 0, 0, 0): F(1), (1, 0, 0, 4, 0, 0): F(1),
        (0, 1, 0, 0, 4, 0): F(1), (0, 0, 1, 0, 0, 4): F(1)})
    return f, ws


def point_base_pencil(order=4):
    """The rank-2 base over a point with a regular first endomorphism and
    its weight-0 pairing."""
    U0 = consts([[0, 0], [1, 1]], (), order)
    Z = SeriesMatrix.zeros(2, 2, (), order)
    P = ConnectionPencil((), (), 2, [], [], U0, Z, Z, order)
    g = [[F(0), F(1)], [F(1), F(1)]]
    return P, g


def rank1_log_pencil(order=4, z_extra=4):
    """Rank one with all three poles active; pairing z^2 (1 - z^2)."""
    U = consts([[F(1)]], (), order)
    V = consts([[F(1)]], (), order)
    W = consts([[F(1)]], (), order)
    P = ConnectionPencil((), (), 1, [], [], U, V, W, order)
    K = z_extra + order
    coeffs = []
    for k in range(K + 1):
        c = F(1) if k == 0 else (F(-1) if k == 2 else F(0))
        coeffs.append(consts([[c]], (), order))
    return P, PairingMatrix(2, coeffs)


def rank2_higgs_ftype(order=4):
    """The rank-2 structure over a one-dimensional base with shift Higgs
    field, half-integer spectrum and antidiagonal pairing."""
    vars = ("t",)
    C1 = consts([[0, 0], [1, 0]], vars, order)
    U = SeriesMatrix.zeros(2, 2, vars, order)
    V = [[F("1/2"), F(0)], [F(0), F("-1/2")]]
    g = [[F(0), F(1)], [F(1), F(0)]]
    return FrobeniusTypeStructure(vars, 2, [C1], U, V, g, order)


def rank3_point_ftype(order=4):
    """A rank-3 structure over a point with generation from the first
    frame vector; built as U = g^{-1} S with S symmetric."""
    g = [[F(0), F(0), F(1)], [F(0), F(1), F(0)], [F(1), F(0), F(0)]]
    # g is its own inverse; S symmetric with a generating orbit
    S = [[F(0), F(1), F(0)], [F(1), F(0), F(2)], [F(0), F(2), F(1)]]
    U = [[sum(g[i][k] * S[k][j] for k in range(3)) for j in range(3)]
         for i in range(3)]
    A = [[F(0), F(1), F(0)], [F(-1), F(0), F(0)], [F(0), F(0), F(0)]]
    V = [[sum(g[i][k] * A[k][j] for k in range(3)) for j in range(3)]
         for i in range(3)]
    FT = FrobeniusTypeStructure(
        (), 3, [], consts(U, (), order), V, g, order)
    return FT


def shift_inits(order=4, with_b2_deformed=True):
    """Initial data of the shift examples for weights 3, 4, 5."""
    one = TruncSeries.one(("t",), order)
    t = TruncSeries.var(("t",), order, "t")
    out = {
        (3, "1"): initial_from_filtration(shift_example(3, [], order=order)),
        (4, "1"): initial_from_filtration(shift_example(4, [], order=order)),
        (5, "1"): initial_from_filtration(shift_example(5, [one],
                                                      order=order)),
    }
    if with_b2_deformed:
        out[(5, "1+t")] = initial_from_filtration(
            shift_example(5, [one + t], order=order))
    return out


def cubic_init(order=4):
    D, _ = jacobi_to_filtration(fermat_cubic_algebra(), order=order)
    return initial_from_filtration(D)


def corpus(order=4, z_extra=None):
    """Named flat base pencils, each with an admissible pairing.

    z_extra controls how many spare z-coefficients the pairings carry
    beyond their certified window (the y-transport consumes one per
    degree); default is the order itself.
    """
    if z_extra is None:
        z_extra = order
    K = 4
    out = []

    P, g = point_base_pencil(order)
    out.append(("point-rank2",
                P, PairingMatrix.constant(0, g, (), order, K + z_extra)))

    P1, R1 = rank1_log_pencil(order, z_extra=K + z_extra - order)
    out.append(("rank1-three-poles", P1,
                PairingMatrix(2, R1.coeffs[:K + z_extra + 1])))

    Z1 = SeriesMatrix.zeros(1, 1, (), order)
    triv = ConnectionPencil((), (), 1, [], [], Z1,
                            consts([[F(1)]], (), order), Z1, order)
    out.append(("rank1-trivial", triv,
                PairingMatrix.constant(2, [[F(1)]], (), order,
                                       K + z_extra)))

    for (w, tag), init in sorted(shift_inits(order).items(),
                                 key=lambda kv: (kv[0][0], kv[0][1])):
        P, _ = structure_connection(init.ftype, w, z_order=K + z_extra)
        R = PairingMatrix.constant(w, init.ftype.g, init.ftype.vars, order,
                                   K + z_extra)
        out.append(("shift-w%d-b%s" % (w, tag), P, R))

    ci = cubic_init(order)
    P, _ = structure_connection(ci.ftype, ci.weight, z_order=K + z_extra)
    out.append(("fermat-cubic", P,
                PairingMatrix.constant(ci.weight, ci.ftype.g,
                                       ci.ftype.vars, order, K + z_extra)))

    F2 = rank2_higgs_ftype(order)
    P, _ = structure_connection(F2, 1)
    out.append(("rank2-higgs", P,
                PairingMatrix.constant(1, F2.g, F2.vars, order,
                                       K + z_extra)))

    F3 = rank3_point_ftype(order)
    P, _ = structure_connection(F3, 1)
    out.append(("rank3-point", P,
                PairingMatrix.constant(1, F3.g, F3.vars, order,
                                       K + z_extra)))

    for name, P, R in out:
        assert not flatness_residual(P), name
        assert gc_check(P).ok, name
    return out


# ---------------------------------------------------------------------------
# brute-force oracle for the unfolding
# ---------------------------------------------------------------------------


def _ydeg(e, nt):
    return sum(e[nt:])


def brute_force_unfold(base, y_vars, f, order):
    """Generic staged linear solve of the full flatness-plus-first-column
    system, independent of the production construction: at each y-degree
    the affine residual components are probed against unit perturbations
    of the unknown coefficients and the resulting exact linear system must
    have a unique solution.
    """
    from frobkit import linalg as la

    n = base.n
    t_vars = base.t_vars
    vars = t_vars + tuple(y_vars)
    nt = len(t_vars)
    N = order

    def blocks_to_pencil(blocks):
        m = len(t_vars)
        l = len(y_vars)
        return ConnectionPencil(
            t_vars, tuple(y_vars), n,
            blocks[:m], blocks[m:m + l],
            blocks[m + l], blocks[m + l + 1], blocks[m + l + 2], N)

    def monomials(ydeg):
        out = []

        def rec(i, e, rem):
            if i == len(vars):
                if _ydeg(tuple(e), nt) == ydeg:
                    out.append(tuple(e))
                return
            for k in range(rem + 1):
                e.append(k)
                rec(i + 1, e, rem - k)
                e.pop()

        rec(0, [], N)
        return [e for e in out]

    m, l = len(t_vars), len(y_vars)

    def prep(M):
        M = M.extend(vars)
        if M.order > N:
            return M.truncate(N)
        if M.order == N:
            return M
        assert M.is_constant()
        return SeriesMatrix.from_consts(M.at_origin(), vars, N)

    base_blocks = ([prep(M) for M in base.C]
                   + [SeriesMatrix.zeros(n, n, vars, N) for _ in range(l)]
                   + [prep(base.U), prep(base.V), prep(base.W)])

    state = [[[dict(M[i, j].terms) for j in range(n)] for i in range(n)]
             for M in base_blocks]

    def build(extra=None):
        mats = []
        for b in range(len(state)):
            rows = []
            for i in range(n):
                row = []
                for j in range(n):
                    terms = dict(state[b][i][j])
                    if extra and extra[0] == (b, i, j):
                        terms[extra[1]] = terms.get(extra[1], F(0)) + extra[2]
                    row.append(TruncSeries(vars, N, terms))
                rows.append(row)
            mats.append(SeriesMatrix(rows))
        return blocks_to_pencil(mats)

    def residual_components(P, stage):
        """Flattened affine residual components for this stage."""
        out = []
        res = flatness_residual(P)

        def collect(eq, ydeg):
            for idx, r in res.get(eq, []):
                for i in range(n):
                    for j in range(n):
                        for e, c in sorted(r[i, j].terms.items()):
                            if _ydeg(e, nt) == ydeg:
                                out.append(((eq, idx, i, j, e), c))

        for eq in ("higgs-commute-ty", "u-commute-y", "potential-ty",
                   "u-transport-y", "w-transport-y", "v-transport-y"):
            collect(eq, stage)
        if stage >= 1:
            collect("potential-yy", stage - 1)
            collect("higgs-commute-yy", stage)
        for eq in ("higgs-commute-tt", "potential-tt", "u-commute-t",
                   "u-transport-t", "w-transport-t", "v-transport-t"):
            collect(eq, stage + 1)
        for a in range(l):
            Fa = P.F[a]
            for i in range(n):
                d = Fa[i, 0] - f[i].partial(y_vars[a])
                for e, c in sorted(d.terms.items()):
                    if _ydeg(e, nt) == stage:
                        out.append((("first-column", a, i, 0, e), c))
        return dict(out)

    for stage in range(N + 1):
        unknowns = []
        for a in range(l):
            for i in range(n):
                for j in range(n):
                    for e in monomials(stage):
                        unknowns.append((m + a, i, j, e))
        if stage + 1 <= N:
            for b in list(range(m)) + list(range(m + l, m + l + 3)):
                for i in range(n):
                    for j in range(n):
                        for e in monomials(stage + 1):
                            unknowns.append((b, i, j, e))
        if not unknowns:
            continue
        base_res = residual_components(build(), stage)
        keys = set(base_res)
        cols = []
        for u in unknowns:
            pert = residual_components(
                build(extra=((u[0], u[1], u[2]), u[3], F(1))), stage)
            keys |= set(pert)
            cols.append(pert)
        keys = sorted(keys)
        A = [[cols[c].get(k, F(0)) - base_res.get(k, F(0))
              for c in range(len(unknowns))] for k in keys]
        b_vec = [-base_res.get(k, F(0)) for k in keys]
        # exact least-structure solve: unique solution required
        rows = [A[r] + [b_vec[r]] for r in range(len(keys))]
        piv = la._elim(rows, len(unknowns), augment=1)
        if len(piv) != len(unknowns):
            raise AssertionError("oracle system is underdetermined at "
                                 "y-degree %d" % stage)
        sol = [F(0)] * len(unknowns)
        for r, pc in enumerate(piv):
            sol[pc] = rows[r][len(unknowns)]
        for r in range(len(piv), len(rows)):
            if rows[r][len(unknowns)] != 0:
                raise AssertionError("oracle system is inconsistent at "
                                     "y-degree %d" % stage)
        for u, val in zip(unknowns, sol):
            if val:
                b, i, j, e = u
                cur = state[b][i][j].get(e, F(0)) + val
                if cur:
                    state[b][i][j][e] = cur
                else:
                    state[b][i][j].pop(e, None)
    out = build()
    assert not flatness_residual(out)
    return out
