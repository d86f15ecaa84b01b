"""Connection pencils on the projective line times a base germ.

A pencil stores the five named coefficient blocks of the connection form

    (1/z) sum_i C_i dt_i  +  (1/z) sum_a F_a dy_a
       +  (U/z^2 + V/z + W/(z-1)) dz

in a frame of global sections flat at infinity.  z never becomes a series
variable: the fourteen flatness equations are expanded symbolically in the
pole structure and evaluated exactly on the series coefficients.

The pairing companion stores the z-power coefficients of z^(-weight) times
the Gram matrix of the flat pairing in the same frame, again exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from . import linalg
from .series import SeriesMatrix, TruncSeries, euler_integrate, frac_to_str
from .structures import FrobeniusTypeStructure, RejectionError, check_ftype_axioms

__all__ = [
    "ConnectionPencil", "PairingMatrix", "flatness_residual", "is_flat",
    "potential_matrix", "reduced_flatness_check", "pairing_extension_check",
    "structure_connection", "pencil_to_ftype",
]


@dataclass
class ConnectionPencil:
    """Coefficient blocks of a rank-n pencil over base (t_vars, y_vars)."""

    t_vars: tuple
    y_vars: tuple
    n: int
    C: list
    F: list
    U: SeriesMatrix
    V: SeriesMatrix
    W: SeriesMatrix
    order: int

    def __post_init__(self):
        self.t_vars = tuple(self.t_vars)
        self.y_vars = tuple(self.y_vars)
        if len(self.C) != len(self.t_vars) or len(self.F) != len(self.y_vars):
            raise ValueError("coefficient blocks do not match the variables")

    @property
    def vars(self):
        return self.t_vars + self.y_vars

    def all_blocks(self):
        named = [("C[%d]" % i, m) for i, m in enumerate(self.C)]
        named += [("F[%d]" % a, m) for a, m in enumerate(self.F)]
        named += [("U", self.U), ("V", self.V), ("W", self.W)]
        return named

    def restrict_y0(self) -> "ConnectionPencil":
        """Restriction to y = 0, dropping the unfolding directions."""
        ys = self.y_vars
        return ConnectionPencil(
            self.t_vars, (), self.n,
            [c.restrict_zero(ys) for c in self.C], [],
            self.U.restrict_zero(ys), self.V.restrict_zero(ys),
            self.W.restrict_zero(ys), self.order)

    def residues(self) -> dict:
        """Residue data at the two logarithmic points.

        At infinity the residual connection is trivial in this frame and
        the residue endomorphism is -(V+W); at z=1 the residual connection
        has the C/F blocks themselves and the residue endomorphism is W.
        Each endomorphism must be flat for its residual connection; the
        residuals of those flatness conditions are returned alongside.
        """
        VW = self.V + self.W
        flat_inf = []
        if self.order >= 1:
            for v in self.vars:
                r = VW.partial(v)
                if not r.is_zero():
                    flat_inf.append({"direction": v, "residual": r.to_json()})
        flat_one = []
        blocks = list(self.C) + list(self.F)
        if self.order >= 1:
            for v, B in zip(self.vars, blocks):
                r = self.W.partial(v) - self.W.commutator(B)
                if not r.is_zero():
                    flat_one.append({"direction": v, "residual": r.to_json()})
        return {
            "at_infinity": {"endomorphism": (-VW), "flat": not flat_inf,
                            "violations": flat_inf},
            "at_one": {"endomorphism": self.W,
                       "connection_blocks": blocks,
                       "flat": not flat_one, "violations": flat_one},
        }

    def to_json(self):
        return {
            "t_vars": list(self.t_vars),
            "y_vars": list(self.y_vars),
            "rank": self.n,
            "order": self.order,
            "C": [m.to_json() for m in self.C],
            "F": [m.to_json() for m in self.F],
            "U": self.U.to_json(),
            "V": self.V.to_json(),
            "W": self.W.to_json(),
        }

    @classmethod
    def from_json(cls, obj):
        return cls(
            tuple(obj["t_vars"]), tuple(obj["y_vars"]), obj["rank"],
            [SeriesMatrix.from_json(m) for m in obj["C"]],
            [SeriesMatrix.from_json(m) for m in obj["F"]],
            SeriesMatrix.from_json(obj["U"]),
            SeriesMatrix.from_json(obj["V"]),
            SeriesMatrix.from_json(obj["W"]),
            obj["order"])


@dataclass
class PairingMatrix:
    """z-power coefficients R_0..R_K of z^(-weight) times the Gram matrix.

    coeffs[k] is a SeriesMatrix over the pencil base; the certified claim
    is that the pairing takes values in z^weight times holomorphic
    functions, coefficient by coefficient up to z-order K.
    """

    weight: int
    coeffs: list

    @property
    def z_order(self):
        return len(self.coeffs) - 1

    def symmetry_violations(self):
        """R(-z)^T = (-1)^weight R(z) reads R_k^T = (-1)^k R_k here."""
        out = []
        for k, R in enumerate(self.coeffs):
            r = R.transpose() - (R if k % 2 == 0 else -R)
            if not r.is_zero():
                out.append({"z_power": k, "residual": r.to_json()})
        return out

    def gram_invertible(self) -> bool:
        try:
            linalg.mat_inverse(self.coeffs[0].at_origin())
        except ValueError:
            return False
        return True

    def restrict_y0(self, y_vars):
        return PairingMatrix(self.weight,
                             [R.restrict_zero(y_vars) for R in self.coeffs])

    def to_json(self):
        return {"weight": self.weight,
                "z_order": self.z_order,
                "coeffs": [R.to_json() for R in self.coeffs]}

    @classmethod
    def from_json(cls, obj):
        return cls(obj["weight"],
                   [SeriesMatrix.from_json(R) for R in obj["coeffs"]])

    @classmethod
    def constant(cls, weight, g, vars, order, z_order):
        """The pairing z^weight * g of a structure connection."""
        R0 = SeriesMatrix.from_consts(g, vars, order)
        Z = SeriesMatrix.zeros(len(g), len(g), vars, order)
        return cls(weight, [R0] + [Z] * z_order)


# ---------------------------------------------------------------------------
# flatness
# ---------------------------------------------------------------------------


def flatness_residual(P: ConnectionPencil) -> dict:
    """All fourteen coefficient equations of the flatness of the pencil.

    Returns {equation id: [(indices, residual matrix), ...]} keeping only
    the nonzero residuals; an empty dict means flat modulo the order.
    """
    res: dict = {}

    def put(eq, idx, r):
        if not r.is_zero():
            res.setdefault(eq, []).append((idx, r))

    C, F, U, V, W = P.C, P.F, P.U, P.V, P.W
    t, y = P.t_vars, P.y_vars
    m, l = len(t), len(y)
    can_diff = P.order >= 1
    for i in range(m):
        for j in range(i + 1, m):
            put("higgs-commute-tt", (i, j), C[i].commutator(C[j]))
            if can_diff:
                put("potential-tt", (i, j),
                    C[i].partial(t[j]) - C[j].partial(t[i]))
    for i in range(m):
        for a in range(l):
            put("higgs-commute-ty", (i, a), C[i].commutator(F[a]))
            if can_diff:
                put("potential-ty", (i, a),
                    C[i].partial(y[a]) - F[a].partial(t[i]))
    for a in range(l):
        for b in range(a + 1, l):
            put("higgs-commute-yy", (a, b), F[a].commutator(F[b]))
            if can_diff:
                put("potential-yy", (a, b),
                    F[a].partial(y[b]) - F[b].partial(y[a]))
    for i in range(m):
        put("u-commute-t", (i,), C[i].commutator(U))
        if can_diff:
            put("u-transport-t", (i,),
                U.partial(t[i]) - V.commutator(C[i]) + C[i])
            put("w-transport-t", (i,), W.partial(t[i]) - W.commutator(C[i]))
            put("v-transport-t", (i,), V.partial(t[i]) + W.commutator(C[i]))
    for a in range(l):
        put("u-commute-y", (a,), F[a].commutator(U))
        if can_diff:
            put("u-transport-y", (a,),
                U.partial(y[a]) - V.commutator(F[a]) + F[a])
            put("w-transport-y", (a,), W.partial(y[a]) - W.commutator(F[a]))
            put("v-transport-y", (a,), V.partial(y[a]) + W.commutator(F[a]))
    return res


def is_flat(P: ConnectionPencil) -> bool:
    return not flatness_residual(P)


def residual_report(res: dict) -> dict:
    """JSON-ready view of a residual dictionary."""
    return {eq: [{"indices": list(idx), "residual": r.to_json()}
                 for idx, r in items]
            for eq, items in sorted(res.items())}


# ---------------------------------------------------------------------------
# potential matrix and the reduced equation set
# ---------------------------------------------------------------------------


def potential_matrix(P: ConnectionPencil) -> SeriesMatrix:
    """The unique A with A(0)=0, dA/dt_i = C_i and dA/dy_a = F_a.

    Requires the closedness equations among the fourteen; the result is
    exact one order beyond the pencil order.
    """
    res = flatness_residual(P)
    for eq in ("potential-tt", "potential-ty", "potential-yy"):
        if eq in res:
            raise RejectionError("pencil one-form is not closed",
                                 {"failing": residual_report(
                                     {eq: res[eq]})})
    vars = P.vars
    blocks = list(P.C) + list(P.F)
    n = P.n
    entries = []
    for r in range(n):
        row = []
        for c in range(n):
            parts = {v: blocks[k][r, c] for k, v in enumerate(vars)}
            row.append(euler_integrate(parts) if parts else
                       TruncSeries.zero(vars, P.order))
        entries.append(row)
    if not vars:
        return SeriesMatrix.zeros(n, n, vars, P.order)
    return SeriesMatrix(entries)


def reduced_flatness_check(P: ConnectionPencil) -> dict:
    """Constancy of V+W, the integrated form of U, and the reduced
    sufficient equation set.

    Returns a report dict; "passes" is True iff every part vanished.
    """
    report: dict = {"passes": True}

    def fail(key, payload):
        report["passes"] = False
        report[key] = payload

    VW = P.V + P.W
    if not VW.is_constant():
        nonconst = VW - SeriesMatrix.from_consts(
            VW.at_origin(), P.vars, VW.order)
        fail("residue-at-infinity-nonconstant", nonconst.to_json())
    res_inf = VW.at_origin()
    report["residue_at_infinity"] = [[frac_to_str(c) for c in row]
                                     for row in res_inf]

    A = potential_matrix(P)
    ys = P.y_vars
    if ys:
        def unfolded_part(M):
            return M - M.restrict_zero(ys).extend(P.vars)

        Ares = unfolded_part(A).truncate(P.order)
        RES = SeriesMatrix.from_consts(res_inf, P.vars, P.order)
        rhs = (RES @ Ares - Ares @ RES) - Ares - unfolded_part(P.W)
        r = unfolded_part(P.U) - rhs
        if not r.is_zero():
            fail("integrated-u-formula", r.to_json())
    # reduced sufficient set: the y-direction commutation and W-transport
    # equations in full, the rest restricted to y = 0
    full = flatness_residual(P)
    reduced: dict = {}
    for eq in ("higgs-commute-ty", "u-commute-y", "w-transport-y"):
        if eq in full:
            reduced[eq] = full[eq]
    base = flatness_residual(P.restrict_y0())
    for eq in ("higgs-commute-tt", "u-commute-t", "u-transport-t",
               "w-transport-t"):
        if eq in base:
            reduced[eq + "@y=0"] = base[eq]
    if reduced:
        fail("reduced-set-residuals", residual_report(reduced))
    return report


# ---------------------------------------------------------------------------
# pairing transport
# ---------------------------------------------------------------------------


def _z_direction_residuals(P: ConnectionPencil, R: PairingMatrix) -> list:
    """Coefficients of the z-direction transport of the pairing.

    For each z-power k < K the identity reads

      (w + k) R_k = U^T R_{k+1} - R_{k+1} U + V^T R_k + R_k V
                    - sum_{j>=1} W^T R_{k-j} + sum_{j>=1} (-1)^(j-1) R_{k-j} W.
    """
    out = []
    w = R.weight
    K = R.z_order
    # the z^(w-1) coefficient: nothing on the left, so the commutator with
    # the irregular part must vanish outright
    r = P.U.transpose() @ R.coeffs[0] - R.coeffs[0] @ P.U
    if not r.is_zero():
        out.append({"z_power": -1, "residual": r.to_json()})
    for k in range(K):
        lhs = R.coeffs[k].scale(Fraction(w + k))
        rhs = (P.U.transpose() @ R.coeffs[k + 1]
               - R.coeffs[k + 1] @ P.U
               + P.V.transpose() @ R.coeffs[k]
               + R.coeffs[k] @ P.V)
        for j in range(1, k + 1):
            rhs = rhs - P.W.transpose() @ R.coeffs[k - j]
            term = R.coeffs[k - j] @ P.W
            rhs = rhs + (term if j % 2 == 1 else -term)
        r = lhs - rhs
        if not r.is_zero():
            out.append({"z_power": k, "residual": r.to_json()})
    return out


def _base_direction_residuals(P: ConnectionPencil, R: PairingMatrix) -> list:
    """d/du R_k = B^T R_{k+1} - R_{k+1} B for every base coordinate u."""
    out = []
    if P.order < 1:
        return out
    blocks = list(zip(P.vars, list(P.C) + list(P.F)))
    for k in range(R.z_order):
        for v, B in blocks:
            r = R.coeffs[k].partial(v) - (B.transpose() @ R.coeffs[k + 1]
                                          - R.coeffs[k + 1] @ B)
            if not r.is_zero():
                out.append({"z_power": k, "direction": v,
                            "residual": r.to_json()})
    return out


def pairing_obstruction(P: ConnectionPencil, R0: SeriesMatrix) -> dict:
    """The lowest-z obstruction B^T R_0 - R_0 B per base direction."""
    out = {}
    for v, B in zip(P.vars, list(P.C) + list(P.F)):
        r = B.transpose() @ R0 - R0 @ B
        if not r.is_zero():
            out[v] = r
    return out


def pairing_extension_check(P: ConnectionPencil, R0: PairingMatrix,
                            z_order: int) -> dict:
    """Extend a pairing given at y=0 over the unfolding directions and
    certify that it stays in z^weight times holomorphic.

    R0 must carry z-coefficients up to z_order + order (the transport in
    the unfolding directions consumes one z-order per y-degree).  Returns
    a report with the extended PairingMatrix on success; any nonzero
    z^(weight-1) obstruction is reported as a certification failure.
    """
    report: dict = {"passes": True, "weight": R0.weight, "z_order": z_order}

    def fail(key, payload):
        report["passes"] = False
        report[key] = payload

    N = P.order
    need = z_order + N
    if R0.z_order < need:
        raise RejectionError(
            "base pairing carries %d z-coefficients, need %d for y-order %d"
            % (R0.z_order + 1, need + 1, N))
    base = P.restrict_y0()
    from .unfold import gc_check
    gc = gc_check(base, with_u=True)
    if not gc.ok:
        fail("generation-condition", gc.to_json())
        return report
    sym = R0.symmetry_violations()
    if sym:
        fail("base-symmetry", sym)
    if not R0.gram_invertible():
        fail("base-gram-singular", True)
    zres = _z_direction_residuals(base, R0)
    if zres:
        fail("base-z-transport", zres)
    tres = _base_direction_residuals(base, R0)
    if tres:
        fail("base-t-transport", tres)
    if not report["passes"]:
        return report

    vars = P.vars
    ys = P.y_vars
    coeffs = [R.extend(vars) for R in R0.coeffs]
    if ys:
        for s in range(1, N + 1):
            top = need - s
            new = []
            for k in range(top + 1):
                grad = {}
                for a, v in enumerate(ys):
                    rhs = (P.F[a].transpose() @ coeffs[k + 1]
                           - coeffs[k + 1] @ P.F[a])
                    grad[v] = rhs.graded_part(s - 1, names=ys)
                upd = None
                for v, M in grad.items():
                    piece = M.mul_var(v).scale(Fraction(1, s))
                    upd = piece if upd is None else upd + piece
                new.append(coeffs[k] + upd.truncate(coeffs[k].order))
            # obstruction: the transport must not create a z^(w-1) term
            for a, v in enumerate(ys):
                ob = (P.F[a].transpose() @ new[0] - new[0] @ P.F[a])
                ob = ob.graded_part(s - 1, names=ys)
                if not ob.is_zero():
                    fail("holomorphy-obstruction",
                         {"y_degree": s, "direction": v,
                          "residual": ob.to_json()})
            if not report["passes"]:
                return report
            coeffs = new + coeffs[top + 1:]
    # only the first z_order+1 coefficients are fully extended in y; the
    # deeper ones were consumed by the transport, so certification stops
    # at the requested window
    R = PairingMatrix(R0.weight, coeffs[:z_order + 1])
    sym = R.symmetry_violations()
    if sym:
        fail("extended-symmetry", sym)
    zres = _z_direction_residuals(P, R)
    if zres:
        fail("extended-z-transport", zres)
    tres = _base_direction_residuals(P, R)
    if tres:
        fail("extended-base-transport", tres)
    ob = pairing_obstruction(P, coeffs[0])
    if ob:
        fail("holomorphy-obstruction",
             {v: r.to_json() for v, r in ob.items()})
    if report["passes"]:
        report["pairing"] = R
    return report


# ---------------------------------------------------------------------------
# structure connections (the pencil of a Frobenius type structure)
# ---------------------------------------------------------------------------


def structure_connection(F: FrobeniusTypeStructure, w: int, z_order: int = 0):
    """Pencil and pairing attached to a Frobenius type structure.

    In the flat frame: the t-blocks are the Higgs matrices, U is the first
    endomorphism, V = -(flat endomorphism) + (w/2) id, W = 0, and the
    pairing is z^w times the metric (all higher z-coefficients vanish, so
    any requested z_order is available exactly).  Flatness follows from
    the axioms and is asserted here.
    """
    viol = check_ftype_axioms(F)
    if viol:
        raise RejectionError("structure axioms fail",
                             {"violations": viol})
    n = F.n
    vars = F.vars
    order = F.order
    half = Fraction(w, 2)
    V = [[-Fraction(F.V[i][j]) + (half if i == j else 0) for j in range(n)]
         for i in range(n)]
    P = ConnectionPencil(
        vars, (), n, list(F.C), [],
        F.U,
        SeriesMatrix.from_consts(V, vars, order),
        SeriesMatrix.zeros(n, n, vars, order),
        order)
    res = flatness_residual(P)
    if res:
        raise AssertionError("structure connection of a valid structure "
                             "must be flat: %r" % sorted(res))
    R = PairingMatrix.constant(w, F.g, vars, order, z_order=z_order)
    return P, R


def pencil_to_ftype(P: ConnectionPencil, R: PairingMatrix) -> FrobeniusTypeStructure:
    """Read the Frobenius type structure back off a structure connection.

    All base coordinates are treated uniformly; requires W = 0, constant V
    (flatness of the residue at infinity) and an invertible constant Gram
    matrix.
    """
    if not P.W.is_zero():
        raise RejectionError("pencil has a pole at z=1; not a structure "
                             "connection")
    if not P.V.is_constant():
        raise RejectionError("V block is not constant; residue at infinity "
                             "is not flat")
    w = R.weight
    half = Fraction(w, 2)
    Vc = P.V.at_origin()
    Vend = [[-Vc[i][j] + (half if i == j else 0) for j in range(P.n)]
            for i in range(P.n)]
    g = R.coeffs[0]
    if not g.is_constant():
        raise RejectionError("Gram matrix of the pairing is not constant "
                             "in the flat frame")
    F = FrobeniusTypeStructure(
        P.vars, P.n, list(P.C) + list(P.F), P.U, Vend, g.at_origin(),
        P.order)
    return F
