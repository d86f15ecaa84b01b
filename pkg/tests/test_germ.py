import json
from fractions import Fraction

import pytest

from frobkit.germ import (FrobeniusGermData, InitialData, compare_germs,
                          euler_check, frobenius_via_unfolding, germ_to_ftype,
                          h2_reconstruct, initial_from_filtration,
                          invert_map, normalize_germ, potential_integrate,
                          wdvv_check)
from frobkit.pencil import pencil_to_ftype, structure_connection
from frobkit.series import SeriesMatrix, TruncSeries
from frobkit.structures import (FrobeniusTypeStructure, RejectionError,
                                check_ftype_axioms, shift_example)
from helpers import (consts, cubic_init, point_base_pencil,
                     rank2_higgs_ftype, rank3_point_ftype, shift_inits)

F = Fraction
N = 4


def one_dim_init(order=N):
    FT = FrobeniusTypeStructure(
        (), 1, [], SeriesMatrix.zeros(1, 1, (), order),
        [[F(0)]], [[F(1)]], order)
    return InitialData.create(FT)


def scalar_u_init(u=F(1), order=N):
    FT = FrobeniusTypeStructure(
        (), 1, [], consts([[u]], (), order), [[F(0)]], [[F(1)]], order)
    return InitialData.create(FT)


def point_rank2_init(order=N):
    P, g = point_base_pencil(order)
    FT = FrobeniusTypeStructure((), 2, [], P.U, [[F(0)] * 2] * 2, g, order)
    return InitialData.create(FT, weight=0)


def test_one_dimensional_trivial_germ():
    germ = frobenius_via_unfolding(one_dim_init())
    assert germ.potential.terms == {(3,): F(1, 6)}
    assert germ.degrees == [F(-1)]
    other = h2_reconstruct(one_dim_init())
    assert compare_germs(germ, other)["equal"]


def test_one_dimensional_scalar_u_euler_shift():
    germ = frobenius_via_unfolding(scalar_u_init(F(1)))
    assert germ.potential.terms == {(3,): F(1, 6)}
    # Euler field is (u + s) d/ds: constant part = the eigenvalue
    (E,) = germ.euler
    assert E.constant_term == F(1)
    assert E.terms[(1,)] == F(1)
    assert euler_check(germ, dconst=F(0)) == []


def test_shift_examples_two_paths_agree():
    for (w, tag), init in shift_inits(N).items():
        a = frobenius_via_unfolding(init)
        b = h2_reconstruct(init)
        cmp = compare_germs(a, b)
        assert cmp["equal"], (w, tag, cmp["diffs"])
        assert a.degrees == [F(k) for k in range(-1, w - 2)]


def test_cubic_two_paths_agree():
    init = cubic_init(N)
    a = frobenius_via_unfolding(init)
    b = h2_reconstruct(init)
    assert compare_germs(a, b)["equal"]
    assert a.degrees == [F(-1), F(0)]
    # the elliptic-curve germ: potential is exactly s1^2 s2 / 2
    assert normalize_germ(a).potential.terms == {(2, 1): F(1, 2)}


def test_w5_deformed_differs_from_undeformed():
    inits = shift_inits(N)
    g1 = frobenius_via_unfolding(inits[(5, "1")])
    g2 = frobenius_via_unfolding(inits[(5, "1+t")])
    cmp = compare_germs(g1, g2)
    assert not cmp["equal"]
    # the constant terms of the multiplication agree; the first difference
    # appears in order >= 1 terms of some structure constant
    mult_diffs = [d for d in cmp["diffs"] if d["field"] == "mult"]
    assert mult_diffs
    for d in mult_diffs:
        i = d["index"]
        r = normalize_germ(g1).mult[i] - normalize_germ(g2).mult[i]
        assert r.at_origin() == [[F(0)] * 4 for _ in range(4)]
        assert not r.is_zero()


def test_h2_reconstruct_independent_of_generator_order():
    # rebuilding from scratch and scanning the generation relations in the
    # opposite order must give byte-identical serializations
    init = shift_inits(N)[(5, "1+t")]
    a = h2_reconstruct(init)
    b = h2_reconstruct(init)
    c = h2_reconstruct(init, reverse_generation=True)
    blob = json.dumps(a.to_json(), sort_keys=True)
    assert blob == json.dumps(b.to_json(), sort_keys=True)
    assert blob == json.dumps(c.to_json(), sort_keys=True)


def test_wdvv_passes_on_constructed_germs():
    init = shift_inits(N)[(5, "1+t")]
    germ = frobenius_via_unfolding(init)
    assert wdvv_check(germ) == []
    assert euler_check(germ, dconst=init.d_value) == []


def test_wdvv_detects_corruption():
    init = shift_inits(N)[(4, "1")]
    germ = frobenius_via_unfolding(init)
    bad_mult = [SeriesMatrix([[germ.mult[i][r, c] for c in range(3)]
                              for r in range(3)]) for i in range(3)]
    t = TruncSeries.var(germ.coords, germ.order, germ.coords[1])
    rows = [[bad_mult[1][r, c] for c in range(3)] for r in range(3)]
    rows[2][2] = rows[2][2] + t
    bad_mult[1] = SeriesMatrix(rows)
    bad = FrobeniusGermData(germ.coords, 3, bad_mult, germ.metric,
                            germ.degrees, None, germ.potential, germ.order)
    checks = {v["check"] for v in wdvv_check(bad)}
    assert checks   # at least one axiom must fire
    assert {"associativity", "commutativity", "potentiality",
            "metric-invariance",
            "potential-third-derivatives"} & checks
    echecks = {v["check"] for v in euler_check(bad, dconst=F(2))}
    assert "multiplication-grading" in echecks


def test_euler_degree_multiplicities():
    for (w, tag), init in shift_inits(N).items():
        germ = frobenius_via_unfolding(init)
        assert germ.degrees[0] == F(-1)
        assert all(F(-1) <= d <= F(w - 3) for d in germ.degrees)
        assert sum(1 for d in germ.degrees if d == 0) == 1  # dim M0 = 1


def test_general_u_rank2_germ():
    init = point_rank2_init()
    germ = frobenius_via_unfolding(init)
    assert germ.degrees is None
    assert wdvv_check(germ) == []
    assert euler_check(germ, dconst=F(0)) == []
    # the Euler constant part reflects the eigenvalues 0 and 1
    assert [e.constant_term for e in germ.euler] == [F(0), F(1)]


def test_h2_reconstruct_requires_vanishing_u():
    init = point_rank2_init()
    with pytest.raises(RejectionError):
        h2_reconstruct(init)


def test_potential_integrate_roundtrip():
    init = shift_inits(N)[(5, "1")]
    germ = frobenius_via_unfolding(init)
    pot = potential_integrate(germ.mult, germ.metric, germ.coords,
                              germ.order)
    assert pot == germ.potential
    # differentiating three times reproduces the tensor
    for i in range(germ.n):
        for j in range(germ.n):
            for k in range(germ.n):
                third = pot.partial(germ.coords[i]).partial(
                    germ.coords[j]).partial(germ.coords[k])
                r = third - germ.c_tensor(i, j, k)
                assert r.is_zero()


def test_potential_block_extension_shape():
    # extending a germ by a quadratic block reproduces the block metric:
    # adding F = t1 * (tau_1 tau_2) / 1 ... with the antidiagonal pairing
    # of the new directions
    init = one_dim_init()
    base = frobenius_via_unfolding(init)
    m_extra = 2
    coords = ("s1", "u1", "u2")
    order = base.order
    pot = base.potential.extend(coords)
    t1 = TruncSeries.var(coords, pot.order, "s1")
    u1 = TruncSeries.var(coords, pot.order, "u1")
    u2 = TruncSeries.var(coords, pot.order, "u2")
    pot = pot + (t1 * u1 * u2)      # (1/2) t1 (u1 u2 + u2 u1)
    third = pot.partial("s1").partial("u1").partial("u2")
    assert third.constant_term == F(1)
    # block metric read off the third derivatives with the unit direction
    g = [[F(0)] * 3 for _ in range(3)]
    names = list(coords)
    for i in range(3):
        for j in range(3):
            g[i][j] = pot.partial("s1").partial(names[i]).partial(
                names[j]).constant_term
    assert g == [[F(1), F(0), F(0)],
                 [F(0), F(0), F(1)],
                 [F(0), F(1), F(0)]]


def test_restriction_reproduces_base_higgs():
    # setting the nonzero-degree coordinates to zero recovers the input
    # multiplication on the small base (in flattened coordinates)
    init = shift_inits(N)[(5, "1+t")]
    germ = frobenius_via_unfolding(init)
    pos = [germ.coords[k] for k in range(germ.n)
           if germ.degrees[k] != 0 and k != 0]
    d0 = [k for k in range(germ.n) if germ.degrees[k] == 0]
    other = h2_reconstruct(init)
    for k in d0:
        a = germ.mult[k]
        b = other.mult[k]
        ra = a.restrict_zero(pos)
        rb = b.restrict_zero(pos)
        assert ra == rb
        assert not ra.is_zero()


def test_germ_to_ftype_roundtrip_via_structure_connection():
    # ten instances of rank <= 5: the full-germ tangent structures of all
    # corpus germs plus the point-base structures themselves
    count = 0
    inits = list(shift_inits(N).values()) + [
        cubic_init(N), one_dim_init(), scalar_u_init(), point_rank2_init()]
    for init in inits:
        germ = frobenius_via_unfolding(init)
        FT = germ_to_ftype(germ)
        assert check_ftype_axioms(FT) == []
        w = init.weight
        P, R = structure_connection(FT, w)
        back = pencil_to_ftype(P, R)
        assert back.C == FT.C and back.U == FT.U
        assert back.V == FT.V and back.g == FT.g
        count += 1
        # and the initial structures themselves round-trip
        P2, R2 = structure_connection(init.ftype, w)
        back2 = pencil_to_ftype(P2, R2)
        assert back2.C == init.ftype.C and back2.U == init.ftype.U
        assert (back2.V == [[F(x) for x in row] for row in init.ftype.V]
                and back2.g == [[F(x) for x in row]
                                for row in init.ftype.g])
        count += 1
    assert count >= 10


def test_invert_map_roundtrip():
    vars = ("a", "b")
    a = TruncSeries.var(vars, 4, "a")
    b = TruncSeries.var(vars, 4, "b")
    images = [a + b * b, b - a * b]
    inv = invert_map(images, ("x", "y"))
    x = TruncSeries.var(("x", "y"), 4, "x")
    y = TruncSeries.var(("x", "y"), 4, "y")
    got = [im.compose(dict(zip(vars, inv))) for im in images]
    assert got[0] == x and got[1] == y


def test_normalize_germ_scales_metric_and_potential():
    init = cubic_init(N)
    germ = frobenius_via_unfolding(init)
    doubled = FrobeniusGermData(
        germ.coords, germ.n, germ.mult,
        [[2 * c for c in row] for row in germ.metric],
        germ.degrees, None, germ.potential * 2, germ.order)
    assert compare_germs(germ, doubled)["equal"]
