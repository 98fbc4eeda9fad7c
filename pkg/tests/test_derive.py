import math
from dataclasses import replace
from fractions import Fraction as F

import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from conftest import random_fraction
from fsalpairs.analyze import residuals, stability
from fsalpairs.derive import (
    ConstructionError, DegenerateParametersError, GeneralParams, InconsistentPairError,
    NoSolutionError, closed_form_A, closed_form_B, aux_quantities, back_substitute, c4_six_stage,
    construct_family, derive, extended_nodes, family_cp3, k6_closed_form, params_of,
    parse_value, rank_invariant, solve_bprime, solve_d, construction_matrix, transform_matrix,
    type_C_roots, AuxQuantities, KINDS,
)
from fsalpairs.library import BPRIME_C3_C2_REFERENCE_D, builtin, sqrt4054_c5
from fsalpairs.tableau import FLOAT, RATIONAL

TYPE_B = {"c2": "1/6", "c3": "7/32", "c5": "3/4", "c6": "7/8"}
nice = st.fractions(min_value=F(1, 20), max_value=F(19, 20), max_denominator=40)


def matvec(A, v):
    return [sum(a * x for a, x in zip(row, v)) for row in A]


def parallel(u, v):
    k = next(i for i, x in enumerate(u) if x != 0)
    r = v[k] / u[k]
    return all(y == r * x for x, y in zip(u, v))


def failing_trees(pair):
    return sorted(e.tree.bracket() for e in residuals(pair).failures(d_order=0))


# -- parsing -----------------------------------------------------------------

def test_parse_value():
    assert parse_value("3/8") == F(3, 8)
    assert parse_value("2") == F(2)
    assert parse_value("0.25", FLOAT) == 0.25
    with pytest.raises(ValueError, match="p/q"):
        parse_value("0.25")
    for mode in (RATIONAL, FLOAT):
        with pytest.raises(ValueError, match="zero denominator"):
            parse_value("1/0", mode)


# -- node relations ------------------------------------------------------------

def test_c4_six_stage_type_b():
    c2, c3 = F(1, 6), F(7, 32)
    assert c4_six_stage(c2, c3, family_cp3("B", c2, c3)) == F(33, 68)


def test_c4_six_stage_hand_example():
    assert c4_six_stage(F(1, 5), F(3, 5), F(9, 50)) == F(3, 4)


@given(nice, nice)
def test_c4_six_stage_type_a_closed_form(c2, c3):
    assume(c3 != c2 and 1 - 4 * c3 + 5 * c3 ** 2 != 0)
    assert c4_six_stage(c2, c3, c3 ** 2 / 2) == c3 / (2 * (1 - 4 * c3 + 5 * c3 ** 2))


def test_family_cp3_examples():
    assert family_cp3("A", F(1, 5), F(21, 65)) == F(441, 8450)
    with pytest.raises(ValueError):
        family_cp3("Q", F(1, 5), F(1, 3))


@given(nice)
def test_family_cp3_type_b_at_c2_one_fifth(c3):
    assert family_cp3("B", F(1, 5), c3) == 3 * (5 * c3 - 1) * (1 + c3) / 50


@given(st.floats(min_value=-0.5, max_value=1.5))
def test_type_c_closed_form(c3):
    disc = 73 - 208 * c3 + 144 * c3 ** 2
    roots = type_C_roots(0.2, c3, 0.8, 1.0)
    if abs(c3) < 1e-9 or abs(5 * c3 - 1) < 1e-9:
        return
    if disc < 0:
        assert roots == []
        return
    expected = sorted((c3 * (5 * c3 - 1) * (13 - 12 * c3 + sg * math.sqrt(disc)) / 20
                       for sg in (1, -1)), reverse=True)
    scale = max(1.0, max(abs(x) for x in expected))
    assert roots[0] == pytest.approx(expected[0], abs=1e-12 * scale)
    assert roots[-1] == pytest.approx(expected[1], abs=1e-12 * scale)


def test_type_c_roots_exact_when_rational():
    # c3 = 1/2: discriminant 73 - 104 + 36 = 5 is no square, c3 = 1: 9 is
    roots = type_C_roots(F(1, 5), F(1), F(4, 5), F(1))
    assert all(isinstance(r, F) for r in roots)
    assert roots == [F(1 * 4 * (13 - 12 + 3), 20), F(4 * (13 - 12 - 3), 20)]


# -- auxiliary quantities ----------------------------------------------------------

def test_aux_examples():
    nodes = extended_nodes(params_of(builtin("typeB")))
    aux = aux_quantities(params_of(builtin("typeB")).nodes, nodes.cp, nodes.cpp)
    assert aux.gamma(4, "c''c") == 0
    assert all(aux.lam(4, k) == 0 for k in KINDS)
    for m in range(4, 8):
        for k in KINDS:
            assert aux.lam(m, k) == aux.cpp4 * aux.gamma(m, k) - aux.cpp[m - 1] * aux.gamma(4, k)
    at = AuxQuantities([0, F(1, 5), F(3, 5), 0, 0, 0, 1], [0, 0, F(1, 10)] + [0] * 4, [0] * 7)
    assert at.eta("c'c") == 0
    with pytest.raises(ValueError):
        aux_quantities([0] * 6, [0] * 7, [0] * 7)


# -- extended nodes and back substitution -------------------------------------------

def test_type_b_extended_nodes():
    gp = params_of(builtin("typeB"))
    assert gp.cp3 == family_cp3("B", F(1, 6), F(7, 32))
    nodes = extended_nodes(gp)
    assert nodes.k6 == F(7, 5440)
    assert nodes.cp[:2] == (0, 0) and nodes.cpp[:3] == (0, 0, 0)
    assert nodes.cp[6] == F(1, 2) and nodes.cpp[6] == F(1, 6)
    pair = back_substitute(gp, nodes)
    assert pair.A[3][2] == F(180960, 112999)


def test_simplifying_assumption_propagates():
    c3 = F(21, 65)
    gp = GeneralParams.make(F(1, 5), c3, F(9, 10), F(39, 40), 1, c3 ** 2 / 2)
    nodes = extended_nodes(gp)
    c = gp.nodes
    for m in (3, 4, 5, 6):
        assert nodes.cp[m] == c[m] ** 2 / 2
    pair = back_substitute(gp, nodes)
    assert pair.b[1] == 0


def test_bprime_c3_c2_weights():
    pair = construct_family("Bprime-c3-c2", {"c2": "1/4", "c5": "4/5"})
    assert pair.c[3] == F(1, 3) == (3 - 5 * F(4, 5)) / (5 * (1 - 2 * F(4, 5)))
    assert list(pair.b) == [F(5, 48), 0, 0, F(27, 56), F(125, 336), F(1, 24), 0]


def test_bprime_c3_zero_entry():
    pair = construct_family("Bprime-c3-0", {"c2": "4/15", "c4": "1/2", "c5": "4/5"})
    assert pair.A[4][3] == F(128, 175)


# -- d as a null vector -----------------------------------------------------------

def test_solve_d_type_b():
    d = solve_d(builtin("typeB").with_d([0] * 7))
    assert parallel(d, [0, F(2349, 700), F(-832, 175), F(83521, 31800), F(-377, 168),
                        F(377, 371), 0])
    assert max(abs(x) for x in d) == 1
    assert next(x for x in d if x != 0) > 0


def test_solve_d_bprime_c3_zero():
    d = solve_d(builtin("bprime-c3-0"))
    assert parallel(d, [F(1, 40), F(405, 616), F(-7, 40), F(-32, 35), F(5, 8), F(-56, 55),
                        F(4, 5)])


def test_perturbed_pair_has_no_d():
    p = builtin("aprime")
    A = [list(r) for r in p.A]
    A[4][1] += F(1, 1000)
    A[4][0] -= F(1, 1000)
    with pytest.raises(InconsistentPairError):
        solve_d(replace(p, A=tuple(map(tuple, A))))


def test_reference_c3_c2_d_is_not_a_null_vector():
    p = builtin("bprime-c3-c2")
    assert residuals(p.with_d(BPRIME_C3_C2_REFERENCE_D)).failures()
    assert residuals(p).ok()
    # the reference d2, d3 are those of the same construction with c'3 = 1/40
    q = construct_family("Bprime-c3-c2", {"c2": "1/4", "c5": "4/5", "cp3": "1/40"})
    assert parallel(q.d, BPRIME_C3_C2_REFERENCE_D)


# -- families -------------------------------------------------------------------------

def test_type_b_reproduced_exactly():
    p, ref = construct_family("B", TYPE_B), builtin("typeB")
    assert (p.c, p.A, p.b) == (ref.c, ref.A, ref.b)
    assert parallel(ref.d, p.d)


@pytest.mark.parametrize("family, params", [
    ("A", {"c2": "1/5", "c3": "1/3", "c5": "4/5", "c6": "9/10"}),
    ("A", {"c2": "1/7", "c3": "2/7", "c5": "5/7", "c6": "6/7"}),
    ("B", TYPE_B),
    ("B", {"c2": "1/5", "c3": "2/5", "c5": "7/10", "c6": "9/10"}),
])
def test_closed_form_and_general_agree(family, params):
    a = construct_family(family, params, method="closed-form")
    g = construct_family(family, params, method="general")
    assert (a.c, a.A, a.b, a.d) == (g.c, g.A, g.b, g.d)
    fn = closed_form_A if family == "A" else closed_form_B
    res = fn(*(parse_value(params[k]) for k in ("c2", "c3", "c5", "c6")))
    assert parallel(a.d, res.d)


def test_bprime_c3_zero_closed_form_and_general_agree():
    params = {"c2": "4/15", "c4": "1/2", "c5": "4/5"}
    a = construct_family("Bprime-c3-0", params, method="closed-form")
    g = construct_family("Bprime-c3-0", params, method="general")
    assert (a.A, a.b, a.d) == (g.A, g.b, g.d)


def test_type_a_independent_of_c2():
    base = {"c3": "1/3", "c5": "4/5", "c6": "9/10"}
    p = construct_family("A", dict(base, c2="1/5"))
    q = construct_family("A", dict(base, c2="1/9"))
    assert p.b == q.b and p.d == q.d
    cp_p, cp_q = matvec(p.A, p.c), matvec(q.A, q.c)
    cpp_p, cpp_q = matvec(p.A, cp_p), matvec(q.A, cp_q)
    assert cp_p[2:] == cp_q[2:]
    assert cpp_p == cpp_q and matvec(p.A, cpp_p) == matvec(q.A, cpp_q)


@pytest.mark.parametrize("family, params", [
    ("A", {"c2": "1/5", "c3": "1/3", "c5": "4/5", "c6": "9/10"}),
    ("B", TYPE_B),
])
def test_six_stage_pairs_have_zero_d7(family, params):
    pair = construct_family(family, params)
    assert pair.d[6] == 0
    assert residuals(pair).ok()


@pytest.mark.parametrize("root", [0, 1])
def test_type_c_pair(root):
    pair = construct_family("C", {"c2": "1/5", "c3": "1/2", "c5": "4/5", "c6": "9/10",
                                  "root": root})
    assert pair.mode == FLOAT
    assert abs(pair.d[6]) < 1e-12
    assert residuals(pair).max_abs("b") < 1e-12 and residuals(pair).max_abs("d", 4) < 1e-12


def test_aprime_general_route():
    pair = construct_family("Aprime", {"c2": "1/5", "c3": "21/65", "c4": "9/10",
                                       "c5": "39/40"})
    ref = builtin("aprime")
    assert (pair.c, pair.A, pair.b) == (ref.c, ref.A, ref.b)
    assert parallel(ref.d, pair.d)


def test_float_mode_family():
    pair = construct_family("B", {k: str(float(F(v))) for k, v in TYPE_B.items()})
    assert pair.mode == FLOAT
    assert residuals(pair).max_abs("b") < 1e-12
    assert residuals(pair).max_abs("d", 4) < 1e-12


def test_family_parameter_checks():
    with pytest.raises(ValueError, match="missing"):
        construct_family("B", {"c2": "1/6"})
    with pytest.raises(ValueError, match="unknown family"):
        construct_family("Z", TYPE_B)


def test_degenerate_type_b_names_factor():
    with pytest.raises(DegenerateParametersError, match="c'3"):
        construct_family("B", dict(TYPE_B, c3="1/6"))


# -- generic parameters -------------------------------------------------------------------

def test_generic_parameters_break_three_conditions_together(rng):
    three = ["[. . [.]]", "[. [. .]]", "[. [[.]]]"]
    family_eq = "[[.] [.]]"
    done = 0
    while done < 5:
        gp = GeneralParams.make(*(random_fraction(rng) for _ in range(6)))
        if gp.c6 == 1 or gp.c4 == c4_six_stage(gp.c2, gp.c3, gp.cp3):
            continue
        try:
            broken = failing_trees(back_substitute(gp, extended_nodes(gp, check=False)))
            fixed_c6 = replace(gp, c6=F(1))
            by_c6 = failing_trees(back_substitute(fixed_c6, extended_nodes(fixed_c6, check=False)))
            fixed_c4 = replace(gp, c4=c4_six_stage(gp.c2, gp.c3, gp.cp3))
            by_c4 = failing_trees(back_substitute(fixed_c4, extended_nodes(fixed_c4, check=False)))
        except (DegenerateParametersError, ArithmeticError):
            continue
        assert set(three) <= set(broken)
        assert set(broken) <= set(three) | {family_eq}
        assert not set(three) & set(by_c6)
        assert not set(three) & set(by_c4)
        done += 1


def test_rank_invariant_on_random_parameters(rng):
    hits = 0
    while hits < 100:
        gp = GeneralParams.make(*(random_fraction(rng) for _ in range(6)))
        try:
            nodes = extended_nodes(gp, check=False)
        except (DegenerateParametersError, ArithmeticError):
            continue
        aux = AuxQuantities(gp.nodes, nodes.cp, nodes.cpp)
        M = construction_matrix(aux, nodes.cppp5, nodes.cppp6, nodes.a65)
        Mt = transform_matrix(M, gp.c2, gp.c3, nodes.cpp)
        assert rank_invariant(Mt) == gp.cp3 ** 2 * gp.c2
        hits += 1


@pytest.mark.parametrize("family, params", [
    ("A", {"c2": "1/5", "c3": "1/3", "c5": "4/5", "c6": "9/10"}),
    ("B", TYPE_B),
    ("Aprime", {"c2": "1/5", "c3": "21/65", "c4": "9/10", "c5": "39/40"}),
    ("Bprime-c3-0", {"c2": "4/15", "c4": "1/2", "c5": "4/5"}),
    ("Bprime-c3-c2", {"c2": "1/4", "c5": "4/5"}),
])
def test_k6_closed_form_matches_matrix(family, params):
    pair = construct_family(family, params)
    gp = params_of(pair)
    assert stability(pair).coefficients[6] == k6_closed_form(gp.c2, gp.c3, gp.c4, gp.cp3)


# -- root finding -------------------------------------------------------------------------

SQRT_FIXED = {"c2": F(1, 5), "c3": F(1, 4), "cp3": F(1, 40), "c4": F(3, 5)}


def test_bprime_root_matches_closed_form():
    root = solve_bprime(SQRT_FIXED, "c5", (F(7, 10), F(85, 100)))
    exact = 3 * (8 * math.sqrt(4054) - 431) / 289
    assert abs(float(root.value) - exact) < 1e-12
    assert abs(float(root.value - sqrt4054_c5())) < 1e-12


def test_bprime_second_root():
    root = solve_bprime(SQRT_FIXED, "c5", (F(-10), F(-9)))
    assert float(root.value) == pytest.approx(3 * (-8 * math.sqrt(4054) - 431) / 289, abs=1e-10)
    assert float(root.value) == pytest.approx(-9.76, abs=5e-3)


def test_bprime_bracket_without_sign_change():
    with pytest.raises(NoSolutionError):
        solve_bprime(SQRT_FIXED, "c5", (F(3, 10), F(1, 2)))


def test_bprime_family_float_pair():
    pair = construct_family("Bprime", {"c2": "1/5", "c3": "1/4", "cp3": "1/40", "c4": "3/5",
                                       "solve_for": "c5", "lo": 0.7, "hi": 0.85})
    assert pair.mode == FLOAT
    ref = builtin("sqrt4054")
    assert max(abs(x - y) for r, q in zip(pair.A, ref.A) for x, y in zip(r, q)) < 1e-10
    assert residuals(pair).max_abs("b") < 1e-12


def test_bprime_argument_checks():
    with pytest.raises(ValueError):
        solve_bprime({"c2": F(1, 5)}, "c5", (0, 1))
    with pytest.raises(ValueError, match="bracket"):
        construct_family("Bprime", {"c2": "1/5", "c3": "1/4", "cp3": "1/40", "c4": "3/5"})


def test_derive_roundtrip_through_params():
    for name in ("typeB", "aprime", "bprime-c3-0", "bprime-c3-c2"):
        ref = builtin(name)
        pair = derive(params_of(ref))
        assert (pair.A, pair.b) == (ref.A, ref.b)
        assert parallel(ref.d, pair.d)


def test_construction_postcondition_guard():
    # a parameter point where c''4 = 0 is rejected with the factor named
    with pytest.raises((DegenerateParametersError, ConstructionError)):
        derive(GeneralParams.make(F(1, 2), F(1, 2), F(1, 2), F(3, 4), 1, F(1, 8)))
