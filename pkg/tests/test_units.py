from fractions import Fraction as F

import pytest
from hypothesis import given
from hypothesis import strategies as st

from piactive.models import bundled_path
from piactive.units import (
    UNITLESS, DegenerateUnitSystemError, Dimension, InexpressibleOutputError, QuantitySpec,
    QuantitySystem, UnitParseError, build_dimension_matrix, dimension_of_product, matmul, matvec,
    parse_unit_expression, pi_groups, rank, rational_nullspace, same_span, solve_particular,
    transpose, verify_pi_groups,
)

MHD = [("l", "m"), ("v", "m/s"), ("mu", "kg/(m*s)"), ("rho", "kg/m^3"), ("p", "kg/(m*s^2)"),
       ("eta", "kg*m^3/(s^3*A^2)"), ("B", "kg/(s^2*A)")]

# published basis: Re-like, Ha-like, dimensionless pressure gradient (columns)
REFERENCE_BASIS = transpose([
    [1, 1, -1, 1, 0, 0, 0],
    [1, 0, F(-1, 2), 0, 0, F(-1, 2), 1],
    [0, -2, 0, -1, 1, 0, 0],
])


def mhd_inputs(order=None):
    items = MHD if order is None else [MHD[i] for i in order]
    return [QuantitySpec.parse(n, u) for n, u in items]


def dim(**kw):
    exps = [0] * 7
    for key, val in kw.items():
        exps["LMTC".index(key)] = val
    return Dimension(tuple(F(x) for x in exps))


# --- parsing ---------------------------------------------------------------


def test_parse_velocity():
    assert parse_unit_expression("m*s^-1") == dim(L=1, T=-1)


def test_parse_resistivity():
    assert parse_unit_expression("kg*m^3/(s^3*A^2)") == dim(L=3, M=1, T=-3, C=-2)


@pytest.mark.parametrize("text", ["1", ""])
def test_parse_unitless(text):
    assert parse_unit_expression(text) == UNITLESS


def test_parse_rational_exponents():
    assert parse_unit_expression("m^(1/2)") == parse_unit_expression("m^0.5") == dim(L=F(1, 2))


def test_parse_nested_division():
    assert parse_unit_expression("kg/(m*s)") == dim(L=-1, M=1, T=-1)


def test_parse_unknown_symbol_reports_token_and_position():
    with pytest.raises(UnitParseError) as err:
        parse_unit_expression("kg*furlong")
    assert err.value.token == "furlong"
    assert err.value.position == 3


def test_parse_malformed_exponent():
    with pytest.raises(UnitParseError) as err:
        parse_unit_expression("m^*s")
    assert err.value.token == "*"


# --- dimension matrix ------------------------------------------------------


def test_mhd_dimension_matrix():
    dm = build_dimension_matrix(mhd_inputs(), QuantitySpec.parse("u", "m/s", "output"))
    rows = dict(zip(dm.base_unit_labels, dm.D))
    assert rows["L"] == [1, 1, -1, -3, -1, 3, 0]
    assert rows["T"] == [0, -1, -1, 0, -2, -3, -2]
    assert rows["M"] == [0, 0, 1, 1, 1, 1, 1]
    assert rows["C"] == [0, 0, 0, 0, 0, -2, -1]
    assert dm.k == 4 and dm.m == 7


def test_single_length_input():
    dm = build_dimension_matrix([QuantitySpec.parse("x", "m")], QuantitySpec.parse("y", "m", "output"))
    assert dm.D == [[1]] and dm.u == [1]


def test_zero_inputs_rejected():
    with pytest.raises(ValueError):
        build_dimension_matrix([], QuantitySpec.parse("y", "m", "output"))


def test_degenerate_unit_system():
    inputs = [QuantitySpec.parse("a", "m/s"), QuantitySpec.parse("b", "m^2/s^2")]
    with pytest.raises(DegenerateUnitSystemError, match="degenerate unit system"):
        build_dimension_matrix(inputs, QuantitySpec.parse("y", "1", "output"))


def test_output_needs_base_unit_no_input_has():
    with pytest.raises(InexpressibleOutputError, match="output units not expressible"):
        pi_groups([QuantitySpec.parse("x", "m")], QuantitySpec.parse("y", "kg", "output"))


# --- rational linear algebra -------------------------------------------------


def test_nullspace_of_mhd_spans_reference():
    dm = build_dimension_matrix(mhd_inputs(), QuantitySpec.parse("u", "m/s", "output"))
    U = rational_nullspace(dm.D)
    assert len(U[0]) == 3
    assert all(x == 0 for row in matmul(dm.D, U) for x in row)
    assert rank(transpose([a + b for a, b in zip(U, REFERENCE_BASIS)])) == 3
    assert same_span(U, REFERENCE_BASIS)


def test_nullspace_identity_empty():
    U = rational_nullspace([[1, 0], [0, 1]])
    assert all(row == [] for row in U)


def test_nullspace_one_by_two():
    assert rational_nullspace([[1, -1]]) == [[1], [1]]


def test_particular_solution_mhd():
    dm = build_dimension_matrix(mhd_inputs(), QuantitySpec.parse("u", "m/s", "output"))
    v = solve_particular(dm.D, dm.u)
    assert matvec(dm.D, v) == dm.u


def test_particular_zero_rhs():
    assert solve_particular([[1, 2], [0, 1]], [0, 0]) == [0, 0]


def test_particular_scalar():
    assert solve_particular([[1]], [2]) == [2]


def test_inconsistent_system_raises():
    with pytest.raises(InexpressibleOutputError):
        solve_particular([[1, 1], [2, 2]], [1, 3])


# --- Pi groups ---------------------------------------------------------------


def test_mhd_pi_groups():
    pi = QuantitySystem.load(bundled_path("mhd_u_avg.json")).pi_groups()
    assert pi.n == 3
    assert same_span(pi.U, REFERENCE_BASIS)
    assert pi.v == [0, 1, 0, 0, 0, 0, 0]


def test_pendulum_has_no_free_groups():
    pi = pi_groups([QuantitySpec.parse("l", "m"), QuantitySpec.parse("g", "m/s^2")],
                   QuantitySpec.parse("T", "s", "output"))
    assert pi.n == 0
    assert pi.v == [F(1, 2), F(-1, 2)]
    assert pi.rendered_groups["Pi"] == "T * l^-1/2 * g^1/2"


def test_all_unitless_system_is_identity():
    pi = pi_groups([QuantitySpec.parse("a", "1"), QuantitySpec.parse("b", "")],
                   QuantitySpec.parse("y", "1", "output"))
    assert pi.n == 2 and pi.v == [0, 0]
    assert pi.U == [[1, 0], [0, 1]]
    assert pi.rendered_groups == {"Pi": "y", "Pi_1": "a", "Pi_2": "b"}


def test_rendered_groups_are_unitless():
    system = QuantitySystem.load(bundled_path("mhd_u_avg.json"))
    pi = system.pi_groups()
    dims = [q.dimension for q in system.inputs]
    for j in range(pi.n):
        assert dimension_of_product(dims, pi.column(j)).is_unitless
    out = dimension_of_product([system.output.dimension, *dims], [1, *[-x for x in pi.v]])
    assert out.is_unitless


def test_verify_reference_basis_passes():
    dm = build_dimension_matrix(mhd_inputs(), QuantitySpec.parse("u", "m/s", "output"))
    pi = pi_groups(mhd_inputs(), QuantitySpec.parse("u", "m/s", "output"))
    ref = type(pi)(pi.v, REFERENCE_BASIS, pi.input_names, pi.output_name)
    assert verify_pi_groups(ref, dm.D, dm.u).passed


def test_verify_reports_perturbed_v():
    dm = build_dimension_matrix(mhd_inputs(), QuantitySpec.parse("u", "m/s", "output"))
    pi = pi_groups(mhd_inputs(), QuantitySpec.parse("u", "m/s", "output"))
    bad = type(pi)([pi.v[0] + 1, *pi.v[1:]], pi.U, pi.input_names, pi.output_name)
    report = verify_pi_groups(bad, dm.D, dm.u)
    assert not report.passed
    assert any("(D v)" in f for f in report.failures)


def test_verify_empty_basis_passes():
    pi = pi_groups([QuantitySpec.parse("x", "m")], QuantitySpec.parse("y", "m", "output"))
    assert pi.n == 0
    assert verify_pi_groups(pi, [[1]], [1]).passed


def test_b_ind_system_pi_groups():
    system = QuantitySystem.load(bundled_path("mhd_b_ind.json"))
    dm = system.dimension_matrix()
    pi = system.pi_groups()
    assert pi.n == 3
    assert verify_pi_groups(pi, dm.D, dm.u).passed


# --- properties --------------------------------------------------------------


@given(st.permutations(range(7)))
def test_permutation_equivariance(order):
    out = QuantitySpec.parse("u", "m/s", "output")
    base = build_dimension_matrix(mhd_inputs(), out)
    perm = build_dimension_matrix(mhd_inputs(order), out)
    for row_b, row_p in zip(base.D, perm.D):
        assert row_p == [row_b[i] for i in order]
    pi = pi_groups(mhd_inputs(order), out)
    ref = [REFERENCE_BASIS[i] for i in order]
    assert pi.n == 3 and same_span(pi.U, ref)
    assert verify_pi_groups(pi, perm.D, perm.u).passed


exponent = st.fractions(min_value=-3, max_value=3, max_denominator=4)
dimension = st.tuples(*[exponent] * 4).map(lambda e: Dimension(tuple(e) + (F(0),) * 3))


@given(st.lists(dimension, min_size=1, max_size=6), dimension)
def test_random_systems_count_and_exactness(dims, out_dim):
    inputs = [QuantitySpec(f"x{i}", d) for i, d in enumerate(dims)]
    output = QuantitySpec("y", out_dim, "output")
    try:
        dm = build_dimension_matrix(inputs, output)
        pi = pi_groups(inputs, output)
    except (DegenerateUnitSystemError, InexpressibleOutputError):
        return
    assert pi.n == dm.m - dm.k
    assert verify_pi_groups(pi, dm.D, dm.u).passed
    for j in range(pi.n):
        assert dimension_of_product(dims, pi.column(j)).is_unitless


@given(dimension, dimension, exponent)
def test_dimension_algebra(a, b, p):
    assert (a * b) / b == a
    assert (a ** p) * (a ** -p) == UNITLESS
    assert parse_unit_expression(str(a)) == a
