"""Parser, printer and jet evaluation of metric expressions."""

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gen_randers.expr import (BinOp, Call, Const, EvalContext, ExprSyntaxError,
                              IndexOutOfRangeError, UnknownIdentifierError, Var, eval_float,
                              eval_jet, parse_expression)
from gen_randers.jets import JetDomainError


class TestParse:
    def test_precedence_and_right_associative_power(self):
        ast = parse_expression("1 + 2*x1^2^y1", 2)
        assert ast.root == BinOp("+", Const(1.0), BinOp(
            "*", Const(2.0), BinOp("^", Var("x", 1), BinOp("^", Const(2.0), Var("y", 1)))))

    def test_double_star_is_power(self):
        assert parse_expression("x1**2", 2).root == parse_expression("x1^2", 2).root

    def test_function_call(self):
        assert parse_expression("sqrt(y1)", 2).root == Call("sqrt", Var("y", 1))

    def test_unary_minus_binds_looser_than_power(self):
        assert eval_float(parse_expression("-x1^2", 2), [3.0, 0.0], [1.0, 0.0]) == -9.0

    def test_variables(self):
        assert parse_expression("x1*y2 + y1", 2).variables() == {("x", 1), ("y", 2), ("y", 1)}

    @pytest.mark.parametrize("source,offset", [("sin(", 4), ("x1 +* y1", 4), ("(x1", 3),
                                               ("x1 $ 2", 3), ("2 3", 2)])
    def test_syntax_error_offsets(self, source, offset):
        with pytest.raises(ExprSyntaxError) as err:
            parse_expression(source, 2)
        assert err.value.offset == offset

    def test_unknown_identifier(self):
        with pytest.raises(UnknownIdentifierError) as err:
            parse_expression("1 + tan(x1)", 2)
        assert err.value.offset == 4

    def test_index_out_of_range(self):
        with pytest.raises(IndexOutOfRangeError):
            parse_expression("x7", 2)
        with pytest.raises(IndexOutOfRangeError):
            parse_expression("y0", 2)


class TestRoundTrip:
    @pytest.mark.parametrize("source", ["sqrt((1+x2^2)*y1^2+y2^2)+0.2*sin(x1)*y2",
                                        "exp(x1)*sqrt(y1^2+y2^2)", "-x1/-y2", "2e-3*x1^-1.5"])
    def test_printer_reparses_to_same_tree(self, source):
        ast = parse_expression(source, 2)
        assert parse_expression(str(ast), 2).root == ast.root


class TestEvaluate:
    def test_jet_value_matches_float(self):
        ast = parse_expression("exp(x1)*sqrt(y1^2+y2^2) + x2^1.5", 2)
        x, y = [0.3, 0.7], [1.2, -0.4]
        j = eval_jet(ast, x, y, EvalContext(2, order=2))
        assert j.value == pytest.approx(eval_float(ast, x, y), rel=1e-15)

    def test_gradient_in_y(self):
        ast = parse_expression("sqrt(y1^2+y2^2)", 2)
        j = eval_jet(ast, [0, 0], [3.0, 4.0], EvalContext(2, order=2))
        assert j.d(2).value == pytest.approx(0.6)
        assert j.d(3).value == pytest.approx(0.8)

    def test_restricted_seeds(self):
        ctx = EvalContext(2, order=1, seeds=("x1", "x2"))
        j = eval_jet(parse_expression("x1*x2*y1", 2), [2.0, 3.0], [5.0, 0.0], ctx)
        assert j.space.nvars == 2
        assert j.d(0).value == pytest.approx(15.0)

    def test_division_by_zero(self):
        ast = parse_expression("1/x1", 2)
        with pytest.raises(JetDomainError):
            eval_jet(ast, [0.0, 0.0], [1.0, 0.0], EvalContext(2, order=1))

    def test_variable_exponent(self):
        ast = parse_expression("x1^x2", 2)
        j = eval_jet(ast, [2.0, 3.0], [1.0, 0.0], EvalContext(2, order=1))
        assert j.d(1).value == pytest.approx(8.0 * math.log(2.0))


@settings(max_examples=50, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0.1, 3))
def test_polynomial_evaluation_matches_python(a, b, c):
    ast = parse_expression("x1*x2 - 3*y1^2 + y2/2", 2)
    assert eval_float(ast, [a, b], [c, 1.0]) == pytest.approx(a * b - 3 * c * c + 0.5)
