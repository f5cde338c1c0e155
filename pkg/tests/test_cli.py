import json

import pytest

from tlfields.cli import main, parse_expression, parse_form, parse_series, parse_rational_form
from tlfields.scalars import BaseField, make_extension
from tlfields.tlf import TlfDescriptor
from tlfields.forms import AbstractForm


@pytest.fixture
def K2():
    return TlfDescriptor(2, make_extension(0, [0, 1]))


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out.strip()
    return code, out


class TestParser:
    def test_series(self, K2):
        s = parse_series("t1^-2*(1+t2)", K2)
        assert s.coefficient_at((-2, 0)) == K2.field.one
        assert s.coefficient_at((-2, 1)) == K2.field.one

    def test_fraction_constants(self, K2):
        s = parse_series("1/2 * t1", K2)
        from fractions import Fraction

        assert s.coefficient_at((1, 0)).coeffs[0] == Fraction(1, 2)

    def test_dlog_form(self, K2):
        form = parse_form("dlog(t1,t2)", K2)
        assert isinstance(form, AbstractForm)
        sep = form.separate()
        assert sep.coefficient((1, 2)) == K2.monomial((-1, -1))

    def test_symbol_binding(self, K2):
        form = parse_form("t1^-1 * d(b{series=t2+t2^2}) ^ t2^-1 * d(t2)", K2)
        sep = form.separate()
        assert sep.is_zero_within_window()

    def test_wedge_vs_power(self, K2):
        v = parse_expression("t1^2", K2)
        from tlfields.forms import evaluate

        assert evaluate(v) == K2.monomial((2, 0))

    def test_parse_error_position(self, K2):
        from tlfields.errors import ParseError

        with pytest.raises(ParseError):
            parse_series("t1 + + t2", K2)

    def test_roundtrip_print_parse(self, K2):
        # parse -> pretty-print -> parse is the identity on exact series
        corpus = [
            "t1^-2*(1+t2)",
            "1 + t1*t2 + t2^3",
            "3*t1 - t2^-1",
            "1/2 * t1^2 * t2^-3 + 7",
        ]
        for text in corpus:
            s1 = parse_series(text, K2)
            s2 = parse_series(repr(s1), K2)
            assert s1 == s2

    def test_rational_form(self):
        base = BaseField(0)
        form = parse_rational_form("1/(t*(t-1)) dt", base)
        assert form.den == (base.zero, base.from_int(-1), base.one)


class TestCommands:
    def test_residue_dlog(self, capsys):
        code, out = run_cli(capsys, "residue", "--n", "2", "dlog(t1,t2)")
        assert code == 0
        assert json.loads(out)["value"] == "1"

    def test_residue_shifted_zero(self, capsys):
        code, out = run_cli(capsys, "residue", "--n", "2", "t1 * dlog(t1,t2)")
        assert code == 0
        assert json.loads(out)["value"] == "0"

    def test_counterexample(self, capsys):
        code, out = run_cli(capsys, "counterexample")
        assert code == 0
        data = json.loads(out)
        assert data == {"res_st": "0", "res_nt": "1"}

    def test_tate_residue(self, capsys):
        code, out = run_cli(capsys, "tate-residue", "t1^-1", "t1")
        assert code == 0
        assert json.loads(out)["value"] == "1"

    def test_global_sum(self, capsys):
        code, out = run_cli(capsys, "global-sum", "--char", "0", "1/(t*(t-1)) dt")
        assert code == 0
        data = json.loads(out)
        assert data["sum"] == "0"
        assert data["locals"]["t"] == "-1"
        assert data["locals"]["-1 + t"] == "1"
        assert data["locals"]["infinity"] == "0"

    def test_certify_mul(self, capsys):
        code, out = run_cli(capsys, "certify", "--n", "1", "mul(t1^-1)")
        assert code == 0
        data = json.loads(out)
        assert data["certified"] is True
        assert data["band"] == 1
        assert data["replayed"] is True

    def test_certify_projection_ideal(self, capsys):
        code, out = run_cli(capsys, "certify", "--n", "1", "--target", "1,2", "proj1(<0)")
        assert code == 0
        data = json.loads(out)
        assert data["certified"] is True
        assert data["killed_shift"] == 0

    def test_certify_rejects(self, capsys):
        code, out = run_cli(capsys, "certify", "--n", "1", "--target", "1,1", "mul(t1)")
        assert code == 4
        assert json.loads(out)["certified"] is False

    def test_trace_op(self, capsys):
        code, out = run_cli(
            capsys, "trace-op", "--n", "1", "--char", "5",
            "proj1(>=0)*mul(1+t1)*proj1(<3)*proj1(>=0)",
        )
        assert code == 0
        assert json.loads(out)["value"] == "3"

    def test_decompose(self, capsys):
        code, out = run_cli(capsys, "decompose", "--n", "2", "--level", "2")
        assert code == 0
        data = json.loads(out)
        assert data["identity_on_probes"] is True
        assert data["phi1"]["op"] == "proj"

    def test_trace_form_kummer(self, capsys):
        code, out = run_cli(
            capsys, "trace-form", "--n", "1", "--kummer", "2", "t1^-1 * d(t1)"
        )
        assert code == 0
        data = json.loads(out)
        assert data["residue"] == "1"

    def test_lift_matrix(self, capsys):
        code, out = run_cli(capsys, "lift-matrix", "--n", "2", "--char", "5")
        assert code == 0
        data = json.loads(out)
        assert data["unit_triangular"] is True
        assert data["orders_certified"] is True
        assert data["neumann_identity"] is True

    def test_parse_error_exit_code(self, capsys):
        code, out = run_cli(capsys, "residue", "--n", "1", "t1 + + 1")
        assert code == 2

    def test_precision_error_exit_code(self, capsys):
        code, out = run_cli(capsys, "residue", "--n", "1", "--window", "4",
                            "t1^-6 * inv(1-t1) * d(t1)")
        assert code == 3

    def test_determinism(self, capsys):
        _, out1 = run_cli(capsys, "residue", "--n", "2", "dlog(t1,t2)")
        _, out2 = run_cli(capsys, "residue", "--n", "2", "dlog(t1,t2)")
        assert out1 == out2

    def test_extension_field(self, capsys):
        # residue over Q(i): tr(i * dlog) = 0, tr((1+i) dlog) = 2
        code, out = run_cli(
            capsys, "residue", "--n", "1", "--ext-poly", "1,0,1", "x * dlog(t1)"
        )
        assert code == 0
        assert json.loads(out)["value"] == "0"
        code, out = run_cli(
            capsys, "residue", "--n", "1", "--ext-poly", "1,0,1", "(1+x) * dlog(t1)"
        )
        assert json.loads(out)["value"] == "2"
