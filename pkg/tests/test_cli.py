"""
Tests for the command-line front end.
"""

import io
import json

import pytest

from cli import build_parser, join_signed_values, run
from ddops import MAX_DEGREE


def _run(argv):
    out = io.StringIO()
    code = run(argv, stream=out)
    return code, out.getvalue()


class TestExitCodes:
    """Test the 0 / 1 / 2 exit-code contract."""

    def test_verify_thm1(self):
        """Test the reference q-lattice family reports its characterization break and exits 1."""
        code, text = _run(["verify", "thm1", "--Q", "1/2", "--c1", "1", "--c2", "1", "--c3", "0",
                           "--a", "3", "--n", "12", "--format", "json"])
        assert code == 1
        payload = json.loads(text)
        assert payload["summary"]["C1"] == "25/12"
        assert payload["summary"]["characterization_breaks_at"] == "3"
        check = [c for c in payload["checks"] if c["name"] == "characterization"][0]
        assert check["witness"]["n"] == 3

    def test_verify_thm1_below_break(self):
        """Test the reference q-lattice family passes through n = 1."""
        code, _ = _run(["verify", "thm1", "--Q", "1/2", "--a", "3", "--n", "1"])
        assert code == 0

    def test_verify_nonexistence(self):
        """Test the beta = 1 witness (2, -4, -16)."""
        code, text = _run(["verify", "nonexistence", "--beta", "1", "--c5", "1", "--c6", "0",
                           "--b0", "0", "--format", "json"])
        assert code == 0
        witnesses = [c["witness"] for c in json.loads(text)["checks"] if c["name"] == "mismatch-witness"]
        assert witnesses == [{"n": 2, "lhs": "-4", "rhs": "-16"}]

    def test_meixner_b2_zero(self):
        """Test a nonpositive integer b2 exits 1 with a structured error."""
        code, text = _run(["family", "meixner2", "--b1", "0", "--b2", "0", "--n", "5"])
        assert code == 1
        error = json.loads(text)
        assert error["error"] == "ParameterError"
        assert "b2 must not be a nonpositive integer" in error["message"]

    def test_unknown_command(self):
        """Test an unknown command exits 2."""
        assert _run(["frobnicate"])[0] == 2

    def test_unknown_flag(self):
        """Test an unknown flag exits 2."""
        assert _run(["selftest", "--bogus"])[0] == 2

    def test_malformed_scalar(self):
        """Test a malformed scalar flag exits 2."""
        assert _run(["family", "thm1", "--Q", "1/0", "--a", "3"])[0] == 2

    def test_degree_cap(self):
        """Test n above LATOPS_MAX_DEGREE exits 2."""
        assert _run(["lattice-info", "--Q", "1/2", "--n", "100000"])[0] == 2

    def test_verify_depth_above_table_cap(self):
        """Test a verify depth whose tables exceed LATOPS_MAX_DEGREE exits 2 before running."""
        code, text = _run(["verify", "thm2", "--c5", "2", "--b0", "0", "--C1", "1/2",
                           "--n", str(MAX_DEGREE // 2 + 1)])
        assert code == 2
        assert text == ""

    def test_identities_depth_above_table_cap(self):
        """Test the identity suite's larger tables are checked too."""
        code, _ = _run(["verify", "identities", "--family", "thm2", "--c5", "2", "--b0", "0", "--C1", "1/2",
                        "--n", str(MAX_DEGREE // 2 - 2)])
        assert code == 2

    def test_regularity_error_exit(self):
        """Test an excluded Askey-Wilson seed exits 1 with the failing index."""
        code, text = _run(["family", "thm1", "--Q", "1/2", "--a", "2", "--n", "3"])
        assert code == 1
        assert json.loads(text)["index"] == 1

    def test_failed_report_exit(self):
        """Test a failing verification exits 1."""
        code, _ = _run(["verify", "thm2", "--c5", "2", "--b0", "0", "--C1", "2", "--n", "4"])
        assert code == 1


class TestSignedValues:
    """Test scalar flags with leading minus signs."""

    def test_joined_argv(self):
        """Test '--flag -value' becomes '--flag=-value' only for scalar flags."""
        argv = ["family", "thm2", "--b0", "-1/2", "--C1", "1/2", "--n", "2", "--format", "json"]
        assert join_signed_values(argv) == ["family", "thm2", "--b0=-1/2", "--C1", "1/2", "--n", "2",
                                            "--format", "json"]
        assert join_signed_values(["op-apply", "--poly", "--op"]) == ["op-apply", "--poly", "--op"]

    def test_negative_b0(self):
        """Test B_0 = -1/2 shifts every B_n on the linear lattice."""
        code, text = _run(["family", "thm2", "--c5", "2", "--b0", "-1/2", "--C1", "1/2", "--n", "3",
                           "--format", "json"])
        assert code == 0
        assert [r["B_n"] for r in json.loads(text)["rows"]] == ["-1/2", "-1/2", "-1/2"]

    def test_equals_form(self):
        """Test the joined '--b0=-1/2' spelling gives the same output."""
        split = _run(["family", "thm2", "--c5", "2", "--b0", "-1/2", "--C1", "1/2", "--n", "3"])
        joined = _run(["family", "thm2", "--c5", "2", "--b0=-1/2", "--C1", "1/2", "--n", "3"])
        assert split == joined

    def test_negative_imaginary(self):
        """Test a negative imaginary scalar as a separate argument."""
        code, text = _run(["family", "aw", "--a1", "3", "--a2", "-3", "--a3", "2/3*i", "--a4", "-2/3*i",
                           "--Q", "1/2", "--n", "1", "--format", "json"])
        assert code == 0
        assert json.loads(text)["rows"][0]["C_n+1"] == "25/48"

    def test_negative_leading_coefficient(self):
        """Test a polynomial whose first coefficient is negative."""
        code, text = _run(["op-apply", "--op", "sx", "--poly", "-1/2,0,1", "--c5", "2", "--format", "json"])
        assert code == 0
        assert json.loads(text)["input"] == ["-1/2", "0", "1"]


class TestDeterminism:
    """Test byte-stable JSON."""

    @pytest.mark.parametrize("argv", [
        ["verify", "thm1", "--Q", "1/2", "--c1", "1", "--c2", "1", "--c3", "0", "--a", "3", "--n", "6", "--format", "json"],
        ["verify", "nonexistence", "--beta", "1", "--c5", "1", "--c6", "0", "--b0", "0", "--format", "json"],
        ["family", "meixner2", "--b1", "0", "--b2", "0", "--n", "5"],
    ])
    def test_identical_bytes(self, argv):
        """Test two invocations print identical bytes."""
        assert _run(argv) == _run(argv)


class TestCommands:
    """Test the individual commands."""

    def test_lattice_info(self):
        """Test structure sequences and U polynomials."""
        code, text = _run(["lattice-info", "--Q", "1/2", "--n", "2", "--format", "json"])
        assert code == 0
        payload = json.loads(text)
        assert payload["alpha"] == "5/4"
        assert payload["U1"] == ["0", "9/16"]
        row = [r for r in payload["sequences"] if r["n"] == 2][0]
        assert (row["alpha_n"], row["gamma_n"]) == ("17/8", "5/2")

    def test_lattice_json(self):
        """Test the lattice JSON input."""
        code, text = _run(["lattice-info", "--lattice-json", '{"kind": "quadratic", "beta": "1", "c5": "0", "c6": "0"}',
                           "--n", "3", "--format", "json"])
        assert code == 0
        assert json.loads(text)["U2"] == ["0", "4"]

    def test_lattice_json_invalid(self):
        """Test unknown lattice JSON keys exit 1."""
        code, text = _run(["lattice-info", "--lattice-json", '{"kind": "q", "Q": "1/2", "c9": "1"}'])
        assert code == 1
        assert json.loads(text)["error"] == "ParameterError"

    def test_op_apply(self):
        """Test D_x(z^2 - 1/2) = 2z on x = 2s, checked at s = 1."""
        code, text = _run(["op-apply", "--op", "dx", "--poly", "-1/2,0,1", "--beta", "0", "--c5", "2",
                           "--at", "1", "--format", "json"])
        assert code == 0
        payload = json.loads(text)
        assert payload["result"] == ["0", "2"]
        assert payload["at"]["table"] == payload["at"]["oracle"] == "4"

    def test_op_apply_power(self):
        """Test D_x^2 z^2 = 2."""
        code, text = _run(["op-apply", "--op", "dx", "--poly", "0,0,1", "--power", "2", "--c5", "2", "--format", "json"])
        assert code == 0
        assert json.loads(text)["result"] == ["2"]

    def test_family_table(self):
        """Test the table shows n, B_n and C_{n+1}."""
        code, text = _run(["family", "thm2", "--c5", "2", "--b0", "0", "--C1", "1/2", "--n", "3"])
        assert code == 0
        header = text.splitlines()[0].split()
        assert header == ["n", "B_n", "C_n+1"]
        assert "-9/2" in text

    def test_family_csv_with_approx(self):
        """Test CSV output carries decimal columns."""
        code, text = _run(["family", "thm1", "--Q", "1/2", "--a", "3", "--n", "2", "--format", "csv", "--approx"])
        assert code == 0
        lines = text.splitlines()
        assert lines[0] == "n,B_n,B_n~,C_n+1,C_n+1~"
        assert lines[1] == "0,0,0,25/12,2.08333"

    def test_family_aw(self):
        """Test an explicit Askey-Wilson quadruple."""
        code, text = _run(["family", "aw", "--a1", "3", "--a2", "-3", "--a3", "2/3*i", "--a4", "-2/3*i",
                           "--Q", "1/2", "--n", "2", "--format", "json"])
        assert code == 0
        assert json.loads(text)["rows"][0]["C_n+1"] == "25/48"

    def test_family_params_json(self):
        """Test family parameters from JSON."""
        code, text = _run(["family", "meixner2", "--params-json", '{"b1": "0", "b2": "1"}', "--n", "3",
                           "--format", "json"])
        assert code == 0
        assert [r["C_n+1"] for r in json.loads(text)["rows"]] == ["1", "4", "9"]

    def test_missing_parameter(self):
        """Test a missing family parameter exits 1."""
        code, text = _run(["family", "thm1", "--Q", "1/2"])
        assert code == 1
        assert "--a" in json.loads(text)["message"]

    def test_pearson_solve(self):
        """Test the engine and the moments route agree on x = 2s."""
        code, text = _run(["pearson-solve", "--phi", "0,0,-1/2", "--psi", "1,0", "--c5", "2", "--n", "3",
                           "--format", "json"])
        assert code == 0
        payload = json.loads(text)
        assert payload["agree"] is True
        assert payload["moments"]["moments"][:5] == ["1", "0", "1/2", "0", "-1/4"]

    def test_pearson_solve_irregular(self):
        """Test an irregular Pearson pair exits 1 with violations."""
        code, text = _run(["pearson-solve", "--phi", "0,0,-2", "--psi", "1,0", "--c5", "2", "--n", "4",
                           "--format", "json"])
        assert code == 1
        assert json.loads(text)["violations"][0]["n"] == 2

    def test_verify_bzero(self):
        """Test the q-lattice forcing witness."""
        code, text = _run(["verify", "bzero", "--Q", "1/2", "--B0", "1", "--format", "json"])
        assert code == 0
        assert json.loads(text)["summary"]["first_mismatch"] == "2"

    def test_verify_identities(self):
        """Test the identity suite on the linear family."""
        code, _ = _run(["verify", "identities", "--family", "thm2", "--c5", "2", "--b0", "0", "--C1", "1/2",
                        "--n", "2"])
        assert code == 0

    def test_parser_rejects_abbreviations(self):
        """Test flags must be spelled out."""
        with pytest.raises(SystemExit):
            build_parser().parse_args(["selftest", "--se", "1"])


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
