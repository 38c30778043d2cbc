import json
import math
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from linpat import io
from linpat.constants import Constants, IncrementConstants, constants_from_dict, load_constants
from linpat.errors import ValidationError
from linpat.linsys import IntMatrix, LinearSystem

REPO = Path(__file__).resolve().parents[1]


def test_matrix_round_trip():
    V = IntMatrix.from_rows([[1, -2, 1, 0], [0, 1, -2, 1]])
    assert io.parse_matrix(io.format_matrix(V)) == V
    assert io.parse_matrix("# comment\n1 3\n\n1 -2 1  # row\n") == IntMatrix.from_rows([[1, -2, 1]])


def test_system_round_trip():
    psi = LinearSystem(((1, 2), (3, 4)), 2, (5, 6), 11)
    assert io.parse_system(io.format_system(psi)) == psi
    plain = LinearSystem(((1, 0), (1, 1), (1, 2)), 2)
    assert io.parse_system(io.format_system(plain)) == plain


@pytest.mark.parametrize("text,line", [("1 3\n1 -2\n", 2), ("1 3\n1 x 1\n", 2), ("2 3\n1 -2 1\n", 2),
                                       ("a b\n", 1)])
def test_matrix_errors_carry_line_numbers(text, line):
    with pytest.raises(ValidationError, match=f"line {line}"):
        io.parse_matrix(text)


def test_system_errors():
    with pytest.raises(ValidationError):
        io.parse_system("2 2\n1 0\n")
    with pytest.raises(ValidationError, match="line 4"):
        io.parse_system("2 2\n1 0\n0 1\nmodulus: 1\n")
    with pytest.raises(ValidationError, match="line 2"):
        io.parse_system("1 2\nconstants: 1\n1\n1\n")


def test_set_parsing():
    assert io.parse_set("3\n1\n# x\n3\n-2\n").tolist() == [-2, 1, 3]
    with pytest.raises(ValidationError, match="line 2"):
        io.parse_set("1\n2 3\n")
    assert io.format_set([3, 1, 1]) == "1\n3\n"


def test_json_is_standard_and_deterministic():
    doc = {"b": math.inf, "a": Fraction(1, 3), "c": np.arange(3), "d": np.float64(0.5), "e": (1, None)}
    text = io.dumps(doc)
    assert text == io.dumps(dict(reversed(list(doc.items()))))
    back = json.loads(text)
    assert back["b"] == "inf" and back["a"]["fraction"] == "1/3" and back["c"] == [0, 1, 2]
    with pytest.raises(ValidationError):
        io.to_jsonable(object())


def test_csv_writers():
    assert io.function_csv(np.array([1.0, 2.5])) == "index,value\n0,1.0\n1,2.5\n"
    assert io.table_csv([{"x": 1, "y": None}], ["x", "y"]) == "x,y\n1,\n"


def test_default_constants_file_matches_defaults():
    assert load_constants(REPO / "constants.toml") == Constants()
    assert load_constants() == Constants()


def test_constants_overrides_and_errors(tmp_path):
    c = constants_from_dict({"increment": {"case1_fraction": 10, "radius_factors": [1, 0.5]}})
    assert c.increment.case1_fraction == 10.0
    assert c.increment.radius_factors == (1.0, 0.5)
    assert c.sieve == Constants().sieve
    with pytest.raises(ValidationError):
        constants_from_dict({"increment": {"nope": 1}})
    with pytest.raises(ValidationError):
        constants_from_dict({"bogus": {}})
    with pytest.raises(ValidationError):
        constants_from_dict({"increment": {"max_steps": 2.5}})
    bad = tmp_path / "bad.toml"
    bad.write_text("[increment\n")
    with pytest.raises(ValidationError):
        load_constants(bad)
    assert isinstance(Constants().to_dict()["increment"], dict)
    assert IncrementConstants().kappa == 0.5
