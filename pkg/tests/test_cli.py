import json
import subprocess
import sys

import pytest

from h3torus.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, (json.loads(out.out) if out.out.strip() else None), out.err


def test_cup_coker(capsys):
    code, d, _ = run(capsys, "cup-coker", "--group", "3,3,3")
    assert code == 0
    assert d["group"] == [3, 3, 3] and d["invariant_factors"] == [3]


def test_h3nr_local_data(capsys):
    code, d, _ = run(capsys, "h3nr", "--group", "3,3", "--local", '{"n": 9, "local_degrees": [1, 3, 3]}')
    assert code == 0
    assert d["full_group"]["invariant_factors"] == [3]
    assert d["arithmetic_source"] == "local-data"
    code, d, _ = run(capsys, "h3nr", "--group", "3,3,3", "--h3", "3", "--method", "dec")
    assert code == 0 and d["full_group"]["invariant_factors"] == [3, 3]


def test_h3nr_even_order_has_no_two_part(capsys):
    code, d, _ = run(capsys, "h3nr", "--group", "2,6", "--h3", "3")
    assert code == 0
    assert d["two_part"] is None and d["full_group"] is None
    assert d["two_part_status"] == "undetermined-by-method"


def test_cohomology_and_dec(capsys):
    code, d, _ = run(capsys, "cohomology", "--group", "2,2", "--degree", "2")
    assert code == 0 and d["invariant_factors"] == [2, 2]
    # H^1(G, W) = H^2(G, Z) for the norm-one lattice
    code, d, _ = run(capsys, "cohomology", "--group", "3", "--coeff", "norm-one", "--degree", "1")
    assert code == 0 and d["invariant_factors"] == [3]
    code, d, _ = run(capsys, "dec", "--group", "3,3,3")
    assert code == 0 and d["invariant_factors"] == [3]


def test_brauer(capsys):
    code, d, _ = run(capsys, "brauer", "--group", "4,4", "--cross-check")
    assert code == 0 and d["invariant_factors"] == [4] and d["agree"] is True


def test_verify(capsys):
    code, d, _ = run(capsys, "verify", "--max-order", "4")
    assert code == 0 and d["all_passed"] and d["cells"] == len(d["records"])
    code, d, _ = run(capsys, "verify", "--max-order", "4", "--fault", "n-sequence")
    assert code == 1 and d["failures"] > 0


@pytest.mark.parametrize("argv", [
    ["cup-coker", "--group", "0,3"],
    ["cup-coker", "--group", "x"],
    ["h3nr", "--group", "3,3", "--local", "{not json"],
    ["h3nr", "--group", "3,3", "--local", '{"n": 27, "local_degrees": [3]}'],
    ["h3nr", "--group", "3,3", "--local", '{"n": 9, "local_degrees": [2]}'],
    ["h3nr", "--group", "3,3", "--h3", "a"],
    ["h3nr", "--group", "3,3", "--h3", "3", "--local", '{"n": 9}'],
    ["cohomology", "--group", "3", "--degree", "7"],
    ["verify", "--max-order", "0"],
    ["nonsense"],
    [],
])
def test_invalid_input_exits_2(capsys, argv):
    code, d, _ = run(capsys, *argv)
    assert code == 2 and d is None


def test_console_entry_point():
    p = subprocess.run([sys.executable, "-m", "h3torus.cli", "--indent", "2", "cup-coker", "--group", "2,2,2"],
                       capture_output=True, text=True, check=False)
    assert p.returncode == 0
    assert json.loads(p.stdout)["invariant_factors"] == [2]


def test_text_output_carries_the_same_fields(capsys):
    assert main(["--text", "cup-coker", "--group", "3,3,3"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines == ["group: [3, 3, 3]", "free_rank: 0", "invariant_factors: [3]"]
    assert main(["--text", "verify", "--max-order", "3"]) == 0
    out = capsys.readouterr().out
    assert "all_passed: true" in out and "FAIL" not in out
