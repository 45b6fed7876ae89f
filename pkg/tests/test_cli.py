"""Command-line interface: happy paths, exit codes, byte determinism."""

import json

import pytest

from afqms.algebra import kernel_to_json, measure_to_json, random_kernel, make_measure
from afqms.bratteli import car_diagram
from afqms.cli import EXIT_ACCEPT, EXIT_DOMAIN, EXIT_IO, EXIT_OK, main
from afqms.groupoid import TruncatedGroupoid

import numpy as np

CAR3_TEXT = """\
bratteli v1
levels 3
sizes 1 1 1 1
matrix 1: [[2]]
matrix 2: [[2]]
matrix 3: [[2]]
"""


@pytest.fixture()
def car3_file(tmp_path):
    p = tmp_path / "car3.bd"
    p.write_text(CAR3_TEXT)
    return str(p)


@pytest.fixture()
def car3():
    return TruncatedGroupoid(car_diagram(3), 3)


@pytest.fixture()
def kernel_file(tmp_path, car3):
    rng = np.random.default_rng(np.random.Philox(2))
    f = random_kernel(car3, 2, rng)
    p = tmp_path / "kernel.json"
    p.write_text(kernel_to_json(f))
    return str(p)


@pytest.fixture()
def measure_files(tmp_path, car3):
    a = make_measure(car3, {0: 1.0})
    b = make_measure(car3, {1: 0.5, 2: 0.5})
    pa = tmp_path / "mu.json"
    pb = tmp_path / "nu.json"
    pa.write_text(measure_to_json(a, car3))
    pb.write_text(measure_to_json(b, car3))
    return str(pa), str(pb)


def test_check(car3_file, tmp_path, capsys):
    assert main(["check", "--diagram", car3_file]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc["ell"] == ["1", "2", "4", "8"]
    assert doc["config"]["command"] == "check"


def test_analyze(car3_file, kernel_file, tmp_path):
    out = tmp_path / "report.json"
    code = main(
        [
            "analyze",
            "--diagram", car3_file,
            "--resolution", "3",
            "--kernel", kernel_file,
            "--out", str(out),
        ]
    )
    assert code == EXIT_OK
    doc = json.loads(out.read_text())
    s = doc["seminorms"]
    assert s["total"]["1"] >= max(s["l_lip"], s["l_ell"]["1"]) - 1e-12
    assert doc["config"]["resolution"] == 3


def test_bound_csv(car3_file, tmp_path):
    out = tmp_path / "bound.csv"
    code = main(
        [
            "bound",
            "--diagram", car3_file,
            "--resolution", "3",
            "--level", "2",
            "--out", str(out),
        ]
    )
    assert code == EXIT_OK
    lines = out.read_text().splitlines()
    header = next(l for l in lines if not l.startswith("#"))
    assert header.split(",")[0] == "m"
    assert sum(1 for l in lines if not l.startswith("#")) == 4  # header + m=0..2


def test_net(car3_file, capsys):
    code = main(
        [
            "net",
            "--diagram", car3_file,
            "--resolution", "3",
            "--radius", "4",
            "--eps", "0.5",
        ]
    )
    assert code == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc["num_centers"] >= 1
    assert float(doc["certified_radius"]) > 0


def test_mk(car3_file, measure_files, capsys):
    mu, nu = measure_files
    code = main(
        [
            "mk",
            "--diagram", car3_file,
            "--resolution", "3",
            "--mu", mu,
            "--nu", nu,
        ]
    )
    assert code == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    p = doc
    assert p["wasserstein_tree"] == pytest.approx(p["wasserstein_lp"], abs=1e-9)
    assert p["mk_lower_bound"] <= p["wasserstein_tree"] + 1e-9


def test_missing_file_is_io_error(tmp_path, capsys):
    code = main(["check", "--diagram", str(tmp_path / "absent.bd")])
    assert code == EXIT_IO
    assert "afqms:" in capsys.readouterr().err


def test_corrupt_diagram_is_domain_error(tmp_path, capsys):
    p = tmp_path / "bad.bd"
    p.write_text("bratteli v1\nlevels 1\nsizes 1 1\nmatrix 1: [[0]]\n")
    code = main(["check", "--diagram", str(p)])
    assert code == EXIT_DOMAIN


def test_corrupt_kernel_is_io_error(car3_file, tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    code = main(
        [
            "analyze",
            "--diagram", car3_file,
            "--resolution", "3",
            "--kernel", str(p),
        ]
    )
    assert code == EXIT_IO


def test_bad_resolution_is_domain_error(car3_file, capsys):
    code = main(
        ["bound", "--diagram", car3_file, "--resolution", "9", "--level", "1"]
    )
    assert code == EXIT_DOMAIN


def test_accept_filter(tmp_path, capsys):
    out = tmp_path / "accept.txt"
    code = main(["accept", "--filter", "length-axioms", "--out", str(out)])
    assert code == EXIT_OK
    text = out.read_text()
    assert text.startswith("PASS length-axioms")
    code = main(["accept", "--filter", "no-such-check"])
    assert code == EXIT_DOMAIN


def test_output_determinism(car3_file, measure_files, tmp_path):
    mu, nu = measure_files
    outs = []
    for name in ("a.json", "b.json"):
        out = tmp_path / name
        code = main(
            [
                "mk",
                "--diagram", car3_file,
                "--resolution", "3",
                "--mu", mu,
                "--nu", nu,
                "--seed", "7",
                "--out", str(out),
            ]
        )
        assert code == EXIT_OK
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
