"""Command-line front end: exit codes, JSON schemas and the documented examples."""

import csv
import json

import jsonschema
import numpy as np
import pytest
from referencing import Registry, Resource

from oracles import real_roots_by_bisection
from quasispec.cli import load_schema, main, parse_complex, parse_range

A = "1.5707963"


def _registry():
    names = ["common", "spectrum", "metric", "similarity", "perturb", "sweep"]
    return Registry().with_resources(
        (f"{n}.json", Resource.from_contents(load_schema(n))) for n in names
    )


def run(argv, capsys, schema=True):
    code = main(argv)
    out = capsys.readouterr().out
    doc = json.loads(out) if out.strip() else None
    if schema and doc is not None and "error" not in doc:
        jsonschema.Draft202012Validator(load_schema(argv[0]), registry=_registry()).validate(doc)
    return code, doc


class TestParsing:
    def test_complex(self):
        assert parse_complex("1,-2.5") == complex(1, -2.5)
        assert parse_complex("3") == 3
        with pytest.raises(Exception):
            parse_complex("1,2,3")

    def test_range(self):
        np.testing.assert_allclose(parse_range("0:1:0.25"), [0, 0.25, 0.5, 0.75, 1])
        np.testing.assert_allclose(parse_range("-1:1:0.1"), np.round(np.linspace(-1, 1, 21), 12))
        with pytest.raises(Exception):
            parse_range("1:0:0.1")

    def test_usage_errors(self, capsys):
        assert main([]) == 2
        assert main(["spectrum", "--a", "1"]) == 2
        assert main(["spectrum", "--a", "1", "--alpha", "0.5", "--c-minus", "1,0", "--c-plus", "1,0"]) == 2
        assert main(["spectrum", "--a", "1", "--c-minus", "1,0"]) == 2
        assert main(["spectrum", "--a", "1", "--alpha", "0.5", "--nmax", "0"]) == 2
        assert main(["metric", "bogus", "--a", "1", "--alpha", "0.5"]) == 2
        capsys.readouterr()


class TestSpectrum:
    def test_pt(self, capsys):
        code, doc = run(["spectrum", "--alpha", "0.5", "--beta", "0", "--a", A, "--nmax", "6"], capsys)
        assert code == 0
        re = [e["re"] for e in doc["eigenvalues"]]
        k2 = (np.pi / (2 * float(A))) ** 2
        np.testing.assert_allclose(re, [0.25] + [n * n * k2 for n in range(1, 7)], atol=1e-9)
        assert doc["certification"]["certified"]
        assert doc["defaults"]["grid"] == {"panels": 16, "order": 12}
        assert doc["defaults"]["series_truncation"] == 800

    def test_neumann(self, capsys):
        code, doc = run(["spectrum", "--c-minus", "0,0", "--c-plus", "0,0", "--a", A, "--nmax", "4"], capsys)
        assert code == 0
        k2 = (np.pi / (2 * float(A))) ** 2
        np.testing.assert_allclose([e["re"] for e in doc["eigenvalues"]], [n * n * k2 for n in range(5)], atol=1e-9)

    def test_real_robin(self, capsys):
        code, doc = run(["spectrum", "--c-minus", "1,0", "--c-plus", "2,0", "--a", "1", "--nmax", "8"], capsys)
        assert code == 0
        re = np.array([e["re"] for e in doc["eigenvalues"]])
        oracle = real_roots_by_bisection(1.0, 2.0, 1.0, -5, re.max() + 1)
        np.testing.assert_allclose(re, oracle[: re.size], atol=1e-9)
        assert max(abs(e["im"]) for e in doc["eigenvalues"]) <= 1e-10

    def test_out_file(self, tmp_path, capsys):
        path = tmp_path / "s.json"
        assert main(["spectrum", "--alpha", "0.5", "--a", "1", "--nmax", "3", "--out", str(path)]) == 0
        assert capsys.readouterr().out == ""
        assert json.loads(path.read_text())["command"] == "spectrum"

    def test_deterministic(self, capsys):
        argv = ["spectrum", "--c-minus", "0.3,0.2", "--c-plus", "-1,0.5", "--a", "1", "--nmax", "5"]
        _, d1 = run(argv, capsys)
        _, d2 = run(argv, capsys)
        assert d1 == d2


class TestMetric:
    def test_constant_verify(self, capsys):
        code, doc = run(["metric", "constant", "--alpha", "0.5", "--a", A, "--verify"], capsys)
        assert code == 0
        assert doc["verification"]["residuals"]["max_eigen_residual"] <= 1e-7
        assert max(doc["pde"].values()) <= 1e-6

    def test_cchoice_guard(self, capsys):
        code, _ = run(["metric", "cchoice", "--alpha", "1.6", "--a", A], capsys)
        assert code == 2

    def test_general_hs(self, capsys):
        code, doc = run(["metric", "general", "--alpha", "1", "--beta", "1", "--c", "0", "--a", "1", "--hs"], capsys)
        assert code == 0
        assert doc["hs"]["closed_squared"] == pytest.approx(1.509158, abs=1e-6)
        assert doc["hs"]["quadrature_squared"] == pytest.approx(1.509158, abs=1e-6)

    def test_general_complex_pair_fails_verification(self, capsys):
        code, doc = run(["metric", "general", "--alpha", "1", "--beta", "-1", "--a", A, "--verify",
                         "--n-verify", "4"], capsys)
        assert code == 1
        assert any(r["nonreal"] for r in doc["verification"]["per_eigenpair"])

    def test_csv_dump(self, tmp_path, capsys):
        path = tmp_path / "k.csv"
        code, _ = run(["metric", "cchoice", "--alpha", "0.5", "--a", A, "--panels", "2", "--order", "4",
                       "--csv", str(path)], capsys)
        assert code == 0
        rows = list(csv.reader(path.open()))
        assert rows[0] == ["x", "y", "re", "im"]
        assert len(rows) == 1 + 64

    def test_series(self, capsys):
        code, doc = run(["metric", "series", "--alpha", "0.5", "--a", A, "--n", "40", "--verify"], capsys)
        assert code == 0
        assert doc["truncation"] == 40 and doc["verification"]["passed"]


class TestSimilarity:
    def test_verify_all(self, capsys):
        code, doc = run(["similarity", "--alpha", "0.5", "--a", A, "--verify-all"], capsys)
        assert code == 0
        assert doc["max_residual"] <= 1e-6
        assert all(v <= 1e-6 for v in doc["omega_residuals"].values())
        assert doc["degeneracy"] is None

    def test_degenerate(self, capsys):
        code, doc = run(["similarity", "--alpha", "1", "--a", str(np.pi / 2)], capsys)
        assert code == 0
        assert doc["degeneracy"]["H"]["geometric_multiplicity"] == 1
        assert doc["degeneracy"]["h"]["geometric_multiplicity"] == 2
        code, _ = run(["similarity", "--alpha", "1", "--a", str(np.pi / 2), "--verify-all"], capsys)
        assert code == 1

    def test_needs_beta_zero(self, capsys):
        assert run(["similarity", "--alpha", "0.5", "--beta", "0.2", "--a", A], capsys)[0] == 2


class TestPerturb:
    def test_sine_potential(self, capsys):
        code, doc = run(["perturb", "--alpha", "0.5", "--a", A, "--v", "sin3", "--m", "80", "--verify"], capsys)
        assert code == 0
        assert doc["omega_v"]["relative_change"] < 0.02
        assert doc["potential"] == "sin3"

    def test_gap(self, capsys):
        code, doc = run(["perturb", "--c-minus", "1,0", "--c-plus", "2,0", "--a", str(np.pi / 2), "--m", "120"], capsys)
        assert code == 0
        assert doc["asymptotic_gap"]["values"][40][0] == pytest.approx(2 / np.pi, rel=0.05)
        assert doc["asymptotic_gap"]["limit"][0] == pytest.approx(2 / np.pi)

    def test_liouville(self, capsys):
        code, doc = run(["perturb", "--c-minus", "0.5,0", "--c-plus", "1.5,0", "--a", "1", "--rho", "exp:2",
                         "--m", "30"], capsys)
        assert code == 0
        assert doc["liouville"]["endpoints"] == pytest.approx([1 - np.e, 1 - np.exp(-1)])

    def test_bad_potential(self, capsys):
        assert run(["perturb", "--alpha", "0.5", "--a", "1", "--v", "cosh"], capsys)[0] == 2

    def test_rho_bound(self, capsys):
        assert run(["perturb", "--alpha", "0.5", "--a", "1", "--rho", "exp:2", "--bound", "2"], capsys)[0] == 2

    def test_degenerate_system(self, capsys):
        code, doc = run(["perturb", "--alpha", "1", "--a", str(np.pi / 2), "--m", "12", "--verify"], capsys)
        assert code == 1 and doc["omega_v"] is None


class TestSweep:
    def test_small_sweep(self, tmp_path, capsys):
        path = tmp_path / "sweep.csv"
        code, doc = run(["sweep", "--alpha", "0.5:1.5:1", "--beta", "-0.5:0.5:0.5", "--a", A, "--csv", str(path)],
                        capsys)
        assert code == 0
        rows = list(csv.DictReader(path.open()))
        assert list(rows[0]) == ["alpha", "beta", "n_complex_pairs", "min_gap"]
        assert len(rows) == 6 == len(doc["rows"])
        for r in rows:
            beta, pairs = float(r["beta"]), int(r["n_complex_pairs"])
            if beta > 0:
                assert pairs == 0
            if beta < 0:
                assert pairs >= 1

    def test_thread_setting(self, capsys, monkeypatch):
        monkeypatch.setenv("QUASISPEC_THREADS", "2")
        code, doc = run(["sweep", "--alpha", "0.5:0.5:1", "--beta", "0.5:0.5:1", "--a", "1"], capsys)
        assert code == 0 and doc["threads"] == 2
        assert doc["rows"][0]["n_complex_pairs"] == 0

    def test_negative_range_without_equals(self, capsys):
        code, doc = run(["sweep", "--alpha", "0.5:0.5:1", "--beta", "-0.5:-0.5:1", "--a", "1"], capsys)
        assert code == 0 and doc["rows"][0]["beta"] == -0.5
