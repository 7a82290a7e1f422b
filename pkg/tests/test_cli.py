import json

import numpy as np
import pytest
import scipy.linalg

from netcons.cli import dumps, laplacian_from_reduction, run
from netcons.graph import make_spec
from netcons.random_networks import random_spec
from netcons.system import assemble, kron_reduce

from conftest import PATH3, p3_end, p3_mid


def invoke(capsys, *argv):
    code = run([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


class TestAnalyze:
    def test_consensus(self, capsys, write_spec):
        code, out, _ = invoke(capsys, "analyze", write_spec(p3_end()))
        doc = json.loads(out)
        assert code == 0 and doc["consensus"] is True
        assert doc["beta"] == [3.0]

    def test_oscillatory(self, capsys, write_spec):
        code, out, _ = invoke(capsys, "analyze", write_spec(p3_mid()))
        doc = json.loads(out)
        assert code == 3
        assert doc["consensus"] is False and doc["oscillation_dim"] == 2
        assert doc["modes"][0]["frequency"] == 1.0

    def test_all_damped_rejected(self, capsys, write_spec):
        doc = p3_mid().to_dict()
        for node in doc["nodes"]:
            node["damping"] = [[1.0]]
        path = write_spec(p3_mid())
        path.write_text(json.dumps(doc))
        code, out, err = invoke(capsys, "analyze", path)
        assert code == 2 and out == ""
        assert "at least one damped and at least one (partially) undamped node" in err

    @pytest.mark.parametrize("mutate, word", [
        (lambda d: d["nodes"][0].update(mass=[[-1.0]]), "NotSPD"),
        (lambda d: d.update(edges=d["edges"][:1]), "DisconnectedGraph"),
    ])
    def test_schema_errors(self, capsys, tmp_path, mutate, word):
        doc = p3_mid().to_dict()
        mutate(doc)
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(doc))
        code, _, err = invoke(capsys, "analyze", path)
        assert code == 2 and word in err

    def test_missing_file(self, capsys, tmp_path):
        assert invoke(capsys, "analyze", tmp_path / "none.json")[0] == 2

    def test_env_tolerance(self, capsys, write_spec, monkeypatch):
        monkeypatch.setenv("NETCONS_TOL", "1e-7")
        assert invoke(capsys, "analyze", write_spec(p3_mid()))[0] == 3


class TestReduce:
    def test_p3_mid(self, capsys, write_spec):
        code, out, _ = invoke(capsys, "reduce", write_spec(p3_mid()))
        doc = json.loads(out)
        assert code == 0
        assert doc["undamped_nodes"] == ["1", "3"]
        np.testing.assert_allclose(doc["L_tilde_u"], [[0.5, -0.5], [-0.5, 0.5]], atol=1e-15)
        assert [(e["from"], e["to"]) for e in doc["edges"]] == [("1", "3")]

    @pytest.mark.parametrize("seed", range(15))
    def test_round_trip_spectrum(self, capsys, write_spec, seed):
        spec = random_spec(np.random.default_rng(seed))
        _, out, _ = invoke(capsys, "reduce", write_spec(spec))
        L, M = laplacian_from_reduction(json.loads(out))
        red = kron_reduce(assemble(spec))
        got = np.sort(scipy.linalg.eigvals(L, M).real)
        want = np.sort(scipy.linalg.eigvals(red.L_tilde_u, red.M_u).real)
        np.testing.assert_allclose(got, want, atol=1e-10)


class TestModes:
    def test_p3_mid(self, capsys, write_spec):
        code, out, _ = invoke(capsys, "modes", write_spec(p3_mid()))
        modes = json.loads(out)
        assert code == 0 and len(modes) == 1
        assert modes[0]["nodes"] == ["1", "3"]

    def test_none(self, capsys, write_spec):
        assert json.loads(invoke(capsys, "modes", write_spec(p3_end()))[1]) == []


class TestSimulate:
    def test_trace_and_determinism(self, capsys, write_spec, tmp_path):
        net = write_spec(p3_mid())
        outs = []
        for name in ("a.csv", "b.csv"):
            code, out, _ = invoke(capsys, "simulate", net, "--t-end", 20, "--dt", 0.01,
                                  "--seed", 4, "--out", tmp_path / name)
            assert code == 0
            outs.append(out)
        assert outs[0] == outs[1]
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
        assert (tmp_path / "a.csv").read_text().splitlines()[0] == "t,y_1,y_2,y_3,U"

    def test_init_file(self, capsys, write_spec, tmp_path):
        init = tmp_path / "z0.json"
        init.write_text(json.dumps([3.0, 0.0, 0.0, 0.0, 0.0]))
        code, out, _ = invoke(capsys, "simulate", write_spec(p3_end()), "--t-end", 400, "--dt", 0.02,
                              "--init", init, "--out", tmp_path / "t.csv")
        assert code == 0 and json.loads(out)["classification"] == "Consensus"

    def test_bad_init_and_step(self, capsys, write_spec, tmp_path):
        init = tmp_path / "z0.json"
        init.write_text("[1.0, 2.0]")
        net = write_spec(p3_end())
        assert invoke(capsys, "simulate", net, "--t-end", 1, "--dt", 0.01, "--init", init,
                      "--out", tmp_path / "t.csv")[0] == 2
        assert invoke(capsys, "simulate", net, "--t-end", 1, "--dt", 5,
                      "--out", tmp_path / "t.csv")[0] == 2


class TestVerify:
    @pytest.mark.parametrize("make", [p3_end, p3_mid])
    def test_agree(self, capsys, write_spec, make):
        code, out, _ = invoke(capsys, "verify", write_spec(make()), "--runs", 2)
        doc = json.loads(out)
        assert code == 0 and doc["all_agree"] is True
        assert [r["run"] for r in doc["simulations"]] == [0, 1]


class TestDumps:
    def test_seventeen_digits(self):
        assert dumps(0.1) == "0.10000000000000001"
        assert dumps(1.0) == "1.0"
        assert dumps([1, 2.5, True]) == "[1, 2.5, true]"
        assert dumps(float("nan")) == "null"
        assert json.loads(dumps({"a": [0.1, {"b": np.float64(2.0)}]})) == {"a": [0.1, {"b": 2.0}]}

    def test_partially_damped_spec_output_is_stable(self, capsys, write_spec):
        spec = make_spec(3, PATH3, [np.diag([1.0, 0.0]), np.eye(2), np.diag([1.0, 0.0])], r=2)
        net = write_spec(spec)
        first = invoke(capsys, "analyze", net)
        assert first == invoke(capsys, "analyze", net)
        assert first[0] == 3
