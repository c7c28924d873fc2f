import json

import numpy as np
import pytest

from robustcfx.cli import run
from robustcfx.evaluation import make_two_clusters, save_csv
from robustcfx.network import load_model


def _json_line(out: str) -> dict:
    line = [l for l in out.splitlines() if l.startswith("json=")][-1]
    return json.loads(line[len("json="):])


def call(capsys, *argv):
    code = run(list(argv))
    cap = capsys.readouterr()
    return code, cap.out, cap.err


def test_missing_model_is_usage_error(capsys):
    code, _, err = call(capsys, "apds", "--input", "1")
    assert code == 2 and "--model" in err


def test_unknown_flag_is_usage_error(capsys):
    code, _, err = call(capsys, "enumerate", "--model", "builtin:linear", "--input", "1",
                        "--delta", "0.1", "--frobnicate")
    assert code == 2 and "unrecognized" in err


def test_zero_delta_is_domain_error(capsys):
    code, _, err = call(capsys, "enumerate", "--model", "builtin:linear", "--input", "1",
                        "--delta", "0")
    assert code == 1 and "positive" in err


def test_bad_model_file(capsys, tmp_path):
    p = tmp_path / "m.json"
    p.write_text("{not json")
    code, _, _ = call(capsys, "apds", "--model", str(p), "--input", "1")
    assert code == 1


def test_input_dimension_mismatch(capsys):
    code, _, err = call(capsys, "apds", "--model", "builtin:linear", "--input", "1,2")
    assert code == 1 and "features" in err


def test_threads_must_be_positive(capsys):
    code, _, _ = call(capsys, "enumerate", "--model", "builtin:linear", "--input", "1",
                      "--delta", "0.1", "--threads", "0")
    assert code == 2


def test_structured_report_is_complete_and_replayable(capsys, tmp_path):
    argv = ["apds", "--model", "builtin:enumeration-example", "--input=-2.57", "--r", "0.9",
            "--n", "20000", "--miss", "1e-10", "--seed", "3", "--format", "structured"]
    code, out, _ = call(capsys, *argv, "--output", str(tmp_path / "r.json"))
    assert code == 0
    doc = _json_line(out)
    assert doc["config"]["seed"] == 3 and doc["config"]["r"] == 0.9 and doc["config"]["n"] == 20000
    assert "result.delta_max=" in out and "config.seed=3" in out
    assert 0.09 < doc["results"]["delta_max"] < 0.14
    saved = json.loads((tmp_path / "r.json").read_text())
    assert saved["exit_code"] == 0 and saved["results"] == doc["results"]
    # replay from the printed config
    cfg = doc["config"]
    replay = ["apds", "--model", cfg["model"], f"--input={cfg['input'][0]}", "--r", str(cfg["r"]),
              "--n", str(cfg["n"]), "--miss", str(cfg["miss"]), "--seed", str(cfg["seed"]),
              "--format", "structured"]
    _, out2, _ = call(capsys, *replay)
    assert _json_line(out2)["results"] == doc["results"]


def test_env_seed(capsys, monkeypatch):
    monkeypatch.setenv("ROBUSTCFX_SEED", "11")
    _, out, _ = call(capsys, "apds", "--model", "builtin:linear", "--input", "1",
                     "--format", "structured")
    assert _json_line(out)["config"]["seed"] == 11
    monkeypatch.setenv("ROBUSTCFX_SEED", "eleven")
    code, _, _ = call(capsys, "apds", "--model", "builtin:linear", "--input", "1")
    assert code == 2


def test_human_format(capsys):
    code, out, _ = call(capsys, "provable-delta", "--model", "builtin:linear", "--input", "1")
    assert code == 0 and "provable_delta" in out
    assert 0.4998 <= float(out.split("provable_delta:")[1].split()[0]) <= 0.5


def test_enumerate_linear(capsys):
    code, out, _ = call(capsys, "enumerate", "--model", "builtin:linear", "--input", "1",
                        "--delta", "0.6", "--max-depth", "10", "--format", "structured")
    res = _json_line(out)["results"]
    assert code == 0 and abs(res["nonrobust_fraction"] - 1 / 12) <= 2 ** -10


def test_noms_compare(capsys):
    code, out, _ = call(capsys, "noms-compare", "--model", "builtin:two-relu", "--input", "1,0.8",
                        "--deltas", "0.1,0.3", "--n", "1000", "--format", "structured")
    table = _json_line(out)["results"]["table"]
    assert code == 0 and len(table) == 2 and {"delta", "n", "avg_diff", "rejection_pct"} <= set(table[0])


def test_reduce_roundtrip(capsys, tmp_path):
    cnf = tmp_path / "f.cnf"
    cnf.write_text("p cnf 1 2\n1 1 1 0\n-1 -1 -1 0\n")
    model = tmp_path / "g.json"
    code, out, _ = call(capsys, "reduce", "--cnf", str(cnf), "--check", "--out", str(model),
                        "--format", "structured")
    res = _json_line(out)["results"]
    assert code == 0 and res["equivalent"] and not res["satisfiable"] and not res["realizable"]
    net = load_model(model)
    mask = np.asarray(net.metadata["shift_mask"], bool)
    assert mask.size == net.n_params and mask.sum() == res["perturbed_params"]
    assert net.forward(np.asarray(net.metadata["input"])) < 0.5


def test_reduce_errors(capsys, tmp_path):
    code, _, _ = call(capsys, "reduce", "--cnf", str(tmp_path / "missing.cnf"))
    assert code == 1
    bad = tmp_path / "bad.cnf"
    bad.write_text("p cnf 1 1\n1 1 0\n")
    code, _, err = call(capsys, "reduce", "--cnf", str(bad))
    assert code == 1 and "literals" in err


def test_reproduce_unknown_id(capsys):
    code, _, _ = call(capsys, "reproduce", "fig99")
    assert code == 2


def test_reproduce_fig5_apds(capsys):
    code, _, err = call(capsys, "reproduce", "fig5-apds")
    assert code == 0 and "PASS fig5-apds" in err


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    d = tmp_path_factory.mktemp("e2e")
    csv = d / "two.csv"
    save_csv(make_two_clusters(200, seed=1), csv)
    code = run(["train", "--dataset", str(csv), "--out", str(d / "base.json"),
                "--shifted-out", str(d / "shifted.json"), "--epochs", "60"])
    assert code == 0
    return d


def test_train_writes_normalization(trained):
    net = load_model(trained / "base.json")
    norm = net.metadata["normalization"]
    assert len(norm["min"]) == len(norm["max"]) == 2


def test_generate_and_evaluate(capsys, trained):
    base = load_model(trained / "base.json")
    from robustcfx.evaluation import load_csv
    ds = load_csv(trained / "two.csv")
    lo, hi = (np.asarray(base.metadata["normalization"][k]) for k in ("min", "max"))
    row = int(np.flatnonzero(base.predict_output((ds.X - lo) / (hi - lo)) < 0.5)[0])
    code, out, _ = call(capsys, "generate", "--model", str(trained / "base.json"),
                        "--dataset", str(trained / "two.csv"), "--input-row", str(row),
                        "--delta", "0.02", "--format", "structured")
    res = _json_line(out)["results"]
    assert code == 0 and res["valid"] and res["robust"]
    assert base.forward(np.asarray(res["x_prime"])) >= 0.5

    code, out, _ = call(capsys, "evaluate", "--dataset", str(trained / "two.csv"),
                        "--base", str(trained / "base.json"), "--shifted", str(trained / "shifted.json"),
                        "--n-cfx", "10", "--format", "structured")
    res = _json_line(out)["results"]
    assert code == 0 and res["vm1"] == 100.0 and res["delta_e"] > 0


def test_generate_rejects_positive_row(capsys, trained):
    base = load_model(trained / "base.json")
    from robustcfx.evaluation import load_csv
    ds = load_csv(trained / "two.csv")
    lo, hi = (np.asarray(base.metadata["normalization"][k]) for k in ("min", "max"))
    row = int(np.flatnonzero(base.predict_output((ds.X - lo) / (hi - lo)) >= 0.5)[0])
    code, _, err = call(capsys, "generate", "--model", str(trained / "base.json"),
                        "--dataset", str(trained / "two.csv"), "--input-row", str(row),
                        "--delta", "0.02")
    assert code == 1 and "already" in err


def test_evaluate_cfx_requires_inputs(capsys, trained, tmp_path):
    cfx = tmp_path / "c.csv"
    cfx.write_text("a,b\n0.5,0.5\n")
    code, _, _ = call(capsys, "evaluate", "--dataset", str(trained / "two.csv"),
                      "--base", str(trained / "base.json"), "--shifted", str(trained / "shifted.json"),
                      "--cfx", str(cfx))
    assert code == 2
