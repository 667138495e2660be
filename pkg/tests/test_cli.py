import json
import math

import numpy as np
import pytest

from mixtopo.cli import main
from mixtopo.graph import load_edge_list


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def err_line(err):
    return json.loads(err.strip().splitlines()[-1])


@pytest.fixture
def toys(tmp_path):
    files = {
        "k4": "0 1\n0 2\n0 3\n1 2\n1 3\n2 3\n",
        "p3": "0 1\n1 2\n",
        "split": "0 1\n1 2\n0 2\n3 4\n",
    }
    for name, text in files.items():
        (tmp_path / f"{name}.edges").write_text(text)
    return tmp_path


def test_generate_regular(tmp_path, capsys):
    out = tmp_path / "g.edges"
    code, _, _ = run(capsys, "generate", "--model", "regular", "--nodes", 5000, "--degree", 14,
                     "--seed", 1, "--out", out)
    assert code == 0
    g = load_edge_list(out)
    assert g.n == 5000 and np.all(g.out_degrees() == 14)
    man = json.loads((tmp_path / "g.manifest.json").read_text())
    assert man["command"] == "generate" and man["seed"] == 1
    assert str(out) in man["outputs"] and man["config"]["D"] == 14


def test_generate_ba_mean_degree(tmp_path, capsys):
    out = tmp_path / "ba.edges"
    assert run(capsys, "generate", "--model", "ba", "--nodes", 5000, "--m", 3, "--out", out)[0] == 0
    assert load_edge_list(out).out_degrees().mean() == pytest.approx(6, rel=0.02)


def test_generate_usage_errors(tmp_path, capsys):
    code, _, err = run(capsys, "generate", "--model", "ba", "--m", 3)
    assert code == 2 and "usage:" in err and err_line(err)["code"] == 2
    code, _, err = run(capsys, "generate", "--model", "regular", "--nodes", 11, "--degree", 3)
    assert code == 2
    code, _, err = run(capsys, "generate", "--model", "nope", "--nodes", 10)
    assert code == 2


def test_generate_failure_exit_code(tmp_path, capsys, monkeypatch):
    from mixtopo import cli, generators

    def boom(cfg):
        raise generators.GenerationError("pairing failed")
    monkeypatch.setattr(cli, "generate", boom)
    code, _, err = run(capsys, "generate", "--model", "regular", "--nodes", 10, "--degree", 3,
                       "--out", tmp_path / "x.edges")
    assert code == 3 and err_line(err)["error"] == "generation"


def test_generate_from_config_file(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("model=er\nn=300\np=0.02\nseed=5\n")
    assert run(capsys, "generate", "--config", cfg, "--out", tmp_path / "a.edges")[0] == 0
    assert run(capsys, "generate", "--model", "er", "--nodes", 300, "--p", 0.02, "--seed", 5,
               "--out", tmp_path / "b.edges")[0] == 0
    assert load_edge_list(tmp_path / "a.edges") == load_edge_list(tmp_path / "b.edges")


def test_env_sets_default_output_dir(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("MIXTOPO_OUT", str(tmp_path / "outdir"))
    assert run(capsys, "generate", "--model", "ba", "--nodes", 50, "--m", 2)[0] == 0
    assert (tmp_path / "outdir" / "ba.edges").exists()
    assert (tmp_path / "outdir" / "ba.manifest.json").exists()


def test_analyze_expander(tmp_path, capsys):
    g = tmp_path / "g.edges"
    run(capsys, "generate", "--model", "regular", "--nodes", 5000, "--degree", 14, "--out", g)
    code, out, _ = run(capsys, "analyze", "--graph", g, "--out", tmp_path / "a.json")
    assert code == 0
    rep = json.loads((tmp_path / "a.json").read_text())
    assert rep["max_anonymity_bits"] == pytest.approx(12.2877, abs=1e-4)
    assert rep["model"] == "regular" and rep["schema_version"] == 1
    assert (tmp_path / "a.csv").read_text().startswith("t,entropy_bits,rpd")


def test_analyze_lazy_path3(toys, capsys):
    code, _, _ = run(capsys, "analyze", "--graph", toys / "p3.edges", "--lazy",
                     "--out", toys / "p3.json")
    assert code == 0
    rep = json.loads((toys / "p3.json").read_text())
    assert rep["max_anonymity_bits"] == pytest.approx(1.5)
    assert rep["criterion"]["lazy"] is True


def test_analyze_not_reached(tmp_path, capsys):
    g = tmp_path / "kws.edges"
    run(capsys, "generate", "--model", "kws", "--nodes", 4900, "--radius", 4, "--q", 2,
        "--out", g)
    code, out, _ = run(capsys, "analyze", "--graph", g, "--t-max", 2, "--out", tmp_path / "k.json")
    assert code == 0 and "not reached" in out
    assert json.loads((tmp_path / "k.json").read_text())["t_converge"] is None


def test_analyze_disconnected(toys, capsys):
    code, _, err = run(capsys, "analyze", "--graph", toys / "split.edges", "--out", toys / "s.json")
    assert code == 4 and "--giant-component" in err_line(err)["message"]
    code, _, _ = run(capsys, "analyze", "--graph", toys / "split.edges", "--giant-component",
                     "--out", toys / "s.json")
    assert code == 0
    rep = json.loads((toys / "s.json").read_text())
    assert rep["max_anonymity_bits"] == pytest.approx(math.log2(3))
    assert rep["graph"]["retained_fraction"] == pytest.approx(0.6)


def test_analyze_bad_input(tmp_path, capsys):
    bad = tmp_path / "bad.edges"
    bad.write_text("0 1\nfoo bar\n")
    code, _, err = run(capsys, "analyze", "--graph", bad)
    assert code == 2 and ":2:" in err_line(err)["message"]


def test_outputs_byte_identical_but_duration(tmp_path, capsys):
    g = tmp_path / "g.edges"
    run(capsys, "generate", "--model", "ba", "--nodes", 400, "--m", 2, "--seed", 3, "--out", g)
    texts = []
    for name in ("r1", "r2"):
        base = tmp_path / name
        run(capsys, "analyze", "--graph", g, "--out", base / "a.json")
        run(capsys, "attack", "compromise", "--graph", g, "--top-k", 40, "--length", "2,3",
            "--walks", 5000, "--threads", 2, "--out", base / "c.json")
        man = json.loads((base / "a.manifest.json").read_text())
        man.pop("duration_s")
        man["outputs"] = [p.replace(name, "") for p in man["outputs"]]
        texts.append(((base / "a.json").read_bytes(), (base / "a.csv").read_bytes(),
                      (base / "c.json").read_bytes(), man))
    assert texts[0] == texts[1]


def test_attack_compromise_extremes(tmp_path, capsys):
    g = tmp_path / "g.edges"
    run(capsys, "generate", "--model", "regular", "--nodes", 5000, "--degree", 14, "--out", g)
    run(capsys, "attack", "compromise", "--graph", g, "--top-k", 5000, "--length", 3,
        "--walks", 1000, "--out", tmp_path / "all.json")
    assert json.loads((tmp_path / "all.json").read_text())["compromised_fraction"]["3"] == 1.0
    run(capsys, "attack", "compromise", "--graph", g, "--top-k", 0, "--length", 3,
        "--walks", 1000, "--out", tmp_path / "none.json")
    assert json.loads((tmp_path / "none.json").read_text())["compromised_fraction"]["3"] == 0.0
    code, _, err = run(capsys, "attack", "compromise", "--graph", g, "--top-k", 5001)
    assert code == 2


def test_attack_compromise_nodes_file(toys, capsys):
    nodes = toys / "s.txt"
    nodes.write_text("0\n1\n2\n3\n")
    code, _, _ = run(capsys, "attack", "compromise", "--graph", toys / "k4.edges", "--nodes-file",
                     nodes, "--length", "1,4", "--walks", 100, "--out", toys / "c.json")
    rep = json.loads((toys / "c.json").read_text())
    assert code == 0 and rep["compromised_fraction"] == {"1": 1.0, "4": 1.0}
    assert rep["selection"] == "explicit" and rep["gilbert_bound"]["4"] == 1.0


def test_attack_batch_size(tmp_path, capsys):
    g = tmp_path / "g.edges"
    run(capsys, "generate", "--model", "regular", "--nodes", 5000, "--degree", 14, "--out", g)
    code, out, _ = run(capsys, "attack", "batch-size", "--graph", g, "--f", 5,
                       "--out", tmp_path / "b.json")
    assert code == 0 and "batch_size=4.68" in out
    rep = json.loads((tmp_path / "b.json").read_text())
    assert rep["batch"]["batch_size"] == pytest.approx(4.68)
    assert (tmp_path / "b.csv").read_text().startswith("model,params,mean_degree,p_min,batch_size")


def test_spectral_k4_and_conductance(toys, capsys):
    code, out, _ = run(capsys, "spectral", "--graph", toys / "k4.edges", "--conductance",
                       "--out", toys / "s.json")
    assert code == 0
    rep = json.loads((toys / "s.json").read_text())
    assert rep["lambda2"] == pytest.approx(1 / 3, abs=1e-6)
    assert rep["conductance"]["phi"] == pytest.approx(2 / 3)
    assert rep["conductance"]["bound_holds"] is True


def test_spectral_conductance_too_large(tmp_path, capsys):
    g = tmp_path / "g.edges"
    run(capsys, "generate", "--model", "regular", "--nodes", 30, "--degree", 3, "--out", g)
    code, _, err = run(capsys, "spectral", "--graph", g, "--conductance")
    assert code == 2


def test_spectral_size_sweep(tmp_path, capsys):
    code, out, _ = run(capsys, "spectral", "--model", "ba", "--m", 3, "--size-sweep", "300,600",
                       "--trials", 2, "--out", tmp_path / "sw.json")
    assert code == 0
    rep = json.loads((tmp_path / "sw.json").read_text())
    assert [r["n"] for r in rep["rows"]] == [300, 600]
    assert rep["spread"] == pytest.approx(abs(rep["rows"][0]["mean_lambda2"]
                                              - rep["rows"][1]["mean_lambda2"]))


def test_module_entry_point():
    import subprocess
    import sys
    r = subprocess.run([sys.executable, "-m", "mixtopo", "--version"], capture_output=True,
                       text=True)
    assert r.returncode == 0 and r.stdout.strip()
