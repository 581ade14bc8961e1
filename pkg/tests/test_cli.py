import json

import pytest

from parabola_cantor_lab.cli import main


@pytest.fixture(scope="module")
def built(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    assert main(["build", "--alpha", "0.5", "--preset", "factorial", "--depth", "4", "--seed", "1", "--out", str(out)]) == 0
    return out


def test_build_summary(built, capsys):
    d = json.loads((built / "construction.json").read_text())
    assert len(d["levels"][-1]["A_j"]) == 24
    assert {"config_hash", "seed", "tool_version"} <= set(d)


def test_build_depth_zero(tmp_path):
    assert main(["build", "--depth", "0", "--out", str(tmp_path)]) == 0
    d = json.loads((tmp_path / "construction.json").read_text())
    assert [lev["A_j"] for lev in d["levels"]] == [[0]]


def test_bad_alpha_and_usage(tmp_path, capsys):
    assert main(["build", "--alpha", "1.2", "--out", str(tmp_path)]) == 1
    assert "alpha" in capsys.readouterr().err
    with pytest.raises(SystemExit) as e:
        main(["nonsense"])
    assert e.value.code == 1


def test_missing_construction(tmp_path):
    assert main(["ball", "--out", str(tmp_path / "none")]) == 1


def test_config_file_and_env_seed(tmp_path, monkeypatch):
    cfg = tmp_path / "run.toml"
    cfg.write_text('alpha = 0.5\nbases = [2, 3]\n[martingale]\ntrials = 50\n')
    monkeypatch.setenv("PCL_SEED", "9")
    out = tmp_path / "o"
    assert main(["build", "--config", str(cfg), "--out", str(out)]) == 0
    d = json.loads((out / "construction.json").read_text())
    assert d["root_seed"] == 9 and d["plan"]["bases"] == [2, 3]
    bad = tmp_path / "bad.toml"
    bad.write_text("alpha = [\n")
    assert main(["build", "--config", str(bad), "--out", str(out)]) == 1
    unknown = tmp_path / "unknown.toml"
    unknown.write_text("colour = 3\n")
    assert main(["build", "--config", str(unknown), "--out", str(out)]) == 1


def test_studies_and_report(built, capsys):
    before = (built / "construction.json").read_bytes()
    assert main(["ball", "--out", str(built)]) == 0
    assert main(["ball", "--out", str(built), "--level", "0"]) == 0
    line = capsys.readouterr().out.strip().splitlines()[-1]
    assert line.startswith("ball: exponent=1.0000") and line.endswith("PASS")
    assert main(["martingale", "--out", str(built), "--seed", "1"]) == 0
    assert main(["knapp", "--out", str(built), "--seed", "1", "--level", "0"]) == 0
    assert (built / "construction.json").read_bytes() == before
    for name in ("ball", "martingale", "knapp"):
        for ext in ("json", "csv", "dat"):
            text = (built / f"{name}.{ext}").read_text()
            assert "0.1.0" in text
    capsys.readouterr()
    assert main(["report", str(built)]) == 0
    out, err = capsys.readouterr()
    assert "ball-mass" in out and "Knapp" in out
    assert "different configs" in err  # the seed-1 runs differ from the seed-0 ball run


def test_report_single_and_empty(tmp_path, built, capsys):
    one = tmp_path / "one"
    one.mkdir()
    (one / "ball.json").write_text((built / "ball.json").read_text())
    assert main(["report", str(one)]) == 0
    rows = [l for l in capsys.readouterr().out.splitlines() if l.startswith("| ball")]
    assert len(rows) == 1
    empty = tmp_path / "empty"
    empty.mkdir()
    assert main(["report", str(empty)]) == 1


def test_byte_identical_reruns(tmp_path):
    outs = []
    for k, threads in enumerate((1, 4)):
        out = tmp_path / f"r{k}"
        main(["build", "--depth", "3", "--seed", "5", "--out", str(out), "--threads", str(threads)])
        main(["ball", "--out", str(out), "--seed", "5", "--depth", "3"])
        outs.append([(out / f).read_bytes() for f in ("construction.json", "ball.json", "ball.csv", "ball.dat")])
    assert outs[0] == outs[1]
