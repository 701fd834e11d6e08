import hashlib

import pytest

from csitamper.cli import main
from csitamper.csi import Label, load_dataset
from csitamper.detectors import load_profile

SIM = "sc = 32\npath_delays = 0, 1, 2, 3, 5, 7\n"
FAST = ["--epochs", "4", "--batch-size", "50", "--window", "100"]


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    (d / "room.cfg").write_text(SIM)
    return d


def _sim(d, name, scenario="A", orientation="default", frames=100, seed=0):
    out = d / name
    code = main(["simulate", "--config", str(d / "room.cfg"), "--scenario", scenario,
                 "--orientation", orientation, "--frames", str(frames), "--seed", str(seed), "-o", str(out)])
    assert code == 0
    return out


@pytest.fixture(scope="module")
def trained(workdir):
    off = _sim(workdir, "off.csid", "C", frames=800, seed=7)
    profile = workdir / "room.tprf"
    assert main(["train", str(off), "-o", str(profile), *FAST]) == 0
    return off, profile


def test_simulate_tamper_free_file(tmp_path, capsys):
    out = tmp_path / "off.csid"
    assert main(["simulate", "--scenario", "A", "--orientation", "default", "--frames", "4000",
                 "--seed", "7", "-o", str(out)]) == 0
    ds = load_dataset(out)
    assert len(ds) == 4000 and ds.label is Label.TAMPER_FREE and ds.sc == 200
    assert "4000 frames" in capsys.readouterr().out


def test_simulate_label_byte(tmp_path):
    out = tmp_path / "r3.csid"
    main(["simulate", "--orientation", "r3", "--frames", "5", "-o", str(out)])
    assert out.read_bytes()[14] == 3


def test_simulate_repeatable(workdir):
    a = _sim(workdir, "rep1.csid", "E", frames=50, seed=3)
    b = _sim(workdir, "rep2.csid", "E", frames=50, seed=3)
    assert hashlib.sha256(a.read_bytes()).digest() == hashlib.sha256(b.read_bytes()).digest()


def test_simulate_csv_output(workdir):
    out = _sim(workdir, "small.csv", frames=3)
    assert out.read_text().startswith("sc,label,tag\n32,0,A\n")


@pytest.mark.parametrize("argv", [
    ["simulate", "--scenario", "Q", "-o", "x.csid"],
    ["simulate", "--orientation", "r8", "-o", "x.csid"],
    ["simulate", "--frames", "0", "-o", "x.csid"],
    ["simulate"],
    ["detect", "w.csid", "--method", "4"],
    [],
])
def test_bad_flags_exit_nonzero(argv, tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    try:
        code = main(argv)
    except SystemExit as exc:
        code = exc.code
    assert code == 1
    assert "error" in capsys.readouterr().err


def test_train_writes_profile(trained, capsys):
    _, profile = trained
    assert profile.read_bytes()[:4] == b"TPRF"
    assert load_profile(profile).window_n_on == 100


def test_train_refuses_tampered(workdir, capsys):
    rot = _sim(workdir, "rot_train.csid", orientation="r1", frames=20)
    assert main(["train", str(rot), "-o", str(workdir / "bad.tprf")]) == 1
    assert "tamper-free" in capsys.readouterr().err
    assert not (workdir / "bad.tprf").exists()


def test_train_dcae2_preset(workdir):
    off = _sim(workdir, "off2.csid", frames=100, seed=1)
    out = workdir / "d2.tprf"
    assert main(["train", str(off), "--preset", "dcae2", "--epochs", "1", "--window", "50", "-o", str(out)]) == 0
    assert len(load_profile(out).model.config.layers) == 4


def test_detect_tamper_free_and_rotated(workdir, trained, capsys):
    _, profile = trained
    clean = _sim(workdir, "clean.csid", "D", frames=100, seed=11)
    assert main(["detect", str(clean), "--profile", str(profile)]) == 0
    out = capsys.readouterr().out
    assert "decision: tamper-free" in out and "method: 3" in out
    rot = _sim(workdir, "r5.csid", "D", "r5", frames=100, seed=12)
    assert main(["detect", str(rot), "--profile", str(profile)]) == 2
    assert "decision: tampering" in capsys.readouterr().out


def test_detect_window_too_small(workdir, trained, capsys):
    _, profile = trained
    short = _sim(workdir, "short.csid", "C", frames=40, seed=13)
    assert main(["detect", str(short), "--profile", str(profile)]) == 1
    assert "needs 100" in capsys.readouterr().err


def test_detect_method1_without_profile(workdir, trained, capsys):
    off, _ = trained
    rot = _sim(workdir, "r2.csid", "C", "r2", frames=50, seed=14)
    assert main(["detect", str(rot), "--method", "1", "--offline", str(off), "--threshold", "1e9"]) == 0
    assert main(["detect", str(rot), "--method", "1", "--offline", str(off), "--threshold", "0"]) == 2
    assert main(["detect", str(rot), "--method", "1"]) == 1


def test_detect_method2(workdir, trained):
    off, profile = trained
    rot = _sim(workdir, "r6.csid", "C", "r6", frames=50, seed=15)
    assert main(["detect", str(rot), "--method", "2", "--profile", str(profile), "--offline", str(off),
                 "--threshold", "0", "--window", "30"]) == 2


def test_roc_command(workdir, trained, capsys):
    off, _ = trained
    clean = _sim(workdir, "roc_clean.csid", "D", frames=300, seed=21)
    rot = [_sim(workdir, f"roc_r{r}.csid", "D", f"r{r}", frames=100, seed=30 + r) for r in (1, 4, 7)]
    argv = ["roc", "--train", str(off), "--tamper-free", str(clean), "--tampered", *map(str, rot), *FAST]
    assert main(argv + ["-o", str(workdir / "a.csv"), "--svg", str(workdir / "a.svg")]) == 0
    assert main(argv + ["-o", str(workdir / "b.csv")]) == 0
    lines = (workdir / "a.csv").read_text().splitlines()
    assert lines[0] == "method,auc,tpr_at_fpr0"
    assert [line.split(",")[0] for line in lines[1:]] == ["method1", "method2-dcae1", "method3-dcae1"]
    assert (workdir / "a.csv").read_bytes() == (workdir / "b.csv").read_bytes()
    assert (workdir / "a.svg").stat().st_size > 0


def test_roc_refuses_tampered_training(workdir, capsys):
    rot = _sim(workdir, "roc_bad.csid", "A", "r1", frames=100)
    assert main(["roc", "--train", str(rot), "--tamper-free", str(rot), "--tampered", str(rot),
                 "-o", str(workdir / "x.csv")]) == 1


def test_thread_limit_env(workdir, monkeypatch):
    monkeypatch.setenv("CSI_TAMPER_THREADS", "1")
    assert main(["simulate", "--frames", "2", "-o", str(workdir / "t.csid")]) == 0
    monkeypatch.setenv("CSI_TAMPER_THREADS", "many")
    assert main(["simulate", "--frames", "2", "-o", str(workdir / "t.csid")]) == 1


def test_distinct_paths(workdir, trained):
    off, _ = trained
    assert main(["train", str(off), "-o", str(off)]) == 1
