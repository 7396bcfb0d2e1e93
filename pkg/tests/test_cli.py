import pytest

from posturemon.cli import load_config_text, main
from posturemon.errors import PostureError
from posturemon.sensor_models import MotionScript, Posture
from posturemon.traceio import dumps_script


def write_script(path, rows):
    path.write_text(dumps_script(MotionScript.from_durations(rows)))
    return str(path)


def test_gen_then_detect_upright_is_silent(tmp_path, capsys):
    script = write_script(tmp_path / "s.csv", [(Posture.UPRIGHT, 15_000)])
    trace = str(tmp_path / "t.csv")
    assert main(["gen", "--script", script, "--out", trace, "--noise", "1", "--seed", "3"]) == 0
    assert (tmp_path / "t.truth.csv").read_text() == "start_ms,end_ms\n"
    capsys.readouterr()
    assert main(["detect", "--trace", trace]) == 0
    assert capsys.readouterr().out == "timestamp_ms,kind,angle_deg\n"


def test_full_pipeline_scores_one_slouch(tmp_path, capsys):
    script = write_script(
        tmp_path / "s.csv",
        [(Posture.UPRIGHT, 10_000), (Posture.SLOUCH, 6000, 30.0), (Posture.UPRIGHT, 3000)],
    )
    trace, profile = str(tmp_path / "t.csv"), str(tmp_path / "p.txt")
    events, series = str(tmp_path / "e.csv"), str(tmp_path / "a.csv")
    assert main(["gen", "--script", script, "--out", trace]) == 0
    assert main(["calibrate", "--trace", trace, "--out", profile]) == 0
    assert main(["detect", "--trace", trace, "--profile", profile, "--out", events,
                 "--series-out", series]) == 0  # fmt: skip
    assert "VibrateOn" in open(events).read()
    assert len(open(series).read().splitlines()) == 1 + 1900
    capsys.readouterr()
    truth = str(tmp_path / "t.truth.csv")
    assert main(["eval", "--events", events, "--truth", truth, "--csv"]) == 0
    assert capsys.readouterr().out.splitlines()[1] == "0,1,0,1,1.000000"


def test_eval_counts(capsys):
    assert main(["eval", "--counts", "47", "6", "8", "--positives", "55"]) == 0
    assert "0.8545" in capsys.readouterr().out
    assert main(["eval", "--counts", "47", "6", "8", "--positives", "54"]) == 1


def test_pca_command(tmp_path, capsys):
    script = write_script(
        tmp_path / "s.csv",
        [(Posture.UPRIGHT, 2000), (Posture.SLOUCH, 3000, 30.0), (Posture.BEND, 3000, 25.0)],
    )
    trace = str(tmp_path / "t.csv")
    main(["gen", "--script", script, "--out", trace, "--noise", "1"])
    capsys.readouterr()
    assert main(["pca", "--trace", trace, "--attributes", "Gy,dcm1,dcm3,flex",
                 "--standardize", "--csv", "--top-k", "2"]) == 0  # fmt: skip
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "rank,attribute,score" and len(out) == 5


def test_repro_is_byte_identical(capsys):
    assert main(["repro"]) == 0
    first = capsys.readouterr().out
    assert main(["repro"]) == 0
    assert capsys.readouterr().out == first
    assert "SlouchStart=1 VibrateOn=1 BendStart=1 vibration events during bend=0" in first
    assert "47/55 = 0.854545" in first


def test_exit_codes(tmp_path, capsys):
    assert main(["detect", "--trace", str(tmp_path / "missing.csv")]) == 2
    assert "FileNotFoundError" in capsys.readouterr().err
    bad = tmp_path / "bad.csv"
    bad.write_text("nope\n")
    assert main(["detect", "--trace", str(bad)]) == 1
    assert "MalformedHeader" in capsys.readouterr().err


def test_config_file_and_override(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# scenario\nseed = 4\nrate_hz = 50\n")
    assert main(["repro", "--config", str(cfg)]) == 0
    out = capsys.readouterr().out
    assert "rate 50 Hz, seed 4" in out
    assert main(["repro", "--config", str(cfg), "--seed", "9"]) == 0
    assert "rate 50 Hz, seed 9" in capsys.readouterr().out


def test_config_errors(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("colour = blue\n")
    assert main(["repro", "--config", str(cfg)]) == 1
    assert "UnknownConfigKey" in capsys.readouterr().err
    with pytest.raises(PostureError):
        load_config_text("seed = many\n")
    with pytest.raises(PostureError):
        load_config_text("seed\n")
    assert load_config_text("idle_timeout_ms = none\ndebounce-ms = 2000") == {
        "idle_timeout_ms": None,
        "debounce_ms": 2000,
    }
