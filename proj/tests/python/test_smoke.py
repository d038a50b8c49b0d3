import pytest

import pypod


def test_presets_listed():
    names = pypod.preset_names()
    assert "uneven-0" in names
    assert "byzantine-quarter" in names
    assert "n: 4" in pypod.preset_yaml("uneven-0")


def test_config_errors_are_value_errors():
    with pytest.raises(pypod.ConfigError, match="tau"):
        pypod.normalize_config("n: 4\nm: 4\nf: 0.33\ntau: 0.8\n")
    with pytest.raises(ValueError):
        pypod.normalize_config("n: 4\nm: 4\nbogus: 1\n")


def test_minimal_config_round_trips():
    text = pypod.normalize_config("n: 5\nm: 4\nseed: 3\n")
    assert pypod.normalize_config(text) == text


def test_honest_run_is_deterministic():
    a = pypod.run("preset:uneven-0", seed=7)
    b = pypod.run("preset:uneven-0", seed=7)
    assert a["exit_code"] == 0
    assert a["trace_hash"] == b["trace_hash"]
    assert len(a["metrics"]) == 4
    for m in a["metrics"]:
        assert m["sys_diff"] <= 0.05
        assert abs(sum(m["actual"]) - 1.0) < 1e-9


def test_run_artifacts_and_transcripts(tmp_path):
    r = pypod.run("preset:byzantine-quarter", out=str(tmp_path))
    assert r["exit_code"] == 0
    assert (tmp_path / "metrics.csv").read_text().startswith("epoch,acc,sys_diff")
    assert any(9 in m["forfeited"] for m in r["metrics"])
    violations, _ = pypod.verify_transcripts(str(tmp_path))
    assert violations == 0


def test_helpers():
    assert pypod.uneven_rate([5, 5, 5]) == 0.0
    assert pypod.threshold_count(2 / 3, 16) == 11
    u, v = pypod.split_secret(12345, seed=1)
    assert (u + v) % ((1 << 61) - 1) == 12345
