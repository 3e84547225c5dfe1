"""Command line: config layering, usage errors and the cheap subcommands end to end."""

import json
import shutil
import subprocess
from types import SimpleNamespace

import pytest

from pcr3bp.cli import CONFIG_ENV, ConfigError, RunConfig, build_config, load_config, main


def _args(**kw):
    base = dict(command="prove-orbits", config=None, verbose=False)
    base.update(kw)
    return SimpleNamespace(**base)


def test_defaults():
    cfg = build_config(_args())
    assert cfg == RunConfig()


def test_config_file_then_flags(tmp_path, monkeypatch):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"dt": 0.005, "order": 10, "h": [0.3, "0.5"], "family": "L,S2"}))
    cfg = build_config(_args(config=str(p), order=14))
    assert cfg.dt == 0.005 and cfg.order == 14
    assert cfg.h == ["0.3", "0.5"] and cfg.family == ["L", "S2"]
    # the environment variable is used when --config is absent
    monkeypatch.setenv(CONFIG_ENV, str(p))
    assert build_config(_args()).dt == 0.005
    # and an explicit --config wins over it
    q = tmp_path / "d.json"
    q.write_text(json.dumps({"dt": 0.02}))
    assert build_config(_args(config=str(q))).dt == 0.02


def test_bad_config_files(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"dtt": 1}))
    with pytest.raises(ConfigError, match="unknown config keys"):
        load_config(p)
    p.write_text("{not json")
    with pytest.raises(ConfigError, match="not valid JSON"):
        load_config(p)
    p.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        load_config(p)
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "missing.json")


def test_map_options_follow_config():
    cfg = RunConfig(dt=4e-3, order=8, floor=2e-3)
    o = cfg.map_options()
    assert o.order == 8 and o.policy.dt == 4e-3 and o.policy.min_dt == 5e-4 and o.floor == 2e-3
    assert RunConfig(dt=1e-3).map_options().policy.min_dt == 2.5e-4


@pytest.mark.parametrize("argv,msg", [
    (["prove-orbits", "--family", "Q1"], "unknown family"),
    (["prove-orbits", "--h", "0.35"], "no probe table row"),
    (["prove-orbits", "--h", "0.8", "--family", "U1"], "no probe table cell"),
    (["prove-coverings"], "--claims"),
    (["prove-coverings", "--claims", "K0:H1:Z3"], "unknown t-set"),
    (["prove-coverings", "--claims", "K0:H2:L3"], "do not fit"),
    (["prove-coverings", "--claims", "K0-H1-L3"], "cannot parse"),
    (["prove-coverings", "--claims", "K0:H1:L3", "--h", "0.3,0.5"], "single energy"),
    (["prove-orbits", "--workers", "0"], "at least 1"),
    (["explore", "--series", "spiral"], "unknown series"),
])
def test_usage_errors_exit_2(argv, msg, tmp_path, capsys):
    assert main(argv + ["--out", str(tmp_path)]) == 2
    assert msg in capsys.readouterr().err


def test_missing_subcommand():
    with pytest.raises(SystemExit) as e:
        main([])
    assert e.value.code == 2


def test_entropy_command(tmp_path, capsys):
    assert main(["entropy", "--out", str(tmp_path)]) == 0
    text = (tmp_path / "entropy.txt").read_text()
    assert "assumed" in text and "P^30 positive on N0 N5 K0 K2 K3: yes" in text
    assert "sign p(1.62746) = -" in text and "sign p(1.62747) = +" in text
    assert "ln of the root in [0.48702" in capsys.readouterr().out


def test_entropy_with_edge_files(tmp_path):
    empty = tmp_path / "empty.txt"
    empty.write_text("# nothing\n")
    assert main(["entropy", "--edges", str(empty), "--out", str(tmp_path)]) == 2
    bad = tmp_path / "bad.txt"
    bad.write_text("N0 Z1\n")
    assert main(["entropy", "--edges", str(bad), "--out", str(tmp_path)]) == 2
    # a graph without the K symbols misses the bound: exit 1
    small = tmp_path / "small.txt"
    small.write_text("N0 N0\nN0 N1\nN1 N0\n")
    assert main(["entropy", "--edges", str(small), "--out", str(tmp_path)]) == 1


def test_explore_series(tmp_path, capsys):
    rc = main(["explore", "--series", "f-scan,zvc,tset", "--h", "0.1", "--lo", "0.2", "--hi", "0.4",
               "--n", "20", "--tsets", "K0", "--out", str(tmp_path)])
    assert rc == 0
    out = capsys.readouterr().out
    assert "f-scan h=0.1: 1 root sign changes" in out
    for name in ("f-scan_h0.1.csv", "zvc_h0.1.csv", "tset_K0.csv", "tset_K0_image_h0.1.csv"):
        assert (tmp_path / name).read_text().startswith("# NON-RIGOROUS")


def test_prove_orbits_report_is_reproducible(tmp_path):
    argv = ["prove-orbits", "--h", "0.3", "--family", "S2", "--out", str(tmp_path)]
    assert main(argv) == 0
    first = (tmp_path / "orbits.txt").read_text()
    assert "status=true" in first and "winding=retrograde@P2" in first and "time=" not in first
    assert main(argv) == 0
    assert (tmp_path / "orbits.txt").read_text() == first


@pytest.mark.skipif(shutil.which("pcr3bp") is None, reason="console script not installed")
def test_console_script():
    r = subprocess.run(["pcr3bp", "--help"], capture_output=True, text=True)
    assert r.returncode == 0
    for cmd in ("prove-orbits", "prove-coverings", "entropy", "explore"):
        assert cmd in r.stdout
