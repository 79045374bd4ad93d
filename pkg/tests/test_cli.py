import math

import numpy as np
import pytest

from eharvest.cli import EXIT_CONFIG, EXIT_GUARD, EXIT_OK, EXIT_VERIFY, main
from eharvest.config import ConfigError, parse_config, preset, to_text

HAND = """\
mode = "single-binary"
horizon = 2
battery = 2
arrival.p = 0.5
channel.support = [1.718281828459045]
channel.probs = [1.0]
paths = 20000
seed = 3
"""

TWO = """\
mode = "two-node"
horizons = [1, 2, 3]
battery = 2
node1.arrival.p = 0.5
node2.arrival.p = 0.3
node1.channel.support = [0.5, 2.0]
node1.channel.probs = [0.5, 0.5]
node2.channel.family = "exponential"
node2.channel.rate = 2.0
node2.channel.levels = 3
paths = 300
seed = 1
"""


def _write(tmp_path, text, name="c.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_parse_hand_config():
    cfg = parse_config(HAND)
    spec = cfg.spec()
    assert (spec.horizon, spec.battery, spec.arrivals.probs) == (2, 2, (0.5, 0.5, 0.0))
    assert spec.channel.gains == (math.e - 1,)


@pytest.mark.parametrize("text", [HAND, TWO, HAND.replace("arrival.p = 0.5", "arrival.uniform = true")
                                  .replace("single-binary", "single-discrete")])
def test_config_round_trip(text):
    cfg = parse_config(text)
    again = parse_config(to_text(cfg))
    assert again == cfg
    assert again.spec() == cfg.spec()


@pytest.mark.parametrize("name", ["fig1", "fig2"])
def test_presets_round_trip(name):
    for cfg in preset(name):
        assert parse_config(to_text(cfg)) == cfg


def test_two_node_fallback_to_shared_sections():
    text = TWO.replace("node2.arrival.p = 0.3\n", "").replace("node1.arrival.p", "arrival.p")
    cfg = parse_config(text)
    assert cfg.arrivals[0].p == cfg.arrivals[1].p == 0.5


@pytest.mark.parametrize("edit,field", [
    (("arrival.p = 0.5", "arrival.probs = [0.5, 0.3, 0.1]"), "arrival probabilities sum"),
    (("horizon = 2", "horizons = [3, 2]"), "horizons"),
    (("battery = 2", "battery = 0"), "battery"),
    (("mode = \"single-binary\"", "mode = \"triple\""), "mode"),
    (("seed = 3", "seed = 3\nbogus.key = 1"), "bogus.key"),
    (("channel.probs = [1.0]", "channel.probs = [0.9]"), "channel probabilities sum"),
])
def test_config_errors_name_field(edit, field):
    with pytest.raises(ConfigError) as err:
        parse_config(HAND.replace(*edit))
    assert any(field in p for p in err.value.problems)


def test_solve_prints_value(tmp_path, capsys):
    out = tmp_path / "g.csv"
    assert main(["solve", "--config", str(_write(tmp_path, HAND)), "--out", str(out)]) == EXIT_OK
    assert float(capsys.readouterr().out) == pytest.approx(1.0, abs=1e-12)
    assert out.read_text().startswith("slot,energy,gamma\n1,0,1\n1,1,1.75\n")


def test_solve_zero_rate(tmp_path, capsys):
    assert main(["solve", "--config", str(_write(tmp_path, HAND.replace("0.5", "0.0")))]) == EXIT_OK
    assert float(capsys.readouterr().out) == 0.0


def test_solve_two_node(tmp_path, capsys):
    cfg = _write(tmp_path, TWO.replace("horizons = [1, 2, 3]", "horizon = 3"))
    assert main(["solve", "--config", str(cfg), "--out", str(tmp_path / "t.csv")]) == EXIT_OK
    assert (tmp_path / "t.csv").read_text().startswith("slot,energy1,energy2,gamma\n")
    assert float(capsys.readouterr().out) > 0


def test_malformed_config_exit_code(tmp_path, capsys):
    bad = _write(tmp_path, HAND.replace("arrival.p = 0.5", "arrival.probs = [0.5, 0.3, 0.1]"))
    assert main(["solve", "--config", str(bad)]) == EXIT_CONFIG
    assert "arrival probabilities sum" in capsys.readouterr().err
    assert main(["solve", "--config", str(tmp_path / "missing.toml")]) == EXIT_CONFIG
    assert main(["solve", "--config", str(_write(tmp_path, "mode = ", "broken.toml"))]) == EXIT_CONFIG


def test_simulate_appends_rows(tmp_path, capsys):
    cfg = _write(tmp_path, HAND)
    out = tmp_path / "sim.csv"
    assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    lines = out.read_text().splitlines()
    assert lines[0] == "mode,horizon,battery,policy,mean,stderr,paths,seed"
    assert len(lines) == 3 and lines[1] == lines[2]
    mean, se = float(lines[1].split(",")[4]), float(lines[1].split(",")[5])
    assert abs(mean - 1.0) <= 3 * se


def test_simulate_deterministic_spec_zero_stderr(tmp_path, capsys):
    text = HAND.replace("arrival.p = 0.5", "arrival.p = 1.0").replace("paths = 20000", "paths = 50")
    assert main(["simulate", "--config", str(_write(tmp_path, text))]) == EXIT_OK
    row = capsys.readouterr().out.splitlines()[1].split(",")
    assert float(row[5]) == 0.0 and float(row[4]) == pytest.approx(2.0)


def test_single_element_sweep_matches_simulate(tmp_path):
    sweep_cfg = _write(tmp_path, HAND.replace("horizon = 2", "horizons = [2]").replace("20000", "500"), "s.toml")
    sim_cfg = _write(tmp_path, HAND.replace("20000", "500"), "m.toml")
    main(["sweep", "--config", str(sweep_cfg), "--out", str(tmp_path / "a.csv")])
    main(["simulate", "--config", str(sim_cfg), "--out", str(tmp_path / "b.csv")])
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_compare_two_node(tmp_path):
    out = tmp_path / "cmp.csv"
    assert main(["compare", "--config", str(_write(tmp_path, TWO)), "--out", str(out)]) == EXIT_OK
    lines = out.read_text().splitlines()
    assert lines[0].startswith("horizon,battery,mean_o,mean_s,diff,diff_stderr")
    assert len(lines) == 4
    assert main(["compare", "--config", str(_write(tmp_path, HAND, "h.toml"))]) == EXIT_CONFIG


def test_verify_pass(tmp_path, capsys):
    assert main(["verify", "--config", str(_write(tmp_path, HAND))]) == EXIT_OK
    out = capsys.readouterr().out
    assert "PASS enumeration" in out and out.strip().endswith("verify: PASS")


def test_verify_guard(tmp_path, capsys):
    assert main(["verify", "--config", str(_write(tmp_path, TWO)), "--guard", "10"]) == EXIT_GUARD
    out = capsys.readouterr().out
    assert "skipped enumeration (guard)" in out and "PASS solver vs value iteration" in out


def test_verify_corrupted_table(tmp_path, capsys):
    cfg = _write(tmp_path, HAND)
    table = tmp_path / "g.csv"
    main(["solve", "--config", str(cfg), "--out", str(table)])
    assert main(["verify", "--config", str(cfg), "--table", str(table)]) == EXIT_OK
    table.write_text(table.read_text().replace("2,1,1\n", "2,1,1.5\n"))
    capsys.readouterr()
    assert main(["verify", "--config", str(cfg), "--table", str(table)]) == EXIT_VERIFY
    assert "first mismatch at slot 2, energy 1" in capsys.readouterr().out


def test_quantize(tmp_path, capsys):
    text = HAND.replace("channel.support = [1.718281828459045]\nchannel.probs = [1.0]",
                        'channel.family = "uniform"\nchannel.low = 0.0\nchannel.high = 1.0\nchannel.levels = 2')
    assert main(["quantize", "--config", str(_write(tmp_path, text))]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "gain,probability"
    assert [float(x) for x in lines[1].split(",")] == pytest.approx([0.25, 0.5])
    assert [float(x) for x in lines[2].split(",")] == pytest.approx([0.75, 0.5])


def test_missing_source(capsys):
    assert main(["solve"]) == EXIT_CONFIG
