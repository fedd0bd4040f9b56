import csv
import math
import subprocess
import sys
import textwrap

import pytest
import yaml

from vlcnoma.cli import EXIT_NO_COVERAGE, EXIT_PARSE, EXIT_VALIDATION, main
from vlcnoma.config import BUNDLED, load_scenario, parse_scenario
from vlcnoma.exceptions import ScenarioParseError, ScenarioValidationError
from vlcnoma.runner import grid_points, load_fixed_assignment

from conftest import PAPER_APS, PAPER_USERS

FAST = textwrap.dedent("""\
    name: fast
    tracing:
      first_order_element: 0.5
      second_order_element: 1.0
    access_points:
      - position: [1.0, 1.0, 3.0]
      - position: [1.0, 3.0, 3.0]
    users:
      - position: [0.5, 0.5, 1.0]
      - position: [0.5, 1.5, 1.0]
      - position: [1.5, 2.5, 1.0]
    """)


@pytest.fixture
def fast_file(tmp_path):
    p = tmp_path / "fast.yaml"
    p.write_text(FAST)
    return p


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_bundled_scenarios_load():
    for name in BUNDLED:
        cfg = load_scenario(name)
        assert [tuple(a.position) for a in cfg.access_points] == PAPER_APS
        assert [tuple(u.position) for u in cfg.users] == PAPER_USERS
        assert cfg.ap_ids == ["AP1", "AP2"] and cfg.user_ids == ["U1", "U2", "U3", "U4"]
    assert load_scenario("paper_calibrated").noma.objective == "sum-rate"


def test_defaults_fill_in():
    cfg = parse_scenario(FAST)
    assert cfg.room.length == 8.0 and cfg.noise.receiver_bandwidth == 1e8
    assert cfg.access_points[0].transmit_power == 1.9
    assert cfg.user_ids == ["U1", "U2", "U3"]


def test_validation_names_field_and_line():
    text = FAST.replace("name: fast", "name: fast\nroom:\n  height: -3")
    with pytest.raises(ScenarioValidationError) as err:
        parse_scenario(text)
    (field, _, line), = err.value.errors
    assert field == "room.height" and line == 3
    assert "room.height" in str(err.value)


def test_unknown_field_rejected():
    with pytest.raises(ScenarioValidationError) as err:
        parse_scenario(FAST + "colour: blue\n")
    assert err.value.errors[0][0] == "colour"
    assert err.value.errors[0][2] == FAST.count("\n") + 1


def test_user_outside_room_and_duplicate_ids():
    with pytest.raises(ScenarioValidationError) as err:
        parse_scenario(FAST.replace("[1.5, 2.5, 1.0]", "[9.5, 2.5, 1.0]"))
    assert err.value.errors[0][0] == "users[2].position"
    dup = FAST.replace("  - position: [1.0, 1.0, 3.0]", "  - id: A\n    position: [1.0, 1.0, 3.0]")
    dup = dup.replace("  - position: [1.0, 3.0, 3.0]", "  - id: A\n    position: [1.0, 3.0, 3.0]")
    with pytest.raises(ScenarioValidationError):
        parse_scenario(dup)


@pytest.mark.parametrize("text", ["", "   \n", "room: [1, 2\n", "- just\n- a list\n"])
def test_parse_errors(text):
    with pytest.raises(ScenarioParseError):
        parse_scenario(text)


def test_yaml_round_trip():
    cfg = load_scenario("paper_scenario")
    again = parse_scenario(cfg.to_yaml())
    assert again == cfg and again.digest() == cfg.digest()


def test_fixed_assignment_file(tmp_path):
    cfg = load_scenario("paper_scenario")
    p = tmp_path / "fixed.yaml"
    p.write_text("U1: AP1\nU2: AP1\nU3: AP2\nU4: AP2\n")
    assert load_fixed_assignment(p, cfg) == (0, 0, 1, 1)
    p.write_text("U1: AP1\nU2: AP9\nU3: AP2\nU4: AP2\nU7: AP1\n")
    with pytest.raises(ScenarioValidationError) as err:
        load_fixed_assignment(p, cfg)
    assert {e[0] for e in err.value.errors} == {"fixed_assignment.U2", "fixed_assignment.U7"}


def test_grid_points_clip_to_room():
    cfg = load_scenario("paper_scenario")
    assert grid_points(cfg, 4.0) == [(2.0, 2.0), (6.0, 2.0)]
    for step in (0.5, 0.7, 3.0):
        pts = grid_points(cfg, step)
        assert len(pts) == math.ceil(8 / step - 1e-9) * math.ceil(4 / step - 1e-9)
        assert all(0 < x < 8 and 0 < y < 4 for x, y in pts)


def test_cli_exit_codes(tmp_path, fast_file, capsys):
    empty = tmp_path / "empty.yaml"
    empty.write_text("")
    assert main(["simulate", str(empty)]) == EXIT_PARSE
    bad = tmp_path / "bad.yaml"
    bad.write_text(FAST + "bogus: 1\n")
    assert main(["simulate", str(bad)]) == EXIT_VALIDATION
    assert "bogus" in capsys.readouterr().err
    assert main(["simulate", str(tmp_path / "missing.yaml")]) == EXIT_PARSE
    with pytest.raises(SystemExit) as err:
        main(["simulate", str(fast_file), "--orders", "5"])
    assert err.value.code == 2


def test_cli_no_coverage(tmp_path):
    # a user under a blacked-out room, facing away from the only AP
    text = textwrap.dedent("""\
        room: {wall_reflectivity: 0, ceiling_reflectivity: 0, floor_reflectivity: 0}
        tracing: {first_order_element: 1.0, second_order_element: 2.0}
        access_points:
          - position: [1.0, 1.0, 3.0]
        users:
          - position: [7.5, 3.5, 1.0]
        receiver:
          adr: {elevation: -70}
        run: {receiver: adr}
        """)
    p = tmp_path / "dark.yaml"
    p.write_text(text)
    assert main(["simulate", str(p), "--out", str(tmp_path / "o")]) == EXIT_NO_COVERAGE


def test_cli_config_prints_resolved_yaml(capsys):
    assert main(["config", "paper_scenario"]) == 0
    data = yaml.safe_load(capsys.readouterr().out)
    assert data["noise"]["dark_current"] == 1e-9 and data["run"]["receiver"] == "compare"


def test_cli_outputs(tmp_path, fast_file):
    out = tmp_path / "out"
    irs = tmp_path / "irs"
    assert main(["simulate", str(fast_file), "--out", str(out), "--dump-ir", str(irs), "--grid", "4"]) == 0
    links = read_csv(out / "links.csv")
    assert [r["receiver"] for r in links] == ["adr"] * 3 + ["wide"] * 3
    assert all(float(r["rate_bps"]) >= 0 for r in links)
    summary = read_csv(out / "summary.csv")
    assert summary[-1]["user"] == "average" and "improvement_pct" in summary[0]
    grid = read_csv(out / "grid.csv")
    assert len(grid) == 4
    manifest = yaml.safe_load((out / "run-manifest.yaml").read_text())
    assert manifest["provenance"]["config_sha256"] == load_scenario(fast_file).digest()
    # 2 APs x 3 users x (4 ADR + 1 wide) branches
    assert len(list(irs.glob("*.csv"))) == 2 * 3 * 5
    assert (irs / "ir_adr_AP1_U1_b0.csv").exists()


def test_grid_point_under_ap_matches_los(tmp_path):
    text = textwrap.dedent("""\
        access_points:
          - position: [2.0, 2.0, 3.0]
        users:
          - position: [1.0, 1.0, 1.0]
        run: {receiver: wide}
        """)
    p = tmp_path / "one.yaml"
    p.write_text(text)
    assert main(["simulate", str(p), "--orders", "0", "--grid", "4", "--out", str(tmp_path / "o")]) == 0
    grid = read_csv(tmp_path / "o" / "grid.csv")
    under = next(r for r in grid if float(r["x"]) == 2.0)
    assert float(under["dc_gain"]) == pytest.approx(2e-5 / (4 * math.pi), rel=1e-12)
    far = next(r for r in grid if float(r["x"]) == 6.0)
    d2, c = 16 + 4, 2 / math.sqrt(20)
    assert float(far["dc_gain"]) == pytest.approx(2e-5 * 2 / (2 * math.pi * d2) * c * c, rel=1e-12)


def test_runs_are_byte_identical(tmp_path, fast_file):
    for name, threads in (("a", "1"), ("b", "1"), ("c", "3")):
        assert main(["simulate", str(fast_file), "--out", str(tmp_path / name), "--threads", threads]) == 0
    for f in ("links.csv", "summary.csv"):
        a = (tmp_path / "a" / f).read_bytes()
        assert a == (tmp_path / "b" / f).read_bytes()
        assert a == (tmp_path / "c" / f).read_bytes()


def test_module_entry_point(fast_file, tmp_path):
    res = subprocess.run([sys.executable, "-m", "vlcnoma", "simulate", str(fast_file), "--receiver", "wide",
                          "--orders", "1", "--out", str(tmp_path / "o")], capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    assert "[wide] assignment" in res.stdout
