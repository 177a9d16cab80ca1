import json

import pytest

from oneshot_qcap.cli import SpecError, parse_spec, run


def write_spec(tmp_path, name, payload):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


IDENTITY_CHANNEL = {"schema": "1", "type": "channel", "name": "identity",
                    "dims": 2, "labels": {"in": "A", "out": "B"}}
BELL_STATE = {"schema": "1", "type": "state", "name": "bell",
              "dims": [["A", 2], ["B'", 2]]}
CORR_STATE = {"schema": "1", "type": "state", "name": "classically_correlated",
              "dims": [["A", 2], ["U", 2]], "classical": ["U"]}


# ---------------------------------------------------------------------------
# spec parsing


def test_parse_builtin_channel(tmp_path):
    ch = parse_spec(IDENTITY_CHANNEL)
    assert ch.in_layout.labels == ("A",)
    assert ch.out_layout.labels == ("B",)


def test_parse_state_spec():
    rho = parse_spec(BELL_STATE)
    assert rho.layout.labels == ("A", "B'")


def test_parse_rejects_wrong_schema():
    with pytest.raises(SpecError):
        parse_spec(dict(IDENTITY_CHANNEL, schema="2"))


def test_invalid_json_file_is_exit_one(tmp_path, capsys):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    code = run(["divergence", "dmax", "--rho", str(path),
                "--sigma", str(path)])
    capsys.readouterr()
    assert code == 1


def test_parse_rejects_non_cptp_kraus():
    bad = {"schema": "1", "type": "channel",
           "kraus": [[[0.9, 0.0], [0.0, 0.9]]],
           "in_dims": [["A", 2]], "out_dims": [["B", 2]]}
    with pytest.raises(SpecError):
        parse_spec(bad)


def test_parse_rejects_unnormalized_ket():
    bad = {"schema": "1", "type": "state", "ket": [1.0, 1.0],
           "dims": [["A", 2]]}
    with pytest.raises(SpecError):
        parse_spec(bad)


def test_parse_rejects_nonclassical_label():
    bad = dict(BELL_STATE, classical=["B'"])
    with pytest.raises(SpecError):
        parse_spec(bad)


# ---------------------------------------------------------------------------
# subcommands and exit codes


def test_divergence_command(tmp_path, capsys):
    bell = write_spec(tmp_path, "bell.json", BELL_STATE)
    mixed = write_spec(tmp_path, "mixed.json", {
        "schema": "1", "type": "state", "name": "maximally_mixed",
        "dims": [["A", 2], ["B'", 2]]})
    code = run(["divergence", "dmax", "--rho", bell, "--sigma", mixed])
    assert code == 0
    out = json.loads(capsys.readouterr().out)
    assert out["result"]["value"] == pytest.approx(2.0, abs=1e-10)


def test_bound_identity_corollary(capsys):
    code = run(["bound", "identity-corollary", "--dimA", "2", "--eps", "0.0"])
    assert code == 0
    out = json.loads(capsys.readouterr().out)
    assert out["result"]["ceiling"] == pytest.approx(2.0, abs=1e-12)


def test_simulate_exit_zero_and_report(tmp_path, capsys):
    ch = write_spec(tmp_path, "ch.json", IDENTITY_CHANNEL)
    st = write_spec(tmp_path, "st.json", BELL_STATE)
    code = run(["simulate", "p2p_ea", "--channel", ch, "--state", st,
                "--R", "1", "--eps", "0.1", "--delta", "0.05",
                "--floor-sigmas", "2"])
    assert code == 0
    out = json.loads(capsys.readouterr().out)
    assert out["report"]["bound_satisfied"] is True
    assert all(f["holds"] for f in out["report"]["floors"])
    assert out["report"]["worst_error"] == pytest.approx(0.06698729810778126, abs=1e-9)


def test_simulate_writes_output_file(tmp_path, capsys):
    ch = write_spec(tmp_path, "ch.json", IDENTITY_CHANNEL)
    st = write_spec(tmp_path, "st.json", BELL_STATE)
    out_path = tmp_path / "report.json"
    code = run(["simulate", "p2p_ea", "--channel", ch, "--state", st,
                "--R", "1", "--eps", "0.1", "--delta", "0.05",
                "--floor-sigmas", "2", "--output", str(out_path)])
    capsys.readouterr()
    assert code == 0
    assert json.loads(out_path.read_text())["scenario"] == "p2p_ea"


def test_missing_spec_file_is_exit_one(capsys):
    code = run(["divergence", "dmax", "--rho", "/nonexistent.json",
                "--sigma", "/nonexistent.json"])
    capsys.readouterr()
    assert code == 1


def test_bad_spec_is_exit_one(tmp_path, capsys):
    bad = write_spec(tmp_path, "bad.json", {"schema": "1", "type": "soup"})
    ch = write_spec(tmp_path, "ch.json", IDENTITY_CHANNEL)
    code = run(["simulate", "p2p_ea", "--channel", ch, "--state", bad,
                "--R", "1", "--eps", "0.1", "--delta", "0.05"])
    capsys.readouterr()
    assert code == 1


def test_verify_exit_codes(capsys):
    code = run(["verify", "--facts", "triangle,neumark", "--trials", "2",
                "--dims", "2"])
    assert code == 0
    out = json.loads(capsys.readouterr().out)
    assert out["result"]["holds"] is True

    code = run(["verify", "--facts", "not_a_check", "--trials", "1"])
    capsys.readouterr()
    assert code == 1


def test_sweep_writes_csv(tmp_path, capsys):
    ch = write_spec(tmp_path, "ch.json", IDENTITY_CHANNEL)
    st = write_spec(tmp_path, "st.json", BELL_STATE)
    csv_path = tmp_path / "sweep.csv"
    code = run(["sweep", "p2p_ea", "--channel", ch, "--state", st,
                "--R", "1;2", "--eps", "0.1", "--delta", "0.05",
                "--floor-sigmas", "2", "--output", str(csv_path)])
    capsys.readouterr()
    assert code == 0
    lines = csv_path.read_text().strip().splitlines()
    assert len(lines) == 3  # header + two grid points
    header = lines[0].split(",")
    assert "worst_error" in header and "bound_satisfied" in header


def test_cli_output_is_deterministic(tmp_path, capsys):
    ch = write_spec(tmp_path, "ch.json", IDENTITY_CHANNEL)
    st = write_spec(tmp_path, "st.json", BELL_STATE)
    args = ["simulate", "p2p_ea", "--channel", ch, "--state", st,
            "--R", "1", "--eps", "0.1", "--delta", "0.05",
            "--floor-sigmas", "2"]
    assert run(args) == 0
    first = capsys.readouterr().out
    assert run(args) == 0
    second = capsys.readouterr().out
    assert first == second
