import json
import math

import pytest

from bellsim.cli import main
from bellsim.config import (
    ConfigError,
    parse_angles,
    parse_config_file,
    resolve_model,
    resolve_seed,
    sign_pattern_from_string,
    sign_pattern_to_string,
)


class TestConfigHelpers:
    def test_parse_config_file(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text(
            "# experiment\n"
            'model = {"kind": "quantum", "state": "psi_minus", "angles": [0, 1.5707963267948966, 0.7853981633974483, 2.356194490192345]}\n'
            "trials = 50000\n"
            "seed = 7\n"
            'pattern = "+-++"\n'
            "\n"
        )
        values = parse_config_file(str(path))
        assert values["trials"] == 50000
        assert values["model"]["kind"] == "quantum"

    def test_parse_config_rejects_bad_lines(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("trials 50000\n")
        with pytest.raises(ConfigError, match="key = value"):
            parse_config_file(str(path))
        path.write_text("trials = not-json\n")
        with pytest.raises(ConfigError, match="not valid JSON"):
            parse_config_file(str(path))

    def test_missing_config_file(self):
        with pytest.raises(ConfigError):
            parse_config_file("/nonexistent/run.cfg")

    def test_sign_pattern_strings(self):
        assert sign_pattern_from_string("+-++") == (1, -1, 1, 1)
        assert sign_pattern_to_string((1, 1, 1, -1)) == "+++-"
        with pytest.raises(ConfigError):
            sign_pattern_from_string("+--+")
        with pytest.raises(ConfigError):
            sign_pattern_from_string("+x++")

    def test_parse_angles(self):
        assert parse_angles("0,1.5,0.7,2.3") == (0.0, 1.5, 0.7, 2.3)
        assert parse_angles([0, 1, 2, 3]) == (0.0, 1.0, 2.0, 3.0)
        with pytest.raises(ConfigError):
            parse_angles("0,1")
        with pytest.raises(ConfigError):
            parse_angles("0,1,2,x")

    def test_resolve_model_names(self):
        assert resolve_model("quantum-optimal").kind == "quantum"
        assert resolve_model("pr-box").kind == "superdeterministic"
        assert resolve_model("quantum", state="psi_plus").state == "psi_plus"
        custom = resolve_model('{"kind": "lhv_deterministic", "strategy": 3}')
        assert custom.kind == "lhv_deterministic"
        with pytest.raises(ConfigError, match="unknown model"):
            resolve_model("not-a-model")
        with pytest.raises(ConfigError):
            resolve_model("lhv-uniform", angles=(0.0, 1.0, 2.0, 3.0))

    def test_resolve_seed_precedence(self, monkeypatch):
        monkeypatch.delenv("BELLSIM_SEED", raising=False)
        assert resolve_seed(5, 9) == 5
        assert resolve_seed(None, 9) == 9
        assert resolve_seed(None, None) == 0
        monkeypatch.setenv("BELLSIM_SEED", "77")
        assert resolve_seed(None, None) == 77
        monkeypatch.setenv("BELLSIM_SEED", "x")
        with pytest.raises(ConfigError):
            resolve_seed(None, None)


def _run(args, capsys):
    code = main(args)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestChshCommand:
    def test_json_schema(self, tmp_path, capsys):
        out = tmp_path / "result.json"
        code, stdout, stderr = _run(
            ["chsh", "--trials", "20000", "--seed", "42", "--out", str(out)], capsys
        )
        assert code == 0
        assert "runtime_ms=" in stderr
        document = json.loads(out.read_text())
        assert set(document) == {"schema_version", "config", "results"}
        assert document["schema_version"] == 1
        assert document["config"]["seed"] == 42
        results = document["results"]
        assert len(results["pairs"]) == 4
        assert abs(results["s_value"]) > 2.0
        assert results["bound_class"] == "quantum"

    def test_exact_mode(self, capsys):
        code, stdout, _ = _run(["chsh", "--exact"], capsys)
        assert code == 0
        results = json.loads(stdout)["results"]
        assert results["exact"] is True
        assert abs(results["s_value"]) == pytest.approx(2.0 * math.sqrt(2.0), abs=1e-9)

    def test_csv_output(self, capsys):
        code, stdout, _ = _run(
            ["chsh", "--trials", "10000", "--seed", "1", "--format", "csv"], capsys
        )
        assert code == 0
        lines = stdout.strip().split("\n")
        assert lines[0].startswith("section,left,right")
        assert len(lines) == 6  # header + 4 pairs + s row
        assert lines[-1].startswith("s_statistic")

    def test_invalid_trials_is_config_error(self, tmp_path, capsys):
        out = tmp_path / "never.json"
        code, _, stderr = _run(["chsh", "--trials", "0", "--out", str(out)], capsys)
        assert code == 2
        assert "configuration error" in stderr
        assert not out.exists()

    def test_unwritable_out_is_io_error(self, capsys):
        code, _, stderr = _run(
            ["chsh", "--trials", "10000", "--out", "/nonexistent-dir/x.json"], capsys
        )
        assert code == 3
        assert "I/O error" in stderr

    def test_byte_identical_across_runs_and_threads(self, tmp_path, capsys):
        paths = [tmp_path / name for name in ("a.json", "b.json", "c.json")]
        base = ["chsh", "--model", "quantum-optimal", "--trials", "150000", "--seed", "9"]
        assert main(base + ["--out", str(paths[0]), "--threads", "1"]) == 0
        assert main(base + ["--out", str(paths[1]), "--threads", "1"]) == 0
        assert main(base + ["--out", str(paths[2]), "--threads", "8"]) == 0
        capsys.readouterr()
        blobs = [p.read_bytes() for p in paths]
        assert blobs[0] == blobs[1] == blobs[2]

    def test_config_file_with_flag_precedence(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text('trials = 5000\nseed = 11\nmodel = "lhv-uniform"\n')
        code, stdout, _ = _run(["chsh", "--config", str(cfg), "--trials", "2500"], capsys)
        assert code == 0
        document = json.loads(stdout)
        assert document["config"]["trials_per_pair"] == 2500  # flag wins
        assert document["config"]["seed"] == 11
        assert document["config"]["model"]["kind"] == "lhv_stochastic"

    def test_env_seed_fallback(self, capsys, monkeypatch):
        monkeypatch.setenv("BELLSIM_SEED", "1234")
        code, stdout, _ = _run(["chsh", "--trials", "10000"], capsys)
        assert code == 0
        assert json.loads(stdout)["config"]["seed"] == 1234


class TestLhvScanCommand:
    def test_sixteen_rows_plus_summary(self, capsys):
        code, stdout, _ = _run(["lhv-scan", "--format", "csv"], capsys)
        assert code == 0
        lines = stdout.strip().split("\n")
        assert len(lines) == 18  # header + 16 strategies + max row
        assert lines[-1].split(",")[0] == "max"
        assert float(lines[-1].split(",")[-1]) == 2.0

    def test_json_summary_and_row_values(self, capsys):
        code, stdout, _ = _run(["lhv-scan"], capsys)
        assert code == 0
        results = json.loads(stdout)["results"]
        assert results["max_abs_s"] == 2.0
        assert len(results["strategies"]) == 16
        assert all(row["best_abs_s"] in (0.0, 2.0) for row in results["strategies"])


class TestOptimizeCommand:
    def test_singlet(self, capsys):
        code, stdout, _ = _run(["optimize", "--state", "psi_minus"], capsys)
        assert code == 0
        results = json.loads(stdout)["results"]
        assert results["abs_s"] == pytest.approx(2.0 * math.sqrt(2.0), abs=1e-6)
        assert results["converged"] is True

    def test_psi_plus(self, capsys):
        code, stdout, _ = _run(["optimize", "--state", "psi_plus"], capsys)
        assert code == 0
        results = json.loads(stdout)["results"]
        assert results["abs_s"] == pytest.approx(2.0 * math.sqrt(2.0), abs=1e-6)

    def test_separable_state(self, capsys):
        code, stdout, _ = _run(["optimize", "--state", "up_up"], capsys)
        assert code == 0
        results = json.loads(stdout)["results"]
        assert results["abs_s"] <= 2.0 + 1e-9

    def test_bad_grid(self, capsys):
        code, _, stderr = _run(["optimize", "--grid", "2"], capsys)
        assert code == 2


class TestCounterfactualCommand:
    @pytest.mark.parametrize(
        "model,expected",
        [
            ("lhv-uniform", "definite"),
            ("quantum-optimal", "semi-definite"),
            ("pr-box", "indefinite"),
        ],
    )
    def test_classifications(self, model, expected, tmp_path, capsys):
        ledger = tmp_path / "ledger.jsonl"
        code, stdout, _ = _run(
            [
                "counterfactual",
                "--model",
                model,
                "--trials",
                "24",
                "--stats-trials",
                "20000",
                "--seed",
                "5",
                "--ledger",
                str(ledger),
            ],
            capsys,
        )
        assert code == 0
        document = json.loads(stdout)
        assert document["results"]["classification"] == expected
        lines = ledger.read_text().strip().split("\n")
        assert len(lines) == 24
        record = json.loads(lines[0])
        assert set(record) == {"index", "settings", "outcomes", "hidden", "stream_id"}


class TestBombCommand:
    def test_exact_canonical_values(self, capsys):
        code, stdout, _ = _run(["bomb", "--exact"], capsys)
        assert code == 0
        probs = json.loads(stdout)["results"]["interferometry"]["probabilities"]
        assert probs["exploded"] == pytest.approx(0.5, abs=1e-12)
        assert probs["dark_port"] == pytest.approx(0.25, abs=1e-12)
        assert probs["bright_port"] == pytest.approx(0.25, abs=1e-12)

    def test_no_bomb_dark_port_zero(self, capsys):
        code, stdout, _ = _run(["bomb", "--no-bomb", "--exact"], capsys)
        assert code == 0
        probs = json.loads(stdout)["results"]["interferometry"]["probabilities"]
        assert probs["dark_port"] == pytest.approx(0.0, abs=1e-12)

    def test_seeded_trials_byte_identical(self, tmp_path, capsys):
        out_a, out_b = tmp_path / "a.json", tmp_path / "b.json"
        base = ["bomb", "--trials", "50000", "--seed", "3"]
        assert main(base + ["--out", str(out_a)]) == 0
        assert main(base + ["--out", str(out_b)]) == 0
        capsys.readouterr()
        assert out_a.read_bytes() == out_b.read_bytes()

    def test_csv_format(self, capsys):
        code, stdout, _ = _run(["bomb", "--trials", "20000", "--format", "csv"], capsys)
        assert code == 0
        lines = stdout.strip().split("\n")
        assert lines[0] == "outcome,probability,frequency"
        assert len(lines) == 4

    def test_bad_reflectivity(self, capsys):
        code, _, _ = _run(["bomb", "--reflectivity", "1.2"], capsys)
        assert code == 2


class TestLandscapeCommand:
    def test_csv_grid(self, capsys):
        code, stdout, _ = _run(["landscape", "--resolution", "8"], capsys)
        assert code == 0
        lines = stdout.strip().split("\n")
        assert len(lines) == 9
        assert lines[0].startswith("b\\b'")
        values = [float(v) for v in lines[1].split(",")[1:]]
        assert all(abs(v) <= 2.0 * math.sqrt(2.0) + 1e-9 for v in values)

    def test_json_grid(self, capsys):
        code, stdout, _ = _run(
            ["landscape", "--resolution", "4", "--format", "json", "--fixed", "b=0.5,b'=1.0"],
            capsys,
        )
        assert code == 0
        results = json.loads(stdout)["results"]
        assert results["row_label"] == "a"
        assert results["col_label"] == "a'"
        assert len(results["values"]) == 4

    def test_bad_fixed(self, capsys):
        code, _, _ = _run(["landscape", "--fixed", "a=0"], capsys)
        assert code == 2
