import csv
import io
import sys

import pytest
from loguru import logger

from config.model_file import load_model
from config.settings import settings
from core.errors import RunSpecError
from core.models import CheckOutcome, ValidationReport
from core.stationary import psi_stationary
from ui.cli import RunSpec, build_parser, main, run, to_run_spec
from ui.report import Section, fmt, render
from tests.fixtures import reference_values as ref


@pytest.fixture(autouse=True)
def restore_logger():
    yield
    logger.remove()
    logger.add(sys.__stderr__, level="WARNING")


def invoke(capsys, *argv):
    code = main([*argv, "--log-level", "ERROR"])
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def csv_blocks(text):
    """Split CSV output into blocks of rows, one per section."""
    blocks, current = [], []
    for row in csv.reader(io.StringIO(text)):
        if not row:
            blocks.append(current)
            current = []
        else:
            current.append(row)
    if current:
        blocks.append(current)
    return blocks


@pytest.mark.unit
class TestRunSpec:

    def test_parser_defaults(self, fixture_model_path):
        args = build_parser().parse_args(["classify", "--model", str(fixture_model_path("mm1.json"))])
        spec = to_run_spec(args)
        assert spec.trunc == 200
        assert spec.format == "table"
        assert spec.horizon_kind == "events"

    def test_out_of_range_option(self, fixture_model_path):
        args = build_parser().parse_args(["compare", "--model", "m.json", "--trunc", "1"])
        with pytest.raises(RunSpecError, match="--trunc"):
            to_run_spec(args)

    def test_negative_seed(self):
        args = build_parser().parse_args(["simulate", "--model", "m.json", "--seed", "-3"])
        with pytest.raises(RunSpecError, match="--seed"):
            to_run_spec(args)

    def test_unknown_command_exits_2(self):
        with pytest.raises(SystemExit) as exc_info:
            build_parser().parse_args(["solve", "--model", "m.json"])
        assert exc_info.value.code == 2


@pytest.mark.unit
class TestReportFormatting:

    def test_floats_keep_full_precision(self):
        x = 0.1 + 0.2
        assert float(fmt(x)) == x

    def test_bools_are_lowercase(self):
        assert fmt(True) == "true"

    def test_csv_blocks_are_separated(self):
        text = render([Section("a", ["x"], [[1]]), Section("b", ["y"], [[2.5]])], "csv")
        assert text == "x\n1\n\ny\n2.5\n"

    def test_table_has_title_and_rule(self):
        text = render([Section("Result", ["k", "value"], [[0, 0.25]])], "table")
        lines = text.splitlines()
        assert lines[0] == "Result"
        assert lines[1] == "======"
        assert "0.25" in lines[4]


@pytest.mark.integration
class TestCommands:

    def test_classify(self, capsys, fixture_model_path):
        code, out, _ = invoke(capsys, "classify", "--model", str(fixture_model_path("mm1.json")))
        assert code == 0
        assert "positive_recurrent" in out

    def test_classify_symmetric_is_not_refused(self, capsys, fixture_model_path):
        code, out, _ = invoke(capsys, "classify", "--model", str(fixture_model_path("symmetric.json")),
                              "--n-max", "300")
        assert code == 0
        assert "inconclusive" in out

    def test_stationary_refused(self, capsys, fixture_model_path):
        code, out, err = invoke(capsys, "stationary", "--model", str(fixture_model_path("symmetric.json")))
        assert code == 1
        assert out == ""
        assert "error:" in err

    def test_stationary_csv_round_trip(self, capsys, fixture_model_path):
        path = fixture_model_path("r2_411.json")
        code, out, _ = invoke(capsys, "stationary", "--model", str(path), "--kmax", "3", "--format", "csv")
        assert code == 0
        summary, table = csv_blocks(out)
        assert table[0] == ["k", "psi", "pi"]
        psi = [float(row[1]) for row in table[1:]]
        assert psi == pytest.approx(ref.R2_PSI, rel=1e-12)

        exact = psi_stationary(load_model(path), kmax=3)
        assert psi == exact.psi

    def test_compare_csv(self, capsys, fixture_model_path):
        code, out, _ = invoke(capsys, "compare", "--model", str(fixture_model_path("r2_411.json")),
                              "--trunc", "200", "--kmax", "10", "--format", "csv")
        assert code == 0
        rows, summary = csv_blocks(out)
        assert rows[0] == ["k", "psi_formula", "psi_oracle", "abs_diff"]
        assert len(rows) == 12
        assert float(summary[1][1]) <= 1e-8

    def test_compare_study(self, capsys, fixture_model_path):
        code, out, _ = invoke(capsys, "compare", "--model", str(fixture_model_path("mm1.json")),
                              "--trunc", "25", "--kmax", "10", "--study", "--format", "csv")
        assert code == 0
        (block,) = csv_blocks(out)
        assert [int(row[0]) for row in block[1:]] == [25, 50, 100, 200]

    def test_simulate_is_deterministic_across_workers(self, capsys, fixture_model_path):
        model = str(fixture_model_path("r2_411.json"))
        outputs = []
        for workers in ("1", "2", "8"):
            code, out, _ = invoke(capsys, "simulate", "--model", model, "--seed", "42", "--excursions", "600",
                                  "--horizon", "2000", "--workers", workers, "--format", "csv")
            assert code == 0
            outputs.append(out)
        assert outputs[0] == outputs[1] == outputs[2]

    def test_simulate_refused_when_excursion_overruns(self, capsys, monkeypatch, fixture_model_path):
        monkeypatch.setattr(settings, "STEP_GUARD", 20)
        code, _, err = invoke(capsys, "simulate", "--model", str(fixture_model_path("symmetric.json")),
                              "--excursions", "500", "--horizon", "100")
        assert code == 1
        assert "did not return" in err

    def test_out_file(self, capsys, fixture_model_path, temp_workspace):
        target = temp_workspace / "report.csv"
        code, out, _ = invoke(capsys, "classify", "--model", str(fixture_model_path("r2_411.json")),
                              "--format", "csv", "--out", str(target))
        assert code == 0
        assert out == ""
        assert target.read_text(encoding="utf-8").startswith("quantity,value\nverdict,positive_recurrent\n")
        rows = dict(row for row in csv.reader(io.StringIO(target.read_text(encoding="utf-8"))) if len(row) == 2)
        assert float(rows["rho_tail_lower"]) <= float(rows["rho_tail"]) <= float(rows["rho_tail_upper"])

    def test_validate_passes(self, capsys, fixture_model_path):
        code, out, _ = invoke(capsys, "validate", "--model", str(fixture_model_path("r2_411.json")),
                              "--excursions", "2000", "--format", "csv")
        assert code == 0
        (block,) = csv_blocks(out)
        assert block[0] == ["check", "passed", "skipped", "detail"]
        assert all(row[1] == "true" for row in block[1:])


@pytest.mark.integration
class TestInputErrors:

    def test_missing_file(self, capsys, temp_workspace):
        code, _, err = invoke(capsys, "classify", "--model", str(temp_workspace / "nope.json"))
        assert code == 2
        assert "not found" in err

    def test_malformed_file(self, capsys, fixture_model_path):
        code, _, err = invoke(capsys, "classify", "--model", str(fixture_model_path("malformed.json")))
        assert code == 2
        assert "line 4" in err

    def test_schema_error_names_field(self, capsys, fixture_model_path):
        code, _, err = invoke(capsys, "classify", "--model", str(fixture_model_path("negative_rate.json")))
        assert code == 2
        assert "prefix[1].mu" in err

    def test_invalid_utf8(self, capsys, temp_workspace):
        path = temp_workspace / "latin1.json"
        path.write_bytes(b'{"R": 1,\n "prefix": [[0, 1], [2, 1]], "name": "\xff"}')
        code, out, err = invoke(capsys, "classify", "--model", str(path))
        assert code == 2
        assert out == ""
        assert "line 2" in err
        assert "UTF-8" in err

    def test_out_into_missing_directory(self, capsys, fixture_model_path, temp_workspace):
        target = temp_workspace / "nope" / "r.csv"
        code, out, err = invoke(capsys, "classify", "--model", str(fixture_model_path("mm1.json")),
                                "--format", "csv", "--out", str(target))
        assert code == 2
        assert out == ""
        assert "cannot write report" in err
        assert not target.exists()

    def test_unreadable_model_file(self, capsys, mocker, fixture_model_path):
        mocker.patch("pathlib.Path.read_bytes", side_effect=PermissionError(13, "Permission denied"))
        code, _, err = invoke(capsys, "classify", "--model", str(fixture_model_path("mm1.json")))
        assert code == 2
        assert "Cannot read" in err

    def test_bad_option(self, capsys, fixture_model_path):
        code, _, err = invoke(capsys, "compare", "--model", str(fixture_model_path("mm1.json")), "--trunc", "1")
        assert code == 2
        assert "error:" in err

    def test_truncation_below_kmax(self, capsys, fixture_model_path):
        code, _, _ = invoke(capsys, "compare", "--model", str(fixture_model_path("mm1.json")),
                            "--trunc", "5", "--kmax", "10")
        assert code == 2

    def test_run_accepts_a_spec(self, capsys, fixture_model_path):
        spec = RunSpec(command="classify", model=fixture_model_path("periodic.json"), format="csv")
        assert run(spec) == 0
        assert "positive_recurrent" in capsys.readouterr().out


@pytest.mark.unit
class TestValidateExitStatus:

    def test_failed_check_exits_1_after_printing(self, capsys, mocker, fixture_model_path):
        failed = ValidationReport(
            checks=[
                CheckOutcome(name="classification", passed=True, detail="ok", elapsed=0.0),
                CheckOutcome(name="oracle", passed=False, detail="sup=1e-3", elapsed=0.0),
            ],
            passed=False,
            execution_time=0.0,
        )
        run_suite = mocker.patch("ui.cli.ValidationSuite.run", return_value=failed)
        code, out, err = invoke(capsys, "validate", "--model", str(fixture_model_path("mm1.json")), "--format", "csv")
        run_suite.assert_called_once()
        assert code == 1
        assert "oracle,false,false,sup=1e-3" in out
        assert "validation failed: oracle" in err
