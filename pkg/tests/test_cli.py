import csv
import io
import json
import math
import subprocess
import sys

import pytest

from ehverify.cli import (
    EXIT_FAIL,
    EXIT_INTERNAL,
    EXIT_OK,
    EXIT_USAGE,
    FIELDS,
    SUITES,
    CheckReport,
    Config,
    UsageError,
    emit,
    exit_code,
    load_config,
    main,
    parse_json_reports,
    parse_seeds,
    parse_suites,
    run,
    summary_line,
)


def invoke(capsysbinary, *argv):
    code = main(list(argv))
    out = capsysbinary.readouterr()
    return code, out.out, out.err.decode()


def report(passed=True, residual=1e-14, suite="lemma1", check="first_order_geometric", error=None):
    return CheckReport(suite, check, {"n": 3, "seed": 0}, residual, 1e-12, passed, None, error)


# output formats and summary


def test_empty_report_summary():
    assert summary_line([]) == "0 checks, 0 failures"
    assert emit([], "json") == b""
    assert exit_code([]) == EXIT_OK


def test_single_failure_summary():
    reports = [report(), report(False, 1.0)]
    assert summary_line(reports) == "2 checks, 1 failures"
    assert exit_code(reports) == EXIT_FAIL
    assert exit_code(reports + [report(False, math.nan, error="boom")]) == EXIT_INTERNAL


def test_json_round_trip():
    reports = [report(), report(False, math.inf), report(False, math.nan, error="x")]
    back = parse_json_reports(emit(reports, "json"))
    assert [r.passed for r in back] == [True, False, False]
    assert back[0].residual == 1e-14
    assert back[1].residual == math.inf
    assert math.isnan(back[2].residual)
    for line in emit(reports, "json").decode().splitlines():
        assert list(json.loads(line))[: len(FIELDS)] == list(FIELDS)


def test_csv_header_and_rows():
    text = emit([report(), report(False, 2.0)], "csv").decode()
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0][: len(FIELDS)] == list(FIELDS)
    assert len(rows) == 3
    assert rows[2][FIELDS.index("pass")] == "false"
    assert json.loads(rows[1][FIELDS.index("inputs")]) == {"n": 3, "seed": 0}


def test_human_table():
    text = emit([report()], "human").decode()
    assert "first_order_geometric" in text and "pass" in text


# argument and config parsing


def test_parse_seeds():
    assert list(parse_seeds("3")) == [0, 1, 2]
    assert list(parse_seeds("5-7")) == [5, 6, 7]
    assert list(parse_seeds("1,4,9")) == [1, 4, 9]
    assert list(parse_seeds("2", offset=10)) == [10, 11]
    with pytest.raises(UsageError):
        parse_seeds("x")


def test_parse_suites():
    assert parse_suites(["all"]) == SUITES
    assert parse_suites("lemma1,palatini") == ("lemma1", "palatini")
    with pytest.raises(UsageError):
        parse_suites(["nope"])


def test_config_file(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text(
        "[run]\nsuites = lemma2, palatini\ndims = 3\nseeds = 4\nseed_offset = 100\norder = 5\n"
        "tol_multiplier = 2\nformat = csv\njobs = 1\n[catalog]\nrandom_metric.amplitude = 0.05\n"
    )
    cfg = load_config(str(path))
    assert cfg.suites == ("lemma2", "palatini")
    assert cfg.dims == (3,)
    assert list(cfg.seeds) == [100, 101, 102, 103]
    assert cfg.order == 5 and cfg.tol_multiplier == 2.0 and cfg.format == "csv"
    assert cfg.overrides == {"random_metric": {"amplitude": 0.05}}


@pytest.mark.parametrize(
    "body",
    [
        "[run]\norder = 2\n",
        "[run]\ndims = 2\n",
        "[run]\nformat = xml\n",
        "[run]\nunknown = 1\n",
        "[catalog]\nrandom_metric.seed = 4\n",
        "[catalog]\nnot_a_kind.x = 1\n",
    ],
)
def test_bad_config(tmp_path, body):
    path = tmp_path / "bad.ini"
    path.write_text(body)
    with pytest.raises(UsageError):
        load_config(str(path))


def test_default_config():
    cfg = Config()
    assert cfg.suites == SUITES
    assert cfg.dims == (3, 4)
    assert len(cfg.seeds) == 50
    assert cfg.format == "json"


# end to end


def test_suite_runs_green(capsysbinary):
    code, out, err = invoke(capsysbinary, "verify", "--suite", "lemma2", "--seeds", "5")
    assert code == EXIT_OK
    reports = parse_json_reports(out)
    assert reports and all(r.passed for r in reports)
    assert {r.inputs["n"] for r in reports} == {3, 4}
    assert err.strip() == summary_line(reports)


def test_unknown_suite_is_usage_error(capsysbinary):
    code, _, err = invoke(capsysbinary, "verify", "--suite", "nope")
    assert code == EXIT_USAGE
    assert "usage error" in err


@pytest.mark.parametrize("argv", [["verify", "--n", "2"], ["verify", "--order", "3"], ["verify", "--tol", "0"], ["frobnicate"]])
def test_invalid_arguments(capsysbinary, argv):
    assert invoke(capsysbinary, *argv)[0] == EXIT_USAGE


def test_single_seed_is_byte_identical(capsysbinary):
    argv = ["verify", "--seed", "7", "--suite", "lemma1,legendre,palatini"]
    a = invoke(capsysbinary, *argv)
    b = invoke(capsysbinary, *argv)
    assert a[0] == b[0] == EXIT_OK
    assert a[1] == b[1] and a[1]


def test_jobs_do_not_change_output(capsysbinary):
    argv = ["verify", "--seeds", "3", "--suite", "naturality", "--n", "3"]
    a = invoke(capsysbinary, *argv, "--jobs", "1")
    b = invoke(capsysbinary, *argv, "--jobs", "2")
    assert a[1] == b[1]


def test_tiny_tolerance_fails(capsysbinary):
    code, out, err = invoke(capsysbinary, "verify", "--suite", "palatini", "--n", "3", "--seed", "0", "--tol", "1e-30")
    assert code == EXIT_FAIL
    reports = parse_json_reports(out)
    failures = sum(not r.passed for r in reports)
    assert failures >= 1
    assert err.strip() == f"{len(reports)} checks, {failures} failures"


def test_generator_error_exits_three(capsysbinary, tmp_path):
    path = tmp_path / "bad.ini"
    path.write_text("[run]\nsuites = lemma1\ndims = 3\nseeds = 1\n[catalog]\nrandom_metric.amplitude = 50\n")
    code, out, err = invoke(capsysbinary, "verify", "--config", str(path))
    assert code == EXIT_INTERNAL
    assert all(r.error for r in parse_json_reports(out))
    assert "internal fault" in err


def test_output_file_and_timing(capsysbinary, tmp_path):
    dest = tmp_path / "out.csv"
    code, out, err = invoke(
        capsysbinary, "verify", "--suite", "lemma1", "--n", "3", "--seed", "1", "--format", "csv",
        "--output", str(dest), "--timing",
    )
    assert code == EXIT_OK and out == b""
    rows = list(csv.DictReader(dest.open()))
    assert rows and all(float(r["runtime_ms"]) >= 0 for r in rows)
    assert "failures" in err


def test_run_api_sorted():
    cfg = Config(suites=("palatini", "lemma1"), dims=(3,), seeds=range(2))
    reports = run(cfg)
    suites = [r.suite for r in reports]
    assert suites == sorted(suites, key=SUITES.index)
    assert all(r.runtime_ms is None for r in reports)


def test_catalog_command(capsysbinary):
    code, out, _ = invoke(capsysbinary, "catalog", "--format", "json")
    assert code == EXIT_OK
    kinds = [k["kind"] for k in json.loads(out)]
    assert "schwarzschild" in kinds and "random_diffeo" in kinds
    code, out, _ = invoke(capsysbinary, "catalog")
    assert code == EXIT_OK and b"minkowski" in out


@pytest.mark.parametrize("what", ["metric", "connection", "hessian", "momenta"])
def test_dump_command(capsysbinary, what):
    code, out, _ = invoke(capsysbinary, "dump", what, "--n", "3", "--seed", "2")
    assert code == EXIT_OK
    data = json.loads(out)
    assert data["n"] == 3


def test_dump_unknown_kind(capsysbinary):
    assert invoke(capsysbinary, "dump", "metric", "--metric", "nope")[0] == EXIT_USAGE


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "ehverify", "verify", "--suite", "palatini", "--n", "3", "--seed", "0"],
        capture_output=True,
        text=True,
        check=False,
    )
    assert proc.returncode == EXIT_OK
    assert proc.stderr.strip().endswith("0 failures")


def test_tolerance_section(tmp_path, capsysbinary):
    path = tmp_path / "tol.ini"
    path.write_text("[run]\nsuites = palatini\ndims = 3\nseeds = 1\n[tolerances]\npalatini.divergence_random_tensor = 1e-30\n")
    assert load_config(str(path)).tolerances == {"palatini.divergence_random_tensor": 1e-30}
    code, out, _ = invoke(capsysbinary, "verify", "--config", str(path))
    assert code == EXIT_FAIL
    failed = [r.check for r in parse_json_reports(out) if not r.passed]
    assert failed == ["divergence_random_tensor"]
    path.write_text("[tolerances]\npalatini.nope = 1\n")
    with pytest.raises(UsageError):
        load_config(str(path))
