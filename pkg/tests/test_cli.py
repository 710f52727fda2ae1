import json

import numpy as np
import pytest

from mwrelay import cli
from mwrelay.channel import ConfigError
from mwrelay.config import config_echo, parse_config, read_key_values
from mwrelay.results import ResultTable, format_value, render_csv, write_results


def test_db_conversion():
    cfg = parse_config("closed-form", overrides={"snr_db": "0", "pr_db": "10"})
    assert cfg.params.P_u == 1.0
    assert cfg.params.P_r == pytest.approx(10.0)


@pytest.mark.parametrize("overrides,key", [
    ({"tau": "5", "K": "10"}, "tau"),
    ({"tau": "300"}, "tau"),
    ({"bogus": "1"}, "bogus"),
    ({"M": "abc"}, "M"),
    ({"snr_db": "-inf"}, "snr_db"),
    ({"pr_db": "nan"}, "pr_db"),
    ({"beta": "1,2"}, "beta"),
    ({"t": "5"}, "t"),
])
def test_config_errors_name_key(overrides, key):
    with pytest.raises(ConfigError) as err:
        parse_config("closed-form", overrides=overrides)
    assert err.value.key == key


def test_file_then_flags(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# comment\nM = 32\nK=4\nsnr_db=5\n\n")
    cfg = parse_config("closed-form", path, {"M": "64"})
    assert cfg.params.M == 64 and cfg.params.K == 4 and cfg.params.tau == 4
    assert cfg.params.P_u == pytest.approx(10 ** 0.5)


def test_round_trip_through_echo(tmp_path):
    cfg = parse_config("sweep-m", overrides={"M": "16", "snr_db": "-3.3", "beta": "0.5",
                                             "m_grid": "8,16", "workers": "3"})
    table = ResultTable(("M",), [(8,)], config_echo(cfg))
    path = tmp_path / "out.csv"
    write_results(table, path)
    again = parse_config(None, path)
    assert again == cfg
    assert again.params == cfg.params


def test_read_key_values_stops_at_table():
    text = "# config: M=4\n# version: x\nM,se\n4,1.0\n"
    assert read_key_values(text) == {"M": "4"}


def test_formatting_is_fixed():
    assert format_value(1 / 3) == "0.333333333"
    assert format_value(12345678912.0) == "1.23456789e+10"
    assert format_value(np.int64(7)) == "7"
    assert format_value(float("nan")) == "nan"
    assert format_value(True) == "1"


def test_header_only_file(tmp_path):
    table = ResultTable(("M", "se_sum_closed", "se_sum_mc", "mc_halfwidth"), [], ["M=8"])
    write_results(table, tmp_path / "e.csv")
    lines = (tmp_path / "e.csv").read_text().splitlines()
    assert lines[-1] == "M,se_sum_closed,se_sum_mc,mc_halfwidth"
    assert lines[0] == "# config: M=8"


def test_write_error_names_path(tmp_path):
    with pytest.raises(OSError) as err:
        write_results(ResultTable(("a",)), tmp_path / "missing" / "x.csv")
    assert "missing" in str(err.value)


def test_cli_exit_codes(tmp_path, capsys):
    assert cli.main(["closed-form", "--K", "10", "--tau", "5"]) == cli.EXIT_CONFIG
    assert "tau" in capsys.readouterr().err
    out = tmp_path / "mc.csv"
    code = cli.main(["monte-carlo", "--M", "2", "--K", "5", "--trials", "1000",
                     "--out", str(out)])
    assert code == cli.EXIT_UNDERSAMPLED and out.exists()
    assert cli.main(["closed-form", "--out", str(tmp_path / "no" / "x.csv")]) == cli.EXIT_IO


@pytest.mark.parametrize("sub,columns", [
    ("closed-form", "k,sinr,se,var,iu,an"),
    ("monte-carlo", "k,sinr_closed,sinr_mc,sinr_halfwidth,se_closed,se_mc,se_halfwidth"),
    ("sweep-m", "M,se_sum_closed,se_sum_mc,mc_halfwidth"),
    ("sweep-tau", "snr_db,tau,se_sum_closed,optimal"),
    ("cdf", "drop,se_sum_multi_way,se_sum_two_way"),
    ("compare-two-way", "k,se_multi_way,se_two_way"),
    ("scaling", "regime,M,se_sum_finite,se_sum_limit,rel_gap"),
])
def test_subcommand_columns(sub, columns, tmp_path):
    out = tmp_path / "r.csv"
    args = [sub, "--out", str(out), "--format", "both", "--trials", "2000",
            "--m-grid", "8,16", "--drops", "20", "--K", "3", "--M", "16"]
    assert cli.main(args) in (cli.EXIT_OK, cli.EXIT_UNDERSAMPLED)
    header = [ln for ln in out.read_text().splitlines() if not ln.startswith("#")][0]
    assert header == columns
    doc = json.loads(out.with_suffix(".json").read_text())
    assert ",".join(doc["columns"]) == columns


def test_stdout_output(capsys):
    assert cli.main(["closed-form", "--K", "3"]) == 0
    text = capsys.readouterr().out
    assert text.startswith("# config: subcommand=closed-form")
    assert "k,sinr,se,var,iu,an" in text


def test_json_only(tmp_path):
    out = tmp_path / "r.json"
    assert cli.main(["compare-two-way", "--format", "json", "--out", str(out)]) == 0
    assert json.loads(out.read_text())["columns"][0] == "k"


def test_rerun_byte_identical(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    common = ["sweep-m", "--K", "3", "--m-grid", "4,8", "--trials", "3000", "--seed", "9",
              "--format", "both"]
    cli.main(common + ["--out", str(a), "--workers", "1"])
    cli.main(common + ["--out", str(b), "--workers", "4"])
    assert a.read_bytes() == b.read_bytes()
    assert a.with_suffix(".json").read_bytes() == b.with_suffix(".json").read_bytes()


def test_render_is_locale_independent():
    text = render_csv(ResultTable(("x",), [(1234567.5,)]))
    assert "1234567.5" in text
