"""End-to-end command-line pipeline: grid -> run -> aggregate -> plot."""

import json

import numpy as np
import pytest

from tidysim import read_grid, read_table
from tidysim.cli import main

CONFIG = """\
study = "prepost"
iterations = 8
master_seed = 321

[factors]
sample_size = [6, 10]
effect_size = [0.0, 0.9]
outcome = ["post", "change"]
correction = [false, true]
"""


@pytest.fixture
def config_path(tmp_path):
    path = tmp_path / "study.toml"
    path.write_text(CONFIG)
    return path


@pytest.fixture
def pipeline(tmp_path, config_path):
    grid = tmp_path / "grid.parquet"
    results = tmp_path / "results.parquet"
    agg = tmp_path / "agg.parquet"
    assert main(["grid", str(config_path), "-o", str(grid)]) == 0
    assert main(["run", str(grid), "--study", "prepost", "-o", str(results),
                 "--no-progress"]) == 0
    assert main(["aggregate", str(grid), str(results), "-o", str(agg)]) == 0
    return grid, results, agg


class TestCmdGrid:
    def test_writes_expected_rows(self, tmp_path, config_path):
        out = tmp_path / "grid.parquet"
        assert main(["grid", str(config_path), "-o", str(out)]) == 0
        grid = read_grid(out)
        assert len(grid) == 2 * 2 * 2 * 2 * 8
        assert grid.factor_names == ("sample_size", "effect_size", "outcome",
                                     "correction")

    def test_single_row_config(self, tmp_path):
        cfg = tmp_path / "one.toml"
        cfg.write_text('iterations = 1\nmaster_seed = 5\n'
                       '[factors]\nsample_size = [4]\n')
        out = tmp_path / "one.parquet"
        assert main(["grid", str(cfg), "-o", str(out)]) == 0
        assert len(read_grid(out)) == 1

    def test_malformed_toml_names_line(self, tmp_path, capsys):
        cfg = tmp_path / "bad.toml"
        cfg.write_text("iterations = 1\nmaster_seed = [unclosed\n")
        assert main(["grid", str(cfg), "-o", str(tmp_path / "g.parquet")]) == 1
        err = capsys.readouterr().err
        assert "line 2" in err

    def test_unknown_key_rejected(self, tmp_path, capsys):
        cfg = tmp_path / "bad.toml"
        cfg.write_text('iterations = 1\nmaster_seed = 5\niteratons = 2\n'
                       '[factors]\nx = [1]\n')
        assert main(["grid", str(cfg), "-o", str(tmp_path / "g.parquet")]) == 1
        assert "iteratons" in capsys.readouterr().err

    def test_csv_grid_output(self, tmp_path, config_path):
        out = tmp_path / "grid.csv"
        assert main(["grid", str(config_path), "-o", str(out)]) == 0
        assert (tmp_path / "grid.schema.json").exists()
        assert len(read_grid(out)) == 128

    def test_bundled_config_builds_the_full_grid(self, tmp_path):
        from pathlib import Path

        config = Path(__file__).resolve().parents[1] / "demos" / "prepost_power.toml"
        out = tmp_path / "canonical.parquet"
        assert main(["grid", str(config), "-o", str(out)]) == 0
        grid = read_grid(out)
        assert len(grid) == 352_000
        assert grid.factor_names == ("sample_size", "effect_size", "outcome",
                                     "correction")


class TestCmdRun:
    def test_unknown_study_lists_registry(self, tmp_path, pipeline, capsys):
        grid, _, _ = pipeline
        rc = main(["run", str(grid), "--study", "bogus",
                   "-o", str(tmp_path / "r.parquet"), "--no-progress"])
        assert rc == 1
        assert "prepost" in capsys.readouterr().err

    def test_iteration_subset(self, tmp_path, pipeline):
        grid, _, _ = pipeline
        out = tmp_path / "sub.parquet"
        assert main(["run", str(grid), "--study", "prepost", "-o", str(out),
                     "--iterations", "1..3", "--no-progress"]) == 0
        assert read_table(out).n_rows == 16 * 3

    def test_chunked_run_covers_expected_rows(self, tmp_path, pipeline):
        grid, results, _ = pipeline
        out = tmp_path / "chunk.parquet"
        assert main(["run", str(grid), "--study", "prepost", "-o", str(out),
                     "--num-chunks", "4", "--chunk-index", "1",
                     "--no-progress"]) == 0
        chunk = read_table(out)
        assert chunk.n_rows == 32
        assert chunk.column("row_id").to_pylist() == list(range(32, 64))
        whole = read_table(results)
        assert chunk.equals(whole.take(np.arange(32, 64)))

    def test_resume_after_completion_executes_nothing(self, tmp_path, pipeline):
        grid, _, _ = pipeline
        out = tmp_path / "res.parquet"
        ck = tmp_path / "res.checkpoint.ndjson"
        assert main(["run", str(grid), "--study", "prepost", "-o", str(out),
                     "--resume", "--no-progress"]) == 0
        lines_before = ck.read_text().count("\n")
        assert lines_before == 128
        assert main(["run", str(grid), "--study", "prepost", "-o", str(out),
                     "--resume", "--no-progress"]) == 0
        assert ck.read_text().count("\n") == lines_before
        assert read_table(out).n_rows == 128

    def test_checkpoint_lines_are_json(self, tmp_path, pipeline):
        grid, _, _ = pipeline
        out = tmp_path / "r2.parquet"
        assert main(["run", str(grid), "--study", "prepost", "-o", str(out),
                     "--resume", "--iterations", "1", "--no-progress"]) == 0
        ck = tmp_path / "r2.checkpoint.ndjson"
        first = json.loads(ck.read_text().splitlines()[0])
        assert set(first) == {"row_id", "outcomes", "status"}

    def test_rows_flag(self, tmp_path, pipeline):
        grid, _, _ = pipeline
        out = tmp_path / "rows.parquet"
        assert main(["run", str(grid), "--study", "prepost", "-o", str(out),
                     "--rows", "0:10", "--no-progress"]) == 0
        assert read_table(out).n_rows == 10


class TestCmdAggregate:
    def test_default_grouping_is_all_factors(self, pipeline):
        _, _, agg = pipeline
        table = read_table(agg)
        assert table.n_rows == 16
        assert table.names == (
            "sample_size", "effect_size", "outcome", "correction",
            "bias", "bias_lo", "bias_hi", "power", "n_sim",
            "power_se", "power_lo", "power_hi", "n_error")
        assert table.column("n_sim").to_pylist() == [8] * 16

    def test_alpha_flag_monotone(self, tmp_path, pipeline):
        grid, results, agg = pipeline
        loose = tmp_path / "agg10.parquet"
        assert main(["aggregate", str(grid), str(results), "-o", str(loose),
                     "--alpha", "0.10"]) == 0
        p05 = read_table(agg).column("power").to_pylist()
        p10 = read_table(loose).column("power").to_pylist()
        assert all(b >= a for a, b in zip(p05, p10))

    def test_group_by_flag(self, tmp_path, pipeline):
        grid, results, _ = pipeline
        out = tmp_path / "pooled.parquet"
        assert main(["aggregate", str(grid), str(results), "-o", str(out),
                     "--group-by", "outcome,correction"]) == 0
        table = read_table(out)
        assert table.n_rows == 4
        assert table.column("n_sim").to_pylist() == [32] * 4

    def test_missing_results_file_fails(self, tmp_path, pipeline, capsys):
        grid, _, _ = pipeline
        rc = main(["aggregate", str(grid), str(tmp_path / "absent.parquet"),
                   "-o", str(tmp_path / "agg2.parquet")])
        assert rc == 1
        assert "absent" in capsys.readouterr().err

    def test_failure_does_not_clobber_existing_output(self, tmp_path, pipeline):
        grid, _, agg = pipeline
        before = agg.read_bytes()
        rc = main(["aggregate", str(grid), str(tmp_path / "absent.parquet"),
                   "-o", str(agg)])
        assert rc == 1
        assert agg.read_bytes() == before


class TestCmdPlot:
    def test_faceted_plot(self, tmp_path, pipeline):
        _, _, agg = pipeline
        out = tmp_path / "power.svg"
        assert main(["plot", str(agg), "-o", str(out),
                     "--x", "sample_size", "--y", "power",
                     "--color", "outcome", "--linetype", "correction",
                     "--facet", "effect_size"]) == 0
        svg = out.read_text()
        assert svg.count("effect_size: ") == 2

    def test_filter_and_determinism(self, tmp_path, pipeline):
        _, _, agg = pipeline
        a, b = tmp_path / "a.svg", tmp_path / "b.svg"
        args = ["plot", str(agg), "--x", "sample_size", "--y", "power",
                "--facet", "effect_size", "--filter", "effect_size=0.9"]
        assert main(args + ["-o", str(a)]) == 0
        assert main(args + ["-o", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()
        assert a.read_text().count("effect_size: ") == 1

    def test_absent_filter_level_fails_listing_levels(self, tmp_path, pipeline,
                                                      capsys):
        _, _, agg = pipeline
        rc = main(["plot", str(agg), "-o", str(tmp_path / "x.svg"),
                   "--filter", "effect_size=0.5"])
        assert rc == 1
        assert "0.9" in capsys.readouterr().err


class TestCmdDumpRow:
    def test_replays_one_row_as_csv(self, tmp_path, pipeline):
        from tidysim import derive_seed, generate_prepost

        grid, _, _ = pipeline
        out = tmp_path / "row5.csv"
        assert main(["dump-row", str(grid), "5", "--study", "prepost",
                     "-o", str(out)]) == 0
        dumped = read_table(out)
        assert dumped.names == ("id", "treated", "pre", "post")
        row = read_grid(grid).row(5)
        data = generate_prepost(row.values["sample_size"],
                                row.values["effect_size"],
                                derive_seed(321, 5))
        assert dumped.column("pre").to_pylist() == pytest.approx(
            data.pre.tolist())

    def test_unknown_row_id_fails(self, tmp_path, pipeline, capsys):
        grid, _, _ = pipeline
        rc = main(["dump-row", str(grid), "99999", "--study", "prepost",
                   "-o", str(tmp_path / "no.csv")])
        assert rc == 1
        assert "99999" in capsys.readouterr().err


class TestEndToEndDeterminism:
    def test_pipeline_reruns_byte_identical(self, tmp_path, config_path):
        payloads = []
        for tag in ("one", "two"):
            grid = tmp_path / f"grid_{tag}.parquet"
            results = tmp_path / f"res_{tag}.parquet"
            agg = tmp_path / f"agg_{tag}.parquet"
            assert main(["grid", str(config_path), "-o", str(grid)]) == 0
            assert main(["run", str(grid), "--study", "prepost",
                         "-o", str(results), "--jobs", "2",
                         "--no-progress"]) == 0
            assert main(["aggregate", str(grid), str(results),
                         "-o", str(agg)]) == 0
            payloads.append((grid.read_bytes(), results.read_bytes(),
                             agg.read_bytes()))
        assert payloads[0] == payloads[1]

    def test_jobs_env_var_default(self, tmp_path, config_path, monkeypatch):
        from tidysim.cli import build_parser

        monkeypatch.setenv("TIDYSIM_JOBS", "3")
        args = build_parser().parse_args(
            ["run", "g.parquet", "--study", "prepost", "-o", "r.parquet"])
        assert args.jobs == 3
