"""Benchmark orchestration: file outputs, caching, masking, concurrency."""

import io
import re

import numpy as np
import pytest

from lamper.config import RunConfig, validate_config
from lamper.datasets import synthetic_root
from lamper.errors import LamperError
from lamper.runner import run_benchmark


def make_config(tmp_path, **overrides):
    from lamper.prompts import PromptKind

    kw = dict(
        dataset_root=str(synthetic_root()),
        output_dir=str(tmp_path / "out"),
        cache_dir=str(tmp_path / "out" / "cache"),
        dataset_filter=("TrendSteps",),
        prompt_kinds=(PromptKind.SDP,),
        fusion_sets=(),
        include_ts_benchmark=True,
        concurrency=2,
        mock_dimension=8,
        mock_max_tokens=128,
    )
    kw.update(overrides)
    return RunConfig(**kw)


def read_lines(path):
    return path.read_text().splitlines()


class TestOutputs:
    def test_files_and_row_order(self, tmp_path):
        from lamper.prompts import PromptKind

        cfg = make_config(
            tmp_path,
            dataset_filter=None,
            prompt_kinds=(PromptKind.SDP, PromptKind.DDP),
            fusion_sets=((PromptKind.SDP, PromptKind.DDP),),
        )
        result = run_benchmark(cfg, log_stream=io.StringIO())
        names = sorted(p.name for p in (tmp_path / "out").iterdir() if p.is_file())
        assert names == ["ablation.csv", "cd_diagram.svg", "per_dataset.csv",
                         "summary.csv"]
        summary = read_lines(tmp_path / "out" / "summary.csv")
        assert summary[0] == "method,average_accuracy,average_rank"
        methods = [line.split(",")[0] for line in summary[1:]]
        assert methods == ["SDP", "DDP", "SDP+DDP", "TS"]
        per_dataset = read_lines(tmp_path / "out" / "per_dataset.csv")
        assert per_dataset[0] == "dataset,SDP,DDP,SDP+DDP,TS,skipped"
        datasets = [line.split(",")[0] for line in per_dataset[1:]
                    if line and not line.startswith("#")]
        assert datasets == ["PulseCount", "TrendSteps", "WaveShapes"]
        assert result.report.methods == ("SDP", "DDP", "SDP+DDP", "TS")

    def test_ablation_holds_pairwise_fusion_rows_only(self, tmp_path):
        from lamper.prompts import PromptKind

        cfg = make_config(
            tmp_path,
            prompt_kinds=(PromptKind.SDP, PromptKind.DDP, PromptKind.FP),
            fusion_sets=(
                (PromptKind.SDP, PromptKind.DDP),
                (PromptKind.SDP, PromptKind.DDP, PromptKind.FP),
            ),
        )
        result = run_benchmark(cfg, log_stream=io.StringIO())
        ablation = read_lines(tmp_path / "out" / "ablation.csv")
        assert ablation[0] == "method,average_accuracy,average_rank"
        rows = [line.split(",")[0] for line in ablation[1:]]
        assert rows == ["SDP+DDP"]
        # same numbers as the joint pool in summary.csv
        summary = {line.split(",")[0]: line for line in
                   read_lines(tmp_path / "out" / "summary.csv")[1:]}
        assert ablation[1] == summary["SDP+DDP"]
        assert "Fusion" in result.report.methods

    def test_ablation_header_always_present(self, tmp_path):
        cfg = make_config(tmp_path)
        run_benchmark(cfg, log_stream=io.StringIO())
        ablation = read_lines(tmp_path / "out" / "ablation.csv")
        assert ablation == ["method,average_accuracy,average_rank"]


class TestDeterminism:
    def test_rerun_byte_identical_with_full_cache_hits(self, tmp_path):
        from lamper.prompts import PromptKind

        cfg = make_config(tmp_path, prompt_kinds=(PromptKind.SDP,))
        first = run_benchmark(cfg, log_stream=io.StringIO())
        blobs = {p.name: p.read_bytes()
                 for p in (tmp_path / "out").iterdir() if p.is_file()}
        assert first.cache_stats["misses"] > 0
        assert first.cache_stats["hits"] == 0
        second = run_benchmark(cfg, log_stream=io.StringIO())
        assert second.cache_stats["misses"] == 0
        assert second.cache_stats["hits"] == first.cache_stats["misses"]
        for p in (tmp_path / "out").iterdir():
            if p.is_file():
                assert p.read_bytes() == blobs[p.name], p.name

    def test_mock_identity_partitions_cache(self, tmp_path):
        from lamper.prompts import PromptKind

        cfg = make_config(tmp_path, prompt_kinds=(PromptKind.SDP,))
        run_benchmark(cfg, log_stream=io.StringIO())
        reseeded = make_config(tmp_path, prompt_kinds=(PromptKind.SDP,),
                               mock_seed=99)
        result = run_benchmark(reseeded, log_stream=io.StringIO())
        assert result.cache_stats["hits"] == 0
        assert result.cache_stats["misses"] > 0


class TestMasking:
    def write_ragged_dataset(self, root):
        d = root / "Ragged"
        d.mkdir(parents=True)
        (d / "Ragged_TRAIN.tsv").write_text(
            "1\t0.1\t0.2\t0.3\n2\t0.4\t0.5\t0.6\t0.7\n"
            "1\t0.2\t0.1\t0.3\n2\t0.5\t0.4\t0.6\t0.8\n")
        (d / "Ragged_TEST.tsv").write_text(
            "1\t0.15\t0.2\t0.3\n2\t0.45\t0.5\t0.6\t0.7\n")

    def write_clean_dataset(self, root):
        d = root / "Clean"
        d.mkdir(parents=True, exist_ok=True)
        (d / "Clean_TRAIN.tsv").write_text(
            "1\t0.1\t0.2\t0.3\n2\t0.9\t0.8\t0.7\n"
            "1\t0.2\t0.1\t0.3\n2\t0.8\t0.9\t0.7\n")
        (d / "Clean_TEST.tsv").write_text(
            "1\t0.15\t0.2\t0.3\n2\t0.85\t0.8\t0.7\n")

    def test_unequal_length_masks_ts_only(self, tmp_path):
        from lamper.prompts import PromptKind

        root = tmp_path / "data"
        self.write_ragged_dataset(root)
        self.write_clean_dataset(root)
        cfg = make_config(tmp_path, dataset_root=str(root), dataset_filter=None,
                          prompt_kinds=(PromptKind.SDP,))
        stream = io.StringIO()
        result = run_benchmark(cfg, log_stream=stream)
        m = result.matrix
        col = m.datasets.index("Ragged")
        assert not m.mask[m.methods.index("SDP"), col]
        assert 0.0 <= m.values[m.methods.index("SDP"), col] <= 1.0
        assert m.mask[m.methods.index("TS"), col]
        assert result.report.skipped == ("Ragged",)
        assert result.report.n_datasets_ranked == 1
        text = (tmp_path / "out" / "per_dataset.csv").read_text()
        assert "# skipped datasets: Ragged" in text
        assert re.search(r"Ragged,[01]\.\d+,,yes", text)
        assert any("WARN" in line for line in stream.getvalue().splitlines())

    def test_broken_dataset_masks_all_cells(self, tmp_path):
        from lamper.prompts import PromptKind

        root = tmp_path / "data"
        self.write_ragged_dataset(root)
        self.write_clean_dataset(root)
        bad = root / "Broken"
        bad.mkdir()
        (bad / "Broken_TRAIN.tsv").write_text("1\t0.1\tspam\n")
        (bad / "Broken_TEST.tsv").write_text("1\t0.1\t0.2\n")
        cfg = make_config(tmp_path, dataset_root=str(root), dataset_filter=None,
                          prompt_kinds=(PromptKind.SDP,),
                          include_ts_benchmark=True)
        stream = io.StringIO()
        result = run_benchmark(cfg, log_stream=stream)
        m = result.matrix
        col = m.datasets.index("Broken")
        assert m.mask[:, col].all()
        # the healthy rows of Ragged still scored
        assert not m.mask[m.methods.index("SDP"), m.datasets.index("Ragged")]
        assert set(result.report.skipped) == {"Broken", "Ragged"}

    def test_all_datasets_masked_is_error(self, tmp_path):
        from lamper.prompts import PromptKind

        root = tmp_path / "data"
        bad = root / "Broken"
        bad.mkdir(parents=True)
        (bad / "Broken_TRAIN.tsv").write_text("1\t0.1\tspam\n")
        (bad / "Broken_TEST.tsv").write_text("1\t0.1\t0.2\n")
        cfg = make_config(tmp_path, dataset_root=str(root), dataset_filter=None,
                          prompt_kinds=(PromptKind.SDP,))
        with pytest.raises(LamperError):
            run_benchmark(cfg, log_stream=io.StringIO())


class TestGuards:
    def test_needs_two_methods(self, tmp_path):
        from lamper.prompts import PromptKind

        cfg = make_config(tmp_path, prompt_kinds=(PromptKind.SDP,),
                          include_ts_benchmark=False)
        with pytest.raises(LamperError, match="two methods"):
            run_benchmark(cfg, log_stream=io.StringIO())

    def test_unknown_filter_name(self, tmp_path):
        cfg = make_config(tmp_path, dataset_filter=("TrendSteps", "NoSuch"))
        with pytest.raises(LamperError, match="NoSuch"):
            run_benchmark(cfg, log_stream=io.StringIO())

    def test_filter_limits_datasets(self, tmp_path):
        cfg = make_config(tmp_path)
        result = run_benchmark(cfg, log_stream=io.StringIO())
        assert result.matrix.datasets == ("TrendSteps",)


class TestConcurrency:
    def test_inflight_bounded(self, tmp_path):
        from lamper.prompts import PromptKind

        cfg = make_config(tmp_path, dataset_filter=None, concurrency=2,
                          prompt_kinds=(PromptKind.SDP, PromptKind.DDP))
        result = run_benchmark(cfg, log_stream=io.StringIO())
        assert 1 <= result.max_inflight <= 2
        assert result.backend_requests > 0

    def test_concurrent_matches_serial(self, tmp_path):
        from lamper.prompts import PromptKind

        serial = make_config(tmp_path, dataset_filter=None, concurrency=1,
                             prompt_kinds=(PromptKind.SDP,),
                             output_dir=str(tmp_path / "o1"),
                             cache_dir=str(tmp_path / "o1" / "cache"))
        parallel = make_config(tmp_path, dataset_filter=None, concurrency=4,
                               prompt_kinds=(PromptKind.SDP,),
                               output_dir=str(tmp_path / "o2"),
                               cache_dir=str(tmp_path / "o2" / "cache"))
        r1 = run_benchmark(serial, log_stream=io.StringIO())
        r2 = run_benchmark(parallel, log_stream=io.StringIO())
        assert np.array_equal(r1.matrix.values, r2.matrix.values)
        assert (tmp_path / "o1" / "summary.csv").read_bytes() == \
            (tmp_path / "o2" / "summary.csv").read_bytes()


class TestLogStream:
    def test_log_line_format(self, tmp_path):
        cfg = make_config(tmp_path)
        stream = io.StringIO()
        run_benchmark(cfg, log_stream=stream)
        lines = stream.getvalue().splitlines()
        assert lines, "expected log output"
        pattern = re.compile(
            r"^\d{4}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2}Z\t(INFO|WARN)\t[^\t]+\t[^\t]+\t.+$")
        for line in lines:
            assert pattern.match(line), line
        assert "run start" in lines[0]
        assert "run done" in lines[-1]

    def test_accuracy_lines_per_cell(self, tmp_path):
        cfg = make_config(tmp_path)
        stream = io.StringIO()
        run_benchmark(cfg, log_stream=stream)
        text = stream.getvalue()
        assert re.search(r"TrendSteps\tSDP\taccuracy 0\.\d{4}", text)
        assert re.search(r"TrendSteps\tTS\taccuracy \d\.\d{4}", text)


class TestConfigIntegration:
    def test_run_from_parsed_config(self, tmp_path):
        text = (
            "[run]\n"
            f"dataset_root = {synthetic_root()}\n"
            "dataset_filter = PulseCount\n"
            "prompt_kinds = sdp, fp\n"
            "fusion_sets = sdp+fp\n"
            "include_ts_benchmark = true\n"
            f"output_dir = {tmp_path / 'out'}\n"
            "\n[backend]\n"
            "mock.dimension = 8\n"
            "mock.seed = 3\n")
        cfg = validate_config(text)
        result = run_benchmark(cfg, log_stream=io.StringIO())
        assert result.report.methods == ("SDP", "FP", "SDP+FP", "TS")
        assert result.report.n_datasets_ranked == 1
