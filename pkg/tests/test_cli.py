"""Command-line workflow: exit codes, determinism, record plumbing."""

from __future__ import annotations

import numpy as np
import pytest

from orthograd.cli import main
from orthograd.config import ConfigError, load_experiment_config, parse_sections_text
from orthograd.evaluation import parse_records
from orthograd.net import load_checkpoint

TINY_CONFIG = """\
[dataset]
kind = blobs
classes = 3
dim = 5
per_class = 40
test_per_class = 12
spread = 1.0
seed = 7

[network]
layer_sizes = 5,12,3
activation = relu

[pretrain]
epochs = 25
batch_size = 16
eta = 0.1
seed = 0

[splits]
mode = random
fraction = 0.1
retain_size = 40
seed = 1

[unlearn]
alpha = 0.9
eta = 0.05
unlearn_batch = 8
retain_batch = 8
max_epochs = 3
seed = 2

[unlearn.orthograd_per_sample]
use_lora = true
lora_rank = 2
lora_scale = 8

[paths]
checkpoint = out/pretrained.ckpt
results = out/results.txt
runs_dir = out/runs
"""


@pytest.fixture()
def workdir(tmp_path):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text(TINY_CONFIG, encoding="utf-8")
    return tmp_path, cfg


def test_config_parsing_round_trip(workdir):
    _, cfg_path = workdir
    cfg = load_experiment_config(cfg_path)
    assert cfg.layer_sizes == (5, 12, 3)
    assert cfg.unlearn_overrides["orthograd_per_sample"]["use_lora"] == "true"
    assert cfg.retain_size == 40


def test_config_errors_name_lines():
    with pytest.raises(ConfigError, match=":2"):
        parse_sections_text("[a]\nnot a pair\n", source="cfg")
    with pytest.raises(ConfigError, match="duplicate key"):
        parse_sections_text("[a]\nx = 1\nx = 2\n", source="cfg")
    with pytest.raises(ConfigError, match="before any"):
        parse_sections_text("x = 1\n", source="cfg")


def test_missing_config_file_is_usage_error(tmp_path, capsys):
    rc = main(["pretrain", str(tmp_path / "absent.cfg")])
    assert rc == 2
    assert "absent.cfg" in capsys.readouterr().err


def test_bad_config_key_is_usage_error(workdir, capsys):
    tmp_path, cfg_path = workdir
    cfg_path.write_text(TINY_CONFIG + "\n[unlearn.warp]\neta = 1\n", encoding="utf-8")
    rc = main(["pretrain", str(cfg_path)])
    assert rc == 2
    assert "warp" in capsys.readouterr().err


def test_unlearn_without_checkpoint_is_usage_error(workdir, capsys):
    _, cfg_path = workdir
    rc = main(["unlearn", str(cfg_path), "--method", "finetune"])
    assert rc == 2
    assert "pretrain" in capsys.readouterr().err


def test_pretrain_unlearn_compare_workflow(workdir, capsys):
    tmp_path, cfg_path = workdir
    assert main(["pretrain", str(cfg_path)]) == 0
    ckpt = tmp_path / "out" / "pretrained.ckpt"
    assert ckpt.exists()
    params, meta = load_checkpoint(ckpt)
    assert params.spec.layer_sizes == (5, 12, 3)
    assert meta["seed"] == 0

    results = tmp_path / "out" / "results.txt"
    records = parse_records(results)
    assert [r.method for r in records] == ["original"]

    assert main(["unlearn", str(cfg_path), "--method", "all",
                 "--seed-list", "0,1"]) == 0
    records = parse_records(results)
    methods = sorted({r.method for r in records})
    assert methods == ["finetune", "neggrad", "neggrad_plus", "original",
                       "orthograd_mean", "orthograd_per_sample"]
    per_method = [r for r in records if r.method == "neggrad"]
    assert [r.seed for r in per_method] == [0, 1]

    runs = list((tmp_path / "out" / "runs").glob("unlearned-*.ckpt"))
    assert len(runs) == 10  # 5 methods x 2 seeds
    traces = list((tmp_path / "out" / "runs").glob("trace-*.txt"))
    assert len(traces) == 10

    capsys.readouterr()
    assert main(["compare", str(results)]) == 0
    table = capsys.readouterr().out
    assert "original" in table and "neggrad_plus" in table
    assert "±" in table


def test_method_filter_and_unknown_method(workdir, capsys):
    tmp_path, cfg_path = workdir
    assert main(["pretrain", str(cfg_path)]) == 0
    assert main(["unlearn", str(cfg_path), "--method", "neggrad"]) == 0
    records = parse_records(tmp_path / "out" / "results.txt")
    assert sorted({r.method for r in records}) == ["neggrad", "original"]
    rc = main(["unlearn", str(cfg_path), "--method", "gradient_surgery"])
    assert rc == 2
    assert "gradient_surgery" in capsys.readouterr().err


def test_rerun_is_byte_identical(workdir):
    tmp_path, cfg_path = workdir
    assert main(["pretrain", str(cfg_path)]) == 0
    ckpt = tmp_path / "out" / "pretrained.ckpt"
    results = tmp_path / "out" / "results.txt"
    first_ckpt = ckpt.read_bytes()

    assert main(["unlearn", str(cfg_path), "--method", "orthograd_per_sample",
                 "--seed-list", "0"]) == 0
    first_results = results.read_bytes()
    run_files = sorted((tmp_path / "out" / "runs").iterdir())
    first_runs = {p.name: p.read_bytes() for p in run_files}

    assert main(["pretrain", str(cfg_path)]) == 0
    assert main(["unlearn", str(cfg_path), "--method", "orthograd_per_sample",
                 "--seed-list", "0"]) == 0
    assert ckpt.read_bytes() == first_ckpt
    assert results.read_bytes() == first_results
    for p in sorted((tmp_path / "out" / "runs").iterdir()):
        assert p.read_bytes() == first_runs[p.name]


def test_worker_pool_does_not_change_bytes(workdir, monkeypatch):
    tmp_path, cfg_path = workdir
    assert main(["pretrain", str(cfg_path)]) == 0
    results = tmp_path / "out" / "results.txt"
    assert main(["unlearn", str(cfg_path), "--method", "all", "--seed-list", "0"]) == 0
    serial = results.read_bytes()
    monkeypatch.setenv("ORTHOGRAD_THREADS", "4")
    assert main(["unlearn", str(cfg_path), "--method", "all", "--seed-list", "0"]) == 0
    assert results.read_bytes() == serial


def test_retain_size_sweep_records_and_summary(workdir, capsys):
    tmp_path, cfg_path = workdir
    assert main(["pretrain", str(cfg_path)]) == 0
    assert main(["unlearn", str(cfg_path), "--method", "neggrad",
                 "--seed-list", "0", "--retain-sizes", "20,40"]) == 0
    records = [r for r in parse_records(tmp_path / "out" / "results.txt")
               if r.method == "neggrad"]
    assert sorted(r.n_retain for r in records) == [20, 40]

    capsys.readouterr()
    assert main(["compare", str(tmp_path / "out" / "results.txt"), "--sweep"]) == 0
    out = capsys.readouterr().out
    rows = [l for l in out.splitlines() if l.startswith("neggrad")]
    assert len(rows) == 2


def test_compare_on_malformed_results_is_usage_error(tmp_path, capsys):
    bad = tmp_path / "results.txt"
    bad.write_text("methodx\n", encoding="utf-8")
    assert main(["compare", str(bad)]) == 2
    assert main(["compare", str(tmp_path / "none.txt")]) == 2
