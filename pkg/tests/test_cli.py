import json
from pathlib import Path

import numpy as np
import pytest

from anchorref.cli import main, toy_text_embedding


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """A simulated trace on disk plus a built bank, shared across CLI tests."""
    root = tmp_path_factory.mktemp("cli")
    assert main(["simulate", "--out", str(root / "sim"), "--suite", "clean",
                 "--seed", "3", "--count", "1"]) == 0
    trace = root / "sim" / "clean_0003_trace.json"
    assert trace.exists()
    assert main(["build-bank", "--trace", str(trace), "--out", str(root / "bank"),
                 "--set", "prior.sigma=1.0"]) == 0
    return {
        "root": root,
        "trace": trace,
        "gt": root / "sim" / "clean_0003_gt.json",
        "scenario": root / "sim" / "clean_0003_scenario.json",
        "bank": root / "bank" / "bank.json",
    }


def test_validate_ok(workspace):
    assert main(["validate", "--trace", str(workspace["trace"])]) == 0


def test_validate_missing_file_is_input_error(tmp_path):
    bad = tmp_path / "nope.json"
    bad.write_text("{}")
    assert main(["validate", "--trace", str(bad)]) == 2


def test_build_bank_empty_scene_exit_code(tmp_path):
    # a scene with flicker everywhere has no static pixels
    import anchorref.simulate as sim
    from anchorref.container import save_trace

    spec = sim.make_suite("clean", [0])[0]
    trace, _ = sim.generate(spec)
    for f in trace.frames[:10]:
        f.features.setflags(write=True)
        f.features[:] = np.random.default_rng(f.frame_index).standard_normal(f.features.shape)
    save_trace(
        type(trace)(frames=trace.frames[:10], queries=trace.queries), tmp_path / "t.json"
    )
    assert main(["build-bank", "--trace", str(tmp_path / "t.json"),
                 "--out", str(tmp_path / "bank"), "--set", "anchor.t0=10"]) == 3


def test_run_writes_trajectory_and_diagnostics(workspace):
    out = workspace["root"] / "run"
    code = main([
        "run", "--trace", str(workspace["trace"]), "--bank", str(workspace["bank"]),
        "--out", str(out), "--set", "prior.sigma=1.0", "--dump-prior", "--dump-gate",
    ])
    assert code == 0
    lines = (out / "trajectory.jsonl").read_text().splitlines()
    gt_doc = json.loads(workspace["gt"].read_text())
    assert len(lines) == len(gt_doc["frames"])
    rec = json.loads(lines[0])
    assert set(rec) == {"frame", "status", "box", "score", "gate_score", "mode"}
    assert (out / "diagnostics.jsonl").exists()
    assert (out / "prior.json").exists() and (out / "prior.bin").exists()
    assert (out / "gate.jsonl").exists()


def test_run_missing_bank_is_input_error(workspace, tmp_path):
    assert main(["run", "--trace", str(workspace["trace"]),
                 "--bank", str(tmp_path / "missing.json"),
                 "--out", str(tmp_path / "out")]) == 2


def test_run_rerun_identical_bytes(workspace):
    out_a = workspace["root"] / "det_a"
    out_b = workspace["root"] / "det_b"
    for out in (out_a, out_b):
        assert main(["run", "--trace", str(workspace["trace"]),
                     "--bank", str(workspace["bank"]), "--out", str(out),
                     "--set", "prior.sigma=1.0"]) == 0
    assert (out_a / "trajectory.jsonl").read_bytes() == (out_b / "trajectory.jsonl").read_bytes()
    assert (out_a / "diagnostics.jsonl").read_bytes() == (out_b / "diagnostics.jsonl").read_bytes()


def test_evaluate_formats(workspace, capsys):
    out = workspace["root"] / "run"
    if not (out / "trajectory.jsonl").exists():
        assert main(["run", "--trace", str(workspace["trace"]),
                     "--bank", str(workspace["bank"]), "--out", str(out),
                     "--set", "prior.sigma=1.0"]) == 0
    assert main(["evaluate", "--trajectory", str(out / "trajectory.jsonl"),
                 "--gt", str(workspace["gt"]), "--format", "json",
                 "--out", str(workspace["root"] / "eval")]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["mIoU"] == 1.0 and doc["RCL"] == 0.0
    assert (workspace["root"] / "eval" / "report.json").exists()

    assert main(["evaluate", "--trajectory", str(out / "trajectory.jsonl"),
                 "--gt", str(workspace["gt"]), "--format", "csv", "--tau-sweep"]) == 0
    csv_out = capsys.readouterr().out.splitlines()
    assert csv_out[0].startswith("IDF1,RCR,RCL,P@0.5")


def test_evaluate_length_mismatch(workspace, tmp_path):
    out = workspace["root"] / "run"
    truncated = tmp_path / "short.jsonl"
    lines = (out / "trajectory.jsonl").read_text().splitlines()[:-3]
    truncated.write_text("\n".join(lines) + "\n")
    assert main(["evaluate", "--trajectory", str(truncated),
                 "--gt", str(workspace["gt"])]) == 2


def test_simulate_scenario_regeneration_identical(workspace, tmp_path):
    assert main(["simulate", "--out", str(tmp_path), "--scenario",
                 str(workspace["scenario"])]) == 0
    a = (workspace["root"] / "sim" / "clean_0003_trace.bin").read_bytes()
    b = (tmp_path / "clean_0003_trace.bin").read_bytes()
    assert a == b


def test_ablate_small(capsys, tmp_path):
    assert main(["ablate", "--suite", "ablation", "--count", "2", "--seed", "0",
                 "--format", "csv", "--out", str(tmp_path)]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0].startswith("config,IDF1,RCR,RCL")
    assert [l.split(",")[0] for l in lines[1:]] == ["baseline", "+gating", "+prior", "full"]
    assert (tmp_path / "ablation.csv").exists()


def test_init_config(tmp_path):
    out = tmp_path / "c.conf"
    assert main(["init-config", "--out", str(out)]) == 0
    from anchorref.config import RunConfig, load_config

    assert load_config(out) == RunConfig()


def test_toy_text_embedding_deterministic():
    a = toy_text_embedding("the person near the doorway", 16)
    b = toy_text_embedding("the person near the doorway", 16)
    c = toy_text_embedding("a red car", 16)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert abs(np.linalg.norm(a.astype(np.float64)) - 1.0) < 1e-5


def test_unknown_set_key_is_input_error(workspace, tmp_path):
    assert main(["run", "--trace", str(workspace["trace"]),
                 "--bank", str(workspace["bank"]), "--out", str(tmp_path / "x"),
                 "--set", "bogus.key=1"]) == 2
