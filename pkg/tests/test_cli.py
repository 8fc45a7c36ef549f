"""Command-line interface: exit codes, reports, determinism, output formats.

Every test drives ``clvr.cli.main`` in process with an explicit argv, so the
suite exercises exactly what the console script runs without spawning
subprocesses.
"""

import hashlib
import json

import numpy as np
import pytest

from clvr import TensorMap, load_checkpoint, save_checkpoint
from clvr.cli import main

# Digest of the trajectory file written by `clvr synthesize` over the 12
# prompts below with SMALL_CONFIG and seed 7, frozen at first run.
SMALL_RUN_DIGEST = "15d9a0c5c3121eb2bfdd02db96266f4a"
SMALL_CONFIG = (
    "per_item_success_prob = 0.8\njudge_agreement_prob = 0.7\nretry_limit = 2\n"
)
HAND_DSL = "3[red]cat; 1[]box; @rel(1,on,2); @count"


def digest(path) -> str:
    return hashlib.blake2b(path.read_bytes(), digest_size=16).hexdigest()


@pytest.fixture()
def small_run(tmp_path):
    """Prompt list + engine config for a fast 12-episode synthesis."""
    prompts = tmp_path / "prompts.txt"
    prompts.write_text("".join(f"scene number {i}\n" for i in range(12)))
    config = tmp_path / "config.toml"
    config.write_text(SMALL_CONFIG)
    return prompts, config


# --------------------------------------------------------------- exit codes


def test_version_flag(capsys):
    assert main(["--version"]) == 0
    assert capsys.readouterr().out.startswith("clvr ")


def test_missing_command_is_a_usage_error():
    assert main([]) == 2
    assert main(["probe"]) == 2
    assert main(["no-such-command"]) == 2


def test_domain_errors_exit_one_with_a_single_line(capsys):
    assert main(["probe", "score", "--dsl", "this is not the DSL"]) == 1
    err = capsys.readouterr().err
    assert err.startswith("error: line 1, column 1")
    assert err.count("\n") == 1


def test_missing_input_file_is_a_domain_error(tmp_path, capsys):
    rc = main(["stats", "hist", "--traj", str(tmp_path / "absent.jsonl")])
    assert rc == 1
    assert capsys.readouterr().err.startswith("error: ")


# -------------------------------------------------------------------- probe


def test_probe_score_hand_value(capsys):
    # 4 nodes, 4 edges, 4 DSL words, one @count: 5·ln5 + 6
    assert main(["probe", "score", "--dsl", HAND_DSL]) == 0
    assert float(capsys.readouterr().out) == pytest.approx(14.047190, abs=5e-7)


def test_probe_score_weight_overrides(tmp_path, capsys):
    weights = tmp_path / "weights.json"
    weights.write_text(json.dumps({"c_count": 0.0}))
    rc = main(["probe", "score", "--dsl", HAND_DSL, "--weights", str(weights)])
    assert rc == 0
    assert float(capsys.readouterr().out) == pytest.approx(12.047190, abs=5e-7)


def test_probe_trim_reports_removals(capsys):
    rc = main(["probe", "trim", "--dsl", HAND_DSL, "--c-hi", "10"])
    assert rc == 0
    out = capsys.readouterr().out
    assert out.startswith("C_task 14.0472 -> ")
    assert "removal(s)" in out


def test_probe_fit_output_format(tmp_path, capsys):
    points = tmp_path / "points.csv"
    points.write_text(
        "x,y\n" + "".join(f"{x},{2.0 * x**1.5}\n" for x in (1, 2, 3, 4, 6))
    )
    assert main(["probe", "fit", "--points", str(points)]) == 0
    out = capsys.readouterr().out
    assert out.startswith("slope 1.500000  intercept 0.693147  r2 1.000000")
    assert "spearman 1.000000" in out


def test_probe_erank_from_values(capsys):
    rc = main(["probe", "erank", "--singular-values", "3,1"])
    assert rc == 0
    assert float(capsys.readouterr().out) == pytest.approx(1.3841454884616867)


def test_probe_stratify_then_auc(tmp_path, capsys):
    records = tmp_path / "records.csv"
    records.write_text(
        "prompt_id,c_task,word_count\n"
        + "".join(f"p{i:02d},{i},5\n" for i in range(20))
    )
    tiering = tmp_path / "tiering.json"
    rc = main(
        ["probe", "stratify", "--records", str(records), "--out", str(tiering)]
    )
    assert rc == 0
    assert "0.0000..18.0000" in capsys.readouterr().out

    scores = tmp_path / "scores.csv"
    scores.write_text(
        "prompt_id,seed,recall,pass\n"
        + "".join(
            f"p{i:02d},{seed},1.0,pass\n"
            for i in range(20)
            for seed in (42, 123, 456, 789)
        )
    )
    rc = main(
        ["probe", "auc", "--scores", str(scores), "--tiering", str(tiering)]
    )
    assert rc == 0
    # flat pass curve: trapezoid area is the median span 18 − 0
    assert "AUC_pass 18.000000" in capsys.readouterr().out


# -------------------------------------------------------------------- stats


def test_stats_wilson_benchmark(capsys):
    assert main(["stats", "wilson", "--p", "0.8645", "--n", "553"]) == 0
    out = capsys.readouterr().out
    assert "95% CI [0.833447, 0.890524], se 0.014554" in out


def test_stats_nfe(capsys):
    assert main(["stats", "nfe", "--steps", "28"]) == 0
    assert capsys.readouterr().out.strip() == "56"
    assert main(["stats", "nfe", "--steps", "4", "--no-cfg"]) == 0
    assert capsys.readouterr().out.strip() == "4"


def test_stats_speedup(capsys):
    assert main(["stats", "speedup", "--base", "287.0", "--fast", "25.5"]) == 0
    assert capsys.readouterr().out.strip() == "11.254902x"


# ------------------------------------------------------------------ engine


def test_synthesize_frozen_digest(tmp_path, small_run, capsys):
    prompts, config = small_run
    out = tmp_path / "a.jsonl"
    stats = tmp_path / "s.json"
    rc = main(
        [
            "synthesize",
            "--prompts",
            str(prompts),
            "--config",
            str(config),
            "--seed",
            "7",
            "--out",
            str(out),
            "--stats",
            str(stats),
        ]
    )
    assert rc == 0
    assert "retained 2/12 trajectories" in capsys.readouterr().out
    assert digest(out) == SMALL_RUN_DIGEST
    recorded = json.loads(stats.read_text())
    assert recorded["retained"] == 2
    assert recorded["discard_reasons"] == {
        "consensus_reject": 5,
        "passive_failure": 5,
    }


def test_synthesize_is_parallelism_invariant(tmp_path, small_run):
    prompts, config = small_run
    base_argv = ["synthesize", "--prompts", str(prompts), "--config", str(config), "--seed", "7"]
    one = tmp_path / "w1.jsonl"
    four = tmp_path / "w4.jsonl"
    assert main(base_argv + ["--out", str(one)]) == 0
    assert main(base_argv + ["--out", str(four), "--workers", "4"]) == 0
    assert one.read_bytes() == four.read_bytes()
    assert digest(one) == SMALL_RUN_DIGEST


def test_seed_env_var_used_only_without_flag(tmp_path, small_run, monkeypatch):
    prompts, config = small_run
    argv = ["synthesize", "--prompts", str(prompts), "--config", str(config)]

    env_out = tmp_path / "env.jsonl"
    monkeypatch.setenv("CLVR_SEED", "7")
    assert main(argv + ["--out", str(env_out)]) == 0
    assert digest(env_out) == SMALL_RUN_DIGEST

    flag_out = tmp_path / "flag.jsonl"
    monkeypatch.setenv("CLVR_SEED", "99")
    assert main(argv + ["--out", str(flag_out), "--seed", "7"]) == 0
    assert digest(flag_out) == SMALL_RUN_DIGEST


def test_invalid_seed_env_var(tmp_path, small_run, monkeypatch, capsys):
    prompts, config = small_run
    monkeypatch.setenv("CLVR_SEED", "not-a-number")
    rc = main(
        ["synthesize", "--prompts", str(prompts), "--config", str(config), "--out", str(tmp_path / "x.jsonl")]
    )
    assert rc == 1
    assert capsys.readouterr().err.startswith("error: ")


def test_synthesize_rejects_seed_in_config(tmp_path, small_run, capsys):
    prompts, _ = small_run
    config = tmp_path / "seeded.toml"
    config.write_text(SMALL_CONFIG + "master_seed = 3\n")
    rc = main(
        ["synthesize", "--prompts", str(prompts), "--config", str(config), "--out", str(tmp_path / "x.jsonl")]
    )
    assert rc == 1
    assert "comes from --seed" in capsys.readouterr().err


def test_infer_truncate_batch_pipeline(tmp_path, capsys):
    prompt = tmp_path / "prompt.txt"
    prompt.write_text("a red cube; a blue ball\n")
    config = tmp_path / "env.json"
    config.write_text(json.dumps({"per_item_success_prob": 1.0}))
    traj_file = tmp_path / "traj.jsonl"
    rc = main(
        [
            "infer",
            "--prompt-file",
            str(prompt),
            "--config",
            str(config),
            "--seed",
            "3",
            "--out",
            str(traj_file),
        ]
    )
    assert rc == 0
    assert "after 1 image(s), 2 step(s)" in capsys.readouterr().out

    sample_file = tmp_path / "sample.json"
    rc = main(
        ["truncate", "--traj", str(traj_file), "--t", "0", "--out", str(sample_file)]
    )
    assert rc == 0
    sample = json.loads(sample_file.read_text())
    assert sample["t"] == 0
    assert sample["context"][0] == {"text": "a red cube; a blue ball"}
    assert "image" not in sample["context"][-1]

    # the terminate step carries no image, so it is not a cut point
    assert main(["truncate", "--traj", str(traj_file), "--t", "1"]) == 1
    assert "lacks an image" in capsys.readouterr().err

    batch_file = tmp_path / "batch.jsonl"
    rc = main(
        [
            "batch",
            "--traj",
            str(traj_file),
            "--n",
            "4",
            "--i2i-weight",
            "0",
            "--seed",
            "0",
            "--out",
            str(batch_file),
        ]
    )
    assert rc == 0
    assert "4 t2i, 0 i2i" in capsys.readouterr().out
    lines = batch_file.read_text().splitlines()
    assert len(lines) == 4
    item = json.loads(lines[0])
    assert set(item) == {"t", "p_t2i", "p_i2i", "i_ref", "target"}
    assert item["t"] == 0


def test_reward_command(capsys):
    assert main(["reward", "--t", "0", "--t2i", "0.73"]) == 0
    assert float(capsys.readouterr().out) == 0.73
    assert main(["reward", "--t", "2", "--t2i", "0.6", "--i2i", "0.2"]) == 0
    assert float(capsys.readouterr().out) == pytest.approx(0.4)
    assert main(["reward", "--t", "1", "--t2i", "0.6"]) == 1  # missing edit score


# ----------------------------------------------------------------- checkpoints


def f32(values) -> np.ndarray:
    return np.asarray(values, dtype=np.float32).astype(np.float64)


def test_merge_and_norm_roundtrip(tmp_path, capsys):
    base = TensorMap({"w": f32([[1.0, 2.0], [3.0, 4.0]]), "b": f32([0.5, 0.5])})
    d = TensorMap({"w": f32([[0.5, 0.0], [0.0, 0.5]]), "b": f32([0.0, 0.0])})
    base_path, d_path = tmp_path / "base.dswm", tmp_path / "d.dswm"
    fused_path = tmp_path / "fused.dswm"
    save_checkpoint(base, base_path)
    save_checkpoint(d, d_path)

    rc = main(
        ["merge", "--base", str(base_path), "--delta", str(d_path), "--out", str(fused_path)]
    )
    assert rc == 0
    assert "fused 1 delta(s) over 2 tensor(s)" in capsys.readouterr().out
    fused = load_checkpoint(fused_path)
    np.testing.assert_array_equal(fused["w"], [[1.5, 2.0], [3.0, 4.5]])

    assert main(["norm", "--ref", str(base_path), "--other", str(fused_path)]) == 0
    shift = float(capsys.readouterr().out)
    expected = np.sqrt(0.5) / np.sqrt(1 + 4 + 9 + 16 + 0.25 + 0.25)
    assert shift == pytest.approx(expected, rel=1e-6)


def test_lora_expand(tmp_path, capsys):
    rng = np.random.default_rng(0)
    a = f32(rng.standard_normal((2, 3)))
    b = f32(rng.standard_normal((4, 2)))
    adapter_path = tmp_path / "adapter.dswm"
    save_checkpoint(TensorMap({"lora_A": a, "lora_B": b}), adapter_path)
    out_path = tmp_path / "dense.dswm"
    rc = main(
        [
            "lora-expand",
            "--adapter",
            str(adapter_path),
            "--target",
            "blk.w",
            "--alpha",
            "4",
            "--rank",
            "2",
            "--out",
            str(out_path),
        ]
    )
    assert rc == 0
    assert "expanded blk.w: 4x3 from rank 2" in capsys.readouterr().out
    dense = load_checkpoint(out_path)["blk.w"]
    np.testing.assert_allclose(dense, 2.0 * (b @ a), rtol=1e-6)


def test_lora_expand_requires_adapter_tensors(tmp_path, capsys):
    bad = tmp_path / "bad.dswm"
    save_checkpoint(TensorMap({"lora_A": f32(np.zeros((2, 3)))}), bad)
    rc = main(
        ["lora-expand", "--adapter", str(bad), "--target", "t", "--alpha", "4", "--rank", "2"]
    )
    assert rc == 1
    assert "lacks tensor 'lora_B'" in capsys.readouterr().err


# ------------------------------------------------------------------ geomlab


def test_geomlab_superpose_small_config(tmp_path, capsys):
    config = tmp_path / "sweep.json"
    config.write_text(
        json.dumps({"widths": [2, 4, 2], "n_probe": 4, "scales": [0.1, 0.05]})
    )
    rc = main(["geomlab", "superpose", "--config", str(config)])
    assert rc == 0
    out = capsys.readouterr().out
    assert out.startswith("slope ")
    assert "worst control error" in out


def test_geomlab_decouple_constructed(capsys, tmp_path):
    config = tmp_path / "mode.json"
    config.write_text(json.dumps({"mode": "constructed", "n_probe": 8}))
    rc = main(["geomlab", "decouple", "--config", str(config)])
    assert rc == 0
    out = capsys.readouterr().out
    assert out.startswith("constructed: median |cos| 0.000000")


def test_geomlab_truncation_sweep(tmp_path, capsys):
    config = tmp_path / "ode.json"
    config.write_text(json.dumps({"steps": 2000, "variations": [0.2, 0.1]}))
    rc = main(["geomlab", "truncation", "--config", str(config)])
    assert rc == 0
    out = capsys.readouterr().out
    assert "variation slope 1.0000" in out


def test_geomlab_truncation_rejects_double_sweep(tmp_path, capsys):
    config = tmp_path / "ode.json"
    config.write_text(json.dumps({"variations": [0.2], "widths": [0.1]}))
    rc = main(["geomlab", "truncation", "--config", str(config)])
    assert rc == 1
    assert "not both" in capsys.readouterr().err


def test_geomlab_truncation_single_gap(tmp_path, capsys):
    config = tmp_path / "ode.json"
    config.write_text(json.dumps({"steps": 2000, "variations": [], "level": 0.0, "variation": 0.0}))
    rc = main(["geomlab", "truncation", "--config", str(config)])
    assert rc == 0
    out = capsys.readouterr().out
    assert out.startswith("truncation gap ")
    assert float(out.split()[-1]) < 1e-8


# ------------------------------------------------------------------ reports


def test_report_write_and_validate(tmp_path, capsys):
    report = tmp_path / "report.json"
    argv = [
        "stats",
        "wilson",
        "--p",
        "0.8645",
        "--n",
        "553",
        "--report",
        str(report),
    ]
    assert main(argv) == 0
    obj = json.loads(report.read_text())
    assert set(obj) == {"tool_version", "command", "inputs_digest", "results"}
    assert obj["command"] == "stats wilson"
    assert obj["results"]["ci_low"] == pytest.approx(0.833447, abs=1e-6)
    capsys.readouterr()

    assert main(["report", str(report)]) == 0
    assert capsys.readouterr().out.startswith("ok: 'stats wilson' report")


def test_report_is_byte_deterministic(tmp_path):
    first, second = tmp_path / "r1.json", tmp_path / "r2.json"
    for path in (first, second):
        assert main(["stats", "nfe", "--steps", "28", "--report", str(path)]) == 0
    assert first.read_bytes() == second.read_bytes()


def test_report_validation_rejects_tampering(tmp_path, capsys):
    report = tmp_path / "report.json"
    assert main(["stats", "nfe", "--steps", "28", "--report", str(report)]) == 0

    obj = json.loads(report.read_text())
    obj["inputs_digest"] = obj["inputs_digest"][:-1] + "x"
    report.write_text(json.dumps(obj))
    assert main(["report", str(report)]) == 1
    assert "32 hex characters" in capsys.readouterr().err

    obj = json.loads(report.read_text())
    del obj["results"]
    report.write_text(json.dumps(obj))
    assert main(["report", str(report)]) == 1
    assert "exactly the keys" in capsys.readouterr().err
