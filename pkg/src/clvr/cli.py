"""Command-line front end: every capability behind one `clvr` entry point.

Subcommands
    synthesize   run the simulated data engine over a prompt list
    infer        closed-loop inference on one prompt
    truncate     cut one training sample out of a trajectory file
    batch        assemble an RL batch with proxy prompts
    reward       dual-path proxy reward for one sample's scores
    merge        apply delta checkpoints onto a base container
    lora-expand  densify a low-rank adapter into a dense delta
    norm         relative Frobenius shift between two containers
    geomlab      superpose | decouple | truncation experiments
    probe        score | stratify | trim | auc | erank | fit analytics
    stats        wilson | nfe | hist | speedup summaries
    report       validate a report file written by --report

Every subcommand accepts ``--report PATH`` and then writes a JSON document
{"tool_version", "command", "inputs_digest", "results"}; the digest hashes
the input files together with the invocation parameters, which makes the
report self-describing. Outputs are deterministic: the same argv over the
same input files produces byte-identical files.

Exit codes: 0 on success, 1 on a domain error (one ``error: ...`` line on
stderr), 2 on a usage error. Where a command is seeded, ``--seed`` wins,
the CLVR_SEED environment variable is honored when the flag is absent, and
a documented per-command default applies last.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
from collections import Counter
from pathlib import Path

import numpy as np

try:  # Python 3.11+
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - version shim
    import tomli as tomllib

from . import __version__
from .alignment import RewardInputs, RLConfig, TaskMixWeights, build_rl_batch, proxy_reward
from .container import load_checkpoint, save_checkpoint
from .controller import run_inference, synthesize_dataset
from .merge import LoraAdapter, apply_merge, expand_lora, relative_frobenius
from .odelab import OdeSetup, truncation_gap, variation_sweep, width_sweep
from .perturbation import (
    TRAINED_DECOUPLING_BOUND,
    constructed_circle_deltas,
    increment_cosine,
    superposition_sweep,
    trained_circle_deltas,
)
from .probe import (
    Tiering,
    aggregate_prompts,
    auc_pass,
    effective_rank,
    fit_power_law,
    i_eff,
    stratify,
    tier_curve,
)
from .rng import stream
from .semgraph import ComplexityWeights, c_task, node_edge_counts, parse_dsl, r_extra, trim
from .simenv import SimEnv, SimEnvConfig
from .stats import NfeConfig, binomial_summary, histogram, nfe, speedup
from .trajectory import MAX_ITERATIONS, parse_trajectory_jsonl, serialize_jsonl, truncate_at

SEED_ENV_VAR = "CLVR_SEED"

#: argparse attributes that are plumbing, not invocation parameters.
_NON_PARAM_KEYS = ("handler", "command", "report")


# --------------------------------------------------------------------- I/O


def _digest(data: bytes) -> str:
    return hashlib.blake2b(data, digest_size=16).hexdigest()


def _resolve_seed(args, default: int = 0) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV_VAR)
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ValueError(f"{SEED_ENV_VAR} must be an integer, got {env!r}") from None
    return default


def _load_config(path) -> dict:
    """A TOML (by .toml suffix) or JSON table; None means empty."""
    if path is None:
        return {}
    p = Path(path)
    if p.suffix.lower() == ".toml":
        with open(p, "rb") as fh:
            table = tomllib.load(fh)
    else:
        table = json.loads(p.read_text(encoding="utf-8"))
    if not isinstance(table, dict):
        raise ValueError(f"config {p} must hold a table at top level")
    return table


def _only_keys(table: dict, allowed, label: str) -> dict:
    stray = set(table) - set(allowed)
    if stray:
        raise ValueError(f"unknown {label} config keys: {sorted(stray)}")
    return dict(table)


def _load_weights(path) -> ComplexityWeights:
    table = _only_keys(
        _load_config(path), ComplexityWeights.__dataclass_fields__, "weight"
    )
    return ComplexityWeights(**table)


def _read_prompts(path) -> list[str]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    prompts = [ln.strip() for ln in lines if ln.strip()]
    if not prompts:
        raise ValueError(f"no prompts found in {path}")
    return prompts


def _read_csv_rows(path, columns) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ValueError(f"{path} is empty")
        missing = [c for c in columns if c not in reader.fieldnames]
        if missing:
            raise ValueError(f"{path} lacks column(s) {missing}; found {reader.fieldnames}")
        return list(reader)


def _write_json(path, payload: dict) -> None:
    Path(path).write_text(
        json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )


def _write_report(args, results: dict, input_files: dict) -> None:
    params = {k: v for k, v in vars(args).items() if k not in _NON_PARAM_KEYS}
    digests = {
        label: _digest(Path(path).read_bytes())
        for label, path in sorted(input_files.items())
    }
    basis = json.dumps(
        {"files": digests, "params": params},
        sort_keys=True,
        separators=(",", ":"),
        default=str,
    ).encode("utf-8")
    _write_json(
        args.report,
        {
            "tool_version": __version__,
            "command": args.command,
            "inputs_digest": _digest(basis),
            "results": results,
        },
    )


# ------------------------------------------------------------ data engine

#: Config keys consumed by the engine itself rather than the environment.
_ENGINE_KEYS = ("retry_limit", "workers", "max_iterations")


def _split_engine_config(table: dict):
    """Partition a config table into SimEnvConfig kwargs and engine knobs."""
    env_keys = set(SimEnvConfig.__dataclass_fields__) - {"master_seed"}
    env_table: dict = {}
    engine: dict = {}
    for key, value in table.items():
        if key in env_keys:
            env_table[key] = value
        elif key in _ENGINE_KEYS:
            engine[key] = value
        elif key == "master_seed":
            raise ValueError("the environment seed comes from --seed, not the config")
        else:
            raise ValueError(f"unknown config key {key!r}")
    return env_table, engine


def _cmd_synthesize(args):
    seed = _resolve_seed(args)
    prompts = _read_prompts(args.prompts)
    env_table, engine = _split_engine_config(_load_config(args.config))
    env = SimEnv(SimEnvConfig(master_seed=seed, **env_table))
    workers = args.workers if args.workers is not None else engine.get("workers", 1)
    trajectories, stats = synthesize_dataset(
        prompts,
        env.adapters(),
        engine.get("retry_limit", 2),
        seed,
        workers=workers,
        max_iterations=engine.get("max_iterations", MAX_ITERATIONS),
    )
    Path(args.out).write_bytes(serialize_jsonl(trajectories))
    if args.stats:
        _write_json(args.stats, stats.to_dict())
    reasons = ", ".join(f"{k} {v}" for k, v in sorted(stats.discard_reasons.items()))
    print(
        f"retained {stats.retained}/{stats.attempted} trajectories -> {args.out}"
        f" (discards: {reasons or 'none'})"
    )
    files = {"prompts": args.prompts}
    if args.config:
        files["config"] = args.config
    return stats.to_dict(), files


def _cmd_infer(args):
    seed = _resolve_seed(args)
    prompt = Path(args.prompt_file).read_text(encoding="utf-8").strip()
    if not prompt:
        raise ValueError(f"{args.prompt_file} holds no prompt text")
    env_table, engine = _split_engine_config(_load_config(args.config))
    max_iters = (
        args.max_iters
        if args.max_iters is not None
        else engine.get("max_iterations", MAX_ITERATIONS)
    )
    env = SimEnv(SimEnvConfig(master_seed=seed, **env_table))
    canvas, traj = run_inference(prompt, env.adapters(), max_iters, master_seed=seed)
    if args.out:
        Path(args.out).write_bytes(serialize_jsonl([traj]))
    if canvas is None:
        print(f"terminated without an image after {len(traj.steps)} step(s)")
    else:
        print(
            f"final canvas {canvas.id} after {len(traj.image_steps)} image(s),"
            f" {len(traj.steps)} step(s)"
        )
    results = {
        "canvas": canvas.id if canvas else None,
        "images": len(traj.image_steps),
        "steps": len(traj.steps),
    }
    files = {"prompt": args.prompt_file}
    if args.config:
        files["config"] = args.config
    return results, files


def _pick_trajectory(trajectories, wanted):
    if wanted is None:
        if len(trajectories) != 1:
            raise ValueError(
                f"file holds {len(trajectories)} trajectories; pick one with --id"
            )
        return trajectories[0]
    for traj in trajectories:
        if traj.id == wanted:
            return traj
    raise ValueError(f"no trajectory with id {wanted!r}")


def _sample_dict(sample) -> dict:
    context = [
        {"text": item} if isinstance(item, str) else {"image": item.to_dict()}
        for item in sample.context
    ]
    return {"t": sample.t, "context": context, "target": sample.target.to_dict()}


def _cmd_truncate(args):
    trajectories = parse_trajectory_jsonl(Path(args.traj).read_bytes())
    traj = _pick_trajectory(trajectories, args.id)
    sample = truncate_at(traj, args.t)
    payload = _sample_dict(sample)
    if args.out:
        _write_json(args.out, payload)
    print(
        f"sample at t={sample.t}: {len(sample.context_texts)} text(s),"
        f" {len(sample.context_images)} image(s), target {sample.target.id}"
    )
    return payload, {"traj": args.traj}


def _cmd_batch(args):
    seed = _resolve_seed(args)
    trajectories = parse_trajectory_jsonl(Path(args.traj).read_bytes())
    buckets = tuple(float(w) for w in args.bucket_weights.split(","))
    weights = TaskMixWeights(args.t2i_weight, args.i2i_weight, buckets)
    items = build_rl_batch(trajectories, stream(seed, "batch"), weights, n=args.n)
    lines = [
        json.dumps(item.to_dict(), ensure_ascii=False, separators=(",", ":"))
        for item in items
    ]
    Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    kinds = Counter("t2i" if item.sample.t == 0 else "i2i" for item in items)
    print(
        f"assembled {len(items)} item(s)"
        f" ({kinds.get('t2i', 0)} t2i, {kinds.get('i2i', 0)} i2i) -> {args.out}"
    )
    results = {
        "n": len(items),
        "t2i_items": kinds.get("t2i", 0),
        "i2i_items": kinds.get("i2i", 0),
        "rl_config": RLConfig().to_dict(),
    }
    return results, {"traj": args.traj}


def _cmd_reward(args):
    value = proxy_reward(RewardInputs(args.t, args.t2i, args.i2i))
    print(value)
    return {"t": args.t, "r_t2i": args.t2i, "r_i2i": args.i2i, "reward": value}, {}


# ----------------------------------------------------------------- merging


def _cmd_merge(args):
    base = load_checkpoint(args.base)
    deltas = [load_checkpoint(path) for path in args.delta]
    fused = apply_merge(base, deltas)
    save_checkpoint(fused, args.out)
    shift = relative_frobenius(base, fused)
    print(
        f"fused {len(deltas)} delta(s) over {len(base)} tensor(s) -> {args.out}"
        f" (relative shift {shift:.6g})"
    )
    results = {
        "tensors": len(base),
        "deltas": len(deltas),
        "global_relative_shift": shift,
    }
    files = {"base": args.base}
    files.update({f"delta{i}": path for i, path in enumerate(args.delta)})
    return results, files


def _cmd_lora_expand(args):
    tm = load_checkpoint(args.adapter)
    for name in ("lora_A", "lora_B"):
        if name not in tm:
            raise ValueError(f"adapter {args.adapter} lacks tensor {name!r}")
    adapter = LoraAdapter(args.target, tm["lora_A"], tm["lora_B"], args.alpha, args.rank)
    dense = expand_lora(adapter)
    mat = dense[args.target]
    if args.out:
        save_checkpoint(dense, args.out)
    fro = float(np.linalg.norm(mat))
    print(
        f"expanded {args.target}: {mat.shape[0]}x{mat.shape[1]} from rank {args.rank}"
        f" (frobenius norm {fro:.6g})"
    )
    results = {
        "target": args.target,
        "shape": list(mat.shape),
        "rank": args.rank,
        "alpha": args.alpha,
        "frobenius_norm": fro,
    }
    return results, {"adapter": args.adapter}


def _cmd_norm(args):
    shift = relative_frobenius(load_checkpoint(args.ref), load_checkpoint(args.other))
    print(shift)
    return {"relative_shift": shift}, {"ref": args.ref, "other": args.other}


# ---------------------------------------------------------------- geomlab


def _cmd_geo_superpose(args):
    seed = _resolve_seed(args, default=5)
    table = _only_keys(
        _load_config(args.config), ("widths", "n_probe", "scales"), "superpose"
    )
    for key in ("widths", "scales"):
        if key in table:
            table[key] = tuple(table[key])
    sweep = superposition_sweep(seed=seed, **table)
    print(
        f"slope {sweep.slope:.4f} over {len(sweep.scales)} scale(s);"
        f" worst control error {max(sweep.control_errors):.3e}"
    )
    files = {"config": args.config} if args.config else {}
    return sweep.to_dict(), files


_TRAINED_KEYS = (
    "widths",
    "tube_offset",
    "rotate_angle",
    "base_steps",
    "finetune_steps",
    "lr",
    "n_train",
    "n_probe",
)
_CONSTRUCTED_KEYS = ("epsilon", "n_probe")


def _cmd_geo_decouple(args):
    table = _load_config(args.config)
    mode = table.pop("mode", "trained")
    if mode == "trained":
        seed = _resolve_seed(args, default=13)
        kwargs = _only_keys(table, _TRAINED_KEYS, "decouple")
        if "widths" in kwargs:
            kwargs["widths"] = tuple(kwargs["widths"])
        net, d_distill, d_align, probe_x = trained_circle_deltas(seed=seed, **kwargs)
    elif mode == "constructed":
        seed = _resolve_seed(args, default=0)
        kwargs = _only_keys(table, _CONSTRUCTED_KEYS, "decouple")
        net, d_distill, d_align, probe_x = constructed_circle_deltas(seed=seed, **kwargs)
    else:
        raise ValueError(f"unknown decouple mode {mode!r}")
    stats = increment_cosine(net, d_distill, d_align, probe_x)
    print(
        f"{mode}: median |cos| {stats.median_abs:.6f}, max {stats.max_abs:.6f}"
        f" over {len(stats.cosines)} probe(s)"
    )
    results = {
        "mode": mode,
        "cosines": list(stats.cosines),
        "median_abs": stats.median_abs,
        "mean_abs": stats.mean_abs,
        "max_abs": stats.max_abs,
        "excluded": stats.excluded,
    }
    if mode == "trained":
        results["registered_bound"] = TRAINED_DECOUPLING_BOUND
    files = {"config": args.config} if args.config else {}
    return results, files


_ODE_KEYS = (
    "contraction_rate",
    "x1",
    "direction",
    "window",
    "level",
    "variation",
    "steps",
)


def _default_truncation_table() -> dict:
    return {
        "contraction_rate": 1e-6,
        "x1": [1.0, 0.5],
        "direction": [0.0, 1.0],
        "window": [0.4, 0.6],
        "level": 0.0,
        "variation": 0.5,
        "steps": 20000,
        "variations": [0.5, 0.25, 0.125, 0.0625, 0.05],
    }


def _cmd_geo_truncation(args):
    table = {**_default_truncation_table(), **_load_config(args.config)}
    variations = table.pop("variations", None)
    widths = table.pop("widths", None)
    if variations and widths:
        raise ValueError("sweep either 'variations' or 'widths', not both")
    kwargs = _only_keys(table, _ODE_KEYS, "truncation")
    for key in ("x1", "direction", "window"):
        kwargs[key] = tuple(kwargs[key])
    setup = OdeSetup(**kwargs)
    files = {"config": args.config} if args.config else {}
    if not variations and not widths:
        gap = truncation_gap(setup)
        print(f"truncation gap {gap:.6e}")
        return {"gap": gap}, files
    if variations:
        axis, values = "variation", [float(v) for v in variations]
        gaps = list(variation_sweep(setup, values))
    else:
        axis, values = "width", [float(w) for w in widths]
        gaps = list(width_sweep(setup, values))
    slope = None
    if len(gaps) >= 2 and min(gaps) > 0.0:
        slope = float(np.polyfit(np.log(values), np.log(gaps), 1)[0])
    shown = "n/a" if slope is None else f"{slope:.4f}"
    print(f"gaps {', '.join(f'{g:.4e}' for g in gaps)}; {axis} slope {shown}")
    return {"axis": axis, "values": values, "gaps": gaps, "slope": slope}, files


# ------------------------------------------------------------------ probe


def _dsl_text(args) -> str:
    if args.dsl is not None:
        return args.dsl
    return Path(args.dsl_file).read_text(encoding="utf-8")


def _dsl_files(args) -> dict:
    files = {}
    if args.dsl_file:
        files["dsl"] = args.dsl_file
    if args.weights:
        files["weights"] = args.weights
    return files


def _cmd_probe_score(args):
    graph = parse_dsl(_dsl_text(args))
    weights = _load_weights(args.weights)
    n, e_attr, e = node_edge_counts(graph)
    score = c_task(graph, weights, args.log_base)
    print(score)
    results = {
        "c_task": score,
        "n": n,
        "e_attr": e_attr,
        "e": e,
        "r_extra": r_extra(graph, weights),
        "word_count": graph.word_count,
        "graph": graph.to_dict(),
    }
    return results, _dsl_files(args)


def _interval_to_json(interval) -> list:
    return [None if math.isinf(v) else v for v in interval]


def _interval_from_json(pair, infinities=(-math.inf, math.inf)) -> tuple:
    lo, hi = pair
    return (
        infinities[0] if lo is None else float(lo),
        infinities[1] if hi is None else float(hi),
    )


def _cmd_probe_stratify(args):
    rows = _read_csv_rows(args.records, ("prompt_id", "c_task", "word_count"))
    records = [
        (r["prompt_id"], float(r["c_task"]), float(r["word_count"])) for r in rows
    ]
    intervals = None
    if args.intervals:
        loaded = json.loads(Path(args.intervals).read_text(encoding="utf-8"))
        intervals = [_interval_from_json(pair) for pair in loaded]
    tiering = stratify(records, intervals)
    payload = {
        "tiers": [list(t) for t in tiering.tiers],
        "intervals": [_interval_to_json(iv) for iv in tiering.intervals],
        "medians": list(tiering.medians),
        "flagged": [list(f) for f in tiering.flagged],
    }
    if args.out:
        _write_json(args.out, payload)
    print(
        f"stratified {len(records)} record(s); tier medians"
        f" {tiering.medians[0]:.4f}..{tiering.medians[-1]:.4f},"
        f" {len(tiering.flagged)} flagged"
    )
    files = {"records": args.records}
    if args.intervals:
        files["intervals"] = args.intervals
    return payload, files


def _cmd_probe_trim(args):
    graph = parse_dsl(_dsl_text(args))
    weights = _load_weights(args.weights)
    before = c_task(graph, weights)
    log: list = []
    trimmed = trim(
        graph, ((args.c_lo, args.c_hi), (args.w_lo, args.w_hi)), weights, log=log
    )
    after = c_task(trimmed, weights)
    print(f"C_task {before:.4f} -> {after:.4f} after {len(log)} removal(s)")
    results = {
        "c_task_before": before,
        "c_task_after": after,
        "removals": len(log),
        "graph": trimmed.to_dict(),
    }
    return results, _dsl_files(args)


def _load_tiering(path) -> Tiering:
    d = json.loads(Path(path).read_text(encoding="utf-8"))
    try:
        return Tiering(
            tiers=tuple(tuple(t) for t in d["tiers"]),
            intervals=tuple(_interval_from_json(p, (0.0, math.inf)) for p in d["intervals"]),
            medians=tuple(float(m) for m in d["medians"]),
            flagged=tuple((int(k), str(pid)) for k, pid in d.get("flagged", ())),
        )
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed tiering file {path}: {exc}") from exc


def _parse_pass(value: str) -> bool:
    v = value.strip().lower()
    if v in ("1", "true", "yes", "pass"):
        return True
    if v in ("0", "false", "no", "fail"):
        return False
    raise ValueError(f"bad pass value {value!r}")


def _cmd_probe_auc(args):
    rows = _read_csv_rows(args.scores, ("prompt_id", "seed", "recall", "pass"))
    scored = [
        (r["prompt_id"], int(r["seed"]), float(r["recall"]), _parse_pass(r["pass"]))
        for r in rows
    ]
    tiering = _load_tiering(args.tiering)
    per_prompt = aggregate_prompts(
        scored, images_per_prompt=args.images_per_prompt, mode=args.mode
    )
    curve = tier_curve(tiering, per_prompt)
    area = auc_pass(curve)
    print(f"AUC_pass {area:.6f}")
    results = {
        "auc_pass": area,
        "points": [list(pt) for pt in curve.points],
        "recalls": list(curve.recalls),
    }
    return results, {"scores": args.scores, "tiering": args.tiering}


def _cmd_probe_erank(args):
    if args.singular_values is not None:
        sv = [float(v) for v in args.singular_values.split(",")]
        value = effective_rank(sv)
        print(value)
        return {"effective_rank": value, "singular_values": sv}, {}
    ckpt = load_checkpoint(args.ckpt)
    value = i_eff(ckpt, args.filter)
    print(value)
    return {"i_eff": value, "filter": args.filter}, {"ckpt": args.ckpt}


def _read_points(path) -> list[tuple[float, float]]:
    points: list[tuple[float, float]] = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.reader(fh):
            cells = [c.strip() for c in row if c.strip()]
            if not cells:
                continue
            try:
                x, y = float(cells[0]), float(cells[1])
            except (ValueError, IndexError):
                if not points:  # tolerated header line
                    continue
                raise ValueError(f"{path}: bad point row {row!r}") from None
            points.append((x, y))
    if not points:
        raise ValueError(f"no points found in {path}")
    return points


def _cmd_probe_fit(args):
    fit = fit_power_law(_read_points(args.points))
    print(
        f"slope {fit.slope:.6f}  intercept {fit.intercept:.6f}"
        f"  r2 {fit.r_squared:.6f}  spearman {fit.spearman_rho:.6f}"
    )
    return fit.to_dict(), {"points": args.points}


# ------------------------------------------------------------------ stats


def _cmd_stats_wilson(args):
    summary = binomial_summary(args.p, args.n, args.confidence)
    print(
        f"p {summary.p_hat} n {summary.n}: {args.confidence:.0%} CI"
        f" [{summary.ci_low:.6f}, {summary.ci_high:.6f}], se {summary.se:.6f}"
    )
    results = {
        "p_hat": summary.p_hat,
        "n": summary.n,
        "confidence": summary.confidence,
        "se": summary.se,
        "ci_low": summary.ci_low,
        "ci_high": summary.ci_high,
    }
    return results, {}


def _cmd_stats_nfe(args):
    total = nfe(NfeConfig(args.steps, args.cfg, args.iters))
    print(total)
    results = {"steps": args.steps, "cfg": args.cfg, "iterations": args.iters, "nfe": total}
    return results, {}


def _cmd_stats_hist(args):
    trajectories = parse_trajectory_jsonl(Path(args.traj).read_bytes())
    h = histogram(trajectories)
    for k in sorted(h.counts):
        print(f"{k}\t{h.counts[k]}")
    print(f"total\t{h.total}")
    return {"counts": h.to_dict(), "total": h.total}, {"traj": args.traj}


def _cmd_stats_speedup(args):
    ratio = speedup(args.base, args.fast)
    print(f"{ratio:.6f}x")
    return {"base_seconds": args.base, "fast_seconds": args.fast, "speedup": ratio}, {}


# ----------------------------------------------------------------- report

_REPORT_KEYS = ("tool_version", "command", "inputs_digest", "results")


def _cmd_report(args):
    obj = json.loads(Path(args.path).read_text(encoding="utf-8"))
    if not isinstance(obj, dict) or sorted(obj) != sorted(_REPORT_KEYS):
        raise ValueError(f"{args.path}: a report has exactly the keys {list(_REPORT_KEYS)}")
    for key in ("tool_version", "command"):
        if not isinstance(obj[key], str) or not obj[key]:
            raise ValueError(f"{args.path}: {key} must be a nonempty string")
    digest = obj["inputs_digest"]
    hex_chars = set("0123456789abcdef")
    if not (isinstance(digest, str) and len(digest) == 32 and set(digest) <= hex_chars):
        raise ValueError(f"{args.path}: inputs_digest must be 32 hex characters")
    if not isinstance(obj["results"], dict):
        raise ValueError(f"{args.path}: results must be a table")
    print(
        f"ok: {obj['command']!r} report from tool version {obj['tool_version']}"
        f" (digest {digest[:8]}...)"
    )
    results = {
        "tool_version": obj["tool_version"],
        "command": obj["command"],
        "inputs_digest": digest,
    }
    return results, {"path": args.path}


# ----------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="clvr",
        description="Desk-scale toolkit for closed-loop visual generation pipelines.",
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )

    report = argparse.ArgumentParser(add_help=False)
    report.add_argument(
        "--report", metavar="PATH", default=None, help="write a JSON report to PATH"
    )
    seeded = argparse.ArgumentParser(add_help=False)
    seeded.add_argument(
        "--seed",
        type=int,
        default=None,
        help=f"master seed (default: {SEED_ENV_VAR} or the command's documented default)",
    )

    sub = parser.add_subparsers(metavar="COMMAND", required=True)

    p = sub.add_parser(
        "synthesize",
        parents=[report, seeded],
        help="run the simulated data engine over a prompt list",
    )
    p.add_argument("--prompts", required=True, help="text file, one prompt per line")
    p.add_argument("--config", default=None, help="engine config (TOML or JSON)")
    p.add_argument("--out", required=True, help="output trajectory JSONL")
    p.add_argument("--stats", default=None, help="write synthesis statistics JSON")
    p.add_argument(
        "--workers", type=int, default=None, help="thread count (default: config or 1)"
    )
    p.set_defaults(handler=_cmd_synthesize, command="synthesize")

    p = sub.add_parser(
        "infer", parents=[report, seeded], help="closed-loop inference on one prompt"
    )
    p.add_argument(
        "--prompt-file", required=True, help="file whose stripped contents are the prompt"
    )
    p.add_argument(
        "--max-iters",
        type=int,
        default=None,
        help=f"image budget (default: config or {MAX_ITERATIONS})",
    )
    p.add_argument("--config", default=None, help="environment config (TOML or JSON)")
    p.add_argument("--out", default=None, help="write the trajectory as JSONL")
    p.set_defaults(handler=_cmd_infer, command="infer")

    p = sub.add_parser(
        "truncate", parents=[report], help="cut one training sample from a trajectory"
    )
    p.add_argument("--traj", required=True, help="trajectory JSONL")
    p.add_argument(
        "--id", default=None, help="trajectory id (defaults to the only one in the file)"
    )
    p.add_argument("--t", type=int, required=True, help="image step to cut at")
    p.add_argument("--out", default=None, help="write the sample as JSON")
    p.set_defaults(handler=_cmd_truncate, command="truncate")

    p = sub.add_parser(
        "batch", parents=[report, seeded], help="assemble an RL batch with proxy prompts"
    )
    p.add_argument("--traj", required=True, help="trajectory JSONL")
    p.add_argument("--n", type=int, default=16, help="items per batch")
    p.add_argument("--out", required=True, help="output batch JSONL")
    p.add_argument("--t2i-weight", type=float, default=1.0)
    p.add_argument("--i2i-weight", type=float, default=1.0)
    p.add_argument(
        "--bucket-weights",
        default="1,1,1,1",
        help="comma-separated weights for 1, 2, 3, >=4 prior images",
    )
    p.set_defaults(handler=_cmd_batch, command="batch")

    p = sub.add_parser(
        "reward", parents=[report], help="dual-path proxy reward for one sample"
    )
    p.add_argument("--t", type=int, required=True, help="step index of the sample")
    p.add_argument("--t2i", type=float, required=True, help="scene score in [0, 1]")
    p.add_argument(
        "--i2i", type=float, default=None, help="edit score in [0, 1] (required when t > 0)"
    )
    p.set_defaults(handler=_cmd_reward, command="reward")

    p = sub.add_parser(
        "merge", parents=[report], help="apply delta checkpoints onto a base container"
    )
    p.add_argument("--base", required=True, help="base container")
    p.add_argument(
        "--delta",
        action="append",
        required=True,
        help="delta container (repeatable, applied in order)",
    )
    p.add_argument("--out", required=True, help="fused container")
    p.set_defaults(handler=_cmd_merge, command="merge")

    p = sub.add_parser(
        "lora-expand",
        parents=[report],
        help="densify a low-rank adapter into a dense delta",
    )
    p.add_argument(
        "--adapter",
        required=True,
        help="container with tensors 'lora_A' (r x n) and 'lora_B' (m x r)",
    )
    p.add_argument("--target", required=True, help="name of the emitted delta tensor")
    p.add_argument("--alpha", type=float, required=True, help="adapter scale numerator")
    p.add_argument("--rank", type=int, required=True, help="adapter rank")
    p.add_argument("--out", default=None, help="write the dense delta as a container")
    p.set_defaults(handler=_cmd_lora_expand, command="lora-expand")

    p = sub.add_parser(
        "norm",
        parents=[report],
        help="relative Frobenius shift between two containers",
    )
    p.add_argument("--ref", required=True, help="reference container (denominator)")
    p.add_argument("--other", required=True, help="container to compare")
    p.set_defaults(handler=_cmd_norm, command="norm")

    geo = sub.add_parser("geomlab", help="geometric validation experiments")
    geo_sub = geo.add_subparsers(metavar="EXPERIMENT", required=True)
    p = geo_sub.add_parser(
        "superpose",
        parents=[report, seeded],
        help="superposition error across delta scales (seed default 5)",
    )
    p.add_argument("--config", default=None, help="keys: widths, n_probe, scales")
    p.set_defaults(handler=_cmd_geo_superpose, command="geomlab superpose")
    p = geo_sub.add_parser(
        "decouple",
        parents=[report, seeded],
        help="orthogonality of distill/align increments (seed default 13)",
    )
    p.add_argument(
        "--config",
        default=None,
        help="keys: mode (trained|constructed) plus that mode's parameters",
    )
    p.set_defaults(handler=_cmd_geo_decouple, command="geomlab decouple")
    p = geo_sub.add_parser(
        "truncation",
        parents=[report, seeded],
        help="single-point merge truncation gap (deterministic; seed unused)",
    )
    p.add_argument(
        "--config",
        default=None,
        help="OdeSetup fields plus a 'variations' or 'widths' sweep"
        " (both empty -> one gap)",
    )
    p.set_defaults(handler=_cmd_geo_truncation, command="geomlab truncation")

    pr = sub.add_parser("probe", help="semantic-complexity probe analytics")
    pr_sub = pr.add_subparsers(metavar="ANALYSIS", required=True)
    p = pr_sub.add_parser("score", parents=[report], help="C_task of one DSL prompt")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--dsl", help="prompt text in the structured DSL")
    src.add_argument("--dsl-file", help="file holding the DSL prompt")
    p.add_argument("--weights", default=None, help="complexity-weight overrides (TOML/JSON)")
    p.add_argument("--log-base", type=float, default=None, help="logarithm base (default e)")
    p.set_defaults(handler=_cmd_probe_score, command="probe score")
    p = pr_sub.add_parser(
        "stratify", parents=[report], help="partition scored prompts into ten tiers"
    )
    p.add_argument(
        "--records", required=True, help="CSV with header prompt_id,c_task,word_count"
    )
    p.add_argument(
        "--intervals",
        default=None,
        help="JSON list of 10 [lo, hi] word intervals (null = unbounded)",
    )
    p.add_argument("--out", default=None, help="write the tiering as JSON")
    p.set_defaults(handler=_cmd_probe_stratify, command="probe stratify")
    p = pr_sub.add_parser(
        "trim", parents=[report], help="trim a DSL prompt into a target window"
    )
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--dsl", help="prompt text in the structured DSL")
    src.add_argument("--dsl-file", help="file holding the DSL prompt")
    p.add_argument("--c-lo", type=float, default=None, help="target score minimum")
    p.add_argument("--c-hi", type=float, default=None, help="target score maximum")
    p.add_argument("--w-lo", type=float, default=None, help="word-count minimum")
    p.add_argument("--w-hi", type=float, default=None, help="word-count maximum")
    p.add_argument("--weights", default=None, help="complexity-weight overrides (TOML/JSON)")
    p.set_defaults(handler=_cmd_probe_trim, command="probe trim")
    p = pr_sub.add_parser(
        "auc", parents=[report], help="area under the tier pass curve"
    )
    p.add_argument(
        "--scores", required=True, help="CSV with header prompt_id,seed,recall,pass"
    )
    p.add_argument(
        "--tiering", required=True, help="tiering JSON from 'probe stratify --out'"
    )
    p.add_argument("--images-per-prompt", type=int, default=4)
    p.add_argument("--mode", choices=("fraction", "any"), default="fraction")
    p.set_defaults(handler=_cmd_probe_auc, command="probe auc")
    p = pr_sub.add_parser("erank", parents=[report], help="entropy effective rank")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--ckpt", help="container; reports the median over its matrices")
    src.add_argument(
        "--singular-values", help="comma-separated spectrum for a direct computation"
    )
    p.add_argument("--filter", default=None, help="regex over tensor names (with --ckpt)")
    p.set_defaults(handler=_cmd_probe_erank, command="probe erank")
    p = pr_sub.add_parser(
        "fit", parents=[report], help="power-law fit of (capacity, AUC) points"
    )
    p.add_argument(
        "--points", required=True, help="CSV of x,y rows (an optional header is skipped)"
    )
    p.set_defaults(handler=_cmd_probe_fit, command="probe fit")

    st = sub.add_parser("stats", help="uncertainty and cost accounting")
    st_sub = st.add_subparsers(metavar="METRIC", required=True)
    p = st_sub.add_parser(
        "wilson", parents=[report], help="Wilson interval and Wald SE of a proportion"
    )
    p.add_argument("--p", type=float, required=True, help="observed proportion")
    p.add_argument("--n", type=int, required=True, help="sample size")
    p.add_argument("--confidence", type=float, default=0.95)
    p.set_defaults(handler=_cmd_stats_wilson, command="stats wilson")
    p = st_sub.add_parser(
        "nfe", parents=[report], help="function evaluations of a sampling run"
    )
    p.add_argument("--steps", type=int, required=True, help="sampling steps per image")
    p.add_argument(
        "--cfg",
        action=argparse.BooleanOptionalAction,
        default=True,
        help="classifier-free guidance doubles per-step cost",
    )
    p.add_argument("--iters", type=int, default=1, help="images generated in the loop")
    p.set_defaults(handler=_cmd_stats_nfe, command="stats nfe")
    p = st_sub.add_parser(
        "hist", parents=[report], help="iteration histogram of a trajectory file"
    )
    p.add_argument("--traj", required=True, help="trajectory JSONL")
    p.set_defaults(handler=_cmd_stats_hist, command="stats hist")
    p = st_sub.add_parser(
        "speedup", parents=[report], help="wall-clock ratio base/fast"
    )
    p.add_argument("--base", type=float, required=True, help="baseline seconds")
    p.add_argument("--fast", type=float, required=True, help="accelerated seconds")
    p.set_defaults(handler=_cmd_stats_speedup, command="stats speedup")

    p = sub.add_parser(
        "report", parents=[report], help="validate a report file written by --report"
    )
    p.add_argument("path", help="report JSON to check")
    p.set_defaults(handler=_cmd_report, command="report")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already printed usage/help
        return exc.code if isinstance(exc.code, int) else 2
    try:
        results, input_files = args.handler(args)
        if args.report is not None:
            _write_report(args, results, input_files)
    except (ValueError, TypeError, KeyError, IndexError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":  # pragma: no cover - module execution hook
    raise SystemExit(main())
