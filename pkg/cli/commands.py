"""Subcommand implementations.

Every command takes the parsed arguments, its output directory and the run
manifest, writes its reports, prints a text summary to stdout and returns
an exit code.
"""

import statistics
import time
from argparse import Namespace
from collections import Counter
from pathlib import Path

import numpy as np

import config
from cli.manifest import RunManifest
from core.attention.config import EmimConfig
from core.attention.cost_volume import cost_volume_forward
from core.attention.emim import emim_forward
from core.attention.global_attention import global_attention_forward
from core.attention.params import EmimParams
from core.attention.volume import TokenVolume
from core.defaults import load_defaults
from core.errors import ConfigurationError
from core.logger import logger
from core.model.checkpoint import save_checkpoint
from core.model.stack import BlockPattern, ModelConfig, build_stack
from core.synthetic.motion import gen_direction_dataset, gen_translation_pair, grid_shifts, split_dataset
from core.synthetic.probe import displacement_probe
from core.training.trainer import TrainConfig, train_toy
from core.verification.macs import MAC_MECHANISMS, instrumented_count, mac_count
from core.verification.oracle import case_summary, replay_case
from core.verification.reports import make_report, render_text, write_json, write_text
from core.verification.suites import get_summary, run_grad_suite, run_invariants_suite, run_oracle_suite

# Largest token count for which the loop oracles are run by `bench --instrument`
INSTRUMENT_TOKEN_LIMIT = 512


def mechanism_config(args: Namespace, radius: int | None = None) -> EmimConfig:
    """Mechanism defaults from data/defaults.yaml overridden by CLI flags."""
    d = load_defaults().mechanism
    base = EmimConfig(
        radius=d.radius,
        interval=d.interval,
        heads=d.heads,
        sampling=d.sampling,
        boundary=d.boundary,
        pad_value=float(d.pad_value),
        bias_enabled=bool(d.bias_enabled),
    )
    return base.with_overrides(
        radius=radius,
        interval=getattr(args, "interval", None),
        heads=getattr(args, "heads", None),
        sampling=getattr(args, "sampling", None),
        boundary=getattr(args, "boundary", None),
    )


def _emit(out_dir: Path, stem: str, report: dict, text: str, manifest: RunManifest) -> None:
    manifest.add_output(write_json(out_dir / f"{stem}.json", report))
    manifest.add_output(write_text(out_dir / f"{stem}.txt", text))
    print(text, end="")


# ── check ──────────────────────────────────────────────────────────────────


def cmd_check(args: Namespace, out_dir: Path, manifest: RunManifest) -> int:
    if args.replay:
        return _replay(args, out_dir, manifest)

    suites = ["grad", "oracle", "invariants"] if args.suite == "all" else [args.suite]
    header: dict = {"suite": args.suite, "seed": args.seed}
    tables = []
    sections: dict = {}
    passed = True
    max_rel_err = max_abs_err = tolerance = failing_seed = None

    if "grad" in suites:
        tol = args.tolerance if args.tolerance is not None else config.GRAD_TOLERANCE
        grad = run_grad_suite(args.seed, tol)
        passed &= grad.passed
        max_rel_err, max_abs_err, tolerance = grad.max_rel_err, grad.max_abs_err, tol
        sections["grad"] = {"passed": grad.passed, "max_rel_err": grad.max_rel_err, "failures": grad.failures}
        header.update({"grad.passed": grad.passed, "grad.max_rel_err": grad.max_rel_err})
        tables.append(("gradients", ["parameter", "max_rel_err", "raw_max_rel_err", "max_abs_err", "checked", "skipped", "ok"],
                       [[e.name, e.gated_rel_err, e.max_rel_err, e.max_abs_err, e.checked, e.skipped, e.passed(tol)]
                        for e in grad.entries]))

    if "oracle" in suites:
        tol = args.tolerance if args.tolerance is not None else config.ORACLE_TOLERANCE
        oracle = run_oracle_suite(args.seed, args.trials, tol, args.threads)
        passed &= oracle.passed
        max_abs_err, tolerance = oracle.max_abs_dev, tol
        failing = oracle.failing
        if failing is not None:
            failing_seed = failing.case.seed
            case_path = write_text(out_dir / "failing_case.cfg", failing.case.to_text())
            manifest.add_output(case_path)
            header["replay"] = str(case_path)
        sections["oracle"] = {
            "passed": oracle.passed,
            "trials": oracle.trials,
            "max_abs_dev": oracle.max_abs_dev,
            "normalization_ok": oracle.normalization_ok,
            "by_mechanism": oracle.by_mechanism(),
            "worst_case": case_summary(oracle.worst.case) if oracle.worst else None,
        }
        header.update({"oracle.passed": oracle.passed, "oracle.trials": oracle.trials,
                       "oracle.max_abs_dev": oracle.max_abs_dev})
        tables.append(("oracle", ["mechanism", "max_abs_dev"],
                       [[name, dev] for name, dev in oracle.by_mechanism().items()]))

    if "invariants" in suites:
        results = run_invariants_suite(args.seed)
        ok, failed = get_summary(results)
        passed &= failed == 0
        sections["invariants"] = {r.name: r.passed for r in results}
        header.update({"invariants.passed": ok, "invariants.failed": failed})
        tables.append(("invariants", ["check", "ok", "detail"], [[r.name, r.passed, r.message] for r in results]))

    header["passed"] = passed
    report = make_report(max_rel_err, max_abs_err, tolerance, passed, failing_seed, suites=sections)
    _emit(out_dir, "check", report, render_text("check", header, tables), manifest)
    return config.EXIT_OK if passed else config.EXIT_GATE_FAILED


def _replay(args: Namespace, out_dir: Path, manifest: RunManifest) -> int:
    path = Path(args.replay)
    if not path.exists():
        raise ConfigurationError(f"replay file not found: {path}")
    result = replay_case(path.read_text())
    tol = args.tolerance if args.tolerance is not None else config.ORACLE_TOLERANCE
    passed = result.max_deviation <= tol and result.normalized_ok
    report = make_report(None, result.max_deviation, tol, passed, result.case.seed, deviations=result.deviations)
    header = {"replay": str(path), "seed": result.case.seed, "max_abs_dev": result.max_deviation, "passed": passed}
    _emit(out_dir, "replay", report, render_text("replay", header), manifest)
    return config.EXIT_OK if passed else config.EXIT_GATE_FAILED


# ── bench ──────────────────────────────────────────────────────────────────


def _time_forward(mechanism: str, cfg: EmimConfig, shape: tuple, repeats: int, seed: int) -> float:
    rng = np.random.default_rng(seed)
    x = TokenVolume(rng.standard_normal(shape))
    params = EmimParams.init(shape[-1], cfg, rng)
    runners = {
        "global": lambda: global_attention_forward(x, params.attention, cfg.heads),
        "cost_volume": lambda: cost_volume_forward(x, params, cfg),
    }
    run = runners.get(mechanism, lambda: emim_forward(x, params, cfg))
    samples = []
    for _ in range(repeats):
        start = time.perf_counter()
        run()
        samples.append(time.perf_counter() - start)
    return statistics.median(samples)


def cmd_bench(args: Namespace, out_dir: Path, manifest: RunManifest) -> int:
    bench = load_defaults().bench
    shape = (
        args.frames or bench.frames,
        args.height or bench.height,
        args.width or bench.width,
        args.channels or bench.channels,
    )
    repeats = bench.repeats if args.repeats is None else args.repeats
    mechanisms = list(MAC_MECHANISMS) if args.mechanism in (None, "all") else [args.mechanism]
    radii = args.radius or [mechanism_config(args).radius]
    n_tokens = shape[0] * shape[1] * shape[2]

    rows, timing_rows, ratios = [], [], []
    sections: dict = {}
    passed = True
    for radius in radii:
        cfg = mechanism_config(args, radius)
        cfg.validate_for(shape)
        counts = {}
        for mechanism in mechanisms:
            run_cfg = cfg.with_overrides(sampling="non_sliding") if mechanism == "non_sliding" else cfg
            counts[mechanism] = mac_count(run_cfg, mechanism, shape)
            instrumented = None
            if args.instrument:
                if n_tokens > INSTRUMENT_TOKEN_LIMIT:
                    raise ConfigurationError(
                        f"--instrument runs the loop oracles; {n_tokens} tokens exceeds {INSTRUMENT_TOKEN_LIMIT}"
                    )
                instrumented = instrumented_count(run_cfg, mechanism, shape, args.seed)
                passed &= instrumented == counts[mechanism]
            m = counts[mechanism]
            rows.append([radius, mechanism, m.projection, m.affinity, m.aggregation, m.motion, m.total,
                         "-" if instrumented is None else instrumented == m])
            if repeats > 0:
                timing_rows.append([radius, mechanism, _time_forward(mechanism, run_cfg, shape, repeats, args.seed)])
        windowed, dense = mac_count(cfg, "emim", shape), mac_count(cfg, "global", shape)
        if cfg.window_area < n_tokens:
            passed &= windowed.context < dense.context
        ratios.append([radius, f"{cfg.window_area}/{n_tokens}", windowed.context / dense.context])
        sections[f"radius_{radius}"] = {k: v.as_dict() for k, v in counts.items()}

    header = {
        "shape": list(shape),
        "tokens": n_tokens,
        "repeats": repeats,
        "instrumented": bool(args.instrument),
        "passed": passed,
    }
    tables = [
        ("macs", ["radius", "mechanism", "projection", "affinity", "aggregation", "motion", "total", "instr_ok"], rows),
        ("windowed_vs_global", ["radius", "window/N", "affinity+aggregation ratio"], ratios),
    ]
    if timing_rows:
        tables.append(("timings", ["radius", "mechanism", "median_seconds"], timing_rows))
    report = make_report(None, None, None, passed, None, shape=list(shape), macs=sections,
                         ratios={str(r[0]): r[2] for r in ratios})
    _emit(out_dir, "bench", report, render_text("bench", header, tables), manifest)
    return config.EXIT_OK if passed else config.EXIT_GATE_FAILED


# ── demo-displacement ──────────────────────────────────────────────────────


def cmd_demo_displacement(args: Namespace, out_dir: Path, manifest: RunManifest) -> int:
    demo = load_defaults().demo
    cfg = mechanism_config(args, args.radius[0] if args.radius else None)
    shifts = args.shift or grid_shifts(cfg.radius)
    for shift in shifts:
        if max(abs(shift[0]), abs(shift[1])) > cfg.radius:
            raise ConfigurationError(
                f"shift {shift} exceeds window radius {cfg.radius}: the true offset is outside "
                f"every query's window, so it cannot be recovered"
            )
    seeds = args.seeds or demo.seeds
    side = max(demo.height, 4 * cfg.radius + 2)
    extents = (side, max(demo.width, 4 * cfg.radius + 2))

    confusion: Counter = Counter()
    for shift in shifts:
        for s in range(seeds):
            clip = gen_translation_pair(args.seed + s, extents, shift, max_shift=cfg.radius)
            confusion[(tuple(shift), displacement_probe(clip, cfg))] += 1
    total = sum(confusion.values())
    correct = sum(n for (true, pred), n in confusion.items() if true == pred)
    passed = correct == total

    rows = [[f"{t[0]},{t[1]}", f"{p[0]},{p[1]}", n] for (t, p), n in sorted(confusion.items())]
    header = {"radius": cfg.radius, "extents": list(extents), "seeds": seeds,
              "recovered": correct, "total": total, "passed": passed}
    report = make_report(None, None, None, passed, None, recovered=correct, total=total,
                         confusion=[[list(t), list(p), n] for (t, p), n in sorted(confusion.items())])
    _emit(out_dir, "displacement", report,
          render_text("demo-displacement", header, [("confusion", ["true", "predicted", "count"], rows)]), manifest)
    if not passed:
        logger.warning(f"Displacement recovery {correct}/{total}")
    return config.EXIT_OK if passed else config.EXIT_GATE_FAILED


# ── train-toy ──────────────────────────────────────────────────────────────


def cmd_train_toy(args: Namespace, out_dir: Path, manifest: RunManifest) -> int:
    toy = load_defaults().toy
    classes = args.classes or toy.classes
    heads = args.heads or toy.heads
    emim = mechanism_config(args, args.radius[0] if args.radius else toy.radius).with_overrides(
        heads=heads, interval=args.interval or toy.interval
    )
    model_cfg = ModelConfig(
        depth=args.depth or toy.depth,
        channels=args.channels or toy.channels,
        heads=heads,
        num_classes=classes,
        emim=emim,
        pattern=BlockPattern(args.pattern or toy.pattern),
        patch=toy.patch,
        mechanism=args.mechanism or "emim",
    )
    n_clips = args.clips or (toy.clips // classes) * classes
    clips = gen_direction_dataset(n_clips, args.seed, classes, toy.frames, (toy.height, toy.width), toy.speed)
    train, val = split_dataset(clips, args.seed)
    model = build_stack(model_cfg, seed=args.seed)
    train_cfg = TrainConfig(
        epochs=toy.epochs if args.epochs is None else args.epochs,
        learning_rate=args.lr or toy.learning_rate,
        batch_size=toy.batch_size,
        warmup_fraction=toy.warmup_fraction,
        ablate=tuple(args.ablate or ()),
        threads=args.threads,
        clip_norm=toy.clip_norm,
        fast_matmul=toy.fast_matmul and not args.ordered_matmul,
    )
    manifest.settings.update({"clips": n_clips, "epochs": train_cfg.epochs, "lr": train_cfg.learning_rate,
                            "depth": model_cfg.depth, "channels": model_cfg.channels,
                            "clip_norm": train_cfg.clip_norm, "fast_matmul": train_cfg.fast_matmul})
    logger.info(
        f"Training {model_cfg.mechanism} {''.join(model_cfg.kinds)} on {len(train)} clips "
        f"({len(val)} held out), {classes} classes, {train_cfg.epochs} epochs"
    )
    result = train_toy(model, train, val, train_cfg)

    final = result.final
    passed = args.min_val_acc is None or final.val_acc >= args.min_val_acc
    header = {
        "mechanism": model_cfg.mechanism,
        "pattern": "".join(model_cfg.kinds),
        "classes": classes,
        "train_clips": len(train),
        "val_clips": len(val),
        "ablate": list(train_cfg.ablate) or "none",
        "final_val_acc": final.val_acc,
        "chance": 1.0 / classes,
        "passed": passed,
    }
    rows = [[m.epoch, m.train_loss, m.train_acc, m.val_acc, m.lr] for m in result.history]
    report = make_report(None, None, args.min_val_acc, passed, None,
                         final_val_acc=final.val_acc, history=[m.as_dict() for m in result.history],
                         frozen=result.frozen)
    _emit(out_dir, "metrics", report,
          render_text("train-toy", header, [("epochs", ["epoch", "loss", "train_acc", "val_acc", "lr"], rows)]),
          manifest)
    if args.save_checkpoint:
        manifest.add_output(save_checkpoint(model, out_dir / "checkpoint"))
    return config.EXIT_OK if passed else config.EXIT_GATE_FAILED


COMMANDS = {
    "check": cmd_check,
    "bench": cmd_bench,
    "demo-displacement": cmd_demo_displacement,
    "train-toy": cmd_train_toy,
}
