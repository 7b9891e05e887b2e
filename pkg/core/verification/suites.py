"""The check suites: gradients, oracle equivalence and structural invariants."""

from dataclasses import dataclass

import numpy as np

import config
from core.attention.config import EmimConfig
from core.attention.cost_volume import cost_volume_backward, cost_volume_forward
from core.attention.emim import (
    appearance_forward,
    build_affinity,
    emim_backward,
    emim_forward,
    normalize_affinity,
)
from core.attention.global_attention import global_attention_backward, global_attention_forward
from core.attention.params import AttentionParams, EmimParams
from core.attention.projections import project_qkv
from core.attention.sampling import window_positions
from core.attention.volume import TokenVolume
from core.defaults import load_defaults
from core.logger import logger
from core.model.block import BlockParams, block_forward
from core.model.stack import BlockPattern, ModelConfig, build_stack, model_backward, model_forward
from core.synthetic.motion import gen_translation_pair, grid_shifts
from core.synthetic.probe import displacement_probe
from core.training.objective import cross_entropy
from core.verification.gradcheck import GradCheckReport, check_gradients
from core.verification.macs import instrumented_count, mac_count, radius_sweep
from core.verification.oracle import OracleReport, oracle_equivalence, sample_case

SUITES = ("grad", "oracle", "invariants", "all")


@dataclass
class CheckResult:
    """Outcome of one invariant check."""
    name: str
    passed: bool
    message: str


def get_summary(results: list[CheckResult]) -> tuple[int, int]:
    """Returns (passed_count, failed_count)."""
    passed = sum(1 for r in results if r.passed)
    return passed, len(results) - passed


# ── Gradient suite ─────────────────────────────────────────────────────────


def _check_module(label, forward, backward, x: TokenVolume, params, rng, tolerance, step) -> GradCheckReport:
    weights = 0.5 * rng.standard_normal(x.shape)

    def loss() -> float:
        return float(np.sum(forward(x, params).values * weights))

    _, cache = forward(x, params, return_cache=True)
    g_x, grads = backward(weights, cache)
    analytic = {"x": g_x, **grads.named("p")}
    live = {"x": x.values, **params.named("p")}
    return check_gradients(loss, live, analytic, tolerance, step, label)


def grad_emim_module(seed: int, cfg: EmimConfig, frames: int = 2, side: int = 4, channels: int = 8,
                     tolerance: float = config.GRAD_TOLERANCE, step: float = config.GRAD_STEP) -> GradCheckReport:
    rng = np.random.default_rng(seed)
    x = TokenVolume(rng.standard_normal((frames, side, side, channels)))
    params = EmimParams.init(channels, cfg, rng)
    label = f"emim[{cfg.sampling},{cfg.boundary},tau={cfg.interval}]"
    return _check_module(
        label,
        lambda v, p, return_cache=False: emim_forward(v, p, cfg, return_cache=return_cache),
        emim_backward, x, params, rng, tolerance, step,
    )


def grad_global_module(seed: int, heads: int = 2, frames: int = 2, side: int = 4, channels: int = 8,
                       tolerance: float = config.GRAD_TOLERANCE, step: float = config.GRAD_STEP) -> GradCheckReport:
    rng = np.random.default_rng(seed)
    x = TokenVolume(rng.standard_normal((frames, side, side, channels)))
    params = AttentionParams.init(channels, rng)
    return _check_module(
        "global",
        lambda v, p, return_cache=False: global_attention_forward(v, p, heads, return_cache=return_cache),
        global_attention_backward, x, params, rng, tolerance, step,
    )


def grad_cost_volume_module(seed: int, cfg: EmimConfig, frames: int = 2, side: int = 4, channels: int = 8,
                            tolerance: float = config.GRAD_TOLERANCE,
                            step: float = config.GRAD_STEP) -> GradCheckReport:
    rng = np.random.default_rng(seed)
    x = TokenVolume(rng.standard_normal((frames, side, side, channels)))
    params = EmimParams.init(channels, cfg, rng)
    return _check_module(
        "cost_volume",
        lambda v, p, return_cache=False: cost_volume_forward(v, p, cfg, return_cache=return_cache),
        cost_volume_backward, x, params, rng, tolerance, step,
    )


def grad_model(seed: int, pattern: str = "EO", frames: int = 2, side: int = 4, channels: int = 8,
               tolerance: float = config.GRAD_TOLERANCE, step: float = config.GRAD_STEP) -> GradCheckReport:
    """Whole-model check of a depth-2 stack under the classification loss."""
    rng = np.random.default_rng(seed)
    cfg = ModelConfig(
        depth=2, channels=channels, heads=2, num_classes=4,
        emim=EmimConfig(radius=1), pattern=BlockPattern(pattern),
    )
    model = build_stack(cfg, seed=seed)
    clip = rng.random((frames, side, side, 1))
    label = int(rng.integers(cfg.num_classes))

    def loss() -> float:
        return cross_entropy(model_forward(model, clip), label)[0]

    logits, cache = model_forward(model, clip, return_cache=True)
    _, g_logits = cross_entropy(logits, label)
    analytic = model_backward(model, cache, g_logits)
    return check_gradients(loss, model.named_parameters(), analytic, tolerance, step, f"model[{pattern}]")


def run_grad_suite(seed: int = config.DEFAULT_SEED, tolerance: float = config.GRAD_TOLERANCE,
                   step: float = config.GRAD_STEP) -> GradCheckReport:
    d = load_defaults().check
    dims = dict(frames=d.grad_frames, side=d.grad_height, channels=d.grad_channels,
                tolerance=tolerance, step=step)
    logger.info(f"Gradient suite (seed {seed}, tolerance {tolerance:g}, step {step:g})")
    report = grad_emim_module(seed, EmimConfig(radius=1, heads=2), **dims)
    report = report.merge(grad_emim_module(
        seed + 1, EmimConfig(radius=1, heads=2, sampling="non_sliding", boundary="clamp_edge"), **dims))
    report = report.merge(grad_emim_module(
        seed + 2, EmimConfig(radius=1, heads=1, interval=2, bias_enabled=False),
        **{**dims, "frames": d.grad_frames + 1}))
    report = report.merge(grad_global_module(seed + 3, heads=2, **dims))
    report = report.merge(grad_cost_volume_module(seed + 4, EmimConfig(radius=1, heads=2), **dims))
    report = report.merge(grad_model(seed + 5, "EO", **dims))
    report.label = "grad"
    logger.info(f"Gradient suite {'passed' if report.passed else 'FAILED'}: max rel err {report.max_rel_err:.3e}")
    return report


# ── Oracle suite ───────────────────────────────────────────────────────────


def run_oracle_suite(seed: int = config.DEFAULT_SEED, trials: int | None = None,
                     tolerance: float = config.ORACLE_TOLERANCE,
                     threads: int = config.DEFAULT_THREADS) -> OracleReport:
    trials = load_defaults().check.trials if trials is None else trials
    report = oracle_equivalence(trials, seed, tolerance, threads)
    logger.info(f"Oracle suite {'passed' if report.passed else 'FAILED'}: max deviation {report.max_abs_dev:.3e}")
    return report


# ── Invariant suite ────────────────────────────────────────────────────────


def _check_normalization(seed: int) -> CheckResult:
    bad = []
    for trial in range(20):
        case = sample_case(seed * 1000 + trial)
        rng = np.random.default_rng((case.seed, 2))
        x = rng.standard_normal(case.shape) * 5.0
        params = EmimParams.init(case.shape[-1], case.cfg, rng)
        q, k, _ = project_qkv(x, params.attention)
        field = normalize_affinity(build_affinity(TokenVolume(q), TokenVolume(k), params.bias, case.cfg))
        if not field.is_probability_field():
            bad.append(case.seed)
    return CheckResult("normalized rows", not bad, "20 fuzzed configs" if not bad else f"failing seeds {bad}")


def _check_displacement(seed: int) -> CheckResult:
    demo = load_defaults().demo
    cfg = EmimConfig(radius=3)
    total, correct = 0, 0
    for shift in grid_shifts(3):
        for s in range(demo.seeds):
            clip = gen_translation_pair(seed * 100 + s, (demo.height, demo.width), shift)
            total += 1
            correct += displacement_probe(clip, cfg) == shift
    return CheckResult("displacement recovery", correct == total, f"{correct}/{total} shifts recovered")


def _check_motion_ablation(seed: int) -> CheckResult:
    rng = np.random.default_rng(seed)
    cfg = EmimConfig(radius=1, heads=2)
    x = TokenVolume(rng.standard_normal((2, 5, 5, 8)))
    params = EmimParams.init(8, cfg, rng).without_motion(cfg)
    same = np.array_equal(emim_forward(x, params, cfg).values, appearance_forward(x, params, cfg).values)
    return CheckResult("motion ablation identity", same, "bit-equal to appearance-only" if same else "outputs differ")


def _check_patterns(seed: int) -> CheckResult:
    problems = []
    for pattern in ("EO", "OE", "EE", "OO", "E", "O"):
        for depth in range(1, 7):
            expected = [pattern[i % len(pattern)] for i in range(depth)]
            if BlockPattern(pattern).kinds(depth) != expected:
                problems.append(f"{pattern}@{depth}")
    rng = np.random.default_rng(seed)
    clip = rng.random((2, 4, 4, 1))
    for pattern in ("EO", "OE", "EE", "OO"):
        cfg = ModelConfig(depth=2, channels=8, heads=2, num_classes=4,
                          emim=EmimConfig(radius=1), pattern=BlockPattern(pattern))
        model = build_stack(cfg, seed=seed)
        if model.kinds != list(pattern) or not np.all(np.isfinite(model_forward(model, clip))):
            problems.append(pattern)
    return CheckResult("block patterns", not problems, "E-O, O-E, E-E, O-O realized" if not problems else str(problems))


def _check_residual_identity(seed: int) -> CheckResult:
    rng = np.random.default_rng(seed)
    cfg = EmimConfig(radius=1, heads=2)
    z = TokenVolume(rng.standard_normal((2, 4, 4, 8)))
    ok = True
    for kind in ("E", "O"):
        block = BlockParams.init(kind, 8, cfg, rng)
        attn = block.attn.attention if kind == "E" else block.attn
        for arr in (attn.o.weight, attn.o.bias, block.ffn2.weight, block.ffn2.bias):
            arr[...] = 0.0
        ok &= np.array_equal(block_forward(z, kind, block, cfg).values, z.values)
    return CheckResult("residual identity", bool(ok), "zeroed blocks are the identity" if ok else "block changed its input")


def _check_macs(seed: int) -> CheckResult:
    rng = np.random.default_rng(seed)
    problems = []
    for i in range(load_defaults().check.instrumented_configs):
        radius = int(rng.integers(0, 3))
        side = int(rng.integers(2 * radius + 1, 7))
        heads = int(rng.integers(1, 3))
        shape = (int(rng.integers(1, 3)), side, side, heads * int(rng.integers(1, 4)))
        cfg = EmimConfig(radius=radius, heads=heads)
        for mechanism in ("global", "emim", "non_sliding", "cost_volume"):
            if mac_count(cfg, mechanism, shape) != instrumented_count(cfg, mechanism, shape, seed + i):
                problems.append(f"{mechanism}{shape}/P={radius}")
        n = shape[0] * side * side
        if cfg.window_area < n and not mac_count(cfg, "emim", shape).context < mac_count(cfg, "global", shape).context:
            problems.append(f"windowed not cheaper at {shape}")
    sweep = radius_sweep(EmimConfig(), (8, 14, 14, 64), [1, 2, 3, 4, 5])
    if any(a.total >= b.total for a, b in zip(sweep, sweep[1:])):
        problems.append("radius sweep not increasing")
    return CheckResult("MAC model", not problems, "analytic equals instrumented" if not problems else "; ".join(problems))


def _check_window_bookkeeping(seed: int) -> CheckResult:
    shape = (3, 7, 7, 4)
    sliding = EmimConfig(radius=1, interval=2)
    fixed = sliding.with_overrides(sampling="non_sliding")
    ok = window_positions(1, 3, 3, shape, sliding)[4].frame == 1
    ok &= window_positions(0, 3, 3, shape, sliding)[4].frame == 2
    ok &= all((p.row, p.col) == (1 + s // 3, 1 + s % 3)
              for s, p in enumerate(window_positions(0, 2, 2, shape, sliding)))
    first = [(p.row, p.col) for p in window_positions(0, 0, 0, shape, fixed)]
    ok &= all([(p.row, p.col) for p in window_positions(0, x, y, shape, fixed)] == first
              for x in range(7) for y in range(7))
    single = (1, 5, 5, 4)
    ok &= all(p.frame == 0 for p in window_positions(0, 2, 2, single, sliding))
    return CheckResult("window bookkeeping", bool(ok), "sliding, shared and single-frame windows resolve as expected")


INVARIANT_CHECKS = (
    _check_normalization,
    _check_displacement,
    _check_motion_ablation,
    _check_patterns,
    _check_residual_identity,
    _check_macs,
    _check_window_bookkeeping,
)


def run_invariants_suite(seed: int = config.DEFAULT_SEED) -> list[CheckResult]:
    results = []
    for check in INVARIANT_CHECKS:
        try:
            result = check(seed)
        except Exception as exc:
            logger.exception(f"Invariant check {check.__name__} raised")
            result = CheckResult(check.__name__.removeprefix("_check_"), False, f"raised {exc!r}")
        level = "INFO" if result.passed else "WARNING"
        logger.log(level, f"[{'PASS' if result.passed else 'FAIL'}] {result.name}: {result.message}")
        results.append(result)
    return results
