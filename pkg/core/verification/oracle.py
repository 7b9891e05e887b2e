"""Differential testing of the vectorized kernels against the loop oracles.

Each trial is fully determined by one integer seed: the seed picks the
config and shape, then draws inputs and parameters. A failing trial is
serialized as a small ``key = value`` document that :func:`replay_case`
turns back into the identical computation.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

import config
from core.attention.config import CONFIG_KEYS, EmimConfig
from core.attention.cost_volume import cost_volume_forward
from core.attention.emim import build_affinity, emim_forward, normalize_affinity
from core.attention.global_attention import global_attention_forward
from core.attention.naive import naive_cost_volume_forward, naive_emim_forward, naive_global_forward
from core.attention.params import EmimParams
from core.attention.projections import project_qkv
from core.attention.volume import TokenVolume
from core.errors import ConfigurationError
from core.kvdoc import parse_kv, render_kv
from core.logger import logger

# Sampling grid for random trials
MAX_FRAMES = 4
MAX_SIDE = 8
MAX_CHANNELS = 16
MAX_HEADS = 2
MAX_RADIUS = 3
INTERVALS = (1, 2)


@dataclass
class OracleCase:
    seed: int
    cfg: EmimConfig
    shape: tuple

    def to_text(self) -> str:
        t_extent, h, w, c = self.shape
        header = render_kv({"seed": self.seed, "frames": t_extent, "height": h, "width": w, "channels": c})
        return header + self.cfg.to_text()


@dataclass
class TrialResult:
    case: OracleCase
    deviations: dict[str, float]
    normalized_ok: bool

    @property
    def max_deviation(self) -> float:
        return max(self.deviations.values())


@dataclass
class OracleReport:
    tolerance: float
    results: list[TrialResult] = field(default_factory=list)

    @property
    def trials(self) -> int:
        return len(self.results)

    @property
    def max_abs_dev(self) -> float:
        return max((r.max_deviation for r in self.results), default=0.0)

    @property
    def worst(self) -> TrialResult | None:
        return max(self.results, key=lambda r: r.max_deviation, default=None)

    @property
    def normalization_ok(self) -> bool:
        return all(r.normalized_ok for r in self.results)

    @property
    def failing(self) -> TrialResult | None:
        for r in self.results:
            if r.max_deviation > self.tolerance or not r.normalized_ok:
                return r
        return None

    @property
    def passed(self) -> bool:
        return self.failing is None

    def by_mechanism(self) -> dict[str, float]:
        worst: dict[str, float] = {}
        for r in self.results:
            for name, dev in r.deviations.items():
                worst[name] = max(worst.get(name, 0.0), dev)
        return worst


def sample_case(seed: int) -> OracleCase:
    rng = np.random.default_rng(seed)
    radius = int(rng.integers(0, MAX_RADIUS + 1))
    side = int(rng.integers(2 * radius + 1, MAX_SIDE + 1))
    heads = int(rng.integers(1, MAX_HEADS + 1))
    head_dim = int(rng.integers(1, MAX_CHANNELS // heads + 1))
    cfg = EmimConfig(
        radius=radius,
        interval=int(rng.choice(INTERVALS)),
        heads=heads,
        sampling=str(rng.choice(["sliding", "non_sliding"])),
        boundary=str(rng.choice(["pad_constant", "clamp_edge"])),
        bias_enabled=bool(rng.random() < 0.8),
    )
    shape = (int(rng.integers(1, MAX_FRAMES + 1)), side, side, heads * head_dim)
    return OracleCase(seed, cfg, shape)


def run_case(case: OracleCase) -> TrialResult:
    """Compare vectorized and loop forwards on one case.

    The windowed module runs under the case's sampling mode; global attention
    and the cost-volume baseline run on the same input and parameters.
    """
    case.cfg.validate_for(case.shape)
    rng = np.random.default_rng((case.seed, 1))
    x = TokenVolume(rng.standard_normal(case.shape))
    params = EmimParams.init(case.shape[-1], case.cfg, rng)

    windowed = emim_forward(x, params, case.cfg).values
    windowed_ref = naive_emim_forward(x, params, case.cfg).values
    glob = global_attention_forward(x, params.attention, case.cfg.heads).values
    glob_ref = naive_global_forward(x, params.attention, case.cfg.heads).values
    cost = cost_volume_forward(x, params, case.cfg).values
    cost_ref = naive_cost_volume_forward(x, params, case.cfg).values

    q, k, _ = project_qkv(x.values, params.attention)
    normalized = normalize_affinity(build_affinity(TokenVolume(q), TokenVolume(k), params.bias, case.cfg))

    deviations = {
        case.cfg.sampling: float(np.max(np.abs(windowed - windowed_ref))),
        "global": float(np.max(np.abs(glob - glob_ref))),
        "cost_volume": float(np.max(np.abs(cost - cost_ref))),
    }
    result = TrialResult(case, deviations, normalized.is_probability_field())
    logger.debug(f"Oracle trial seed={case.seed} shape={case.shape} max dev {result.max_deviation:.2e}")
    return result


def trial_seeds(seed: int, trials: int) -> list[int]:
    return [int(s) for s in np.random.default_rng(seed).integers(0, 2**31 - 1, size=trials)]


def oracle_equivalence(
    trials: int,
    seed: int = config.DEFAULT_SEED,
    tolerance: float = config.ORACLE_TOLERANCE,
    threads: int = config.DEFAULT_THREADS,
    cases: list[OracleCase] | None = None,
) -> OracleReport:
    """Run ``trials`` seeded random cases (or the given ``cases``).

    Results keep trial order whatever the thread count.

    Raises:
        ConfigurationError: If ``trials`` is below 1.
    """
    if cases is None:
        if trials < 1:
            raise ConfigurationError(f"trials must be at least 1, got {trials}")
        cases = [sample_case(s) for s in trial_seeds(seed, trials)]
    logger.info(f"Oracle equivalence: {len(cases)} trials, tolerance {tolerance:g}, {threads} thread(s)")
    if threads <= 1:
        results = [run_case(c) for c in cases]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run_case, cases))
    report = OracleReport(tolerance, results)
    if report.failing is not None:
        logger.warning(f"Oracle mismatch, replay with:\n{report.failing.case.to_text()}")
    return report


def parse_case(text: str) -> OracleCase:
    """Inverse of :meth:`OracleCase.to_text`."""
    raw = parse_kv(text)
    try:
        seed = int(raw.pop("seed"))
        shape = tuple(int(raw.pop(key)) for key in ("frames", "height", "width", "channels"))
    except (KeyError, ValueError) as exc:
        raise ConfigurationError(f"bad oracle case document: {exc}") from exc
    cfg_text = render_kv({key: raw[key] for key in CONFIG_KEYS if key in raw})
    extra = set(raw) - set(CONFIG_KEYS)
    if extra:
        raise ConfigurationError(f"unknown keys in oracle case: {sorted(extra)}")
    return OracleCase(seed, EmimConfig.from_text(cfg_text), shape)


def replay_case(text: str) -> TrialResult:
    return run_case(parse_case(text))


def case_summary(case: OracleCase) -> dict:
    return {"seed": case.seed, "shape": list(case.shape), **asdict(case.cfg)}
