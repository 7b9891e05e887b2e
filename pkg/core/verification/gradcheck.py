"""Central finite differences against analytic gradients."""

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

import config
from core.errors import DimensionError
from core.logger import logger
from core.tensor.ops import Tensor


def finite_diff_grad(fn: Callable[[Tensor], float], x: Tensor, step: float = config.GRAD_STEP) -> Tensor:
    """Central-difference gradient of a scalar function.

    ``x`` is perturbed in place one coordinate at a time and restored after
    each evaluation, so ``fn`` may close over the very array passed in.
    Coordinates where either evaluation is non-finite come back as NaN.
    """
    grad = np.empty(x.shape)
    flat = x.reshape(-1)
    out = grad.reshape(-1)
    if not np.shares_memory(flat, x):
        raise DimensionError("finite_diff_grad needs a contiguous array", x.shape)
    for i in range(flat.size):
        original = flat[i]
        flat[i] = original + step
        plus = float(fn(x))
        flat[i] = original - step
        minus = float(fn(x))
        flat[i] = original
        if math.isfinite(plus) and math.isfinite(minus):
            out[i] = (plus - minus) / (2.0 * step)
        else:
            out[i] = np.nan
    return grad


@dataclass
class ParamCheck:
    name: str
    max_rel_err: float
    max_abs_err: float
    checked: int
    skipped: int
    nonfinite: int
    # Largest relative error among coordinates whose absolute error exceeds the noise floor
    gated_rel_err: float = 0.0

    def passed(self, tolerance: float) -> bool:
        return self.nonfinite == 0 and self.gated_rel_err < tolerance


@dataclass
class GradCheckReport:
    """Per-parameter comparison of analytic and numeric gradients."""
    tolerance: float
    entries: list[ParamCheck] = field(default_factory=list)
    label: str = ""

    @property
    def passed(self) -> bool:
        return all(e.passed(self.tolerance) for e in self.entries)

    @property
    def max_rel_err(self) -> float:
        return max((e.gated_rel_err for e in self.entries), default=0.0)

    @property
    def max_abs_err(self) -> float:
        return max((e.max_abs_err for e in self.entries), default=0.0)

    @property
    def failures(self) -> list[str]:
        return [e.name for e in self.entries if not e.passed(self.tolerance)]

    def merge(self, other: "GradCheckReport") -> "GradCheckReport":
        return GradCheckReport(self.tolerance, self.entries + other.entries, self.label)


def relative_errors(analytic: Tensor, numeric: Tensor) -> tuple[Tensor, Tensor]:
    """Per-coordinate |a - n| / (|a| + |n| + floor) and the mask of checked coordinates."""
    scale = np.abs(analytic) + np.abs(numeric)
    rel = np.abs(analytic - numeric) / (scale + config.GRAD_CHECK_FLOOR)
    return rel, scale > config.GRAD_CHECK_FLOOR


def compare_gradients(
    analytic: dict[str, Tensor],
    numeric: dict[str, Tensor],
    tolerance: float = config.GRAD_TOLERANCE,
    label: str = "",
) -> GradCheckReport:
    """Build a report from matching analytic and numeric gradient dictionaries.

    Raises:
        DimensionError: If a key is missing or shapes disagree.
    """
    report = GradCheckReport(tolerance, label=label)
    for name, num in numeric.items():
        if name not in analytic:
            raise DimensionError(f"no analytic gradient for {name}")
        ana = np.asarray(analytic[name], dtype=np.float64)
        if ana.shape != num.shape:
            raise DimensionError(f"gradient shapes differ for {name}", ana.shape, num.shape)
        finite = np.isfinite(num)
        rel, checked = relative_errors(ana, np.where(finite, num, 0.0))
        checked &= finite
        abs_all = np.abs(ana - np.where(finite, num, 0.0))
        gated = checked & (abs_all > config.GRAD_NOISE_FLOOR)
        abs_err = abs_all[finite]
        entry = ParamCheck(
            name=f"{label}.{name}" if label else name,
            max_rel_err=float(rel[checked].max()) if checked.any() else 0.0,
            max_abs_err=float(abs_err.max()) if abs_err.size else 0.0,
            checked=int(checked.sum()),
            skipped=int((finite & ~checked).sum()),
            nonfinite=int((~finite).sum()),
            gated_rel_err=float(rel[gated].max()) if gated.any() else 0.0,
        )
        if not entry.passed(tolerance):
            logger.warning(
                f"Gradient mismatch in {entry.name}: rel {entry.max_rel_err:.3e}, "
                f"abs {entry.max_abs_err:.3e}, non-finite {entry.nonfinite}"
            )
        report.entries.append(entry)
    return report


def check_gradients(
    loss_fn: Callable[[], float],
    params: dict[str, Tensor],
    analytic: dict[str, Tensor],
    tolerance: float = config.GRAD_TOLERANCE,
    step: float = config.GRAD_STEP,
    label: str = "",
) -> GradCheckReport:
    """Finite-difference every array in ``params`` (live, perturbed in place).

    ``loss_fn`` takes no arguments and must read the same arrays.
    """
    numeric = {name: finite_diff_grad(lambda _: loss_fn(), arr, step) for name, arr in params.items()}
    return compare_gradients(analytic, numeric, tolerance, label)
