"""Generic fixed-point iteration driver and event-indexed contraction harness.

Every track funnels through :func:`iterate_to_fixpoint`, which walks
``x, step(x), step(step(x)), ...`` until the stabilization condition of the
supplied :class:`StabilizationPolicy` holds and returns an
:class:`IterationReport`.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from .errors import (
    InvalidPolicy,
    InvalidSchedule,
    NonFiniteValue,
    NotConverged,
    UniquenessCheckFailed,
    ZeroDistanceProbe,
)

Metric = Callable[[Any, Any], float]


class Mode(enum.Enum):
    EXACT = "exact"
    NUMERIC = "numeric"


@dataclass(frozen=True)
class StabilizationPolicy:
    """When to call an iterate stable.

    ``EXACT`` stops on ``x == step(x)`` and ignores the tolerances.
    ``NUMERIC`` stops once ``metric(x, step(x)) <= tol_abs + tol_rel * r0``
    where ``r0`` is the first residual of the run.
    """

    mode: Mode = Mode.NUMERIC
    tol_abs: float = 1e-10
    tol_rel: float = 1e-12
    max_iter: int = 100_000

    def __post_init__(self):
        if not isinstance(self.mode, Mode):
            object.__setattr__(self, "mode", Mode(self.mode))
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise InvalidPolicy(f"max_iter must be a positive integer, got {self.max_iter}")
        if self.tol_abs < 0 or self.tol_rel < 0:
            raise InvalidPolicy("tolerances must be nonnegative")
        if self.mode is Mode.NUMERIC and self.tol_abs + self.tol_rel <= 0:
            raise InvalidPolicy("numeric mode needs tol_abs + tol_rel > 0")

    @classmethod
    def exact(cls, max_iter: int = 100_000) -> "StabilizationPolicy":
        return cls(Mode.EXACT, 0.0, 0.0, max_iter)

    @classmethod
    def numeric(cls, tol_abs=1e-10, tol_rel=1e-12, max_iter=100_000) -> "StabilizationPolicy":
        return cls(Mode.NUMERIC, tol_abs, tol_rel, max_iter)

    def accepts(self, residual: float, first_residual: float) -> bool:
        return residual <= self.tol_abs + self.tol_rel * first_residual


DEFAULT_POLICY = StabilizationPolicy()


@dataclass(frozen=True)
class Stage:
    """Finite stage index, or ``Stage.OMEGA`` (``index is None``) for limits
    computed analytically instead of reached by equality."""

    index: int | None

    @property
    def is_omega(self) -> bool:
        return self.index is None

    def __str__(self) -> str:
        return "omega" if self.index is None else str(self.index)


Stage.OMEGA = Stage(None)


@dataclass(frozen=True)
class IterationReport:
    fixed_point: Any
    stage: Stage
    residuals: tuple[float, ...]
    converged: bool
    info: dict = field(default_factory=dict, compare=False)


def euclidean(x, y) -> float:
    return float(np.linalg.norm(np.asarray(x) - np.asarray(y)))


def _same(x, y) -> bool:
    if isinstance(x, np.ndarray) or isinstance(y, np.ndarray):
        return bool(np.array_equal(x, y))
    return bool(x == y)


def _check_finite(value, what: str) -> None:
    if isinstance(value, np.ndarray):
        if value.dtype.kind in "fc" and not np.all(np.isfinite(value)):
            raise NonFiniteValue(f"{what} contains non-finite entries")
    elif isinstance(value, (float, complex, np.floating, np.complexfloating)):
        if not np.isfinite(value):
            raise NonFiniteValue(f"{what} is not finite: {value}")


def iterate_to_fixpoint(
    step: Callable[[Any], Any],
    start: Any,
    metric: Metric = euclidean,
    policy: StabilizationPolicy = DEFAULT_POLICY,
) -> IterationReport:
    """Iterate ``step`` from ``start`` until the policy declares stability.

    ``residuals[k]`` is ``metric(x_k, x_{k+1})``. A converged report at stage
    ``n`` holds ``x_n`` and ``n + 1`` residuals, the last one being the
    residual that satisfied the policy. An exhausted budget yields
    ``converged=False`` at stage ``max_iter`` holding the last iterate.
    """
    _check_finite(start, "start state")
    x = start
    residuals: list[float] = []
    exact = policy.mode is Mode.EXACT
    for n in range(policy.max_iter):
        y = step(x)
        _check_finite(y, f"iterate {n + 1}")
        r = float(metric(x, y))
        if not math.isfinite(r) or r < 0:
            raise NonFiniteValue(f"metric returned {r} at iterate {n}")
        residuals.append(r)
        done = _same(x, y) if exact else policy.accepts(r, residuals[0])
        if done:
            return IterationReport(x, Stage(n), tuple(residuals), True)
        x = y
    return IterationReport(x, Stage(policy.max_iter), tuple(residuals), False)


# -- event-indexed contraction ----------------------------------------------

@dataclass(frozen=True)
class EventSchedule:
    """Event times ``n_k`` with declared contraction factors ``lambda_k``.

    Only the supplied finite prefix is ever inspected; whether the infinite
    product of factors vanishes cannot be decided from it.
    """

    event_indices: tuple[int, ...]
    factors: tuple[float, ...]

    def __post_init__(self):
        idx = tuple(int(n) for n in self.event_indices)
        fac = tuple(float(f) for f in self.factors)
        object.__setattr__(self, "event_indices", idx)
        object.__setattr__(self, "factors", fac)
        if not idx:
            raise InvalidSchedule("schedule is empty")
        if len(idx) != len(fac):
            raise InvalidSchedule("event_indices and factors differ in length")
        if idx[0] < 1 or any(b <= a for a, b in zip(idx, idx[1:])):
            raise InvalidSchedule("event indices must be strictly increasing positive integers")
        if not all(0.0 < f < 1.0 for f in fac):
            raise InvalidSchedule("every factor must lie in the open interval (0, 1)")

    @property
    def running_products(self) -> tuple[float, ...]:
        return tuple(np.cumprod(self.factors).tolist())

    def __len__(self):
        return len(self.event_indices)


@dataclass(frozen=True)
class EventObservation:
    probe: int
    k: int
    event_index: int
    ratio: float
    declared: float
    compliant: bool


@dataclass(frozen=True)
class ContractionEvidence:
    observations: tuple[EventObservation, ...]
    prefix_product: float

    @property
    def violations(self) -> tuple[EventObservation, ...]:
        return tuple(o for o in self.observations if not o.compliant)

    @property
    def compliant(self) -> bool:
        return not self.violations


def verify_event_contraction(
    step: Callable[[Any], Any],
    schedule: EventSchedule,
    probes: Sequence[tuple[Any, Any]],
    metric: Metric = euclidean,
    slack: float = 1e-12,
) -> ContractionEvidence:
    """Falsification harness: compare observed ratios
    ``metric(T^n_k x, T^n_k y) / metric(x, y)`` against the declared factors.

    A compliant result is evidence, not a proof of contraction.
    """
    if not probes:
        raise ZeroDistanceProbe("no probe pairs supplied")
    observations = []
    for p, (x, y) in enumerate(probes):
        d0 = float(metric(x, y))
        if d0 == 0.0:
            raise ZeroDistanceProbe(f"probe {p} has zero distance")
        n = 0
        for k, (n_k, lam) in enumerate(zip(schedule.event_indices, schedule.factors), start=1):
            while n < n_k:
                x, y = step(x), step(y)
                n += 1
            _check_finite(x, f"probe {p} orbit")
            _check_finite(y, f"probe {p} orbit")
            ratio = float(metric(x, y)) / d0
            observations.append(
                EventObservation(p, k, n_k, ratio, lam, ratio <= lam + slack)
            )
    return ContractionEvidence(tuple(observations), float(np.prod(schedule.factors)))


def _unit_offset(start):
    if np.isscalar(start):
        return start + 1
    arr = np.array(start, dtype=np.result_type(np.asarray(start).dtype, float), copy=True)
    arr.flat[0] += 1
    return arr


def contraction_fixed_point(
    step: Callable[[Any], Any],
    schedule: EventSchedule | None,
    start: Any,
    metric: Metric = euclidean,
    policy: StabilizationPolicy = DEFAULT_POLICY,
    second_start: Any = None,
) -> IterationReport:
    """Fixed point of a (declared) event-indexed contraction, with uniqueness
    exercised by a second run.

    The second run starts at ``second_start`` or, by default, at ``start``
    shifted by one along its first coordinate. Both limits must agree within
    ``10 * tol_abs`` (exact equality under an exact policy).
    """
    if second_start is None:
        second_start = _unit_offset(start)
    first = iterate_to_fixpoint(step, start, metric, policy)
    if not first.converged:
        raise NotConverged("iteration from the first start did not stabilize", first)
    second = iterate_to_fixpoint(step, second_start, metric, policy)
    if not second.converged:
        raise NotConverged("iteration from the second start did not stabilize", second)

    gap = float(metric(first.fixed_point, second.fixed_point))
    if policy.mode is Mode.EXACT:
        agree = _same(first.fixed_point, second.fixed_point)
    else:
        agree = gap <= 10 * policy.tol_abs
    if not agree:
        raise UniquenessCheckFailed(
            f"limits from the two starts differ by {gap:.3e}; the map has more than one fixed point"
        )

    info = {
        "second_start": second_start,
        "second_fixed_point": second.fixed_point,
        "second_stage": second.stage,
        "limit_gap": gap,
    }
    if schedule is not None:
        info["evidence"] = verify_event_contraction(
            step, schedule, [(start, second_start)], metric
        )
    return IterationReport(first.fixed_point, first.stage, first.residuals, True, info)
